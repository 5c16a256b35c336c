//! Scalar parabolic problems in one space dimension.
//!
//! Every flow in the crate reduces to a diffusion equation along a single
//! N-curve: a circle for closed fibers, an interval with pinned ends for the
//! Reeb strip. This module holds the grids, the implicit time steppers, the
//! closed-form reference solutions and the decay-rate fit.

mod decay;
mod kernel;
mod solvers;
pub mod tridiag;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::companion::symmetric_part_eigenvalues;
use crate::error::{Error, Result};

pub(crate) use solvers::guard_cn;
pub use decay::{fit_exponential_decay, DecayFit};
pub use kernel::{convolve_line, heat_kernel, theta_solution, LineField, KERNEL_WINDOW};
pub use solvers::{
    quasilinear_step, solve_heat_circle, solve_quasilinear_divergence,
    solve_variable_heat_circle, theta_step, variable_heat_step, DiffusionOperator,
};

/// Fewest nodes a [`CircleField`] may have.
pub const MIN_NODES: usize = 8;

/// Samples of a function on a circle of circumference `length`, at the
/// uniform nodes `x_i = i * length / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleField {
    length: f64,
    samples: Vec<f64>,
}

impl CircleField {
    pub fn new(length: f64, samples: Vec<f64>) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidInput(format!("circumference must be positive, got {length}")));
        }
        if samples.len() < MIN_NODES {
            return Err(Error::InvalidInput(format!(
                "need at least {MIN_NODES} nodes, got {}",
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite sample".into()));
        }
        Ok(Self { length, samples })
    }

    /// Circumference `2 pi`.
    pub fn standard(samples: Vec<f64>) -> Result<Self> {
        Self::new(2.0 * PI, samples)
    }

    pub fn from_fn(n: usize, length: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = length / n as f64;
        Self::new(length, (0..n).map(|i| f(i as f64 * h)).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn h(&self) -> f64 {
        self.length / self.samples.len() as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Same grid, new values.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != self.len() {
            return Err(Error::InvalidInput("sample count differs from grid".into()));
        }
        Self::new(self.length, samples)
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.len() as f64
    }

    /// `sum u_i h`, the discrete integral.
    pub fn integral(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.h()
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(sum u_i^2 h)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.samples.iter().map(|v| v * v).sum::<f64>() * self.h()).sqrt()
    }

    /// Sup norm of `u - c`.
    pub fn sup_distance_to(&self, c: f64) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max((v - c).abs()))
    }

    /// L2 norm of `u - c`.
    pub fn l2_distance_to(&self, c: f64) -> f64 {
        (self.samples.iter().map(|v| (v - c) * (v - c)).sum::<f64>() * self.h()).sqrt()
    }

    /// Sup norm of the difference of two fields on the same grid.
    pub fn sup_distance(&self, other: &CircleField) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Central difference `d_x u`.
    pub fn derivative(&self) -> CircleField {
        let n = self.len();
        let h = self.h();
        let u = &self.samples;
        let d = (0..n)
            .map(|i| (u[(i + 1) % n] - u[(i + n - 1) % n]) / (2.0 * h))
            .collect();
        CircleField {
            length: self.length,
            samples: d,
        }
    }
}

pub type FnOfU = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type FnOfTX = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum ConductivityKind {
    Constant(f64),
    /// Values at the grid nodes, fixed in time.
    Tabulated(Vec<f64>),
    OfU(FnOfU),
    OfTX(FnOfTX),
}

impl fmt::Debug for ConductivityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::Tabulated(v) => write!(f, "Tabulated({} values)", v.len()),
            Self::OfU(_) => write!(f, "OfU(..)"),
            Self::OfTX(_) => write!(f, "OfTX(..)"),
        }
    }
}

/// Diffusivity with the bounds `c1 <= k <= c2` that a run must respect.
/// `c1 = 0` admits a degenerate equation; runs using it are flagged.
#[derive(Debug, Clone)]
pub struct Conductivity {
    pub kind: ConductivityKind,
    pub c1: f64,
    pub c2: f64,
}

impl Conductivity {
    pub fn new(kind: ConductivityKind, c1: f64, c2: f64) -> Result<Self> {
        if !(c1 >= 0.0 && c2 >= c1 && c2.is_finite()) {
            return Err(Error::InvalidInput(format!("need 0 <= c1 <= c2 < inf, got [{c1}, {c2}]")));
        }
        if let ConductivityKind::Tabulated(v) = &kind {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("non-finite tabulated conductivity".into()));
            }
        }
        Ok(Self { kind, c1, c2 })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(ConductivityKind::Constant(c), c, c)
    }

    pub fn of_u(f: impl Fn(f64) -> f64 + Send + Sync + 'static, c1: f64, c2: f64) -> Result<Self> {
        Self::new(ConductivityKind::OfU(Arc::new(f)), c1, c2)
    }

    pub fn of_tx(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static, c1: f64, c2: f64) -> Result<Self> {
        Self::new(ConductivityKind::OfTX(Arc::new(f)), c1, c2)
    }

    pub fn tabulated(values: Vec<f64>, c1: f64, c2: f64) -> Result<Self> {
        Self::new(ConductivityKind::Tabulated(values), c1, c2)
    }

    pub fn is_degenerate(&self) -> bool {
        self.c1 == 0.0
    }

    /// Errors unless `c1 <= value <= c2` up to relative round-off.
    pub fn check(&self, value: f64, t: f64) -> Result<()> {
        let slack = 1e-12 * self.c2.max(1.0);
        if !value.is_finite() || value < self.c1 - slack || value > self.c2 + slack {
            return Err(Error::ConductivityBound {
                value,
                c1: self.c1,
                c2: self.c2,
                t,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    ImplicitEuler,
    CrankNicolson,
}

impl Scheme {
    /// Weight of the new time level.
    pub fn theta(self) -> f64 {
        match self {
            Scheme::ImplicitEuler => 1.0,
            Scheme::CrankNicolson => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub scheme: Scheme,
    /// Cap on Picard iterations per step for nonlinear problems.
    pub nonlinear_iterations: usize,
    /// Picard stopping threshold on the sup-norm update, relative to
    /// `max(1, sup|u|)`.
    pub tolerance: f64,
    /// Keep every `record_every`-th step in the trajectory (the final state
    /// is always kept).
    pub record_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            scheme: Scheme::ImplicitEuler,
            nonlinear_iterations: 25,
            tolerance: 1e-12,
            record_every: 1,
        }
    }
}

impl SolverConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self { dt, ..Self::default() }
    }

    pub fn crank_nicolson(mut self) -> Self {
        self.scheme = Scheme::CrankNicolson;
        self
    }

    pub fn recording_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.nonlinear_iterations == 0 || self.record_every == 0 {
            return Err(Error::InvalidInput("iteration cap and record stride must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of steps and the step actually used so that the last one lands
    /// on `t_end`.
    pub fn steps_for(&self, t_end: f64) -> Result<(usize, f64)> {
        self.validate()?;
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidInput(format!("end time must be >= 0, got {t_end}")));
        }
        if t_end == 0.0 {
            return Ok((0, self.dt));
        }
        let n = ((t_end / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Ok((n, t_end / n as f64))
    }
}

/// Recorded states of a run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CircleField>,
    /// The run used a conductivity with `c1 = 0`.
    pub degenerate: bool,
    /// Largest number of nonlinear iterations any step needed (0 for linear runs).
    pub max_iterations: usize,
    /// Non-fatal diagnostics raised before or during the run.
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn last(&self) -> &CircleField {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial time")
    }

    /// `(t, norm(u(t)))` pairs.
    pub fn norm_series(&self, norm: impl Fn(&CircleField) -> f64) -> Vec<(f64, f64)> {
        self.times.iter().zip(&self.states).map(|(&t, u)| (t, norm(u))).collect()
    }
}

/// `<A v, v> >= c <v, v>` with `c` the smallest eigenvalue of the symmetric
/// part of `A`; parabolic iff `c > 0`.
pub fn parabolicity_check(a: &DMatrix<f64>) -> Result<(bool, f64)> {
    let c = symmetric_part_eigenvalues(a)?[0];
    Ok((c > 0.0, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_basics() {
        let f = CircleField::from_fn(16, 2.0 * PI, |x| x.cos()).unwrap();
        assert_eq!(f.len(), 16);
        assert!(f.mean().abs() < 1e-15);
        assert!((f.sup_norm() - 1.0).abs() < 1e-15);
        assert!((f.l2_norm() - PI.sqrt()).abs() < 1e-12);
        assert!(CircleField::standard(vec![0.0; 4]).is_err());
        assert!(CircleField::standard(vec![f64::NAN; 8]).is_err());
        assert!(CircleField::new(-1.0, vec![0.0; 8]).is_err());
    }

    #[test]
    fn config_steps_land_on_end_time() {
        let cfg = SolverConfig::with_dt(0.3);
        let (n, dt) = cfg.steps_for(1.0).unwrap();
        assert_eq!(n, 4);
        assert!((dt * n as f64 - 1.0).abs() < 1e-15);
        assert_eq!(SolverConfig::with_dt(1e-3).steps_for(1.0).unwrap().0, 1000);
        assert!(SolverConfig::with_dt(0.0).validate().is_err());
        assert!(cfg.steps_for(-1.0).is_err());
    }

    #[test]
    fn conductivity_bounds() {
        let k = Conductivity::of_u(|u| 1.0 / (1.0 + u * u), 0.5, 1.0).unwrap();
        assert!(k.check(0.7, 0.0).is_ok());
        assert!(matches!(k.check(0.4, 2.0), Err(Error::ConductivityBound { t, .. }) if t == 2.0));
        assert!(Conductivity::constant(-1.0).is_err());
        assert!(Conductivity::tabulated(vec![0.0, 1.0], 0.0, 1.0).unwrap().is_degenerate());
    }

    #[test]
    fn parabolicity_examples() {
        assert_eq!(parabolicity_check(&DMatrix::identity(3, 3)).unwrap(), (true, 1.0));
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]));
        assert_eq!(parabolicity_check(&d).unwrap(), (false, -1.0));
        let b = crate::companion::build_companion(&crate::symfun::ElemSymVector::from_tail(&[1.0, 2.0, 0.5]).unwrap());
        let w = crate::companion::weighted_power_matrix(&[0.0, 2.0], &b).unwrap();
        let (ok, c) = parabolicity_check(&w).unwrap();
        assert!(ok && (c - 1.0).abs() < 1e-14);
    }
}
