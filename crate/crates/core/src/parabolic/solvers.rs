//! Theta-scheme steppers for `u_t = outer * (inner u_x)_x`.

use super::tridiag::{solve_cyclic_tridiagonal, solve_tridiagonal};
use super::{CircleField, Conductivity, ConductivityKind, Scheme, SolverConfig, Trajectory};
use crate::error::{Error, Result};

/// Crank-Nicolson damps the grid-scale mode by `|1 - 2r| / (1 + 2r)`; past
/// this `r = k dt / h^2` that factor is above 0.999 and the run is refused.
const CN_MAX_MESH_RATIO: f64 = 1000.0;

/// Discrete `L u_i = outer_i (inner_{i+1/2}(u_{i+1} - u_i) - inner_{i-1/2}(u_i - u_{i-1})) / h^2`.
///
/// On a circle `inner[i]` sits on the face between nodes `i` and `i+1 (mod N)`.
/// On an interval there are `N - 1` faces and the end nodes are held fixed.
#[derive(Debug, Clone)]
pub struct DiffusionOperator {
    pub outer: Vec<f64>,
    pub inner: Vec<f64>,
    pub h: f64,
    pub periodic: bool,
}

impl DiffusionOperator {
    pub fn new(outer: Vec<f64>, inner: Vec<f64>, h: f64, periodic: bool) -> Result<Self> {
        let n = outer.len();
        let faces = if periodic { n } else { n.saturating_sub(1) };
        if n < 3 || inner.len() != faces {
            return Err(Error::InvalidInput(format!(
                "operator needs >= 3 nodes and {faces} face values, got {} nodes and {} faces",
                n,
                inner.len()
            )));
        }
        if !(h > 0.0) {
            return Err(Error::InvalidInput(format!("grid spacing must be positive, got {h}")));
        }
        Ok(Self { outer, inner, h, periodic })
    }

    pub fn len(&self) -> usize {
        self.outer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outer.is_empty()
    }

    /// `(lo_i, up_i)` with `L u_i = lo_i (u_{i-1} - u_i) + up_i (u_{i+1} - u_i)`.
    fn weights(&self, i: usize) -> (f64, f64) {
        let n = self.len();
        let h2 = self.h * self.h;
        if self.periodic {
            let lo = self.inner[(i + n - 1) % n];
            let up = self.inner[i];
            (self.outer[i] * lo / h2, self.outer[i] * up / h2)
        } else if i == 0 || i == n - 1 {
            (0.0, 0.0)
        } else {
            (self.outer[i] * self.inner[i - 1] / h2, self.outer[i] * self.inner[i] / h2)
        }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let (lo, up) = self.weights(i);
                let (l, r) = if self.periodic {
                    (u[(i + n - 1) % n], u[(i + 1) % n])
                } else if i == 0 || i == n - 1 {
                    (u[i], u[i])
                } else {
                    (u[i - 1], u[i + 1])
                };
                lo * (l - u[i]) + up * (r - u[i])
            })
            .collect()
    }

    /// Largest `lo_i + up_i`, times `h^2 / 2`: the effective diffusivity.
    fn max_diffusivity(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                let (lo, up) = self.weights(i);
                0.5 * (lo + up) * self.h * self.h
            })
            .fold(0.0, f64::max)
    }
}

/// One step of `(I - theta dt L_new) u' = (I + (1 - theta) dt L_old) u`.
pub fn theta_step(
    u: &[f64],
    op_old: &DiffusionOperator,
    op_new: &DiffusionOperator,
    dt: f64,
    theta: f64,
) -> Vec<f64> {
    let n = u.len();
    let mut rhs = u.to_vec();
    if theta < 1.0 {
        let lu = op_old.apply(u);
        for (r, l) in rhs.iter_mut().zip(lu) {
            *r += (1.0 - theta) * dt * l;
        }
    }
    let mut a = vec![0.0; n];
    let mut b = vec![1.0; n];
    let mut c = vec![0.0; n];
    for i in 0..n {
        let (lo, up) = op_new.weights(i);
        a[i] = -theta * dt * lo;
        c[i] = -theta * dt * up;
        b[i] = 1.0 + theta * dt * (lo + up);
    }
    if op_new.periodic {
        solve_cyclic_tridiagonal(&a, &b, &c, &rhs)
    } else {
        solve_tridiagonal(&a, &b, &c, &rhs)
    }
}

pub(crate) fn guard_cn(scheme: Scheme, op: &DiffusionOperator, dt: f64) -> Result<()> {
    if scheme == Scheme::CrankNicolson {
        let r = op.max_diffusivity() * dt / (op.h * op.h);
        if r > CN_MAX_MESH_RATIO {
            return Err(Error::Unstable(format!(
                "Crank-Nicolson mesh ratio k dt / h^2 = {r:.3e} exceeds {CN_MAX_MESH_RATIO}; \
                 grid-scale modes would not be damped"
            )));
        }
    }
    Ok(())
}

/// Node values of a non-divergence conductivity at time `t`.
fn nodal_conductivity(u: &CircleField, k: &Conductivity, t: f64) -> Result<Vec<f64>> {
    let n = u.len();
    let vals: Vec<f64> = match &k.kind {
        ConductivityKind::Constant(c) => vec![*c; n],
        ConductivityKind::Tabulated(v) => {
            if v.len() != n {
                return Err(Error::InvalidInput(format!(
                    "tabulated conductivity has {} values for {n} nodes",
                    v.len()
                )));
            }
            v.clone()
        }
        ConductivityKind::OfTX(f) => (0..n).map(|i| f(t, u.x(i))).collect(),
        ConductivityKind::OfU(_) => {
            return Err(Error::InvalidInput(
                "a conductivity depending on u needs the quasilinear solver".into(),
            ))
        }
    };
    for &v in &vals {
        k.check(v, t)?;
    }
    Ok(vals)
}

fn variable_operator(u: &CircleField, k: &Conductivity, t: f64) -> Result<DiffusionOperator> {
    DiffusionOperator::new(nodal_conductivity(u, k, t)?, vec![1.0; u.len()], u.h(), true)
}

/// One step of `v_t = k(t, x) v_xx` from `t` to `t + dt`.
pub fn variable_heat_step(
    u: &CircleField,
    k: &Conductivity,
    t: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<CircleField> {
    let op_new = variable_operator(u, k, t + dt)?;
    guard_cn(scheme, &op_new, dt)?;
    let op_old = if scheme == Scheme::CrankNicolson {
        variable_operator(u, k, t)?
    } else {
        op_new.clone()
    };
    u.with_samples(theta_step(u.samples(), &op_old, &op_new, dt, scheme.theta()))
}

fn face_conductivity(u: &[f64], k: &Conductivity, t: f64) -> Result<Vec<f64>> {
    let n = u.len();
    let vals: Vec<f64> = match &k.kind {
        ConductivityKind::Constant(c) => vec![*c; n],
        ConductivityKind::OfU(f) => (0..n).map(|i| f(0.5 * (u[i] + u[(i + 1) % n]))).collect(),
        _ => {
            return Err(Error::InvalidInput(
                "the divergence-form solver takes a constant or u-dependent conductivity".into(),
            ))
        }
    };
    for &v in &vals {
        k.check(v, t)?;
    }
    Ok(vals)
}

/// One step of `u_t = (k(u) u_x)_x` by lagged-coefficient Picard iteration.
///
/// Face conductivities use the average of the two neighbouring values. For
/// Crank-Nicolson they are taken at the midpoint `(u^n + u^{n+1}) / 2`, so
/// the same operator appears on both sides. Returns the new state and the
/// number of iterations used.
pub fn quasilinear_step(
    u: &CircleField,
    k: &Conductivity,
    t: f64,
    dt: f64,
    cfg: &SolverConfig,
) -> Result<(CircleField, usize)> {
    let theta = cfg.scheme.theta();
    let u0 = u.samples();
    let n = u0.len();
    let mut guess = u0.to_vec();
    let mut update = f64::INFINITY;
    for it in 1..=cfg.nonlinear_iterations {
        let lag: Vec<f64> = match cfg.scheme {
            Scheme::ImplicitEuler => guess.clone(),
            Scheme::CrankNicolson => (0..n).map(|i| 0.5 * (u0[i] + guess[i])).collect(),
        };
        let op = DiffusionOperator::new(vec![1.0; n], face_conductivity(&lag, k, t + dt)?, u.h(), true)?;
        if it == 1 {
            guard_cn(cfg.scheme, &op, dt)?;
        }
        let next = theta_step(u0, &op, &op, dt, theta);
        let scale = next.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        update = next.iter().zip(&guess).fold(0.0, |m, (a, b)| m.max((a - b).abs()));
        guess = next;
        if update <= cfg.tolerance * scale {
            return Ok((u.with_samples(guess)?, it));
        }
    }
    Err(Error::NonConvergence {
        t: t + dt,
        iterations: cfg.nonlinear_iterations,
        update,
    })
}

fn run(
    u0: &CircleField,
    t_end: f64,
    cfg: &SolverConfig,
    degenerate: bool,
    mut step: impl FnMut(&CircleField, f64, f64) -> Result<(CircleField, usize)>,
) -> Result<Trajectory> {
    let (steps, dt) = cfg.steps_for(t_end)?;
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![u0.clone()],
        degenerate,
        max_iterations: 0,
        warnings: Vec::new(),
    };
    let mut u = u0.clone();
    for s in 1..=steps {
        let t = (s - 1) as f64 * dt;
        let (next, its) = step(&u, t, dt)?;
        traj.max_iterations = traj.max_iterations.max(its);
        u = next;
        if s % cfg.record_every == 0 || s == steps {
            traj.times.push(if s == steps { t_end } else { s as f64 * dt });
            traj.states.push(u.clone());
        }
    }
    Ok(traj)
}

/// `u_t = u_xx` on the circle of `u0`.
pub fn solve_heat_circle(u0: &CircleField, t_end: f64, cfg: &SolverConfig) -> Result<Trajectory> {
    solve_variable_heat_circle(u0, &Conductivity::constant(1.0)?, t_end, cfg)
}

/// `v_t = k(t, x) v_xx`. A constant, tabulated or `(t, x)` conductivity is
/// accepted; its bounds are checked at every node and step.
pub fn solve_variable_heat_circle(
    u0: &CircleField,
    k: &Conductivity,
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    nodal_conductivity(u0, k, 0.0)?;
    run(u0, t_end, cfg, k.is_degenerate(), |u, t, dt| {
        Ok((variable_heat_step(u, k, t, dt, cfg.scheme)?, 0))
    })
}

/// Samples checked for the conductivity bound before a quasilinear run.
const RANGE_SAMPLES: usize = 201;

/// `u_t = (k(u) u_x)_x` in conservative form.
///
/// Before stepping, `k` is checked against its bounds on the range of `u0`;
/// failing there is an error. The same check on the range widened by 10% on
/// each side only adds a warning, since the maximum principle keeps `u`
/// inside its initial range.
pub fn solve_quasilinear_divergence(
    u0: &CircleField,
    k: &Conductivity,
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    let mut warnings = Vec::new();
    if let ConductivityKind::OfU(f) = &k.kind {
        let lo = u0.samples().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = u0.samples().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sample = |pad: f64| -> Result<()> {
            for j in 0..RANGE_SAMPLES {
                let v = lo - pad + (hi - lo + 2.0 * pad) * j as f64 / (RANGE_SAMPLES - 1) as f64;
                k.check(f(v), 0.0)?;
            }
            Ok(())
        };
        sample(0.0)?;
        if let Err(e) = sample(0.1 * (hi - lo)) {
            warnings.push(format!("bound fails on the initial range widened by 10%: {e}"));
        }
    }
    face_conductivity(u0.samples(), k, 0.0)?;
    let mut tr = run(u0, t_end, cfg, k.is_degenerate(), |u, t, dt| quasilinear_step(u, k, t, dt, cfg))?;
    tr.warnings = warnings;
    Ok(tr)
}
