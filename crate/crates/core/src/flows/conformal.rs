//! Leafwise conformal flows `d_t g = -N(f(tau)) g^` and `d_t g = -N(f(sigma)) g^`.
//!
//! Along such a flow `tau_k = F_k(tau_1)` and `sigma_k = Psi_k(sigma_1)`, so
//! the whole flow is carried by the quasilinear equation for `tau_1` (or
//! `sigma_1`). The structure constants are taken uniform along the N-curve.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::parabolic::{quasilinear_step, CircleField, Conductivity, SolverConfig};
use crate::symfun::{eval_F, eval_Psi, StructConstants};

pub type SymmetricFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type SymmetricGrad = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// `f(x_1..x_n)` with its partials `f_{,k}`, `k = 1..n`.
#[derive(Clone)]
pub struct SymmetricFunction {
    n: usize,
    value: SymmetricFn,
    partials: SymmetricGrad,
}

impl std::fmt::Debug for SymmetricFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SymmetricFunction {{ n: {} }}", self.n)
    }
}

impl SymmetricFunction {
    pub fn new(
        n: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        partials: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("need n >= 1".into()));
        }
        Ok(Self {
            n,
            value: Arc::new(value),
            partials: Arc::new(partials),
        })
    }

    /// `f = c x_k`.
    pub fn scaled_power(n: usize, k: usize, c: f64) -> Result<Self> {
        crate::error::check_index("power index", k, 1, n)?;
        Self::new(
            n,
            move |x: &[f64]| c * x[k - 1],
            move |_: &[f64]| {
                let mut g = vec![0.0; n];
                g[k - 1] = c;
                g
            },
        )
    }

    /// `f = c`, which leaves the metric fixed and the equation degenerate.
    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::new(n, move |_: &[f64]| c, move |_: &[f64]| vec![0.0; n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn partials(&self, x: &[f64]) -> Vec<f64> {
        (self.partials)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Variant {
    Tau,
    Sigma,
}

#[derive(Clone)]
struct Closure {
    variant: Variant,
    f: SymmetricFunction,
    consts: StructConstants,
}

impl Closure {
    fn chain(&self, k: usize, x1: f64) -> Result<f64> {
        match self.variant {
            Variant::Tau => eval_F(k, x1, &self.consts),
            Variant::Sigma => eval_Psi(k, x1, &self.consts),
        }
    }

    fn weight(&self, k: usize) -> f64 {
        match self.variant {
            Variant::Tau => k as f64,
            Variant::Sigma => (self.consts.n() - k + 1) as f64,
        }
    }

    fn vector(&self, x1: f64) -> Result<Vec<f64>> {
        (1..=self.consts.n()).map(|k| self.chain(k, x1)).collect()
    }

    /// `a = (1/2) sum_k w_k f_{,k} C_{k-1}(x_1)`.
    fn diffusivity(&self, x1: f64) -> Result<f64> {
        let x = self.vector(x1)?;
        let g = self.f.partials(&x);
        let mut a = 0.0;
        for k in 1..=self.consts.n() {
            a += self.weight(k) * g[k - 1] * self.chain(k - 1, x1)?;
        }
        Ok(0.5 * a)
    }

    /// Conformal speed `s = -N(f)`.
    fn speed(&self, x1: &CircleField) -> Result<CircleField> {
        let v = x1
            .samples()
            .iter()
            .map(|&u| Ok(self.f.value(&self.vector(u)?)))
            .collect::<Result<Vec<_>>>()?;
        let d = x1.with_samples(v)?.derivative();
        d.with_samples(d.samples().iter().map(|v| -v).collect())
    }
}

#[derive(Debug, Clone)]
pub struct ConformalRun {
    pub times: Vec<f64>,
    /// `tau_1..tau_n` (or `sigma_1..sigma_n`) per recorded time.
    pub fields: Vec<Vec<CircleField>>,
    /// Conformal speed `s` per recorded time.
    pub speed: Vec<CircleField>,
    /// `log` of the leafwise conformal factor per recorded time.
    pub conf: Vec<CircleField>,
    /// `(t, sup |s_t|)` at every step.
    pub speeds: Vec<(f64, f64)>,
    pub max_iterations: usize,
}

impl ConformalRun {
    /// First invariant (`tau_1` or `sigma_1`) at the last recorded time.
    pub fn last_first(&self) -> &CircleField {
        &self.fields.last().expect("a run keeps its initial state")[0]
    }
}

/// Upper conductivity bound used while monitoring positivity only.
const A_CEILING: f64 = 1e300;

fn run(closure: Closure, x1: &CircleField, t_end: f64, cfg: &SolverConfig) -> Result<ConformalRun> {
    let n = closure.consts.n();
    if closure.f.n() != n {
        return Err(Error::InvalidInput(format!(
            "f takes {} arguments but the structure constants have n = {n}",
            closure.f.n()
        )));
    }
    if closure.variant == Variant::Tau && closure.consts.f_order() < n {
        return Err(Error::MissingStructConstants {
            needed: n,
            available: closure.consts.f_order(),
        });
    }
    let (steps, dt) = cfg.steps_for(t_end)?;
    let c = closure.clone();
    let k = Conductivity::of_u(move |u| c.diffusivity(u).unwrap_or(f64::NAN), 0.0, A_CEILING)?;
    let monitor = |u: &CircleField, t: f64| -> Result<()> {
        let s = u.samples();
        let m = s.len();
        for i in 0..m {
            for v in [s[i], 0.5 * (s[i] + s[(i + 1) % m])] {
                let a = closure.diffusivity(v)?;
                if !(a > 0.0) {
                    return Err(Error::EllipticityLoss { t, value: a });
                }
            }
        }
        Ok(())
    };
    let fields = |u: &CircleField| -> Result<Vec<CircleField>> {
        let mut out = vec![u.clone()];
        for j in 2..=n {
            let v = u.samples().iter().map(|&x| closure.chain(j, x)).collect::<Result<Vec<_>>>()?;
            out.push(u.with_samples(v)?);
        }
        Ok(out)
    };

    let mut u = x1.clone();
    let mut s = closure.speed(&u)?;
    let mut conf = vec![0.0; u.len()];
    let mut out = ConformalRun {
        times: vec![0.0],
        fields: vec![fields(&u)?],
        speed: vec![s.clone()],
        conf: vec![u.with_samples(conf.clone())?],
        speeds: vec![(0.0, s.sup_norm())],
        max_iterations: 0,
    };
    for step in 1..=steps {
        let t = (step - 1) as f64 * dt;
        monitor(&u, t)?;
        let (next, its) = quasilinear_step(&u, &k, t, dt, cfg).map_err(|e| match e {
            Error::ConductivityBound { value, t, .. } => Error::EllipticityLoss { t, value },
            e => e,
        })?;
        out.max_iterations = out.max_iterations.max(its);
        let s_next = closure.speed(&next)?;
        for (c, (a, b)) in conf.iter_mut().zip(s.samples().iter().zip(s_next.samples())) {
            *c += 0.5 * dt * (a + b);
        }
        u = next;
        s = s_next;
        let tn = if step == steps { t_end } else { step as f64 * dt };
        out.speeds.push((tn, s.sup_norm()));
        if step % cfg.record_every == 0 || step == steps {
            out.times.push(tn);
            out.fields.push(fields(&u)?);
            out.speed.push(s.clone());
            out.conf.push(u.with_samples(conf.clone())?);
        }
    }
    Ok(out)
}

/// `d_t g = -N(f(tau)) g^`, reduced to
/// `d_t tau_1 = N(a N(tau_1))` with `a = (1/2) sum_k k f_{,k} F_{k-1}(tau_1)`.
///
/// `a > 0` is checked at every node and face before each step; a violation
/// halts the run with [`Error::EllipticityLoss`].
pub fn ftau_conformal_flow(
    tau1: &CircleField,
    f: &SymmetricFunction,
    consts: &StructConstants,
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<ConformalRun> {
    let closure = Closure {
        variant: Variant::Tau,
        f: f.clone(),
        consts: consts.clone(),
    };
    run(closure, tau1, t_end, cfg)
}

/// `d_t g = -N(f(sigma)) g^`, reduced to `d_t sigma_1 = N(a N(sigma_1))` with
/// `a = (1/2) sum_k (n-k+1) f_{,k} Psi_{k-1}(sigma_1)`.
pub fn fsigma_conformal_flow(
    sigma1: &CircleField,
    f: &SymmetricFunction,
    consts: &StructConstants,
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<ConformalRun> {
    let closure = Closure {
        variant: Variant::Sigma,
        f: f.clone(),
        consts: consts.clone(),
    };
    run(closure, sigma1, t_end, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parabolic::solve_heat_circle;
    use crate::symfun::{f_recursion_constants, power_sums, CurvatureSpectrum};
    use std::f64::consts::PI;

    fn consts(k: &[f64]) -> StructConstants {
        f_recursion_constants(&power_sums(&CurvatureSpectrum::new(k.to_vec()).unwrap()))
    }

    fn field(n: usize, f: impl Fn(f64) -> f64) -> CircleField {
        CircleField::from_fn(n, 2.0 * PI, f).unwrap()
    }

    #[test]
    fn mean_curvature_case_is_heat() {
        let c = consts(&[0.5, 1.0, 2.0]);
        let f = SymmetricFunction::scaled_power(3, 1, 2.0 / 3.0).unwrap();
        let u0 = field(64, |s| 1.0 + 0.4 * s.cos());
        let cfg = SolverConfig::with_dt(1e-3);
        let run = ftau_conformal_flow(&u0, &f, &c, 0.3, &cfg).unwrap();
        let heat = solve_heat_circle(&u0, 0.3, &cfg).unwrap();
        assert!(run.last_first().sup_distance(heat.last()) < 1e-10);
        assert_eq!(run.fields[0].len(), 3);
    }

    #[test]
    fn second_power_sum_diffusivity() {
        // f = (2/n) tau_2 gives a = (2/n) F_1 = 2 tau_1 / n
        let c = consts(&[1.0, 1.0]);
        let f = SymmetricFunction::scaled_power(2, 2, 1.0).unwrap();
        let cl = Closure { variant: Variant::Tau, f, consts: c };
        assert!((cl.diffusivity(1.7).unwrap() - 1.7).abs() < 1e-14);
        let u0 = field(64, |s| 2.0 + 0.5 * s.sin());
        let run = ftau_conformal_flow(&u0, &cl.f, &cl.consts, 0.2, &SolverConfig::with_dt(1e-3)).unwrap();
        assert!(run.last_first().mean() - u0.mean() < 1e-12);
        let bad = field(64, |s| 0.2 + 0.5 * s.sin());
        assert!(matches!(
            ftau_conformal_flow(&bad, &cl.f, &cl.consts, 0.2, &SolverConfig::with_dt(1e-3)),
            Err(Error::EllipticityLoss { t, .. }) if t == 0.0
        ));
    }

    #[test]
    fn constant_f_is_not_elliptic() {
        let c = consts(&[1.0, 2.0]);
        let f = SymmetricFunction::constant(2, 3.0).unwrap();
        let r = ftau_conformal_flow(&field(16, |_| 1.0), &f, &c, 0.1, &SolverConfig::default());
        assert!(matches!(r, Err(Error::EllipticityLoss { value, .. }) if value == 0.0));
    }

    #[test]
    fn second_power_sum_follows_its_chain() {
        // d_t tau_2 = -tau_1 N(s) integrated on its own agrees with F_2(tau_1)
        let c = consts(&[0.4, 1.2, 1.9]);
        let f = SymmetricFunction::new(
            3,
            |x: &[f64]| 0.5 * x[0] + 0.1 * x[1] * x[1] / 10.0,
            |x: &[f64]| vec![0.5, 0.02 * x[1], 0.0],
        )
        .unwrap();
        let u0 = field(256, |s| 3.5 + 0.3 * s.cos() + 0.1 * (2.0 * s).sin());
        let run = ftau_conformal_flow(&u0, &f, &c, 0.2, &SolverConfig::with_dt(1e-3).crank_nicolson()).unwrap();
        let mut tau2 = run.fields[0][1].samples().to_vec();
        for j in 1..run.times.len() {
            let dt = run.times[j] - run.times[j - 1];
            let (a, b) = (run.speed[j - 1].derivative(), run.speed[j].derivative());
            let (ta, tb) = (&run.fields[j - 1][0], &run.fields[j][0]);
            for i in 0..tau2.len() {
                tau2[i] -= 0.5 * dt * (ta.samples()[i] * a.samples()[i] + tb.samples()[i] * b.samples()[i]);
            }
        }
        let want = &run.fields.last().unwrap()[1];
        let err = tau2.iter().zip(want.samples()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-3, "{err}");
        assert!(run.conf.last().unwrap().sup_norm() > 0.0);
    }

    #[test]
    fn sigma_variant() {
        // f = (2/n) sigma_k gives a = ((n-k+1)/n) Psi_{k-1}(sigma_1)
        let c = consts(&[0.5, 1.0, 1.5]);
        let f = SymmetricFunction::scaled_power(3, 2, 2.0 / 3.0).unwrap();
        let cl = Closure { variant: Variant::Sigma, f: f.clone(), consts: c.clone() };
        assert!((cl.diffusivity(2.0).unwrap() - 2.0 / 3.0 * 2.0).abs() < 1e-14);
        let u0 = field(64, |s| 3.0 + 0.2 * s.cos());
        let run = fsigma_conformal_flow(&u0, &f, &c, 0.2, &SolverConfig::with_dt(1e-3)).unwrap();
        let s2 = &run.fields.last().unwrap()[1];
        let want = eval_Psi(2, run.last_first().samples()[5], &c).unwrap();
        assert!((s2.samples()[5] - want).abs() < 1e-14);
        assert!(run.last_first().sup_distance_to(3.0) < 0.2 * (-0.2f64 * 4.0 / 3.0).exp());
    }
}
