//! Linear fiberwise flows: diagonal power-sum heat flow, twisted products and
//! prescribed mean curvature.

use crate::error::{Error, Result};
use crate::parabolic::{
    solve_heat_circle, solve_variable_heat_circle, CircleField, Conductivity, SolverConfig, Trajectory,
};

#[derive(Debug, Clone)]
pub struct TauHeatRun {
    /// One trajectory per `tau_i`, `i = 1..n`.
    pub tau: Vec<Trajectory>,
}

impl TauHeatRun {
    /// Mean of the initial `tau_i`, the long-time limit.
    pub fn limit(&self, i: usize) -> f64 {
        self.tau[i - 1].states[0].mean()
    }
}

/// Each `tau_i` diffuses by `d_t tau_i = N(N(tau_i))` along the N-curve.
pub fn evolve_tau_heat(tau: &[CircleField], t_end: f64, cfg: &SolverConfig) -> Result<TauHeatRun> {
    if tau.is_empty() {
        return Err(Error::InvalidInput("need at least tau_1".into()));
    }
    if tau.iter().any(|f| f.len() != tau[0].len() || f.length() != tau[0].length()) {
        return Err(Error::InvalidInput("power sum fields must share one grid".into()));
    }
    let tau = tau
        .iter()
        .map(|f| solve_heat_circle(f, t_end, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(TauHeatRun { tau })
}

/// Log warping `phi(x, y)` of a twisted product `g = (e^{2 phi} g_1) + dy^2`:
/// one circle field in `y` per base sample `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistedState {
    pub base: Vec<f64>,
    pub phi: Vec<CircleField>,
    pub t: f64,
}

impl TwistedState {
    pub fn from_fn(
        base: Vec<f64>,
        fiber_nodes: usize,
        fiber_length: f64,
        phi: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        if base.is_empty() {
            return Err(Error::InvalidInput("empty base grid".into()));
        }
        let phi = base
            .iter()
            .map(|&x| CircleField::from_fn(fiber_nodes, fiber_length, |y| phi(x, y)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { base, phi, t: 0.0 })
    }

    pub fn fiber_length(&self) -> f64 {
        self.phi[0].length()
    }

    /// `phi^(x)`, the fiber mean of `phi` per base point.
    pub fn fiber_means(&self) -> Vec<f64> {
        self.phi.iter().map(CircleField::mean).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TwistedRun {
    pub times: Vec<f64>,
    pub states: Vec<TwistedState>,
    /// Fiber mean of the initial `phi`, conserved and approached by the flow.
    pub limit: Vec<f64>,
    /// `(t, sup |phi_t - limit|)`.
    pub phi_distance: Vec<(f64, f64)>,
    /// `(t, sup |e^{phi_t} - e^{limit}|)`.
    pub warp_distance: Vec<(f64, f64)>,
}

impl TwistedRun {
    pub fn last(&self) -> &TwistedState {
        self.states.last().expect("a run keeps its initial state")
    }
}

fn twisted_distances(phi: &[CircleField], limit: &[f64]) -> (f64, f64) {
    phi.iter().zip(limit).fold((0.0f64, 0.0f64), |(dp, dw), (f, &m)| {
        let w = f.samples().iter().fold(0.0f64, |a, v| a.max((v.exp() - m.exp()).abs()));
        (dp.max(f.sup_distance_to(m)), dw.max(w))
    })
}

/// `d_t phi = (1/n) N(N(phi))` fiberwise on a twisted product with
/// `n`-dimensional leaves. The structure is preserved and `phi` tends to its
/// fiber mean.
pub fn twisted_product_flow(state: &TwistedState, n: usize, t_end: f64, cfg: &SolverConfig) -> Result<TwistedRun> {
    if n == 0 {
        return Err(Error::InvalidInput("leaf dimension must be >= 1".into()));
    }
    let k = Conductivity::constant(1.0 / n as f64)?;
    let per_base = state
        .phi
        .iter()
        .map(|f| solve_variable_heat_circle(f, &k, t_end, cfg))
        .collect::<Result<Vec<_>>>()?;
    let limit = state.fiber_means();
    let times: Vec<f64> = per_base[0].times.iter().map(|t| state.t + t).collect();
    let mut run = TwistedRun {
        times: times.clone(),
        states: Vec::with_capacity(times.len()),
        limit,
        phi_distance: Vec::with_capacity(times.len()),
        warp_distance: Vec::with_capacity(times.len()),
    };
    for (j, &t) in times.iter().enumerate() {
        let phi: Vec<CircleField> = per_base.iter().map(|tr| tr.states[j].clone()).collect();
        let (dp, dw) = twisted_distances(&phi, &run.limit);
        run.phi_distance.push((t, dp));
        run.warp_distance.push((t, dw));
        run.states.push(TwistedState {
            base: state.base.clone(),
            phi,
            t,
        });
    }
    Ok(run)
}

/// Largest accepted `|mean F|` for a prescribed mean curvature.
pub const ZERO_AVERAGE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct MeanCurvatureState {
    pub tau1: CircleField,
    /// Target mean curvature, of zero average along the N-curve.
    pub target: CircleField,
    /// `log` of the leafwise conformal factor.
    pub conf: CircleField,
    pub t: f64,
}

impl MeanCurvatureState {
    pub fn new(tau1: CircleField, target: CircleField) -> Result<Self> {
        if tau1.len() != target.len() || tau1.length() != target.length() {
            return Err(Error::InvalidInput("tau_1 and F must share one grid".into()));
        }
        let mean = target.mean();
        if mean.abs() > ZERO_AVERAGE_TOL {
            return Err(Error::NonZeroAverage { mean });
        }
        let conf = tau1.with_samples(vec![0.0; tau1.len()])?;
        Ok(Self { tau1, target, conf, t: 0.0 })
    }

    /// `tau_1 - F`.
    pub fn residual(&self) -> CircleField {
        let w = self.tau1.samples().iter().zip(self.target.samples()).map(|(a, b)| a - b).collect();
        self.tau1.with_samples(w).expect("same grid")
    }
}

#[derive(Debug, Clone)]
pub struct MeanCurvatureRun {
    pub states: Vec<MeanCurvatureState>,
    /// `(t, sup |tau_1 - F|)`.
    pub residual: Vec<(f64, f64)>,
    /// `(t, mean (tau_1 - F))`.
    pub residual_mean: Vec<(f64, f64)>,
}

impl MeanCurvatureRun {
    pub fn last(&self) -> &MeanCurvatureState {
        self.states.last().expect("a run keeps its initial state")
    }
}

/// Flow towards leaves of prescribed mean curvature `F`: `w = tau_1 - F`
/// obeys the heat equation and the leafwise metric moves by
/// `d_t conf = -(2/n) N(w)`, integrated by the time trapezoid.
pub fn prescribed_mean_curvature_flow(
    state: &MeanCurvatureState,
    n: usize,
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<MeanCurvatureRun> {
    if n == 0 {
        return Err(Error::InvalidInput("leaf dimension must be >= 1".into()));
    }
    let mean = state.target.mean();
    if mean.abs() > ZERO_AVERAGE_TOL {
        return Err(Error::NonZeroAverage { mean });
    }
    // record every step internally so the conformal quadrature sees them all
    let inner = SolverConfig { record_every: 1, ..*cfg };
    let w = solve_heat_circle(&state.residual(), t_end, &inner)?;
    let scale = -2.0 / n as f64;
    let mut conf = state.conf.samples().to_vec();
    let mut slope = w.states[0].derivative();
    let mut run = MeanCurvatureRun {
        states: vec![state.clone()],
        residual: vec![(state.t, w.states[0].sup_norm())],
        residual_mean: vec![(state.t, w.states[0].mean())],
    };
    let last = w.states.len() - 1;
    for j in 1..=last {
        let dt = w.times[j] - w.times[j - 1];
        let next = w.states[j].derivative();
        for (c, (a, b)) in conf.iter_mut().zip(slope.samples().iter().zip(next.samples())) {
            *c += scale * 0.5 * dt * (a + b);
        }
        slope = next;
        let t = state.t + w.times[j];
        run.residual.push((t, w.states[j].sup_norm()));
        run.residual_mean.push((t, w.states[j].mean()));
        if j % cfg.record_every == 0 || j == last {
            let tau1 = w.states[j]
                .samples()
                .iter()
                .zip(state.target.samples())
                .map(|(a, b)| a + b)
                .collect();
            run.states.push(MeanCurvatureState {
                tau1: state.tau1.with_samples(tau1)?,
                target: state.target.clone(),
                conf: state.conf.with_samples(conf.clone())?,
                t,
            });
        }
    }
    Ok(run)
}
