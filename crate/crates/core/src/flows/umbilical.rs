//! Umbilical foliations: `A = lambda Id` is preserved and the flow reduces to
//! `d_t lambda = (1/2) d_s (psi'(lambda) d_s lambda)` on each N-curve.

use super::{track_volume, VolumeTracker};
use crate::error::{Error, Result};
use crate::parabolic::{quasilinear_step, CircleField, Conductivity, SolverConfig};
use crate::symfun::UmbilicalPsi;

#[derive(Debug, Clone, PartialEq)]
pub struct UmbilicalState {
    /// Principal curvature along the N-curve.
    pub lambda: CircleField,
    /// `log` of the leafwise conformal factor, `g^_t = g^_0 exp(conf)`.
    pub conf: CircleField,
    pub t: f64,
}

impl UmbilicalState {
    pub fn new(lambda: CircleField) -> Self {
        let conf = lambda.with_samples(vec![0.0; lambda.len()]).expect("same grid");
        Self { lambda, conf, t: 0.0 }
    }
}

/// Initial data of a warped model `g = ds^2 + e^{2 phi(s)} g_leaf`, whose
/// leaves are umbilical with `lambda = -phi'`.
pub fn umbilical_from_warping(phi0: &CircleField) -> UmbilicalState {
    let d = phi0.derivative();
    let lambda = d.with_samples(d.samples().iter().map(|v| -v).collect()).expect("same grid");
    UmbilicalState::new(lambda)
}

#[derive(Debug, Clone)]
pub struct UmbilicalRun {
    pub states: Vec<UmbilicalState>,
    pub tracker: VolumeTracker,
    /// `(t, sup |d_s psi(lambda_t)|)`, the sup of the conformal speed.
    pub speeds: Vec<(f64, f64)>,
    /// `psi'` vanishes somewhere on the initial range.
    pub degenerate: bool,
    pub max_iterations: usize,
}

impl UmbilicalRun {
    pub fn last(&self) -> &UmbilicalState {
        self.states.last().expect("a run keeps its initial state")
    }
}

const RANGE_SAMPLES: usize = 201;
/// `psi'` below this fraction of its maximum counts as zero.
const DEGENERACY_FLOOR: f64 = 1e-8;

fn conductivity_for(psi: &UmbilicalPsi, lambda: &CircleField) -> Result<(Conductivity, bool)> {
    let lo = lambda.samples().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lambda.samples().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut kmin, mut kmax, mut at) = (f64::INFINITY, f64::NEG_INFINITY, lo);
    for j in 0..RANGE_SAMPLES {
        let l = lo + (hi - lo) * j as f64 / (RANGE_SAMPLES - 1) as f64;
        let d = psi.derivative(l);
        if !d.is_finite() {
            return Err(Error::InvalidInput(format!("psi' is not finite at lambda = {l}")));
        }
        if d < kmin {
            kmin = d;
            at = l;
        }
        kmax = kmax.max(d);
    }
    let floor = DEGENERACY_FLOOR * kmax.abs().max(1.0);
    if kmin < -floor {
        return Err(Error::PsiSignViolation { lambda: at, value: kmin });
    }
    let degenerate = kmin <= floor;
    let c1 = if degenerate { 0.0 } else { 0.99 * kmin / 2.0 };
    let c2 = 1.01 * kmax.max(0.0) / 2.0 + floor;
    let p = psi.clone();
    let k = Conductivity::of_u(move |l| (0.5 * p.derivative(l)).max(0.0), c1, c2)?;
    Ok((k, degenerate))
}

fn psi_slope(psi: &UmbilicalPsi, lambda: &CircleField) -> CircleField {
    let v: Vec<f64> = lambda.samples().iter().map(|&l| psi.value(l)).collect();
    lambda.with_samples(v).expect("same grid").derivative()
}

/// Evolves `lambda` and the conformal factor of `g^` from `state` to
/// `state.t + t_end`.
///
/// `lambda` is advanced by [`quasilinear_step`] with `k = psi'/2`, and
/// `conf` by the time trapezoid of `-d_s psi(lambda)`. The tracker's density
/// follows `exp(n conf / 2)`. A negative `psi'` on the initial range is an
/// error; `psi' = 0` there flags the run degenerate.
pub fn evolve_umbilical(
    state: &UmbilicalState,
    psi: &UmbilicalPsi,
    t_end: f64,
    cfg: &SolverConfig,
    tracker: VolumeTracker,
) -> Result<UmbilicalRun> {
    if tracker.density().len() != state.lambda.len() || state.conf.len() != state.lambda.len() {
        return Err(Error::InvalidInput("state fields and tracker differ in size".into()));
    }
    let (k, degenerate) = conductivity_for(psi, &state.lambda)?;
    let (steps, dt) = cfg.steps_for(t_end)?;
    let n = psi.n() as f64;
    let mut slope = psi_slope(psi, &state.lambda);
    let mut run = UmbilicalRun {
        states: vec![state.clone()],
        tracker,
        speeds: vec![(state.t, slope.sup_norm())],
        degenerate,
        max_iterations: 0,
    };
    let mut cur = state.clone();
    for s in 1..=steps {
        let t = state.t + (s - 1) as f64 * dt;
        let (lambda, its) = quasilinear_step(&cur.lambda, &k, t, dt, cfg)?;
        run.max_iterations = run.max_iterations.max(its);
        let next_slope = psi_slope(psi, &lambda);
        let rate: Vec<f64> = slope
            .samples()
            .iter()
            .zip(next_slope.samples())
            .map(|(a, b)| -0.5 * (a + b))
            .collect();
        let conf: Vec<f64> = cur.conf.samples().iter().zip(&rate).map(|(c, r)| c + dt * r).collect();
        let tr_s = lambda.with_samples(rate.iter().map(|r| n * r).collect())?;
        track_volume(&mut run.tracker, &tr_s, dt)?;
        cur = UmbilicalState {
            conf: cur.conf.with_samples(conf)?,
            lambda,
            t: if s == steps { state.t + t_end } else { state.t + s as f64 * dt },
        };
        slope = next_slope;
        run.speeds.push((cur.t, slope.sup_norm()));
        if s % cfg.record_every == 0 || s == steps {
            run.states.push(cur.clone());
        }
    }
    Ok(run)
}
