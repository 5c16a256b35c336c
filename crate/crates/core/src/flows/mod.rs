//! Extrinsic geometric flows reduced to a single closed N-curve.
//!
//! When the N-curves form a circle fibration the flows decouple fiber by
//! fiber, so each integrator here works on one periodic arclength grid. The
//! leafwise metric is tracked through its log conformal factor `conf`, with
//! `g^_t = g^_0 exp(conf)`.

mod conformal;
mod fiber;
mod umbilical;

use crate::error::{Error, Result};
use crate::parabolic::{fit_exponential_decay, CircleField};
use crate::symfun::{ElemSymVector, PowerSumVector};

pub use conformal::{
    fsigma_conformal_flow, ftau_conformal_flow, ConformalRun, SymmetricFunction,
};
pub use fiber::{
    evolve_tau_heat, prescribed_mean_curvature_flow, twisted_product_flow, MeanCurvatureRun,
    MeanCurvatureState, TauHeatRun, TwistedRun, TwistedState,
};
pub use umbilical::{evolve_umbilical, umbilical_from_warping, UmbilicalRun, UmbilicalState};

/// Volume of a closed fiber model, `vol = sum_i rho_i h` for a density `rho`
/// that evolves by `d rho / dt = (1/2) tr S rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeTracker {
    density: CircleField,
    vol: f64,
    t: f64,
    pub history: Vec<(f64, f64)>,
}

impl VolumeTracker {
    pub fn new(density: CircleField) -> Result<Self> {
        if density.samples().iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidInput("volume density must be positive".into()));
        }
        let vol = density.integral();
        Ok(Self {
            density,
            vol,
            t: 0.0,
            history: vec![(0.0, vol)],
        })
    }

    /// Unit density on a circle of `n` nodes and circumference `length`.
    pub fn uniform(n: usize, length: f64) -> Result<Self> {
        Self::new(CircleField::new(length, vec![1.0; n])?)
    }

    pub fn vol(&self) -> f64 {
        self.vol
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn density(&self) -> &CircleField {
        &self.density
    }

    /// `phi_t = vol^{-2/n}`, the leafwise rescaling to unit volume.
    pub fn normalization(&self, n: usize) -> f64 {
        self.vol.powf(-2.0 / n as f64)
    }
}

/// Advances the tracker by `dt` with `tr S` held at `tr_s` over the step.
/// The density update `rho *= exp(dt tr S / 2)` is exact for a trace
/// constant in time; the volume is the rectangle-rule integral of the
/// density (the trapezoid rule on a periodic grid).
pub fn track_volume(tracker: &mut VolumeTracker, tr_s: &CircleField, dt: f64) -> Result<()> {
    if tr_s.len() != tracker.density.len() {
        return Err(Error::InvalidInput("trace field and density differ in size".into()));
    }
    let rho: Vec<f64> = tracker
        .density
        .samples()
        .iter()
        .zip(tr_s.samples())
        .map(|(r, s)| r * (0.5 * dt * s).exp())
        .collect();
    let t = tracker.t + dt;
    let density = tracker.density.with_samples(rho)?;
    let vol = density.integral();
    if !(vol > 0.0) || !vol.is_finite() {
        return Err(Error::NonPositiveVolume { vol, t });
    }
    tracker.density = density;
    tracker.vol = vol;
    tracker.t = t;
    tracker.history.push((t, vol));
    Ok(())
}

/// States of the conformal chains along one trajectory.
#[derive(Debug, Clone)]
pub struct ConformalOdeRun {
    pub times: Vec<f64>,
    /// `tau_1..tau_n` per recorded time.
    pub tau: Vec<Vec<f64>>,
    /// `sigma_1..sigma_n` per recorded time.
    pub sigma: Vec<Vec<f64>>,
}

/// Integrates, at one point of `M`, the chains
/// `d_t tau_k = -(k/2) tau_{k-1} N(s)` and
/// `d_t sigma_k = -((n-k+1)/2) sigma_{k-1} N(s)` with `tau_0 = n`,
/// `sigma_0 = 1`, driven by the supplied `N(s)(t)`. Classical RK4 with step
/// `dt`, shrunk so that the last step ends at `t_end`.
pub fn conformal_ode_system(
    ns: impl Fn(f64) -> f64,
    tau0: &PowerSumVector,
    sigma0: &ElemSymVector,
    t_end: f64,
    dt: f64,
) -> Result<ConformalOdeRun> {
    let n = tau0.n();
    if sigma0.n() != n {
        return Err(Error::InvalidInput("tau and sigma vectors differ in n".into()));
    }
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidInput("need dt > 0 and t_end >= 0".into()));
    }
    let steps = if t_end == 0.0 {
        0
    } else {
        ((t_end / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    };
    let h = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    let nf = n as f64;
    // state: tau_1..tau_n then sigma_1..sigma_n
    let rhs = |t: f64, y: &[f64]| -> Vec<f64> {
        let d = ns(t);
        let mut out = vec![0.0; 2 * n];
        for k in 1..=n {
            let tau_prev = if k == 1 { nf } else { y[k - 2] };
            let sig_prev = if k == 1 { 1.0 } else { y[n + k - 2] };
            out[k - 1] = -(k as f64) / 2.0 * tau_prev * d;
            out[n + k - 1] = -(nf - k as f64 + 1.0) / 2.0 * sig_prev * d;
        }
        out
    };
    let mut y: Vec<f64> = tau0.as_slice().iter().chain(&sigma0.as_slice()[1..]).copied().collect();
    let mut run = ConformalOdeRun {
        times: vec![0.0],
        tau: vec![y[..n].to_vec()],
        sigma: vec![y[n..].to_vec()],
    };
    let axpy = |y: &[f64], k: &[f64], a: f64| -> Vec<f64> { y.iter().zip(k).map(|(u, v)| u + a * v).collect() };
    for s in 0..steps {
        let t = s as f64 * h;
        let k1 = rhs(t, &y);
        let k2 = rhs(t + 0.5 * h, &axpy(&y, &k1, 0.5 * h));
        let k3 = rhs(t + 0.5 * h, &axpy(&y, &k2, 0.5 * h));
        let k4 = rhs(t + h, &axpy(&y, &k3, h));
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        run.times.push(if s + 1 == steps { t_end } else { t + h });
        run.tau.push(y[..n].to_vec());
        run.sigma.push(y[n..].to_vec());
    }
    Ok(run)
}

/// Outcome of the integrability test for a speed history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceReport {
    pub converges: bool,
    /// Trapezoid integral of `v` over the sampled horizon.
    pub integral: f64,
    /// `v_last / alpha`, the remainder under geometric extrapolation.
    pub tail: f64,
    /// Decay rate fitted on the last quarter of the history.
    pub alpha: f64,
    /// Rate on the last quarter over the rate on the quarter before it;
    /// near 1 for exponential decay, well below 1 for power laws.
    pub rate_ratio: f64,
}

/// Smallest [`ConvergenceReport::rate_ratio`] accepted as a settled
/// exponential rate.
pub const STABLE_RATE_RATIO: f64 = 0.9;

/// Decides whether `int_0^inf v(t) dt` is finite from a sampled history of
/// `v(t) = sup |s_t|`.
///
/// The integral converges when the tail decays exponentially at a settled
/// rate: the rates fitted on the last two quarters agree within
/// [`STABLE_RATE_RATIO`], the last one is positive, and the extrapolated
/// remainder is at most `tail_tol` times the integral so far.
pub fn converge_criterion(history: &[(f64, f64)], tail_tol: f64) -> Result<ConvergenceReport> {
    if history.len() < 16 {
        return Err(Error::DegenerateSeries(format!(
            "need at least 16 samples, got {}",
            history.len()
        )));
    }
    let integral: f64 = history
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    let m = history.len();
    if history[m / 2..].iter().all(|p| p.1 == 0.0) {
        return Ok(ConvergenceReport {
            converges: true,
            integral,
            tail: 0.0,
            alpha: f64::INFINITY,
            rate_ratio: 1.0,
        });
    }
    // each fit uses the later half of its window, so pass windows twice as long
    let last = fit_exponential_decay(&history[m / 2..])?.alpha;
    let prev = fit_exponential_decay(&history[m / 4..3 * m / 4])?.alpha;
    let rate_ratio = if prev > 0.0 { last / prev } else { 0.0 };
    let tail = if last > 0.0 { history[m - 1].1 / last } else { f64::INFINITY };
    let converges = last > 0.0 && rate_ratio >= STABLE_RATE_RATIO && tail <= tail_tol * integral;
    Ok(ConvergenceReport {
        converges,
        integral,
        tail,
        alpha: last,
        rate_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symfun::{f_recursion_constants, power_sums, sigma_from_tau, CurvatureSpectrum};
    use std::f64::consts::PI;

    fn series(f: impl Fn(f64) -> f64, t_end: f64, m: usize) -> Vec<(f64, f64)> {
        (0..=m).map(|i| {
            let t = t_end * i as f64 / m as f64;
            (t, f(t))
        }).collect()
    }

    #[test]
    fn convergence_examples() {
        let e = converge_criterion(&series(|t| (-t).exp(), 10.0, 200), 1.0).unwrap();
        assert!(e.converges, "{e:?}");
        assert!((e.alpha - 1.0).abs() < 1e-9);
        let p = converge_criterion(&series(|t| 1.0 / (1.0 + t), 10.0, 200), 1.0).unwrap();
        assert!(!p.converges, "{p:?}");
        let r = converge_criterion(&series(|t| 1.0 / (0.1 + t).sqrt(), 10.0, 200), 1.0).unwrap();
        assert!(!r.converges, "{r:?}");
        let z = converge_criterion(&series(|_| 0.0, 1.0, 20), 1.0).unwrap();
        assert!(z.converges);
        assert!(converge_criterion(&series(|t| t, 1.0, 5), 1.0).is_err());
    }

    #[test]
    fn volume_examples() {
        let mut tr = VolumeTracker::uniform(16, 2.0 * PI).unwrap();
        let zero = CircleField::standard(vec![0.0; 16]).unwrap();
        for _ in 0..10 {
            track_volume(&mut tr, &zero, 0.1).unwrap();
        }
        assert!((tr.vol() - 2.0 * PI).abs() < 1e-14);

        // conformal S = s g^ on n-dimensional leaves: tr S = n s
        let (n, s) = (3usize, -0.4);
        let trace = CircleField::standard(vec![n as f64 * s; 16]).unwrap();
        let mut tr = VolumeTracker::uniform(16, 2.0 * PI).unwrap();
        for _ in 0..100 {
            track_volume(&mut tr, &trace, 0.01).unwrap();
        }
        let want = 2.0 * PI * (n as f64 * s * 1.0 / 2.0).exp();
        assert!((tr.vol() - want).abs() < 1e-12 * want);
        assert!((tr.normalization(n) - want.powf(-2.0 / 3.0)).abs() < 1e-12);
        assert_eq!(tr.history.len(), 101);

        assert!(VolumeTracker::new(CircleField::standard(vec![0.0; 8]).unwrap()).is_err());
    }

    #[test]
    fn ode_frozen_without_drive() {
        let tau = power_sums(&CurvatureSpectrum::new(vec![0.5, -1.0, 2.0]).unwrap());
        let sigma = sigma_from_tau(&tau);
        let run = conformal_ode_system(|_| 0.0, &tau, &sigma, 1.0, 0.1).unwrap();
        assert_eq!(run.tau.last().unwrap().as_slice(), tau.as_slice());
        assert_eq!(run.sigma.last().unwrap().as_slice(), &sigma.as_slice()[1..]);
    }

    #[test]
    fn ode_closed_form_n2() {
        let tau = power_sums(&CurvatureSpectrum::new(vec![1.0, 2.0]).unwrap());
        let sigma = sigma_from_tau(&tau);
        let run = conformal_ode_system(|_| 1.0, &tau, &sigma, 1.0, 1e-2).unwrap();
        for (t, v) in run.times.iter().zip(&run.tau) {
            // tau_1 = 3 - t, tau_2 = 5 - 3t + t^2/2
            assert!((v[0] - (3.0 - t)).abs() < 1e-13);
            assert!((v[1] - (5.0 - 3.0 * t + 0.5 * t * t)).abs() < 1e-13);
            assert!((v[1] - v[0] * v[0] / 2.0 - 0.5).abs() < 1e-13);
        }
        for v in &run.sigma {
            assert!((v[1] - v[0] * v[0] / 4.0 + 0.25).abs() < 1e-13);
        }
    }

    #[test]
    fn ode_keeps_structure_constants() {
        let k = vec![0.3, -0.8, 1.1, 1.9];
        let tau = power_sums(&CurvatureSpectrum::new(k).unwrap());
        let sigma = sigma_from_tau(&tau);
        let c0 = f_recursion_constants(&tau);
        let run = conformal_ode_system(|t| (3.0 * t).sin() + 0.5, &tau, &sigma, 1.0, 1e-3).unwrap();
        let last_tau = PowerSumVector::new(run.tau.last().unwrap().clone()).unwrap();
        let c1 = f_recursion_constants(&last_tau);
        for j in 2..=4 {
            assert!((c1.phi(j) - c0.phi(j)).abs() < 1e-9, "phi_{j}");
        }
        let s1 = ElemSymVector::from_tail(run.sigma.last().unwrap()).unwrap();
        let c2 = f_recursion_constants(&crate::symfun::tau_from_sigma(&s1));
        for j in 2..=4 {
            assert!((c2.psi(j) - c0.psi(j)).abs() < 1e-9, "psi_{j}");
        }
    }
}
