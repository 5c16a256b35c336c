//! The Reeb foliation of the flat torus under `d_t g = -N(2 lambda) g^`.
//!
//! The strip `[-1, 1] x R` carries leaves `y = f(x) + c` with
//! `f' = tan alpha(x)`, plus the compact leaves `x = +-1`. Everything depends
//! on `x` only. The geodesic curvature `lambda` of the leaves diffuses along
//! the N-curves, which stall at `x = 0` where `sin alpha = 0`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::parabolic::{convolve_line, guard_cn, theta_step, DiffusionOperator, LineField, SolverConfig, KERNEL_WINDOW};

pub type AngleFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Leaf angle `alpha(x)` with its first two derivatives.
#[derive(Clone)]
pub struct LeafAngle {
    alpha: AngleFn,
    d_alpha: AngleFn,
    dd_alpha: AngleFn,
}

impl std::fmt::Debug for LeafAngle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LeafAngle(alpha(0) = {}, alpha'(0) = {})", self.value(0.0), self.derivative(0.0))
    }
}

impl LeafAngle {
    pub fn new(
        alpha: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d_alpha: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dd_alpha: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            alpha: Arc::new(alpha),
            d_alpha: Arc::new(d_alpha),
            dd_alpha: Arc::new(dd_alpha),
        }
    }

    /// `alpha = pi x / 2`.
    pub fn standard() -> Self {
        Self::new(|x| 0.5 * PI * x, |_| 0.5 * PI, |_| 0.0)
    }

    /// `alpha = (pi/2)(x + b x^2 (1 - x^2))`: same end values, not odd.
    /// Increasing for `|b| <= 0.4`.
    pub fn skewed(b: f64) -> Self {
        Self::new(
            move |x| 0.5 * PI * (x + b * x * x * (1.0 - x * x)),
            move |x| 0.5 * PI * (1.0 + 2.0 * b * x - 4.0 * b * x * x * x),
            move |x| 0.5 * PI * (2.0 * b - 12.0 * b * x * x),
        )
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.alpha)(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (self.d_alpha)(x)
    }

    pub fn second(&self, x: f64) -> f64 {
        (self.dd_alpha)(x)
    }
}

/// Sampled strip geometry at `t = 0`.
#[derive(Debug, Clone)]
pub struct ReebGeometry {
    pub angle: LeafAngle,
    /// Nodes `x_i = (2i - M) / M`, `i = 0..=M`, so `x = 0` is a node.
    pub x: Vec<f64>,
    pub h: f64,
    pub sin: Vec<f64>,
    pub cos: Vec<f64>,
    /// `lambda_0 = alpha' |cos alpha|`.
    pub lambda0: Vec<f64>,
}

impl ReebGeometry {
    pub fn nodes(&self) -> usize {
        self.x.len()
    }

    /// Index of the node `x = 0`.
    pub fn center(&self) -> usize {
        (self.x.len() - 1) / 2
    }

    pub fn lambda0_at(&self, x: f64) -> f64 {
        self.angle.derivative(x) * self.angle.value(x).cos().abs()
    }
}

const END_TOL: f64 = 1e-12;

/// Samples the strip on `intervals` (even, at least 8) equal cells.
pub fn reeb_setup(angle: LeafAngle, intervals: usize) -> Result<ReebGeometry> {
    if intervals < 8 || intervals % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "need an even number of intervals >= 8, got {intervals}"
        )));
    }
    for (x, want) in [(-1.0, -0.5 * PI), (1.0, 0.5 * PI)] {
        let a = angle.value(x);
        if (a - want).abs() > END_TOL {
            return Err(Error::InvalidInput(format!("alpha({x}) = {a}, expected {want}")));
        }
    }
    let m = intervals as f64;
    let x: Vec<f64> = (0..=intervals).map(|i| (2.0 * i as f64 - m) / m).collect();
    let a: Vec<f64> = x.iter().map(|&v| angle.value(v)).collect();
    if a.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("alpha must be strictly increasing".into()));
    }
    if angle.value(0.0) != 0.0 {
        return Err(Error::InvalidInput("alpha(0) must vanish".into()));
    }
    let sin: Vec<f64> = a.iter().map(|v| v.sin()).collect();
    let cos: Vec<f64> = a.iter().map(|v| v.cos()).collect();
    let mut lambda0: Vec<f64> = x.iter().zip(&cos).map(|(&v, c)| angle.derivative(v) * c.abs()).collect();
    // the compact leaves are geodesics
    lambda0[0] = 0.0;
    lambda0[intervals] = 0.0;
    Ok(ReebGeometry {
        angle,
        x,
        h: 2.0 / m,
        sin,
        cos,
        lambda0,
    })
}

/// Curvature of the graph of `f`, `f'' / (1 + f'^2)^{3/2}`, with
/// `f' = tan alpha` and `f''` by a central difference of step `h`.
pub fn graph_curvature(angle: &LeafAngle, x: f64, h: f64) -> f64 {
    let fp = angle.value(x).tan();
    let fpp = ((angle.value(x + h)).tan() - (angle.value(x - h)).tan()) / (2.0 * h);
    fpp / (1.0 + fp * fp).powf(1.5)
}

/// Point reached along an N-curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NCurvePoint {
    pub x: f64,
    /// The start lies on the fixed point `sin alpha = 0`.
    pub stationary: bool,
    /// `s + int_x^{phi_s(x)} d xi / sin alpha(xi)`.
    pub residual: f64,
}

const NCURVE_STEP: f64 = 2e-3;

fn rk4_ncurve(angle: &LeafAngle, mut x: f64, s: f64) -> f64 {
    let steps = ((s.abs() / NCURVE_STEP).ceil() as usize).max(1);
    let h = s / steps as f64;
    let f = |x: f64| -angle.value(x).sin();
    for _ in 0..steps {
        let k1 = f(x);
        let k2 = f(x + 0.5 * h * k1);
        let k3 = f(x + 0.5 * h * k2);
        let k4 = f(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    x
}

/// `int_a^b d xi / sin alpha(xi)` by 3-point Gauss-Legendre on 256 panels.
fn inverse_sine_integral(angle: &LeafAngle, a: f64, b: f64) -> f64 {
    const PANELS: usize = 256;
    let nodes = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
    let weights = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let w = (b - a) / PANELS as f64;
    let mut acc = 0.0;
    for p in 0..PANELS {
        let mid = a + (p as f64 + 0.5) * w;
        for (z, q) in nodes.iter().zip(weights) {
            acc += q / angle.value(mid + 0.5 * w * z).sin();
        }
    }
    acc * 0.5 * w
}

/// `phi_s(x)`: the point reached from `x` after arclength `s` along
/// `dx/ds = -sin alpha(x)`. The implicit form
/// `s = -int_x^{phi_s(x)} d xi / sin alpha` is reported as a residual.
pub fn n_curve_map(geom: &ReebGeometry, x: f64, s: f64) -> Result<NCurvePoint> {
    if !(x > -1.0 && x < 1.0) || !s.is_finite() {
        return Err(Error::InvalidInput(format!("need -1 < x < 1 and finite s, got x = {x}, s = {s}")));
    }
    if geom.angle.value(x).sin() == 0.0 {
        return Ok(NCurvePoint {
            x,
            stationary: true,
            residual: 0.0,
        });
    }
    let end = rk4_ncurve(&geom.angle, x, s);
    if !(end > -1.0 && end < 1.0) || end.signum() != x.signum() {
        return Err(Error::InvalidInput(format!(
            "the N-curve from x = {x} leaves the half strip before s = {s}"
        )));
    }
    let residual = if s == 0.0 {
        0.0
    } else {
        s + inverse_sine_integral(&geom.angle, x, end)
    };
    Ok(NCurvePoint {
        x: end,
        stationary: false,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReebState {
    pub lambda: Vec<f64>,
    /// Metric exponent, `g^_t = g^_0 exp(-U_t)`.
    pub u: Vec<f64>,
    /// `V_t = int_0^t d_x lambda`.
    pub v: Vec<f64>,
    /// `U_t = -u_scale sin alpha V_t`.
    pub u_scale: f64,
    pub t: f64,
}

impl ReebState {
    pub fn initial(geom: &ReebGeometry, u_scale: f64) -> Self {
        let n = geom.nodes();
        Self {
            lambda: geom.lambda0.clone(),
            u: vec![0.0; n],
            v: vec![0.0; n],
            u_scale,
            t: 0.0,
        }
    }
}

/// How `U` is built from `V`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReebOptions {
    /// 1 gives `U = -sin alpha V`; 2 gives `U = int N(psi(lambda))` for
    /// `psi = 2 lambda`, the exponent consistent with the evolved `lambda`.
    pub u_scale: f64,
}

impl Default for ReebOptions {
    fn default() -> Self {
        Self { u_scale: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct ReebRun {
    pub states: Vec<ReebState>,
    /// `(t, sup |d_t U|)`, the sup of the conformal speed.
    pub speeds: Vec<(f64, f64)>,
}

impl ReebRun {
    pub fn last(&self) -> &ReebState {
        self.states.last().expect("a run keeps its initial state")
    }
}

/// Second-order derivative on a uniform grid, one-sided at the ends.
fn gradient(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    }
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    d
}

/// `d_t lambda = d_s^2 lambda` written in `x`, where `d_s = -sin alpha d_x`:
/// `d_t lambda = sin alpha d_x (sin alpha d_x lambda)`, with `lambda(+-1)`
/// held at 0. Accumulates `V` by the time trapezoid and sets `U`.
pub fn evolve_reeb_lambda(
    geom: &ReebGeometry,
    state: &ReebState,
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<ReebRun> {
    let n = geom.nodes();
    if state.lambda.len() != n || state.v.len() != n {
        return Err(Error::InvalidInput("state does not match the geometry grid".into()));
    }
    let faces: Vec<f64> = geom.x.windows(2).map(|w| geom.angle.value(0.5 * (w[0] + w[1])).sin()).collect();
    let op = DiffusionOperator::new(geom.sin.clone(), faces, geom.h, false)?;
    let (steps, dt) = cfg.steps_for(t_end)?;
    guard_cn(cfg.scheme, &op, dt)?;
    let theta = cfg.scheme.theta();
    let speed = |dl: &[f64]| -> f64 {
        dl.iter().zip(&geom.sin).fold(0.0f64, |m, (d, s)| m.max((state.u_scale * s * d).abs()))
    };

    let mut cur = state.clone();
    let mut dl = gradient(&cur.lambda, geom.h);
    let mut run = ReebRun {
        states: vec![cur.clone()],
        speeds: vec![(cur.t, speed(&dl))],
    };
    for step in 1..=steps {
        let mut lambda = theta_step(&cur.lambda, &op, &op, dt, theta);
        lambda[0] = 0.0;
        lambda[n - 1] = 0.0;
        let next = gradient(&lambda, geom.h);
        for i in 0..n {
            cur.v[i] += 0.5 * dt * (dl[i] + next[i]);
            cur.u[i] = -cur.u_scale * geom.sin[i] * cur.v[i];
        }
        cur.lambda = lambda;
        cur.t = if step == steps { state.t + t_end } else { state.t + step as f64 * dt };
        dl = next;
        run.speeds.push((cur.t, speed(&dl)));
        if step % cfg.record_every == 0 || step == steps {
            run.states.push(cur.clone());
        }
    }
    Ok(run)
}

/// Line spacing of the arclength table, relative to `sqrt(t)`.
const KERNEL_RESOLUTION: f64 = 2e-3;

/// `lambda_t` at the points `xs` from the heat kernel in arclength.
///
/// On each half strip `s` is measured from the compact leaf, where
/// `lambda = 0` is kept by extending `lambda_0` oddly to `s < 0`. The point
/// `x = 0` is reached only as `s -> infinity` and keeps `lambda_0(0)`.
pub fn reeb_lambda_arclength(geom: &ReebGeometry, xs: &[f64], t: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; xs.len()];
    for side in [-1.0f64, 1.0] {
        let idx: Vec<usize> = (0..xs.len()).filter(|&i| xs[i] * side > 0.0).collect();
        if idx.is_empty() {
            continue;
        }
        let mut targets = Vec::with_capacity(idx.len());
        for &i in &idx {
            let x = xs[i];
            if x.abs() > 1.0 {
                return Err(Error::InvalidInput(format!("x = {x} lies outside the strip")));
            }
            // s from the compact leaf to x
            targets.push(-inverse_sine_integral(&geom.angle, side, x));
        }
        let s_max = targets.iter().copied().fold(0.0, f64::max);
        let pad = 2.0 * t.sqrt() * KERNEL_WINDOW + 1.0;
        let h = KERNEL_RESOLUTION * t.sqrt().min(1.0);
        let m = ((s_max + pad) / h).ceil() as usize + 1;
        // march the N-curve from the compact leaf
        let mut along = Vec::with_capacity(m);
        let mut x = side;
        for j in 0..m {
            if j > 0 {
                x = rk4_ncurve(&geom.angle, x, h);
            }
            along.push(if j == 0 { 0.0 } else { geom.lambda0_at(x) });
        }
        let mut samples: Vec<f64> = along[1..].iter().rev().map(|v| -v).collect();
        samples.extend_from_slice(&along);
        let line = LineField {
            x0: -((m - 1) as f64) * h,
            h,
            samples,
        };
        let vals = convolve_line(&line, t, &targets)?;
        for (k, &i) in idx.iter().enumerate() {
            out[i] = vals[k];
        }
    }
    for (o, &x) in out.iter_mut().zip(xs) {
        if x == 0.0 {
            *o = geom.lambda0_at(0.0);
        }
    }
    Ok(out)
}

/// Components of `g_t` in the standard frame of the strip.
#[derive(Debug, Clone, PartialEq)]
pub struct ReebMetric {
    pub g11: Vec<f64>,
    pub g12: Vec<f64>,
    pub g22: Vec<f64>,
    pub det: Vec<f64>,
}

/// `g(X, X) = e^{-U}`, `g(X, N) = 0`, `g(N, N) = 1` in the standard frame.
pub fn reconstruct_metric(state: &ReebState, geom: &ReebGeometry) -> ReebMetric {
    let n = geom.nodes();
    let mut m = ReebMetric {
        g11: vec![0.0; n],
        g12: vec![0.0; n],
        g22: vec![0.0; n],
        det: vec![0.0; n],
    };
    for i in 0..n {
        let (s, c, e) = (geom.sin[i], geom.cos[i], (-state.u[i]).exp());
        m.g11[i] = s * s + c * c * e;
        m.g12[i] = s * c * (e - 1.0);
        m.g22[i] = c * c + s * s * e;
        m.det[i] = m.g11[i] * m.g22[i] - m.g12[i] * m.g12[i];
    }
    m
}

/// Half-width of the window used to fit the slope of `e^{-U} K` at 0.
pub const SLOPE_WINDOW: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCurvature {
    pub k: Vec<f64>,
    /// `e^{-U} K`.
    pub scaled: Vec<f64>,
    pub k_at_zero: f64,
    /// Least-squares slope of `e^{-U} K` on `|x| <= max(SLOPE_WINDOW, 1.5 h)`.
    pub slope: f64,
    /// `-3 u_scale alpha'(0)^3 V_t(0)`, the first-order coefficient of
    /// `e^{-U} K` at 0.
    pub derived_slope_reference: f64,
    /// `(3/8) pi^3 V_t(0)`, the coefficient as printed for `alpha = pi x / 2`.
    pub stated_slope_reference: f64,
}

/// `K = -(1/(2 sqrt|g|)) d_x(d_x g22 / sqrt|g|)` by a staggered second-order
/// difference of the metric; the two end values are extrapolated linearly.
pub fn curvature_from_metric(metric: &ReebMetric, h: f64) -> Vec<f64> {
    let n = metric.g22.len();
    let flux: Vec<f64> = (0..n - 1)
        .map(|i| {
            let det = 0.5 * (metric.det[i] + metric.det[i + 1]);
            (metric.g22[i + 1] - metric.g22[i]) / h / det.sqrt()
        })
        .collect();
    let mut k = vec![0.0; n];
    for i in 1..n - 1 {
        k[i] = -(flux[i] - flux[i - 1]) / h / (2.0 * metric.det[i].sqrt());
    }
    k[0] = 2.0 * k[1] - k[2];
    k[n - 1] = 2.0 * k[n - 2] - k[n - 3];
    k
}

/// Second difference on a uniform grid, one-sided (second order) at the ends.
fn second_difference(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let h2 = h * h;
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2;
    }
    d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
    d[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2;
    d
}

/// `K_t` from the expansion of the metric formula in `alpha` and `U`:
///
/// `2 e^{-U} K = -(2 cos 2a a'^2 + sin 2a a'')(e^{-U} - 1) + sin^2 a e^{-U} U''
///   + (3/2) sin 2a a' e^{-U} U' + (1/2) sin 2a a' U' - (1/2) sin^2 a e^{-U} U'^2`
///
/// with `U'`, `U''` by central differences. Every term carries `sin a` or
/// `e^{-U} - 1`, so `K = 0` exactly where `alpha = U = 0`.
pub fn gaussian_curvature(metric: &ReebMetric, state: &ReebState, geom: &ReebGeometry) -> Result<GaussianCurvature> {
    let n = geom.nodes();
    if metric.g22.len() != n || state.u.len() != n {
        return Err(Error::InvalidInput("metric and state do not match the grid".into()));
    }
    let du = gradient(&state.u, geom.h);
    let ddu = second_difference(&state.u, geom.h);
    let k: Vec<f64> = (0..n)
        .map(|i| {
            let x = geom.x[i];
            let (a1, a2) = (geom.angle.derivative(x), geom.angle.second(x));
            let (s, c) = (geom.sin[i], geom.cos[i]);
            let (s2a, c2a) = (2.0 * s * c, c * c - s * s);
            let e = (-state.u[i]).exp();
            let twice = -(2.0 * c2a * a1 * a1 + s2a * a2) * (e - 1.0) + s * s * e * ddu[i]
                + 1.5 * s2a * a1 * e * du[i]
                + 0.5 * s2a * a1 * du[i]
                - 0.5 * s * s * e * du[i] * du[i];
            0.5 * twice / e
        })
        .collect();
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("curvature is not finite; U is under-resolved".into()));
    }
    let scaled: Vec<f64> = k.iter().zip(&state.u).map(|(k, u)| k * (-u).exp()).collect();
    let c = geom.center();
    let (mut sx, mut sy, mut sxx, mut sxy, mut cnt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let x = geom.x[i];
        if x.abs() <= SLOPE_WINDOW.max(1.5 * geom.h) {
            sx += x;
            sy += scaled[i];
            sxx += x * x;
            sxy += x * scaled[i];
            cnt += 1.0;
        }
    }
    if cnt < 3.0 {
        return Err(Error::InvalidInput("grid too coarse to fit the slope at 0".into()));
    }
    let slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    let a1 = geom.angle.derivative(0.0);
    Ok(GaussianCurvature {
        k_at_zero: k[c],
        slope,
        derived_slope_reference: -3.0 * state.u_scale * a1.powi(3) * state.v[c],
        stated_slope_reference: 3.0 / 8.0 * PI.powi(3) * state.v[c],
        k,
        scaled,
    })
}

/// The curvature of the flowing metric computed two ways.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussCrossCheck {
    /// `K` from `Div(e^U nabla^0_N N) + N(lambda) - lambda^2`.
    pub k_frame: Vec<f64>,
    /// `K` from the metric components.
    pub k_metric: Vec<f64>,
    /// Geodesic curvature of the leaves for `g_t`, `lambda_0 + N(U)/2`.
    pub lambda_geo: Vec<f64>,
}

impl GaussCrossCheck {
    /// `sup |k_frame - k_metric|` over nodes with `lo <= |x| <= hi`.
    pub fn residual_on(&self, geom: &ReebGeometry, lo: f64, hi: f64) -> f64 {
        (0..geom.nodes())
            .filter(|&i| (lo..=hi).contains(&geom.x[i].abs()))
            .map(|i| (self.k_frame[i] - self.k_metric[i]).abs())
            .fold(0.0, f64::max)
    }
}

/// Compares the frame formula for `K` with the metric formula.
///
/// `nabla^0_N N = alpha' sin alpha X` for the flat initial metric and it
/// scales by `e^U` along the flow. In the coordinates of the strip
/// `Div W = e^{U/2} d_x(e^{-U/2} W^x)`, with `W^x = e^U alpha' sin alpha cos alpha`.
pub fn gauss_cross_check(state: &ReebState, geom: &ReebGeometry) -> Result<GaussCrossCheck> {
    let n = geom.nodes();
    let h = geom.h;
    let du = gradient(&state.u, h);
    let lambda_geo: Vec<f64> = (0..n).map(|i| geom.lambda0[i] - 0.5 * geom.sin[i] * du[i]).collect();
    let flux: Vec<f64> = (0..n)
        .map(|i| (0.5 * state.u[i]).exp() * geom.angle.derivative(geom.x[i]) * geom.sin[i] * geom.cos[i])
        .collect();
    let dflux = gradient(&flux, h);
    let dl = gradient(&lambda_geo, h);
    let k_frame: Vec<f64> = (0..n)
        .map(|i| (0.5 * state.u[i]).exp() * dflux[i] - geom.sin[i] * dl[i] - lambda_geo[i] * lambda_geo[i])
        .collect();
    let metric = reconstruct_metric(state, geom);
    let k_metric = curvature_from_metric(&metric, h);
    Ok(GaussCrossCheck {
        k_frame,
        k_metric,
        lambda_geo,
    })
}
