//! Extrinsic data of the leaves `{x_0 = c}` from a metric
//! `g = g00 dx_0^2 + sum g_ij dx_i dx_j` sampled along the `x_0` axis.
//!
//! With `G' = d_0 (g_ij)`:
//! `b = -G' / (2 sqrt g00)`, `A^j_i = -(1/(2 sqrt g00)) sum_s g_{is,0} g^{sj}`,
//! `tau_k = tr A^k`.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::flows::UmbilicalState;
use crate::parabolic::CircleField;

/// Relative asymmetry tolerated in the input blocks.
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ChartMetric {
    x0: Vec<f64>,
    h: f64,
    periodic: bool,
    g00: Vec<f64>,
    gij: Vec<DMatrix<f64>>,
}

impl ChartMetric {
    /// Metric on a uniform open grid `x0`; derivatives are one-sided at the ends.
    pub fn new(x0: Vec<f64>, g00: Vec<f64>, gij: Vec<DMatrix<f64>>) -> Result<Self> {
        if x0.len() < 4 {
            return Err(Error::InvalidInput("need at least 4 nodes along x0".into()));
        }
        let h = (x0[x0.len() - 1] - x0[0]) / (x0.len() - 1) as f64;
        if !(h > 0.0) || x0.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
            return Err(Error::InvalidInput("x0 grid must be uniform and increasing".into()));
        }
        Self::build(x0, h, false, g00, gij)
    }

    /// Metric on a closed N-curve of the given length, nodes `i length / m`.
    pub fn periodic(length: f64, g00: Vec<f64>, gij: Vec<DMatrix<f64>>) -> Result<Self> {
        let m = g00.len();
        if m < 4 || !(length > 0.0) {
            return Err(Error::InvalidInput("need at least 4 nodes and a positive length".into()));
        }
        let h = length / m as f64;
        let x0 = (0..m).map(|i| i as f64 * h).collect();
        Self::build(x0, h, true, g00, gij)
    }

    fn build(x0: Vec<f64>, h: f64, periodic: bool, g00: Vec<f64>, gij: Vec<DMatrix<f64>>) -> Result<Self> {
        if g00.len() != x0.len() || gij.len() != x0.len() {
            return Err(Error::InvalidInput("g00 and gij must have one entry per node".into()));
        }
        let n = gij[0].nrows();
        if n == 0 {
            return Err(Error::InvalidInput("leaf dimension must be at least 1".into()));
        }
        for (node, (&a, g)) in g00.iter().zip(&gij).enumerate() {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::InvalidInput(format!("g00 = {a} at node {node} is not positive")));
            }
            if g.nrows() != n || g.ncols() != n {
                return Err(Error::InvalidInput(format!("gij block at node {node} is not {n}x{n}")));
            }
            let scale = g.amax();
            if (g - g.transpose()).amax() > SYMMETRY_TOL * scale {
                return Err(Error::InvalidInput(format!("gij block at node {node} is not symmetric")));
            }
            if Cholesky::new(g.clone()).is_none() {
                return Err(Error::SingularMetric { node });
            }
        }
        Ok(Self {
            x0,
            h,
            periodic,
            g00,
            gij,
        })
    }

    pub fn nodes(&self) -> usize {
        self.x0.len()
    }

    pub fn dim(&self) -> usize {
        self.gij[0].nrows()
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn g00(&self) -> &[f64] {
        &self.g00
    }

    pub fn gij(&self) -> &[DMatrix<f64>] {
        &self.gij
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    /// Second-order `d_0 g_ij`.
    fn derivative(&self, i: usize) -> DMatrix<f64> {
        let m = self.nodes();
        let g = &self.gij;
        let h = self.h;
        if self.periodic {
            return (&g[(i + 1) % m] - &g[(i + m - 1) % m]) / (2.0 * h);
        }
        match i {
            0 => (-3.0 * &g[0] + 4.0 * &g[1] - &g[2]) / (2.0 * h),
            _ if i == m - 1 => (3.0 * &g[m - 1] - 4.0 * &g[m - 2] + &g[m - 3]) / (2.0 * h),
            _ => (&g[i + 1] - &g[i - 1]) / (2.0 * h),
        }
    }
}

/// Extrinsic fields along the `x_0` axis.
#[derive(Debug, Clone, PartialEq)]
pub struct WeingartenField {
    /// Second fundamental form `b_ij` per node.
    pub b: Vec<DMatrix<f64>>,
    /// Weingarten operator per node, `a[(i, j)] = A^j_i`.
    pub a: Vec<DMatrix<f64>>,
    /// `tau[k - 1][node] = tr A^k` for `k = 1..=n`.
    pub tau: Vec<Vec<f64>>,
    /// `tau_1` from the contraction `-(1/(2 sqrt g00)) sum g_{rs,0} g^{rs}`.
    pub tau1_contracted: Vec<f64>,
    /// Principal curvatures per node in ascending order, from the symmetric
    /// problem `b v = k G v`.
    pub principal: Vec<Vec<f64>>,
}

impl WeingartenField {
    /// `A - (tr A / n) Id` in the max-entry norm.
    pub fn off_umbilical(&self, node: usize) -> f64 {
        let a = &self.a[node];
        let n = a.nrows();
        let l = a.trace() / n as f64;
        (a - DMatrix::identity(n, n) * l).amax()
    }

    pub fn max_off_umbilical(&self) -> f64 {
        (0..self.a.len()).map(|i| self.off_umbilical(i)).fold(0.0, f64::max)
    }

    /// `tr A / n`, the common principal curvature of an umbilical leaf.
    pub fn umbilical_lambda(&self) -> Vec<f64> {
        self.a.iter().map(|a| a.trace() / a.nrows() as f64).collect()
    }
}

pub fn weingarten_from_chart(metric: &ChartMetric) -> Result<WeingartenField> {
    let m = metric.nodes();
    let n = metric.dim();
    let mut out = WeingartenField {
        b: Vec::with_capacity(m),
        a: Vec::with_capacity(m),
        tau: vec![Vec::with_capacity(m); n],
        tau1_contracted: Vec::with_capacity(m),
        principal: Vec::with_capacity(m),
    };
    for node in 0..m {
        let g = &metric.gij[node];
        let chol = Cholesky::new(g.clone()).ok_or(Error::SingularMetric { node })?;
        let ginv = chol.inverse();
        let dg = metric.derivative(node);
        let c = -0.5 / metric.g00[node].sqrt();
        let b = &dg * c;
        let a = &dg * &ginv * c;

        let mut tau1 = 0.0;
        for r in 0..n {
            for s in 0..n {
                tau1 += dg[(r, s)] * ginv[(r, s)];
            }
        }
        out.tau1_contracted.push(c * tau1);

        let mut power = a.clone();
        for k in 0..n {
            if k > 0 {
                power = &power * &a;
            }
            out.tau[k].push(power.trace());
        }

        let l = chol.l();
        let linv = l
            .clone()
            .try_inverse()
            .ok_or(Error::SingularMetric { node })?;
        let sym = &linv * &b * linv.transpose();
        let sym = (&sym + sym.transpose()) * 0.5;
        let mut k: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        k.sort_by(f64::total_cmp);
        out.principal.push(k);

        out.b.push(b);
        out.a.push(a);
    }
    Ok(out)
}

/// Chart metric of an umbilical state on its N-curve: `g00 = 1` and
/// `g_ij = exp(2 phi0 + conf) leaf_ij`, where `leaf` is a constant
/// positive-definite block and `phi0` the initial warping.
pub fn umbilical_chart(state: &UmbilicalState, phi0: &CircleField, leaf: &DMatrix<f64>) -> Result<ChartMetric> {
    let m = state.conf.len();
    if phi0.len() != m || (phi0.length() - state.conf.length()).abs() > 1e-12 * phi0.length() {
        return Err(Error::InvalidInput("warping and state live on different grids".into()));
    }
    let gij = phi0
        .samples()
        .iter()
        .zip(state.conf.samples())
        .map(|(p, c)| leaf * (2.0 * p + c).exp())
        .collect();
    ChartMetric::periodic(phi0.length(), vec![1.0; m], gij)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn diag_chart(m: usize, n: usize, w: impl Fn(f64) -> f64) -> ChartMetric {
        let x0: Vec<f64> = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
        let gij = x0.iter().map(|&x| DMatrix::identity(n, n) * (2.0 * w(x)).exp()).collect();
        ChartMetric::new(x0, vec![1.0; m], gij).unwrap()
    }

    #[test]
    fn validation() {
        let x0 = vec![0.0, 0.1, 0.2, 0.3];
        let id = DMatrix::<f64>::identity(2, 2);
        assert!(ChartMetric::new(x0.clone(), vec![1.0; 4], vec![id.clone(); 4]).is_ok());
        assert!(ChartMetric::new(x0.clone(), vec![1.0, 0.0, 1.0, 1.0], vec![id.clone(); 4]).is_err());
        let mut bad = vec![id.clone(); 4];
        bad[2] = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(
            ChartMetric::new(x0.clone(), vec![1.0; 4], bad).unwrap_err(),
            Error::SingularMetric { node: 2 }
        );
        let mut skew = vec![id.clone(); 4];
        skew[0] = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(ChartMetric::new(x0, vec![1.0; 4], skew).is_err());
        assert!(ChartMetric::new(vec![0.0, 0.1, 0.3, 0.4], vec![1.0; 4], vec![id; 4]).is_err());
    }

    #[test]
    fn product_metric_is_totally_geodesic() {
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0]);
        let x0: Vec<f64> = (0..20).map(|i| i as f64 * 0.05).collect();
        let chart = ChartMetric::new(x0, vec![1.7; 20], vec![g; 20]).unwrap();
        let w = weingarten_from_chart(&chart).unwrap();
        for node in 0..20 {
            assert!(w.b[node].amax() < 1e-14);
            assert!(w.a[node].amax() < 1e-14);
            assert!(w.tau.iter().all(|t| t[node].abs() < 1e-14));
        }
    }

    #[test]
    fn twisted_metric_is_umbilical() {
        let n = 3;
        let phi = |x: f64| 0.3 * (2.0 * x).sin();
        let dphi = |x: f64| 0.6 * (2.0 * x).cos();
        let chart = diag_chart(401, n, phi);
        let w = weingarten_from_chart(&chart).unwrap();
        for (node, &x) in chart.x0().iter().enumerate() {
            let want = -dphi(x);
            assert!(w.off_umbilical(node) < 1e-14);
            let tol = if node == 0 || node == 400 { 1e-4 } else { 2e-5 };
            assert!((w.umbilical_lambda()[node] - want).abs() < tol, "node {node}");
            assert!((w.tau[0][node] - n as f64 * want).abs() < n as f64 * tol);
            assert!((w.tau[0][node] - w.tau1_contracted[node]).abs() < 1e-12);
        }
    }

    #[test]
    fn second_order_in_x0() {
        let err = |m: usize| {
            let chart = diag_chart(m, 2, |x| x.exp() * 0.2);
            let w = weingarten_from_chart(&chart).unwrap();
            chart
                .x0()
                .iter()
                .enumerate()
                .map(|(i, &x)| (w.umbilical_lambda()[i] + 0.2 * x.exp()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(101) / err(201);
        assert!(ratio > 3.5, "{ratio}");
    }

    fn rotating_chart(m: usize) -> ChartMetric {
        // G(x) = R(x) diag(e^{x}, 2 + sin x) R(x)^T, a non-umbilical leaf family
        let x0: Vec<f64> = (0..m).map(|i| i as f64 * 2.0 * PI / m as f64).collect();
        let gij = x0
            .iter()
            .map(|&x| {
                let (s, c) = (0.5 * x).sin_cos();
                let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
                let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![(0.3 * x.cos()).exp(), 2.0 + x.sin()]));
                let g = &r * d * r.transpose();
                (&g + g.transpose()) * 0.5
            })
            .collect();
        let g00 = x0.iter().map(|&x| 1.0 + 0.5 * x.sin().powi(2)).collect();
        ChartMetric::periodic(2.0 * PI, g00, gij).unwrap()
    }

    #[test]
    fn b_is_symmetric() {
        let w = weingarten_from_chart(&rotating_chart(128)).unwrap();
        for b in &w.b {
            assert!((b - b.transpose()).amax() <= 1e-12);
        }
        assert!(w.max_off_umbilical() > 1e-2);
    }

    #[test]
    fn tau_are_eigenvalue_power_sums() {
        let w = weingarten_from_chart(&rotating_chart(128)).unwrap();
        for node in 0..128 {
            for k in 1..=2 {
                let p: f64 = w.principal[node].iter().map(|v| v.powi(k as i32)).sum();
                assert!((w.tau[k - 1][node] - p).abs() < 1e-9, "node {node} k {k}");
            }
            assert!((w.tau[0][node] - w.tau1_contracted[node]).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_rescaling_leaves_a_unchanged() {
        let chart = rotating_chart(64);
        let w = weingarten_from_chart(&chart).unwrap();
        for (c, tol) in [(2.0f64.ln(), 0.0), (0.37, 1e-12)] {
            let scaled = ChartMetric::periodic(
                2.0 * PI,
                chart.g00().to_vec(),
                chart.gij().iter().map(|g| g * (2.0 * c).exp()).collect(),
            )
            .unwrap();
            let ws = weingarten_from_chart(&scaled).unwrap();
            for node in 0..64 {
                assert!((&ws.a[node] - &w.a[node]).amax() <= tol * w.a[node].amax().max(1.0));
                for k in 0..2 {
                    assert!((ws.tau[k][node] - w.tau[k][node]).abs() <= tol * w.tau[k][node].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn umbilical_state_chart() {
        // the chart differences exp(2 phi0), the state differences phi0
        let err = |m: usize| {
            let phi0 = CircleField::from_fn(m, 2.0 * PI, |s| 0.2 * s.cos()).unwrap();
            let state = crate::flows::umbilical_from_warping(&phi0);
            let leaf = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 2.0]);
            let chart = umbilical_chart(&state, &phi0, &leaf).unwrap();
            let w = weingarten_from_chart(&chart).unwrap();
            assert!(w.max_off_umbilical() < 1e-13);
            let lam = w.umbilical_lambda();
            lam.iter().zip(state.lambda.samples()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        };
        let (coarse, fine) = (err(64), err(128));
        assert!(fine < 1e-3 && coarse / fine > 3.5, "{coarse} {fine}");
    }
}
