//! The generalized companion matrix `B_{n,1}` and the matrices built from it.
//!
//! `B_{n,1}` has the principal curvatures as eigenvalues, and its powers give
//! the principal part of the power-sum PDE systems once every `tau_{n+i}` has
//! been eliminated in favour of `tau_1..tau_n`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_index, Error, Result};
use crate::symfun::{
    eval_F, extended_power_sums, sigma_from_tau, CurvatureSpectrum, ElemSymVector,
    PowerSumVector, StructConstants,
};

/// Spectra whose closest pair of curvatures is nearer than this are treated
/// as having a repeated root.
pub const DEFECTIVE_GAP: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct CompanionMatrix {
    sigma: ElemSymVector,
    entries: DMatrix<f64>,
}

impl CompanionMatrix {
    pub fn n(&self) -> usize {
        self.sigma.n()
    }

    pub fn sigma(&self) -> &ElemSymVector {
        &self.sigma
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// `B^p`, with `B^0 = I`.
    pub fn power(&self, p: usize) -> DMatrix<f64> {
        let n = self.n();
        let mut out = DMatrix::identity(n, n);
        for _ in 0..p {
            out = &out * &self.entries;
        }
        out
    }
}

pub fn build_companion(sigma: &ElemSymVector) -> CompanionMatrix {
    let n = sigma.n();
    let mut b = DMatrix::zeros(n, n);
    for i in 1..n {
        b[(i - 1, i)] = i as f64 / (i + 1) as f64;
    }
    for i in 1..=n {
        let sign = if (n - i) % 2 == 0 { 1.0 } else { -1.0 };
        b[(n - 1, i - 1)] = sign * n as f64 / i as f64 * sigma.get(n - i + 1);
    }
    CompanionMatrix {
        sigma: sigma.clone(),
        entries: b,
    }
}

/// Coefficients `c_0 = 1, c_1, .., c_n` of `det(xI - M) = sum c_k x^{n-k}`,
/// by the Faddeev-LeVerrier recursion on the matrix itself.
pub fn characteristic_polynomial(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut c = vec![0.0; n + 1];
    c[0] = 1.0;
    let mut mk = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        let mut prev = mk.clone();
        for d in 0..n {
            prev[(d, d)] += c[k - 1];
        }
        mk = m * prev;
        c[k] = -mk.trace() / k as f64;
    }
    c
}

/// Eigenvector `(1, 2k, 3k^2, .., n k^{n-1})` for the eigenvalue `k`.
pub fn eigenvector(n: usize, k: f64) -> DVector<f64> {
    DVector::from_fn(n, |r, _| (r + 1) as f64 * k.powi(r as i32))
}

/// Largest of `|B v_j - k_j v_j|_inf / (1 + |v_j|_inf)` over the distinct
/// curvatures of `spec`.
pub fn eigenpair_check(b: &CompanionMatrix, spec: &CurvatureSpectrum) -> f64 {
    let n = b.n();
    let mut worst: f64 = 0.0;
    let mut last = f64::NAN;
    for &k in spec.values() {
        if (k - last).abs() < DEFECTIVE_GAP {
            continue;
        }
        last = k;
        let v = eigenvector(n, k);
        let r = b.matrix() * &v - &v * k;
        worst = worst.max(r.amax() / (1.0 + v.amax()));
    }
    worst
}

/// `V_ij = i k_j^{i-1}`, the eigenvectors as columns.
pub fn vandermonde(spec: &CurvatureSpectrum) -> DMatrix<f64> {
    let n = spec.n();
    let k = spec.values();
    DMatrix::from_fn(n, n, |r, c| (r + 1) as f64 * k[c].powi(r as i32))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VandermondeOutcome {
    /// `|B V - V D|_inf`.
    Residual(f64),
    /// Two curvatures closer than [`DEFECTIVE_GAP`]; `B` need not be
    /// diagonalizable and the relation is not checked.
    Defective { min_gap: f64 },
}

pub fn vandermonde_relation(b: &CompanionMatrix, spec: &CurvatureSpectrum) -> VandermondeOutcome {
    let gap = spec.min_gap();
    if gap < DEFECTIVE_GAP {
        return VandermondeOutcome::Defective { min_gap: gap };
    }
    let v = vandermonde(spec);
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(spec.values()));
    VandermondeOutcome::Residual((b.matrix() * &v - &v * d).amax())
}

/// `sum_m (m/2) f_m B^{m-1}` with `f[m] = f_m`; `f[0]` is ignored. Up to
/// `n + 1` entries are accepted so that `f_n` can be supplied too.
pub fn weighted_power_matrix(f: &[f64], b: &CompanionMatrix) -> Result<DMatrix<f64>> {
    let n = b.n();
    if f.len() > n + 1 {
        return Err(Error::InvalidInput(format!(
            "at most f_0..f_{n} may be given, got {} values",
            f.len()
        )));
    }
    let mut out = DMatrix::zeros(n, n);
    let mut p = DMatrix::identity(n, n);
    for (m, &fm) in f.iter().enumerate().skip(1) {
        if m > 1 {
            p = &p * b.matrix();
        }
        if fm != 0.0 {
            out += &p * (m as f64 / 2.0 * fm);
        }
    }
    Ok(out)
}

/// `A~_ij = (i/2) sum_m tau_{i+m-1} f_{m,tau_j}`.
///
/// Row `m` of `partials` holds `d f_m / d tau_j` for `j = 1..n`. Power sums
/// above `n` are taken from `F_k(tau_1)`, so `consts` must reach the highest
/// index that a row with a nonzero partial touches.
pub fn tilde_a_matrix(
    tau: &PowerSumVector,
    partials: &DMatrix<f64>,
    consts: &StructConstants,
) -> Result<DMatrix<f64>> {
    let n = tau.n();
    if partials.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "partials need {n} columns, got {}",
            partials.ncols()
        )));
    }
    let mut out = DMatrix::zeros(n, n);
    for m in 0..partials.nrows() {
        if partials.row(m).iter().all(|&v| v == 0.0) {
            continue;
        }
        for i in 1..=n {
            let idx = i + m - 1;
            let t = if idx <= n {
                tau.get(idx)
            } else {
                eval_F(idx, tau.get(1), consts)?
            };
            for j in 0..n {
                out[(i - 1, j)] += i as f64 / 2.0 * t * partials[(m, j)];
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefinitenessReport {
    pub negative_definite: bool,
    /// Largest eigenvalue of the symmetric part.
    pub margin: f64,
}

fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of `(M + M^T)/2`, ascending.
pub fn symmetric_part_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::InvalidInput("expected a nonempty square matrix".into()));
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetric_part(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    Ok(ev)
}

/// Whether `B~ + A~` is negative definite, tested on its symmetric part.
pub fn hypothesis_check_t02(b_tilde: &DMatrix<f64>, a_tilde: &DMatrix<f64>) -> Result<DefinitenessReport> {
    if b_tilde.shape() != a_tilde.shape() {
        return Err(Error::InvalidInput("matrix shapes differ".into()));
    }
    let ev = symmetric_part_eigenvalues(&(b_tilde + a_tilde))?;
    let margin = *ev.last().unwrap();
    Ok(DefinitenessReport {
        negative_definite: margin < 0.0,
        margin,
    })
}

/// Principal part of the `n`-truncated system
/// `d_t tau_i = (i m / (2(i+m-1))) d_xx tau_{i+m-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationSystem {
    pub n: usize,
    pub m: usize,
    /// `(m/2) B^{m-1}`, the coefficient of `d_xx tau`.
    pub principal: DMatrix<f64>,
    pub note: &'static str,
}

impl TruncationSystem {
    /// `i m / (2(i+m-1))` for 1-based row `i`.
    pub fn row_factor(&self, i: usize) -> f64 {
        (i * self.m) as f64 / (2 * (i + self.m - 1)) as f64
    }
}

pub fn truncate_second_order(sigma: &ElemSymVector, m: usize) -> Result<TruncationSystem> {
    let n = sigma.n();
    check_index("flow power m", m, 1, n)?;
    let b = build_companion(sigma);
    Ok(TruncationSystem {
        n,
        m,
        principal: b.power(m - 1) * (m as f64 / 2.0),
        note: "first-order terms a_m(tau, d_x tau) omitted; see truncation_remainder",
    })
}

/// Lower-order remainder of the truncated system along a profile.
///
/// `k[j][p]` is the `j`-th principal curvature at node `p` of a uniform grid
/// with spacing `h`. At each interior node and for every row `i` this returns
/// `c_i d_xx tau_{i+m-1} - sum_j P_ij d_xx tau_j`, where `P` is the principal
/// matrix at that node and `c_i` the row factor, all derivatives by central
/// differences. The result is indexed `[i-1][p]` with zeros at the two end
/// nodes; it vanishes wherever every `d_x k_j` does.
pub fn truncation_remainder(k: &[Vec<f64>], h: f64, m: usize) -> Result<Vec<Vec<f64>>> {
    let n = k.len();
    if n == 0 {
        return Err(Error::InvalidInput("need at least one curvature profile".into()));
    }
    let np = k[0].len();
    if np < 3 || k.iter().any(|c| c.len() != np) {
        return Err(Error::InvalidInput("profiles must share a grid of >= 3 nodes".into()));
    }
    check_index("flow power m", m, 1, n)?;
    let order = n + m - 1;
    // tau_0..tau_order at every node
    let taus: Vec<Vec<f64>> = (0..np)
        .map(|p| {
            let spec = CurvatureSpectrum::new(k.iter().map(|c| c[p]).collect())?;
            let tau = crate::symfun::power_sums(&spec);
            Ok(extended_power_sums(&sigma_from_tau(&tau), order))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![vec![0.0; np]; n];
    for p in 1..np - 1 {
        let d2 = |idx: usize| (taus[p + 1][idx] - 2.0 * taus[p][idx] + taus[p - 1][idx]) / (h * h);
        let sigma = sigma_from_tau(&PowerSumVector::new(taus[p][1..=n].to_vec())?);
        let sys = truncate_second_order(&sigma, m)?;
        for i in 1..=n {
            let lhs = sys.row_factor(i) * d2(i + m - 1);
            let rhs: f64 = (1..=n).map(|j| sys.principal[(i - 1, j - 1)] * d2(j)).sum();
            out[i - 1][p] = lhs - rhs;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symfun::{f_recursion_constants_to, power_sums};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(k: &[f64]) -> CurvatureSpectrum {
        CurvatureSpectrum::new(k.to_vec()).unwrap()
    }

    fn sig(tail: &[f64]) -> ElemSymVector {
        ElemSymVector::from_tail(tail).unwrap()
    }

    fn mat(n: usize, rows: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(n, n, rows)
    }

    fn distinct_spectrum(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        loop {
            let k: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            if spec(&k).min_gap() > 1e-2 {
                return k;
            }
        }
    }

    #[test]
    fn literal_small_matrices() {
        let (s1, s2, s3) = (0.7, -1.3, 2.1);
        let b1 = build_companion(&sig(&[s1]));
        assert_eq!(b1.matrix(), &mat(1, &[s1]));
        let b2 = build_companion(&sig(&[s1, s2]));
        assert_eq!(b2.matrix(), &mat(2, &[0.0, 0.5, -2.0 * s2, s1]));
        let b3 = build_companion(&sig(&[s1, s2, s3]));
        let expect = mat(3, &[0.0, 0.5, 0.0, 0.0, 0.0, 2.0 / 3.0, 3.0 * s3, -1.5 * s2, s1]);
        assert!((b3.matrix() - expect).amax() < 1e-15);
    }

    #[test]
    fn three_halves_b_squared() {
        let (s1, s2, s3) = (0.7, -1.3, 2.1);
        let b3 = build_companion(&sig(&[s1, s2, s3]));
        let got = weighted_power_matrix(&[0.0, 0.0, 0.0, 1.0], &b3).unwrap();
        let expect = mat(
            3,
            &[
                0.0, 0.0, 0.5,
                3.0 * s3, -1.5 * s2, s1,
                4.5 * s1 * s3, 2.25 * (s3 - s1 * s2), 1.5 * (s1 * s1 - s2),
            ],
        );
        assert!((got - expect).amax() < 1e-14);
    }

    #[test]
    fn weighted_power_matrix_simple_cases() {
        let b = build_companion(&sig(&[3.0, 2.0]));
        let id = weighted_power_matrix(&[0.0, 1.0], &b).unwrap();
        assert_eq!(id, DMatrix::identity(2, 2) * 0.5);
        let b21 = weighted_power_matrix(&[0.0, 0.0, 1.0], &b).unwrap();
        assert_eq!(&b21, b.matrix());
        assert!(weighted_power_matrix(&[0.0; 4], &b).is_err());
    }

    #[test]
    fn eigenpairs_examples() {
        let s = spec(&[1.0, 2.0]);
        let b = build_companion(&sigma_from_tau(&power_sums(&s)));
        let v1 = eigenvector(2, 1.0);
        assert_eq!(v1.as_slice(), &[1.0, 2.0]);
        assert_eq!((b.matrix() * &v1).as_slice(), &[1.0, 2.0]);
        assert!(eigenpair_check(&b, &s) < 1e-14);

        let s3 = spec(&[1.0, 2.0, 3.0]);
        let b3 = build_companion(&sigma_from_tau(&power_sums(&s3)));
        assert_eq!(eigenvector(3, 2.0).as_slice(), &[1.0, 4.0, 12.0]);
        assert!(eigenpair_check(&b3, &s3) < 1e-14);

        let u = CurvatureSpectrum::umbilical(2, 1.5).unwrap();
        let bu = build_companion(&sigma_from_tau(&power_sums(&u)));
        assert!(eigenpair_check(&bu, &u) < 1e-14);
        assert!(matches!(vandermonde_relation(&bu, &u), VandermondeOutcome::Defective { .. }));
    }

    #[test]
    fn vandermonde_examples() {
        let s = spec(&[1.0, 2.0]);
        assert_eq!(vandermonde(&s), mat(2, &[1.0, 1.0, 2.0, 4.0]));
        let b = build_companion(&sigma_from_tau(&power_sums(&s)));
        assert_eq!(vandermonde_relation(&b, &s), VandermondeOutcome::Residual(0.0));
        let one = spec(&[-0.4]);
        let b1 = build_companion(&sigma_from_tau(&power_sums(&one)));
        assert_eq!(vandermonde_relation(&b1, &one), VandermondeOutcome::Residual(0.0));
    }

    #[test]
    fn stated_vandermonde_scaling_is_not_an_eigenbasis() {
        // V_ij = (n/i) k_j^{i-1} fails B V = V D already for n = 2, k = (1,2).
        let s = spec(&[1.0, 2.0]);
        let b = build_companion(&sigma_from_tau(&power_sums(&s)));
        let v = mat(2, &[2.0, 2.0, 1.0, 2.0]);
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 2.0]));
        assert!((b.matrix() * &v - &v * d).amax() > 0.5);
    }

    #[test]
    fn random_spectra_lemma() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for trial in 0..60 {
            let n = 2 + trial % 5;
            let k = distinct_spectrum(&mut rng, n);
            let s = spec(&k);
            let sigma = sigma_from_tau(&power_sums(&s));
            let b = build_companion(&sigma);
            let cp = characteristic_polynomial(b.matrix());
            for j in 0..=n {
                let expect = if j % 2 == 0 { sigma.get(j) } else { -sigma.get(j) };
                assert!((cp[j] - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
            }
            assert!(eigenpair_check(&b, &s) < 1e-9);
            match vandermonde_relation(&b, &s) {
                VandermondeOutcome::Residual(r) => assert!(r < 1e-8, "residual {r}"),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn faddeev_leverrier_against_root_expansion() {
        let m = mat(3, &[2.0, 1.0, 0.0, 0.0, 3.0, 1.0, 0.0, 0.0, -1.0]);
        // (x-2)(x-3)(x+1) = x^3 - 4x^2 + x + 6
        assert_eq!(characteristic_polynomial(&m), vec![1.0, -4.0, 1.0, 6.0]);
    }

    #[test]
    fn weighted_power_spectrum() {
        let k = [-1.2, 0.3, 0.9, 2.2];
        let s = spec(&k);
        let b = build_companion(&sigma_from_tau(&power_sums(&s)));
        for m in 1..=4 {
            let mut f = vec![0.0; m + 1];
            f[m] = 1.0;
            let w = weighted_power_matrix(&f, &b).unwrap();
            let cp = characteristic_polynomial(&w);
            let want: Vec<f64> = k.iter().map(|v| m as f64 / 2.0 * v.powi(m as i32 - 1)).collect();
            for &lam in &want {
                let val: f64 = cp.iter().fold(0.0, |acc, c| acc * lam + c);
                assert!(val.abs() < 1e-9, "m={m} lambda={lam} p={val}");
            }
        }
    }

    #[test]
    fn tilde_a_examples() {
        let tau = power_sums(&spec(&[0.5, 1.5]));
        let consts = f_recursion_constants_to(&tau, 4);
        let zero = DMatrix::zeros(2, 2);
        assert_eq!(tilde_a_matrix(&tau, &zero, &consts).unwrap(), DMatrix::zeros(2, 2));

        // f_m = f delta_{m1}: A~_ij = (i/2) tau_i f_{,j}
        let mut p = DMatrix::zeros(2, 2);
        p[(1, 0)] = 0.3;
        p[(1, 1)] = -0.8;
        let a = tilde_a_matrix(&tau, &p, &consts).unwrap();
        for i in 1..=2 {
            for j in 1..=2 {
                let expect = i as f64 / 2.0 * tau.get(i) * p[(1, j - 1)];
                assert_relative_eq!(a[(i - 1, j - 1)], expect, epsilon = 1e-15);
            }
        }

        // n = 1: A~ = (1/2)(n f_{0,1} + tau_1 f_{1,1})
        let t1 = PowerSumVector::new(vec![0.9]).unwrap();
        let c1 = f_recursion_constants_to(&t1, 2);
        let p1 = DMatrix::from_column_slice(2, 1, &[0.4, -2.0]);
        let a1 = tilde_a_matrix(&t1, &p1, &c1).unwrap();
        assert_relative_eq!(a1[(0, 0)], 0.5 * (0.4 - 0.9 * 2.0), epsilon = 1e-15);
    }

    #[test]
    fn tilde_a_overflow_uses_recursion() {
        let k = [0.5, 1.5, -1.0];
        let tau = power_sums(&spec(&k));
        let mut p = DMatrix::zeros(3, 3);
        p[(2, 0)] = 1.0;
        let short = f_recursion_constants_to(&tau, 3);
        assert!(matches!(
            tilde_a_matrix(&tau, &p, &short),
            Err(Error::MissingStructConstants { needed: 4, .. })
        ));
        let consts = f_recursion_constants_to(&tau, 4);
        let a = tilde_a_matrix(&tau, &p, &consts).unwrap();
        let tau4: f64 = k.iter().map(|v| v.powi(4)).sum();
        assert_relative_eq!(a[(2, 0)], 1.5 * tau4, max_relative = 1e-12);
    }

    #[test]
    fn t02_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        let z = DMatrix::zeros(3, 3);
        let r = hypothesis_check_t02(&(-&id), &z).unwrap();
        assert!(r.negative_definite);
        assert_relative_eq!(r.margin, -1.0, epsilon = 1e-14);
        assert!(!hypothesis_check_t02(&id, &z).unwrap().negative_definite);

        let b = build_companion(&sig(&[1.0, 0.2]));
        let bt = weighted_power_matrix(&[0.0, 0.7], &b).unwrap();
        assert!(!hypothesis_check_t02(&bt, &DMatrix::zeros(2, 2)).unwrap().negative_definite);
        assert!(hypothesis_check_t02(&id, &DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn truncation_examples() {
        let s = sig(&[3.0, 2.0]);
        let t1 = truncate_second_order(&s, 1).unwrap();
        assert_eq!(t1.principal, DMatrix::identity(2, 2) * 0.5);
        let t2 = truncate_second_order(&s, 2).unwrap();
        assert_eq!(t2.principal, mat(2, &[0.0, 0.5, -4.0, 3.0]));
        assert!(truncate_second_order(&s, 0).is_err());
        assert!(truncate_second_order(&s, 3).is_err());

        // n = 2, m = 2 in tau variables: rows (0, 1/2) and (tau_2 - tau_1^2, tau_1)
        let tau = [3.0, 5.0];
        assert_relative_eq!(t2.principal[(1, 0)], tau[1] - tau[0] * tau[0]);
        assert_relative_eq!(t2.principal[(1, 1)], tau[0]);
    }

    #[test]
    fn last_row_matches_next_power_sum_coefficients() {
        // m = 2: coefficient of d_xx tau_i in d_xx tau_{n+1} / (n+1) is
        // (-1)^{n-i} sigma_{n-i+1} / i; m = 3 uses sigma_1 sigma_{n-i+1} - sigma_{n-i+2}.
        let k = [0.4, -1.1, 1.9];
        let n = 3;
        let sigma = sigma_from_tau(&power_sums(&spec(&k)));
        let t2 = truncate_second_order(&sigma, 2).unwrap();
        let t3 = truncate_second_order(&sigma, 3).unwrap();
        for i in 1..=n {
            let sign = if (n - i) % 2 == 0 { 1.0 } else { -1.0 };
            let c2 = sign / i as f64 * sigma.get(n - i + 1);
            let c3 = sign / i as f64 * (sigma.get(1) * sigma.get(n - i + 1) - sigma.get(n - i + 2));
            assert_relative_eq!(t2.principal[(n - 1, i - 1)], t2.row_factor(n) * (n + 1) as f64 * c2, epsilon = 1e-13);
            assert_relative_eq!(t3.principal[(n - 1, i - 1)], t3.row_factor(n) * (n + 2) as f64 * c3, epsilon = 1e-13);
        }
    }

    /// d tau_{idx} / d tau_j of the Newton-closed power sums, by central differences.
    fn jacobian_row(tau: &[f64], idx: usize) -> Vec<f64> {
        let n = tau.len();
        (0..n)
            .map(|j| {
                let h = 1e-6 * (1.0 + tau[j].abs());
                let eval = |d: f64| {
                    let mut t = tau.to_vec();
                    t[j] += d;
                    let s = sigma_from_tau(&PowerSumVector::new(t).unwrap());
                    extended_power_sums(&s, idx)[idx]
                };
                (eval(h) - eval(-h)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn principal_rows_are_scaled_jacobians() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..=5 {
            let k = distinct_spectrum(&mut rng, n);
            let tau = power_sums(&spec(&k));
            let sigma = sigma_from_tau(&tau);
            for m in 1..=n {
                let sys = truncate_second_order(&sigma, m).unwrap();
                for i in 1..=n {
                    let jac = jacobian_row(tau.as_slice(), i + m - 1);
                    for j in 0..n {
                        let want = sys.row_factor(i) * jac[j];
                        let got = sys.principal[(i - 1, j)];
                        assert!((got - want).abs() < 1e-5 * (1.0 + want.abs()), "n={n} m={m} i={i} j={j}: {got} vs {want}");
                    }
                }
            }
        }
    }

    #[test]
    fn remainder_vanishes_where_profiles_are_flat() {
        // k_1 has a critical point at x = 0; the remainder there is pure
        // discretization error and shrinks like h^2, while away from it the
        // first-order terms keep it at O(1).
        let mid_and_far = |np: usize| {
            let h = 2.0 / (np - 1) as f64;
            let xs: Vec<f64> = (0..np).map(|p| p as f64 * h - 1.0).collect();
            let k = vec![
                xs.iter().map(|x| 0.5 + x * x).collect::<Vec<_>>(),
                vec![-1.0; np],
                vec![2.5; np],
            ];
            let r = truncation_remainder(&k, h, 2).unwrap();
            let q = (np - 1) / 4;
            let mid = r.iter().map(|row| row[np / 2].abs()).fold(0.0, f64::max);
            let far = r.iter().map(|row| row[q].abs()).fold(0.0, f64::max);
            (mid, far)
        };
        let (m1, f1) = mid_and_far(41);
        let (m2, f2) = mid_and_far(81);
        assert!(m1 / m2 > 3.5, "{m1} {m2}");
        assert!(f1 > 0.1 && (f1 - f2).abs() < 0.05 * f1, "{f1} {f2}");

        let np = 41;
        let h = 0.05;
        let lin = vec![(0..np).map(|p| 1.0 + 0.1 * p as f64 * h).collect::<Vec<_>>(), vec![3.0; np]];
        let r1 = truncation_remainder(&lin, h, 1).unwrap();
        assert!(r1.iter().flatten().all(|v| v.abs() < 1e-9));
    }
}
