//! Power sums, elementary symmetric functions and the conformal recursions.
//!
//! A leaf with principal curvatures `k_1..k_n` carries two equivalent sets of
//! scalar invariants: the power sums `tau_j = sum_i k_i^j` and the elementary
//! symmetric functions `sigma_j`. Conversions between the two go through the
//! Newton identities. Along a leafwise-conformal deformation the higher
//! invariants are polynomials in the first one, `tau_k = F_k(tau_1)` and
//! `sigma_k = Psi_k(sigma_1)`, whose constant terms are fixed at `t = 0`
//! ([`StructConstants`]).

use std::sync::Arc;

use crate::error::{check_index, Error, Result};

/// Principal curvatures at a point, stored in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureSpectrum {
    k: Vec<f64>,
}

impl CurvatureSpectrum {
    pub fn new(mut k: Vec<f64>) -> Result<Self> {
        if k.is_empty() {
            return Err(Error::InvalidInput("spectrum needs n >= 1".into()));
        }
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite principal curvature".into()));
        }
        k.sort_by(|a, b| a.total_cmp(b));
        Ok(Self { k })
    }

    /// `n` copies of `lambda`.
    pub fn umbilical(n: usize, lambda: f64) -> Result<Self> {
        Self::new(vec![lambda; n])
    }

    pub fn n(&self) -> usize {
        self.k.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.k
    }

    /// Smallest distance between consecutive principal curvatures
    /// (`+inf` when `n = 1`).
    pub fn min_gap(&self) -> f64 {
        self.k
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// `tau_1..tau_n`; `tau_0 = n` is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSumVector {
    tau: Vec<f64>,
}

impl PowerSumVector {
    pub fn new(tau: Vec<f64>) -> Result<Self> {
        if tau.is_empty() {
            return Err(Error::InvalidInput("power-sum vector needs n >= 1".into()));
        }
        Ok(Self { tau })
    }

    pub fn n(&self) -> usize {
        self.tau.len()
    }

    /// `tau_j` for `0 <= j <= n`, with `tau_0 = n`.
    pub fn get(&self, j: usize) -> f64 {
        if j == 0 {
            self.n() as f64
        } else {
            self.tau[j - 1]
        }
    }

    /// `tau_1..tau_n`.
    pub fn as_slice(&self) -> &[f64] {
        &self.tau
    }
}

/// `sigma_0 = 1, sigma_1..sigma_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElemSymVector {
    sigma: Vec<f64>,
}

impl ElemSymVector {
    /// Build from `sigma_1..sigma_n`; `sigma_0 = 1` is prepended.
    pub fn from_tail(tail: &[f64]) -> Result<Self> {
        if tail.is_empty() {
            return Err(Error::InvalidInput("elementary symmetric vector needs n >= 1".into()));
        }
        let mut sigma = Vec::with_capacity(tail.len() + 1);
        sigma.push(1.0);
        sigma.extend_from_slice(tail);
        Ok(Self { sigma })
    }

    /// Build from the full list `sigma_0..sigma_n`; `sigma_0` must equal 1.
    pub fn new(sigma: Vec<f64>) -> Result<Self> {
        if sigma.len() < 2 {
            return Err(Error::InvalidInput("elementary symmetric vector needs n >= 1".into()));
        }
        if sigma[0] != 1.0 {
            return Err(Error::InvalidInput(format!("sigma_0 must be 1, got {}", sigma[0])));
        }
        Ok(Self { sigma })
    }

    pub fn n(&self) -> usize {
        self.sigma.len() - 1
    }

    /// `sigma_j` for `0 <= j <= n`; zero above `n`.
    pub fn get(&self, j: usize) -> f64 {
        self.sigma.get(j).copied().unwrap_or(0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.sigma
    }
}

/// Constant terms of the conformal recursions: `phi_k = F_k(0)` and
/// `psi_k = Psi_k(0)`. Index `k` addresses order `k`; entries 0 and 1 are
/// zero by convention.
#[derive(Debug, Clone, PartialEq)]
pub struct StructConstants {
    n: usize,
    phi: Vec<f64>,
    psi: Vec<f64>,
}

impl StructConstants {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Highest `k` for which `F_k` can be evaluated.
    pub fn f_order(&self) -> usize {
        self.phi.len() - 1
    }

    pub fn phi(&self, k: usize) -> f64 {
        self.phi.get(k).copied().unwrap_or(0.0)
    }

    pub fn psi(&self, k: usize) -> f64 {
        self.psi.get(k).copied().unwrap_or(0.0)
    }

    pub fn phis(&self) -> &[f64] {
        &self.phi
    }

    pub fn psis(&self) -> &[f64] {
        &self.psi
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial_ratio(num: usize, den: usize) -> f64 {
    // num! / den! for num >= den
    ((den + 1)..=num).fold(1.0, |acc, i| acc * i as f64)
}

pub fn power_sums(spec: &CurvatureSpectrum) -> PowerSumVector {
    let n = spec.n();
    let mut tau = vec![0.0; n];
    for &k in spec.values() {
        let mut p = 1.0;
        for t in tau.iter_mut() {
            p *= k;
            *t += p;
        }
    }
    PowerSumVector { tau }
}

/// Newton identities: `j sigma_j = sum_{i=1}^j (-1)^{i-1} sigma_{j-i} tau_i`.
pub fn sigma_from_tau(tau: &PowerSumVector) -> ElemSymVector {
    let n = tau.n();
    let mut sigma = vec![0.0; n + 1];
    sigma[0] = 1.0;
    for j in 1..=n {
        let mut acc = 0.0;
        for i in 1..=j {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * sigma[j - i] * tau.get(i);
        }
        sigma[j] = acc / j as f64;
    }
    ElemSymVector { sigma }
}

pub fn tau_from_sigma(sigma: &ElemSymVector) -> PowerSumVector {
    let n = sigma.n();
    let ext = extended_power_sums(sigma, n);
    PowerSumVector {
        tau: ext[1..].to_vec(),
    }
}

/// Power sums `tau_0..tau_order` of the roots encoded by `sigma`, any order.
///
/// Above `n` the recursion `tau_j = sum_{i=1}^n (-1)^{i-1} sigma_i tau_{j-i}`
/// closes the sequence (Cayley-Hamilton).
pub fn extended_power_sums(sigma: &ElemSymVector, order: usize) -> Vec<f64> {
    let n = sigma.n();
    let mut tau = vec![0.0; order + 1];
    tau[0] = n as f64;
    for j in 1..=order {
        let mut acc = 0.0;
        for i in 1..j.min(n + 1) {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * sigma.get(i) * tau[j - i];
        }
        if j <= n {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * j as f64 * sigma.get(j);
        }
        tau[j] = acc;
    }
    tau
}

fn f_without_constant(k: usize, x: f64, n: usize, phi: &[f64]) -> f64 {
    let nf = n as f64;
    let mut acc = x.powi(k as i32) / nf.powi(k as i32 - 1);
    for i in 2..k {
        acc += binomial(k, i) * phi[i] / nf.powi((k - i) as i32) * x.powi((k - i) as i32);
    }
    acc
}

fn psi_without_constant(k: usize, x: f64, n: usize, psi: &[f64]) -> f64 {
    let nf = n as f64;
    // (n-1)!/(k!(n-k)!) = binom(n-1, k) * (n-1-k)! (n-k)... keep the ratio form.
    let lead = factorial_ratio(n - 1, n - k) / factorial_ratio(k, 1);
    let mut acc = lead / nf.powi(k as i32 - 1) * x.powi(k as i32);
    for i in 2..k {
        let c = factorial_ratio(n - i, n - k) / factorial_ratio(k - i, 1);
        acc += c * psi[i] / nf.powi((k - i) as i32) * x.powi((k - i) as i32);
    }
    acc
}

/// Constants `phi_2..phi_n` and `psi_2..psi_n` from the data at `t = 0`.
pub fn f_recursion_constants(tau0: &PowerSumVector) -> StructConstants {
    f_recursion_constants_to(tau0, tau0.n())
}

/// As [`f_recursion_constants`], with `phi_k` extended up to `order >= n`.
/// Power sums above `n` come from the Newton closure of the same spectrum.
pub fn f_recursion_constants_to(tau0: &PowerSumVector, order: usize) -> StructConstants {
    let n = tau0.n();
    let order = order.max(n);
    let sigma = sigma_from_tau(tau0);
    let tau = extended_power_sums(&sigma, order);
    // keep the supplied values where available rather than the round trip
    let tau_at = |j: usize| if j <= n { tau0.get(j) } else { tau[j] };
    let x = tau0.get(1);

    let mut phi = vec![0.0; order + 1];
    for k in 2..=order {
        phi[k] = tau_at(k) - f_without_constant(k, x, n, &phi);
    }
    let s1 = sigma.get(1);
    let mut psi = vec![0.0; n + 1];
    for k in 2..=n {
        psi[k] = sigma.get(k) - psi_without_constant(k, s1, n, &psi);
    }
    StructConstants { n, phi, psi }
}

/// `F_k(tau_1)`; `F_0 = n`, `F_1 = tau_1`.
#[allow(non_snake_case)]
pub fn eval_F(k: usize, tau1: f64, consts: &StructConstants) -> Result<f64> {
    let order = consts.f_order();
    if k > order {
        return Err(Error::MissingStructConstants {
            needed: k,
            available: order,
        });
    }
    Ok(match k {
        0 => consts.n as f64,
        1 => tau1,
        _ => f_without_constant(k, tau1, consts.n, &consts.phi) + consts.phi[k],
    })
}

/// `F_k'(x) = (k/n) F_{k-1}(x)`.
#[allow(non_snake_case)]
pub fn eval_F_prime(k: usize, tau1: f64, consts: &StructConstants) -> Result<f64> {
    if k == 0 {
        return Ok(0.0);
    }
    eval_F(k, tau1, consts).map(|_| ())?;
    Ok(k as f64 / consts.n as f64 * eval_F(k - 1, tau1, consts)?)
}

/// `Psi_k(sigma_1)` for `0 <= k <= n`; `Psi_0 = 1`, `Psi_1 = sigma_1`.
#[allow(non_snake_case)]
pub fn eval_Psi(k: usize, sigma1: f64, consts: &StructConstants) -> Result<f64> {
    check_index("Psi order", k, 0, consts.n)?;
    Ok(match k {
        0 => 1.0,
        1 => sigma1,
        _ => psi_without_constant(k, sigma1, consts.n, &consts.psi) + consts.psi[k],
    })
}

/// `Psi_k'(x) = ((n-k+1)/n) Psi_{k-1}(x)`.
#[allow(non_snake_case)]
pub fn eval_Psi_prime(k: usize, sigma1: f64, consts: &StructConstants) -> Result<f64> {
    check_index("Psi order", k, 0, consts.n)?;
    if k == 0 {
        return Ok(0.0);
    }
    let n = consts.n as f64;
    Ok((n - k as f64 + 1.0) / n * eval_Psi(k - 1, sigma1, consts)?)
}

/// Coefficients of the Newton transformation `T_r(A) = sum_i (-1)^i sigma_{r-i} A^i`,
/// lowest power first.
pub fn newton_transform(sigma: &ElemSymVector, r: usize) -> Result<Vec<f64>> {
    check_index("Newton transformation order", r, 0, sigma.n())?;
    Ok((0..=r)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * sigma.get(r - i)
        })
        .collect())
}

/// `sum_i c_i tau_{i+shift}`: the trace of `A^shift` times a polynomial in `A`.
/// `tau_ext` must hold `tau_0..` far enough (see [`extended_power_sums`]).
pub fn contract_with_power_sums(coeffs: &[f64], tau_ext: &[f64], shift: usize) -> Result<f64> {
    let needed = coeffs.len() - 1 + shift;
    if needed >= tau_ext.len() {
        return Err(Error::IndexOutOfRange {
            what: "power sum",
            index: needed,
            min: 0,
            max: tau_ext.len().saturating_sub(1),
        });
    }
    Ok(coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| c * tau_ext[i + shift])
        .sum())
}

/// `mu_{m;ij} = sum_{a=0}^{m-1} k_i^a k_j^{m-1-a}` with 1-based `i <= j`.
pub fn mu_coefficient(m: usize, i: usize, j: usize, spec: &CurvatureSpectrum) -> Result<f64> {
    let n = spec.n();
    check_index("mu order m", m, 1, n.saturating_sub(1).max(1))?;
    check_index("mu index i", i, 1, n)?;
    check_index("mu index j", j, i, n)?;
    Ok(mu_unchecked(m, spec.values()[i - 1], spec.values()[j - 1]))
}

fn mu_unchecked(m: usize, ki: f64, kj: f64) -> f64 {
    (0..m)
        .map(|a| ki.powi(a as i32) * kj.powi((m - 1 - a) as i32))
        .sum()
}

/// Outcome of the ellipticity test at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticityReport {
    pub elliptic: bool,
    /// Largest value of `sum_m f_m mu_{m;ij}` over the pairs `i <= j`;
    /// the condition holds iff this is negative.
    pub margin: f64,
}

/// Checks `sum_{m=1}^{n-1} f_m mu_{m;ij} < 0` for all `i <= j`.
///
/// `f[m]` is `f_m` evaluated at the point, for `m = 0..n-1`; `f[0]` does not
/// enter the condition.
pub fn ellipticity_check(f: &[f64], spec: &CurvatureSpectrum) -> Result<EllipticityReport> {
    let n = spec.n();
    if f.len() != n {
        return Err(Error::InvalidInput(format!(
            "expected f_0..f_{} ({} values), got {}",
            n - 1,
            n,
            f.len()
        )));
    }
    let k = spec.values();
    let mut margin = f64::NEG_INFINITY;
    for i in 0..n {
        for j in i..n {
            let s: f64 = (1..n).map(|m| f[m] * mu_unchecked(m, k[i], k[j])).sum();
            margin = margin.max(s);
        }
    }
    Ok(EllipticityReport {
        elliptic: margin < 0.0,
        margin,
    })
}

/// Coefficient function `f_m(tau_1..tau_n)`.
pub type TauCoefficient = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// `psi(lambda) = -sum_m f_m(n lambda, n lambda^2, .., n lambda^n) lambda^m`,
/// the speed function of the umbilical reduction.
#[derive(Clone)]
pub struct UmbilicalPsi {
    n: usize,
    coeffs: Vec<TauCoefficient>,
}

impl UmbilicalPsi {
    /// `coeffs[m]` is `f_m`; at most `n` entries.
    pub fn new(n: usize, coeffs: Vec<TauCoefficient>) -> Result<Self> {
        if n == 0 || coeffs.len() > n {
            return Err(Error::InvalidInput(format!(
                "need 1 <= n and at most n coefficient functions (n = {n}, got {})",
                coeffs.len()
            )));
        }
        Ok(Self { n, coeffs })
    }

    /// Constant coefficients `f_m`.
    pub fn from_constants(n: usize, f: &[f64]) -> Result<Self> {
        let coeffs = f
            .iter()
            .map(|&c| Arc::new(move |_: &[f64]| c) as TauCoefficient)
            .collect();
        Self::new(n, coeffs)
    }

    /// `f_0 = -p(tau_1 / n)` and no other terms, so that `psi = p`.
    pub fn from_profile(n: usize, p: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        let nf = n as f64;
        Self::new(n, vec![Arc::new(move |tau: &[f64]| -p(tau[0] / nf)) as TauCoefficient])
    }

    /// `psi(lambda) = c lambda`.
    pub fn linear(n: usize, c: f64) -> Result<Self> {
        Self::from_profile(n, move |l| c * l)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn value(&self, lambda: f64) -> f64 {
        let tau: Vec<f64> = (1..=self.n)
            .map(|j| self.n as f64 * lambda.powi(j as i32))
            .collect();
        -self
            .coeffs
            .iter()
            .enumerate()
            .map(|(m, f)| f(&tau) * lambda.powi(m as i32))
            .sum::<f64>()
    }

    /// Central difference with a relative step.
    pub fn derivative(&self, lambda: f64) -> f64 {
        let h = 1e-5 * lambda.abs().max(1.0);
        (self.value(lambda + h) - self.value(lambda - h)) / (2.0 * h)
    }

    /// `psi'(lambda) > 0`, the hypothesis under which umbilicity is preserved.
    pub fn preserves_umbilicity(&self, lambda: f64) -> bool {
        self.derivative(lambda) > 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_profiles() {
        assert!((UmbilicalPsi::linear(1, 2.0).unwrap().value(0.3) - 0.6).abs() < 1e-15);
        let p = UmbilicalPsi::from_profile(2, |l| l + l * l * l).unwrap();
        assert!((p.value(2.0) - 10.0).abs() < 1e-12);
        assert!((p.derivative(2.0) - 13.0).abs() < 1e-8);
        assert!(p.preserves_umbilicity(-1.0));
    }
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(k: &[f64]) -> CurvatureSpectrum {
        CurvatureSpectrum::new(k.to_vec()).unwrap()
    }

    /// Coefficients of prod (x - k_i), highest power first, by direct expansion.
    fn poly_from_roots(k: &[f64]) -> Vec<f64> {
        let mut c = vec![1.0];
        for &r in k {
            let mut next = vec![0.0; c.len() + 1];
            for (i, &a) in c.iter().enumerate() {
                next[i] += a;
                next[i + 1] -= a * r;
            }
            c = next;
        }
        c
    }

    #[test]
    fn power_sums_small_cases() {
        assert_eq!(power_sums(&spec(&[1.0, 2.0])).as_slice(), &[3.0, 5.0]);
        assert_eq!(power_sums(&spec(&[1.0, 2.0, 3.0])).as_slice(), &[6.0, 14.0, 36.0]);
        let u = CurvatureSpectrum::umbilical(3, 2.0).unwrap();
        assert_eq!(power_sums(&u).as_slice(), &[6.0, 12.0, 24.0]);
    }

    #[test]
    fn spectrum_is_sorted_and_rejects_empty() {
        assert_eq!(spec(&[3.0, -1.0, 2.0]).values(), &[-1.0, 2.0, 3.0]);
        assert!(CurvatureSpectrum::new(vec![]).is_err());
        assert!(CurvatureSpectrum::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn sigma_tau_small_cases() {
        let s = sigma_from_tau(&PowerSumVector::new(vec![3.0, 5.0]).unwrap());
        assert_eq!(s.as_slice(), &[1.0, 3.0, 2.0]);
        let z = sigma_from_tau(&PowerSumVector::new(vec![0.0; 4]).unwrap());
        assert_eq!(z.as_slice(), &[1.0, 0.0, 0.0, 0.0, 0.0]);

        let t = tau_from_sigma(&ElemSymVector::new(vec![1.0, 3.0, 2.0]).unwrap());
        assert_eq!(t.as_slice(), &[3.0, 5.0]);
        let t0 = tau_from_sigma(&ElemSymVector::from_tail(&[0.0; 3]).unwrap());
        assert_eq!(t0.as_slice(), &[0.0; 3]);
    }

    #[test]
    fn sigma_matches_root_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let k: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let sigma = sigma_from_tau(&power_sums(&spec(&k)));
            let poly = poly_from_roots(&k);
            for j in 0..=4 {
                let expect = if j % 2 == 0 { poly[j] } else { -poly[j] };
                assert_relative_eq!(sigma.get(j), expect, epsilon = 1e-12, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn tau_roundtrip_from_known_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let k: Vec<f64> = (0..5).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let poly = poly_from_roots(&k);
            let tail: Vec<f64> = (1..=5)
                .map(|j| if j % 2 == 0 { poly[j] } else { -poly[j] })
                .collect();
            let tau = tau_from_sigma(&ElemSymVector::from_tail(&tail).unwrap());
            for (j, t) in tau.as_slice().iter().enumerate() {
                let direct: f64 = k.iter().map(|x| x.powi(j as i32 + 1)).sum();
                assert_relative_eq!(*t, direct, epsilon = 1e-9, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn rejects_bad_sigma0() {
        assert!(ElemSymVector::new(vec![2.0, 1.0]).is_err());
        assert!(ElemSymVector::new(vec![1.0]).is_err());
    }

    #[test]
    fn recursion_constants_examples() {
        let c = f_recursion_constants(&power_sums(&spec(&[1.0, 2.0])));
        assert_relative_eq!(c.phi(2), 0.5, epsilon = 1e-14);
        assert_relative_eq!(c.psi(2), -0.25, epsilon = 1e-14);

        let c3 = f_recursion_constants(&power_sums(&spec(&[1.0, 2.0, 3.0])));
        assert_relative_eq!(c3.phi(2), 2.0, epsilon = 1e-13);
        assert_relative_eq!(c3.phi(3), 0.0, epsilon = 1e-12);

        let u = f_recursion_constants(&power_sums(&CurvatureSpectrum::umbilical(4, 1.7).unwrap()));
        for k in 2..=4 {
            assert!(u.phi(k).abs() < 1e-12, "phi_{k} = {}", u.phi(k));
        }
        let u3 = f_recursion_constants(&power_sums(&CurvatureSpectrum::umbilical(3, 1.0).unwrap()));
        assert!(u3.psi(2).abs() < 1e-14);
    }

    #[test]
    fn eval_f_and_psi_examples() {
        let c = f_recursion_constants(&power_sums(&spec(&[1.0, 2.0])));
        assert_relative_eq!(eval_F(2, 3.0, &c).unwrap(), 5.0, epsilon = 1e-14);
        assert_eq!(eval_F(0, 123.0, &c).unwrap(), 2.0);
        assert_eq!(eval_F(1, 123.0, &c).unwrap(), 123.0);
        assert_relative_eq!(eval_Psi(2, 3.0, &c).unwrap(), 2.0, epsilon = 1e-14);
        assert_eq!(eval_Psi(0, 9.0, &c).unwrap(), 1.0);
        assert!(matches!(
            eval_F(3, 1.0, &c),
            Err(Error::MissingStructConstants { needed: 3, available: 2 })
        ));
        assert!(matches!(eval_Psi(3, 1.0, &c), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn derivatives_agree_with_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let c = f_recursion_constants_to(&power_sums(&spec(&k)), 8);
        for _ in 0..10 {
            let x: f64 = rng.gen_range(-3.0..3.0);
            let h = 1e-5;
            for order in 0..=8 {
                let fd = (eval_F(order, x + h, &c).unwrap() - eval_F(order, x - h, &c).unwrap()) / (2.0 * h);
                let exact = eval_F_prime(order, x, &c).unwrap();
                assert!((fd - exact).abs() <= 1e-8 * (1.0 + exact.abs()), "F_{order}'");
            }
            for order in 0..=5 {
                let fd = (eval_Psi(order, x + h, &c).unwrap() - eval_Psi(order, x - h, &c).unwrap()) / (2.0 * h);
                let exact = eval_Psi_prime(order, x, &c).unwrap();
                assert!((fd - exact).abs() <= 1e-8 * (1.0 + exact.abs()), "Psi_{order}'");
            }
        }
    }

    #[test]
    fn small_order_closed_forms() {
        // F_3, F_4 and Psi_3 in expanded form.
        let k = [0.3, -1.1, 2.0, 0.7];
        let c = f_recursion_constants(&power_sums(&spec(&k)));
        let n = 4.0;
        let x: f64 = 1.37;
        let (p2, p3, p4) = (c.phi(2), c.phi(3), c.phi(4));
        let f3 = x.powi(3) / (n * n) + 3.0 / n * p2 * x + p3;
        let f4 = x.powi(4) / n.powi(3) + 6.0 / (n * n) * p2 * x * x + 4.0 / n * p3 * x + p4;
        assert_relative_eq!(eval_F(3, x, &c).unwrap(), f3, epsilon = 1e-12);
        assert_relative_eq!(eval_F(4, x, &c).unwrap(), f4, epsilon = 1e-12);
        let psi3 = (n - 1.0) * (n - 2.0) / (6.0 * n * n) * x.powi(3) + (n - 2.0) / n * c.psi(2) * x + c.psi(3);
        assert_relative_eq!(eval_Psi(3, x, &c).unwrap(), psi3, epsilon = 1e-12);
    }

    #[test]
    fn newton_transform_examples() {
        let s = ElemSymVector::new(vec![1.0, 3.0, 2.0]).unwrap();
        assert_eq!(newton_transform(&s, 0).unwrap(), vec![1.0]);
        let t1 = newton_transform(&s, 1).unwrap();
        assert_eq!(t1, vec![3.0, -1.0]);
        let tau = extended_power_sums(&s, 4);
        assert_relative_eq!(contract_with_power_sums(&t1, &tau, 0).unwrap(), 3.0, epsilon = 1e-14);
        assert!(newton_transform(&s, 3).is_err());
    }

    #[test]
    fn newton_trace_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=6 {
            let k: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let sigma = sigma_from_tau(&power_sums(&spec(&k)));
            let tau = extended_power_sums(&sigma, n + 4);
            for r in 0..=n {
                let c = newton_transform(&sigma, r).unwrap();
                let tr = contract_with_power_sums(&c, &tau, 0).unwrap();
                let expect = (n - r) as f64 * sigma.get(r);
                assert!((tr - expect).abs() < 1e-9 * (1.0 + expect.abs()), "n={n} r={r}");
            }
        }
    }

    #[test]
    fn extended_power_sums_match_direct() {
        let k = [1.5, -0.5, 2.5];
        let sigma = sigma_from_tau(&power_sums(&spec(&k)));
        let ext = extended_power_sums(&sigma, 9);
        for (j, v) in ext.iter().enumerate() {
            let direct: f64 = k.iter().map(|x| x.powi(j as i32)).sum();
            assert_relative_eq!(*v, direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn mu_examples() {
        let s = spec(&[0.5, 1.5, -2.0]);
        for i in 1..=3 {
            for j in i..=3 {
                assert_eq!(mu_coefficient(1, i, j, &s).unwrap(), 1.0);
                let k = s.values();
                assert_relative_eq!(mu_coefficient(2, i, j, &s).unwrap(), k[i - 1] + k[j - 1]);
            }
        }
        assert!(mu_coefficient(3, 1, 1, &s).is_err());
        assert!(mu_coefficient(1, 2, 1, &s).is_err());
        assert!(mu_coefficient(1, 1, 4, &s).is_err());
    }

    #[test]
    fn ellipticity_umbilical_reduction() {
        let lambda = 0.8;
        let s = CurvatureSpectrum::umbilical(4, lambda).unwrap();
        let f = [0.3, -1.0, 0.4, -0.2];
        let rep = ellipticity_check(&f, &s).unwrap();
        let reduced: f64 = (1..4).map(|m| m as f64 * f[m] * lambda.powi(m as i32 - 1)).sum();
        assert_relative_eq!(rep.margin, reduced, epsilon = 1e-14);
        assert_eq!(rep.elliptic, reduced < 0.0);
        assert!(ellipticity_check(&[1.0], &s).is_err());
    }

    #[test]
    fn psi_examples() {
        let heat = UmbilicalPsi::from_constants(3, &[0.0, -2.0, 0.0]).unwrap();
        for &l in &[-1.0, 0.0, 0.7, 3.0] {
            assert_relative_eq!(heat.value(l), 2.0 * l, epsilon = 1e-14);
            assert_relative_eq!(heat.derivative(l), 2.0, epsilon = 1e-8);
            assert!(heat.preserves_umbilicity(l));
        }
        let zero = UmbilicalPsi::from_constants(3, &[]).unwrap();
        assert_eq!(zero.value(1.3), 0.0);
        let lin = UmbilicalPsi::from_constants(3, &[0.0, -1.0]).unwrap();
        assert_relative_eq!(lin.value(0.4), 0.4, epsilon = 1e-15);
        assert_relative_eq!(lin.derivative(0.4), 1.0, epsilon = 1e-8);
        assert!(UmbilicalPsi::from_constants(1, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn psi_with_tau_dependent_coefficients() {
        // f_0 = -tau_2 / n gives psi = lambda^2.
        let n = 2;
        let f0: TauCoefficient = Arc::new(move |t: &[f64]| -t[1] / n as f64);
        let p = UmbilicalPsi::new(n, vec![f0]).unwrap();
        assert_relative_eq!(p.value(1.5), 2.25, epsilon = 1e-14);
        assert_relative_eq!(p.derivative(1.5), 3.0, epsilon = 1e-8);
        assert!(!p.preserves_umbilicity(-0.5));
    }

    mod props {
        use super::*;
        use rand::Rng;
        use proptest::prelude::*;

        fn spectra() -> impl Strategy<Value = Vec<f64>> {
            (1usize..=6).prop_flat_map(|n| proptest::collection::vec(-10.0f64..10.0, n))
        }

        proptest! {
            #[test]
            fn roundtrip(k in spectra()) {
                let tau = power_sums(&CurvatureSpectrum::new(k).unwrap());
                let back = tau_from_sigma(&sigma_from_tau(&tau));
                for (a, b) in tau.as_slice().iter().zip(back.as_slice()) {
                    prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
                }
            }

            #[test]
            fn recursion_is_identity_at_initial_time(k in spectra()) {
                let s = CurvatureSpectrum::new(k).unwrap();
                let tau = power_sums(&s);
                let sigma = sigma_from_tau(&tau);
                let c = f_recursion_constants(&tau);
                for j in 1..=s.n() {
                    let f = eval_F(j, tau.get(1), &c).unwrap();
                    prop_assert!((f - tau.get(j)).abs() <= 1e-10 * tau.get(j).abs().max(1.0));
                    let p = eval_Psi(j, sigma.get(1), &c).unwrap();
                    prop_assert!((p - sigma.get(j)).abs() <= 1e-10 * sigma.get(j).abs().max(1.0));
                }
            }

            #[test]
            fn cayley_hamilton_contraction(k in (1usize..=5).prop_flat_map(|n| proptest::collection::vec(-3.0f64..3.0, n))) {
                let s = CurvatureSpectrum::new(k).unwrap();
                let n = s.n();
                let sigma = sigma_from_tau(&power_sums(&s));
                let tau = extended_power_sums(&sigma, n + 3);
                let c = newton_transform(&sigma, n).unwrap();
                let scale: f64 = tau.iter().map(|v| v.abs()).fold(1.0, f64::max);
                for j in 0..=3 {
                    let v = contract_with_power_sums(&c, &tau, j).unwrap();
                    prop_assert!(v.abs() <= 1e-10 * scale);
                }
            }

            #[test]
            fn ellipticity_scale_covariant(k in spectra(), c in 0.01f64..100.0, seed in 0u64..1000) {
                let s = CurvatureSpectrum::new(k).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let f: Vec<f64> = (0..s.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let scaled: Vec<f64> = f.iter().map(|v| v * c).collect();
                let a = ellipticity_check(&f, &s).unwrap();
                let b = ellipticity_check(&scaled, &s).unwrap();
                prop_assert_eq!(a.elliptic, b.elliptic);
            }
        }
    }
}
