//! Tridiagonal solvers: the Thomas algorithm and its cyclic variant.

/// Solves `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i`; `a[0]` and `c[n-1]`
/// are ignored. The matrix must be nonsingular without pivoting, which holds
/// for the diagonally dominant systems of the implicit schemes.
pub fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    assert!(a.len() == n && c.len() == n && d.len() == n && n > 0);
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let m = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / m;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / m;
    }
    let mut x = dp;
    for i in (0..n - 1).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
    x
}

/// Periodic version: `a[0]` couples row 0 to `x_{n-1}` and `c[n-1]` couples
/// the last row to `x_0`. Sherman-Morrison on top of two Thomas solves.
pub fn solve_cyclic_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    assert!(n >= 3);
    let gamma = -b[0];
    let alpha = c[n - 1];
    let beta = a[0];
    let mut bb = b.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= alpha * beta / gamma;
    let x = solve_tridiagonal(a, &bb, c, d);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(a, &bb, c, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn apply(a: &[f64], b: &[f64], c: &[f64], x: &[f64], periodic: bool) -> Vec<f64> {
        let n = b.len();
        (0..n)
            .map(|i| {
                let mut s = b[i] * x[i];
                if i > 0 {
                    s += a[i] * x[i - 1];
                } else if periodic {
                    s += a[0] * x[n - 1];
                }
                if i + 1 < n {
                    s += c[i] * x[i + 1];
                } else if periodic {
                    s += c[i] * x[0];
                }
                s
            })
            .collect()
    }

    #[test]
    fn random_dominant_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &periodic in &[false, true] {
            for n in [3usize, 4, 17, 64] {
                let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..0.0)).collect();
                let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..0.0)).collect();
                let b: Vec<f64> = (0..n).map(|i| 2.5 - a[i] - c[i]).collect();
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let d = apply(&a, &b, &c, &x, periodic);
                let got = if periodic {
                    solve_cyclic_tridiagonal(&a, &b, &c, &d)
                } else {
                    solve_tridiagonal(&a, &b, &c, &d)
                };
                for (g, w) in got.iter().zip(&x) {
                    assert!((g - w).abs() < 1e-12, "{g} vs {w}");
                }
            }
        }
    }
}
