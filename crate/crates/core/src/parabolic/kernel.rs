//! Closed-form solutions of the heat equation on the line and on the circle.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Half-width of the quadrature window in units of `2 sqrt(t)`. The kernel
/// mass outside `|x - y| > 2 sqrt(t) * KERNEL_WINDOW` is `erfc(5.3) < 1e-12`.
pub const KERNEL_WINDOW: f64 = 5.3;

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("time must be positive, got {t}")));
    }
    Ok(())
}

/// `G(t, x, y) = (4 pi t)^{-1/2} exp(-(x - y)^2 / (4t))`.
pub fn heat_kernel(t: f64, x: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    Ok((-(x - y).powi(2) / (4.0 * t)).exp() / (4.0 * PI * t).sqrt())
}

/// Samples on the uniform line grid `x_j = x0 + j h`; zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct LineField {
    pub x0: f64,
    pub h: f64,
    pub samples: Vec<f64>,
}

impl LineField {
    pub fn from_fn(x0: f64, h: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        Self {
            x0,
            h,
            samples: (0..n).map(|j| f(x0 + j as f64 * h)).collect(),
        }
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.h
    }
}

/// `u(t, x) = int u0(y) G(t, x, y) dy` at each point of `at`.
///
/// The integral runs over the nodes of `u0` inside the kernel window around
/// `x`, by the rectangle rule. Beyond the truncation (below `1e-12` of
/// `sup|u0|`) the error is the quadrature error, small once `h << sqrt(t)`.
pub fn convolve_line(u0: &LineField, t: f64, at: &[f64]) -> Result<Vec<f64>> {
    check_time(t)?;
    if !(u0.h > 0.0) {
        return Err(Error::InvalidInput("line grid spacing must be positive".into()));
    }
    let half = 2.0 * t.sqrt() * KERNEL_WINDOW;
    let norm = 1.0 / (4.0 * PI * t).sqrt();
    let last = u0.samples.len() as isize - 1;
    Ok(at
        .iter()
        .map(|&x| {
            let lo = (((x - half - u0.x0) / u0.h).ceil() as isize).max(0);
            let hi = (((x + half - u0.x0) / u0.h).floor() as isize).min(last);
            (lo..=hi)
                .map(|j| {
                    let y = u0.x(j as usize);
                    u0.samples[j as usize] * (-(x - y).powi(2) / (4.0 * t)).exp()
                })
                .sum::<f64>()
                * norm
                * u0.h
        })
        .collect())
}

/// `theta(x, 4 pi t i) = 1 + 2 sum_n exp(-4 pi^2 n^2 t) cos(2 pi n x)`, a
/// period-1 solution of `u_t = u_xx`. Terms are summed until they drop
/// below `1e-15`.
pub fn theta_solution(x: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    let mut sum = 1.0;
    let mut n = 1.0f64;
    loop {
        let w = 2.0 * (-4.0 * PI * PI * n * n * t).exp();
        if w < 1e-15 {
            break;
        }
        sum += w * (2.0 * PI * n * x).cos();
        n += 1.0;
    }
    Ok(sum)
}
