//! Closed-form Gaussian integrals used by the grid projection and the
//! splitting criteria.

use std::f64::consts::PI;

pub const SQRT_PI: f64 = 1.772_453_850_905_516;

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// `erf(b) - erf(a)` for `a <= b` without cancellation in the tails.
pub fn erf_diff(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        erfc(a) - erfc(b)
    } else if b <= 0.0 {
        erfc(-b) - erfc(-a)
    } else {
        erf(b) - erf(a)
    }
}

/// Below this exponent the Gaussian is treated as the constant 1 on a cell.
pub const FLAT_GAUSSIAN: f64 = 1e-10;

/// `∫_{lo}^{hi} exp(-t² x²) dx`.
pub fn gaussian_interval(t: f64, lo: f64, hi: f64) -> f64 {
    if t < FLAT_GAUSSIAN {
        return hi - lo;
    }
    SQRT_PI / (2.0 * t) * erf_diff(t * lo, t * hi)
}

/// `∫_{B_σ} exp(-t² |x|²) dx` over the ball of radius `sigma` in 3D.
///
/// Equals `(π/t²)·(√π·erf(tσ)/t − 2σ·exp(−t²σ²))`; the small-`t` branch
/// uses the series of the bracket to avoid cancellation.
pub fn gaussian_ball_integral(t: f64, sigma: f64) -> f64 {
    let z = t * sigma;
    if z < 1e-2 {
        // 4π ∫_0^σ r² (1 - t²r² + t⁴r⁴/2 - ...) dr
        let s3 = sigma.powi(3);
        let z2 = z * z;
        return 4.0 * PI * s3 * (1.0 / 3.0 - z2 / 5.0 + z2 * z2 / 14.0 - z2 * z2 * z2 / 54.0);
    }
    PI / (t * t) * (SQRT_PI * erf(z) / t - 2.0 * sigma * (-z * z).exp())
}

/// Least-squares line `y = slope·x + intercept`, returning the coefficient of
/// determination alongside.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (slope * a + intercept);
            r * r
        })
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (slope, intercept, r2)
}
