//! Sinc quadrature of Laplace–Gauss integrals `p(r) = ∫ ŵ(t) exp(-t² r²) dt`,
//! giving Gaussian-sum approximations `p(r) ≈ Σ_k p_k exp(-t_k² r²)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::special::{linear_fit, SQRT_PI};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum KernelFamily {
    /// `1/r`
    Newton,
    /// `exp(-κ r)/r`
    Yukawa { kappa: f64 },
    /// `r^{-β}`
    InversePower { beta: f64 },
    /// `r`; pointwise only, there is no Gaussian-sum rule for it.
    AbsR,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialKernel {
    pub family: KernelFamily,
    /// Final multiplier, e.g. `1/(4π)`.
    pub scale: f64,
}

impl RadialKernel {
    pub fn newton() -> Self {
        Self { family: KernelFamily::Newton, scale: 1.0 }
    }

    pub fn coulomb() -> Self {
        Self { family: KernelFamily::Newton, scale: 1.0 / (4.0 * std::f64::consts::PI) }
    }

    pub fn yukawa(kappa: f64) -> Self {
        Self { family: KernelFamily::Yukawa { kappa }, scale: 1.0 }
    }

    pub fn inverse_power(beta: f64) -> Self {
        Self { family: KernelFamily::InversePower { beta }, scale: 1.0 }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            KernelFamily::Yukawa { kappa } if !(kappa > 0.0) => Err(invalid(format!("Yukawa needs kappa > 0, got {kappa}"))),
            KernelFamily::InversePower { beta } if !(beta > 0.0) => Err(invalid(format!("inverse power needs beta > 0, got {beta}"))),
            _ if !self.scale.is_finite() => Err(invalid("kernel scale must be finite")),
            _ => Ok(()),
        }
    }

    /// Exact kernel value, scale included.
    pub fn exact(&self, r: f64) -> f64 {
        let v = match self.family {
            KernelFamily::Newton => 1.0 / r,
            KernelFamily::Yukawa { kappa } => (-kappa * r).exp() / r,
            KernelFamily::InversePower { beta } => r.powf(-beta),
            KernelFamily::AbsR => r,
        };
        self.scale * v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub m: usize,
    pub c0: f64,
    pub kernel: RadialKernel,
    /// Quadrature index of each term, ascending.
    pub ks: Vec<i64>,
    /// Gaussian exponent square roots `t_k`, strictly increasing.
    pub nodes: Vec<f64>,
    /// Weights `p_k > 0`, scale not included.
    pub weights: Vec<f64>,
}

fn node_and_jacobian(w: f64) -> (f64, f64) {
    let s = w.sinh();
    let t = if s > 30.0 { s + (-s).exp().ln_1p() } else { s.exp().ln_1p() };
    // dt/dw = cosh(w) / (1 + exp(-sinh w))
    let jac = if s < -700.0 { 0.0 } else { w.cosh() / (1.0 + (-s).exp()) };
    (t, jac)
}

/// Builds the sinc rule with step `C0/√M` and indices `k = -M..M`.
///
/// Terms whose node or weight underflows to zero are dropped, so the rank can
/// be below `2M + 1` for large `M`.
pub fn build_sinc_rule(kernel: RadialKernel, m: usize, c0: f64) -> Result<QuadratureRule> {
    if m == 0 {
        return Err(invalid("M must be at least 1"));
    }
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(invalid(format!("C0 must be positive, got {c0}")));
    }
    kernel.validate()?;
    if kernel.family == KernelFamily::AbsR {
        return Err(invalid("the |x| kernel has no Gaussian-sum quadrature"));
    }
    let hm = c0 / (m as f64).sqrt();
    let mut ks = Vec::with_capacity(2 * m + 1);
    let mut nodes = Vec::with_capacity(2 * m + 1);
    let mut weights = Vec::with_capacity(2 * m + 1);
    let mi = m as i64;
    for k in -mi..=mi {
        let w = k as f64 * hm;
        let (t, jac) = node_and_jacobian(w);
        let base = hm * jac;
        let p = match kernel.family {
            KernelFamily::Newton => 2.0 / SQRT_PI * base,
            KernelFamily::Yukawa { kappa } => {
                if t == 0.0 {
                    0.0
                } else {
                    2.0 / SQRT_PI * base * (-kappa * kappa / (4.0 * t * t)).exp()
                }
            }
            KernelFamily::InversePower { beta } => 2.0 / libm::tgamma(beta / 2.0) * t.powf(beta - 1.0) * base,
            KernelFamily::AbsR => unreachable!(),
        };
        if t > 0.0 && p > 0.0 && p.is_finite() {
            ks.push(k);
            nodes.push(t);
            weights.push(p);
        }
    }
    Ok(QuadratureRule { m, c0, kernel, ks, nodes, weights })
}

impl QuadratureRule {
    pub fn rank(&self) -> usize {
        self.nodes.len()
    }

    /// Position of the `k = 0` term.
    pub fn zero_index(&self) -> usize {
        self.ks.iter().position(|&k| k == 0).expect("k = 0 term is never dropped")
    }

    /// `scale · Σ p_k exp(-t_k² r²)`. Finite at `r = 0`, where it does not
    /// approximate the kernel.
    pub fn eval(&self, r: f64) -> f64 {
        let r2 = r * r;
        self.kernel.scale * self.nodes.iter().zip(&self.weights).map(|(t, p)| p * (-t * t * r2).exp()).sum::<f64>()
    }

    /// Rule restricted to the given term positions.
    pub fn select(&self, idx: impl IntoIterator<Item = usize>) -> QuadratureRule {
        let idx: Vec<usize> = idx.into_iter().collect();
        QuadratureRule {
            m: self.m,
            c0: self.c0,
            kernel: self.kernel,
            ks: idx.iter().map(|&i| self.ks[i]).collect(),
            nodes: idx.iter().map(|&i| self.nodes[i]).collect(),
            weights: idx.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    pub fn max_rel_error(&self, rs: &[f64]) -> f64 {
        rs.iter()
            .map(|&r| {
                let e = self.kernel.exact(r);
                ((self.eval(r) - e) / e).abs()
            })
            .fold(0.0, f64::max)
    }
}

pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: usize,
    pub max_rel_error: f64,
}

/// Max relative error on the points of `r_grid` with `r ≥ a`, for each `M`.
pub fn convergence_sweep(kernel: RadialKernel, ms: &[usize], r_grid: &[f64], a: f64, c0: f64) -> Result<Vec<SweepRow>> {
    if !(a > 0.0) {
        return Err(invalid(format!("a must be positive, got {a}")));
    }
    let rs: Vec<f64> = r_grid.iter().copied().filter(|&r| r >= a).collect();
    if rs.is_empty() {
        return Err(invalid("no sample radius at or above a"));
    }
    ms.iter()
        .map(|&m| {
            let rule = build_sinc_rule(kernel, m, c0)?;
            Ok(SweepRow { m, max_rel_error: rule.max_rel_error(&rs) })
        })
        .collect()
}

/// Least-squares fit of `ln(error)` against `√M`: (slope, intercept, R²).
pub fn fit_rate(rows: &[SweepRow]) -> (f64, f64, f64) {
    let x: Vec<f64> = rows.iter().map(|r| (r.m as f64).sqrt()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.max_rel_error.ln()).collect();
    linear_fit(&x, &y)
}
