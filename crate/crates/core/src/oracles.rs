//! Closed-form potentials and Green kernels used as references.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::canonical::CanonicalTensor3;
use crate::error::{invalid, Result};
use crate::grid::GridSpec;
use crate::quadrature::{build_sinc_rule, RadialKernel};
use crate::range_sep::{Projection, RsSplit};
use crate::special::{erf, SQRT_PI};

fn norm(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// `erf(z)/z`, with its series near zero.
fn erf_over(z: f64) -> f64 {
    if z < 1e-3 {
        let z2 = z * z;
        2.0 / SQRT_PI * (1.0 - z2 / 3.0 + z2 * z2 / 10.0)
    } else {
        erf(z) / z
    }
}

/// Newton potential of `exp(-λ²|y|²)`:
/// `(1/4π) ∫ exp(-λ²|y|²)/|x - y| dy = √π erf(λ|x|) / (4λ³|x|)`,
/// equal to `1/(2λ²)` at the origin.
pub fn erf_potential(lambda: f64, x: [f64; 3]) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    Ok(SQRT_PI / (4.0 * lambda * lambda) * erf_over(lambda * norm(x)))
}

/// `∂_ℓ = -(x_ℓ / (2λ²|x|²)) (√π erf(λ|x|)/(2λ|x|) - exp(-λ²|x|²))`.
pub fn erf_potential_gradient(lambda: f64, x: [f64; 3]) -> Result<[f64; 3]> {
    if !(lambda > 0.0) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    let r = norm(x);
    if r == 0.0 {
        return Err(invalid("gradient is not evaluated at the origin"));
    }
    let z = lambda * r;
    let bracket = SQRT_PI * erf(z) / (2.0 * z) - (-z * z).exp();
    let c = -bracket / (2.0 * lambda * lambda * r * r);
    Ok(x.map(|v| c * v))
}

/// `G_d(r) = (2dλ - 4λ²r²) exp(-λr²)`, i.e. `-Δ exp(-λ|x|²)` in `d` dimensions.
pub fn g_d(d: usize, lambda: f64, r: f64) -> f64 {
    let d = d as f64;
    (2.0 * d * lambda - 4.0 * lambda * lambda * r * r) * (-lambda * r * r).exp()
}

/// Zero of `G_d`.
pub fn g_d_root(d: usize, lambda: f64) -> f64 {
    (d as f64 / (2.0 * lambda)).sqrt()
}

/// Minimizer of `G_d` on `r > 0`.
pub fn g_d_stationary(d: usize, lambda: f64) -> f64 {
    ((2.0 + d as f64) / (2.0 * lambda)).sqrt()
}

/// `G_d` at its minimizer, `-4λ exp(-(2+d)/2)`.
pub fn g_d_extremum(d: usize, lambda: f64) -> f64 {
    -4.0 * lambda * (-(2.0 + d as f64) / 2.0).exp()
}

/// Surface area of the unit sphere in `R^d`, `d = 1..=6`.
pub fn omega_d(d: usize) -> Option<f64> {
    const TABLE: [f64; 6] = [2.0, 2.0 * PI, 4.0 * PI, 2.0 * PI * PI, 8.0 * PI * PI / 3.0, PI * PI * PI];
    TABLE.get(d.wrapping_sub(1)).copied()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AnalyticKernel {
    ErfPotential { lambda: f64 },
    GdRadial { d: usize, lambda: f64 },
    /// `exp(-κ|x|)/(4π|x|)`, Newton for `κ = 0`.
    Yukawa { kappa: f64 },
    /// `-|x|/(8π)`
    Biharmonic,
    KelvinSomigliana { lambda: f64, mu: f64 },
    Stokeslet { nu: f64 },
    /// `x/(4π|x|³)`
    StokesPressure,
    /// `exp(<b, x>)/(4π|x|)`
    Eta0 { b: [f64; 3] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum KernelValue {
    Scalar(f64),
    Vector([f64; 3]),
    Matrix([[f64; 3]; 3]),
}

impl KernelValue {
    pub fn matrix(&self) -> Option<Matrix3<f64>> {
        match self {
            KernelValue::Matrix(m) => Some(Matrix3::from_fn(|i, j| m[i][j])),
            _ => None,
        }
    }
}

/// `α δ_kl/|x| + β x_k x_l/|x|³`
fn isotropic_matrix(alpha: f64, beta: f64, x: [f64; 3]) -> [[f64; 3]; 3] {
    let r = norm(x);
    let r3 = r * r * r;
    std::array::from_fn(|k| std::array::from_fn(|l| if k == l { alpha / r } else { 0.0 } + beta * (x[k] * x[l]) / r3))
}

/// `(α, β)` of the Kelvin–Somigliana matrix.
pub fn kelvin_coefficients(lambda: f64, mu: f64) -> (f64, f64) {
    let c = (lambda + mu) / (8.0 * PI * mu * (lambda + 2.0 * mu));
    (c * (lambda + 3.0 * mu) / (lambda + mu), c)
}

pub fn stokeslet_coefficients(nu: f64) -> (f64, f64) {
    let c = 1.0 / (8.0 * PI * nu);
    (c, c)
}

pub fn validate(kernel: &AnalyticKernel) -> Result<()> {
    let ok = match *kernel {
        AnalyticKernel::ErfPotential { lambda } => lambda > 0.0,
        AnalyticKernel::GdRadial { d, lambda } => d >= 1 && lambda > 0.0,
        AnalyticKernel::Yukawa { kappa } => kappa >= 0.0,
        AnalyticKernel::KelvinSomigliana { lambda, mu } => mu > 0.0 && lambda + 2.0 * mu > 0.0 && lambda + mu != 0.0,
        AnalyticKernel::Stokeslet { nu } => nu > 0.0,
        AnalyticKernel::Biharmonic | AnalyticKernel::StokesPressure | AnalyticKernel::Eta0 { .. } => true,
    };
    if ok {
        Ok(())
    } else {
        Err(invalid(format!("invalid parameters for {kernel:?}")))
    }
}

pub fn green_eval(kernel: &AnalyticKernel, x: [f64; 3]) -> Result<KernelValue> {
    validate(kernel)?;
    let r = norm(x);
    if r == 0.0 && !matches!(kernel, AnalyticKernel::ErfPotential { .. } | AnalyticKernel::GdRadial { .. }) {
        return Err(invalid("kernel is singular at the origin"));
    }
    Ok(match *kernel {
        AnalyticKernel::ErfPotential { lambda } => KernelValue::Scalar(erf_potential(lambda, x)?),
        AnalyticKernel::GdRadial { d, lambda } => KernelValue::Scalar(g_d(d, lambda, r)),
        AnalyticKernel::Yukawa { kappa } => KernelValue::Scalar((-kappa * r).exp() / (4.0 * PI * r)),
        AnalyticKernel::Biharmonic => KernelValue::Scalar(-r / (8.0 * PI)),
        AnalyticKernel::KelvinSomigliana { lambda, mu } => {
            let (a, b) = kelvin_coefficients(lambda, mu);
            KernelValue::Matrix(isotropic_matrix(a, b, x))
        }
        AnalyticKernel::Stokeslet { nu } => {
            let (a, b) = stokeslet_coefficients(nu);
            KernelValue::Matrix(isotropic_matrix(a, b, x))
        }
        AnalyticKernel::StokesPressure => KernelValue::Vector(x.map(|v| v / (4.0 * PI * r * r * r))),
        AnalyticKernel::Eta0 { b } => {
            let bx = b[0] * x[0] + b[1] * x[1] + b[2] * x[2];
            KernelValue::Scalar(bx.exp() / (omega_d(3).unwrap() * r))
        }
    })
}

/// Split grid tensors of `1/|x|` and `1/|x|³` from which the matrix kernels
/// are assembled entry by entry.
#[derive(Clone, Debug)]
pub struct MatrixKernelTensors {
    pub grid: GridSpec,
    pub inv1: RsSplit,
    pub inv3: RsSplit,
}

pub fn rs_split_matrix_kernels(grid: &GridSpec, m: usize, c0: f64, r_l: usize) -> Result<MatrixKernelTensors> {
    let r1 = build_sinc_rule(RadialKernel::inverse_power(1.0), m, c0)?;
    let r3 = build_sinc_rule(RadialKernel::inverse_power(3.0), m, c0)?;
    Ok(MatrixKernelTensors {
        grid: *grid,
        inv1: RsSplit::at(&r1, grid, Projection::Collocation, r_l, 1e-4)?,
        inv3: RsSplit::at(&r3, grid, Projection::Collocation, r_l, 1e-4)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Long,
    Short,
    Full,
}

impl MatrixKernelTensors {
    fn pick(s: &RsSplit, part: Part) -> CanonicalTensor3 {
        match part {
            Part::Long => s.long.clone(),
            Part::Short => s.short.clone(),
            Part::Full => s.full(),
        }
    }

    /// Component `(k, l)` of `α δ_kl/|x| + β x_k x_l/|x|³` as a canonical
    /// tensor; the coordinate factors multiply the mode-`k` and mode-`l`
    /// columns of the `1/|x|³` part.
    pub fn component(&self, alpha: f64, beta: f64, k: usize, l: usize, part: Part) -> CanonicalTensor3 {
        let xs = DMatrix::from_fn(self.grid.n, 1, |i, _| self.grid.coord(i));
        let mut t3 = Self::pick(&self.inv3, part).scale(beta);
        for mode in [k, l] {
            let f = &mut t3.factors[mode];
            for mut c in f.column_iter_mut() {
                c.component_mul_assign(&xs.column(0));
            }
        }
        if k == l {
            Self::pick(&self.inv1, part).scale(alpha).add(&t3).expect("same grid")
        } else {
            t3
        }
    }

    pub fn kelvin(&self, lambda: f64, mu: f64, k: usize, l: usize, part: Part) -> CanonicalTensor3 {
        let (a, b) = kelvin_coefficients(lambda, mu);
        self.component(a, b, k, l, part)
    }

    pub fn stokeslet(&self, nu: f64, k: usize, l: usize, part: Part) -> CanonicalTensor3 {
        let (a, b) = stokeslet_coefficients(nu);
        self.component(a, b, k, l, part)
    }
}

/// Eigenvalues of a symmetric 3×3 matrix, ascending.
pub fn symmetric_eigenvalues(m: &Matrix3<f64>) -> Vector3<f64> {
    let mut e = m.symmetric_eigenvalues();
    e.as_mut_slice().sort_by(|a, b| a.partial_cmp(b).unwrap());
    e
}
