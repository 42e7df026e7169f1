use nalgebra::{DMatrix, DVector};
use ndarray::Array3;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::GridSpec;
use crate::quadrature::QuadratureRule;
use crate::special::{gaussian_interval, FLAT_GAUSSIAN};

/// Rank-R canonical tensor on an `n × n × n` grid:
/// `a[i1,i2,i3] = Σ_k ξ_k U1[i1,k] U2[i2,k] U3[i3,k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalTensor3 {
    pub grid: GridSpec,
    pub factors: [DMatrix<f64>; 3],
    pub coeffs: DVector<f64>,
}

impl CanonicalTensor3 {
    pub fn new(grid: GridSpec, factors: [DMatrix<f64>; 3], coeffs: DVector<f64>) -> Result<Self> {
        let r = coeffs.len();
        for (l, f) in factors.iter().enumerate() {
            if f.nrows() != grid.n || f.ncols() != r {
                return Err(invalid(format!(
                    "factor {l} is {}x{}, expected {}x{r}",
                    f.nrows(),
                    f.ncols(),
                    grid.n
                )));
            }
        }
        Ok(Self { grid, factors, coeffs })
    }

    /// Coefficients all one.
    pub fn from_factors(grid: GridSpec, factors: [DMatrix<f64>; 3]) -> Result<Self> {
        let r = factors[0].ncols();
        Self::new(grid, factors, DVector::from_element(r, 1.0))
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let z = DMatrix::zeros(grid.n, 0);
        Self { grid, factors: [z.clone(), z.clone(), z], coeffs: DVector::zeros(0) }
    }

    pub fn rank(&self) -> usize {
        self.coeffs.len()
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn entry(&self, i: [usize; 3]) -> Result<f64> {
        self.grid.check_index(i)?;
        Ok(self.entry_unchecked(i))
    }

    pub(crate) fn entry_unchecked(&self, i: [usize; 3]) -> f64 {
        let [a, b, c] = &self.factors;
        (0..self.rank()).map(|k| self.coeffs[k] * a[(i[0], k)] * b[(i[1], k)] * c[(i[2], k)]).sum()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.grid.same_as(&other.grid)?;
        let factors = std::array::from_fn(|l| hcat(&self.factors[l], &other.factors[l]));
        let mut coeffs = DVector::zeros(self.rank() + other.rank());
        coeffs.rows_mut(0, self.rank()).copy_from(&self.coeffs);
        coeffs.rows_mut(self.rank(), other.rank()).copy_from(&other.coeffs);
        Ok(Self { grid: self.grid, factors, coeffs })
    }

    /// Rank-concatenation of many tensors on one grid.
    pub fn sum(grid: GridSpec, parts: &[Self]) -> Result<Self> {
        for p in parts {
            grid.same_as(&p.grid)?;
        }
        let r: usize = parts.iter().map(Self::rank).sum();
        let mut factors: [DMatrix<f64>; 3] = std::array::from_fn(|_| DMatrix::zeros(grid.n, r));
        let mut coeffs = DVector::zeros(r);
        let mut off = 0;
        for p in parts {
            for l in 0..3 {
                factors[l].columns_mut(off, p.rank()).copy_from(&p.factors[l]);
            }
            coeffs.rows_mut(off, p.rank()).copy_from(&p.coeffs);
            off += p.rank();
        }
        Ok(Self { grid, factors, coeffs })
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { grid: self.grid, factors: self.factors.clone(), coeffs: &self.coeffs * c }
    }

    /// Columns `start..start + len`.
    pub fn columns(&self, start: usize, len: usize) -> Self {
        Self {
            grid: self.grid,
            factors: std::array::from_fn(|l| self.factors[l].columns(start, len).into_owned()),
            coeffs: self.coeffs.rows(start, len).into_owned(),
        }
    }

    /// Materializes all `n³` entries.
    pub fn to_dense(&self) -> Array3<f64> {
        let n = self.n();
        let [a, b, c] = &self.factors;
        let slices: Vec<DMatrix<f64>> = (0..n)
            .into_par_iter()
            .map(|i3| {
                let mut ad = a.clone();
                for k in 0..self.rank() {
                    let s = self.coeffs[k] * c[(i3, k)];
                    ad.column_mut(k).scale_mut(s);
                }
                &ad * b.transpose()
            })
            .collect();
        let mut out = Array3::zeros((n, n, n));
        for (i3, s) in slices.iter().enumerate() {
            for i2 in 0..n {
                for i1 in 0..n {
                    out[[i1, i2, i3]] = s[(i1, i2)];
                }
            }
        }
        out
    }

    /// Frobenius norm from the Hadamard product of the factor Gram matrices,
    /// accumulated in column blocks.
    pub fn frobenius_norm(&self) -> f64 {
        let r = self.rank();
        const BLOCK: usize = 256;
        let blocks: Vec<usize> = (0..r).step_by(BLOCK).collect();
        let total: f64 = blocks
            .par_iter()
            .map(|&start| {
                let len = BLOCK.min(r - start);
                let mut g = self.factors[0].tr_mul(&self.factors[0].columns(start, len));
                for l in 1..3 {
                    g.component_mul_assign(&self.factors[l].tr_mul(&self.factors[l].columns(start, len)));
                }
                (self.coeffs.transpose() * g * self.coeffs.rows(start, len))[(0, 0)]
            })
            .sum();
        total.max(0.0).sqrt()
    }

    /// Crops a kernel tensor living on `target.doubled()` so that its center
    /// cell lands on cell `center` of `target`.
    pub fn shift_window(&self, center: [usize; 3], target: &GridSpec) -> Result<Self> {
        let d = target.doubled();
        if self.grid.n != d.n || (self.grid.h() - target.h()).abs() > 1e-12 * target.h() {
            return Err(Error::GridMismatch(format!(
                "reference grid has n={} and h={}, expected n={} and h={}",
                self.grid.n,
                self.grid.h(),
                d.n,
                target.h()
            )));
        }
        target.check_index(center)?;
        let n = target.n;
        let factors = std::array::from_fn(|l| self.factors[l].rows(n - center[l], n).into_owned());
        Ok(Self { grid: *target, factors, coeffs: self.coeffs.clone() })
    }

    /// Number of stored reals.
    pub fn storage(&self) -> usize {
        3 * self.n() * self.rank() + self.rank()
    }
}

pub(crate) fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    m.columns_mut(0, a.ncols()).copy_from(a);
    m.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    m
}

/// Matrix of cell integrals `∫_{cell i} exp(-t_k² x²) dx`.
pub fn gaussian_cell_integrals(grid: &GridSpec, nodes: &[f64]) -> DMatrix<f64> {
    let h = grid.h();
    DMatrix::from_fn(grid.n, nodes.len(), |i, k| {
        let x = grid.coord(i).abs();
        if nodes[k] < FLAT_GAUSSIAN {
            h
        } else {
            gaussian_interval(nodes[k], x - 0.5 * h, x + 0.5 * h)
        }
    })
}

/// Galerkin projection of the Gaussian sum onto piecewise constants: entry
/// `i` is `scale · Σ_k p_k Π_ℓ ∫_{cell i_ℓ} exp(-t_k² x²) dx`, centered at the
/// origin. The three factor matrices are identical; weights sit in the
/// coefficients.
pub fn project_kernel(rule: &QuadratureRule, grid: &GridSpec) -> CanonicalTensor3 {
    let f = gaussian_cell_integrals(grid, &rule.nodes);
    let coeffs = DVector::from_iterator(rule.rank(), rule.weights.iter().map(|p| rule.kernel.scale * p));
    CanonicalTensor3 { grid: *grid, factors: [f.clone(), f.clone(), f], coeffs }
}

/// Cell averages instead of cell integrals: `project_kernel` divided by `h³`.
pub fn project_kernel_averaged(rule: &QuadratureRule, grid: &GridSpec) -> CanonicalTensor3 {
    let h = grid.h();
    let mut f = gaussian_cell_integrals(grid, &rule.nodes);
    f /= h;
    let coeffs = DVector::from_iterator(rule.rank(), rule.weights.iter().map(|p| rule.kernel.scale * p));
    CanonicalTensor3 { grid: *grid, factors: [f.clone(), f.clone(), f], coeffs }
}

/// Point samples `exp(-t_k² x_i²)` at the cell centers.
pub fn project_kernel_collocated(rule: &QuadratureRule, grid: &GridSpec) -> CanonicalTensor3 {
    let f = DMatrix::from_fn(grid.n, rule.rank(), |i, k| {
        let x = grid.coord(i) * rule.nodes[k];
        (-x * x).exp()
    });
    let coeffs = DVector::from_iterator(rule.rank(), rule.weights.iter().map(|p| rule.kernel.scale * p));
    CanonicalTensor3 { grid: *grid, factors: [f.clone(), f.clone(), f], coeffs }
}
