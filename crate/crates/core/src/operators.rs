//! Kronecker-form discrete Laplacian and the grid Dirac delta it induces on
//! projected kernels.

use nalgebra::{DMatrix, DVector};
use ndarray::Array3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canonical::CanonicalTensor3;
use crate::error::Result;
use crate::grid::GridSpec;
use crate::range_sep::{RsCanonicalTensor, RsSplit};
use crate::tucker::{canonical_to_tucker, compress_can_tuck_can, CompressionOptions, CompressionReport, TuckerTensor3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    /// Truncated stencil, zero outside the grid.
    Dirichlet,
    /// Mirrored ghost cells.
    Neumann,
}

/// `A_Δ = Δ₁⊗I⊗I + I⊗Δ₁⊗I + I⊗I⊗Δ₁` with the second-difference matrix
/// `Δ₁ = h⁻² tridiag(1, -2, 1)`. Methods named `negative` apply `-A_Δ`,
/// which is positive definite under Dirichlet boundaries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KroneckerLaplacian {
    pub grid: GridSpec,
    pub boundary: Boundary,
}

impl KroneckerLaplacian {
    pub fn dirichlet(grid: GridSpec) -> Self {
        Self { grid, boundary: Boundary::Dirichlet }
    }

    pub fn neumann(grid: GridSpec) -> Self {
        Self { grid, boundary: Boundary::Neumann }
    }

    /// `-Δ₁` as a dense matrix.
    pub fn negative_1d(&self) -> DMatrix<f64> {
        let n = self.grid.n;
        let s = 1.0 / (self.grid.h() * self.grid.h());
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 2.0 * s;
            if i > 0 {
                m[(i, i - 1)] = -s;
            }
            if i + 1 < n {
                m[(i, i + 1)] = -s;
            }
        }
        if self.boundary == Boundary::Neumann {
            m[(0, 0)] = s;
            m[(n - 1, n - 1)] = s;
        }
        m
    }

    /// `-Δ₁ v`.
    pub fn negative_1d_apply(&self, v: &[f64], out: &mut [f64]) {
        let n = v.len();
        let s = 1.0 / (self.grid.h() * self.grid.h());
        for i in 0..n {
            let left = if i > 0 { v[i - 1] } else if self.boundary == Boundary::Neumann { v[0] } else { 0.0 };
            let right = if i + 1 < n { v[i + 1] } else if self.boundary == Boundary::Neumann { v[n - 1] } else { 0.0 };
            out[i] = s * (2.0 * v[i] - left - right);
        }
    }

    fn negative_1d_columns(&self, f: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(f.nrows(), f.ncols());
        for k in 0..f.ncols() {
            let col: Vec<f64> = f.column(k).iter().copied().collect();
            let mut o = vec![0.0; col.len()];
            self.negative_1d_apply(&col, &mut o);
            out.set_column(k, &DVector::from_vec(o));
        }
        out
    }

    /// `-A_Δ t`, rank `3R`: for each term, one copy per mode with `-Δ₁`
    /// applied to that mode's column.
    pub fn apply_negative(&self, t: &CanonicalTensor3) -> Result<CanonicalTensor3> {
        self.grid.same_as(&t.grid)?;
        let lf: Vec<DMatrix<f64>> = t.factors.par_iter().map(|f| self.negative_1d_columns(f)).collect();
        let parts: Vec<CanonicalTensor3> = (0..3)
            .map(|mode| {
                let factors = std::array::from_fn(|l| if l == mode { lf[l].clone() } else { t.factors[l].clone() });
                CanonicalTensor3 { grid: t.grid, factors, coeffs: t.coeffs.clone() }
            })
            .collect();
        CanonicalTensor3::sum(t.grid, &parts)
    }

    /// `A_Δ t`.
    pub fn apply(&self, t: &CanonicalTensor3) -> Result<CanonicalTensor3> {
        Ok(self.apply_negative(t)?.scale(-1.0))
    }

    /// `-A_Δ u` for a dense field (7-point stencil).
    pub fn apply_negative_dense(&self, u: &Array3<f64>) -> Array3<f64> {
        let n = self.grid.n;
        let s = 1.0 / (self.grid.h() * self.grid.h());
        let neumann = self.boundary == Boundary::Neumann;
        let get = |i: i64, j: i64, k: i64, c: f64| -> f64 {
            let inside = |v: i64| v >= 0 && v < n as i64;
            if inside(i) && inside(j) && inside(k) {
                u[[i as usize, j as usize, k as usize]]
            } else if neumann {
                c
            } else {
                0.0
            }
        };
        let mut out = Array3::zeros((n, n, n));
        out.indexed_iter_mut().for_each(|((i, j, k), o)| {
            let (a, b, c) = (i as i64, j as i64, k as i64);
            let v = u[[i, j, k]];
            let nb = get(a - 1, b, c, v) + get(a + 1, b, c, v) + get(a, b - 1, c, v) + get(a, b + 1, c, v) + get(a, b, c - 1, v) + get(a, b, c + 1, v);
            *o = s * (6.0 * v - nb);
        });
        out
    }
}

/// Grid Dirac delta `δ_h = -A_Δ P` with its short/long-range parts.
#[derive(Clone, Debug)]
pub struct DiscreteDelta {
    pub full: CanonicalTensor3,
    pub short: CanonicalTensor3,
    pub long: CanonicalTensor3,
    pub eps_used: Option<f64>,
    pub long_compression: Option<CompressionReport>,
}

/// Applies `-A_Δ` to both parts of a split; with `eps` the long part is
/// additionally compressed.
pub fn build_delta(split: &RsSplit, lap: &KroneckerLaplacian, eps: Option<f64>) -> Result<DiscreteDelta> {
    let short = lap.apply_negative(&split.short)?;
    let long_exact = lap.apply_negative(&split.long)?;
    let full = long_exact.add(&short)?;
    let (long, long_compression) = match eps {
        Some(e) => {
            let (_, c, r) = compress_can_tuck_can(&long_exact, &CompressionOptions::new(e))?;
            (c, Some(r))
        }
        None => (long_exact, None),
    };
    Ok(DiscreteDelta { full, short, long, eps_used: eps, long_compression })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiDeltaReport {
    /// Tucker ranks (at machine precision) of the long-range potential.
    pub potential_ranks: [usize; 3],
    /// Same for `-A_Δ` applied to it, before truncation.
    pub delta_ranks: [usize; 3],
    pub rank_law_holds: bool,
    pub compression: CompressionReport,
    /// `r1 r2 r3 + n (r1 + r2 + r3)` of the truncated Tucker form.
    pub tucker_storage: usize,
}

/// `T_ε(-A_Δ P_L)` for the long-range part of an assembled tensor.
pub fn multiparticle_delta(
    rs: &RsCanonicalTensor,
    lap: &KroneckerLaplacian,
    eps: f64,
) -> Result<(CanonicalTensor3, TuckerTensor3, MultiDeltaReport)> {
    let applied = lap.apply_negative(&rs.long)?;
    let potential_ranks = canonical_to_tucker(&rs.long).ranks();
    let delta_ranks = canonical_to_tucker(&applied).ranks();
    let (tucker, can, compression) = compress_can_tuck_can(&applied, &CompressionOptions::new(eps))?;
    let rank_law_holds = (0..3).all(|l| delta_ranks[l] <= 3 * potential_ranks[l]);
    let report = MultiDeltaReport {
        potential_ranks,
        delta_ranks,
        rank_law_holds,
        tucker_storage: tucker.storage(),
        compression,
    };
    Ok((can, tucker, report))
}

/// Long-range delta of a particle system built in free space: `-A_Δ` acts on
/// the reference on the doubled grid, whose windows are then summed.
pub fn free_space_long_delta(reference: &RsSplit, centers: &[[usize; 3]], charges: &[f64], grid: &GridSpec) -> Result<CanonicalTensor3> {
    let lap = KroneckerLaplacian::dirichlet(reference.grid());
    let d = lap.apply_negative(&reference.long)?;
    let parts: Vec<CanonicalTensor3> = centers
        .par_iter()
        .zip(charges)
        .map(|(c, &q)| d.shift_window(*c, grid).map(|t| t.scale(q)))
        .collect::<Result<_>>()?;
    CanonicalTensor3::sum(*grid, &parts)
}

/// Drops `layer` cells on every side.
pub fn crop(t: &CanonicalTensor3, layer: usize) -> CanonicalTensor3 {
    let n = t.n() - 2 * layer;
    let grid = GridSpec { b: t.grid.b - layer as f64 * t.grid.h(), n };
    let factors = std::array::from_fn(|l| t.factors[l].rows(layer, n).into_owned());
    CanonicalTensor3 { grid, factors, coeffs: t.coeffs.clone() }
}

/// Sum of all entries, from the factor column sums.
pub fn entry_sum(t: &CanonicalTensor3) -> f64 {
    (0..t.rank())
        .map(|k| t.coeffs[k] * (0..3).map(|l| t.factors[l].column(k).sum()).product::<f64>())
        .sum()
}

/// `h³ Σ δ` over interior cells (outer layer excluded, where the truncated
/// stencil adds a boundary lift).
pub fn interior_mass(t: &CanonicalTensor3) -> f64 {
    t.grid.h().powi(3) * entry_sum(&crop(t, 1))
}

/// Visits every `(i1, i2)` slice at fixed `i3`.
pub fn for_each_slice<F: Fn(usize, &DMatrix<f64>) -> R + Sync, R: Send>(t: &CanonicalTensor3, f: F) -> Vec<R> {
    let [a, b, c] = &t.factors;
    (0..t.n())
        .into_par_iter()
        .map(|i3| {
            let mut ad = a.clone();
            for k in 0..t.rank() {
                ad.column_mut(k).scale_mut(t.coeffs[k] * c[(i3, k)]);
            }
            let s = &ad * b.transpose();
            f(i3, &s)
        })
        .collect()
}

pub fn max_abs(t: &CanonicalTensor3) -> f64 {
    for_each_slice(t, |_, s| s.amax()).into_iter().fold(0.0, f64::max)
}

/// Largest distance from `center` (coordinates) to a cell whose magnitude
/// exceeds `rel · max|t|`.
pub fn effective_support_radius(t: &CanonicalTensor3, center: [f64; 3], rel: f64) -> f64 {
    let m = max_abs(t);
    let thr = rel * m;
    let g = t.grid;
    for_each_slice(t, |i3, s| {
        let dz = g.coord(i3) - center[2];
        let mut r2: f64 = 0.0;
        for i2 in 0..g.n {
            let dy = g.coord(i2) - center[1];
            for i1 in 0..g.n {
                if s[(i1, i2)].abs() > thr {
                    let dx = g.coord(i1) - center[0];
                    r2 = r2.max(dx * dx + dy * dy + dz * dz);
                }
            }
        }
        r2
    })
    .into_iter()
    .fold(0.0, f64::max)
    .sqrt()
}

/// Radius of the interior part (outer layer excluded).
pub fn interior_support_radius(t: &CanonicalTensor3, center: [f64; 3], rel: f64) -> f64 {
    effective_support_radius(&crop(t, 1), center, rel)
}

/// Largest `|u[i-1] - 2u[i] + u[i+1]|` along any axis, over cells whose
/// neighbours are all inside the grid.
pub fn max_second_difference(t: &CanonicalTensor3) -> f64 {
    let n = t.n();
    (0..3)
        .map(|mode| {
            let f = &t.factors[mode];
            let d2 = DMatrix::from_fn(n - 2, t.rank(), |i, k| f[(i, k)] - 2.0 * f[(i + 1, k)] + f[(i + 2, k)]);
            let factors = std::array::from_fn(|l| if l == mode { d2.clone() } else { t.factors[l].rows(1, n - 2).into_owned() });
            let grid = GridSpec { b: t.grid.b - t.grid.h(), n: n - 2 };
            max_abs(&CanonicalTensor3 { grid, factors, coeffs: t.coeffs.clone() })
        })
        .fold(0.0, f64::max)
}
