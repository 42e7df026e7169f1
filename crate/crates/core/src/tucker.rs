//! Canonical → Tucker → canonical rank reduction.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Array3, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canonical::CanonicalTensor3;
use crate::error::{invalid, Error, Result};
use crate::grid::GridSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct TuckerTensor3 {
    pub grid: GridSpec,
    /// Orthonormal columns, `n × r_ℓ`.
    pub factors: [DMatrix<f64>; 3],
    pub core: Array3<f64>,
}

impl TuckerTensor3 {
    pub fn ranks(&self) -> [usize; 3] {
        let d = self.core.dim();
        [d.0, d.1, d.2]
    }

    pub fn entry(&self, i: [usize; 3]) -> Result<f64> {
        self.grid.check_index(i)?;
        let [r1, r2, r3] = self.ranks();
        let mut s = 0.0;
        for c in 0..r3 {
            let vc = self.factors[2][(i[2], c)];
            for b in 0..r2 {
                let vb = self.factors[1][(i[1], b)] * vc;
                for a in 0..r1 {
                    s += self.core[[a, b, c]] * self.factors[0][(i[0], a)] * vb;
                }
            }
        }
        Ok(s)
    }

    pub fn to_dense(&self) -> Array3<f64> {
        let t = mode_product(&self.core, &self.factors[0], 0);
        let t = mode_product(&t, &self.factors[1], 1);
        mode_product(&t, &self.factors[2], 2)
    }

    pub fn core_norm(&self) -> f64 {
        self.core.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn storage(&self) -> usize {
        let r = self.ranks();
        r[0] * r[1] * r[2] + self.grid.n * (r[0] + r[1] + r[2])
    }
}

/// `x ×_mode m`: replaces dimension `mode` (size `m.ncols()`) by `m.nrows()`.
pub fn mode_product(x: &Array3<f64>, m: &DMatrix<f64>, mode: usize) -> Array3<f64> {
    let mut shape = [x.dim().0, x.dim().1, x.dim().2];
    assert_eq!(shape[mode], m.ncols());
    shape[mode] = m.nrows();
    let mut out = Array3::zeros(shape);
    for (j, xs) in x.axis_iter(Axis(mode)).enumerate() {
        for i in 0..m.nrows() {
            let w = m[(i, j)];
            if w != 0.0 {
                out.index_axis_mut(Axis(mode), i).scaled_add(w, &xs);
            }
        }
    }
    out
}

fn unfold(x: &Array3<f64>, mode: usize) -> DMatrix<f64> {
    let d = [x.dim().0, x.dim().1, x.dim().2];
    let (o1, o2) = match mode {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    DMatrix::from_fn(d[mode], d[o1] * d[o2], |i, j| {
        let (p, q) = (j % d[o1], j / d[o1]);
        let mut idx = [0; 3];
        idx[mode] = i;
        idx[o1] = p;
        idx[o2] = q;
        x[idx]
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReexpansionMethod {
    /// ALS on small cores, slice SVD otherwise.
    Auto,
    Als,
    SliceSvd,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionOptions {
    pub eps: f64,
    pub method: ReexpansionMethod,
    pub max_iter: usize,
    pub seed: u64,
    /// Cores with at most this many entries go to ALS under `Auto`.
    pub als_max_core: usize,
}

impl CompressionOptions {
    pub fn new(eps: f64) -> Self {
        Self { eps, method: ReexpansionMethod::Auto, max_iter: 200, seed: 0x5eed, als_max_core: 4096 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionReport {
    pub input_rank: usize,
    /// Ranks of the orthogonal bases before the core is truncated.
    pub basis_ranks: [usize; 3],
    pub tucker_ranks: [usize; 3],
    pub canonical_rank: usize,
    /// Relative Frobenius error of core truncation plus re-expansion,
    /// measured against the untruncated core.
    pub core_rel_error: f64,
    pub method: ReexpansionMethod,
    /// The re-expansion did not lower the rank, so the input was returned.
    pub kept_input: bool,
}

/// Relative cutoff for the orthogonal bases of the side matrices.
const BASIS_TOL: f64 = 1e-13;

/// Orthonormal basis of the column space of `a`, dropping singular values
/// below `BASIS_TOL · σ_max`.
fn column_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, r) = a.shape();
    let (u, s) = if r > n {
        // a = Lᵀ Qᵀ with Aᵀ = Q L; left vectors of `a` are those of Lᵀ.
        let l = a.transpose().qr().r();
        let svd = l.transpose().svd(true, false);
        (svd.u.unwrap(), svd.singular_values)
    } else {
        let svd = a.clone().svd(true, false);
        (svd.u.unwrap(), svd.singular_values)
    };
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > BASIS_TOL * smax && smax > 0.0).collect();
    DMatrix::from_fn(n, keep.len(), |i, j| u[(i, keep[j])])
}

/// Stage 1: reduced HOSVD bases and the exact projected core.
pub fn canonical_to_tucker(t: &CanonicalTensor3) -> TuckerTensor3 {
    let r = t.rank();
    let norms: Vec<DVector<f64>> = t
        .factors
        .iter()
        .map(|f| DVector::from_iterator(r, f.column_iter().map(|c| c.norm())))
        .collect();
    let bases: Vec<DMatrix<f64>> = (0..3)
        .into_par_iter()
        .map(|l| {
            let mut a = t.factors[l].clone();
            for k in 0..r {
                let w = t.coeffs[k].abs() * norms[(l + 1) % 3][k] * norms[(l + 2) % 3][k];
                a.column_mut(k).scale_mut(w);
            }
            column_basis(&a)
        })
        .collect();
    let b: Vec<DMatrix<f64>> = (0..3).map(|l| bases[l].tr_mul(&t.factors[l])).collect();
    let (r1, r2, r3) = (b[0].nrows(), b[1].nrows(), b[2].nrows());
    let slices: Vec<DMatrix<f64>> = (0..r3)
        .into_par_iter()
        .map(|c| {
            let mut b1 = b[0].clone();
            for k in 0..r {
                b1.column_mut(k).scale_mut(t.coeffs[k] * b[2][(c, k)]);
            }
            &b1 * b[1].transpose()
        })
        .collect();
    let mut core = Array3::zeros((r1, r2, r3));
    for (c, s) in slices.iter().enumerate() {
        for j in 0..r2 {
            for i in 0..r1 {
                core[[i, j, c]] = s[(i, j)];
            }
        }
    }
    let mut it = bases.into_iter();
    TuckerTensor3 { grid: t.grid, factors: [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()], core }
}

/// Truncates the core by HOSVD so the discarded part has Frobenius norm at
/// most `eps · ‖core‖`.
pub fn truncate_tucker(t: &TuckerTensor3, eps: f64) -> TuckerTensor3 {
    let norm2: f64 = t.core.iter().map(|v| v * v).sum();
    let budget = eps * eps * norm2 / 3.0;
    let mut core = t.core.clone();
    let mut factors = t.factors.clone();
    for mode in 0..3 {
        let svd = unfold(&t.core, mode).svd(true, false);
        let u = svd.u.unwrap();
        let s = svd.singular_values;
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap());
        let mut tail = 0.0;
        let mut keep = order.len();
        while keep > 1 {
            let v = s[order[keep - 1]];
            if tail + v * v > budget {
                break;
            }
            tail += v * v;
            keep -= 1;
        }
        let w = DMatrix::from_fn(u.nrows(), keep, |i, j| u[(i, order[j])]);
        core = mode_product(&core, &w.transpose(), mode);
        factors[mode] = &factors[mode] * w;
    }
    TuckerTensor3 { grid: t.grid, factors, core }
}

/// Canonical factors `(A, B, C)` with unit coefficients for a dense core.
struct CoreCp {
    f: [DMatrix<f64>; 3],
    rel_error: f64,
}

fn slice_svd(core: &Array3<f64>, eps: f64) -> CoreCp {
    let d = [core.dim().0, core.dim().1, core.dim().2];
    // Slice along the mode that minimizes the worst-case rank.
    let mode = (0..3)
        .min_by_key(|&m| d[m] * d[(m + 1) % 3].min(d[(m + 2) % 3]))
        .unwrap();
    let (p, q) = match mode {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let norm2: f64 = core.iter().map(|v| v * v).sum();
    let mut terms: Vec<(f64, usize, DVector<f64>, DVector<f64>)> = Vec::new();
    for c in 0..d[mode] {
        let sl = core.index_axis(Axis(mode), c);
        let m = DMatrix::from_fn(d[p], d[q], |i, j| sl[[i, j]]);
        let svd = m.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        for (k, &s) in svd.singular_values.iter().enumerate() {
            if s > 0.0 {
                terms.push((s, c, u.column(k).into_owned(), vt.row(k).transpose()));
            }
        }
    }
    terms.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let budget = eps * eps * norm2;
    let mut tail = 0.0;
    while let Some(last) = terms.last() {
        if tail + last.0 * last.0 > budget {
            break;
        }
        tail += last.0 * last.0;
        terms.pop();
    }
    let r = terms.len();
    let mut f: [DMatrix<f64>; 3] = std::array::from_fn(|m| DMatrix::zeros(d[m], r));
    for (k, (s, c, u, v)) in terms.iter().enumerate() {
        f[mode][(*c, k)] = 1.0;
        f[p].set_column(k, &(u * *s));
        f[q].set_column(k, v);
    }
    let rel_error = if norm2 > 0.0 { (tail / norm2).sqrt() } else { 0.0 };
    CoreCp { f, rel_error }
}

fn khatri_rao(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    // Row index j = ia + na * ib matches `unfold` (first other mode fastest).
    let (na, nb, r) = (a.nrows(), b.nrows(), a.ncols());
    DMatrix::from_fn(na * nb, r, |j, k| a[(j % na, k)] * b[(j / na, k)])
}

fn cp_dense(f: &[DMatrix<f64>; 3], d: [usize; 3]) -> Array3<f64> {
    Array3::from_shape_fn((d[0], d[1], d[2]), |(i, j, l)| {
        (0..f[0].ncols()).map(|k| f[0][(i, k)] * f[1][(j, k)] * f[2][(l, k)]).sum()
    })
}

/// Rank-`r` ALS. Returns the factors, whether `eps` was reached and the
/// number of sweeps used.
fn als(core: &Array3<f64>, r: usize, eps: f64, max_iter: usize, rng: &mut ChaCha8Rng) -> (CoreCp, bool, usize) {
    let d = [core.dim().0, core.dim().1, core.dim().2];
    let norm2 = core.iter().map(|v| v * v).sum::<f64>();
    let unf: Vec<DMatrix<f64>> = (0..3).map(|m| unfold(core, m)).collect();
    let mut f: [DMatrix<f64>; 3] =
        std::array::from_fn(|m| DMatrix::from_fn(d[m], r, |_, _| StandardNormal.sample(&mut *rng)));
    let mut best = f64::INFINITY;
    let mut best_f = f.clone();
    let mut prev = f64::INFINITY;
    for it in 0..max_iter {
        let mut cross = 0.0;
        let mut gram = DMatrix::zeros(r, r);
        for m in 0..3 {
            let (p, q) = match m {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let kr = khatri_rao(&f[p], &f[q]);
            let g = (f[p].tr_mul(&f[p])).component_mul(&f[q].tr_mul(&f[q]));
            let rhs = &unf[m] * kr;
            f[m] = match g.clone().cholesky() {
                Some(ch) => ch.solve(&rhs.transpose()).transpose(),
                None => &rhs * g.clone().pseudo_inverse(1e-14).unwrap_or_else(|_| DMatrix::identity(r, r)),
            };
            if m == 2 {
                cross = f[m].dot(&rhs);
                gram = g.component_mul(&f[m].tr_mul(&f[m]));
            }
        }
        // ||X - Y||^2 = ||X||^2 - 2 <X, Y> + ||Y||^2, which cancels below ~1e-7.
        let mut res = ((norm2 - 2.0 * cross + gram.sum()).max(0.0) / norm2).sqrt();
        if res < 1e-6 {
            let diff = core - &cp_dense(&f, d);
            res = (diff.iter().map(|v| v * v).sum::<f64>() / norm2).sqrt();
        }
        if res < best {
            best = res;
            best_f = f.clone();
        }
        if res <= eps {
            return (CoreCp { f: best_f, rel_error: best }, true, it + 1);
        }
        if prev.is_finite() && (prev - res).abs() <= 1e-6 * prev {
            return (CoreCp { f: best_f, rel_error: best }, false, it + 1);
        }
        prev = res;
    }
    (CoreCp { f: best_f, rel_error: best }, false, max_iter)
}

fn lift(t: &TuckerTensor3, cp: &CoreCp) -> CanonicalTensor3 {
    let r = cp.f[0].ncols();
    let mut factors: [DMatrix<f64>; 3] = std::array::from_fn(|m| &t.factors[m] * &cp.f[m]);
    let mut coeffs = DVector::from_element(r, 1.0);
    for f in factors.iter_mut() {
        for k in 0..r {
            let nrm = f.column(k).norm();
            if nrm > 0.0 {
                f.column_mut(k).unscale_mut(nrm);
                coeffs[k] *= nrm;
            }
        }
    }
    CanonicalTensor3 { grid: t.grid, factors, coeffs }
}

/// Compresses a canonical tensor: orthogonal bases of the weighted side
/// matrices, exact projected core, HOSVD truncation of the core to `eps`,
/// then canonical re-expansion of the truncated core to `eps`.
pub fn compress_can_tuck_can(
    t: &CanonicalTensor3,
    opts: &CompressionOptions,
) -> Result<(TuckerTensor3, CanonicalTensor3, CompressionReport)> {
    let eps = opts.eps;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    if t.rank() == 0 {
        return Err(invalid("cannot compress a rank-0 tensor"));
    }
    let full = canonical_to_tucker(t);
    let basis_ranks = full.ranks();
    if basis_ranks.contains(&0) {
        let report = CompressionReport {
            input_rank: t.rank(),
            basis_ranks,
            tucker_ranks: basis_ranks,
            canonical_rank: 0,
            core_rel_error: 0.0,
            method: opts.method,
            kept_input: false,
        };
        return Ok((full, CanonicalTensor3::zeros(t.grid), report));
    }
    let full_norm = full.core_norm();
    let tucker = truncate_tucker(&full, eps);
    let core = &tucker.core;
    let core_norm = tucker.core_norm();
    let method = match opts.method {
        ReexpansionMethod::Auto if core.len() <= opts.als_max_core => ReexpansionMethod::Als,
        ReexpansionMethod::Auto => ReexpansionMethod::SliceSvd,
        m => m,
    };
    let cp = if core_norm == 0.0 {
        let d = [core.dim().0, core.dim().1, core.dim().2];
        CoreCp { f: std::array::from_fn(|m| DMatrix::zeros(d[m], 0)), rel_error: 0.0 }
    } else if method == ReexpansionMethod::SliceSvd {
        slice_svd(core, eps)
    } else {
        let fallback = slice_svd(core, eps);
        let max_rank = fallback.f[0].ncols().max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut found = None;
        let mut best = f64::INFINITY;
        let mut r = 1;
        let mut budget = 4 * opts.max_iter;
        while r < max_rank || (r == max_rank && opts.method == ReexpansionMethod::Als) {
            if opts.method == ReexpansionMethod::Auto && budget == 0 {
                break;
            }
            let (cp, ok, used) = als(core, r, eps, opts.max_iter, &mut rng);
            budget = budget.saturating_sub(used);
            best = best.min(cp.rel_error);
            if ok {
                found = Some(cp);
                break;
            }
            r = if r == max_rank { r + 1 } else { (r + 1).max(r * 5 / 4).min(max_rank) };
        }
        match (found, opts.method) {
            (Some(cp), _) => cp,
            (None, ReexpansionMethod::Als) => {
                return Err(Error::NotConverged { what: "ALS core re-expansion".into(), best_residual: best })
            }
            (None, _) => fallback,
        }
    };
    let mut can = if cp.f[0].ncols() == 0 { CanonicalTensor3::zeros(t.grid) } else { lift(&tucker, &cp) };
    let kept_input = can.rank() >= t.rank();
    if kept_input {
        can = t.clone();
    }
    let trunc = if full_norm > 0.0 {
        (full_norm * full_norm - core_norm * core_norm).max(0.0).sqrt() / full_norm
    } else {
        0.0
    };
    let report = CompressionReport {
        input_rank: t.rank(),
        basis_ranks,
        tucker_ranks: tucker.ranks(),
        canonical_rank: can.rank(),
        core_rel_error: if kept_input { 0.0 } else { trunc + cp.rel_error * core_norm / full_norm.max(f64::MIN_POSITIVE) },
        method,
        kept_input,
    };
    Ok((tucker, can, report))
}

/// Dense `r × c` helper used by tests and reports.
pub fn to_array2(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unfold_and_mode_product_agree() {
        let x = Array3::from_shape_fn((2, 3, 4), |(i, j, k)| (i + 10 * j + 100 * k) as f64);
        let m = DMatrix::from_fn(5, 3, |i, j| (i * 3 + j) as f64 * 0.5);
        let y = mode_product(&x, &m, 1);
        let lhs = unfold(&y, 1);
        let rhs = &m * unfold(&x, 1);
        assert!((lhs - rhs).abs().max() < 1e-12);
    }

    #[test]
    fn khatri_rao_matches_unfolding() {
        let f: [DMatrix<f64>; 3] = std::array::from_fn(|m| DMatrix::from_fn(2 + m, 2, |i, j| (1 + i + 3 * j + m) as f64));
        let x = cp_dense(&f, [2, 3, 4]);
        for m in 0..3 {
            let (p, q) = match m {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let rec = &f[m] * khatri_rao(&f[p], &f[q]).transpose();
            assert!((rec - unfold(&x, m)).abs().max() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_eps_and_rank_zero() {
        let g = GridSpec::new(1.0, 4).unwrap();
        let t = CanonicalTensor3::zeros(g);
        assert!(compress_can_tuck_can(&t, &CompressionOptions::new(1e-3)).is_err());
        let one = CanonicalTensor3::from_factors(g, std::array::from_fn(|_| DMatrix::from_element(4, 1, 1.0))).unwrap();
        assert!(compress_can_tuck_can(&one, &CompressionOptions::new(0.0)).is_err());
        assert!(compress_can_tuck_can(&one, &CompressionOptions::new(1.0)).is_err());
    }
}
