//! Independent reference computations for the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rangesep::{CanonicalTensor3, GridSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let (p, pm) = if n == 1 { (z, 1.0) } else { (p1, p0) };
            let dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                break;
            }
        }
        x[i] = z;
    }
    (x, w)
}

fn gl_interval(f: &dyn Fn(f64) -> f64, a: f64, b: f64, x: &[f64], w: &[f64]) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(w).map(|(xi, wi)| wi * f(c + h * xi)).sum::<f64>() * h
}

/// Adaptive Gauss–Legendre (20 vs 2×20 points); each piece is accepted
/// once its change is below `tol` times the size of the whole integral.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (x, w) = gauss_legendre(20);
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, abs_tol: f64, x: &[f64], w: &[f64], depth: usize) -> f64 {
        let m = 0.5 * (a + b);
        let l = gl_interval(f, a, m, x, w);
        let r = gl_interval(f, m, b, x, w);
        if depth > 30 || (l + r - whole).abs() <= abs_tol {
            l + r
        } else {
            rec(f, a, m, l, abs_tol, x, w, depth + 1) + rec(f, m, b, r, abs_tol, x, w, depth + 1)
        }
    }
    let whole = gl_interval(f, a, b, &x, &w);
    let coarse: f64 = (0..64).map(|i| {
        let (lo, hi) = (a + (b - a) * i as f64 / 64.0, a + (b - a) * (i + 1) as f64 / 64.0);
        gl_interval(f, lo, hi, &x, &w).abs()
    }).sum();
    rec(f, a, b, whole, tol * coarse.max(1e-300), &x, &w, 0)
}

/// `∫_0^∞ f(t) dt` split at `t = 1` and mapped `t = 1/s` above it.
pub fn integrate_half_line(f: &dyn Fn(f64) -> f64, tol: f64) -> f64 {
    let lower = integrate(f, 0.0, 1.0, tol);
    let upper = integrate(&|s: f64| if s == 0.0 { 0.0 } else { f(1.0 / s) / (s * s) }, 0.0, 1.0, tol);
    lower + upper
}

/// Tensor Gauss–Legendre average of `f` over a box, with `split^3` sub-boxes.
pub fn box_average(f: &dyn Fn([f64; 3]) -> f64, lo: [f64; 3], hi: [f64; 3], order: usize, split: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let mut s = 0.0;
    let d: [f64; 3] = std::array::from_fn(|l| (hi[l] - lo[l]) / split as f64);
    for a in 0..split {
        for b in 0..split {
            for c in 0..split {
                let base = [lo[0] + a as f64 * d[0], lo[1] + b as f64 * d[1], lo[2] + c as f64 * d[2]];
                for (i, xi) in x.iter().enumerate() {
                    for (j, xj) in x.iter().enumerate() {
                        for (k, xk) in x.iter().enumerate() {
                            let p = [
                                base[0] + 0.5 * d[0] * (1.0 + xi),
                                base[1] + 0.5 * d[1] * (1.0 + xj),
                                base[2] + 0.5 * d[2] * (1.0 + xk),
                            ];
                            s += w[i] * w[j] * w[k] * f(p);
                        }
                    }
                }
            }
        }
    }
    s / (8.0 * (split * split * split) as f64)
}

pub fn random_canonical(grid: GridSpec, rank: usize, seed: u64) -> CanonicalTensor3 {
    let mut r = rng(seed);
    let factors = std::array::from_fn(|_| DMatrix::from_fn(grid.n, rank, |_, _| r.random_range(-1.0..1.0)));
    let coeffs = DVector::from_fn(rank, |_, _| r.random_range(0.5..2.0));
    CanonicalTensor3::new(grid, factors, coeffs).unwrap()
}

/// Entry-by-entry materialization straight from the definition.
pub fn dense_by_definition(t: &CanonicalTensor3) -> Array3<f64> {
    let n = t.n();
    Array3::from_shape_fn((n, n, n), |(i, j, k)| {
        (0..t.rank()).map(|q| t.coeffs[q] * t.factors[0][(i, q)] * t.factors[1][(j, q)] * t.factors[2][(k, q)]).sum()
    })
}

pub fn max_abs_diff(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &Array3<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn frob(a: &Array3<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// 7-point `-Δ` with zero values outside the grid.
pub fn dense_neg_laplacian(u: &Array3<f64>, h: f64) -> Array3<f64> {
    let n = u.dim().0 as i64;
    let at = |i: i64, j: i64, k: i64| {
        if i < 0 || j < 0 || k < 0 || i >= n || j >= n || k >= n {
            0.0
        } else {
            u[[i as usize, j as usize, k as usize]]
        }
    };
    Array3::from_shape_fn(u.dim(), |(i, j, k)| {
        let (i, j, k) = (i as i64, j as i64, k as i64);
        (6.0 * at(i, j, k) - at(i - 1, j, k) - at(i + 1, j, k) - at(i, j - 1, k) - at(i, j + 1, k) - at(i, j, k - 1) - at(i, j, k + 1)) / (h * h)
    })
}

/// Solves the Dirichlet 7-point system by Cholesky on the assembled matrix.
pub fn dense_dirichlet_solve(f: &Array3<f64>, h: f64) -> Array3<f64> {
    let n = f.dim().0;
    let m = n * n * n;
    let id = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
    let mut a = DMatrix::zeros(m, m);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let r = id(i, j, k);
                a[(r, r)] = 6.0 / (h * h);
                let mut nb = |ii: i64, jj: i64, kk: i64| {
                    if ii >= 0 && jj >= 0 && kk >= 0 && (ii as usize) < n && (jj as usize) < n && (kk as usize) < n {
                        a[(r, id(ii as usize, jj as usize, kk as usize))] = -1.0 / (h * h);
                    }
                };
                let (ii, jj, kk) = (i as i64, j as i64, k as i64);
                nb(ii - 1, jj, kk);
                nb(ii + 1, jj, kk);
                nb(ii, jj - 1, kk);
                nb(ii, jj + 1, kk);
                nb(ii, jj, kk - 1);
                nb(ii, jj, kk + 1);
            }
        }
    }
    let rhs = DVector::from_iterator(m, f.iter().copied());
    let x = a.cholesky().unwrap().solve(&rhs);
    Array3::from_shape_vec((n, n, n), x.iter().copied().collect()).unwrap()
}

/// `h³ Σ_j K(i - j) f(j)` by direct summation; `kernel(d)` takes signed offsets.
pub fn direct_convolution(f: &Array3<f64>, h: f64, kernel: &dyn Fn([i64; 3]) -> f64) -> Array3<f64> {
    let n = f.dim().0;
    let support: Vec<([usize; 3], f64)> = f.indexed_iter().filter(|(_, v)| **v != 0.0).map(|((i, j, k), v)| ([i, j, k], *v)).collect();
    Array3::from_shape_fn((n, n, n), |(i, j, k)| {
        support
            .iter()
            .map(|(c, v)| v * kernel([i as i64 - c[0] as i64, j as i64 - c[1] as i64, k as i64 - c[2] as i64]))
            .sum::<f64>()
            * h.powi(3)
    })
}

/// Central-difference `-Δ` of a scalar function of `x ∈ R³`.
pub fn fd_neg_laplacian(f: &dyn Fn([f64; 3]) -> f64, x: [f64; 3], step: f64) -> f64 {
    let mut s = 0.0;
    for l in 0..3 {
        let mut p = x;
        let mut m = x;
        p[l] += step;
        m[l] -= step;
        s += f(p) - 2.0 * f(x) + f(m);
    }
    -s / (step * step)
}

pub const SQRT_PI_REF: f64 = 1.772_453_850_905_516;
