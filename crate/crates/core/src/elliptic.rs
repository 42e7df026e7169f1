//! Dirichlet Poisson solves on the grid and their range-separated
//! regularization.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use ndarray::Array3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canonical::CanonicalTensor3;
use crate::error::{invalid, Error, Result};
use crate::grid::{GridSpec, ParticleSystem};
use crate::operators::{for_each_slice, free_space_long_delta, KroneckerLaplacian};
use crate::quadrature::QuadratureRule;
use crate::range_sep::{Projection, RsSplit, ShortReference, SplitCriterion};
use crate::tucker::{compress_can_tuck_can, CompressionOptions, CompressionReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldRole {
    Density,
    Potential,
}

#[derive(Clone, Debug)]
pub enum FieldValues {
    Dense(Array3<f64>),
    Canonical(CanonicalTensor3),
}

#[derive(Clone, Debug)]
pub struct GridField {
    pub grid: GridSpec,
    pub values: FieldValues,
    pub role: FieldRole,
}

impl GridField {
    pub fn dense(grid: GridSpec, values: Array3<f64>, role: FieldRole) -> Result<Self> {
        if values.dim() != (grid.n, grid.n, grid.n) {
            return Err(Error::GridMismatch(format!("field of shape {:?} on a grid of {} cells", values.dim(), grid.n)));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("field has non-finite entries"));
        }
        Ok(Self { grid, values: FieldValues::Dense(values), role })
    }

    pub fn canonical(t: CanonicalTensor3, role: FieldRole) -> Self {
        Self { grid: t.grid, values: FieldValues::Canonical(t), role }
    }

    pub fn to_dense(&self) -> Array3<f64> {
        match &self.values {
            FieldValues::Dense(a) => a.clone(),
            FieldValues::Canonical(t) => t.to_dense(),
        }
    }
}

/// Convolution along one axis with a centered kernel of odd length,
/// zero outside the grid.
fn convolve_axis(x: &Array3<f64>, kernel: &[f64], axis: usize) -> Array3<f64> {
    let n = x.dim().0;
    let g = (kernel.len() / 2) as i64;
    let src_data = x.as_standard_layout();
    let src = src_data.as_slice().expect("standard layout");
    let stride = [n * n, n, 1][axis];
    let mut out = vec![0.0; n * n * n];
    out.par_chunks_mut(n * n).enumerate().for_each(|(i, plane)| {
        for j in 0..n {
            for k in 0..n {
                let c = [i, j, k][axis] as i64;
                let at = i * n * n + j * n + k;
                let mut s = 0.0;
                for (m, w) in kernel.iter().enumerate() {
                    let from = c + g - m as i64;
                    if from >= 0 && (from as usize) < n {
                        s += w * src[(at as i64 + (from - c) * stride as i64) as usize];
                    }
                }
                plane[j * n + k] = s;
            }
        }
    });
    Array3::from_shape_vec((n, n, n), out).expect("n³ entries")
}

fn convolve_vector(v: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = v.len();
    let g = (kernel.len() / 2) as i64;
    (0..n)
        .map(|c| {
            kernel
                .iter()
                .enumerate()
                .filter_map(|(m, w)| {
                    let src = c as i64 + g - m as i64;
                    (src >= 0 && (src as usize) < n).then(|| w * v[src as usize])
                })
                .sum()
        })
        .collect()
}

/// `u_s = h³ (P_s ∗ f)` with the short kernel truncated to `γ` cells, done
/// as three 1D convolutions per term.
pub fn short_convolve(short: &ShortReference, f: &GridField) -> GridField {
    let grid = f.grid;
    let h3 = grid.h().powi(3);
    let values = match &f.values {
        FieldValues::Dense(a) => {
            let mut u = Array3::zeros(a.dim());
            for k in 0..short.rank() {
                let p = short.symmetric_profile(k);
                let t = convolve_axis(a, &p, 0);
                let t = convolve_axis(&t, &p, 1);
                let t = convolve_axis(&t, &p, 2);
                u.scaled_add(h3, &t);
            }
            FieldValues::Dense(u)
        }
        FieldValues::Canonical(t) => {
            let (rf, rs) = (t.rank(), short.rank());
            let mut factors: [DMatrix<f64>; 3] = std::array::from_fn(|_| DMatrix::zeros(grid.n, rf * rs));
            let mut coeffs = DVector::zeros(rf * rs);
            for k in 0..rs {
                let p = short.symmetric_profile(k);
                for j in 0..rf {
                    let col = k * rf + j;
                    coeffs[col] = h3 * t.coeffs[j];
                    for l in 0..3 {
                        let v: Vec<f64> = t.factors[l].column(j).iter().copied().collect();
                        factors[l].set_column(col, &DVector::from_vec(convolve_vector(&v, &p)));
                    }
                }
            }
            FieldValues::Canonical(CanonicalTensor3 { grid, factors, coeffs })
        }
    };
    GridField { grid, values, role: FieldRole::Potential }
}

/// `f̄ = f + A_Δ u_s` (dense).
pub fn modified_rhs(f: &GridField, u_s: &GridField, lap: &KroneckerLaplacian) -> Result<GridField> {
    f.grid.same_as(&u_s.grid)?;
    let neg = lap.apply_negative_dense(&u_s.to_dense());
    let out = f.to_dense() - &neg;
    Ok(GridField { grid: f.grid, values: FieldValues::Dense(out), role: FieldRole::Density })
}

/// Orthonormal eigenbasis of the Dirichlet `-Δ₁` and its eigenvalues.
pub fn sine_basis(grid: &GridSpec) -> (DMatrix<f64>, Vec<f64>) {
    let n = grid.n;
    let h = grid.h();
    let c = (2.0 / (n as f64 + 1.0)).sqrt();
    let s = DMatrix::from_fn(n, n, |i, j| c * (PI * (i + 1) as f64 * (j + 1) as f64 / (n as f64 + 1.0)).sin());
    let lam = (0..n)
        .map(|j| 4.0 / (h * h) * (PI * (j + 1) as f64 / (2.0 * (n as f64 + 1.0))).sin().powi(2))
        .collect();
    (s, lam)
}

/// Applies the symmetric `m` along `axis` of a C-ordered `n³` array.
fn transform_axis(data: &mut [f64], n: usize, m: &DMatrix<f64>, axis: usize) {
    match axis {
        2 => {
            // Column-major view: n × n², column (i, j) is a fiber.
            let x = DMatrix::from_column_slice(n, n * n, data);
            data.copy_from_slice((m * x).as_slice());
        }
        0 => {
            let x = DMatrix::from_column_slice(n * n, n, data);
            data.copy_from_slice((x * m).as_slice());
        }
        _ => {
            data.par_chunks_mut(n * n).for_each(|block| {
                let x = DMatrix::from_column_slice(n, n, block);
                block.copy_from_slice((x * m).as_slice());
            });
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// `‖-A_Δ u - f‖ / ‖f‖` (Frobenius).
    pub rel_residual: f64,
}

pub const SOLVER_TOL: f64 = 1e-10;

/// Solves `-A_Δ u = f` with zero Dirichlet data by diagonalizing the 1D
/// operator in the sine basis.
pub fn solve_poisson_dirichlet(f: &GridField) -> Result<(GridField, SolveReport)> {
    let grid = f.grid;
    let n = grid.n;
    let fd = f.to_dense();
    let (s, lam) = sine_basis(&grid);
    let mut data: Vec<f64> = fd.iter().copied().collect();
    for axis in 0..3 {
        transform_axis(&mut data, n, &s, axis);
    }
    data.par_chunks_mut(n * n).enumerate().for_each(|(i, block)| {
        for j in 0..n {
            for k in 0..n {
                block[j * n + k] /= lam[i] + lam[j] + lam[k];
            }
        }
    });
    for axis in 0..3 {
        transform_axis(&mut data, n, &s, axis);
    }
    let u = Array3::from_shape_vec((n, n, n), data).expect("n³ entries");
    let lap = KroneckerLaplacian::dirichlet(grid);
    let r = lap.apply_negative_dense(&u) - &fd;
    let fnorm = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rel_residual = if fnorm > 0.0 { r.iter().map(|v| v * v).sum::<f64>().sqrt() / fnorm } else { 0.0 };
    if !(rel_residual <= SOLVER_TOL) {
        return Err(Error::NotConverged { what: "sine-transform Poisson solve".into(), best_residual: rel_residual });
    }
    Ok((GridField { grid, values: FieldValues::Dense(u), role: FieldRole::Potential }, SolveReport { rel_residual }))
}

/// Terms `(w_j, s_j)` with `Σ w_j exp(-s_j x) ≈ 1/x` to relative accuracy
/// `tol` on `[x_min, x_max]`, from the trapezoid rule for
/// `1/x = ∫ exp(u - e^u x) du`.
pub fn inverse_exponential_sum(x_min: f64, x_max: f64, tol: f64) -> Vec<(f64, f64)> {
    let ln_tol = tol.ln();
    let lo = (tol / x_max).ln() - 1.0;
    let hi = ((-ln_tol).ln() - x_min.ln()) + 1.0;
    let step = PI * PI / (-ln_tol + 2.0);
    let m = ((hi - lo) / step).ceil() as usize;
    (0..=m)
        .map(|j| {
            let u = lo + j as f64 * step;
            (step * u.exp(), u.exp())
        })
        .collect()
}

/// Factor-wise Dirichlet solve of a canonical right-hand side: the inverse
/// eigenvalue sum is replaced by an exponential sum, which keeps the
/// solution canonical (rank `K · rank(f)`).
pub fn solve_poisson_canonical(f: &CanonicalTensor3, tol: f64) -> CanonicalTensor3 {
    let grid = f.grid;
    let (s, lam) = sine_basis(&grid);
    let x_min = 3.0 * lam[0];
    let x_max = 3.0 * lam[grid.n - 1];
    let terms = inverse_exponential_sum(x_min, x_max, tol);
    let hat: Vec<DMatrix<f64>> = f.factors.iter().map(|u| s.transpose() * u).collect();
    let parts: Vec<CanonicalTensor3> = terms
        .par_iter()
        .map(|&(w, sj)| {
            let d = DVector::from_iterator(grid.n, lam.iter().map(|l| (-sj * l).exp()));
            let factors = std::array::from_fn(|l| {
                let mut m = hat[l].clone();
                for mut c in m.column_iter_mut() {
                    c.component_mul_assign(&d);
                }
                &s * m
            });
            CanonicalTensor3 { grid, factors, coeffs: &f.coeffs * w }
        })
        .collect();
    CanonicalTensor3::sum(grid, &parts).expect("same grid")
}

/// Cells with a nonzero entry.
fn support_cells(a: &Array3<f64>) -> Vec<[usize; 3]> {
    a.indexed_iter().filter(|(_, v)| **v != 0.0).map(|((i, j, k), _)| [i, j, k]).collect()
}

/// Smallest distance from a cell center in the list to a face of the box.
pub fn distance_to_boundary(grid: &GridSpec, cells: &[[usize; 3]]) -> f64 {
    cells
        .iter()
        .flat_map(|c| c.iter().map(|&i| grid.coord(i) + grid.b).chain(c.iter().map(|&i| grid.b - grid.coord(i))))
        .fold(f64::INFINITY, f64::min)
}

fn boundary_trace_max(a: &Array3<f64>) -> f64 {
    let n = a.dim().0;
    a.indexed_iter()
        .filter(|((i, j, k), _)| [*i, *j, *k].iter().any(|&v| v == 0 || v == n - 1))
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizedReport {
    pub sigma: f64,
    pub gamma: usize,
    pub support_distance: f64,
    pub modified_support_distance: f64,
    pub distance_condition_holds: bool,
    /// Largest `|u_s|` on the outer cell layer.
    pub short_trace_max: f64,
    pub solve: SolveReport,
    /// `max|u - u_direct| / max|u_direct|`.
    pub direct_rel_diff: f64,
}

#[derive(Clone, Debug)]
pub struct RegularizedSolution {
    pub u: GridField,
    pub u_short: GridField,
    pub f_bar: GridField,
    pub report: RegularizedReport,
}

/// `u = u_s + ū` with `u_s = P_s ∗ f` and `-A_Δ ū = f + A_Δ u_s`.
pub fn regularized_poisson(f: &GridField, split: &RsSplit) -> Result<RegularizedSolution> {
    let grid = f.grid;
    if (split.grid().h() - grid.h()).abs() > 1e-12 * grid.h() {
        return Err(Error::GridMismatch("split and field use different mesh sizes".into()));
    }
    let gamma = split.gamma().min(grid.n);
    let short = ShortReference::from_rule(&split.short_rule(), grid.h(), gamma, Projection::Average);
    let u_s = short_convolve(&short, f);
    let lap = KroneckerLaplacian::dirichlet(grid);
    let f_bar = modified_rhs(f, &u_s, &lap)?;
    let (u_bar, solve) = solve_poisson_dirichlet(&f_bar)?;
    let u_s_dense = u_s.to_dense();
    let u = &u_s_dense + &u_bar.to_dense();
    let (direct, _) = solve_poisson_dirichlet(f)?;
    let direct = direct.to_dense();
    let dmax = direct.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = (&u - &direct).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let fd = f.to_dense();
    let fbd = f_bar.to_dense();
    let support_distance = distance_to_boundary(&grid, &support_cells(&fd));
    let report = RegularizedReport {
        sigma: split.sigma,
        gamma,
        support_distance,
        modified_support_distance: distance_to_boundary(&grid, &support_cells(&fbd)),
        distance_condition_holds: support_distance > split.sigma,
        short_trace_max: boundary_trace_max(&u_s_dense),
        solve,
        direct_rel_diff: if dmax > 0.0 { diff / dmax } else { diff },
    };
    Ok(RegularizedSolution {
        u: GridField { grid, values: FieldValues::Dense(u), role: FieldRole::Potential },
        u_short: u_s,
        f_bar,
        report,
    })
}

/// Point charges as a grid density: `q / h³` in the nearest cell.
pub fn impulse_density(grid: &GridSpec, sys: &ParticleSystem) -> Result<GridField> {
    let (centers, _) = sys.snap(grid)?;
    let mut a = Array3::zeros((grid.n, grid.n, grid.n));
    let inv = 1.0 / grid.h().powi(3);
    for (c, p) in centers.iter().zip(&sys.particles) {
        a[*c] += p.charge * inv;
    }
    GridField::dense(*grid, a, FieldRole::Density)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: [f64; 3],
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PbeConfig {
    pub eps_m: f64,
    pub eps_s: f64,
    pub kappa: f64,
    pub molecule: Vec<Ball>,
    pub charges: ParticleSystem,
}

impl PbeConfig {
    /// One ball of radius `sigma_vdw` per charge.
    pub fn with_vdw_balls(charges: ParticleSystem, sigma_vdw: f64, eps_m: f64, eps_s: f64, kappa: f64) -> Self {
        let molecule = charges.particles.iter().map(|p| Ball { center: p.center, radius: sigma_vdw }).collect();
        Self { eps_m, eps_s, kappa, molecule, charges }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_m > 0.0) || !(self.eps_s >= self.eps_m) || !self.eps_s.is_finite() {
            return Err(invalid(format!("need 0 < eps_m <= eps_s < inf, got {} and {}", self.eps_m, self.eps_s)));
        }
        if !(self.kappa >= 0.0) {
            return Err(invalid("kappa must be nonnegative"));
        }
        if self.charges.is_empty() {
            return Err(invalid("no particles"));
        }
        for (k, p) in self.charges.particles.iter().enumerate() {
            if !self.inside(p.center) {
                return Err(invalid(format!("charge {k} lies outside the molecular region")));
            }
        }
        Ok(())
    }

    pub fn inside(&self, x: [f64; 3]) -> bool {
        self.molecule.iter().any(|b| dist(b.center, x) < b.radius)
    }

    pub fn min_radius(&self) -> f64 {
        self.molecule.iter().map(|b| b.radius).fold(f64::INFINITY, f64::min)
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Quasi-uniform points on the unit sphere (golden-angle spiral).
pub fn fibonacci_sphere(count: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

pub const INTERFACE_SAMPLES: usize = 2562;

/// Trilinear interpolation of cell-centered values; zero outside the grid.
pub fn interpolate(grid: &GridSpec, a: &Array3<f64>, x: [f64; 3]) -> f64 {
    let h = grid.h();
    let mut base = [0i64; 3];
    let mut frac = [0.0; 3];
    for l in 0..3 {
        let s = (x[l] + grid.b) / h - 0.5;
        let f = s.floor();
        base[l] = f as i64;
        frac[l] = s - f;
    }
    let n = grid.n as i64;
    let mut v = 0.0;
    for c in 0..8 {
        let o = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
        let idx: [i64; 3] = std::array::from_fn(|l| base[l] + o[l] as i64);
        if idx.iter().any(|&i| i < 0 || i >= n) {
            continue;
        }
        let w: f64 = (0..3).map(|l| if o[l] == 1 { frac[l] } else { 1.0 - frac[l] }).product();
        v += w * a[[idx[0] as usize, idx[1] as usize, idx[2] as usize]];
    }
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PbeReport {
    pub r_l: usize,
    pub sigma_split: f64,
    pub gamma: usize,
    pub long_compression: CompressionReport,
    pub interface_samples: usize,
    /// Largest `|u_short|` on the interface samples.
    pub interface_max: f64,
    pub u_short_max: f64,
    /// Largest one-sided normal difference `|u(x + h n) - u(x)| / h` on the samples.
    pub interface_normal_diff_max: f64,
    pub rho_long_max: f64,
    /// Cells with `|ρ_long| > 10⁻³ max` lying outside the molecular region.
    pub rho_long_cells_outside: usize,
    pub rho_long_cells_inside: usize,
    pub threshold: f64,
    pub max_snap_displacement: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PbeSplitParams {
    pub m: usize,
    pub c0: f64,
    pub sigma: f64,
    pub delta: f64,
    pub criterion: SplitCriterion,
    pub eps: f64,
}

#[derive(Clone, Debug)]
pub struct PbeRhs {
    pub rho_long: CanonicalTensor3,
    pub u_short: GridField,
    pub report: PbeReport,
}

pub const SUPPORT_THRESHOLD: f64 = 1e-3;

/// `ρ_long = ε_m T_ε(-A_Δ P_L)` and `u_short` for the charges of `cfg`,
/// with the interface and support checks.
pub fn pbe_regularize_rhs(cfg: &PbeConfig, grid: &GridSpec, rule: &QuadratureRule, params: &PbeSplitParams) -> Result<PbeRhs> {
    cfg.validate()?;
    cfg.charges.check_inside(grid)?;
    if params.sigma > cfg.min_radius() {
        return Err(invalid(format!(
            "short-range support {} exceeds the van der Waals radius {}",
            params.sigma,
            cfg.min_radius()
        )));
    }
    let reference = RsSplit::by_criterion(rule, &grid.doubled(), Projection::Average, params.sigma, params.delta, params.criterion)?;
    let (centers, snap) = cfg.charges.snap(grid)?;
    let charges: Vec<f64> = cfg.charges.particles.iter().map(|p| p.charge).collect();
    let delta_sum = free_space_long_delta(&reference, &centers, &charges, grid)?;
    let (_, rho, long_compression) = compress_can_tuck_can(&delta_sum, &CompressionOptions::new(params.eps))?;
    let rho_long = rho.scale(cfg.eps_m);

    let gamma = reference.gamma().min(grid.n);
    let short = ShortReference::from_rule(&reference.short_rule(), grid.h(), gamma, Projection::Average);
    let u_short = place_short(grid, &short, &centers, &charges);

    let samples = fibonacci_sphere(INTERFACE_SAMPLES);
    let h = grid.h();
    let mut interface_max: f64 = 0.0;
    let mut normal_max: f64 = 0.0;
    let mut count = 0;
    for ball in &cfg.molecule {
        for s in &samples {
            let x: [f64; 3] = std::array::from_fn(|l| ball.center[l] + ball.radius * s[l]);
            let covered = cfg.molecule.iter().any(|b| b != ball && dist(b.center, x) < b.radius);
            if covered || x.iter().any(|c| c.abs() > grid.b) {
                continue;
            }
            count += 1;
            let v = interpolate(grid, &u_short, x);
            let xo: [f64; 3] = std::array::from_fn(|l| x[l] + h * s[l]);
            let vo = interpolate(grid, &u_short, xo);
            interface_max = interface_max.max(v.abs());
            normal_max = normal_max.max((vo - v).abs() / h);
        }
    }
    let u_short_max = u_short.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let rho_max = crate::operators::max_abs(&rho_long);
    let thr = SUPPORT_THRESHOLD * rho_max;
    let counts = for_each_slice(&rho_long, |i3, s| {
        let mut inside = 0;
        let mut outside = 0;
        for i2 in 0..grid.n {
            for i1 in 0..grid.n {
                if s[(i1, i2)].abs() > thr {
                    if cfg.inside([grid.coord(i1), grid.coord(i2), grid.coord(i3)]) {
                        inside += 1;
                    } else {
                        outside += 1;
                    }
                }
            }
        }
        (inside, outside)
    });
    let (inside, outside) = counts.into_iter().fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let report = PbeReport {
        r_l: reference.r_l,
        sigma_split: params.sigma,
        gamma,
        long_compression,
        interface_samples: count,
        interface_max,
        u_short_max,
        interface_normal_diff_max: normal_max,
        rho_long_max: rho_max,
        rho_long_cells_outside: outside,
        rho_long_cells_inside: inside,
        threshold: SUPPORT_THRESHOLD,
        max_snap_displacement: snap,
    };
    Ok(PbeRhs {
        rho_long,
        u_short: GridField { grid: *grid, values: FieldValues::Dense(u_short), role: FieldRole::Potential },
        report,
    })
}

/// Dense sum of charge-weighted short references.
pub fn place_short(grid: &GridSpec, short: &ShortReference, centers: &[[usize; 3]], charges: &[f64]) -> Array3<f64> {
    let n = grid.n;
    let g = short.gamma;
    let mut a = Array3::zeros((n, n, n));
    for (c, &q) in centers.iter().zip(charges) {
        let lo = c.map(|v| v.saturating_sub(g));
        let hi = c.map(|v| (v + g).min(n - 1));
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for k in lo[2]..=hi[2] {
                    a[[i, j, k]] += q * short.value([i.abs_diff(c[0]), j.abs_diff(c[1]), k.abs_diff(c[2])]);
                }
            }
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_basis_is_orthonormal() {
        let (s, _) = sine_basis(&GridSpec::new(1.0, 9).unwrap());
        let e = &s.transpose() * &s - DMatrix::identity(9, 9);
        assert!(e.amax() < 1e-13);
    }

    #[test]
    fn inverse_exponential_sum_is_accurate() {
        let terms = inverse_exponential_sum(0.5, 5e3, 1e-10);
        for x in [0.5, 1.0, 7.0, 300.0, 5e3] {
            let v: f64 = terms.iter().map(|(w, s)| w * (-s * x).exp()).sum();
            assert!((v * x - 1.0).abs() < 1e-9, "x = {x}: {v}");
        }
    }

    #[test]
    fn fibonacci_points_are_unit() {
        assert!(fibonacci_sphere(100).iter().all(|p| ((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn interpolation_reproduces_linear_function() {
        let g = GridSpec::new(1.0, 6).unwrap();
        let a = Array3::from_shape_fn((6, 6, 6), |(i, j, k)| g.coord(i) + 2.0 * g.coord(j) - g.coord(k));
        let x = [0.1, -0.2, 0.3];
        assert!((interpolate(&g, &a, x) - (0.1 - 0.4 - 0.3)).abs() < 1e-13);
    }

    #[test]
    fn pbe_config_rejects_charge_outside() {
        let sys = ParticleSystem::new(vec![crate::grid::Particle { center: [0.0; 3], charge: 1.0 }]);
        let mut cfg = PbeConfig::with_vdw_balls(sys, 1.0, 1.0, 80.0, 0.1);
        cfg.molecule[0].center = [5.0, 0.0, 0.0];
        assert!(cfg.validate().is_err());
    }
}
