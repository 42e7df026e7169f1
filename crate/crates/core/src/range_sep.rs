//! Short/long-range splitting of Gaussian-sum kernel tensors and the
//! range-separated canonical format for many-particle sums.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canonical::{project_kernel, project_kernel_averaged, project_kernel_collocated, CanonicalTensor3};
use crate::error::{invalid, Error, Result};
use crate::grid::{GridSpec, ParticleSystem};
use crate::quadrature::QuadratureRule;
use crate::special::{gaussian_ball_integral, gaussian_interval};
use crate::tucker::{compress_can_tuck_can, CompressionOptions, CompressionReport, TuckerTensor3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitCriterion {
    /// `a_k exp(-t_k² σ²) ≤ δ`
    MaxNorm,
    /// `a_k ∫_{|x|≤σ} exp(-t_k² |x|²) dx ≤ δ`
    L1Norm,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitChoice {
    pub r_l: usize,
    /// Set when no term meets the criterion and everything is long-range.
    pub all_long: bool,
}

/// Value tested by the criterion for term `i` of the rule. The amplitude is
/// `|scale| · p_k`.
pub fn criterion_value(rule: &QuadratureRule, i: usize, sigma: f64, criterion: SplitCriterion) -> f64 {
    let a = rule.kernel.scale.abs() * rule.weights[i];
    let t = rule.nodes[i];
    match criterion {
        SplitCriterion::MaxNorm => a * (-t * t * sigma * sigma).exp(),
        SplitCriterion::L1Norm => a * gaussian_ball_integral(t, sigma),
    }
}

/// Smallest `R_l ∈ 0..=M` such that every term with `k ≥ R_l` meets the
/// criterion. Terms `k ≤ R_l` (and all `k < 0`) form the long-range part.
pub fn choose_split(rule: &QuadratureRule, sigma: f64, delta: f64, criterion: SplitCriterion) -> Result<SplitChoice> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1], got {delta}")));
    }
    let z = rule.zero_index();
    let mut r_l = None;
    for i in (z..rule.rank()).rev() {
        if criterion_value(rule, i, sigma, criterion) <= delta {
            r_l = Some(rule.ks[i] as usize);
        } else {
            break;
        }
    }
    Ok(match r_l {
        Some(r_l) => SplitChoice { r_l, all_long: false },
        None => SplitChoice { r_l: rule.m, all_long: true },
    })
}

/// Balanced default `R_l = M/2`.
pub fn default_split(rule: &QuadratureRule) -> usize {
    rule.m / 2
}

/// Radius at which every short-range term has dropped to `delta` under the
/// max-norm criterion.
pub fn short_support_radius(rule: &QuadratureRule, r_l: usize, delta: f64) -> f64 {
    let first = rule.zero_index() + r_l + 1;
    (first..rule.rank())
        .map(|i| {
            let a = rule.kernel.scale.abs() * rule.weights[i];
            let t = rule.nodes[i];
            (a / delta).ln().max(0.0).sqrt() / t
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Projection {
    /// Cell integrals.
    Integral,
    /// Cell averages.
    Average,
    /// Point values at the cell centers.
    Collocation,
}

pub fn project(rule: &QuadratureRule, grid: &GridSpec, projection: Projection) -> CanonicalTensor3 {
    match projection {
        Projection::Integral => project_kernel(rule, grid),
        Projection::Average => project_kernel_averaged(rule, grid),
        Projection::Collocation => project_kernel_collocated(rule, grid),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RsSplit {
    pub rule: QuadratureRule,
    pub r_l: usize,
    /// Effective support radius of the short part.
    pub sigma: f64,
    pub delta: f64,
    pub criterion: Option<SplitCriterion>,
    pub long: CanonicalTensor3,
    pub short: CanonicalTensor3,
}

/// Number of leading columns that are long-range for a given `R_l`.
pub fn long_count(rule: &QuadratureRule, r_l: usize) -> usize {
    (rule.zero_index() + r_l + 1).min(rule.rank())
}

/// Splits the first `n_long` columns off. No arithmetic is performed, so the
/// parts recombine bit for bit.
pub fn split_columns(t: &CanonicalTensor3, n_long: usize) -> Result<(CanonicalTensor3, CanonicalTensor3)> {
    if n_long > t.rank() {
        return Err(invalid(format!("cannot take {n_long} long-range columns from rank {}", t.rank())));
    }
    Ok((t.columns(0, n_long), t.columns(n_long, t.rank() - n_long)))
}

/// Splits a tensor projected from `rule` (columns in rule order) at `R_l`.
pub fn split_tensor(t: &CanonicalTensor3, rule: &QuadratureRule, r_l: usize, delta: f64) -> Result<RsSplit> {
    if r_l > rule.m {
        return Err(invalid(format!("R_l = {r_l} exceeds M = {}", rule.m)));
    }
    if t.rank() != rule.rank() {
        return Err(invalid(format!("tensor rank {} differs from rule rank {}", t.rank(), rule.rank())));
    }
    let (long, short) = split_columns(t, long_count(rule, r_l))?;
    Ok(RsSplit {
        rule: rule.clone(),
        r_l,
        sigma: short_support_radius(rule, r_l, delta),
        delta,
        criterion: None,
        long,
        short,
    })
}

impl RsSplit {
    /// Projects `rule` on `grid` and splits it by the criterion.
    pub fn by_criterion(
        rule: &QuadratureRule,
        grid: &GridSpec,
        projection: Projection,
        sigma: f64,
        delta: f64,
        criterion: SplitCriterion,
    ) -> Result<Self> {
        let choice = choose_split(rule, sigma, delta, criterion)?;
        let t = project(rule, grid, projection);
        let mut s = split_tensor(&t, rule, choice.r_l, delta)?;
        s.sigma = sigma;
        s.criterion = Some(criterion);
        Ok(s)
    }

    /// Projects `rule` on `grid` and splits at a given `R_l`.
    pub fn at(rule: &QuadratureRule, grid: &GridSpec, projection: Projection, r_l: usize, delta: f64) -> Result<Self> {
        split_tensor(&project(rule, grid, projection), rule, r_l, delta)
    }

    pub fn grid(&self) -> GridSpec {
        self.long.grid
    }

    pub fn r_s(&self) -> usize {
        self.short.rank()
    }

    pub fn long_rule(&self) -> QuadratureRule {
        self.rule.select(0..self.long.rank())
    }

    pub fn short_rule(&self) -> QuadratureRule {
        self.rule.select(self.long.rank()..self.rule.rank())
    }

    pub fn full(&self) -> CanonicalTensor3 {
        self.long.add(&self.short).expect("parts share a grid")
    }

    /// Cells per axis beyond which the short part is neglected: `ceil(σ/h)`.
    pub fn gamma(&self) -> usize {
        (self.sigma / self.grid().h()).ceil() as usize
    }
}

/// Half-profiles of an origin-centered short-range tensor: row `j` holds
/// the factor values at offset `±j` cells, with the coefficients folded in.
#[derive(Clone, Debug, PartialEq)]
pub struct ShortReference {
    pub gamma: usize,
    pub profiles: DMatrix<f64>,
}

impl ShortReference {
    /// Profiles straight from the short-range terms of a rule, for mesh
    /// size `h`. Entry `j` is the cell integral (or average) at offset `j`.
    pub fn from_rule(short: &QuadratureRule, h: f64, gamma: usize, projection: Projection) -> Self {
        let r = short.rank();
        let mut profiles = DMatrix::zeros(gamma + 1, r);
        for k in 0..r {
            let w = libm::cbrt(short.kernel.scale * short.weights[k]);
            let t = short.nodes[k];
            for j in 0..=gamma {
                let x = j as f64 * h;
                profiles[(j, k)] = w * match projection {
                    Projection::Integral => gaussian_interval(t, x - 0.5 * h, x + 0.5 * h),
                    Projection::Average => gaussian_interval(t, x - 0.5 * h, x + 0.5 * h) / h,
                    Projection::Collocation => (-t * t * x * x).exp(),
                };
            }
        }
        Self { gamma, profiles }
    }

    /// Full symmetric profile of term `k`, offsets `-γ..=γ`.
    pub fn symmetric_profile(&self, k: usize) -> Vec<f64> {
        let g = self.gamma as i64;
        (-g..=g).map(|j| self.profiles[(j.unsigned_abs() as usize, k)]).collect()
    }

    /// Reads the profiles from a tensor centered on its middle cell.
    pub fn from_centered(t: &CanonicalTensor3, gamma: usize) -> Result<Self> {
        let c = t.n() / 2;
        if t.n().is_multiple_of(2) || gamma > c {
            return Err(invalid(format!("window of {gamma} cells does not fit a centered grid of {} cells", t.n())));
        }
        let r = t.rank();
        let mut profiles = DMatrix::zeros(gamma + 1, r);
        for k in 0..r {
            let w = libm::cbrt(t.coeffs[k]);
            for j in 0..=gamma {
                profiles[(j, k)] = w * t.factors[0][(c + j, k)];
            }
        }
        Ok(Self { gamma, profiles })
    }

    pub fn rank(&self) -> usize {
        self.profiles.ncols()
    }

    /// Value at cell offset `d` from the center; zero outside the window.
    pub fn value(&self, d: [usize; 3]) -> f64 {
        if d.iter().any(|&v| v > self.gamma) {
            return 0.0;
        }
        (0..self.rank())
            .map(|k| self.profiles[(d[0], k)] * self.profiles[(d[1], k)] * self.profiles[(d[2], k)])
            .sum()
    }

    /// The truncated reference as a canonical tensor centered at `center`.
    pub fn place(&self, grid: &GridSpec, center: [usize; 3]) -> CanonicalTensor3 {
        let factors = std::array::from_fn(|l| {
            DMatrix::from_fn(grid.n, self.rank(), |i, k| {
                let d = i.abs_diff(center[l]);
                if d <= self.gamma {
                    self.profiles[(d, k)]
                } else {
                    0.0
                }
            })
        });
        CanonicalTensor3::from_factors(*grid, factors).expect("shapes match")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replica {
    pub center: [usize; 3],
    pub charge: f64,
}

/// Global low-rank long-range tensor plus charge-weighted copies of one
/// compactly supported short-range reference.
#[derive(Clone, Debug)]
pub struct RsCanonicalTensor {
    pub grid: GridSpec,
    /// Coefficients are folded into the factors.
    pub long: CanonicalTensor3,
    pub short_ref: ShortReference,
    pub replicas: Vec<Replica>,
    buckets: HashMap<[usize; 3], Vec<usize>>,
}

impl RsCanonicalTensor {
    pub fn new(grid: GridSpec, long: CanonicalTensor3, short_ref: ShortReference, replicas: Vec<Replica>) -> Result<Self> {
        grid.same_as(&long.grid)?;
        for r in &replicas {
            grid.check_index(r.center)?;
        }
        let long = fold_coeffs(&long);
        let w = short_ref.gamma + 1;
        let mut buckets: HashMap<[usize; 3], Vec<usize>> = HashMap::new();
        for (nu, r) in replicas.iter().enumerate() {
            buckets.entry(r.center.map(|c| c / w)).or_default().push(nu);
        }
        Ok(Self { grid, long, short_ref, replicas, buckets })
    }

    pub fn gamma(&self) -> usize {
        self.short_ref.gamma
    }

    /// Replicas whose window contains cell `i`.
    pub fn local_replicas(&self, i: [usize; 3]) -> Vec<usize> {
        let w = self.gamma() + 1;
        let b = i.map(|c| c / w);
        let mut out = Vec::new();
        for d0 in -1i64..=1 {
            for d1 in -1i64..=1 {
                for d2 in -1i64..=1 {
                    let key = [b[0] as i64 + d0, b[1] as i64 + d1, b[2] as i64 + d2];
                    if key.iter().any(|&v| v < 0) {
                        continue;
                    }
                    if let Some(list) = self.buckets.get(&key.map(|v| v as usize)) {
                        for &nu in list {
                            let c = self.replicas[nu].center;
                            if (0..3).all(|l| i[l].abs_diff(c[l]) <= self.gamma()) {
                                out.push(nu);
                            }
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn long_entry(&self, i: [usize; 3]) -> Result<f64> {
        self.long.entry(i)
    }

    pub fn short_entry(&self, i: [usize; 3]) -> Result<f64> {
        self.grid.check_index(i)?;
        Ok(self
            .local_replicas(i)
            .into_iter()
            .map(|nu| {
                let r = &self.replicas[nu];
                r.charge * self.short_ref.value(std::array::from_fn(|l| i[l].abs_diff(r.center[l])))
            })
            .sum())
    }

    /// Long-range row product plus the replicas covering `i`.
    pub fn entry(&self, i: [usize; 3]) -> Result<f64> {
        Ok(self.long_entry(i)? + self.short_entry(i)?)
    }

    /// Stored reals: long factors, four per replica, and the short profiles.
    pub fn storage(&self) -> usize {
        3 * self.long.rank() * self.grid.n + 4 * self.replicas.len() + self.short_ref.profiles.len()
    }

    /// `3 R_L n + 4 N + 3 R_0 γ`.
    pub fn storage_bound(&self) -> usize {
        3 * self.long.rank() * self.grid.n + 4 * self.replicas.len() + 3 * self.short_ref.rank() * self.gamma()
    }

    /// Sum of the short-range replicas as a canonical tensor of rank `N R_0`.
    pub fn short_canonical(&self) -> CanonicalTensor3 {
        let parts: Vec<CanonicalTensor3> = self
            .replicas
            .iter()
            .map(|r| self.short_ref.place(&self.grid, r.center).scale(r.charge))
            .collect();
        CanonicalTensor3::sum(self.grid, &parts).expect("same grid")
    }

    /// All charges times `c`; exact when `c` is a power of two.
    pub fn scale_charges(&self, c: f64) -> Self {
        let mut long = self.long.clone();
        long.factors[0] *= c;
        let replicas = self.replicas.iter().map(|r| Replica { center: r.center, charge: c * r.charge }).collect();
        Self::new(self.grid, long, self.short_ref.clone(), replicas).expect("unchanged layout")
    }
}

fn fold_coeffs(t: &CanonicalTensor3) -> CanonicalTensor3 {
    let mut factors = t.factors.clone();
    for k in 0..t.rank() {
        let w = libm::cbrt(t.coeffs[k]);
        for f in factors.iter_mut() {
            f.column_mut(k).scale_mut(w);
        }
    }
    CanonicalTensor3::from_factors(t.grid, factors).expect("shapes unchanged")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssembleOptions {
    pub compression: CompressionOptions,
    /// Short window radius in cells; defaults to `ceil(σ/h)`.
    pub gamma: Option<usize>,
}

impl AssembleOptions {
    pub fn new(eps: f64) -> Self {
        Self { compression: CompressionOptions::new(eps), gamma: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssemblyReport {
    pub n_particles: usize,
    pub r_l: usize,
    pub r_s: usize,
    pub gamma: usize,
    pub uncompressed_long_rank: usize,
    pub compression: CompressionReport,
    pub storage: usize,
    pub storage_bound: usize,
    pub max_snap_displacement: f64,
}

/// Charge-weighted windows of the long-range reference, concatenated.
pub fn long_range_sum(reference: &RsSplit, centers: &[[usize; 3]], charges: &[f64], grid: &GridSpec) -> Result<CanonicalTensor3> {
    let parts: Vec<CanonicalTensor3> = centers
        .par_iter()
        .zip(charges)
        .map(|(c, &q)| reference.long.shift_window(*c, grid).map(|t| t.scale(q)))
        .collect::<Result<_>>()?;
    CanonicalTensor3::sum(*grid, &parts)
}

/// Assembles the potential of `sys` on `grid` from a split reference kernel
/// projected on `grid.doubled()`. Particles snap to the nearest cell center.
pub fn assemble_multiparticle(
    reference: &RsSplit,
    sys: &ParticleSystem,
    grid: &GridSpec,
    opts: &AssembleOptions,
) -> Result<(RsCanonicalTensor, TuckerTensor3, AssemblyReport)> {
    if sys.is_empty() {
        return Err(invalid("no particles"));
    }
    let d = grid.doubled();
    if reference.grid().n != d.n || (reference.grid().h() - grid.h()).abs() > 1e-12 * grid.h() {
        return Err(Error::GridMismatch(format!(
            "reference split must live on the {}-cell grid with h = {}",
            d.n,
            grid.h()
        )));
    }
    let (centers, snap) = sys.snap(grid)?;
    let charges: Vec<f64> = sys.particles.iter().map(|p| p.charge).collect();
    let long_sum = long_range_sum(reference, &centers, &charges, grid)?;
    let (tucker, long, compression) = compress_can_tuck_can(&long_sum, &opts.compression)?;
    let gamma = opts.gamma.unwrap_or_else(|| reference.gamma()).min(grid.n);
    let short_ref = ShortReference::from_centered(&reference.short, gamma)?;
    let replicas = centers.iter().zip(&charges).map(|(&center, &charge)| Replica { center, charge }).collect();
    let rs = RsCanonicalTensor::new(*grid, long, short_ref, replicas)?;
    let report = AssemblyReport {
        n_particles: sys.len(),
        r_l: reference.r_l,
        r_s: reference.r_s(),
        gamma,
        uncompressed_long_rank: long_sum.rank(),
        compression,
        storage: rs.storage(),
        storage_bound: rs.storage_bound(),
        max_snap_displacement: snap,
    };
    Ok((rs, tucker, report))
}

/// Profiles of a centered reference, for plotting: one column per term.
pub fn centered_profiles(t: &CanonicalTensor3) -> (Vec<f64>, DMatrix<f64>) {
    let mut f = t.factors[0].clone();
    for k in 0..t.rank() {
        f.column_mut(k).scale_mut(libm::cbrt(t.coeffs[k]));
    }
    (t.grid.coords(), f)
}
