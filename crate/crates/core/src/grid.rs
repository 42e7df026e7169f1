use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Cubic box `[-b, b]^3` split into `n^3` equal cells.
///
/// Cell `i` (zero-based) is centered at `-b + (i + 1/2) h`. For odd `n` the
/// origin is the center of cell `(n - 1) / 2`; for even `n` it is a vertex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub b: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(b: f64, n: usize) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(invalid(format!("box half-width must be positive, got {b}")));
        }
        if n < 2 {
            return Err(invalid(format!("grid needs at least 2 cells per axis, got {n}")));
        }
        Ok(Self { b, n })
    }

    pub fn h(&self) -> f64 {
        2.0 * self.b / self.n as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 + 0.5 - 0.5 * self.n as f64) * self.h()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }

    /// Index of the cell whose center is closest to `x`, or `None` outside the box.
    pub fn nearest_index(&self, x: f64) -> Option<usize> {
        if !(x >= -self.b && x <= self.b) {
            return None;
        }
        let i = ((x + self.b) / self.h() - 0.5).round();
        Some((i.max(0.0) as usize).min(self.n - 1))
    }

    /// Grid with `2n + 1` cells of the same width, centered on a cell.
    ///
    /// Shifting a kernel projected onto it to any cell center of `self` and
    /// cropping to `n` cells keeps it aligned with `self`'s cells.
    pub fn doubled(&self) -> GridSpec {
        let n = 2 * self.n + 1;
        GridSpec { b: 0.5 * n as f64 * self.h(), n }
    }

    /// Cell index nearest to the origin.
    pub fn center_index(&self) -> usize {
        self.n / 2
    }

    pub fn check_index(&self, i: [usize; 3]) -> Result<()> {
        if i.iter().any(|&v| v >= self.n) {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        Ok(())
    }

    pub fn same_as(&self, other: &GridSpec) -> Result<()> {
        if self.n != other.n || (self.b - other.b).abs() > 1e-12 * self.b {
            return Err(Error::GridMismatch(format!(
                "(b={}, n={}) vs (b={}, n={})",
                self.b, self.n, other.b, other.n
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub center: [f64; 3],
    pub charge: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParticleSystem {
    pub particles: Vec<Particle>,
}

impl ParticleSystem {
    pub fn new(particles: Vec<Particle>) -> Self {
        Self { particles }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Reads `x y z q` lines; blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut particles = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::Parse {
                    line: k + 1,
                    message: format!("expected 4 fields `x y z q`, found {}", fields.len()),
                });
            }
            let mut v = [0.0; 4];
            for (slot, f) in v.iter_mut().zip(&fields) {
                *slot = f.parse().map_err(|_| Error::Parse {
                    line: k + 1,
                    message: format!("not a number: {f}"),
                })?;
            }
            particles.push(Particle { center: [v[0], v[1], v[2]], charge: v[3] });
        }
        Ok(Self { particles })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# x y z q\n");
        for p in &self.particles {
            s += &format!("{:.17e} {:.17e} {:.17e} {:.17e}\n", p.center[0], p.center[1], p.center[2], p.charge);
        }
        s
    }

    pub fn check_inside(&self, grid: &GridSpec) -> Result<()> {
        for (k, p) in self.particles.iter().enumerate() {
            if p.center.iter().any(|c| !(c.abs() <= grid.b)) {
                return Err(invalid(format!("particle {k} at {:?} lies outside the box [-{b}, {b}]^3", p.center, b = grid.b)));
            }
        }
        Ok(())
    }

    /// Nearest cell centers and the largest snapping distance.
    pub fn snap(&self, grid: &GridSpec) -> Result<(Vec<[usize; 3]>, f64)> {
        self.check_inside(grid)?;
        let mut worst: f64 = 0.0;
        let idx = self
            .particles
            .iter()
            .map(|p| {
                let i = p.center.map(|c| grid.nearest_index(c).unwrap());
                let d2: f64 = (0..3).map(|l| (grid.coord(i[l]) - p.center[l]).powi(2)).sum();
                worst = worst.max(d2.sqrt());
                i
            })
            .collect();
        Ok((idx, worst))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            particles: self.particles.iter().map(|p| Particle { center: p.center, charge: c * p.charge }).collect(),
        }
    }
}
