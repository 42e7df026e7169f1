//! Range-separated canonical tensor representations of radial Green kernels
//! on uniform 3D grids, with the grid Dirac delta they induce and regularized
//! Poisson-type solves built on the short/long-range split.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod canonical;
pub mod elliptic;
pub mod error;
pub mod grid;
pub mod operators;
pub mod oracles;
pub mod quadrature;
pub mod range_sep;
pub mod special;
pub mod tucker;

pub use canonical::{project_kernel, project_kernel_averaged, CanonicalTensor3};
pub use error::{Error, Result};
pub use grid::{GridSpec, Particle, ParticleSystem};
pub use quadrature::{build_sinc_rule, convergence_sweep, KernelFamily, QuadratureRule, RadialKernel};
pub use range_sep::{assemble_multiparticle, choose_split, split_tensor, RsCanonicalTensor, RsSplit, SplitCriterion};
pub use tucker::{compress_can_tuck_can, CompressionOptions, TuckerTensor3};
