//! Direct and inverse spectral problems for energy-dependent
//! Sturm-Liouville pencils `-y'' + q y + 2 lambda p y = lambda² y` on
//! `[0, 1]` with Dirichlet conditions, solved through an equivalent Dirac
//! system.
//!
//! The forward map goes `(p, r)` → Miura field `v` → pencil-form Dirac
//! potential `P` → eigenpairs. The inverse map goes spectral data →
//! shifted-AKNS potential `Q` (Gelfand-Levitan) → gauge rotation to `P` →
//! `(p, r)`. See [`pipeline`] for both.

// `!(x > y)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod akns;
pub mod commutation;
pub mod dirac;
pub mod error;
pub mod gauge;
pub mod grid;
pub mod io;
mod ode;
pub mod pencil;
pub mod pipeline;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use grid::{Grid, GridFn, MatrixGridFn};
pub use pencil::PencilPotentials;
pub use pipeline::PipelineConfig;
pub use spectral::SpectralData;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/grid.md")]
    mod grid {}
    #[doc = include_str!("../../../book/src/pencil.md")]
    mod pencil {}
    #[doc = include_str!("../../../book/src/dirac.md")]
    mod dirac {}
    #[doc = include_str!("../../../book/src/spectral-data.md")]
    mod spectral_data {}
    #[doc = include_str!("../../../book/src/inverse.md")]
    mod inverse {}
    #[doc = include_str!("../../../book/src/gauge.md")]
    mod gauge {}
    #[doc = include_str!("../../../book/src/commutation.md")]
    mod commutation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
