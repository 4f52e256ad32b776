//! Ergodic trajectory optimization with state-dependent sensor footprints.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod footprint;
pub mod infomap;
pub mod io;
pub mod metric;
pub mod optimize;
pub mod presets;
pub mod spectral;
pub mod surface3d;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/basis.md")]
    mod basis {}
    #[doc = include_str!("../../../book/src/footprints.md")]
    mod footprints {}
    #[doc = include_str!("../../../book/src/planning.md")]
    mod planning {}
    #[doc = include_str!("../../../book/src/surfaces.md")]
    mod surfaces {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
