//! Quasihyperbolic distance fields and averaging-domain experiments on
//! rasterized planar and spatial domains.

pub mod error;
pub mod geom;
pub mod integrals;
pub mod io;
pub mod qh;
pub mod raster;
pub mod series;
pub mod tubes;
pub mod weights;
pub mod whitney;

pub use error::{Error, Result};

/// Library crate version, for embedding in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
