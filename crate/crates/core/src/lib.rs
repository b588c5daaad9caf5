//! Exact saddle connection toolkit for translation surfaces.

pub mod chew;
pub mod cli;
pub mod delaunay;
pub mod error;
pub mod exactplane;
pub mod geodesic;
pub mod mc;
pub mod oracle;
pub mod surface;
pub mod sv;

pub use error::{Error, Result};
