pub mod conformal;
pub mod config;
pub mod entropy;
pub mod error;
pub mod families;
pub mod geom;
pub mod hyp;
pub mod linalg;
pub mod quad;
pub mod report;
pub mod spectral;
pub mod surface;

pub use error::{Error, Result};
