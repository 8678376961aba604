//! Point counting on three split singular del Pezzo surfaces and numerical
//! verification of the factors of their Peyre constants.

pub mod analytics;
pub mod arith;
pub mod checks;
pub mod montecarlo;
pub mod oracle;
pub mod peyre;
pub mod polytope;
pub mod surface;
pub mod torsor;

pub use surface::{ProjectivePoint, SurfaceId, SurfaceSpec};
