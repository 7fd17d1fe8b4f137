pub mod dtn_engine;
pub mod experiments;
pub mod potentials;
pub mod radial;
pub mod special_functions;
pub mod spectral_gap;
pub mod sphere_basis;
pub mod xreal;

pub use xreal::XReal;
