pub mod linalg;
pub mod optics;
pub mod walk;
pub mod synthesis;
pub mod presets;
pub mod dispersion;
pub mod graphs;
pub mod analysis;
pub mod cli;
