//! Damage functions, their extensions and the variant matrix.

pub mod evaluate;
pub mod extensions;
pub mod functions;
pub mod params;
pub mod variant;

pub use evaluate::{DamageModel, LossField};
pub use extensions::{apply_persistence, downscale_global, regional_to_grid, update_rescale};
pub use functions::{dice2016, kompas_cell, kw_panel, rice_regional, weitzman_global, Quadratic, WeitzmanParams};
pub use params::{CalibrationFiles, DamageParams};
pub use variant::{DamageSpec, VariantId, DEFAULT_RHO};
