//! Software rasterizer for splat particles.

mod loss;
mod project;
mod raster;

pub use loss::{masked_l1, MaskedL1};
pub use project::{covariance_3d, project_splat, ProjectedSplat, ALPHA_MAX, ALPHA_MIN, COVARIANCE_FLOOR};
pub use raster::{pick, render, render_naive, sorted_splats, Hit, Rendered, TILE_SIZE, TRANSMITTANCE_MIN};
