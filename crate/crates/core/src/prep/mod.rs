//! Scene ingestion and preparation for simulation.

mod io;
mod knn;
mod normalize;
mod thicken;

pub use io::{decode_scene, encode_scene, load_scene, save_scene, DEFAULT_IMPORT_SCALE, SCENE_MAGIC, SCENE_VERSION};
pub use knn::{knn, KnnIndex};
pub use normalize::{denormalize, normalize, SceneBounds, Transform, NORMALIZED_SPAN};
pub use thicken::{keep_bounds, layer_rng, thicken, ThickenConfig, ThickenReport, ViewFrame};
