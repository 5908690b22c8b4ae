//! Inverse estimation of per-cluster material parameters from observed
//! frames.

mod cluster;
mod config;
mod objective;
mod optimize;
mod table;

pub use cluster::cluster_particles;
pub use config::{params_from_values, Bounds, EstimationConfig, ETA, GAMMA, MU, PARAM_NAMES};
pub use objective::{simulate_and_render, tv_loss, ClusterGraph, Problem};
pub use optimize::{estimate, EstimateResult, RoundRecord};
pub use table::{cluster_map_path, load_material_table, save_material_table};
