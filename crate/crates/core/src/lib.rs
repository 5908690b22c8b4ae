//! Visco-elastic MPM soft-tissue simulation with Gaussian-splat rendering
//! and photometric parameter estimation.

pub mod camera;
pub mod config;
pub mod error;
pub mod estimate;
pub mod geometry;
pub mod image;
pub mod material;
pub mod math;
pub mod motion;
pub mod mpm;
pub mod observation;
pub mod prep;
pub mod render;
pub mod runconfig;
pub mod scene;
pub mod service;
pub mod trajectory;

pub use camera::{Camera, CameraSpec};
pub use config::{BoundaryCondition, Boundaries, SimConfig};
pub use error::{Error, Result};
pub use geometry::{aniso_loss, refine_trajectories, traj_loss_paper, traj_loss_relative, TrajectoryBundle};
pub use image::{GrayImage, Mask, RgbImage};
pub use material::{lame_from_young_poisson, MaterialField, MaterialParams, TISSUE_POISSON_RATIO};
pub use math::{Mat3, Quat, Vec3};
pub use motion::{drive_velocity, select_region, TrajectoryDrive};
pub use mpm::{run, run_with, Simulator, Snapshot, StepDiagnostics};
pub use prep::{knn, load_scene, normalize, save_scene, thicken, SceneBounds, ThickenConfig, Transform};
pub use render::{masked_l1, pick, render, Rendered};
pub use runconfig::RunConfig;
pub use scene::{validate_scene, Particle, Scene, Violation};
pub use trajectory::Trajectory;
