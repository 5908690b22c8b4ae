//! Trajectory and anisotropy regularizers, and trajectory refinement.

mod bundle;
mod loss;
mod refine;

pub use bundle::TrajectoryBundle;
pub use loss::{aniso_loss, traj_loss_paper, traj_loss_relative, DEFAULT_ANISOTROPY, DEFAULT_MAX_SCALE};
pub use refine::{noisy_translation_bundle, refine_objective, refine_trajectories, rmse, RefineConfig, Refined};
