//! Visco-elastic material point method.
//!
//! One step runs particle-to-grid transfer, grid velocity update with drive
//! overrides and boundary conditions, grid-to-particle transfer, the
//! deformation update, advection, and the splat rotation update.

pub mod constitutive;
pub mod grid;
pub mod kernel;
pub mod stepper;
pub mod transfer;

pub use constitutive::{corotated_energy, corotated_piola, corotated_stress, viscous_stress, Inverted};
pub use grid::{Grid, GridNode, NodeBox};
pub use kernel::{bspline_weights, GridGeometry, Stencil};
pub use stepper::{
    frame_count, run, run_with, DriveInput, FrameEvent, Simulator, Snapshot, StepDiagnostics,
};
pub use transfer::{g2p, grid_update, p2g, update_deformation};
