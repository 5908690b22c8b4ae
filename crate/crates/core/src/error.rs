use std::path::PathBuf;

use crate::math::Vec3;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty scene")]
    EmptyScene,

    #[error("degenerate point cloud: zero extent")]
    DegenerateExtent,

    #[error("position {position:?} is too close to the domain edge for a full stencil")]
    StencilClipped { position: Vec3 },

    #[error("particle {particle}: stencil leaves the grid")]
    ParticleOutOfGrid { particle: usize },

    #[error("particle {particle}: non-finite state")]
    NonFinite { particle: usize },

    #[error("particle {particle}: inverted element (det = {det:e})")]
    InvertedElement { particle: usize, det: f64 },

    #[error("particle {particle}: velocity gradient too large for dt (dt*|grad v| = {value:.3})")]
    StabilityGuard { particle: usize, value: f64 },

    #[error("CFL violation: dt * max|v| = {travel:e} exceeds grid spacing {dx:e}")]
    Cfl { travel: f64, dx: f64 },

    #[error("simulation failed at step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("unsupported scene file version {0}")]
    UnsupportedVersion(u32),

    #[error("k = {k} must be smaller than the point count {n}")]
    KnnTooLarge { k: usize, n: usize },

    #[error("drive region is empty: the trajectory misses the tissue")]
    EmptyRegion,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("optimization diverged: {0}")]
    Divergence(String),

    #[error("no tissue under cursor")]
    NoTissue,

    #[error("unknown drag id {0}")]
    UnknownDrag(u64),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("image error: {0}")]
    Image(#[from] ::image::ImageError),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    /// True for errors caused by bad inputs rather than runtime failures.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::AtStep { source, .. } => source.is_validation(),
            Error::Domain(_)
            | Error::InvalidConfig(_)
            | Error::EmptyScene
            | Error::DegenerateExtent
            | Error::NotFound(_)
            | Error::Parse { .. }
            | Error::UnsupportedVersion(_)
            | Error::KnnTooLarge { .. }
            | Error::EmptyRegion
            | Error::DimensionMismatch(_) => true,
            _ => false,
        }
    }
}
