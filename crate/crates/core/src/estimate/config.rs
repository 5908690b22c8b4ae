use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::MaterialParams;

/// Closed interval for one parameter; searched on a log scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Bounds { lo, hi }
    }

    pub fn geometric_mean(&self) -> f64 {
        (self.lo * self.hi).sqrt()
    }

    pub fn clamp_log(&self, x: f64) -> f64 {
        x.clamp(self.lo.ln(), self.hi.ln())
    }
}

/// Indices into the estimated parameter vector `(μ_E, η_v, γ_v)`.
pub const MU: usize = 0;
pub const ETA: usize = 1;
pub const GAMMA: usize = 2;
pub const PARAM_NAMES: [&str; 3] = ["mu_e", "eta_v", "gamma_v"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimationConfig {
    /// Frames added per rolling round (`k`).
    pub window: usize,
    /// Number of rounds; by default enough to cover every observed frame.
    pub rounds: Option<usize>,
    /// Coordinate-descent sweeps per round, counting sweeps at a reduced
    /// probe step.
    pub sweeps: usize,
    pub mu_bounds: Bounds,
    pub eta_bounds: Bounds,
    pub gamma_bounds: Bounds,
    /// Relative finite-difference step at the start of a round; the log-space
    /// step is `ln(1 + fd_step)`, halved (down to an eighth) when a sweep stalls.
    pub fd_step: f64,
    /// Largest change of a log-parameter in one step.
    pub trust_radius: f64,
    pub lambda_tv: f64,
    /// Neighbours per particle for the smoothing term.
    pub tv_neighbors: usize,
    pub cluster_count: usize,
    /// Which of `(μ_E, η_v, γ_v)` are optimized; the rest keep `initial`.
    pub estimate: [bool; 3],
    /// Starting values; geometric means of the bounds when absent.
    pub initial: Option<[f64; 3]>,
    /// Cap on simulations; reaching it returns the best so far, flagged.
    pub max_simulations: Option<usize>,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            window: 25,
            rounds: None,
            sweeps: 10,
            mu_bounds: Bounds::new(1e2, 1e6),
            eta_bounds: Bounds::new(1e-2, 1e3),
            gamma_bounds: Bounds::new(1e-3, 1e2),
            fd_step: 0.05,
            trust_radius: 1.0,
            lambda_tv: 1e-3,
            tv_neighbors: 8,
            cluster_count: 2,
            estimate: [true; 3],
            initial: None,
            max_simulations: None,
        }
    }
}

impl EstimationConfig {
    pub fn bounds(&self) -> [Bounds; 3] {
        [self.mu_bounds, self.eta_bounds, self.gamma_bounds]
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.window < 1 {
            return fail("estimation window must be at least 1 frame".into());
        }
        if !(self.fd_step > 0.0 && self.fd_step < 0.5) {
            return fail(format!("fd_step {} outside (0, 0.5)", self.fd_step));
        }
        for (b, name) in self.bounds().iter().zip(PARAM_NAMES) {
            if !(b.lo > 0.0 && b.lo < b.hi && b.hi.is_finite()) {
                return fail(format!("{name} bounds must satisfy 0 < lo < hi"));
            }
        }
        if !(self.lambda_tv >= 0.0) {
            return fail("lambda_tv must be non-negative".into());
        }
        if !(self.trust_radius > 0.0) {
            return fail("trust_radius must be positive".into());
        }
        if self.cluster_count == 0 {
            return fail("cluster_count must be at least 1".into());
        }
        if self.rounds == Some(0) {
            return fail("rounds must be at least 1".into());
        }
        if let Some(init) = self.initial {
            for ((v, b), name) in init.iter().zip(self.bounds()).zip(PARAM_NAMES) {
                if !(*v >= b.lo && *v <= b.hi) {
                    return fail(format!("initial {name} {v} outside its bounds"));
                }
            }
        }
        Ok(())
    }

    pub fn initial_values(&self) -> [f64; 3] {
        self.initial.unwrap_or_else(|| self.bounds().map(|b| b.geometric_mean()))
    }

    /// Number of rounds needed to reach the last of `frames` observations.
    pub fn round_count(&self, frames: usize) -> usize {
        let needed = frames.saturating_sub(1).div_ceil(self.window).max(1);
        self.rounds.map_or(needed, |r| r.min(needed))
    }

    /// Frames (counting frame 0) covered by round `r` (1-based).
    pub fn window_frames(&self, round: usize, frames: usize) -> usize {
        (round * self.window + 1).min(frames)
    }
}

/// Material parameters from estimated `(μ_E, η_v, γ_v)`, `λ_E` tied to μ_E.
pub fn params_from_values(v: [f64; 3]) -> MaterialParams {
    MaterialParams::from_shear(v[MU], v[ETA], v[GAMMA])
}
