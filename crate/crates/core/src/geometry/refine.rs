//! Trajectory refinement: fit tracked positions to observations while
//! pulling neighbouring displacements together.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bundle::TrajectoryBundle;
use super::loss::traj_loss_relative;
use crate::error::{Error, Result};
use crate::math::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    pub iterations: usize,
    pub lambda_data: f64,
    pub lambda_traj: f64,
    /// Halvings allowed per line search.
    pub max_backtracks: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig { iterations: 200, lambda_data: 1.0, lambda_traj: 0.1, max_backtracks: 40 }
    }
}

#[derive(Debug, Clone)]
pub struct Refined {
    pub bundle: TrajectoryBundle,
    /// Objective after each accepted step, starting with the initial value.
    pub objective: Vec<f64>,
}

/// `λ_data Σ‖X − O‖² + λ_traj Σ_t traj_loss_relative(X, t)`.
pub fn refine_objective(x: &TrajectoryBundle, observed: &TrajectoryBundle, cfg: &RefineConfig) -> f64 {
    let data: f64 = x
        .points
        .iter()
        .flatten()
        .zip(observed.points.iter().flatten())
        .map(|(a, b)| (a - b).norm_squared())
        .sum();
    let traj: f64 = if cfg.lambda_traj == 0.0 {
        0.0
    } else {
        (1..x.frame_count()).map(|t| traj_loss_relative(x, t)).sum()
    };
    cfg.lambda_data * data + cfg.lambda_traj * traj
}

fn gradient(x: &TrajectoryBundle, observed: &TrajectoryBundle, cfg: &RefineConfig) -> Vec<Vec<Vec3>> {
    let n = x.point_count();
    let mut g: Vec<Vec<Vec3>> = x
        .points
        .iter()
        .zip(&observed.points)
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q) * (2.0 * cfg.lambda_data)).collect())
        .collect();
    if cfg.lambda_traj == 0.0 {
        return g;
    }
    // Per set of size m: Σ_{j<k}‖Δ_j − Δ_k‖² = m Σ‖Δ_j‖² − ‖ΣΔ_j‖², whose
    // gradient in Δ_j is 2(m Δ_j − ΣΔ).
    let per_frame: Vec<Vec<Vec3>> = (1..x.frame_count())
        .into_par_iter()
        .map(|t| {
            let d: Vec<Vec3> = (0..n).map(|i| x.displacement(t, i)).collect();
            let mut gd = vec![Vec3::zeros(); n];
            for set in &x.neighbors {
                let m = set.len() as f64;
                let sum = set.iter().fold(Vec3::zeros(), |acc, &j| acc + d[j]);
                for &j in set {
                    gd[j] += (d[j] * m - sum) * (2.0 * cfg.lambda_traj);
                }
            }
            gd
        })
        .collect();
    for (t, gd) in per_frame.iter().enumerate().map(|(k, gd)| (k + 1, gd)) {
        for i in 0..n {
            g[t][i] += gd[i];
            g[t - 1][i] -= gd[i];
        }
    }
    g
}

/// Gradient descent with a backtracking (Armijo) line search. The objective
/// never increases between accepted steps.
pub fn refine_trajectories(observed: &TrajectoryBundle, cfg: &RefineConfig) -> Result<Refined> {
    if !(cfg.lambda_data >= 0.0 && cfg.lambda_traj >= 0.0) {
        return Err(Error::InvalidConfig("refinement weights must be non-negative".into()));
    }
    let mut x = observed.clone();
    let mut f = refine_objective(&x, observed, cfg);
    let mut trace = vec![f];
    let max_set = x.neighbors.iter().map(Vec::len).max().unwrap_or(0) as f64;
    // Inverse of a Lipschitz bound on the gradient.
    let lipschitz = 2.0 * cfg.lambda_data + 8.0 * cfg.lambda_traj * max_set * max_set.max(1.0);
    let mut step = if lipschitz > 0.0 { 1.0 / lipschitz } else { return Ok(Refined { bundle: x, objective: trace }) };
    for _ in 0..cfg.iterations {
        let g = gradient(&x, observed, cfg);
        let g2: f64 = g.iter().flatten().map(|v| v.norm_squared()).sum();
        if g2 <= 1e-24 * (1.0 + f) {
            break;
        }
        let mut accepted = false;
        for _ in 0..=cfg.max_backtracks {
            let cand = x.with_points(
                x.points
                    .iter()
                    .zip(&g)
                    .map(|(p, gp)| p.iter().zip(gp).map(|(a, b)| a - b * step).collect())
                    .collect(),
            );
            let fc = refine_objective(&cand, observed, cfg);
            if fc <= f - 1e-4 * step * g2 {
                x = cand;
                f = fc;
                trace.push(f);
                accepted = true;
                step *= 1.5;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // At the rounding floor the line search cannot make progress;
            // that is convergence, not divergence.
            if step * g2 <= 1e-12 * (1.0 + f) {
                break;
            }
            return Err(Error::Divergence(format!(
                "objective did not decrease after {} backtracks",
                cfg.max_backtracks
            )));
        }
    }
    Ok(Refined { bundle: x, objective: trace })
}

/// Root-mean-square distance between two bundles' positions.
pub fn rmse(a: &TrajectoryBundle, b: &TrajectoryBundle) -> f64 {
    let (sum, n) = a
        .points
        .iter()
        .flatten()
        .zip(b.points.iter().flatten())
        .fold((0.0, 0usize), |(s, n), (p, q)| (s + (p - q).norm_squared(), n + 1));
    (sum / n.max(1) as f64).sqrt()
}

/// Rigidly translating cluster with i.i.d. Gaussian noise; returns
/// `(ground truth, noisy)`.
pub fn noisy_translation_bundle(
    points: usize,
    frames: usize,
    velocity: Vec3,
    noise: f64,
    k: usize,
    seed: u64,
) -> Result<(TrajectoryBundle, TrajectoryBundle)> {
    use rand::SeedableRng;
    use rand_distr_free::normal;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<Vec3> = (0..points)
        .map(|_| Vec3::new(normal(&mut rng), normal(&mut rng), normal(&mut rng)) * 0.1)
        .collect();
    let truth: Vec<Vec<Vec3>> = (0..frames)
        .map(|t| base.iter().map(|p| p + velocity * t as f64).collect())
        .collect();
    let noisy: Vec<Vec<Vec3>> = truth
        .iter()
        .map(|f| {
            f.iter()
                .map(|p| p + Vec3::new(normal(&mut rng), normal(&mut rng), normal(&mut rng)) * noise)
                .collect()
        })
        .collect();
    let truth = TrajectoryBundle::new(truth, k)?;
    let noisy = truth.with_points(noisy);
    Ok((truth, noisy))
}

/// Standard normal samples without an extra distribution crate.
mod rand_distr_free {
    use rand::Rng;

    pub fn normal(rng: &mut impl Rng) -> f64 {
        // Box-Muller; u1 in (0, 1] keeps the log finite.
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
