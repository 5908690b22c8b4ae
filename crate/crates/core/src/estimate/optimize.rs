//! Rolling coordinate descent on log-parameters with finite differences
//! and pattern moves.

use std::cell::Cell;

use rayon::prelude::*;

use super::cluster::cluster_particles;
use super::config::{params_from_values, EstimationConfig};
use super::objective::{ClusterGraph, Problem};
use crate::error::{Error, Result};
use crate::material::{MaterialField, MaterialParams};
use crate::motion::TrajectoryDrive;
use crate::observation::ObservationSet;
use crate::prep::knn;
use crate::scene::Scene;
use crate::SimConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Frames in the window, counting frame 0.
    pub frames: usize,
    /// Loss after each accepted change in this round, starting with the
    /// loss of the incoming parameters on the new window.
    pub trace: Vec<f64>,
    /// Whether the post-round smoothing projection was kept.
    pub smoothed: bool,
}

impl RoundRecord {
    pub fn best_loss(&self) -> f64 {
        *self.trace.last().unwrap()
    }
}

#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub field: MaterialField,
    /// Estimated `(μ_E, η_v, γ_v)` per cluster.
    pub cluster_values: Vec<[f64; 3]>,
    pub cluster_params: Vec<MaterialParams>,
    pub rounds: Vec<RoundRecord>,
    pub simulations: usize,
    pub budget_exhausted: bool,
}

struct Budget {
    used: Cell<usize>,
    limit: Option<usize>,
}

impl Budget {
    fn take(&self, n: usize) -> bool {
        if self.limit.is_some_and(|l| self.used.get() + n > l) {
            return false;
        }
        self.used.set(self.used.get() + n);
        true
    }
}

/// Largest reduction of the probe distance below `fd_step`.
const MAX_REFINEMENT: f64 = 8.0;
/// Consecutive pattern moves tried after a productive sweep.
const MAX_PATTERN_MOVES: usize = 4;

enum Restart {
    Found(Vec<[f64; 3]>, f64),
    Infeasible,
    Exhausted,
}

/// Moves away from parameters whose simulation fails. Each free parameter
/// is shifted for all clusters at once by 1, 2 and 3 trust radii in both
/// directions; the first distance that yields any finite loss wins, ties
/// going to the earlier candidate.
fn restore_feasibility(
    x: &[[f64; 3]],
    config: &EstimationConfig,
    budget: &Budget,
    loss: &(dyn Fn(&[[f64; 3]]) -> f64 + Sync),
) -> Restart {
    let bounds = config.bounds();
    for k in 1..=3 {
        let shift = k as f64 * config.trust_radius;
        let mut candidates = Vec::new();
        for p in (0..3).filter(|&p| config.estimate[p]) {
            for sign in [-1.0, 1.0] {
                let y: Vec<[f64; 3]> = x
                    .iter()
                    .map(|v| {
                        let mut w = *v;
                        w[p] = bounds[p].clamp_log(v[p] + sign * shift);
                        w
                    })
                    .collect();
                if y.as_slice() != x && !candidates.contains(&y) {
                    candidates.push(y);
                }
            }
        }
        if candidates.is_empty() {
            return Restart::Infeasible;
        }
        if !budget.take(candidates.len()) {
            return Restart::Exhausted;
        }
        let losses: Vec<f64> = candidates.par_iter().map(|y| loss(y)).collect();
        let best = losses
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_finite())
            .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)));
        if let Some((i, &l)) = best {
            log::info!("moved to a simulable starting point (loss {l:.6})");
            return Restart::Found(candidates.swap_remove(i), l);
        }
    }
    Restart::Infeasible
}

/// Estimates per-cluster `(μ_E, η_v, γ_v)`. Round `r` fits the first
/// `r·k + 1` frames, starting where the previous round stopped; each round
/// ends with a smoothing projection across neighbouring clusters, kept only
/// if it does not raise the loss.
pub fn estimate(
    scene: &Scene,
    observations: &ObservationSet,
    drives: &[TrajectoryDrive],
    sim: &SimConfig,
    config: &EstimationConfig,
) -> Result<EstimateResult> {
    config.validate()?;
    sim.validate()?;
    if observations.is_empty() {
        return Err(Error::InvalidConfig("no observed frames".into()));
    }
    let positions: Vec<_> = scene.particles.iter().map(|p| p.position).collect();
    let clusters = cluster_particles(&positions, config.cluster_count)?;
    let mut base = scene.clone();
    base.material.set_clusters(clusters.clone(), config.cluster_count)?;
    let neighbors = if positions.len() > 1 {
        knn(&positions, config.tv_neighbors.min(positions.len() - 1))?
    } else {
        vec![Vec::new()]
    };
    let problem = Problem {
        scene: &base,
        sim,
        drives,
        observations,
        config,
        graph: ClusterGraph::new(&clusters, config.cluster_count, &neighbors),
    };
    let budget = Budget { used: Cell::new(0), limit: config.max_simulations };
    let bounds = config.bounds();
    let h_max = (1.0 + config.fd_step).ln();
    let mut x: Vec<[f64; 3]> = vec![config.initial_values().map(f64::ln); config.cluster_count];
    let mut rounds = Vec::new();
    let mut exhausted = false;

    'rounds: for round in 1..=config.round_count(observations.len()) {
        let frames = config.window_frames(round, observations.len());
        let loss = |v: &[[f64; 3]]| problem.window_loss(v, frames);
        // Candidates that are only compared against the current loss.
        let loss_below = |v: &[[f64; 3]], limit: f64| problem.window_loss_below(v, frames, limit);
        if !budget.take(1) {
            exhausted = true;
            break;
        }
        let mut f = loss(&x);
        let mut record = RoundRecord { round, frames, trace: vec![f], smoothed: false };
        if !f.is_finite() {
            match restore_feasibility(&x, config, &budget, &loss) {
                Restart::Found(xr, fr) => {
                    x = xr;
                    f = fr;
                    record.trace.push(f);
                }
                Restart::Infeasible => {
                    log::warn!("round {round}: no simulable parameters near the current point");
                    rounds.push(record);
                    continue 'rounds;
                }
                Restart::Exhausted => {
                    exhausted = true;
                    rounds.push(record);
                    break 'rounds;
                }
            }
        }
        // Probe distance; halved after a sweep without progress, so a
        // minimum narrower than the configured step is still resolved.
        let mut h = h_max;
        for _ in 0..config.sweeps {
            let sweep_start = x.clone();
            let mut improved = false;
            for c in 0..config.cluster_count {
                for p in (0..3).filter(|&p| config.estimate[p]) {
                    let b = bounds[p];
                    let at = |val: f64| {
                        let mut y = x.clone();
                        y[c][p] = b.clamp_log(val);
                        y
                    };
                    let x0 = x[c][p];
                    let (xp, xm) = (at(x0 + h), at(x0 - h));
                    let (hp, hm) = (xp[c][p] - x0, x0 - xm[c][p]);
                    if !budget.take(2) {
                        exhausted = true;
                        rounds.push(record);
                        break 'rounds;
                    }
                    let (fp, fm) = rayon::join(|| loss(&xp), || loss(&xm));
                    let mut best = (f, None::<Vec<[f64; 3]>>);
                    for (fc, xc) in [(fp, &xp), (fm, &xm)] {
                        if fc < best.0 {
                            best = (fc, Some(xc.clone()));
                        }
                    }
                    // Quadratic model through the three samples.
                    let step = if hp > 0.0 && hm > 0.0 && fp.is_finite() && fm.is_finite() {
                        let g = ((fp - f) / hp * hm + (f - fm) / hm * hp) / (hp + hm);
                        let curv = 2.0 * ((fp - f) / hp + (fm - f) / hm) / (hp + hm);
                        let raw = if curv > 0.0 { -g / curv } else { -g.signum() * config.trust_radius };
                        raw.clamp(-config.trust_radius, config.trust_radius)
                    } else if fp < f {
                        config.trust_radius
                    } else if fm < f {
                        -config.trust_radius
                    } else {
                        0.0
                    };
                    let mut delta = step;
                    for _ in 0..3 {
                        let cand = at(x0 + delta);
                        let moved = (cand[c][p] - x0).abs();
                        if moved <= h.min(hp.max(hm)) / 16.0 || moved == hp || moved == hm {
                            break;
                        }
                        if !budget.take(1) {
                            exhausted = true;
                            break;
                        }
                        let fc = loss_below(&cand, f);
                        if fc < best.0 {
                            best = (fc, Some(cand));
                            break;
                        }
                        if fc < f {
                            break;
                        }
                        delta *= 0.25;
                    }
                    if let (fb, Some(xb)) = best {
                        x = xb;
                        f = fb;
                        record.trace.push(f);
                        improved = true;
                    }
                    if exhausted {
                        rounds.push(record);
                        break 'rounds;
                    }
                }
            }
            if improved {
                // Pattern move: keep going along the sweep's net displacement
                // while that lowers the loss.
                let dir: Vec<[f64; 3]> =
                    x.iter().zip(&sweep_start).map(|(a, b)| [0, 1, 2].map(|p| a[p] - b[p])).collect();
                for _ in 0..MAX_PATTERN_MOVES {
                    let y: Vec<[f64; 3]> = x
                        .iter()
                        .zip(&dir)
                        .map(|(v, d)| [0, 1, 2].map(|p| bounds[p].clamp_log(v[p] + d[p])))
                        .collect();
                    if y == x {
                        break;
                    }
                    if !budget.take(1) {
                        exhausted = true;
                        rounds.push(record);
                        break 'rounds;
                    }
                    let fy = loss_below(&y, f);
                    if !(fy < f) {
                        break;
                    }
                    x = y;
                    f = fy;
                    record.trace.push(f);
                }
            } else {
                if h <= h_max / MAX_REFINEMENT {
                    break;
                }
                h *= 0.5;
            }
        }
        if config.cluster_count > 1 && config.lambda_tv > 0.0 {
            let mut y = x.clone();
            for p in 0..3 {
                let col: Vec<f64> = x.iter().map(|v| v[p]).collect();
                for (c, v) in problem.graph.project(&col, config.lambda_tv).into_iter().enumerate() {
                    y[c][p] = bounds[p].clamp_log(v);
                }
            }
            if y != x && budget.take(1) {
                let fy = loss(&y);
                if fy <= f {
                    x = y;
                    f = fy;
                    record.trace.push(f);
                    record.smoothed = true;
                }
            }
        }
        log::info!("round {round}: {frames} frames, loss {f:.6}");
        rounds.push(record);
    }

    let cluster_values: Vec<[f64; 3]> = x.iter().map(|v| v.map(f64::exp)).collect();
    let cluster_params: Vec<MaterialParams> = cluster_values.iter().map(|&v| params_from_values(v)).collect();
    let mut field = base.material.clone();
    field.apply_cluster_params(&cluster_params)?;
    if exhausted {
        log::warn!("simulation budget exhausted; returning the best parameters so far");
    }
    Ok(EstimateResult {
        field,
        cluster_values,
        cluster_params,
        rounds,
        simulations: budget.used.get(),
        budget_exhausted: exhausted,
    })
}
