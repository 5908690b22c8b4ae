//! Photometric window loss with total-variation smoothing.

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::material::MaterialParams;
use crate::motion::TrajectoryDrive;
use crate::mpm::run_with;
use crate::observation::ObservationSet;
use crate::render::{masked_l1, render};
use crate::scene::Scene;
use crate::SimConfig;

use super::config::{params_from_values, EstimationConfig};

/// Mean squared difference over directed neighbour pairs `(i, j ∈ N_i)`.
pub fn tv_loss(values: &[f64], neighbors: &[Vec<usize>]) -> f64 {
    let (mut sum, mut pairs) = (0.0, 0usize);
    for (i, set) in neighbors.iter().enumerate() {
        for &j in set {
            sum += (values[j] - values[i]).powi(2);
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        sum / pairs as f64
    }
}

/// Neighbour pairs aggregated by cluster, so the smoothing term of a
/// cluster-constant field costs `O(K²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterGraph {
    pub clusters: usize,
    /// Fraction of neighbour pairs running from cluster `a` to `b`, `[a * K + b]`.
    pub pair_fraction: Vec<f64>,
    /// Fraction of particles in each cluster.
    pub mass_fraction: Vec<f64>,
}

impl ClusterGraph {
    pub fn new(cluster_id: &[usize], clusters: usize, neighbors: &[Vec<usize>]) -> Self {
        let mut counts = vec![0usize; clusters * clusters];
        let mut pairs = 0usize;
        for (i, set) in neighbors.iter().enumerate() {
            for &j in set {
                counts[cluster_id[i] * clusters + cluster_id[j]] += 1;
                pairs += 1;
            }
        }
        let mut members = vec![0usize; clusters];
        for &c in cluster_id {
            members[c] += 1;
        }
        let n = cluster_id.len().max(1) as f64;
        ClusterGraph {
            clusters,
            pair_fraction: counts.iter().map(|&c| c as f64 / pairs.max(1) as f64).collect(),
            mass_fraction: members.iter().map(|&m| m as f64 / n).collect(),
        }
    }

    /// [`tv_loss`] of the per-particle field induced by `values[cluster]`.
    pub fn tv(&self, values: &[f64]) -> f64 {
        let k = self.clusters;
        let mut s = 0.0;
        for a in 0..k {
            for b in 0..k {
                s += self.pair_fraction[a * k + b] * (values[b] - values[a]).powi(2);
            }
        }
        s
    }

    /// Minimizer of `Σ_c m_c (y_c − x_c)² + λ · tv(y)`: a smoothing
    /// projection that tends to the weighted mean as `λ → ∞`.
    pub fn project(&self, values: &[f64], lambda: f64) -> Vec<f64> {
        let k = self.clusters;
        let mut a = nalgebra::DMatrix::<f64>::zeros(k, k);
        let mut rhs = nalgebra::DVector::<f64>::zeros(k);
        for c in 0..k {
            a[(c, c)] += self.mass_fraction[c];
            rhs[c] = self.mass_fraction[c] * values[c];
            for d in 0..k {
                let w = lambda * (self.pair_fraction[c * k + d] + self.pair_fraction[d * k + c]);
                if c != d {
                    a[(c, c)] += w;
                    a[(c, d)] -= w;
                }
            }
        }
        match a.lu().solve(&rhs) {
            Some(y) => y.iter().copied().collect(),
            None => values.to_vec(),
        }
    }
}

/// Runs the scene with one parameter set per cluster and renders `frames`
/// snapshots (frame 0 is the initial state).
pub fn simulate_and_render(
    scene: &Scene,
    per_cluster: &[MaterialParams],
    drives: &[TrajectoryDrive],
    frames: usize,
    camera: &Camera,
    sim: &SimConfig,
) -> Result<Vec<RgbImage>> {
    if frames == 0 {
        return Ok(Vec::new());
    }
    let mut work = scene.clone();
    work.material.apply_cluster_params(per_cluster)?;
    let stride = sim.frame_stride();
    let n_steps = (frames - 1) * stride + 1;
    let mut out = Vec::with_capacity(frames);
    run_with(&mut work, sim, drives, n_steps, stride, |e| {
        out.push(render(e.particles, camera).image);
        Ok(())
    })?;
    Ok(out)
}

/// Everything the window loss needs, fixed for one estimation run.
pub struct Problem<'a> {
    pub scene: &'a Scene,
    pub sim: &'a SimConfig,
    pub drives: &'a [TrajectoryDrive],
    pub observations: &'a ObservationSet,
    pub config: &'a EstimationConfig,
    pub graph: ClusterGraph,
}

impl<'a> Problem<'a> {
    /// Photometric sum over the first `frames` frames plus `λ_tv` times the
    /// smoothing term of each log-parameter. Simulation failures give an
    /// infinite loss.
    pub fn window_loss(&self, log_values: &[[f64; 3]], frames: usize) -> f64 {
        self.window_loss_below(log_values, frames, f64::INFINITY)
    }

    /// [`Problem::window_loss`] when that is below `limit`, infinity
    /// otherwise. The simulation stops as soon as the running sum reaches
    /// `limit`, which saves most of the cost of rejected candidates.
    pub fn window_loss_below(&self, log_values: &[[f64; 3]], frames: usize, limit: f64) -> f64 {
        let tv = self.config.lambda_tv * self.smoothing(log_values);
        match self.photometric_until(log_values, frames, |partial| partial + tv >= limit) {
            Ok(Some(v)) if v + tv < limit => v + tv,
            Ok(_) => f64::INFINITY,
            Err(e) => {
                log::debug!("candidate failed: {e}");
                f64::INFINITY
            }
        }
    }
    pub fn smoothing(&self, log_values: &[[f64; 3]]) -> f64 {
        (0..3)
            .map(|p| self.graph.tv(&log_values.iter().map(|v| v[p]).collect::<Vec<_>>()))
            .sum()
    }

    pub fn photometric(&self, log_values: &[[f64; 3]], frames: usize) -> Result<f64> {
        Ok(self.photometric_until(log_values, frames, |_| false)?.expect("never stopped"))
    }

    /// Photometric sum over the first `frames` frames, or `None` once
    /// `stop` accepts a partial sum.
    fn photometric_until(
        &self,
        log_values: &[[f64; 3]],
        frames: usize,
        stop: impl Fn(f64) -> bool,
    ) -> Result<Option<f64>> {
        let params: Vec<MaterialParams> = log_values.iter().map(|v| params_from_values(v.map(f64::exp))).collect();
        let frames = frames.min(self.observations.len());
        if frames == 0 {
            return Ok(Some(0.0));
        }
        let mut work = self.scene.clone();
        work.material.apply_cluster_params(&params)?;
        let stride = self.sim.frame_stride();
        let camera = &self.observations.camera;
        let mut total = 0.0;
        let mut stopped = false;
        let run = run_with(&mut work, self.sim, self.drives, (frames - 1) * stride + 1, stride, |e| {
            let obs = &self.observations.frames[e.frame];
            total += masked_l1(&render(e.particles, camera).image, &obs.image, &obs.mask)?.value;
            if stop(total) {
                stopped = true;
                // Any error ends the run; `stopped` tells it apart.
                return Err(Error::Divergence("stopped early".into()));
            }
            Ok(())
        });
        if stopped {
            return Ok(None);
        }
        run?;
        if !total.is_finite() {
            return Err(Error::Divergence("non-finite photometric loss".into()));
        }
        Ok(Some(total))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;
    use crate::prep::knn;

    #[test]
    fn tv_of_constant_field_is_zero() {
        let nb = vec![vec![1, 2], vec![0], vec![0, 1]];
        assert_eq!(tv_loss(&[3.0, 3.0, 3.0], &nb), 0.0);
    }

    #[test]
    fn tv_cross_cluster_pairs() {
        // Every pair joins a μ = 1 particle to a μ = 3 particle.
        let nb = vec![vec![1], vec![0], vec![3], vec![2]];
        assert_eq!(tv_loss(&[1.0, 3.0, 3.0, 1.0], &nb), 4.0);
    }

    #[test]
    fn cluster_graph_matches_particle_field() {
        let pts: Vec<Vec3> = (0..30).map(|i| Vec3::new(i as f64 * 0.1, (i % 3) as f64 * 0.05, 0.0)).collect();
        let ids: Vec<usize> = (0..30).map(|i| i / 10).collect();
        let nb = knn(&pts, 4).unwrap();
        let g = ClusterGraph::new(&ids, 3, &nb);
        let vals = [0.5, -1.0, 2.0];
        let field: Vec<f64> = ids.iter().map(|&c| vals[c]).collect();
        assert!((g.tv(&vals) - tv_loss(&field, &nb)).abs() < 1e-12);
    }

    #[test]
    fn projection_limits() {
        let pts: Vec<Vec3> = (0..20).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let ids: Vec<usize> = (0..20).map(|i| usize::from(i >= 8)).collect();
        let g = ClusterGraph::new(&ids, 2, &knn(&pts, 3).unwrap());
        assert_eq!(g.project(&[1.0, 5.0], 0.0), vec![1.0, 5.0]);
        let y = g.project(&[1.0, 5.0], 1e9);
        let mean = 0.4 * 1.0 + 0.6 * 5.0;
        assert!((y[0] - mean).abs() < 1e-6 && (y[1] - mean).abs() < 1e-6);
        let y = g.project(&[1.0, 5.0], 1.0);
        assert!(y[0] > 1.0 && y[1] < 5.0 && y[0] < y[1]);
    }
}
