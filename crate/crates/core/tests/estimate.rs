mod common;

use tissuesim::estimate::{estimate, simulate_and_render, EstimationConfig};
use tissuesim::observation::{ObservationSet, ObservedFrame};
use tissuesim::{Camera, Mask, MaterialParams, SimConfig, Trajectory, TrajectoryDrive, Vec3};

const FRAMES: usize = 9;

fn setup(true_mu: f64) -> (tissuesim::Scene, Vec<TrajectoryDrive>, ObservationSet) {
    let scene = common::block_scene(5);
    let start = Vec3::new(0.0, 0.0, -0.81);
    let pts = (0..=4).map(|f| (f, start + Vec3::z() * (0.015 * f as f64))).collect();
    let drives = vec![TrajectoryDrive::new(Trajectory::new(pts, 0.07).unwrap(), &scene.particles).unwrap()];
    let camera =
        Camera::look_at(Vec3::new(0.0, -2.5, -0.6), Vec3::new(0.0, 0.0, -0.87), Vec3::z(), 160.0, 48, 40).unwrap();
    let truth = [MaterialParams::from_shear(true_mu, 1.0, 0.0)];
    let images = simulate_and_render(&scene, &truth, &drives, FRAMES, &camera, &SimConfig::default()).unwrap();
    let frames = images
        .into_iter()
        .enumerate()
        .map(|(index, image)| ObservedFrame { index, image, mask: Mask::full(48, 40) })
        .collect();
    (scene, drives, ObservationSet::new(camera, frames).unwrap())
}

fn mu_only() -> EstimationConfig {
    EstimationConfig {
        window: 4,
        sweeps: 6,
        cluster_count: 1,
        estimate: [true, false, false],
        initial: Some([600.0, 1.0, 0.001]),
        ..EstimationConfig::default()
    }
}

#[test]
fn recovers_a_single_stiffness_with_monotone_rounds() {
    let (scene, drives, obs) = setup(2000.0);
    let result = estimate(&scene, &obs, &drives, &SimConfig::default(), &mu_only()).unwrap();
    assert_eq!(result.rounds.len(), 2);
    assert_eq!(result.rounds.last().unwrap().frames, FRAMES);
    for r in &result.rounds {
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]), "round {} trace {:?}", r.round, r.trace);
    }
    let mu = result.cluster_values[0][0];
    assert!((mu / 2000.0).ln().abs() < 0.1f64.ln_1p(), "mu {mu}");
    assert_eq!(result.cluster_values[0][1], 1.0);
    assert!(!result.budget_exhausted);
}

#[test]
fn budget_cap_returns_best_so_far() {
    let (scene, drives, obs) = setup(2000.0);
    let config = EstimationConfig { max_simulations: Some(4), ..mu_only() };
    let result = estimate(&scene, &obs, &drives, &SimConfig::default(), &config).unwrap();
    assert!(result.budget_exhausted);
    assert!(result.simulations <= 4);
    let first = &result.rounds[0].trace;
    assert!(result.cluster_values[0][0].is_finite());
    assert!(first.last().unwrap() <= &first[0]);
}
