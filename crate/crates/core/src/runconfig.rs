//! Run configuration file: one TOML document naming the scene, camera,
//! drives, material and solver constants for a command-line run.
//!
//! Relative paths are resolved against the directory of the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::camera::CameraSpec;
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::estimate::{load_material_table, EstimationConfig};
use crate::geometry::TrajectoryBundle;
use crate::material::MaterialParams;
use crate::motion::TrajectoryDrive;
use crate::prep::SceneBounds;
use crate::scene::{Particle, Scene};

/// Tissue density (kg/m³) when none is given.
pub const DEFAULT_DENSITY: f64 = 1.0e3;

/// Steps of a default run: eight seconds at `dt = 1e-4`.
pub const DEFAULT_STEPS: usize = 80_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationSection {
    #[serde(flatten)]
    pub config: SimConfig,
    pub steps: usize,
    pub density: f64,
    /// Rest volume per particle. When absent the bounding-box volume is
    /// shared equally among particles.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub particle_volume: Option<f64>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            config: SimConfig::default(),
            steps: DEFAULT_STEPS,
            density: DEFAULT_DENSITY,
            particle_volume: None,
        }
    }
}

/// Uniform material, or a per-cluster table written by `estimate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaterialSection {
    pub mu_e: f64,
    pub eta_v: f64,
    pub gamma_v: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
}

impl Default for MaterialSection {
    fn default() -> Self {
        let p = MaterialParams::default();
        MaterialSection { mu_e: p.mu_e, eta_v: p.eta_v, gamma_v: p.gamma_v, table: None }
    }
}

impl MaterialSection {
    pub fn params(&self) -> MaterialParams {
        MaterialParams::from_shear(self.mu_e, self.eta_v, self.gamma_v)
    }
}

/// One manipulation: a tracked point of a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    /// Trajectory table with columns `frame,point_id,x,y,z`.
    pub trajectory: PathBuf,
    /// Point to follow; the lowest id when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_id: Option<i64>,
    /// Region radius; the simulation default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Video frame at which the first trajectory sample applies.
    #[serde(default)]
    pub start_frame: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene: Option<PathBuf>,
    pub camera: CameraSpec,
    pub simulation: SimulationSection,
    pub material: MaterialSection,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub drive: Vec<DriveSpec>,
    pub estimation: EstimationConfig,
    /// Directory that relative paths refer to.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scene: None,
            camera: CameraSpec::default(),
            simulation: SimulationSection::default(),
            material: MaterialSection::default(),
            drive: Vec::new(),
            estimation: EstimationConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        cfg.base_dir = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        Ok(cfg)
    }

    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::parse(context, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.simulation.config.validate()?;
        self.estimation.validate()?;
        self.material.params().validate()?;
        self.camera.build()?;
        if !(self.simulation.density > 0.0) {
            return Err(Error::InvalidConfig("density must be positive".into()));
        }
        if self.simulation.particle_volume.is_some_and(|v| !(v > 0.0)) {
            return Err(Error::InvalidConfig("particle_volume must be positive".into()));
        }
        for d in &self.drive {
            if d.radius.is_some_and(|r| !(r > 0.0)) {
                return Err(Error::InvalidConfig("drive radius must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn sim(&self) -> &SimConfig {
        &self.simulation.config
    }

    /// Attaches mass, rest volume and material to loaded particles.
    pub fn build_scene(&self, particles: Vec<Particle>) -> Result<Scene> {
        if particles.is_empty() {
            return Err(Error::EmptyScene);
        }
        let n = particles.len();
        let volume = match self.simulation.particle_volume {
            Some(v) => v * n as f64,
            None => {
                let b = SceneBounds::of_particles(&particles)?;
                let e = b.extent();
                // Flat clouds get one grid cell of thickness along thin axes.
                let dx = self.sim().dx();
                e.x.max(dx) * e.y.max(dx) * e.z.max(dx)
            }
        };
        let mut scene = Scene::new(particles, self.material.params());
        scene.assign_uniform_mass(volume, self.simulation.density);
        if let Some(table) = &self.material.table {
            let (field, _) = load_material_table(&self.resolve(table))?;
            if field.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "material table covers {} particles, scene has {n}",
                    field.len()
                )));
            }
            scene.material = field;
        }
        Ok(scene)
    }

    /// Drives tagged against `particles` at time zero.
    pub fn drives(&self, particles: &[Particle]) -> Result<Vec<TrajectoryDrive>> {
        self.drive
            .iter()
            .map(|d| {
                let bundle = TrajectoryBundle::load(&self.resolve(&d.trajectory), 0)?;
                let index = match d.point_id {
                    None => 0,
                    Some(id) => bundle.point_ids.iter().position(|&p| p == id).ok_or_else(|| {
                        Error::InvalidConfig(format!(
                            "point {id} not in {}",
                            d.trajectory.display()
                        ))
                    })?,
                };
                let radius = d.radius.unwrap_or(self.sim().drive_radius);
                let traj = bundle.trajectory(index, radius)?;
                let offset = d.start_frame - traj.first_frame();
                TrajectoryDrive::new(traj.offset_frames(offset), particles)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfig::parse("", "test").unwrap();
        assert_eq!(cfg.simulation.steps, 80_000);
        assert_eq!(cfg.simulation.config, SimConfig::default());
        assert_eq!(cfg.estimation, EstimationConfig::default());
        assert_eq!(cfg.simulation.density, 1e3);
    }

    #[test]
    fn default_text_parses_back() {
        let text = RunConfig::default().to_toml();
        let back = RunConfig::parse(&text, "test").unwrap();
        assert_eq!(back, RunConfig::default());
    }

    #[test]
    fn nested_overrides() {
        let text = r#"
            [simulation]
            dt = 5e-5
            steps = 10
            [simulation.boundaries]
            x_min = "sticky"
            [material]
            mu_e = 500.0
            [estimation]
            window = 5
            [[drive]]
            trajectory = "t.csv"
            start_frame = 3
        "#;
        let cfg = RunConfig::parse(text, "test").unwrap();
        assert_eq!(cfg.simulation.config.dt, 5e-5);
        assert_eq!(cfg.simulation.config.grid_resolution, 50);
        assert_eq!(cfg.simulation.config.boundaries.x_min, crate::BoundaryCondition::Sticky);
        assert_eq!(cfg.material.mu_e, 500.0);
        assert_eq!(cfg.estimation.window, 5);
        assert_eq!(cfg.drive[0].start_frame, 3);
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(matches!(
            RunConfig::parse("[simulation]\ndt = -1.0", "test"),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(RunConfig::parse("[simulation\n", "test"), Err(Error::Parse { .. })));
    }

    #[test]
    fn drives_follow_the_chosen_point() {
        let dir = tempfile::tempdir().unwrap();
        let pts = vec![
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.5, 0.0, 0.0)],
            vec![Vec3::new(0.1, 0.0, 0.0), Vec3::new(0.5, 0.2, 0.0)],
        ];
        TrajectoryBundle::with_ids(vec![0, 1], vec![4, 9], pts, 1)
            .unwrap()
            .save(&dir.path().join("t.csv"))
            .unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "[[drive]]\ntrajectory = \"t.csv\"\npoint_id = 9\nradius = 0.05\nstart_frame = 2\n",
        )
        .unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        let particles = vec![Particle::at(Vec3::zeros()), Particle::at(Vec3::new(0.5, 0.01, 0.0))];
        let drives = cfg.drives(&particles).unwrap();
        assert_eq!(drives[0].tagged, vec![1]);
        assert_eq!(drives[0].trajectory.first_frame(), 2);
        assert!(drives[0].velocity_at(0.0, 0.04).is_none());
        let v = drives[0].velocity_at(0.09, 0.04).unwrap();
        assert!((v - Vec3::new(0.0, 5.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn scene_volume_comes_from_bounds() {
        let cfg = RunConfig::default();
        let ps = vec![Particle::at(Vec3::zeros()), Particle::at(Vec3::new(0.2, 0.4, 0.5))];
        let scene = cfg.build_scene(ps).unwrap();
        let total: f64 = scene.particles.iter().map(|p| p.volume0).sum();
        assert!((total - 0.04).abs() < 1e-12);
        assert!((scene.total_mass() - 40.0).abs() < 1e-9);
    }
}
