//! State of one interactive session. Everything here is synchronous; the
//! worker thread owns a [`Session`] and feeds it messages and frame ticks.

use std::collections::BTreeMap;
use std::time::Instant;

use base64::Engine;

use super::protocol::{
    ClientMessage, ClusterParams, ParamRanges, RunStatus, ServerMessage, PROTOCOL_VERSION,
};
use crate::camera::{Camera, CameraSpec};
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::estimate::{Bounds, EstimationConfig};
use crate::material::MaterialParams;
use crate::math::Vec3;
use crate::motion::select_region;
use crate::mpm::{DriveInput, Simulator};
use crate::prep::SceneBounds;
use crate::render::{pick, render};
use crate::scene::{validate_scene, Scene};

/// Shortest and longest interval between drag moves used for the drive
/// velocity (s).
pub const DRAG_INTERVAL_MIN: f64 = 1.0 / 120.0;
pub const DRAG_INTERVAL_MAX: f64 = 1.0 / 5.0;

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub camera: Camera,
    pub sim: SimConfig,
    /// Target frame rate of the stream.
    pub fps: f64,
    /// Most simulation steps taken between two frames.
    pub max_steps_per_frame: usize,
    /// Share of the frame interval spent stepping; the rest is left for
    /// rendering and messages.
    pub step_budget: f64,
    pub drag_radius: f64,
    /// Accepted `(μ_E, η_v, γ_v)` ranges for `set_params`.
    pub ranges: [Bounds; 3],
}

impl Default for SessionConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        SessionConfig {
            camera: Camera::default_view(),
            fps: 10.0,
            max_steps_per_frame: sim.frame_stride(),
            step_budget: 0.5,
            drag_radius: sim.drive_radius,
            ranges: EstimationConfig::default().bounds(),
            sim,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.camera.validate()?;
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::InvalidConfig("fps must be positive".into()));
        }
        if self.max_steps_per_frame == 0 {
            return Err(Error::InvalidConfig("max_steps_per_frame must be positive".into()));
        }
        if !(self.step_budget > 0.0 && self.step_budget <= 1.0) {
            return Err(Error::InvalidConfig("step_budget must be in (0, 1]".into()));
        }
        if !(self.drag_radius > 0.0) {
            return Err(Error::InvalidConfig("drag_radius must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Drag {
    tagged: Vec<usize>,
    /// Camera depth at which cursor pixels are lifted to 3D.
    depth: f64,
    /// Last cursor point in world space.
    target: Vec3,
    velocity: Vec3,
    /// Simulation time left at `velocity`; afterwards the grip holds still.
    remaining: f64,
    /// Wall time of the last start or move.
    last_event: f64,
}

#[derive(Debug, Clone)]
pub struct Session {
    config: SessionConfig,
    initial: Scene,
    scene: Scene,
    sim: Simulator,
    status: RunStatus,
    drags: BTreeMap<u64, Drag>,
    next_drag: u64,
    frames_sent: u64,
}

impl Session {
    pub fn new(scene: Scene, config: SessionConfig) -> Result<Self> {
        config.validate()?;
        if let Some(v) = validate_scene(&scene, &config.sim).first() {
            return Err(Error::InvalidConfig(format!("scene rejected: {v}")));
        }
        Ok(Session {
            sim: Simulator::new(config.sim.clone())?,
            initial: scene.clone(),
            scene,
            config,
            status: RunStatus::Paused,
            drags: BTreeMap::new(),
            next_drag: 1,
            frames_sent: 0,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn status(&self) -> RunStatus {
        self.status
    }

    pub fn sim_time(&self) -> f64 {
        self.sim.time()
    }

    /// Current drive velocity of a drag, zero once its last move has been
    /// played out.
    pub fn drag_velocity(&self, drag_id: u64) -> Option<Vec3> {
        self.drags
            .get(&drag_id)
            .map(|d| if d.remaining > 0.0 { d.velocity } else { Vec3::zeros() })
    }

    pub fn hello(&self) -> ServerMessage {
        let bounds = SceneBounds::of_particles(&self.scene.particles).ok();
        let [mu, eta, gamma] = self.config.ranges;
        ServerMessage::Hello {
            protocol: PROTOCOL_VERSION,
            bounds_min: bounds.as_ref().map_or([0.0; 3], |b| b.min.into()),
            bounds_max: bounds.as_ref().map_or([0.0; 3], |b| b.max.into()),
            camera: CameraSpec::from(&self.config.camera),
            particles: self.scene.len(),
            clusters: self.cluster_params(),
            ranges: ParamRanges {
                mu_e: [mu.lo, mu.hi],
                eta_v: [eta.lo, eta.hi],
                gamma_v: [gamma.lo, gamma.hi],
            },
            fps: self.config.fps,
            drag_radius: self.config.drag_radius,
            status: self.status,
        }
    }

    /// Parameters of the first particle of each cluster.
    fn cluster_params(&self) -> Vec<ClusterParams> {
        let m = &self.scene.material;
        (0..m.cluster_count)
            .filter_map(|c| {
                let i = m.cluster_id.iter().position(|&id| id == c)?;
                let p = &m.params[i];
                Some(ClusterParams { cluster: c, mu_e: p.mu_e, eta_v: p.eta_v, gamma_v: p.gamma_v })
            })
            .collect()
    }

    /// Applies one client message at wall-clock time `wall` (seconds, any
    /// fixed origin). Failures become error responses and leave the session
    /// as it was.
    pub fn handle(&mut self, msg: ClientMessage, wall: f64) -> Vec<ServerMessage> {
        let kind = msg.kind();
        match self.apply(msg, wall) {
            Ok(out) => out,
            Err(e) => vec![ServerMessage::error(e, Some(kind))],
        }
    }

    fn ack(&self, request: &str) -> ServerMessage {
        ServerMessage::Ack { request: request.into(), status: self.status }
    }

    fn apply(&mut self, msg: ClientMessage, wall: f64) -> Result<Vec<ServerMessage>> {
        match msg {
            ClientMessage::Hello { protocol } => {
                if protocol != PROTOCOL_VERSION {
                    return Err(Error::Protocol(format!(
                        "unsupported protocol version {protocol}; server speaks {PROTOCOL_VERSION}"
                    )));
                }
                Ok(vec![self.hello()])
            }
            ClientMessage::Start => {
                self.status = RunStatus::Running;
                Ok(vec![self.ack("start")])
            }
            ClientMessage::Pause => {
                self.status = RunStatus::Paused;
                Ok(vec![self.ack("pause")])
            }
            ClientMessage::Reset => {
                self.restore();
                Ok(vec![self.ack("reset"), self.frame()?])
            }
            ClientMessage::SetParams { cluster, mu_e, eta_v, gamma_v } => {
                self.set_params(cluster, [mu_e, eta_v, gamma_v])?;
                Ok(vec![self.ack("set_params")])
            }
            ClientMessage::DragStart { x, y, radius } => {
                let (drag_id, point, tagged) = self.start_drag(x, y, radius, wall)?;
                Ok(vec![ServerMessage::DragStarted { drag_id, point: point.into(), tagged }])
            }
            ClientMessage::DragMove { drag_id, x, y } => {
                self.move_drag(drag_id, x, y, wall)?;
                Ok(Vec::new())
            }
            ClientMessage::DragEnd { drag_id } => {
                self.drags.remove(&drag_id).ok_or(Error::UnknownDrag(drag_id))?;
                Ok(vec![self.ack("drag_end")])
            }
        }
    }

    fn restore(&mut self) {
        self.scene = self.initial.clone();
        self.sim = Simulator::new(self.config.sim.clone()).expect("config validated at start");
        self.drags.clear();
    }

    fn set_params(&mut self, cluster: usize, values: [Option<f64>; 3]) -> Result<()> {
        let m = &self.scene.material;
        if cluster >= m.cluster_count {
            return Err(Error::InvalidConfig(format!(
                "cluster {cluster} out of range ({} clusters)",
                m.cluster_count
            )));
        }
        for ((v, b), name) in values.iter().zip(self.config.ranges).zip(["mu_e", "eta_v", "gamma_v"]) {
            if let Some(v) = v {
                if !(*v >= b.lo && *v <= b.hi) {
                    return Err(Error::InvalidConfig(format!(
                        "{name} = {v} outside [{}, {}]",
                        b.lo, b.hi
                    )));
                }
            }
        }
        let m = &mut self.scene.material;
        for (p, _) in m.params.iter_mut().zip(&m.cluster_id).filter(|(_, &c)| c == cluster) {
            *p = MaterialParams::from_shear(
                values[0].unwrap_or(p.mu_e),
                values[1].unwrap_or(p.eta_v),
                values[2].unwrap_or(p.gamma_v),
            );
        }
        Ok(())
    }

    fn start_drag(&mut self, x: f64, y: f64, radius: Option<f64>, wall: f64) -> Result<(u64, Vec3, usize)> {
        let radius = radius.unwrap_or(self.config.drag_radius);
        if !(radius > 0.0) {
            return Err(Error::InvalidConfig("drag radius must be positive".into()));
        }
        let cam = &self.config.camera;
        let hit = pick(&self.scene.particles, cam, x, y).ok_or(Error::NoTissue)?;
        let mut tagged = select_region(&self.scene.particles, &hit.point, radius).unwrap_or_default();
        if !tagged.contains(&hit.index) {
            tagged.push(hit.index);
            tagged.sort_unstable();
        }
        let id = self.next_drag;
        self.next_drag += 1;
        let count = tagged.len();
        self.drags.insert(
            id,
            Drag {
                tagged,
                depth: hit.depth,
                target: cam.unproject(x, y, hit.depth),
                velocity: Vec3::zeros(),
                remaining: 0.0,
                last_event: wall,
            },
        );
        Ok((id, hit.point, count))
    }

    /// The grip moves from the previous cursor point to the new one over
    /// the wall interval between the two events, clamped to a sane range.
    fn move_drag(&mut self, id: u64, x: f64, y: f64, wall: f64) -> Result<()> {
        let cam = &self.config.camera;
        let d = self.drags.get_mut(&id).ok_or(Error::UnknownDrag(id))?;
        let interval = (wall - d.last_event).clamp(DRAG_INTERVAL_MIN, DRAG_INTERVAL_MAX);
        let target = cam.unproject(x, y, d.depth);
        d.velocity = (target - d.target) / interval;
        d.remaining = interval;
        d.target = target;
        d.last_event = wall;
        Ok(())
    }

    /// Steps until `max_steps` are done or `deadline` passes (at least one
    /// step). A failed step restores the state from before the call and
    /// pauses the session.
    pub fn advance(&mut self, max_steps: usize, deadline: Option<Instant>) -> Result<usize> {
        let backup = (self.scene.clone(), self.sim.clone(), self.drags.clone());
        let dt = self.config.sim.dt;
        let mut taken = 0;
        while taken < max_steps {
            let velocities: Vec<Vec3> = self
                .drags
                .values_mut()
                .map(|d| {
                    if d.remaining > 0.0 {
                        d.remaining -= dt;
                        d.velocity
                    } else {
                        Vec3::zeros()
                    }
                })
                .collect();
            let inputs: Vec<DriveInput> = self
                .drags
                .values()
                .zip(&velocities)
                .map(|(d, v)| DriveInput { tagged: &d.tagged, velocity: Some(*v) })
                .collect();
            if let Err(e) = self.sim.step(&mut self.scene, &inputs) {
                (self.scene, self.sim, self.drags) = backup;
                self.status = RunStatus::Paused;
                return Err(e);
            }
            taken += 1;
            if deadline.is_some_and(|d| Instant::now() >= d) {
                break;
            }
        }
        Ok(taken)
    }

    /// Renders the current state as a frame message.
    pub fn frame(&mut self) -> Result<ServerMessage> {
        let cam = &self.config.camera;
        let png = render(&self.scene.particles, cam).image.encode_png()?;
        let index = self.frames_sent;
        self.frames_sent += 1;
        Ok(ServerMessage::Frame {
            index,
            sim_time: self.sim.time(),
            width: cam.width,
            height: cam.height,
            png: base64::engine::general_purpose::STANDARD.encode(png),
        })
    }

    /// One frame period of a running session: step within the budget, then
    /// render. Paused sessions produce nothing.
    pub fn tick(&mut self, deadline: Option<Instant>) -> Vec<ServerMessage> {
        if self.status != RunStatus::Running {
            return Vec::new();
        }
        let result = self
            .advance(self.config.max_steps_per_frame, deadline)
            .map_err(|e| Error::Domain(format!("simulation stopped: {e}")))
            .and_then(|_| self.frame());
        match result {
            Ok(frame) => vec![frame],
            Err(e) => {
                self.status = RunStatus::Paused;
                vec![ServerMessage::error(e, None)]
            }
        }
    }
}
