//! Pinhole camera.
//!
//! Camera space follows the computer-vision convention: x right, y down,
//! z forward. The pose is stored as the world-to-camera rotation and the
//! camera centre, so `x_cam = R (x − eye)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Mat3, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// World-to-camera rotation.
    pub rotation: Mat3,
    /// Camera centre in world coordinates.
    pub eye: Vec3,
    pub near: f64,
}

impl Camera {
    /// Camera at `eye` looking at `target`; `up` fixes the roll.
    pub fn look_at(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        focal: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let forward = target - eye;
        let right = (-up).cross(&forward);
        if forward.norm() < 1e-12 || right.norm() < 1e-12 * forward.norm() {
            return Err(Error::InvalidConfig(
                "camera target must differ from eye and not be parallel to up".into(),
            ));
        }
        let forward = forward.normalize();
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation = Mat3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let cam = Camera {
            fx: focal,
            fy: focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
            rotation,
            eye,
            near: 0.01,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidConfig("focal lengths must be positive".into()));
        }
        if !(self.near > 0.0) {
            return Err(Error::InvalidConfig("near plane must be positive".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig("image size must be non-zero".into()));
        }
        if (self.rotation.transpose() * self.rotation - Mat3::identity()).norm() > 1e-6
            || self.rotation.determinant() < 0.0
        {
            return Err(Error::InvalidConfig("camera rotation is not a rotation".into()));
        }
        Ok(())
    }

    pub fn to_camera(&self, x: &Vec3) -> Vec3 {
        self.rotation * (x - self.eye)
    }

    pub fn to_world(&self, x_cam: &Vec3) -> Vec3 {
        self.rotation.transpose() * x_cam + self.eye
    }

    /// World point seen at pixel coordinates `(u, v)` at camera depth `z`.
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Vec3 {
        let x_cam = Vec3::new((u - self.cx) / self.fx * z, (v - self.cy) / self.fy * z, z);
        self.to_world(&x_cam)
    }

    /// Top-down view of the simulation cube from `+z`.
    pub fn default_view() -> Self {
        Camera::look_at(
            Vec3::new(0.0, 0.0, 3.0),
            Vec3::zeros(),
            Vec3::y(),
            300.0,
            320,
            240,
        )
        .expect("default camera is valid")
    }
}

/// Serialized camera. The pose is either an explicit row-major rotation or
/// a look-at target with an up vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    #[serde(default)]
    pub cx: Option<f64>,
    #[serde(default)]
    pub cy: Option<f64>,
    #[serde(default = "default_near")]
    pub near: f64,
    pub eye: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub up: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<[[f64; 3]; 3]>,
}

fn default_near() -> f64 {
    0.01
}

impl Default for CameraSpec {
    fn default() -> Self {
        CameraSpec::from(&Camera::default_view())
    }
}

impl From<&Camera> for CameraSpec {
    fn from(c: &Camera) -> Self {
        CameraSpec {
            width: c.width,
            height: c.height,
            fx: c.fx,
            fy: c.fy,
            cx: Some(c.cx),
            cy: Some(c.cy),
            near: c.near,
            eye: c.eye.into(),
            target: None,
            up: None,
            rotation: Some(std::array::from_fn(|r| std::array::from_fn(|k| c.rotation[(r, k)]))),
        }
    }
}

impl CameraSpec {
    pub fn build(&self) -> Result<Camera> {
        let eye = Vec3::from(self.eye);
        let rotation = match (&self.rotation, &self.target) {
            (Some(r), None) => Mat3::from_fn(|i, j| r[i][j]),
            (None, Some(t)) => {
                let up = Vec3::from(self.up.unwrap_or([0.0, 1.0, 0.0]));
                Camera::look_at(eye, Vec3::from(*t), up, 1.0, 1, 1)?.rotation
            }
            _ => {
                return Err(Error::InvalidConfig(
                    "camera needs exactly one of `rotation` or `target`".into(),
                ))
            }
        };
        let cam = Camera {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx.unwrap_or(self.width as f64 / 2.0),
            cy: self.cy.unwrap_or(self.height as f64 / 2.0),
            width: self.width,
            height: self.height,
            rotation,
            eye,
            near: self.near,
        };
        cam.validate()?;
        Ok(cam)
    }
}
