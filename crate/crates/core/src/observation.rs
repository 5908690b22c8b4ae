//! Observed frames with masks and the camera that took them.
//!
//! On disk an observation set is a directory holding `camera.toml`,
//! `frame_NNNN.png` and, optionally, `mask_NNNN.png` for each frame (a
//! missing mask selects the whole image).

use std::path::Path;

use crate::camera::{Camera, CameraSpec};
use crate::error::{Error, Result};
use crate::image::{Mask, RgbImage};

pub const CAMERA_FILE: &str = "camera.toml";

#[derive(Debug, Clone, PartialEq)]
pub struct ObservedFrame {
    pub index: usize,
    pub image: RgbImage,
    pub mask: Mask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub camera: Camera,
    /// Sorted by frame index; indices are contiguous from 0.
    pub frames: Vec<ObservedFrame>,
}

pub fn frame_file(index: usize) -> String {
    format!("frame_{index:04}.png")
}

pub fn mask_file(index: usize) -> String {
    format!("mask_{index:04}.png")
}

impl ObservationSet {
    pub fn new(camera: Camera, frames: Vec<ObservedFrame>) -> Result<Self> {
        for (k, f) in frames.iter().enumerate() {
            if f.index != k {
                return Err(Error::InvalidConfig(format!("observation frames must be numbered 0.., found {} at {k}", f.index)));
            }
            let dims = (camera.width, camera.height);
            if (f.image.width, f.image.height) != dims || (f.mask.width, f.mask.height) != dims {
                return Err(Error::DimensionMismatch(format!(
                    "frame {} is {}x{} (mask {}x{}), camera is {}x{}",
                    f.index, f.image.width, f.image.height, f.mask.width, f.mask.height, dims.0, dims.1
                )));
            }
        }
        Ok(ObservationSet { camera, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let cam_path = dir.join(CAMERA_FILE);
        if !cam_path.exists() {
            return Err(Error::NotFound(cam_path));
        }
        let text = std::fs::read_to_string(&cam_path)?;
        let spec: CameraSpec = toml::from_str(&text).map_err(|e| Error::parse(cam_path.display().to_string(), e))?;
        let camera = spec.build()?;
        let mut frames = Vec::new();
        loop {
            let img_path = dir.join(frame_file(frames.len()));
            if !img_path.exists() {
                break;
            }
            let image = RgbImage::load_png(&img_path)?;
            let mask_path = dir.join(mask_file(frames.len()));
            let mask = if mask_path.exists() {
                Mask::load_png(&mask_path)?
            } else {
                Mask::full(image.width, image.height)
            };
            frames.push(ObservedFrame { index: frames.len(), image, mask });
        }
        if frames.is_empty() {
            return Err(Error::NotFound(dir.join(frame_file(0))));
        }
        Self::new(camera, frames)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let spec = CameraSpec::from(&self.camera);
        let text = toml::to_string(&spec).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        std::fs::write(dir.join(CAMERA_FILE), text)?;
        for f in &self.frames {
            f.image.save_png(&dir.join(frame_file(f.index)))?;
            f.mask.save_png(&dir.join(mask_file(f.index)))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cam = Camera::look_at(
            crate::math::Vec3::new(0.0, 0.0, 3.0),
            crate::math::Vec3::zeros(),
            crate::math::Vec3::y(),
            40.0,
            8,
            6,
        )
        .unwrap();
        let mut img = RgbImage::new(8, 6);
        img.set(2, 3, [1.0, 0.0, 0.2]);
        let mut mask = Mask::full(8, 6);
        mask.data[0] = false;
        let set = ObservationSet::new(
            cam,
            vec![
                ObservedFrame { index: 0, image: img.clone(), mask: mask.clone() },
                ObservedFrame { index: 1, image: RgbImage::new(8, 6), mask },
            ],
        )
        .unwrap();
        set.save(dir.path()).unwrap();
        let back = ObservationSet::load(dir.path()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.frames[0].mask, set.frames[0].mask);
        assert_eq!(back.frames[0].image.to_png8(), img.to_png8());
        assert!((back.camera.rotation - set.camera.rotation).norm() < 1e-12);
    }

    #[test]
    fn missing_camera_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(ObservationSet::load(dir.path()), Err(Error::NotFound(_))));
    }
}
