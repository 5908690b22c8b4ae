use crate::error::{Error, Result};
use crate::math::Vec3;

/// Time-stamped path of a manipulation point, one sample per video frame
/// index.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    frames: Vec<(i64, Vec3)>,
    pub start_point: Vec3,
    pub region_radius: f64,
}

impl Trajectory {
    /// The start point defaults to the first sample.
    pub fn new(frames: Vec<(i64, Vec3)>, region_radius: f64) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::InvalidConfig(
                "a trajectory needs at least 2 frames".into(),
            ));
        }
        if frames.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidConfig(
                "trajectory frame indices must be strictly increasing".into(),
            ));
        }
        if !(region_radius > 0.0) {
            return Err(Error::InvalidConfig("region radius must be positive".into()));
        }
        let start_point = frames[0].1;
        Ok(Trajectory {
            frames,
            start_point,
            region_radius,
        })
    }

    pub fn frames(&self) -> &[(i64, Vec3)] {
        &self.frames
    }

    pub fn first_frame(&self) -> i64 {
        self.frames[0].0
    }

    pub fn last_frame(&self) -> i64 {
        self.frames[self.frames.len() - 1].0
    }

    /// Shifts every frame index by `offset`.
    pub fn offset_frames(mut self, offset: i64) -> Self {
        for f in &mut self.frames {
            f.0 += offset;
        }
        self
    }

    /// Position at an integer frame; linear between samples, `None` outside
    /// the sampled range.
    pub fn point_at(&self, frame: i64) -> Option<Vec3> {
        if frame < self.first_frame() || frame > self.last_frame() {
            return None;
        }
        let idx = self.frames.partition_point(|(f, _)| *f < frame);
        let (f1, p1) = self.frames[idx];
        if f1 == frame {
            return Some(p1);
        }
        let (f0, p0) = self.frames[idx - 1];
        let s = (frame - f0) as f64 / (f1 - f0) as f64;
        Some(p0 + (p1 - p0) * s)
    }

    /// Net displacement between the first and last sample.
    pub fn net_displacement(&self) -> Vec3 {
        self.frames[self.frames.len() - 1].1 - self.frames[0].1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_short_or_unordered() {
        assert!(Trajectory::new(vec![(0, Vec3::zeros())], 0.1).is_err());
        assert!(Trajectory::new(vec![(1, Vec3::zeros()), (1, Vec3::zeros())], 0.1).is_err());
        assert!(Trajectory::new(vec![(2, Vec3::zeros()), (1, Vec3::zeros())], 0.1).is_err());
    }

    #[test]
    fn interpolates_between_sparse_samples() {
        let t = Trajectory::new(
            vec![(0, Vec3::zeros()), (4, Vec3::new(0.4, 0.0, 0.0))],
            0.1,
        )
        .unwrap();
        assert_eq!(t.point_at(2), Some(Vec3::new(0.2, 0.0, 0.0)));
        assert_eq!(t.point_at(5), None);
        assert_eq!(t.point_at(-1), None);
        assert_eq!(t.start_point, Vec3::zeros());
    }
}
