//! Tracked-point bundles and their text table format.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::prep::knn;
use crate::trajectory::Trajectory;

/// `T × N` tracked positions with neighbour sets on frame 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBundle {
    pub frames: Vec<i64>,
    pub point_ids: Vec<i64>,
    /// `points[t][i]`.
    pub points: Vec<Vec<Vec3>>,
    pub neighbors: Vec<Vec<usize>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    frame: i64,
    point_id: i64,
    x: f64,
    y: f64,
    z: f64,
}

impl TrajectoryBundle {
    /// Builds a bundle with `k` neighbours per point, reduced to `N − 1`
    /// for tiny bundles.
    pub fn new(points: Vec<Vec<Vec3>>, k: usize) -> Result<Self> {
        let t = points.len();
        let n = points.first().map_or(0, Vec::len);
        Self::with_ids((0..t as i64).collect(), (0..n as i64).collect(), points, k)
    }

    pub fn with_ids(frames: Vec<i64>, point_ids: Vec<i64>, points: Vec<Vec<Vec3>>, k: usize) -> Result<Self> {
        if points.is_empty() || points[0].is_empty() {
            return Err(Error::InvalidConfig("bundle needs at least one frame and one point".into()));
        }
        let n = points[0].len();
        if points.iter().any(|f| f.len() != n) || frames.len() != points.len() || point_ids.len() != n {
            return Err(Error::DimensionMismatch("every frame must track the same points".into()));
        }
        let neighbors = if n < 2 || k == 0 {
            vec![Vec::new(); n]
        } else {
            knn(&points[0], k.min(n - 1))?
        };
        Ok(TrajectoryBundle { frames, point_ids, points, neighbors })
    }

    pub fn frame_count(&self) -> usize {
        self.points.len()
    }

    pub fn point_count(&self) -> usize {
        self.points[0].len()
    }

    /// `μ_i^t − μ_i^{t−1}`.
    pub fn displacement(&self, t: usize, i: usize) -> Vec3 {
        self.points[t][i] - self.points[t - 1][i]
    }

    /// Same neighbours, new positions.
    pub fn with_points(&self, points: Vec<Vec<Vec3>>) -> Self {
        TrajectoryBundle { points, ..self.clone() }
    }

    /// Path of one tracked point as a drive trajectory.
    pub fn trajectory(&self, index: usize, region_radius: f64) -> Result<Trajectory> {
        Trajectory::new(
            self.frames.iter().zip(&self.points).map(|(&f, pts)| (f, pts[index])).collect(),
            region_radius,
        )
    }

    pub fn load(path: &Path, k: usize) -> Result<Self> {
        if !path.exists() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        let ctx = path.display().to_string();
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let header = reader.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["frame", "point_id", "x", "y", "z"] {
            return Err(Error::parse(&ctx, "header must be `frame,point_id,x,y,z`"));
        }
        let mut rows = Vec::new();
        for (line, rec) in reader.deserialize::<Row>().enumerate() {
            let row = rec.map_err(|e| Error::parse(&ctx, format!("row {}: {e}", line + 1)))?;
            rows.push(row);
        }
        let frames: Vec<i64> = rows.iter().map(|r| r.frame).collect::<BTreeSet<_>>().into_iter().collect();
        let ids: Vec<i64> = rows.iter().map(|r| r.point_id).collect::<BTreeSet<_>>().into_iter().collect();
        let mut points = vec![vec![None; ids.len()]; frames.len()];
        for r in &rows {
            let t = frames.binary_search(&r.frame).unwrap();
            let i = ids.binary_search(&r.point_id).unwrap();
            if points[t][i].replace(Vec3::new(r.x, r.y, r.z)).is_some() {
                return Err(Error::parse(&ctx, format!("duplicate row for frame {} point {}", r.frame, r.point_id)));
            }
        }
        let points = points
            .into_iter()
            .enumerate()
            .map(|(t, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(i, p)| {
                        p.ok_or_else(|| Error::parse(&ctx, format!("frame {} lacks point {}", frames[t], ids[i])))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_ids(frames, ids, points, k)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for (t, frame) in self.points.iter().enumerate() {
            for (i, p) in frame.iter().enumerate() {
                w.serialize(Row { frame: self.frames[t], point_id: self.point_ids[i], x: p.x, y: p.y, z: p.z })?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        let pts = vec![
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.5, 0.25)],
            vec![Vec3::new(0.1, 0.0, 0.0), Vec3::new(1.0, 0.625, 0.25)],
        ];
        let b = TrajectoryBundle::with_ids(vec![3, 4], vec![7, 9], pts, 1).unwrap();
        b.save(&path).unwrap();
        assert_eq!(TrajectoryBundle::load(&path, 1).unwrap(), b);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("frame,point_id,x,y,z\n"));
    }

    #[test]
    fn missing_rows_and_headers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        std::fs::write(&path, "frame,point_id,x,y,z\n0,0,0,0,0\n0,1,1,0,0\n1,0,0,0,0\n").unwrap();
        assert!(TrajectoryBundle::load(&path, 1).unwrap_err().to_string().contains("lacks point 1"));
        std::fs::write(&path, "0,0,0,0,0\n").unwrap();
        assert!(TrajectoryBundle::load(&path, 1).is_err());
    }

    #[test]
    fn single_point_trajectory() {
        let b = TrajectoryBundle::with_ids(
            vec![0, 1, 2],
            vec![0],
            vec![vec![Vec3::zeros()], vec![Vec3::x()], vec![Vec3::x() * 2.0]],
            4,
        )
        .unwrap();
        assert!(b.neighbors[0].is_empty());
        let traj = b.trajectory(0, 0.1).unwrap();
        assert_eq!(traj.last_frame(), 2);
    }
}
