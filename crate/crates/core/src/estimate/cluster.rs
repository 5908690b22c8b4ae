use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::prep::SceneBounds;

/// Spatially contiguous, count-balanced clusters.
///
/// Positions are binned into a uniform grid whose cells are ordered with
/// the longest axis most significant; the resulting particle sequence is
/// cut into `count` runs of near-equal size. Labels follow the smallest
/// particle index in each cluster.
pub fn cluster_particles(positions: &[Vec3], count: usize) -> Result<Vec<usize>> {
    let n = positions.len();
    if count == 0 || count > n {
        return Err(Error::InvalidConfig(format!("cannot form {count} clusters from {n} particles")));
    }
    let bounds = SceneBounds::of(positions.iter().copied())?;
    let extent = bounds.extent();
    let mut axes = [0usize, 1, 2];
    axes.sort_by(|&a, &b| extent[b].total_cmp(&extent[a]).then(a.cmp(&b)));
    let cells_per_axis = ((n as f64).cbrt().ceil() as usize).max(1) * 2;
    let key = |p: &Vec3| -> [usize; 3] {
        axes.map(|a| {
            if extent[a] > 0.0 {
                (((p[a] - bounds.min[a]) / extent[a] * cells_per_axis as f64) as usize).min(cells_per_axis - 1)
            } else {
                0
            }
        })
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (key(&positions[i]), i));
    let mut raw = vec![0usize; n];
    for (rank, &i) in order.iter().enumerate() {
        raw[i] = rank * count / n;
    }
    // Relabel by first appearance in index order.
    let mut map = vec![usize::MAX; count];
    let mut next = 0;
    Ok(raw
        .into_iter()
        .map(|c| {
            if map[c] == usize::MAX {
                map[c] = next;
                next += 1;
            }
            map[c]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blob(rng: &mut ChaCha8Rng, c: Vec3, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|_| c + Vec3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)))
            .collect()
    }

    #[test]
    fn one_cluster() {
        let pts = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        assert_eq!(cluster_particles(&pts, 1).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn separated_blobs_are_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // Interleave the blobs so labels cannot come from index order.
        let a = blob(&mut rng, Vec3::new(-0.6, 0.1, 0.0), 50);
        let b = blob(&mut rng, Vec3::new(0.6, -0.1, 0.2), 50);
        let pts: Vec<Vec3> = a.iter().zip(&b).flat_map(|(p, q)| [*q, *p]).collect();
        let labels = cluster_particles(&pts, 2).unwrap();
        assert!(labels.iter().step_by(2).all(|&l| l == labels[0]));
        assert!(labels.iter().skip(1).step_by(2).all(|&l| l == labels[1]));
        assert_ne!(labels[0], labels[1]);
        assert_eq!(labels[0], 0);
    }

    #[test]
    fn one_cluster_per_particle_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = blob(&mut rng, Vec3::zeros(), 40);
        assert_eq!(cluster_particles(&pts, 40).unwrap(), (0..40).collect::<Vec<_>>());
        assert!(cluster_particles(&pts, 41).is_err());
    }
}
