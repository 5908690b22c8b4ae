//! k-nearest-neighbour queries on a uniform cell grid.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Points bucketed into cubic cells, cell contents in ascending index order.
pub struct KnnIndex<'a> {
    points: &'a [Vec3],
    origin: Vec3,
    cell: f64,
    dims: [usize; 3],
    starts: Vec<usize>,
    entries: Vec<usize>,
}

impl<'a> KnnIndex<'a> {
    /// Cell size targets about two points per cell.
    pub fn new(points: &'a [Vec3]) -> Self {
        let (mut lo, mut hi) = (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY));
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        if points.is_empty() {
            lo = Vec3::zeros();
            hi = Vec3::zeros();
        }
        let extent = hi - lo;
        let n = points.len().max(1) as f64;
        let longest = extent.max();
        // Volume of the box, with flat axes given a nominal thickness so
        // planar and linear clouds still get several points per cell.
        let thick = extent.map(|e| e.max(longest * 1e-3).max(1e-12));
        let mut cell = (thick.x * thick.y * thick.z * 2.0 / n).cbrt();
        if !(cell > 0.0) || !cell.is_finite() {
            cell = 1.0;
        }
        let mut dims = [0usize; 3];
        loop {
            for k in 0..3 {
                dims[k] = ((extent[k] / cell).floor() as usize + 1).max(1);
            }
            if dims.iter().product::<usize>() <= 4 * points.len() + 8 {
                break;
            }
            cell *= 1.5;
        }
        let mut index = KnnIndex {
            points,
            origin: lo,
            cell,
            dims,
            starts: Vec::new(),
            entries: Vec::new(),
        };
        let cells: Vec<usize> = points.iter().map(|p| index.flat(index.cell_of(p))).collect();
        let total = dims.iter().product::<usize>();
        let mut starts = vec![0usize; total + 1];
        for &c in &cells {
            starts[c + 1] += 1;
        }
        for c in 0..total {
            starts[c + 1] += starts[c];
        }
        let mut fill = starts.clone();
        let mut entries = vec![0usize; points.len()];
        for (i, &c) in cells.iter().enumerate() {
            entries[fill[c]] = i;
            fill[c] += 1;
        }
        index.starts = starts;
        index.entries = entries;
        index
    }

    fn cell_of(&self, p: &Vec3) -> [usize; 3] {
        std::array::from_fn(|k| {
            let c = ((p[k] - self.origin[k]) / self.cell).floor();
            (c.max(0.0) as usize).min(self.dims[k] - 1)
        })
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    /// The `k` nearest points to point `i` (excluding `i`), nearest first,
    /// ties broken by lower index.
    pub fn neighbors(&self, i: usize, k: usize) -> Vec<usize> {
        self.query(&self.points[i], k, Some(i))
    }

    /// The `k` nearest points to `q`, optionally excluding one index.
    pub fn query(&self, q: &Vec3, k: usize, exclude: Option<usize>) -> Vec<usize> {
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if k == 0 {
            return Vec::new();
        }
        let c = self.cell_of(q);
        let max_ring = *self.dims.iter().max().unwrap();
        for r in 0..=max_ring {
            let lo: [i64; 3] = std::array::from_fn(|a| c[a] as i64 - r as i64);
            let hi: [i64; 3] = std::array::from_fn(|a| c[a] as i64 + r as i64);
            for x in lo[0].max(0)..=hi[0].min(self.dims[0] as i64 - 1) {
                for y in lo[1].max(0)..=hi[1].min(self.dims[1] as i64 - 1) {
                    for z in lo[2].max(0)..=hi[2].min(self.dims[2] as i64 - 1) {
                        let on_shell = x == lo[0] || x == hi[0] || y == lo[1] || y == hi[1] || z == lo[2] || z == hi[2];
                        if !on_shell {
                            continue;
                        }
                        let cell = self.flat([x as usize, y as usize, z as usize]);
                        for &j in &self.entries[self.starts[cell]..self.starts[cell + 1]] {
                            if Some(j) == exclude {
                                continue;
                            }
                            let d = (self.points[j] - q).norm_squared();
                            insert(&mut best, k, (d, j));
                        }
                    }
                }
            }
            // Anything outside ring r is at least r cells away (the query
            // may sit anywhere in its own cell).
            if best.len() == k {
                let reach = r as f64 * self.cell;
                if best[k - 1].0 < reach * reach {
                    break;
                }
            }
        }
        best.into_iter().map(|(_, j)| j).collect()
    }
}

fn insert(best: &mut Vec<(f64, usize)>, k: usize, cand: (f64, usize)) {
    let less = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).is_lt();
    if best.len() == k && !less(&cand, &best[k - 1]) {
        return;
    }
    let pos = best.partition_point(|e| less(e, &cand));
    best.insert(pos, cand);
    best.truncate(k);
}

/// Neighbour sets for every point.
pub fn knn(points: &[Vec3], k: usize) -> Result<Vec<Vec<usize>>> {
    if k >= points.len() {
        return Err(Error::KnnTooLarge { k, n: points.len() });
    }
    let index = KnnIndex::new(points);
    Ok((0..points.len()).into_par_iter().map(|i| index.neighbors(i, k)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[Vec3], k: usize) -> Vec<Vec<usize>> {
        (0..points.len())
            .map(|i| {
                let mut all: Vec<(f64, usize)> = (0..points.len())
                    .filter(|&j| j != i)
                    .map(|j| ((points[j] - points[i]).norm_squared(), j))
                    .collect();
                all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                all.into_iter().take(k).map(|(_, j)| j).collect()
            })
            .collect()
    }

    #[test]
    fn collinear_middle() {
        let pts = [Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(3.0, 0.0, 0.0)];
        assert_eq!(knn(&pts, 1).unwrap()[1], vec![0]);
    }

    #[test]
    fn random_cloud_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vec3> = (0..200).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect();
        assert_eq!(knn(&pts, 8).unwrap(), brute(&pts, 8));
    }

    #[test]
    fn duplicates_break_ties_by_index() {
        let pts = vec![Vec3::zeros(); 5];
        let n = knn(&pts, 3).unwrap();
        assert_eq!(n[0], vec![1, 2, 3]);
        assert_eq!(n[2], vec![0, 1, 3]);
    }

    #[test]
    fn k_too_large() {
        assert!(matches!(knn(&[Vec3::zeros(); 3], 3), Err(Error::KnnTooLarge { k: 3, n: 3 })));
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            pts in proptest::collection::vec(proptest::array::uniform3(-2.0f64..2.0), 2..80),
            k in 1usize..10,
            flat in any::<bool>(),
        ) {
            let mut pts: Vec<Vec3> = pts.into_iter().map(Vec3::from).collect();
            if flat {
                pts.iter_mut().for_each(|p| p.z = 0.0);
            }
            let k = k.min(pts.len() - 1);
            prop_assert_eq!(knn(&pts, k).unwrap(), brute(&pts, k));
        }

        #[test]
        fn permutation_relabels(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Vec3> = (0..40).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect();
            let mut perm: Vec<usize> = (0..40).collect();
            rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
            let shuffled: Vec<Vec3> = perm.iter().map(|&i| pts[i]).collect();
            let a = knn(&pts, 5).unwrap();
            let b = knn(&shuffled, 5).unwrap();
            for (new_i, &old_i) in perm.iter().enumerate() {
                let mut x: Vec<usize> = b[new_i].iter().map(|&j| perm[j]).collect();
                let mut y = a[old_i].clone();
                x.sort_unstable();
                y.sort_unstable();
                prop_assert_eq!(x, y);
            }
        }
    }
}
