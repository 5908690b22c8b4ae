//! Front-to-back splat compositing, tiled and naive.

use std::cmp::Ordering;

use rayon::prelude::*;

use super::project::{project_splat, ProjectedSplat, ALPHA_MIN};
use crate::camera::Camera;
use crate::image::{GrayImage, RgbImage};
use crate::math::Vec3;
use crate::scene::Particle;

pub const TILE_SIZE: usize = 16;

/// Compositing stops once transmittance falls below this.
pub const TRANSMITTANCE_MIN: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub image: RgbImage,
    pub alpha: GrayImage,
}

/// Projects, culls and depth-sorts. The order is total: depth, then the
/// splat's attributes, then particle index, so input order never matters
/// except between bitwise-identical splats.
pub fn sorted_splats(particles: &[Particle], camera: &Camera) -> Vec<ProjectedSplat> {
    let mut splats: Vec<ProjectedSplat> = particles
        .par_iter()
        .enumerate()
        .filter_map(|(i, p)| project_splat(i, p, camera))
        .collect();
    splats.sort_by(compare_splats);
    splats
}

fn compare_splats(a: &ProjectedSplat, b: &ProjectedSplat) -> Ordering {
    let attrs = |s: &ProjectedSplat| {
        let mut k = [0.0f64; 10];
        k[..2].copy_from_slice(&s.center);
        k[2..5].copy_from_slice(&s.cov);
        k[5] = s.opacity;
        k[6..9].copy_from_slice(&s.color);
        k[9] = s.depth;
        k
    };
    a.depth
        .total_cmp(&b.depth)
        .then_with(|| {
            let (ka, kb) = (attrs(a), attrs(b));
            ka.iter()
                .zip(&kb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
        .then(a.index.cmp(&b.index))
}

/// Composites the splats (already in depth order) at one pixel. Returns
/// colour and final transmittance.
#[inline]
fn composite<'a>(x: usize, y: usize, splats: impl Iterator<Item = &'a ProjectedSplat>) -> ([f64; 3], f64) {
    let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
    let mut c = [0.0f64; 3];
    let mut t = 1.0f64;
    for s in splats {
        let a = s.alpha_at(px, py);
        if !(a >= ALPHA_MIN) {
            continue;
        }
        let w = a * t;
        for k in 0..3 {
            c[k] += w * s.color[k];
        }
        t *= 1.0 - a;
        if t < TRANSMITTANCE_MIN {
            break;
        }
    }
    (c, t)
}

fn store(out: &mut Rendered, x: usize, y: usize, c: [f64; 3], t: f64) {
    let i = y * out.image.width + x;
    out.image.data[i] = c.map(|v| v.clamp(0.0, 1.0) as f32);
    out.alpha.data[i] = (1.0 - t).clamp(0.0, 1.0) as f32;
}

fn blank(camera: &Camera) -> Rendered {
    Rendered {
        image: RgbImage::new(camera.width, camera.height),
        alpha: GrayImage::new(camera.width, camera.height),
    }
}

/// Reference rasterizer: every pixel visits every splat.
pub fn render_naive(particles: &[Particle], camera: &Camera) -> Rendered {
    let splats = sorted_splats(particles, camera);
    let mut out = blank(camera);
    for y in 0..camera.height {
        for x in 0..camera.width {
            let (c, t) = composite(x, y, splats.iter());
            store(&mut out, x, y, c, t);
        }
    }
    out
}

/// Tiled rasterizer, parallel over 16×16 tiles. Produces the same bits as
/// [`render_naive`]: a splat is only dropped from a tile when its alpha is
/// below threshold on every pixel of that tile.
pub fn render(particles: &[Particle], camera: &Camera) -> Rendered {
    let splats = sorted_splats(particles, camera);
    let (w, h) = (camera.width, camera.height);
    let tiles_x = w.div_ceil(TILE_SIZE);
    let tiles_y = h.div_ceil(TILE_SIZE);
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    for (k, s) in splats.iter().enumerate() {
        let [x0, y0, x1, y1] = s.bounds;
        if x1 < 0 || y1 < 0 || x0 >= w as i64 || y0 >= h as i64 {
            continue;
        }
        let tx0 = (x0.max(0) as usize) / TILE_SIZE;
        let ty0 = (y0.max(0) as usize) / TILE_SIZE;
        let tx1 = (x1.min(w as i64 - 1) as usize) / TILE_SIZE;
        let ty1 = (y1.min(h as i64 - 1) as usize) / TILE_SIZE;
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                bins[ty * tiles_x + tx].push(k as u32);
            }
        }
    }
    let tiles: Vec<Vec<([f64; 3], f64)>> = bins
        .par_iter()
        .enumerate()
        .map(|(tile, list)| {
            let (tx, ty) = (tile % tiles_x, tile / tiles_x);
            let xs = tx * TILE_SIZE..((tx + 1) * TILE_SIZE).min(w);
            let ys = ty * TILE_SIZE..((ty + 1) * TILE_SIZE).min(h);
            let mut px = Vec::with_capacity(xs.len() * ys.len());
            for y in ys {
                for x in xs.clone() {
                    px.push(composite(x, y, list.iter().map(|&k| &splats[k as usize])));
                }
            }
            px
        })
        .collect();
    let mut out = blank(camera);
    for (tile, px) in tiles.into_iter().enumerate() {
        let (tx, ty) = (tile % tiles_x, tile / tiles_x);
        let tw = ((tx + 1) * TILE_SIZE).min(w) - tx * TILE_SIZE;
        for (k, (c, t)) in px.into_iter().enumerate() {
            store(&mut out, tx * TILE_SIZE + k % tw, ty * TILE_SIZE + k / tw, c, t);
        }
    }
    out
}

/// Front-most visible splat under a pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub index: usize,
    pub depth: f64,
    /// World point under the pixel centre at the splat's depth.
    pub point: Vec3,
}

/// The first splat in depth order whose alpha at the pixel centre reaches
/// the visibility threshold.
pub fn pick(particles: &[Particle], camera: &Camera, x: f64, y: f64) -> Option<Hit> {
    let (u, v) = (x.floor() + 0.5, y.floor() + 0.5);
    sorted_splats(particles, camera)
        .into_iter()
        .find(|s| s.alpha_at(u, v) >= ALPHA_MIN)
        .map(|s| Hit {
            index: s.index,
            depth: s.depth,
            point: camera.unproject(u, v, s.depth),
        })
}
