//! B-spline transfer kernels.

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::math::Vec3;

pub const MAX_SUPPORT: usize = 4;

/// Node lattice of the Eulerian grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub origin: f64,
    pub dx: f64,
    pub inv_dx: f64,
    /// Nodes per axis.
    pub nodes: usize,
    pub degree: usize,
}

impl GridGeometry {
    pub fn from_config(config: &SimConfig) -> Self {
        let dx = config.dx();
        GridGeometry {
            origin: config.domain_min(),
            dx,
            inv_dx: 1.0 / dx,
            nodes: config.nodes_per_axis(),
            degree: config.spline_degree,
        }
    }

    pub fn support(&self) -> usize {
        self.degree + 1
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.nodes + j) * self.nodes + k
    }

    #[inline]
    pub fn node_coordinate(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.dx
    }

    pub fn node_position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            self.node_coordinate(i),
            self.node_coordinate(j),
            self.node_coordinate(k),
        )
    }

    /// Prefactor of the APIC affine reconstruction, `12 / (Δx² (b + 1))`.
    pub fn affine_scale(&self) -> f64 {
        12.0 / (self.dx * self.dx * (self.degree as f64 + 1.0))
    }
}

/// Tensor-product weights of one particle over its `(b+1)³` support nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub base: [usize; 3],
    pub width: usize,
    pub weights: [[f64; MAX_SUPPORT]; 3],
    /// Per-axis weight derivatives in world units.
    pub gradients: [[f64; MAX_SUPPORT]; 3],
}

impl Stencil {
    #[inline]
    pub fn weight(&self, a: usize, b: usize, c: usize) -> f64 {
        self.weights[0][a] * self.weights[1][b] * self.weights[2][c]
    }

    #[inline]
    pub fn gradient(&self, a: usize, b: usize, c: usize) -> Vec3 {
        let [wx, wy, wz] = &self.weights;
        let [gx, gy, gz] = &self.gradients;
        Vec3::new(gx[a] * wy[b] * wz[c], wx[a] * gy[b] * wz[c], wx[a] * wy[b] * gz[c])
    }

    #[inline]
    pub fn node(&self, a: usize, b: usize, c: usize) -> [usize; 3] {
        [self.base[0] + a, self.base[1] + b, self.base[2] + c]
    }

    /// Calls `f(node, weight, gradient)` for every support node.
    pub fn for_each(&self, mut f: impl FnMut([usize; 3], f64, Vec3)) {
        for a in 0..self.width {
            for b in 0..self.width {
                for c in 0..self.width {
                    f(self.node(a, b, c), self.weight(a, b, c), self.gradient(a, b, c));
                }
            }
        }
    }
}

#[inline]
fn quadratic(fx: f64) -> ([f64; MAX_SUPPORT], [f64; MAX_SUPPORT]) {
    let w = [
        0.5 * (1.5 - fx) * (1.5 - fx),
        0.75 - (fx - 1.0) * (fx - 1.0),
        0.5 * (fx - 0.5) * (fx - 0.5),
        0.0,
    ];
    let dw = [fx - 1.5, -2.0 * (fx - 1.0), fx - 0.5, 0.0];
    (w, dw)
}

#[inline]
fn cubic_1d(r: f64) -> (f64, f64) {
    let a = r.abs();
    if a < 1.0 {
        (0.5 * a * a * a - a * a + 2.0 / 3.0, 1.5 * r * a - 2.0 * r)
    } else if a < 2.0 {
        let t = 2.0 - a;
        (t * t * t / 6.0, -0.5 * t * t * r.signum())
    } else {
        (0.0, 0.0)
    }
}

#[inline]
fn cubic(fx: f64) -> ([f64; MAX_SUPPORT], [f64; MAX_SUPPORT]) {
    let mut w = [0.0; MAX_SUPPORT];
    let mut dw = [0.0; MAX_SUPPORT];
    for k in 0..4 {
        let (v, d) = cubic_1d(fx - k as f64);
        w[k] = v;
        dw[k] = d;
    }
    (w, dw)
}

/// Weights and weight gradients of a particle at `position`.
///
/// Fails when the support would reach past the outermost grid node.
pub fn bspline_weights(position: &Vec3, geometry: &GridGeometry) -> Result<Stencil> {
    let width = geometry.support();
    let mut stencil = Stencil {
        base: [0; 3],
        width,
        weights: [[0.0; MAX_SUPPORT]; 3],
        gradients: [[0.0; MAX_SUPPORT]; 3],
    };
    for axis in 0..3 {
        let g = (position[axis] - geometry.origin) * geometry.inv_dx;
        let base = match geometry.degree {
            2 => (g - 0.5).floor(),
            _ => g.floor() - 1.0,
        };
        if !(base >= 0.0) || base as usize + width > geometry.nodes {
            return Err(Error::StencilClipped { position: *position });
        }
        let fx = g - base;
        let (w, dw) = match geometry.degree {
            2 => quadratic(fx),
            _ => cubic(fx),
        };
        stencil.base[axis] = base as usize;
        stencil.weights[axis] = w;
        for k in 0..MAX_SUPPORT {
            stencil.gradients[axis][k] = dw[k] * geometry.inv_dx;
        }
    }
    Ok(stencil)
}
