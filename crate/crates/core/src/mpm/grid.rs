//! Eulerian scratch grid.

use crate::config::{BoundaryCondition, Boundaries, SimConfig};
use crate::math::Vec3;

use super::kernel::{GridGeometry, Stencil};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GridNode {
    pub mass: f64,
    pub momentum: Vec3,
    pub velocity: Vec3,
    /// Internal force `−Σ V⁰ J σ ∇w`.
    pub force: Vec3,
    /// Sum and count of drive velocities assigned this step.
    pub drive_sum: Vec3,
    pub drive_count: u32,
    /// Last drive that touched this node, so each drive counts once.
    pub(crate) drive_mark: u32,
}

impl GridNode {
    pub fn is_driven(&self) -> bool {
        self.drive_count > 0
    }
}

/// Inclusive node-index box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl NodeBox {
    pub fn of_stencil(s: &Stencil) -> Self {
        let w = s.width - 1;
        NodeBox {
            lo: s.base,
            hi: [s.base[0] + w, s.base[1] + w, s.base[2] + w],
        }
    }

    pub fn union(&self, other: &NodeBox) -> NodeBox {
        NodeBox {
            lo: std::array::from_fn(|a| self.lo[a].min(other.lo[a])),
            hi: std::array::from_fn(|a| self.hi[a].max(other.hi[a])),
        }
    }

    pub fn node_count(&self) -> usize {
        (0..3).map(|a| self.hi[a] - self.lo[a] + 1).product()
    }
}

#[derive(Debug, Clone)]
pub struct Grid {
    geometry: GridGeometry,
    band: usize,
    nodes: Vec<GridNode>,
    active: Option<NodeBox>,
    pub(crate) mass_epsilon: f64,
}

impl Grid {
    pub fn new(config: &SimConfig) -> Self {
        let geometry = GridGeometry::from_config(config);
        let n = geometry.nodes;
        Grid {
            geometry,
            band: config.boundary_band(),
            nodes: vec![GridNode::default(); n * n * n],
            active: None,
            mass_epsilon: 0.0,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    /// Box touched by the last transfer, `None` before the first one.
    pub fn active_box(&self) -> Option<NodeBox> {
        self.active
    }

    pub fn mass_epsilon(&self) -> f64 {
        self.mass_epsilon
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> &GridNode {
        &self.nodes[self.geometry.index(i, j, k)]
    }

    pub fn node_mut(&mut self, i: usize, j: usize, k: usize) -> &mut GridNode {
        let idx = self.geometry.index(i, j, k);
        &mut self.nodes[idx]
    }

    /// All nodes, indexed by [`GridGeometry::index`].
    pub fn nodes(&self) -> &[GridNode] {
        &self.nodes
    }

    pub(crate) fn nodes_mut(&mut self) -> &mut [GridNode] {
        &mut self.nodes
    }

    /// True when a node lies in the boundary band of any face.
    pub fn is_boundary(&self, n: [usize; 3]) -> bool {
        let last = self.geometry.nodes - 1;
        n.iter().any(|&c| c < self.band || c > last - self.band)
    }

    /// Calls `f` with the index triple of every node in the active box.
    pub fn for_each_active(&self, mut f: impl FnMut([usize; 3], &GridNode)) {
        if let Some(b) = self.active {
            for i in b.lo[0]..=b.hi[0] {
                for j in b.lo[1]..=b.hi[1] {
                    for k in b.lo[2]..=b.hi[2] {
                        f([i, j, k], self.node(i, j, k));
                    }
                }
            }
        }
    }

    fn for_each_in_mut(&mut self, b: NodeBox, mut f: impl FnMut([usize; 3], &mut GridNode)) {
        for i in b.lo[0]..=b.hi[0] {
            for j in b.lo[1]..=b.hi[1] {
                let row = self.geometry.index(i, j, 0);
                for k in b.lo[2]..=b.hi[2] {
                    f([i, j, k], &mut self.nodes[row + k]);
                }
            }
        }
    }

    /// Zeroes everything the previous transfer touched and marks `next` as
    /// the new active box.
    pub(crate) fn reset(&mut self, next: Option<NodeBox>) {
        if let Some(b) = self.active.take() {
            self.for_each_in_mut(b, |_, n| *n = GridNode::default());
        }
        self.active = next;
    }

    /// Zeroes the whole grid.
    pub fn clear(&mut self) {
        self.nodes.iter_mut().for_each(|n| *n = GridNode::default());
        self.active = None;
    }

    pub fn total_mass(&self) -> f64 {
        let mut m = 0.0;
        self.for_each_active(|_, n| m += n.mass);
        m
    }

    /// Σ m_i v_i over the active box.
    pub fn total_momentum(&self) -> Vec3 {
        let mut p = Vec3::zeros();
        self.for_each_active(|_, n| p += n.velocity * n.mass);
        p
    }

    /// Nodes in the active box carrying mass above `mass_epsilon`.
    pub fn active_node_count(&self) -> usize {
        let mut c = 0;
        let eps = self.mass_epsilon;
        self.for_each_active(|_, n| c += (n.mass > eps) as usize);
        c
    }

    pub fn driven_node_count(&self) -> usize {
        let mut c = 0;
        self.for_each_active(|_, n| c += n.is_driven() as usize);
        c
    }

    /// Converts accumulated momentum into velocity.
    pub(crate) fn normalize_momentum(&mut self) {
        let eps = self.mass_epsilon;
        if let Some(b) = self.active {
            self.for_each_in_mut(b, |_, n| {
                n.velocity = if n.mass > eps {
                    n.momentum / n.mass
                } else {
                    Vec3::zeros()
                };
            });
        }
    }

    /// Flags the support nodes of `stencil` as driven by drive number
    /// `mark` (1-based) with velocity `v`.
    pub(crate) fn add_drive(&mut self, stencil: &Stencil, v: Vec3, mark: u32) {
        let b = NodeBox::of_stencil(stencil);
        self.active = Some(self.active.map_or(b, |a| a.union(&b)));
        self.for_each_in_mut(b, |_, n| {
            if n.drive_mark != mark {
                n.drive_mark = mark;
                n.drive_sum += v;
                n.drive_count += 1;
            }
        });
    }

    /// Removes every drive assignment.
    pub fn clear_drive(&mut self) {
        if let Some(b) = self.active {
            self.for_each_in_mut(b, |_, n| {
                n.drive_sum = Vec3::zeros();
                n.drive_count = 0;
                n.drive_mark = 0;
            });
        }
    }

    /// Force update, drive override, then boundary conditions.
    pub(crate) fn update_velocities(&mut self, dt: f64, boundaries: &Boundaries) {
        let Some(b) = self.active else { return };
        let eps = self.mass_epsilon;
        let last = self.geometry.nodes - 1;
        let band = self.band;
        self.for_each_in_mut(b, |idx, n| {
            if n.mass > eps {
                n.velocity += n.force * (dt / n.mass);
            } else {
                n.velocity = Vec3::zeros();
            }
            if n.drive_count > 0 {
                n.velocity = n.drive_sum / n.drive_count as f64;
            }
            for axis in 0..3 {
                let face = if idx[axis] < band {
                    Some(false)
                } else if idx[axis] > last - band {
                    Some(true)
                } else {
                    None
                };
                if let Some(upper) = face {
                    match boundaries.face(axis, upper) {
                        BoundaryCondition::Sticky => n.velocity = Vec3::zeros(),
                        BoundaryCondition::Slip => n.velocity[axis] = 0.0,
                    }
                }
            }
        });
    }
}
