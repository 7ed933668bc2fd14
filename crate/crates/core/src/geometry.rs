//! Uniform grids on intervals and axis-aligned rectangles.
//!
//! Nodes are stored in row-major order with the first axis fastest:
//! `node = i + counts[0] * j`. A 1D grid uses `counts[1] == 1`.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Lower,
    Upper,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Lower => -1.0,
            Side::Upper => 1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::Lower => 0,
            Side::Upper => 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryNode {
    pub node: usize,
    /// Unit outward normal, zero-padded in 1D.
    pub normal: [f64; 2],
    /// Per axis, the side of the domain this node sits on (if any).
    pub outward: [Option<Side>; 2],
}

impl BoundaryNode {
    pub fn is_corner(&self) -> bool {
        self.outward.iter().filter(|s| s.is_some()).count() > 1
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Grid {
    dim: usize,
    lower: [f64; 2],
    upper: [f64; 2],
    counts: [usize; 2],
    spacing: [f64; 2],
    boundary: Vec<BoundaryNode>,
    #[serde(skip)]
    slots: Vec<Option<usize>>,
}

fn check_axis(a: f64, b: f64, n: usize) -> Result<()> {
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::Config(format!("degenerate interval [{a}, {b}]")));
    }
    if n < 3 {
        return Err(Error::Config(format!("need at least 3 nodes per axis, got {n}")));
    }
    Ok(())
}

impl Grid {
    pub fn interval(a: f64, b: f64, n: usize) -> Result<Self> {
        check_axis(a, b, n)?;
        Ok(Self::assemble(1, [a, 0.0], [b, 0.0], [n, 1]))
    }

    pub fn rectangle(extents: [(f64, f64); 2], counts: [usize; 2]) -> Result<Self> {
        for axis in 0..2 {
            check_axis(extents[axis].0, extents[axis].1, counts[axis])?;
        }
        Ok(Self::assemble(
            2,
            [extents[0].0, extents[1].0],
            [extents[0].1, extents[1].1],
            counts,
        ))
    }

    fn assemble(dim: usize, lower: [f64; 2], upper: [f64; 2], counts: [usize; 2]) -> Self {
        let mut spacing = [0.0; 2];
        for axis in 0..dim {
            spacing[axis] = (upper[axis] - lower[axis]) / (counts[axis] - 1) as f64;
        }
        let len = counts[0] * counts[1];
        let mut boundary = Vec::new();
        let mut slots = vec![None; len];
        for node in 0..len {
            let idx = [node % counts[0], node / counts[0]];
            let mut outward = [None, None];
            let mut normal = [0.0f64; 2];
            for axis in 0..dim {
                if idx[axis] == 0 {
                    outward[axis] = Some(Side::Lower);
                    normal[axis] = -1.0;
                } else if idx[axis] == counts[axis] - 1 {
                    outward[axis] = Some(Side::Upper);
                    normal[axis] = 1.0;
                }
            }
            if outward.iter().any(Option::is_some) {
                // corners: normalized sum of the adjacent edge normals
                let norm = (normal[0] * normal[0] + normal[1] * normal[1]).sqrt();
                normal[0] /= norm;
                normal[1] /= norm;
                slots[node] = Some(boundary.len());
                boundary.push(BoundaryNode {
                    node,
                    normal,
                    outward,
                });
            }
        }
        Grid {
            dim,
            lower,
            upper,
            counts,
            spacing,
            boundary,
            slots,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn counts(&self) -> [usize; 2] {
        self.counts
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    pub fn lower(&self) -> [f64; 2] {
        self.lower
    }

    pub fn upper(&self) -> [f64; 2] {
        self.upper
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing[..self.dim]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn stride(&self, axis: usize) -> usize {
        if axis == 0 {
            1
        } else {
            self.counts[0]
        }
    }

    pub fn multi_index(&self, node: usize) -> [usize; 2] {
        [node % self.counts[0], node / self.counts[0]]
    }

    pub fn node_at(&self, idx: [usize; 2]) -> usize {
        idx[0] + self.counts[0] * idx[1]
    }

    /// Coordinates of a node, zero-padded in 1D.
    pub fn coords(&self, node: usize) -> [f64; 2] {
        let idx = self.multi_index(node);
        let mut x = [0.0; 2];
        for axis in 0..self.dim {
            x[axis] = if idx[axis] == self.counts[axis] - 1 {
                self.upper[axis]
            } else {
                self.lower[axis] + idx[axis] as f64 * self.spacing[axis]
            };
        }
        x
    }

    pub fn boundary_nodes(&self) -> &[BoundaryNode] {
        &self.boundary
    }

    pub fn boundary_slot(&self, node: usize) -> Option<usize> {
        self.slots[node]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.slots[node].is_some()
    }

    pub fn interior_count(&self) -> usize {
        self.len() - self.boundary.len()
    }

    /// Node nearest to the centroid of the domain (ties go to the lower index).
    pub fn centroid_node(&self) -> usize {
        let mut centre = [0.0; 2];
        for axis in 0..self.dim {
            centre[axis] = 0.5 * (self.lower[axis] + self.upper[axis]);
        }
        self.nearest_node(&centre[..self.dim])
    }

    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let mut idx = [0usize; 2];
        for axis in 0..self.dim {
            let r = ((x[axis] - self.lower[axis]) / self.spacing[axis]).round();
            idx[axis] = r.clamp(0.0, (self.counts[axis] - 1) as f64) as usize;
        }
        self.node_at(idx)
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (xa, xb) = (self.coords(a), self.coords(b));
        ((xa[0] - xb[0]).powi(2) + (xa[1] - xb[1]).powi(2)).sqrt()
    }

    pub fn diameter(&self) -> f64 {
        let mut s = 0.0;
        for axis in 0..self.dim {
            s += (self.upper[axis] - self.lower[axis]).powi(2);
        }
        s.sqrt()
    }

    /// Evaluates a function of position on every node.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len())
            .map(|node| {
                let x = self.coords(node);
                f(&x[..self.dim])
            })
            .collect()
    }

    /// Evaluates a function of position on every boundary node, in slot order.
    pub fn sample_boundary<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        self.boundary
            .iter()
            .map(|b| {
                let x = self.coords(b.node);
                f(&x[..self.dim])
            })
            .collect()
    }
}

/// Oblique direction `gamma` and datum `g` at each boundary node (slot order).
#[derive(Debug, Clone, Serialize)]
pub struct ObliqueField {
    gamma: Vec<[f64; 2]>,
    g: Vec<f64>,
}

impl ObliqueField {
    /// Directions are normalized; a zero direction is kept as-is and fails validation.
    pub fn new(gamma: Vec<[f64; 2]>, g: Vec<f64>) -> Self {
        let gamma = gamma
            .into_iter()
            .map(|v| {
                let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
                if n > 0.0 {
                    [v[0] / n, v[1] / n]
                } else {
                    v
                }
            })
            .collect();
        ObliqueField { gamma, g }
    }

    /// `gamma = n` everywhere with datum `g`.
    pub fn normal(grid: &Grid, g: Vec<f64>) -> Self {
        let gamma = grid.boundary_nodes().iter().map(|b| b.normal).collect();
        ObliqueField::new(gamma, g)
    }

    pub fn gamma(&self, slot: usize) -> [f64; 2] {
        self.gamma[slot]
    }

    pub fn g(&self, slot: usize) -> f64 {
        self.g[slot]
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ObliqueCheck {
    Pass,
    Violation { node: usize, dot: f64 },
}

/// Checks `n(x) . gamma(x) > 0` at every boundary node.
pub fn validate_oblique(grid: &Grid, field: &ObliqueField) -> Result<ObliqueCheck> {
    let nb = grid.boundary_nodes().len();
    if field.gamma.len() != nb || field.g.len() != nb {
        return Err(Error::Config(format!(
            "oblique data has {} directions and {} values for {} boundary nodes",
            field.gamma.len(),
            field.g.len(),
            nb
        )));
    }
    for (slot, b) in grid.boundary_nodes().iter().enumerate() {
        let gamma = field.gamma[slot];
        if !(gamma[0].is_finite() && gamma[1].is_finite() && field.g[slot].is_finite()) {
            return Err(Error::Config(format!(
                "non-finite oblique data at node {}",
                b.node
            )));
        }
        let dot = b.normal[0] * gamma[0] + b.normal[1] * gamma[1];
        if dot <= 0.0 {
            return Ok(ObliqueCheck::Violation { node: b.node, dot });
        }
    }
    Ok(ObliqueCheck::Pass)
}
