//! Uniform conforming triangulations of the unit square.
//!
//! Nodes are numbered row-major by `(y, x)`: node `(i, j)` (column `i`, row `j`)
//! has index `j * (n + 1) + i`. Every square cell is split along the diagonal
//! running from its lower-left to its upper-right corner, and both triangles are
//! stored counterclockwise.

use crate::error::{Error, Result};

const BOUNDARY_EPS: f64 = 1e-14;

/// A structured triangulation of `(0, 1)^dim`.
///
/// Only `dim = 2` can be constructed; the field exists so callers do not
/// hard-code the dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub dim: usize,
    pub n_per_side: usize,
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 3]>,
    /// Sorted indices of nodes lying on the boundary.
    pub boundary_nodes: Vec<usize>,
    pub h: f64,
    is_boundary: Vec<bool>,
}

impl Mesh {
    pub fn build_uniform(n_per_side: usize) -> Result<Self> {
        if n_per_side == 0 {
            return Err(Error::InvalidInput("n_per_side must be at least 1".into()));
        }
        let n = n_per_side;
        let h = 1.0 / n as f64;
        let stride = n + 1;

        let mut nodes = Vec::with_capacity(stride * stride);
        for j in 0..=n {
            for i in 0..=n {
                // i / n rather than i * h keeps the far edge exactly at 1.0
                nodes.push([i as f64 / n as f64, j as f64 / n as f64]);
            }
        }

        let mut elements = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = j * stride + i;
                let v10 = v00 + 1;
                let v01 = v00 + stride;
                let v11 = v01 + 1;
                elements.push([v00, v10, v11]);
                elements.push([v00, v11, v01]);
            }
        }

        let is_boundary: Vec<bool> = nodes
            .iter()
            .map(|p| {
                p.iter()
                    .any(|&c| c.abs() <= BOUNDARY_EPS || (c - 1.0).abs() <= BOUNDARY_EPS)
            })
            .collect();
        let boundary_nodes = is_boundary
            .iter()
            .enumerate()
            .filter_map(|(k, &b)| b.then_some(k))
            .collect();

        Ok(Self {
            dim: 2,
            n_per_side,
            nodes,
            elements,
            boundary_nodes,
            h,
            is_boundary,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.is_boundary[node]
    }

    /// Vertex coordinates of element `e`.
    pub fn element_coords(&self, e: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.elements[e];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    /// Signed area (positive for counterclockwise orientation).
    pub fn signed_area(&self, e: usize) -> f64 {
        let [p0, p1, p2] = self.element_coords(e);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    /// Barycentric coordinates of `p` with respect to element `e`.
    pub fn barycentric(&self, e: usize, p: [f64; 2]) -> [f64; 3] {
        let [p0, p1, p2] = self.element_coords(e);
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let l1 = ((p[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p[1] - p0[1])) / det;
        let l2 = ((p1[0] - p0[0]) * (p[1] - p0[1]) - (p[0] - p0[0]) * (p1[1] - p0[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Map each interior node to a compact index `0..n_interior`, following
    /// node order.
    pub fn interior_index_map(&self) -> InteriorMap {
        let mut to_compact = vec![None; self.n_nodes()];
        let mut to_node = Vec::new();
        for (k, slot) in to_compact.iter_mut().enumerate() {
            if !self.is_boundary[k] {
                *slot = Some(to_node.len());
                to_node.push(k);
            }
        }
        InteriorMap {
            to_compact,
            to_node,
        }
    }

    /// Index of the node closest to `p` (ties broken by lowest index).
    pub fn nearest_node(&self, p: [f64; 2]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, q) in self.nodes.iter().enumerate() {
            let d = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }
}

/// Bijection between interior nodes and a compact numbering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteriorMap {
    to_compact: Vec<Option<usize>>,
    to_node: Vec<usize>,
}

impl InteriorMap {
    pub fn len(&self) -> usize {
        self.to_node.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_node.is_empty()
    }

    pub fn compact(&self, node: usize) -> Option<usize> {
        self.to_compact[node]
    }

    pub fn node(&self, compact: usize) -> usize {
        self.to_node[compact]
    }

    pub fn nodes(&self) -> &[usize] {
        &self.to_node
    }

    /// Total number of mesh nodes, boundary included.
    pub fn n_nodes(&self) -> usize {
        self.to_compact.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::collections::HashMap;

    #[test]
    fn smallest_mesh() {
        let m = Mesh::build_uniform(1).unwrap();
        assert_eq!(m.n_nodes(), 4);
        assert_eq!(m.n_elements(), 2);
        assert_eq!(m.boundary_nodes.len(), 4);
        assert!(m.interior_index_map().is_empty());
    }

    #[test]
    fn two_by_two_counts() {
        let m = Mesh::build_uniform(2).unwrap();
        assert_eq!(m.n_nodes(), 9);
        assert_eq!(m.n_elements(), 8);
        assert_eq!(m.boundary_nodes.len(), 8);
        let map = m.interior_index_map();
        assert_eq!(map.len(), 1);
        assert_eq!(map.node(0), 4);
        assert_eq!(m.nodes[4], [0.5, 0.5]);
    }

    #[test]
    fn interior_count_is_square_of_n_minus_one() {
        let m = Mesh::build_uniform(4).unwrap();
        let map = m.interior_index_map();
        assert_eq!(map.len(), 9);
        for c in 0..map.len() {
            assert_eq!(map.compact(map.node(c)), Some(c));
        }
    }

    #[test]
    fn paper_scale_mesh() {
        let m = Mesh::build_uniform(400).unwrap();
        assert_abs_diff_eq!(m.h, 0.0025, epsilon = 1e-16);
        assert_eq!(m.n_nodes(), 160_801);
    }

    #[test]
    fn rejects_zero() {
        assert!(Mesh::build_uniform(0).is_err());
    }

    #[test]
    fn element_areas() {
        for n in [1, 3, 7] {
            let m = Mesh::build_uniform(n).unwrap();
            let mut total = 0.0;
            for e in 0..m.n_elements() {
                let a = m.signed_area(e);
                assert_abs_diff_eq!(a, m.h * m.h / 2.0, epsilon = 1e-15);
                total += a;
            }
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn boundary_flags_match_coordinates() {
        let m = Mesh::build_uniform(5).unwrap();
        for (k, p) in m.nodes.iter().enumerate() {
            let on = p.iter().any(|&c| c == 0.0 || c == 1.0);
            assert_eq!(on, m.is_boundary(k));
        }
    }

    #[test]
    fn interior_edges_shared_twice() {
        let m = Mesh::build_uniform(6).unwrap();
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for el in &m.elements {
            for (a, b) in [(el[0], el[1]), (el[1], el[2]), (el[2], el[0])] {
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        for ((a, b), c) in count {
            let on_boundary = m.is_boundary(a) && m.is_boundary(b) && {
                let (pa, pb) = (m.nodes[a], m.nodes[b]);
                (pa[0] == pb[0] && (pa[0] == 0.0 || pa[0] == 1.0))
                    || (pa[1] == pb[1] && (pa[1] == 0.0 || pa[1] == 1.0))
            };
            assert_eq!(c, if on_boundary { 1 } else { 2 }, "edge ({a},{b})");
        }
    }

    #[test]
    fn barycentric_partition_of_unity() {
        use rand::{Rng, SeedableRng};
        let m = Mesh::build_uniform(4).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let e = rng.gen_range(0..m.n_elements());
            let (a, b): (f64, f64) = (rng.gen(), rng.gen());
            let (a, b) = if a + b > 1.0 {
                (1.0 - a, 1.0 - b)
            } else {
                (a, b)
            };
            let [p0, p1, p2] = m.element_coords(e);
            let p = [
                p0[0] + a * (p1[0] - p0[0]) + b * (p2[0] - p0[0]),
                p0[1] + a * (p1[1] - p0[1]) + b * (p2[1] - p0[1]),
            ];
            let l = m.barycentric(e, p);
            assert_abs_diff_eq!(l.iter().sum::<f64>(), 1.0, epsilon = 1e-13);
            assert_abs_diff_eq!(l[1], a, epsilon = 1e-12);
            assert_abs_diff_eq!(l[2], b, epsilon = 1e-12);
        }
    }
}
