use rayon::prelude::*;

use super::predicates::segment_segment_distance;
use super::types::{Geom, GeometrySet};
use crate::error::GeometryError;

/// Binary, symmetric neighbourhood matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    ids: Vec<String>,
    w: Vec<bool>,
}

impl AdjacencyMatrix {
    /// Builds the matrix from an undirected edge list; self-loops are ignored.
    pub fn from_edges(ids: Vec<String>, edges: &[(usize, usize)]) -> Self {
        let n = ids.len();
        let mut w = vec![false; n * n];
        for &(i, j) in edges {
            assert!(i < n && j < n, "edge ({i}, {j}) out of range");
            if i != j {
                w[i * n + j] = true;
                w[j * n + i] = true;
            }
        }
        Self { ids, w }
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.w[i * self.n() + j]
    }

    pub fn degree(&self, i: usize) -> usize {
        let n = self.n();
        self.w[i * n..(i + 1) * n].iter().filter(|&&b| b).count()
    }

    pub fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.n();
        (0..n).filter(move |&j| self.w[i * n + j])
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.get(i, j))
            .collect()
    }

    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n();
        nalgebra::DMatrix::from_fn(n, n, |i, j| if self.get(i, j) { 1.0 } else { 0.0 })
    }

    /// Connected components as sorted index lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut label = vec![usize::MAX; n];
        let mut out = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![start];
            label[start] = id;
            let mut k = 0;
            while k < members.len() {
                let v = members[k];
                for u in self.neighbours(v) {
                    if label[u] == usize::MAX {
                        label[u] = id;
                        members.push(u);
                    }
                }
                k += 1;
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }
}

/// Sites are neighbours when their boundaries come within `tolerance` of each
/// other. Any part of a multipolygon counts.
pub fn derive_adjacency(
    gs: &GeometrySet,
    tolerance: f64,
) -> Result<AdjacencyMatrix, GeometryError> {
    if let Some((id, _)) = gs.iter().find(|(_, g)| g.is_point()) {
        return Err(GeometryError::PointInAdjacency(id.to_string()));
    }
    let tolerance = tolerance.max(0.0);
    let geoms = gs.geoms();
    let n = geoms.len();
    let boxes: Vec<_> = geoms.iter().map(Geom::bbox).collect();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let edges: Vec<(usize, usize)> = pairs
        .into_par_iter()
        .filter(|&(i, j)| {
            boxes[i].gap(&boxes[j]) <= tolerance
                && boundaries_within(&geoms[i], &geoms[j], tolerance)
        })
        .collect();
    Ok(AdjacencyMatrix::from_edges(gs.ids().to_vec(), &edges))
}

fn boundaries_within(a: &Geom, b: &Geom, tolerance: f64) -> bool {
    let segs_b: Vec<_> = b.segments().collect();
    a.segments().any(|(p, q)| {
        segs_b
            .iter()
            .any(|&(r, s)| segment_segment_distance(p, q, r, s) <= tolerance)
    })
}
