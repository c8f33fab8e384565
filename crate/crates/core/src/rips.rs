//! Vietoris-Rips filtrations up to dimension 2.
//!
//! Edges are materialized and sorted; triangles are implicit. Cofacet queries
//! go through per-vertex adjacency bitsets, which keeps memory linear in the
//! edge count even when the triangle count is enormous. Materializing the
//! triangle list is only done on demand and is protected by a configured cap.

use thiserror::Error;

use crate::cloud::{DistMatrix, PointCloud};

/// Default bound on the triangle count of a buildable filtration. Beyond
/// this, even implicit enumeration is too slow to be useful.
pub const DEFAULT_TRIANGLE_CAP: u64 = 200_000_000;

#[derive(Debug, Error)]
pub enum RipsError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("max_scale must be non-negative and finite, got {0}")]
    BadScale(f64),
    #[error(
        "filtration has {count} triangles, exceeding the cap of {cap}; \
         lower max_scale (currently {max_scale}) or raise the cap"
    )]
    TriangleCapExceeded {
        count: u64,
        cap: u64,
        max_scale: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: u32,
    pub v: u32,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub u: u32,
    pub v: u32,
    pub w: u32,
    pub value: f64,
}

/// A Rips filtration truncated at `max_scale` and dimension 2.
#[derive(Debug, Clone)]
pub struct RipsFiltration {
    vertex_count: usize,
    max_scale: f64,
    /// Sorted by (value, u, v); u < v.
    edges: Vec<Edge>,
    dist: DistMatrix,
    /// Adjacency rows, `words` u64 words per vertex.
    adj: Vec<u64>,
    words: usize,
    triangle_count: u64,
}

/// Builds the filtration over all edges with length at most `max_scale`.
///
/// The exact triangle count is computed up front (cheap, via bitset
/// intersections) and checked against `triangle_cap`.
pub fn build_rips(
    cloud: &PointCloud,
    max_scale: f64,
    triangle_cap: u64,
) -> Result<RipsFiltration, RipsError> {
    if cloud.is_empty() {
        return Err(RipsError::EmptyCloud);
    }
    if !(max_scale >= 0.0) || !max_scale.is_finite() {
        return Err(RipsError::BadScale(max_scale));
    }
    let n = cloud.len();
    let dist = DistMatrix::from_cloud(cloud);
    let words = n.div_ceil(64);
    let mut adj = vec![0u64; n * words];
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let d = dist.get(u, v);
            if d <= max_scale {
                edges.push(Edge {
                    u: u as u32,
                    v: v as u32,
                    value: d,
                });
                adj[u * words + v / 64] |= 1 << (v % 64);
                adj[v * words + u / 64] |= 1 << (u % 64);
            }
        }
    }
    edges.sort_unstable_by(|a, b| {
        a.value
            .partial_cmp(&b.value)
            .expect("distances are never NaN")
            .then(a.u.cmp(&b.u))
            .then(a.v.cmp(&b.v))
    });
    // Each triangle u < v < w is counted once, at its (u, v) edge.
    let mut triangle_count = 0u64;
    for e in &edges {
        let (u, v) = (e.u as usize, e.v as usize);
        let start = v / 64;
        for wd in start..words {
            let mut bits = adj[u * words + wd] & adj[v * words + wd];
            if wd == start {
                // Keep only neighbors w > v.
                if v % 64 == 63 {
                    bits = 0;
                } else {
                    bits &= !0u64 << (v % 64 + 1);
                }
            }
            triangle_count += bits.count_ones() as u64;
        }
    }
    if triangle_count > triangle_cap {
        return Err(RipsError::TriangleCapExceeded {
            count: triangle_count,
            cap: triangle_cap,
            max_scale,
        });
    }
    Ok(RipsFiltration {
        vertex_count: n,
        max_scale,
        edges,
        dist,
        adj,
        words,
        triangle_count,
    })
}

impl RipsFiltration {
    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn max_scale(&self) -> f64 {
        self.max_scale
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn triangle_count(&self) -> u64 {
        self.triangle_count
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist.get(i, j)
    }

    #[inline]
    pub fn adjacent(&self, u: usize, v: usize) -> bool {
        self.adj[u * self.words + v / 64] >> (v % 64) & 1 == 1
    }

    /// Number of edges with value at most `scale` (a prefix of `edges`).
    pub fn edges_up_to(&self, scale: f64) -> usize {
        self.edges.partition_point(|e| e.value <= scale)
    }

    /// Calls `f(w, triangle_value)` for every triangle containing the edge
    /// `(u, v)` with triangle value at most `scale`.
    pub fn for_each_cofacet<F: FnMut(u32, f64)>(&self, u: u32, v: u32, scale: f64, mut f: F) {
        let (ui, vi) = (u as usize, v as usize);
        let base = self.dist.get(ui, vi);
        for wd in 0..self.words {
            let mut bits = self.adj[ui * self.words + wd] & self.adj[vi * self.words + wd];
            while bits != 0 {
                let w = wd * 64 + bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let value = base.max(self.dist.get(ui, w)).max(self.dist.get(vi, w));
                if value <= scale {
                    f(w as u32, value);
                }
            }
        }
    }

    /// Materializes all triangles, sorted by (value, u, v, w).
    ///
    /// Bounded by the build-time cap, so this is safe on anything that was
    /// allowed to build, but intended for small complexes and tests.
    pub fn triangles(&self) -> Vec<Triangle> {
        let mut out = Vec::with_capacity(self.triangle_count as usize);
        for e in &self.edges {
            self.for_each_cofacet(e.u, e.v, self.max_scale, |w, value| {
                if w > e.v {
                    out.push(Triangle {
                        u: e.u,
                        v: e.v,
                        w,
                        value,
                    });
                }
            });
        }
        out.sort_unstable_by(|a, b| {
            a.value
                .partial_cmp(&b.value)
                .expect("distances are never NaN")
                .then(a.u.cmp(&b.u))
                .then(a.v.cmp(&b.v))
                .then(a.w.cmp(&b.w))
        });
        out
    }
}
