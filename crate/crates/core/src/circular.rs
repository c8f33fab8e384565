//! From integer cocycles to circle-valued coordinates.
//!
//! The lifted cocycle is smoothed by subtracting the coboundary that
//! minimizes the Dirichlet energy, which amounts to one graph-Laplacian
//! least-squares solve. The minimizing potential, taken mod 1 and scaled by
//! 2 pi, is the circular coordinate. Subsample coordinates are pushed to
//! the full cloud by Gaussian-weighted circular means.

use rayon::prelude::*;
use serde::Serialize;

use crate::cloud::PointCloud;
use crate::persistence::IntegerCocycle;

pub const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Relative residual tolerance of the conjugate-gradient solve.
const CG_TOLERANCE: f64 = 1e-9;

/// Resultant vectors shorter than this are treated as directionless.
const DEGENERATE_RESULTANT: f64 = 1e-8;

/// Harmonic representative of a cocycle on the working-scale 1-skeleton.
#[derive(Debug, Clone)]
pub struct HarmonicRepresentative {
    /// Minimizing potential f, one entry per vertex.
    pub potential: Vec<f64>,
    /// The 1-skeleton edges (u, v) with u < v, as given to the solver.
    pub edges: Vec<(u32, u32)>,
    /// Smoothed values, aligned with `edges`; entry e = (u, v) holds
    /// alpha(e) + f(v) - f(u).
    pub smoothed_cocycle: Vec<f64>,
    /// Sum of squared smoothed values.
    pub energy: f64,
    /// Conjugate-gradient iterations spent.
    pub iterations: usize,
    /// False when the iteration cap fired before the residual tolerance.
    pub converged: bool,
}

/// Per-point bookkeeping for how an angle was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordFlag {
    Ok,
    /// Vertex had no incident edge at the working scale; its angle is an
    /// arbitrary gauge fixed to 0.
    Isolated,
    /// Circular-mean resultant was too short to define a direction; the
    /// nearest subsample angle was used instead.
    DegenerateExtension,
    /// Ensemble centroid was ambiguous at this point (near-antipodal
    /// members); the first configuration's angle was used instead.
    DegenerateAlignment,
}

impl CoordFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            CoordFlag::Ok => "ok",
            CoordFlag::Isolated => "isolated",
            CoordFlag::DegenerateExtension => "degenerate-extension",
            CoordFlag::DegenerateAlignment => "degenerate-alignment",
        }
    }
}

/// A circle-valued map on a subset of a point cloud.
#[derive(Debug, Clone)]
pub struct CircularCoordinate {
    /// Angles in [0, 2 pi), one per domain index.
    pub angles: Vec<f64>,
    /// Strictly increasing indices into the parent cloud.
    pub domain: Vec<u32>,
    pub flags: Vec<CoordFlag>,
}

impl CircularCoordinate {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

/// Wraps into [0, 2 pi).
#[inline]
pub fn wrap_angle(x: f64) -> f64 {
    let a = x.rem_euclid(TAU);
    // rem_euclid of a tiny negative can round up to exactly 2 pi.
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Graph-Laplacian matvec through the edge list.
fn laplacian_apply(edges: &[(u32, u32)], f: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for &(u, v) in edges {
        let d = f[u as usize] - f[v as usize];
        out[u as usize] += d;
        out[v as usize] -= d;
    }
}

/// Minimizes sum over edges of (alpha(e) + f(v) - f(u))^2 over potentials f.
///
/// The normal equations L f = b (b[u] += alpha, b[v] -= alpha) are solved by
/// conjugate gradients from the zero vector, which lands on the minimum-norm
/// solution of each connected component. `alpha` is read from the cocycle;
/// edges outside its support carry 0.
pub fn harmonic_smooth(
    cocycle: &IntegerCocycle,
    edges: &[(u32, u32)],
    vertex_count: usize,
) -> HarmonicRepresentative {
    let mut alpha = vec![0.0f64; edges.len()];
    {
        use std::collections::HashMap;
        let support: HashMap<(u32, u32), i64> = cocycle
            .entries
            .iter()
            .map(|&(u, v, x)| ((u, v), x))
            .collect();
        for (a, &(u, v)) in alpha.iter_mut().zip(edges) {
            if let Some(&x) = support.get(&(u, v)) {
                *a = x as f64;
            }
        }
    }

    let n = vertex_count;
    let mut b = vec![0.0f64; n];
    for (&(u, v), &a) in edges.iter().zip(&alpha) {
        b[u as usize] += a;
        b[v as usize] -= a;
    }

    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let b_norm = dot(&b, &b).sqrt();
    let mut f = vec![0.0f64; n];
    let mut iterations = 0usize;
    let mut converged = true;
    if b_norm > 0.0 {
        let cap = 10 * n;
        let mut r = b.clone();
        let mut p = b.clone();
        let mut ap = vec![0.0f64; n];
        let mut rs = dot(&r, &r);
        converged = false;
        while iterations < cap {
            if rs.sqrt() <= CG_TOLERANCE * b_norm {
                converged = true;
                break;
            }
            laplacian_apply(edges, &p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                // p fell into the kernel numerically; nothing left to gain.
                converged = true;
                break;
            }
            let step = rs / pap;
            for i in 0..n {
                f[i] += step * p[i];
                r[i] -= step * ap[i];
            }
            let rs_new = dot(&r, &r);
            let beta = rs_new / rs;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
            rs = rs_new;
            iterations += 1;
        }
        if rs.sqrt() <= CG_TOLERANCE * b_norm {
            converged = true;
        }
    }

    let smoothed: Vec<f64> = edges
        .iter()
        .zip(&alpha)
        .map(|(&(u, v), &a)| a + f[v as usize] - f[u as usize])
        .collect();
    let energy = smoothed.iter().map(|x| x * x).sum();
    HarmonicRepresentative {
        potential: f,
        edges: edges.to_vec(),
        smoothed_cocycle: smoothed,
        energy,
        iterations,
        converged,
    }
}

/// Reads the potential as angles: angle[i] = 2 pi f[i] mod 2 pi.
///
/// `domain` lists which parent-cloud index each vertex stands for. Vertices
/// with no incident edge get angle 0 and the isolated flag.
pub fn to_circle(rep: &HarmonicRepresentative, domain: &[u32]) -> CircularCoordinate {
    assert_eq!(
        rep.potential.len(),
        domain.len(),
        "one domain index per vertex"
    );
    let mut degree = vec![0u32; rep.potential.len()];
    for &(u, v) in &rep.edges {
        degree[u as usize] += 1;
        degree[v as usize] += 1;
    }
    let mut angles = Vec::with_capacity(domain.len());
    let mut flags = Vec::with_capacity(domain.len());
    for (i, &f) in rep.potential.iter().enumerate() {
        if degree[i] == 0 {
            angles.push(0.0);
            flags.push(CoordFlag::Isolated);
        } else {
            angles.push(wrap_angle(TAU * f));
            flags.push(CoordFlag::Ok);
        }
    }
    CircularCoordinate {
        angles,
        domain: domain.to_vec(),
        flags,
    }
}

/// Extends a subsample coordinate to every point of `cloud` by Gaussian
/// circular means: weights w(x, y) = exp(-kernel_rate * |x - y|^2) over
/// subsample points y. Points of the subsample keep their angle exactly.
/// A resultant shorter than 1e-8 falls back to the nearest subsample angle
/// and flags the point.
pub fn extend_coordinate(
    coord: &CircularCoordinate,
    cloud: &PointCloud,
    kernel_rate: f64,
) -> CircularCoordinate {
    assert!(!coord.is_empty(), "cannot extend an empty coordinate");
    let n = cloud.len();
    let sub_points: Vec<&[f64]> = coord
        .domain
        .iter()
        .map(|&i| cloud.point(i as usize))
        .collect();
    let in_subsample: std::collections::HashMap<u32, usize> = coord
        .domain
        .iter()
        .enumerate()
        .map(|(pos, &i)| (i, pos))
        .collect();

    let results: Vec<(f64, CoordFlag)> = (0..n)
        .into_par_iter()
        .map(|i| {
            if let Some(&pos) = in_subsample.get(&(i as u32)) {
                return (coord.angles[pos], coord.flags[pos]);
            }
            let x = cloud.point(i);
            let mut re = 0.0f64;
            let mut im = 0.0f64;
            let mut nearest = 0usize;
            let mut nearest_d2 = f64::INFINITY;
            for (pos, y) in sub_points.iter().enumerate() {
                let d2: f64 = x
                    .iter()
                    .zip(y.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if d2 < nearest_d2 {
                    nearest_d2 = d2;
                    nearest = pos;
                }
                let w = (-kernel_rate * d2).exp();
                re += w * coord.angles[pos].cos();
                im += w * coord.angles[pos].sin();
            }
            if (re * re + im * im).sqrt() < DEGENERATE_RESULTANT {
                (coord.angles[nearest], CoordFlag::DegenerateExtension)
            } else {
                (wrap_angle(im.atan2(re)), CoordFlag::Ok)
            }
        })
        .collect();

    let (angles, flags) = results.into_iter().unzip();
    CircularCoordinate {
        angles,
        domain: (0..n as u32).collect(),
        flags,
    }
}
