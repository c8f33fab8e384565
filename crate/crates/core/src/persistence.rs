//! Persistent cohomology of Rips filtrations in dimension 1.
//!
//! The coboundary matrix is reduced column by column in decreasing filtration
//! order over a prime field. This direction of the standard duality yields
//! representative cocycles directly: the accumulated combination of edge
//! indicators for a paired column is a cocycle on every complex strictly
//! below the death scale, which is exactly what circular coordinates need.
//!
//! Columns of edges that kill connected components are skipped (clearing);
//! they always reduce to zero. Cofacets are enumerated through adjacency
//! bitsets, so triangles are never materialized.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

use crate::cloud::PointCloud;
use crate::rips::{Edge, RipsFiltration};

#[derive(Debug, Error)]
pub enum PersistenceError {
    #[error("coefficient modulus {0} is not prime")]
    InvalidPrime(u32),
    #[error(
        "no persistent loop detected: any 1-dimensional features are too small \
         relative to the sampling scale to indicate circular structure"
    )]
    NoLoopDetected,
    #[error(
        "integer lift failed for primes {tried:?}: the lifted cochain has \
         non-zero coboundary on triangle ({u}, {v}, {w}) at scale {scale}"
    )]
    LiftFailed {
        tried: Vec<u32>,
        u: u32,
        v: u32,
        w: u32,
        scale: f64,
    },
}

/// One summand of a mod-p cochain supported on edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CocycleEntry {
    pub u: u32,
    pub v: u32,
    /// Field element in [1, prime).
    pub coeff: u32,
}

/// A dimension-1 bar with its representative cocycle.
#[derive(Debug, Clone)]
pub struct PersistenceBar {
    pub birth: f64,
    /// `f64::INFINITY` when the class survives to `max_scale`.
    pub death: f64,
    /// Sorted by (u, v). Restricting to edges at or below any scale strictly
    /// inside the bar gives a cocycle of the complex at that scale.
    pub representative: Vec<CocycleEntry>,
    pub prime: u32,
}

impl PersistenceBar {
    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }
}

/// Integer-valued cocycle at a fixed working scale.
#[derive(Debug, Clone)]
pub struct IntegerCocycle {
    /// (u, v, value), sorted by (u, v); only edges at or below `scale`.
    pub entries: Vec<(u32, u32, i64)>,
    pub prime: u32,
    pub scale: f64,
}

fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while d.saturating_mul(d) <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

#[inline]
fn mod_inv(a: u64, p: u64) -> u64 {
    // Fermat: a^(p-2) mod p, p prime.
    let mut base = a % p;
    let mut exp = p - 2;
    let mut acc = 1u64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        exp >>= 1;
    }
    acc
}

fn sorted_triple(a: u32, b: u32, c: u32) -> (u32, u32, u32) {
    let (mut x, mut y, mut z) = (a, b, c);
    if x > y {
        std::mem::swap(&mut x, &mut y);
    }
    if y > z {
        std::mem::swap(&mut y, &mut z);
    }
    if x > y {
        std::mem::swap(&mut x, &mut y);
    }
    (x, y, z)
}

/// Sign of edge (a, b), a < b, as a facet of the sorted triangle, or 0.
fn facet_sign(a: u32, b: u32, tri: (u32, u32, u32)) -> i32 {
    let (x, y, z) = tri;
    if (a, b) == (y, z) || (a, b) == (x, y) {
        1
    } else if (a, b) == (x, z) {
        -1
    } else {
        0
    }
}

/// Heap key ordering triangles by (filtration value, vertex triple).
#[derive(Debug, Clone, Copy, PartialEq)]
struct TriKey {
    value: f64,
    tri: (u32, u32, u32),
}

impl Eq for TriKey {}

impl PartialOrd for TriKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TriKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .partial_cmp(&other.value)
            .expect("filtration values are never NaN")
            .then(self.tri.cmp(&other.tri))
    }
}

struct Owner {
    /// Consolidated combination of edge indicators, (edge rank, coeff).
    v_col: Vec<(u32, u32)>,
    /// Coefficient of the reduced column on its pivot triangle.
    pivot_coeff: u32,
}

/// Working column: a lazy min-heap of (triangle, coefficient) summands.
struct WorkingColumn {
    heap: BinaryHeap<std::cmp::Reverse<(TriKey, u32)>>,
}

impl WorkingColumn {
    fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
        }
    }

    fn push(&mut self, key: TriKey, coeff: u32) {
        self.heap.push(std::cmp::Reverse((key, coeff)));
    }

    /// Pops the earliest triangle with non-zero net coefficient.
    fn pop_pivot(&mut self, p: u64) -> Option<(TriKey, u32)> {
        while let Some(std::cmp::Reverse((key, coeff))) = self.heap.pop() {
            let mut net = coeff as u64;
            while let Some(std::cmp::Reverse((next, c))) = self.heap.peek() {
                if next.tri != key.tri {
                    break;
                }
                net += *c as u64;
                self.heap.pop();
            }
            net %= p;
            if net != 0 {
                return Some((key, net as u32));
            }
        }
        None
    }
}

fn consolidate(mut v_col: Vec<(u32, u32)>, p: u64) -> Vec<(u32, u32)> {
    v_col.sort_unstable_by_key(|&(rank, _)| rank);
    let mut out: Vec<(u32, u32)> = Vec::with_capacity(v_col.len());
    for (rank, coeff) in v_col {
        match out.last_mut() {
            Some(last) if last.0 == rank => {
                last.1 = ((last.1 as u64 + coeff as u64) % p) as u32;
            }
            _ => out.push((rank, coeff)),
        }
    }
    out.retain(|&(_, c)| c != 0);
    out
}

fn representative_from(v_col: &[(u32, u32)], edges: &[Edge]) -> Vec<CocycleEntry> {
    let mut rep: Vec<CocycleEntry> = v_col
        .iter()
        .map(|&(rank, coeff)| {
            let e = edges[rank as usize];
            CocycleEntry {
                u: e.u,
                v: e.v,
                coeff,
            }
        })
        .collect();
    rep.sort_unstable_by_key(|c| (c.u, c.v));
    rep
}

/// Dimension-1 persistence bars of the filtration over F_prime, sorted by
/// (persistence descending, birth ascending). Zero-length pairs are omitted.
pub fn persistent_cohomology_h1(
    filt: &RipsFiltration,
    prime: u32,
) -> Result<Vec<PersistenceBar>, PersistenceError> {
    if !is_prime(prime) {
        return Err(PersistenceError::InvalidPrime(prime));
    }
    let p = prime as u64;
    let edges = filt.edges();
    let n = filt.vertex_count();

    // Dimension 0 sweep: edges that merge components reduce to zero in the
    // dimension 1 reduction and are skipped outright.
    let mut parent: Vec<u32> = (0..n as u32).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }
    let mut merges_component = vec![false; edges.len()];
    for (rank, e) in edges.iter().enumerate() {
        let (ru, rv) = (find(&mut parent, e.u), find(&mut parent, e.v));
        if ru != rv {
            parent[ru as usize] = rv;
            merges_component[rank] = true;
        }
    }

    let mut owners: HashMap<(u32, u32, u32), Owner> = HashMap::new();
    let mut bars: Vec<PersistenceBar> = Vec::new();
    let max_scale = filt.max_scale();

    let push_coboundary =
        |col: &mut WorkingColumn, e: &Edge, coeff: u32| {
            filt.for_each_cofacet(e.u, e.v, max_scale, |w, value| {
                let tri = sorted_triple(e.u, e.v, w);
                let signed = if facet_sign(e.u, e.v, tri) > 0 {
                    coeff
                } else {
                    (p - coeff as u64) as u32
                };
                col.push(TriKey { value, tri }, signed);
            });
        };

    for rank in (0..edges.len()).rev() {
        if merges_component[rank] {
            continue;
        }
        let sigma = edges[rank];

        // Fast path: the earliest cofacet is the pivot of the unreduced
        // column. If it is unclaimed, the column is done without any heap
        // work; this covers almost every column on realistic inputs.
        let mut first: Option<TriKey> = None;
        filt.for_each_cofacet(sigma.u, sigma.v, max_scale, |w, value| {
            let key = TriKey {
                value,
                tri: sorted_triple(sigma.u, sigma.v, w),
            };
            if first.map_or(true, |f| key < f) {
                first = Some(key);
            }
        });
        let singleton = vec![(rank as u32, 1u32)];
        match first {
            None => {
                bars.push(PersistenceBar {
                    birth: sigma.value,
                    death: f64::INFINITY,
                    representative: representative_from(&singleton, edges),
                    prime,
                });
                continue;
            }
            Some(key) if !owners.contains_key(&key.tri) => {
                let pivot_coeff = if facet_sign(sigma.u, sigma.v, key.tri) > 0 {
                    1
                } else {
                    (p - 1) as u32
                };
                if key.value > sigma.value {
                    bars.push(PersistenceBar {
                        birth: sigma.value,
                        death: key.value,
                        representative: representative_from(&singleton, edges),
                        prime,
                    });
                }
                owners.insert(
                    key.tri,
                    Owner {
                        v_col: singleton,
                        pivot_coeff,
                    },
                );
                continue;
            }
            Some(_) => {}
        }

        // Slow path: genuine eliminations against registered columns.
        let mut working = WorkingColumn::new();
        push_coboundary(&mut working, &sigma, 1);
        let mut v_col = vec![(rank as u32, 1u32)];
        loop {
            match working.pop_pivot(p) {
                None => {
                    let v_col = consolidate(v_col, p);
                    bars.push(PersistenceBar {
                        birth: sigma.value,
                        death: f64::INFINITY,
                        representative: representative_from(&v_col, edges),
                        prime,
                    });
                    break;
                }
                Some((key, coeff)) => {
                    if let Some(owner) = owners.get(&key.tri) {
                        // working -= (coeff / pivot_coeff) * owner column
                        let lambda =
                            (p - coeff as u64 * mod_inv(owner.pivot_coeff as u64, p) % p) % p;
                        working.push(key, coeff);
                        let terms: Vec<(u32, u32)> = owner
                            .v_col
                            .iter()
                            .map(|&(er, c)| (er, (lambda * c as u64 % p) as u32))
                            .filter(|&(_, c)| c != 0)
                            .collect();
                        for &(er, c) in &terms {
                            push_coboundary(&mut working, &edges[er as usize], c);
                            v_col.push((er, c));
                        }
                    } else {
                        let v_col = consolidate(v_col, p);
                        if key.value > sigma.value {
                            bars.push(PersistenceBar {
                                birth: sigma.value,
                                death: key.value,
                                representative: representative_from(&v_col, edges),
                                prime,
                            });
                        }
                        owners.insert(
                            key.tri,
                            Owner {
                                v_col,
                                pivot_coeff: coeff,
                            },
                        );
                        break;
                    }
                }
            }
        }
    }

    bars.sort_by(|a, b| {
        b.persistence()
            .partial_cmp(&a.persistence())
            .expect("persistence is never NaN")
            .then(
                a.birth
                    .partial_cmp(&b.birth)
                    .expect("birth is never NaN"),
            )
    });
    Ok(bars)
}

/// Diagnostics attached to the chosen bar.
#[derive(Debug, Clone, Copy)]
pub struct BarSelectParams {
    /// Warn when death < factor * median 3rd-nearest-neighbor distance.
    pub smallness_factor: f64,
    /// Warn when the runner-up bar has at least this fraction of the top
    /// bar's persistence.
    pub multiplicity_fraction: f64,
}

impl Default for BarSelectParams {
    fn default() -> Self {
        Self {
            smallness_factor: 2.0,
            multiplicity_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BarSelection {
    /// Index into the bar list of the most persistent bar.
    pub index: usize,
    pub smallness_warning: bool,
    pub multiplicity_warning: bool,
    /// Median distance to the 3rd nearest neighbor, the smallness yardstick.
    pub noise_scale: f64,
}

/// Median distance to the min(3, n-1)-th nearest neighbor.
fn median_third_neighbor(cloud: &PointCloud) -> f64 {
    let n = cloud.len();
    if n < 2 {
        return 0.0;
    }
    let k = 3.min(n - 1);
    let mut kth: Vec<f64> = (0..n)
        .map(|i| {
            let mut ds: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| cloud.dist(i, j)).collect();
            ds.sort_unstable_by(|a, b| a.partial_cmp(b).expect("distances are never NaN"));
            ds[k - 1]
        })
        .collect();
    kth.sort_unstable_by(|a, b| a.partial_cmp(b).expect("distances are never NaN"));
    if n % 2 == 1 {
        kth[n / 2]
    } else {
        0.5 * (kth[n / 2 - 1] + kth[n / 2])
    }
}

/// Picks the most persistent bar and reports whether it is suspiciously
/// small or ambiguous.
pub fn select_bar(
    bars: &[PersistenceBar],
    cloud: &PointCloud,
    params: &BarSelectParams,
) -> Result<BarSelection, PersistenceError> {
    if bars.is_empty() {
        return Err(PersistenceError::NoLoopDetected);
    }
    let mut index = 0;
    for (i, b) in bars.iter().enumerate() {
        let better = b.persistence() > bars[index].persistence()
            || (b.persistence() == bars[index].persistence() && b.birth < bars[index].birth);
        if better {
            index = i;
        }
    }
    let noise_scale = median_third_neighbor(cloud);
    let top = &bars[index];
    let smallness_warning = top.death < params.smallness_factor * noise_scale;
    let runner_up = bars
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != index)
        .map(|(_, b)| b.persistence())
        .fold(f64::NEG_INFINITY, f64::max);
    let multiplicity_warning = bars.len() > 1
        && runner_up >= params.multiplicity_fraction * top.persistence();
    Ok(BarSelection {
        index,
        smallness_warning,
        multiplicity_warning,
        noise_scale,
    })
}

/// Interpolates inside the bar: birth + fraction * (death - birth), with an
/// infinite death standing in for the filtration's max scale.
pub fn choose_scale(bar: &PersistenceBar, max_scale: f64, fraction: f64) -> f64 {
    let death = if bar.death.is_finite() {
        bar.death
    } else {
        max_scale
    };
    bar.birth + fraction * (death - bar.birth)
}

/// Centers a field element of F_p into (-p/2, p/2].
#[inline]
fn center(coeff: u32, prime: u32) -> i64 {
    if coeff as u64 * 2 <= prime as u64 {
        coeff as i64
    } else {
        coeff as i64 - prime as i64
    }
}

fn try_lift(
    bar: &PersistenceBar,
    filt: &RipsFiltration,
    scale: f64,
) -> Result<Vec<(u32, u32, i64)>, (u32, u32, u32)> {
    let mut entries: Vec<(u32, u32, i64)> = bar
        .representative
        .iter()
        .filter(|c| filt.dist(c.u as usize, c.v as usize) <= scale)
        .map(|c| (c.u, c.v, center(c.coeff, bar.prime)))
        .collect();
    entries.sort_unstable_by_key(|&(u, v, _)| (u, v));
    let values: HashMap<(u32, u32), i64> =
        entries.iter().map(|&(u, v, x)| ((u, v), x)).collect();
    // Only triangles touching the support can have non-zero coboundary.
    let mut violation = None;
    for &(u, v, _) in &entries {
        if violation.is_some() {
            break;
        }
        filt.for_each_cofacet(u, v, scale, |w, _| {
            if violation.is_some() {
                return;
            }
            let (x, y, z) = sorted_triple(u, v, w);
            let val = |a: u32, b: u32| values.get(&(a, b)).copied().unwrap_or(0);
            if val(y, z) - val(x, z) + val(x, y) != 0 {
                violation = Some((x, y, z));
            }
        });
    }
    match violation {
        Some(t) => Err(t),
        None => Ok(entries),
    }
}

/// Lifts the bar's representative to integers in (-p/2, p/2] and verifies
/// the cocycle condition exactly on every triangle at the working scale.
///
/// On failure the persistence computation is retried with the remaining
/// primes of `primes`, matching the bar by its endpoints.
pub fn lift_cocycle(
    bar: &PersistenceBar,
    filt: &RipsFiltration,
    scale: f64,
    primes: &[u32],
) -> Result<IntegerCocycle, PersistenceError> {
    let mut tried = vec![bar.prime];
    let mut last_violation = match try_lift(bar, filt, scale) {
        Ok(entries) => {
            return Ok(IntegerCocycle {
                entries,
                prime: bar.prime,
                scale,
            })
        }
        Err(t) => t,
    };
    for &p in primes.iter().filter(|&&p| p != bar.prime) {
        tried.push(p);
        let bars = persistent_cohomology_h1(filt, p)?;
        let matching = bars
            .iter()
            .find(|b| b.birth == bar.birth && b.death == bar.death);
        if let Some(b) = matching {
            match try_lift(b, filt, scale) {
                Ok(entries) => {
                    return Ok(IntegerCocycle {
                        entries,
                        prime: p,
                        scale,
                    })
                }
                Err(t) => last_violation = t,
            }
        }
    }
    Err(PersistenceError::LiftFailed {
        tried,
        u: last_violation.0,
        v: last_violation.1,
        w: last_violation.2,
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::PointCloud;
    use crate::rips::build_rips;
    use approx::assert_abs_diff_eq;

    fn regular_ngon(n: usize, radius: f64) -> PointCloud {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                vec![radius * t.cos(), radius * t.sin()]
            })
            .collect();
        PointCloud::from_rows(&rows).unwrap()
    }

    /// Checks that the representative is a cocycle mod p on every triangle
    /// at `scale`.
    fn assert_cocycle_mod_p(bar: &PersistenceBar, filt: &RipsFiltration, scale: f64) {
        let p = bar.prime as i64;
        let values: HashMap<(u32, u32), i64> = bar
            .representative
            .iter()
            .filter(|c| filt.dist(c.u as usize, c.v as usize) <= scale)
            .map(|c| ((c.u, c.v), c.coeff as i64))
            .collect();
        for t in filt.triangles() {
            if t.value > scale {
                continue;
            }
            let val = |a: u32, b: u32| values.get(&(a, b)).copied().unwrap_or(0);
            let delta = val(t.v, t.w) - val(t.u, t.w) + val(t.u, t.v);
            assert_eq!(delta.rem_euclid(p), 0, "triangle {:?} at scale {scale}", t);
        }
    }

    #[test]
    fn unit_square_bar() {
        // Vertices of the unit square: side 1, diagonal sqrt(2).
        let cloud = PointCloud::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        let filt = build_rips(&cloud, 2.0, u64::MAX).unwrap();
        let bars = persistent_cohomology_h1(&filt, 47).unwrap();
        assert_eq!(bars.len(), 1);
        assert_abs_diff_eq!(bars[0].birth, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bars[0].death, 2f64.sqrt(), epsilon = 1e-12);
        assert_cocycle_mod_p(&bars[0], &filt, 1.2);
    }

    #[test]
    fn hexagon_bar() {
        let cloud = regular_ngon(6, 1.0);
        let filt = build_rips(&cloud, 2.5, u64::MAX).unwrap();
        let bars = persistent_cohomology_h1(&filt, 47).unwrap();
        assert!(!bars.is_empty());
        assert_abs_diff_eq!(bars[0].birth, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bars[0].death, 3f64.sqrt(), epsilon = 1e-12);
        // Any further bars are filtration ties with zero persistence, which
        // are dropped, so the hexagon yields exactly one bar.
        assert_eq!(bars.len(), 1);
        assert_cocycle_mod_p(&bars[0], &filt, 1.3);
    }

    #[test]
    fn duplicate_point_does_not_move_the_bar() {
        let base = regular_ngon(6, 1.0);
        let mut rows: Vec<Vec<f64>> = base.iter_points().map(|p| p.to_vec()).collect();
        rows.push(rows[2].clone());
        let cloud = PointCloud::from_rows(&rows).unwrap();
        let filt = build_rips(&cloud, 2.5, u64::MAX).unwrap();
        let bars = persistent_cohomology_h1(&filt, 47).unwrap();
        assert_abs_diff_eq!(bars[0].birth, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bars[0].death, 3f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn truncated_square_gives_essential_bar() {
        let cloud = PointCloud::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        let filt = build_rips(&cloud, 1.2, u64::MAX).unwrap();
        let bars = persistent_cohomology_h1(&filt, 47).unwrap();
        assert_eq!(bars.len(), 1);
        assert_abs_diff_eq!(bars[0].birth, 1.0, epsilon = 1e-12);
        assert!(bars[0].death.is_infinite());
        // Infinite death falls back to max_scale when choosing the scale.
        let s = choose_scale(&bars[0], filt.max_scale(), 0.5);
        assert_abs_diff_eq!(s, 1.1, epsilon = 1e-12);
    }

    #[test]
    fn scale_is_interpolated_inside_the_bar() {
        let bar = PersistenceBar {
            birth: 1.0,
            death: 2.0,
            representative: vec![],
            prime: 47,
        };
        assert_abs_diff_eq!(choose_scale(&bar, 9.0, 0.5), 1.5);
        assert_abs_diff_eq!(choose_scale(&bar, 9.0, 0.25), 1.25);
    }

    #[test]
    fn select_bar_warnings() {
        // Dense circle sample: 3rd-neighbor distance 2*sin(3*pi/64) ~ 0.29,
        // so the smallness threshold sits near 0.59.
        let cloud = regular_ngon(64, 1.0);
        let mk = |birth: f64, death: f64| PersistenceBar {
            birth,
            death,
            representative: vec![],
            prime: 47,
        };
        let params = BarSelectParams::default();
        // Long unambiguous bar: no warnings on a clean octagon.
        let sel = select_bar(&[mk(0.8, 1.7)], &cloud, &params).unwrap();
        assert_eq!(sel.index, 0);
        assert!(!sel.smallness_warning);
        assert!(!sel.multiplicity_warning);
        // Death below twice the 3rd-neighbor scale: smallness warning.
        let sel = select_bar(&[mk(0.1, 0.2)], &cloud, &params).unwrap();
        assert!(sel.smallness_warning);
        // Competitive runner-up: multiplicity warning.
        let sel = select_bar(&[mk(0.8, 1.7), mk(0.9, 1.5)], &cloud, &params).unwrap();
        assert_eq!(sel.index, 0);
        assert!(sel.multiplicity_warning);
        // Weak runner-up: no multiplicity warning.
        let sel = select_bar(&[mk(0.8, 1.7), mk(0.9, 1.0)], &cloud, &params).unwrap();
        assert!(!sel.multiplicity_warning);
        assert!(matches!(
            select_bar(&[], &cloud, &params),
            Err(PersistenceError::NoLoopDetected)
        ));
    }

    #[test]
    fn octagon_lift_is_the_identity_on_small_entries() {
        // Below any triangle the representative is a single edge with
        // coefficient 1; the lift must reproduce it verbatim.
        let cloud = regular_ngon(8, 1.0);
        let side = cloud.dist(0, 1);
        let filt = build_rips(&cloud, side + 1e-9, u64::MAX).unwrap();
        let bars = persistent_cohomology_h1(&filt, 47).unwrap();
        assert_eq!(bars.len(), 1);
        assert_eq!(bars[0].representative.len(), 1);
        assert_eq!(bars[0].representative[0].coeff, 1);
        let lifted = lift_cocycle(&bars[0], &filt, side + 1e-9, &[47, 53, 59]).unwrap();
        assert_eq!(lifted.prime, 47);
        assert_eq!(lifted.entries.len(), 1);
        assert_eq!(lifted.entries[0].2, 1);
    }

    #[test]
    fn lift_centers_large_residues() {
        let cloud = regular_ngon(8, 1.0);
        let side = cloud.dist(0, 1);
        let filt = build_rips(&cloud, side + 1e-9, u64::MAX).unwrap();
        let bar = PersistenceBar {
            birth: side,
            death: f64::INFINITY,
            representative: vec![CocycleEntry {
                u: 0,
                v: 1,
                coeff: 46,
            }],
            prime: 47,
        };
        let lifted = lift_cocycle(&bar, &filt, side + 1e-9, &[47]).unwrap();
        assert_eq!(lifted.entries, vec![(0, 1, -1)]);
    }

    #[test]
    fn representative_is_a_cocycle_at_interior_scales() {
        let cloud = regular_ngon(9, 1.0);
        let filt = build_rips(&cloud, 2.5, u64::MAX).unwrap();
        let bars = persistent_cohomology_h1(&filt, 47).unwrap();
        let top = &bars[0];
        for f in [0.1, 0.5, 0.9] {
            let scale = top.birth + f * (top.death - top.birth);
            assert_cocycle_mod_p(top, &filt, scale);
            let lifted = lift_cocycle(top, &filt, scale, &[47, 53, 59]).unwrap();
            // Lift verified exactly over the integers.
            assert!(!lifted.entries.is_empty());
        }
    }

    #[test]
    fn two_distant_loops_give_two_bars() {
        let mut rows: Vec<Vec<f64>> = regular_ngon(6, 1.0)
            .iter_points()
            .map(|p| p.to_vec())
            .collect();
        for p in regular_ngon(6, 1.0).iter_points() {
            rows.push(vec![p[0] + 100.0, p[1]]);
        }
        let cloud = PointCloud::from_rows(&rows).unwrap();
        let filt = build_rips(&cloud, 2.5, u64::MAX).unwrap();
        let bars = persistent_cohomology_h1(&filt, 47).unwrap();
        assert_eq!(bars.len(), 2);
        for b in &bars {
            assert_abs_diff_eq!(b.birth, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(b.death, 3f64.sqrt(), epsilon = 1e-12);
        }
    }
}
