//! Shared integration-test helpers.

use std::collections::{BTreeMap, HashMap};

use loopcoords::cloud::{dist, PointCloud};

/// Birth/death pair; death is `f64::INFINITY` for essential classes.
pub type Bar = (f64, f64);

fn mod_pow(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        exp >>= 1;
    }
    acc
}

/// Dimension-1 barcode of the Rips filtration on `cloud` truncated at
/// `max_scale`, computed by the textbook column reduction of the boundary
/// matrix over F_prime. Structurally independent of the library's cohomology
/// reduction: one global simplex table, map-backed columns, no clearing, no
/// lazy cofacet walks. Positive-length bars only, sorted by (birth, death).
pub fn h1_barcode_oracle(cloud: &PointCloud, max_scale: f64, prime: u32) -> Vec<Bar> {
    let p = prime as u64;
    let n = cloud.len();

    let mut simplices: Vec<(f64, usize, [u32; 3])> = Vec::new();
    for v in 0..n as u32 {
        simplices.push((0.0, 0, [v, 0, 0]));
    }
    for u in 0..n {
        for v in (u + 1)..n {
            let duv = dist(cloud.point(u), cloud.point(v));
            if duv > max_scale {
                continue;
            }
            simplices.push((duv, 1, [u as u32, v as u32, 0]));
            for w in (v + 1)..n {
                let value = duv
                    .max(dist(cloud.point(u), cloud.point(w)))
                    .max(dist(cloud.point(v), cloud.point(w)));
                if value <= max_scale {
                    simplices.push((value, 2, [u as u32, v as u32, w as u32]));
                }
            }
        }
    }
    // Faces precede cofaces: by value, then dimension, then vertex order.
    simplices.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut index: HashMap<(usize, [u32; 3]), usize> = HashMap::new();
    for (i, s) in simplices.iter().enumerate() {
        index.insert((s.1, s.2), i);
    }

    // low_owner maps a row index to the reduced column pivoting there.
    let mut low_owner: HashMap<usize, usize> = HashMap::new();
    let mut columns: Vec<BTreeMap<usize, u64>> = vec![BTreeMap::new(); simplices.len()];
    let mut positive = vec![false; simplices.len()];
    let mut bars: Vec<Bar> = Vec::new();

    for j in 0..simplices.len() {
        let (value_j, dim, verts) = simplices[j];
        let mut col: BTreeMap<usize, u64> = BTreeMap::new();
        match dim {
            0 => {}
            1 => {
                col.insert(index[&(0, [verts[1], 0, 0])], 1);
                col.insert(index[&(0, [verts[0], 0, 0])], p - 1);
            }
            2 => {
                let edge = |a: u32, b: u32| index[&(1, [a, b, 0])];
                col.insert(edge(verts[1], verts[2]), 1);
                col.insert(edge(verts[0], verts[2]), p - 1);
                col.insert(edge(verts[0], verts[1]), 1);
            }
            _ => unreachable!(),
        }
        while let Some((&low, &coeff)) = col.last_key_value() {
            let Some(&owner) = low_owner.get(&low) else {
                break;
            };
            let owner_col = &columns[owner];
            let factor = coeff * mod_pow(owner_col[&low], p - 2, p) % p;
            for (&i, &c) in owner_col {
                let cur = col.remove(&i).unwrap_or(0);
                let next = (cur + (p - factor) * c % p) % p;
                if next != 0 {
                    col.insert(i, next);
                }
            }
        }
        if let Some((&low, _)) = col.last_key_value() {
            low_owner.insert(low, j);
            if simplices[low].1 == 1 && value_j > simplices[low].0 {
                bars.push((simplices[low].0, value_j));
            }
            columns[j] = col;
        } else {
            positive[j] = true;
        }
    }
    // Positive edges never taken as a pivot carry essential classes.
    for (i, s) in simplices.iter().enumerate() {
        if s.1 == 1 && positive[i] && !low_owner.contains_key(&i) {
            bars.push((s.0, f64::INFINITY));
        }
    }
    bars.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bars
}
