//! Density estimation and density-equalizing rejection subsampling.
//!
//! Recurrent data oversamples slow regions of a loop. Subsampling each point
//! with probability inversely proportional to a local density estimate
//! equalizes coverage before any topology is computed.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cloud::PointCloud;
use crate::stream;

/// Subsamples smaller than this are unreliable for persistence and are
/// flagged rather than silently used.
pub const MIN_SUBSAMPLE_POINTS: usize = 4;

#[derive(Debug, Error)]
pub enum DensityError {
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("all points coincide, covariance has no positive eigenvalue")]
    ZeroVariance,
    #[error("bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),
    #[error("density field has {density} entries but cloud has {cloud} points")]
    LengthMismatch { density: usize, cloud: usize },
    #[error("target size must be positive")]
    ZeroTarget,
}

/// Ball-count density estimates over a fixed cloud.
#[derive(Debug, Clone, Serialize)]
pub struct DensityField {
    /// Number of cloud points (self included) inside the closed radius-
    /// `bandwidth` ball around each point. Always >= 1.
    pub values: Vec<f64>,
    pub bandwidth: f64,
}

/// Per-point Bernoulli acceptance probabilities for one subsample draw.
#[derive(Debug, Clone, Serialize)]
pub struct AcceptanceField {
    /// m / density[i], all in [0, 1].
    pub probabilities: Vec<f64>,
    /// The constant m = min(min_i density[i], target / sum_i 1/density[i]).
    pub floor_constant: f64,
}

/// Index sets of the drawn subsamples, each strictly increasing.
#[derive(Debug, Clone, Serialize)]
pub struct SubsampleSet {
    pub subsamples: Vec<Vec<usize>>,
    pub seed: u64,
    /// Indices of subsamples with fewer than [`MIN_SUBSAMPLE_POINTS`] points.
    pub undersized: Vec<usize>,
}

/// Scott's-rule bandwidth: sigma * n^(-1/(d+4)) where sigma^2 is the
/// geometric mean of the positive eigenvalues of the sample covariance and
/// `intrinsic_dim` is the dimension d of the structure being resolved.
pub fn scott_bandwidth(cloud: &PointCloud, intrinsic_dim: usize) -> Result<f64, DensityError> {
    let n = cloud.len();
    if n < 2 {
        return Err(DensityError::TooFewPoints(n));
    }
    let d = cloud.dim();
    let mut mean = vec![0.0; d];
    for p in cloud.iter_points() {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov: DMatrix<f64> = DMatrix::zeros(d, d);
    for p in cloud.iter_points() {
        for a in 0..d {
            for b in a..d {
                cov[(a, b)] += (p[a] - mean[a]) * (p[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let eigen = cov.symmetric_eigen();
    let max_eig = eigen.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if max_eig <= 0.0 {
        return Err(DensityError::ZeroVariance);
    }
    // Eigenvalues within rounding error of zero are treated as rank loss.
    let tol = max_eig * 1e-12;
    let mut log_sum = 0.0f64;
    let mut count = 0usize;
    for &l in eigen.eigenvalues.iter() {
        if l > tol {
            log_sum += l.ln();
            count += 1;
        }
    }
    let sigma_sq = (log_sum / count as f64).exp();
    Ok(sigma_sq.sqrt() * (n as f64).powf(-1.0 / (intrinsic_dim as f64 + 4.0)))
}

/// Counts cloud points in the closed `epsilon`-ball around each point.
pub fn estimate_density(cloud: &PointCloud, epsilon: f64) -> Result<DensityField, DensityError> {
    if !(epsilon > 0.0) {
        return Err(DensityError::NonPositiveBandwidth(epsilon));
    }
    let n = cloud.len();
    if n == 0 {
        return Err(DensityError::TooFewPoints(0));
    }
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut count = 0u64;
            for j in 0..n {
                if cloud.dist(i, j) <= epsilon {
                    count += 1;
                }
            }
            count as f64
        })
        .collect();
    Ok(DensityField {
        values,
        bandwidth: epsilon,
    })
}

/// Acceptance probabilities m / density with the largest constant m that
/// keeps every probability at most 1 and the expected subsample size at most
/// `target_size`.
pub fn make_acceptance(
    density: &DensityField,
    target_size: usize,
) -> Result<AcceptanceField, DensityError> {
    if target_size == 0 {
        return Err(DensityError::ZeroTarget);
    }
    if density.values.is_empty() {
        return Err(DensityError::TooFewPoints(0));
    }
    let min_density = density.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let inv_sum: f64 = density.values.iter().map(|v| 1.0 / v).sum();
    let m = min_density.min(target_size as f64 / inv_sum);
    let probabilities = density.values.iter().map(|v| m / v).collect();
    Ok(AcceptanceField {
        probabilities,
        floor_constant: m,
    })
}

/// Draws `k` independent subsamples. Point `z` enters subsample `i` iff the
/// uniform draw keyed by `(seed, i, z)` falls below its acceptance
/// probability, so the result does not depend on evaluation order.
pub fn rejection_sample(
    cloud: &PointCloud,
    acceptance: &AcceptanceField,
    k: usize,
    seed: u64,
) -> Result<SubsampleSet, DensityError> {
    let n = cloud.len();
    if acceptance.probabilities.len() != n {
        return Err(DensityError::LengthMismatch {
            density: acceptance.probabilities.len(),
            cloud: n,
        });
    }
    let subsamples: Vec<Vec<usize>> = (0..k)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .filter(|&z| {
                    stream::unit_f64(&[seed, i as u64, z as u64]) < acceptance.probabilities[z]
                })
                .collect()
        })
        .collect();
    let undersized = subsamples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.len() < MIN_SUBSAMPLE_POINTS)
        .map(|(i, _)| i)
        .collect();
    Ok(SubsampleSet {
        subsamples,
        seed,
        undersized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    // 64 points whose sample covariance (n-1 normalization) is exactly the
    // 2x2 identity: 16 copies of each axis point scaled by sqrt(63/32).
    fn identity_cov_cloud() -> PointCloud {
        let c = (63.0f64 / 32.0).sqrt();
        let mut rows = Vec::new();
        for _ in 0..16 {
            rows.push(vec![c, 0.0]);
            rows.push(vec![-c, 0.0]);
            rows.push(vec![0.0, c]);
            rows.push(vec![0.0, -c]);
        }
        PointCloud::from_rows(&rows).unwrap()
    }

    #[test]
    fn scott_identity_covariance() {
        // sigma = 1, n = 64, d = 2: bandwidth 64^(-1/6) = 1/2.
        let eps = scott_bandwidth(&identity_cov_cloud(), 2).unwrap();
        assert_abs_diff_eq!(eps, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn scott_anisotropic_covariance() {
        // Doubling x stretches the covariance to diag(4, 1); the geometric
        // mean of the eigenvalues is 2, so the bandwidth becomes sqrt(2)/2.
        let base = identity_cov_cloud();
        let rows: Vec<Vec<f64>> = base
            .iter_points()
            .map(|p| vec![2.0 * p[0], p[1]])
            .collect();
        let cloud = PointCloud::from_rows(&rows).unwrap();
        let eps = scott_bandwidth(&cloud, 2).unwrap();
        assert_abs_diff_eq!(eps, 2.0f64.sqrt() / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn scott_rank_deficient_uses_positive_eigenvalues() {
        // Points on a line in the plane: one zero eigenvalue is ignored.
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let cloud = PointCloud::from_rows(&rows).unwrap();
        let eps = scott_bandwidth(&cloud, 1).unwrap();
        let var = {
            let vals: Vec<f64> = (0..10)
                .map(|i| {
                    let x = i as f64 - 4.5;
                    5.0 * x * x // squared norm of (x, 2x)
                })
                .collect();
            vals.iter().sum::<f64>() / 9.0
        };
        assert_abs_diff_eq!(eps, var.sqrt() * 10f64.powf(-0.2), epsilon = 1e-12);
    }

    #[test]
    fn scott_degenerate_cloud_errors() {
        let cloud = PointCloud::from_rows(&vec![vec![1.0, 1.0]; 5]).unwrap();
        assert!(matches!(
            scott_bandwidth(&cloud, 2),
            Err(DensityError::ZeroVariance)
        ));
    }

    #[test]
    fn counts_use_closed_balls_and_include_self() {
        let cloud =
            PointCloud::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let d = estimate_density(&cloud, 1.0).unwrap();
        assert_eq!(d.values, vec![2.0, 3.0, 2.0]);
    }

    #[test]
    fn acceptance_example() {
        let density = DensityField {
            values: vec![1.0, 4.0],
            bandwidth: 1.0,
        };
        let acc = make_acceptance(&density, 1).unwrap();
        assert_abs_diff_eq!(acc.floor_constant, 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(acc.probabilities[0], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(acc.probabilities[1], 0.2, epsilon = 1e-15);
    }

    #[test]
    fn acceptance_capped_by_min_density() {
        // A huge target cannot push any probability above 1.
        let density = DensityField {
            values: vec![2.0, 8.0],
            bandwidth: 1.0,
        };
        let acc = make_acceptance(&density, 1000).unwrap();
        assert_abs_diff_eq!(acc.floor_constant, 2.0);
        assert_eq!(acc.probabilities, vec![1.0, 0.25]);
    }

    fn grid_cloud(n: usize) -> PointCloud {
        PointCloud::from_rows(&(0..n).map(|i| vec![i as f64 * 10.0]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn all_or_nothing_probabilities() {
        let cloud = grid_cloud(6);
        let ones = AcceptanceField {
            probabilities: vec![1.0; 6],
            floor_constant: 1.0,
        };
        let set = rejection_sample(&cloud, &ones, 3, 9).unwrap();
        assert!(set.subsamples.iter().all(|s| s == &[0, 1, 2, 3, 4, 5]));
        assert!(set.undersized.is_empty());

        let zeros = AcceptanceField {
            probabilities: vec![0.0; 6],
            floor_constant: 0.0,
        };
        let set = rejection_sample(&cloud, &zeros, 3, 9).unwrap();
        assert!(set.subsamples.iter().all(|s| s.is_empty()));
        assert_eq!(set.undersized, vec![0, 1, 2]);
    }

    #[test]
    fn mean_subsample_size_matches_expectation() {
        // With p = 0.5 on 400 points, E|X| = 200 and sd = 10; the mean of
        // 200 subsamples stays within 3 sd of the per-draw mean scaled down.
        let n = 400;
        let k = 200;
        let cloud = grid_cloud(n);
        let acc = AcceptanceField {
            probabilities: vec![0.5; n],
            floor_constant: 0.5,
        };
        let set = rejection_sample(&cloud, &acc, k, 2024).unwrap();
        let mean: f64 =
            set.subsamples.iter().map(|s| s.len() as f64).sum::<f64>() / k as f64;
        let sd_of_mean = (n as f64 * 0.25 / k as f64).sqrt();
        assert!((mean - 200.0).abs() < 3.0 * sd_of_mean, "mean {mean}");
    }

    proptest! {
        #[test]
        fn density_is_permutation_equivariant(perm_seed in 0u64..1000) {
            let rows: Vec<Vec<f64>> = (0..20)
                .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.71).cos()])
                .collect();
            let cloud = PointCloud::from_rows(&rows).unwrap();
            let base = estimate_density(&cloud, 0.5).unwrap();

            let mut order: Vec<usize> = (0..20).collect();
            // Fisher-Yates with the keyed stream.
            for i in (1..20usize).rev() {
                let j = (stream::unit_f64(&[perm_seed, i as u64]) * (i as f64 + 1.0)) as usize;
                order.swap(i, j.min(i));
            }
            let permuted = cloud.select(&order);
            let perm_density = estimate_density(&permuted, 0.5).unwrap();
            for (new_idx, &old_idx) in order.iter().enumerate() {
                prop_assert_eq!(perm_density.values[new_idx], base.values[old_idx]);
            }
        }

        #[test]
        fn subsamples_are_valid_and_reproducible(seed in 0u64..500, k in 1usize..6) {
            let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
            let cloud = PointCloud::from_rows(&rows).unwrap();
            let density = estimate_density(&cloud, 1.5).unwrap();
            let acc = make_acceptance(&density, 10).unwrap();
            for p in &acc.probabilities {
                prop_assert!((0.0..=1.0).contains(p));
            }
            prop_assert!(
                acc.floor_constant
                    <= density.values.iter().cloned().fold(f64::INFINITY, f64::min)
            );
            let a = rejection_sample(&cloud, &acc, k, seed).unwrap();
            let b = rejection_sample(&cloud, &acc, k, seed).unwrap();
            prop_assert_eq!(&a.subsamples, &b.subsamples);
            for s in &a.subsamples {
                prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(s.iter().all(|&z| z < 30));
            }
        }
    }
}
