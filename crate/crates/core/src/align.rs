//! O(2) Procrustes alignment of circle-valued configurations.
//!
//! An ensemble of circular coordinates agrees only up to rotation and
//! reflection of each member. Alignment first solves the planar orthogonal
//! Procrustes problem on the unit-vector embeddings (alternating 2x2 SVD
//! sweeps), projects the planar centroid back to the circle, then refines
//! rotations and centroid angles by a deterministic hill climb on the
//! genuine circle loss. Reflections are resolved by the seed and frozen
//! during the climb.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circular::{wrap_angle, CircularCoordinate, CoordFlag, TAU};

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("alignment needs at least 2 configurations, got {0}")]
    TooFewConfigurations(usize),
    #[error("configuration {index} has {got} points, expected {expected}")]
    LengthMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("configurations share one domain; configuration {0} differs")]
    DomainMismatch(usize),
}

/// Ordered points on the circle.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    /// Angles in [0, 2 pi).
    pub angles: Vec<f64>,
}

impl Configuration {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

/// A rotation or a reflection of the circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct O2Element {
    pub reflect: bool,
    /// In [0, 2 pi).
    pub rotation: f64,
}

impl O2Element {
    pub fn identity() -> Self {
        Self {
            reflect: false,
            rotation: 0.0,
        }
    }

    /// rotation + theta, or rotation - theta when reflecting.
    pub fn apply(&self, theta: f64) -> f64 {
        if self.reflect {
            wrap_angle(self.rotation - theta)
        } else {
            wrap_angle(self.rotation + theta)
        }
    }

    fn from_matrix(g: &Matrix2<f64>) -> Self {
        let reflect = g.determinant() < 0.0;
        // Both branches place (cos r, sin r) in the first column.
        let rotation = wrap_angle(g[(1, 0)].atan2(g[(0, 0)]));
        Self { reflect, rotation }
    }

    /// The element as an orthogonal matrix acting on unit vectors.
    pub fn to_matrix(&self) -> Matrix2<f64> {
        let (s, c) = self.rotation.sin_cos();
        if self.reflect {
            Matrix2::new(c, s, s, -c)
        } else {
            Matrix2::new(c, -s, s, c)
        }
    }
}

/// Arc-length distance on the circle, in [0, pi].
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// (1/k) sum over configurations and points of the squared arc distance
/// between the transformed point and the centroid point.
pub fn circle_loss(
    transforms: &[O2Element],
    centroid: &Configuration,
    configs: &[Configuration],
) -> Result<f64, AlignError> {
    if transforms.len() != configs.len() {
        return Err(AlignError::LengthMismatch {
            index: transforms.len().min(configs.len()),
            expected: configs.len(),
            got: transforms.len(),
        });
    }
    let n = centroid.len();
    for (i, c) in configs.iter().enumerate() {
        if c.len() != n {
            return Err(AlignError::LengthMismatch {
                index: i,
                expected: n,
                got: c.len(),
            });
        }
    }
    let k = configs.len().max(1);
    let mut total = 0.0;
    for (g, c) in transforms.iter().zip(configs) {
        for (&phi, &theta) in c.angles.iter().zip(&centroid.angles) {
            let d = circle_dist(g.apply(phi), theta);
            total += d * d;
        }
    }
    Ok(total / k as f64)
}

/// Output of the planar seeding stage.
#[derive(Debug, Clone)]
pub struct SeedResult {
    pub transforms: Vec<O2Element>,
    pub centroid: Configuration,
    /// Mean squared planar distance to the planar centroid, per
    /// configuration (the quantity the sweeps minimize).
    pub planar_loss: f64,
    /// Centroid indices whose planar mean was shorter than 1e-8; their
    /// angle was copied from transformed configuration 1.
    pub degenerate_points: Vec<u32>,
    pub sweeps: usize,
}

const SEED_TOLERANCE: f64 = 1e-10;
const SEED_MAX_SWEEPS: usize = 1000;
const DEGENERATE_CENTROID: f64 = 1e-8;

fn planar_embed(config: &Configuration) -> Vec<(f64, f64)> {
    config.angles.iter().map(|&a| (a.cos(), a.sin())).collect()
}

fn planar_loss(points: &[Vec<(f64, f64)>]) -> f64 {
    let k = points.len();
    let n = points[0].len();
    let mut total = 0.0;
    for j in 0..n {
        let (mut cx, mut cy) = (0.0, 0.0);
        for pts in points {
            cx += pts[j].0;
            cy += pts[j].1;
        }
        cx /= k as f64;
        cy /= k as f64;
        for pts in points {
            let (dx, dy) = (pts[j].0 - cx, pts[j].1 - cy);
            total += dx * dx + dy * dy;
        }
    }
    total / k as f64
}

/// Generalized orthogonal Procrustes over O(2): alternating sweeps solving
/// each transform against the mean of the others, then projecting the
/// planar centroid radially back to the circle.
pub fn procrustes_o2_seed(configs: &[Configuration]) -> Result<SeedResult, AlignError> {
    let k = configs.len();
    if k < 2 {
        return Err(AlignError::TooFewConfigurations(k));
    }
    let n = configs[0].len();
    for (i, c) in configs.iter().enumerate() {
        if c.len() != n {
            return Err(AlignError::LengthMismatch {
                index: i,
                expected: n,
                got: c.len(),
            });
        }
    }

    let base: Vec<Vec<(f64, f64)>> = configs.iter().map(planar_embed).collect();
    let mut transforms = vec![O2Element::identity(); k];
    // Transformed copies, updated in place as transforms move.
    let mut moved = base.clone();
    let mut loss = planar_loss(&moved);
    let mut sweeps = 0;
    while sweeps < SEED_MAX_SWEEPS {
        sweeps += 1;
        for i in 0..k {
            // Cross-covariance of configuration i against the mean of the
            // other transformed configurations.
            let mut b = Matrix2::<f64>::zeros();
            for j in 0..n {
                let (mut mx, mut my) = (0.0, 0.0);
                for (l, pts) in moved.iter().enumerate() {
                    if l != i {
                        mx += pts[j].0;
                        my += pts[j].1;
                    }
                }
                mx /= (k - 1) as f64;
                my /= (k - 1) as f64;
                let (x, y) = base[i][j];
                b[(0, 0)] += mx * x;
                b[(0, 1)] += mx * y;
                b[(1, 0)] += my * x;
                b[(1, 1)] += my * y;
            }
            if b.norm() < 1e-15 {
                continue;
            }
            let svd = b.svd(true, true);
            let g = svd.u.expect("2x2 svd") * svd.v_t.expect("2x2 svd");
            transforms[i] = O2Element::from_matrix(&g);
            for (m, &(x, y)) in moved[i].iter_mut().zip(&base[i]) {
                let p = g * nalgebra::Vector2::new(x, y);
                *m = (p[0], p[1]);
            }
        }
        let new_loss = planar_loss(&moved);
        let done = (loss - new_loss).abs() < SEED_TOLERANCE;
        loss = new_loss;
        if done {
            break;
        }
    }

    let mut centroid = Vec::with_capacity(n);
    let mut degenerate_points = Vec::new();
    for j in 0..n {
        let (mut cx, mut cy) = (0.0, 0.0);
        for pts in &moved {
            cx += pts[j].0;
            cy += pts[j].1;
        }
        cx /= k as f64;
        cy /= k as f64;
        if (cx * cx + cy * cy).sqrt() < DEGENERATE_CENTROID {
            // No preferred direction; break the tie with configuration 1.
            let (x, y) = moved[0][j];
            centroid.push(wrap_angle(y.atan2(x)));
            degenerate_points.push(j as u32);
        } else {
            centroid.push(wrap_angle(cy.atan2(cx)));
        }
    }

    Ok(SeedResult {
        transforms,
        centroid: Configuration { angles: centroid },
        planar_loss: loss,
        degenerate_points,
        sweeps,
    })
}

/// Hill-climb schedule and stopping rules.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HillClimbParams {
    /// Step at iteration t is rate0 / (1 + t) radians.
    pub rate0: f64,
    /// Stop when one iteration decreases the loss by less than this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for HillClimbParams {
    fn default() -> Self {
        Self {
            rate0: 0.1,
            tol: 1e-8,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlignmentResult {
    pub transforms: Vec<O2Element>,
    pub centroid: Configuration,
    /// Circle loss at the seed, then after every iteration that accepted
    /// at least one move. Non-increasing.
    pub loss_trace: Vec<f64>,
    /// True when the climb stopped by itself (an accepting iteration
    /// improved by less than the tolerance, or the step decayed past the
    /// point of producing moves); false when the iteration cap fired.
    pub converged: bool,
    /// Forwarded from the seed.
    pub degenerate_points: Vec<u32>,
}

impl AlignmentResult {
    pub fn final_loss(&self) -> f64 {
        *self.loss_trace.last().expect("trace contains the seed loss")
    }
}

/// Indifference zone for accepting a candidate move: protects the
/// non-increasing loss trace from summation roundoff, and makes exact ties
/// keep the current position.
const ACCEPT_MARGIN: f64 = 1e-14;

/// Zero-accept iterations with a still-large step may just need the step
/// to decay (a residual of 0.05 rad is untouchable at step 0.1), so
/// convergence is only declared after this many consecutive idle
/// iterations, or after an accepting iteration with a sub-tolerance gain.
const IDLE_ITERATIONS_TO_CONVERGE: usize = 10;

/// Refines rotations and centroid angles, both in index order, choosing
/// per element among {+step, -step, 0} by the global circle loss.
/// Reflections stay as seeded.
pub fn hill_climb(
    seed: &SeedResult,
    configs: &[Configuration],
    params: &HillClimbParams,
) -> Result<AlignmentResult, AlignError> {
    let k = configs.len();
    let n = seed.centroid.len();
    let mut transforms = seed.transforms.clone();
    let mut centroid = seed.centroid.angles.clone();
    // Transformed angles, kept in sync with `transforms`.
    let mut psi: Vec<Vec<f64>> = transforms
        .iter()
        .zip(configs)
        .map(|(g, c)| c.angles.iter().map(|&a| g.apply(a)).collect())
        .collect();

    let full_loss = |psi: &[Vec<f64>], centroid: &[f64]| -> f64 {
        let mut total = 0.0;
        for row in psi {
            for (&a, &t) in row.iter().zip(centroid) {
                let d = circle_dist(a, t);
                total += d * d;
            }
        }
        total / k as f64
    };

    let mut loss = circle_loss(
        &transforms,
        &Configuration {
            angles: centroid.clone(),
        },
        configs,
    )?;
    let mut trace = vec![loss];
    let mut converged = false;
    let mut idle = 0usize;

    for t in 0..params.max_iter {
        let step = params.rate0 / (1.0 + t as f64);
        let mut any_accept = false;

        // Rotating transform i shifts every angle of row i by the same
        // delta, reflected or not.
        for i in 0..k {
            let row_cost = |delta: f64| -> f64 {
                psi[i]
                    .iter()
                    .zip(&centroid)
                    .map(|(&a, &t)| {
                        let d = circle_dist(a + delta, t);
                        d * d
                    })
                    .sum()
            };
            let current = row_cost(0.0);
            let mut best = current;
            let mut best_delta = 0.0;
            for delta in [step, -step] {
                let c = row_cost(delta);
                if c < best - ACCEPT_MARGIN {
                    best = c;
                    best_delta = delta;
                }
            }
            if best_delta != 0.0 {
                any_accept = true;
                transforms[i].rotation = wrap_angle(transforms[i].rotation + best_delta);
                for a in &mut psi[i] {
                    *a = wrap_angle(*a + best_delta);
                }
            }
        }

        for j in 0..n {
            let point_cost = |theta: f64| -> f64 {
                psi.iter()
                    .map(|row| {
                        let d = circle_dist(row[j], theta);
                        d * d
                    })
                    .sum()
            };
            let current = point_cost(centroid[j]);
            let mut best = current;
            let mut best_theta = centroid[j];
            for delta in [step, -step] {
                let cand = wrap_angle(centroid[j] + delta);
                let c = point_cost(cand);
                if c < best - ACCEPT_MARGIN {
                    best = c;
                    best_theta = cand;
                }
            }
            if best_theta != centroid[j] {
                any_accept = true;
                centroid[j] = best_theta;
            }
        }

        let new_loss = full_loss(&psi, &centroid);
        if any_accept {
            trace.push(new_loss);
            idle = 0;
            if loss - new_loss < params.tol {
                converged = true;
                break;
            }
        } else {
            idle += 1;
            if idle >= IDLE_ITERATIONS_TO_CONVERGE {
                converged = true;
                break;
            }
        }
        loss = new_loss;
    }

    Ok(AlignmentResult {
        transforms,
        centroid: Configuration { angles: centroid },
        loss_trace: trace,
        converged,
        degenerate_points: seed.degenerate_points.clone(),
    })
}

/// Seeds and refines, returning the centroid as the corrected coordinate on
/// the inputs' shared domain together with the alignment record.
pub fn align_and_average(
    coords: &[CircularCoordinate],
    params: &HillClimbParams,
) -> Result<(CircularCoordinate, AlignmentResult), AlignError> {
    if coords.len() < 2 {
        return Err(AlignError::TooFewConfigurations(coords.len()));
    }
    let domain = &coords[0].domain;
    for (i, c) in coords.iter().enumerate() {
        if &c.domain != domain {
            return Err(AlignError::DomainMismatch(i));
        }
    }
    let configs: Vec<Configuration> = coords
        .iter()
        .map(|c| Configuration {
            angles: c.angles.clone(),
        })
        .collect();
    let seed = procrustes_o2_seed(&configs)?;
    let result = hill_climb(&seed, &configs, params)?;
    let coordinate = CircularCoordinate {
        angles: result.centroid.angles.clone(),
        domain: domain.clone(),
        flags: vec![CoordFlag::Ok; domain.len()],
    };
    Ok((coordinate, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_config(rng: &mut ChaCha8Rng, n: usize) -> Configuration {
        Configuration {
            angles: (0..n).map(|_| rng.gen::<f64>() * TAU).collect(),
        }
    }

    /// RMSE between two angle sequences after the best closed-form gauge
    /// (circular-mean rotation, both reflect bits).
    fn gauge_rmse(a: &[f64], b: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for reflect in [false, true] {
            let (mut re, mut im) = (0.0, 0.0);
            for (&x, &y) in a.iter().zip(b) {
                let x = if reflect { -x } else { x };
                let r = y - x;
                re += r.cos();
                im += r.sin();
            }
            let rot = im.atan2(re);
            let g = O2Element {
                reflect,
                rotation: wrap_angle(rot),
            };
            let mse: f64 = a
                .iter()
                .zip(b)
                .map(|(&x, &y)| {
                    let d = circle_dist(g.apply(x), y);
                    d * d
                })
                .sum::<f64>()
                / a.len() as f64;
            best = best.min(mse.sqrt());
        }
        best
    }

    #[test]
    fn o2_action_and_matrix_round_trip() {
        let g = O2Element {
            reflect: false,
            rotation: 0.7,
        };
        assert_abs_diff_eq!(g.apply(0.5), 1.2, epsilon = 1e-12);
        let h = O2Element {
            reflect: true,
            rotation: 0.7,
        };
        assert_abs_diff_eq!(h.apply(0.5), 0.2, epsilon = 1e-12);
        for elem in [g, h] {
            let back = O2Element::from_matrix(&elem.to_matrix());
            assert_eq!(back.reflect, elem.reflect);
            assert_abs_diff_eq!(back.rotation, elem.rotation, epsilon = 1e-12);
            // The matrix really implements the circle action.
            for theta in [0.0f64, 1.0, 4.0] {
                let v = elem.to_matrix() * nalgebra::Vector2::new(theta.cos(), theta.sin());
                let applied = elem.apply(theta);
                assert_abs_diff_eq!(v[0], applied.cos(), epsilon = 1e-12);
                assert_abs_diff_eq!(v[1], applied.sin(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn circle_loss_examples() {
        let centroid = Configuration {
            angles: vec![0.1, 1.0, 2.0],
        };
        let same = vec![centroid.clone(), centroid.clone()];
        let ids = vec![O2Element::identity(); 2];
        assert_abs_diff_eq!(circle_loss(&ids, &centroid, &same).unwrap(), 0.0);

        // k = 1, every point off by 0.1 rad: loss 3 * 0.01.
        let offset = Configuration {
            angles: vec![0.2, 1.1, 2.1],
        };
        let loss = circle_loss(&[O2Element::identity()], &centroid, &[offset]).unwrap();
        assert_abs_diff_eq!(loss, 0.03, epsilon = 1e-12);

        // An antipodal point contributes pi^2 / k.
        let anti = Configuration {
            angles: vec![0.1 + std::f64::consts::PI, 1.0, 2.0],
        };
        let loss = circle_loss(&ids, &centroid, &[anti, centroid.clone()]).unwrap();
        assert_abs_diff_eq!(loss, std::f64::consts::PI.powi(2) / 2.0, epsilon = 1e-12);

        assert!(matches!(
            circle_loss(&ids, &centroid, &[centroid.clone()]),
            Err(AlignError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn seed_recovers_rotation_and_reflection() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_config(&mut rng, 40);

        let rotated = Configuration {
            angles: a.angles.iter().map(|&x| wrap_angle(x + 0.7)).collect(),
        };
        let seed = procrustes_o2_seed(&[a.clone(), rotated]).unwrap();
        assert!(seed.planar_loss < 1e-18);
        assert!(!seed.transforms[0].reflect && !seed.transforms[1].reflect);
        let rel = wrap_angle(seed.transforms[0].rotation - seed.transforms[1].rotation);
        assert_abs_diff_eq!(rel, 0.7, epsilon = 1e-9);

        let reflected = Configuration {
            angles: a.angles.iter().map(|&x| wrap_angle(-x)).collect(),
        };
        let seed = procrustes_o2_seed(&[a.clone(), reflected]).unwrap();
        assert!(seed.planar_loss < 1e-18);
        assert!(seed.transforms[0].reflect != seed.transforms[1].reflect);

        assert!(matches!(
            procrustes_o2_seed(&[a]),
            Err(AlignError::TooFewConfigurations(1))
        ));
    }

    #[test]
    fn seed_centroid_matches_truth_on_noiseless_copies() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let truth = random_config(&mut rng, 50);
        let mut configs = Vec::new();
        for _ in 0..5 {
            let g = O2Element {
                reflect: rng.gen::<bool>(),
                rotation: rng.gen::<f64>() * TAU,
            };
            configs.push(Configuration {
                angles: truth.angles.iter().map(|&x| g.apply(x)).collect(),
            });
        }
        let seed = procrustes_o2_seed(&configs).unwrap();
        assert!(seed.planar_loss < 1e-10);
        assert!(gauge_rmse(&seed.centroid.angles, &truth.angles) < 1e-6);
        assert!(seed.degenerate_points.is_empty());
    }

    #[test]
    fn seed_circle_loss_is_controlled_by_planar_loss() {
        // Projecting the centroid costs at most a factor pi in distance,
        // so circle loss of the seed <= pi^2 * planar loss.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let base = random_config(&mut rng, 30);
            let configs: Vec<Configuration> = (0..4)
                .map(|_| Configuration {
                    angles: base
                        .angles
                        .iter()
                        .map(|&x| wrap_angle(x + 0.05 * rng.gen::<f64>()))
                        .collect(),
                })
                .collect();
            let seed = procrustes_o2_seed(&configs).unwrap();
            let circle = circle_loss(&seed.transforms, &seed.centroid, &configs).unwrap();
            let bound = std::f64::consts::PI.powi(2) * seed.planar_loss + 1e-12;
            assert!(
                circle <= bound,
                "circle {circle} exceeds pi^2 * planar {bound}"
            );
        }
    }

    #[test]
    fn degenerate_centroid_point_is_flagged() {
        // Two configurations exactly antipodal at every point: planar mean
        // vanishes, so every centroid point falls back to configuration 1.
        let a = Configuration {
            angles: vec![0.3, 1.7, 4.0],
        };
        let b = Configuration {
            angles: a
                .angles
                .iter()
                .map(|&x| wrap_angle(x + std::f64::consts::PI))
                .collect(),
        };
        let seed = procrustes_o2_seed(&[a.clone(), b]).unwrap();
        // The optimizer may or may not resolve the ambiguity; if any point
        // remains degenerate it must be flagged and carry config 1's angle.
        for &j in &seed.degenerate_points {
            let expected = seed.transforms[0].apply(a.angles[j as usize]);
            assert_abs_diff_eq!(
                seed.centroid.angles[j as usize],
                expected,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn hill_climb_stays_put_at_an_optimum() {
        let centroid = Configuration {
            angles: vec![0.1, 1.3, 2.9, 4.5],
        };
        let configs = vec![centroid.clone(), centroid.clone(), centroid.clone()];
        let seed = procrustes_o2_seed(&configs).unwrap();
        let result = hill_climb(&seed, &configs, &HillClimbParams::default()).unwrap();
        assert!(result.converged);
        // Seed is optimal: no iteration is accepted beyond the seed entry.
        assert_eq!(result.loss_trace.len(), 1);
        assert!(result.final_loss() < 1e-18);
    }

    #[test]
    fn hill_climb_repairs_a_perturbed_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let truth = random_config(&mut rng, 30);
        let configs: Vec<Configuration> = (0..3)
            .map(|_| truth.clone())
            .collect();
        let mut seed = procrustes_o2_seed(&configs).unwrap();
        seed.transforms[1].rotation = wrap_angle(seed.transforms[1].rotation + 0.05);
        let seed_loss = circle_loss(&seed.transforms, &seed.centroid, &configs).unwrap();
        let result = hill_climb(&seed, &configs, &HillClimbParams::default()).unwrap();
        assert!(result.final_loss() <= seed_loss);
        assert!(result.final_loss() <= 1e-6);
        for pair in result.loss_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-15);
        }
    }

    #[test]
    fn hill_climb_traces_are_non_increasing_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for round in 0..10 {
            let n = 5 + (round % 4) * 7;
            let configs: Vec<Configuration> =
                (0..3 + round % 3).map(|_| random_config(&mut rng, n)).collect();
            let seed = procrustes_o2_seed(&configs).unwrap();
            let result = hill_climb(&seed, &configs, &HillClimbParams::default()).unwrap();
            for pair in result.loss_trace.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-15);
            }
            let recomputed =
                circle_loss(&result.transforms, &result.centroid, &configs).unwrap();
            assert_abs_diff_eq!(recomputed, result.final_loss(), epsilon = 1e-12);
        }
    }

    #[test]
    fn align_and_average_recovers_known_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let truth = random_config(&mut rng, 50);
        let domain: Vec<u32> = (0..50).collect();
        let coords: Vec<CircularCoordinate> = (0..5)
            .map(|_| {
                let g = O2Element {
                    reflect: rng.gen::<bool>(),
                    rotation: rng.gen::<f64>() * TAU,
                };
                CircularCoordinate {
                    angles: truth.angles.iter().map(|&x| g.apply(x)).collect(),
                    domain: domain.clone(),
                    flags: vec![CoordFlag::Ok; 50],
                }
            })
            .collect();
        let (avg, result) = align_and_average(&coords, &HillClimbParams::default()).unwrap();
        assert!(result.final_loss() < 1e-10);
        assert!(gauge_rmse(&avg.angles, &truth.angles) < 1e-6);
    }

    #[test]
    fn averaging_two_noisy_copies_stays_close_to_both() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let truth = random_config(&mut rng, 40);
        let domain: Vec<u32> = (0..40).collect();
        let noisy = |rng: &mut ChaCha8Rng| CircularCoordinate {
            angles: truth
                .angles
                .iter()
                .map(|&x| wrap_angle(x + 0.01 * (rng.gen::<f64>() - 0.5)))
                .collect(),
            domain: domain.clone(),
            flags: vec![CoordFlag::Ok; 40],
        };
        let coords = vec![noisy(&mut rng), noisy(&mut rng)];
        let (avg, _) = align_and_average(&coords, &HillClimbParams::default()).unwrap();
        for c in &coords {
            assert!(gauge_rmse(&avg.angles, &c.angles) < 0.01);
        }
    }

    #[test]
    fn alignment_is_gauge_covariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let configs: Vec<Configuration> = (0..4)
            .map(|_| {
                let mut c = random_config(&mut rng, 20);
                // Correlated instances so the optimum is non-trivial.
                for a in &mut c.angles {
                    *a = wrap_angle(*a * 0.1);
                }
                c
            })
            .collect();
        let h = O2Element {
            reflect: true,
            rotation: 1.9,
        };
        let transformed: Vec<Configuration> = configs
            .iter()
            .map(|c| Configuration {
                angles: c.angles.iter().map(|&x| h.apply(x)).collect(),
            })
            .collect();
        let params = HillClimbParams::default();
        let r1 = hill_climb(&procrustes_o2_seed(&configs).unwrap(), &configs, &params).unwrap();
        let r2 = hill_climb(
            &procrustes_o2_seed(&transformed).unwrap(),
            &transformed,
            &params,
        )
        .unwrap();
        assert_abs_diff_eq!(r1.final_loss(), r2.final_loss(), epsilon = 1e-9);
    }

    #[test]
    fn chord_is_bounded_by_arc_and_lemma_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..10_000 {
            let x = rng.gen::<f64>() * TAU;
            let y = rng.gen::<f64>() * TAU;
            let r = rng.gen::<f64>();
            let arc = circle_dist(x, y);
            let chord =
                ((x.cos() - y.cos()).powi(2) + (x.sin() - y.sin()).powi(2)).sqrt();
            assert!(chord <= arc + 1e-12);
            let scaled = ((x.cos() - r * y.cos()).powi(2)
                + (x.sin() - r * y.sin()).powi(2))
            .sqrt();
            assert!(arc <= std::f64::consts::PI * scaled + 1e-12);
        }
    }
}

