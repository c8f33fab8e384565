//! Synthetic benchmarks and time-series preprocessing.
//!
//! The synthetic generators produce circle and ellipse clouds whose angular
//! density is deliberately unbalanced (von Mises angles), together with the
//! ground-truth parameter every point came from. Time series are turned
//! into phase-space clouds by detrending against a moving background, delay
//! embedding, and PCA.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::circular::{wrap_angle, TAU};
use crate::cloud::PointCloud;

#[derive(Debug, Error)]
pub enum PrepError {
    #[error("time series needs at least 2 rows, got {0}")]
    TooShort(usize),
    #[error("row {row} has {got} values, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-numeric value {value:?} at row {row}, column {col}")]
    NonNumeric {
        row: usize,
        col: usize,
        value: String,
    },
    #[error("delay embedding needs T > d*tau, got T = {t}, d*tau = {need}")]
    EmbeddingTooDeep { t: usize, need: usize },
    #[error("detrend window must be in [1, T], got {window} with T = {t}")]
    BadWindow { window: usize, t: usize },
    #[error("output dimension {out} exceeds ambient dimension {ambient}")]
    BadOutDim { out: usize, ambient: usize },
    #[error("radius_sd must be nonnegative, got {0}")]
    NegativeSpread(f64),
    #[error("dilation must be positive, got {0}")]
    BadDilation(f64),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A synthetic cloud with the parameter that generated each point.
#[derive(Debug, Clone)]
pub struct SyntheticSample {
    pub cloud: PointCloud,
    /// In [0, 2 pi): the generating angle (circle) or normalized arc
    /// length (ellipse).
    pub true_parameter: Vec<f64>,
    pub generator_params: BTreeMap<String, f64>,
    pub seed: u64,
}

/// Draws one von Mises(0, kappa) angle via the Best-Fisher envelope.
/// kappa = 0 degenerates to the uniform distribution.
fn von_mises(rng: &mut ChaCha8Rng, kappa: f64) -> f64 {
    if kappa <= 0.0 {
        return rng.gen::<f64>() * TAU;
    }
    let a = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let b = (a - (2.0 * a).sqrt()) / (2.0 * kappa);
    let r = (1.0 + b * b) / (2.0 * b);
    loop {
        let u1 = rng.gen::<f64>();
        let u2 = rng.gen::<f64>();
        let z = (std::f64::consts::PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let u3 = rng.gen::<f64>();
            let theta = if u3 > 0.5 { f.acos() } else { -f.acos() };
            return wrap_angle(theta);
        }
    }
}

fn draw_sample(
    n: usize,
    dispersion: f64,
    radius_mean: f64,
    radius_sd: f64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>), PrepError> {
    if radius_sd < 0.0 {
        return Err(PrepError::NegativeSpread(radius_sd));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angles: Vec<f64> = (0..n).map(|_| von_mises(&mut rng, dispersion)).collect();
    let radii: Vec<f64> = if radius_sd == 0.0 {
        vec![radius_mean; n]
    } else {
        let normal = Normal::new(radius_mean, radius_sd).expect("validated spread");
        (0..n).map(|_| normal.sample(&mut rng)).collect()
    };
    Ok((angles, radii))
}

/// Circle cloud with von Mises angles (denser near angle 0) and normally
/// distributed radii. The true parameter is the generating angle.
pub fn gen_unbalanced_circle(
    n: usize,
    dispersion: f64,
    radius_mean: f64,
    radius_sd: f64,
    seed: u64,
) -> Result<SyntheticSample, PrepError> {
    let (angles, radii) = draw_sample(n, dispersion, radius_mean, radius_sd, seed)?;
    let rows: Vec<Vec<f64>> = angles
        .iter()
        .zip(&radii)
        .map(|(&t, &r)| vec![r * t.cos(), r * t.sin()])
        .collect();
    let cloud = PointCloud::from_rows(&rows).expect("n >= 1 rows of dimension 2");
    let generator_params = BTreeMap::from([
        ("n".to_string(), n as f64),
        ("dispersion".to_string(), dispersion),
        ("radius_mean".to_string(), radius_mean),
        ("radius_sd".to_string(), radius_sd),
    ]);
    Ok(SyntheticSample {
        cloud,
        true_parameter: angles,
        generator_params,
        seed,
    })
}

/// Arc length of the ellipse (dilation * cos t, sin t) from 0 to theta,
/// reparameterized to [0, 2 pi): parameter(theta) = 2 pi * s(theta) / s(2 pi).
///
/// The quadrature is adaptive Simpson with tolerance 1e-10. A dilation of
/// exactly 1 short-circuits to the angle itself (unit-speed circle).
pub fn ellipse_arc_parameter(dilation: f64, theta: f64) -> f64 {
    if dilation == 1.0 {
        return wrap_angle(theta);
    }
    let theta = wrap_angle(theta);
    let total = ellipse_arc_length(dilation, TAU);
    wrap_angle(TAU * ellipse_arc_length(dilation, theta) / total)
}

fn ellipse_speed(dilation: f64, t: f64) -> f64 {
    let (s, c) = t.sin_cos();
    (dilation * dilation * s * s + c * c).sqrt()
}

fn ellipse_arc_length(dilation: f64, theta: f64) -> f64 {
    fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        d: f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = ellipse_speed(d, lm);
        let frm = ellipse_speed(d, rm);
        let left = simpson(a, m, fa, flm, fm);
        let right = simpson(m, b, fm, frm, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(d, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(d, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    if theta == 0.0 {
        return 0.0;
    }
    let (a, b) = (0.0, theta);
    let fa = ellipse_speed(dilation, a);
    let fb = ellipse_speed(dilation, b);
    let fm = ellipse_speed(dilation, 0.5 * (a + b));
    let whole = simpson(a, b, fa, fm, fb);
    recurse(dilation, a, b, fa, fm, fb, whole, 1e-10, 40)
}

/// Circle generator followed by (x, y) -> (dilation * x, y). The true
/// parameter is the normalized arc length along the ideal ellipse.
pub fn gen_unbalanced_ellipse(
    n: usize,
    dispersion: f64,
    radius_mean: f64,
    radius_sd: f64,
    dilation: f64,
    seed: u64,
) -> Result<SyntheticSample, PrepError> {
    if !(dilation > 0.0) {
        return Err(PrepError::BadDilation(dilation));
    }
    let base = gen_unbalanced_circle(n, dispersion, radius_mean, radius_sd, seed)?;
    let rows: Vec<Vec<f64>> = base
        .cloud
        .iter_points()
        .map(|p| vec![dilation * p[0], p[1]])
        .collect();
    let cloud = PointCloud::from_rows(&rows).expect("same shape as the base cloud");
    let true_parameter = base
        .true_parameter
        .iter()
        .map(|&t| ellipse_arc_parameter(dilation, t))
        .collect();
    let mut generator_params = base.generator_params;
    generator_params.insert("dilation".to_string(), dilation);
    Ok(SyntheticSample {
        cloud,
        true_parameter,
        generator_params,
        seed,
    })
}

/// A multivariate time series, rows = frames.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    data: Vec<f64>,
    cols: usize,
    /// Frames per second.
    pub rate: f64,
}

impl TimeSeries {
    pub fn from_rows(rows: &[Vec<f64>], rate: f64) -> Result<Self, PrepError> {
        if rows.len() < 2 {
            return Err(PrepError::TooShort(rows.len()));
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(PrepError::RaggedRow {
                    row: i,
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { data, cols, rate })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.cols..(t + 1) * self.cols]
    }

    /// Rows = frames, columns = channels; a non-numeric first record is
    /// treated as a header and skipped.
    pub fn read_csv<R: Read>(reader: R, rate: f64) -> Result<Self, PrepError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let mut row = Vec::with_capacity(record.len());
            let mut numeric = true;
            for field in record.iter() {
                match field.trim().parse::<f64>() {
                    Ok(v) => row.push(v),
                    Err(_) => {
                        numeric = false;
                        break;
                    }
                }
            }
            if !numeric {
                if i == 0 && rows.is_empty() {
                    continue; // header
                }
                let col = row.len();
                return Err(PrepError::NonNumeric {
                    row: i,
                    col,
                    value: record.get(col).unwrap_or("").to_string(),
                });
            }
            rows.push(row);
        }
        Self::from_rows(&rows, rate)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), PrepError> {
        let mut wtr = csv::Writer::from_writer(writer);
        let header: Vec<String> = (0..self.cols).map(|c| format!("ch{c}")).collect();
        wtr.write_record(&header)?;
        for t in 0..self.len() {
            let row: Vec<String> = self.row(t).iter().map(|v| format!("{v}")).collect();
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv_path(path: &Path, rate: f64) -> Result<Self, PrepError> {
        Self::read_csv(std::fs::File::open(path)?, rate)
    }
}

/// Removes mean and scale fluctuations against a moving background.
///
/// `window` is the half-width: frame t is normalized against frames
/// [t - window, t + window] clipped to the series (so window = T covers the
/// whole series at every frame). Each column gets the window mean
/// subtracted and is divided by the window population standard deviation,
/// floored at 1e-8.
pub fn detrend(ts: &TimeSeries, window: usize) -> Result<TimeSeries, PrepError> {
    let t_len = ts.len();
    if window == 0 || window > t_len {
        return Err(PrepError::BadWindow { window, t: t_len });
    }
    let cols = ts.cols();
    let mut out = vec![0.0f64; t_len * cols];
    for c in 0..cols {
        // Prefix sums make each window O(1).
        let mut sum = vec![0.0f64; t_len + 1];
        let mut sumsq = vec![0.0f64; t_len + 1];
        for t in 0..t_len {
            let v = ts.row(t)[c];
            sum[t + 1] = sum[t] + v;
            sumsq[t + 1] = sumsq[t] + v * v;
        }
        for t in 0..t_len {
            let lo = t.saturating_sub(window);
            let hi = (t + window).min(t_len - 1);
            let m = (hi - lo + 1) as f64;
            let mean = (sum[hi + 1] - sum[lo]) / m;
            let var = ((sumsq[hi + 1] - sumsq[lo]) / m - mean * mean).max(0.0);
            let std = var.sqrt().max(1e-8);
            out[t * cols + c] = (ts.row(t)[c] - mean) / std;
        }
    }
    Ok(TimeSeries {
        data: out,
        cols,
        rate: ts.rate,
    })
}

/// Sliding-window (delay) embedding: row t of the output concatenates
/// series rows t, t + tau, ..., t + d*tau.
pub fn delay_embed(ts: &TimeSeries, d: usize, tau: usize) -> Result<PointCloud, PrepError> {
    let t_len = ts.len();
    let need = d * tau;
    if t_len <= need {
        return Err(PrepError::EmbeddingTooDeep { t: t_len, need });
    }
    let cols = ts.cols();
    let out_rows = t_len - need;
    let out_dim = cols * (d + 1);
    let mut data = Vec::with_capacity(out_rows * out_dim);
    for t in 0..out_rows {
        for step in 0..=d {
            data.extend_from_slice(ts.row(t + step * tau));
        }
    }
    PointCloud::from_flat(data, out_dim).map_err(|_| PrepError::TooShort(out_rows))
}

/// PCA projection result.
#[derive(Debug, Clone)]
pub struct PcaReduction {
    pub cloud: PointCloud,
    /// Variance along each kept direction, non-increasing.
    pub explained_variance: Vec<f64>,
    /// True when out_dim exceeded the data rank and trailing coordinates
    /// were zero-padded.
    pub padded: bool,
}

/// Centers the cloud and projects it onto the leading principal
/// directions. Directions are signed so their largest-magnitude loading is
/// positive, making the output deterministic.
pub fn pca_reduce(cloud: &PointCloud, out_dim: usize) -> Result<PcaReduction, PrepError> {
    use nalgebra::DMatrix;
    let d = cloud.dim();
    let n = cloud.len();
    if out_dim == 0 || out_dim > d {
        return Err(PrepError::BadOutDim {
            out: out_dim,
            ambient: d,
        });
    }
    let mut mean = vec![0.0f64; d];
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
    let denom = (n.max(2) - 1) as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let eigen = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .partial_cmp(&eigen.eigenvalues[a])
            .expect("covariance eigenvalues are never NaN")
    });
    let max_eig = eigen.eigenvalues[order[0]].max(0.0);
    let rank_tol = max_eig * 1e-12;

    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(out_dim);
    let mut explained = Vec::with_capacity(out_dim);
    let mut padded = false;
    for &idx in order.iter().take(out_dim) {
        let lambda = eigen.eigenvalues[idx];
        if lambda <= rank_tol {
            padded = true;
            break;
        }
        let col = eigen.eigenvectors.column(idx);
        let mut v: Vec<f64> = col.iter().cloned().collect();
        // Sign convention: the largest-magnitude loading is positive.
        let lead = v
            .iter()
            .cloned()
            .enumerate()
            .max_by(|a, b| {
                a.1.abs()
                    .partial_cmp(&b.1.abs())
                    .expect("loadings are never NaN")
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        if v[lead] < 0.0 {
            for x in &mut v {
                *x = -*x;
            }
        }
        directions.push(v);
        explained.push(lambda);
    }

    let kept = directions.len();
    let mut data = Vec::with_capacity(n * out_dim);
    for p in cloud.iter_points() {
        for dir in &directions {
            let mut acc = 0.0;
            for ((x, m), w) in p.iter().zip(&mean).zip(dir) {
                acc += (x - m) * w;
            }
            data.push(acc);
        }
        for _ in kept..out_dim {
            data.push(0.0);
        }
    }
    let cloud = PointCloud::from_flat(data, out_dim).expect("n rows of out_dim");
    Ok(PcaReduction {
        cloud,
        explained_variance: explained,
        padded,
    })
}
