//! Point cloud storage and basic metric queries.
//!
//! Points are stored row-major in a flat buffer. All distances are Euclidean.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CloudError {
    #[error("point cloud is empty")]
    Empty,
    #[error("row {row} has {got} coordinates, expected {expected}")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        row: usize,
    },
    #[error("row {row}, column {col}: cannot parse {value:?} as a number")]
    NonNumeric {
        row: usize,
        col: usize,
        value: String,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A finite set of points in Euclidean space, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    data: Vec<f64>,
    dim: usize,
}

impl PointCloud {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, CloudError> {
        if rows.is_empty() {
            return Err(CloudError::Empty);
        }
        let dim = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(CloudError::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                    row,
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { data, dim })
    }

    /// `data` holds `len * dim` coordinates, row-major.
    pub fn from_flat(data: Vec<f64>, dim: usize) -> Result<Self, CloudError> {
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(CloudError::Empty);
        }
        Ok(Self { data, dim })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        dist(self.point(i), self.point(j))
    }

    pub fn dist_to(&self, i: usize, q: &[f64]) -> f64 {
        dist(self.point(i), q)
    }

    /// Restriction to a subset of point indices, preserving their order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.point(i));
        }
        PointCloud {
            data,
            dim: self.dim,
        }
    }

    /// min over points x of max over points y of d(x, y).
    ///
    /// Every Rips complex at this scale or beyond is a cone over the
    /// minimizing vertex, so no one-dimensional class survives past it.
    pub fn enclosing_radius(&self) -> f64 {
        let n = self.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            let mut worst = 0.0f64;
            for j in 0..n {
                if i != j {
                    worst = worst.max(self.dist(i, j));
                }
            }
            best = best.min(worst);
        }
        if best.is_finite() {
            best
        } else {
            0.0
        }
    }

    /// Reads a cloud from CSV, one point per row.
    ///
    /// A header row is detected by a non-numeric first record. If the header
    /// names a `true_parameter` column, that column is split off and returned
    /// separately.
    pub fn read_csv<R: Read>(reader: R) -> Result<(Self, Option<Vec<f64>>), CloudError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = Vec::new();
        for rec in rdr.records() {
            records.push(rec?);
        }
        if records.is_empty() {
            return Err(CloudError::Empty);
        }
        let header_like = records[0]
            .iter()
            .any(|f| !f.is_empty() && f.parse::<f64>().is_err());
        let mut truth_col = None;
        let start = if header_like {
            truth_col = records[0].iter().position(|f| f == "true_parameter");
            1
        } else {
            0
        };
        let mut rows = Vec::new();
        let mut truth = truth_col.map(|_| Vec::new());
        for (row, rec) in records[start..].iter().enumerate() {
            let mut coords = Vec::with_capacity(rec.len());
            for (col, field) in rec.iter().enumerate() {
                if field.is_empty() {
                    continue;
                }
                let v: f64 = field.parse().map_err(|_| CloudError::NonNumeric {
                    row: row + start,
                    col,
                    value: field.to_string(),
                })?;
                if Some(col) == truth_col {
                    truth.as_mut().expect("truth column present").push(v);
                } else {
                    coords.push(v);
                }
            }
            if !coords.is_empty() {
                rows.push(coords);
            }
        }
        Ok((Self::from_rows(&rows)?, truth))
    }

    pub fn read_csv_path(path: &Path) -> Result<(Self, Option<Vec<f64>>), CloudError> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    /// Writes the cloud as headered CSV, optionally with a `true_parameter`
    /// column appended.
    pub fn write_csv<W: Write>(
        &self,
        writer: W,
        truth: Option<&[f64]>,
    ) -> Result<(), CloudError> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.dim).map(|d| format!("x{d}")).collect();
        if truth.is_some() {
            header.push("true_parameter".to_string());
        }
        wtr.write_record(&header)?;
        for (i, p) in self.iter_points().enumerate() {
            let mut rec: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
            if let Some(t) = truth {
                rec.push(format!("{}", t[i]));
            }
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Condensed upper-triangular matrix of pairwise distances.
#[derive(Debug, Clone)]
pub struct DistMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DistMatrix {
    pub fn from_cloud(cloud: &PointCloud) -> Self {
        let n = cloud.len();
        let mut entries = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                entries.push(cloud.dist(i, j));
            }
        }
        Self { n, entries }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.entries[i * self.n - i * (i + 1) / 2 + (j - i - 1)]
    }
}
