//! Dataset ingestion: IDX image/label files, CSV tables, and the observable
//! rank pre-reduction.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral;

pub const IDX_IMAGES_MAGIC: u32 = 2051;
pub const IDX_LABELS_MAGIC: u32 = 2049;
const IDX_IMAGES_HEADER: usize = 16;
const IDX_LABELS_HEADER: usize = 8;

/// How raw intensities were scaled on the way in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Normalization {
    None,
    /// 8-bit images are divided by 255. CSV input is divided by its largest
    /// entry, which must be non-negative.
    UnitInterval,
    PerElementScale(f64),
}

/// The `P × N` training matrix: one observation per row, one observable per
/// column.
#[derive(Debug, Clone)]
pub struct TrainingMatrix {
    values: DMatrix<f64>,
    normalization: Normalization,
    rank_reduced_to: Option<usize>,
}

impl TrainingMatrix {
    pub fn new(values: DMatrix<f64>, normalization: Normalization) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::EmptySelection);
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite entry at column-major offset {pos}"
            )));
        }
        if normalization == Normalization::UnitInterval
            && values.iter().any(|&v| !(0.0..=1.0).contains(&v))
        {
            return Err(Error::InvalidInput(
                "unit-interval normalization but an entry lies outside [0, 1]".into(),
            ));
        }
        Ok(Self {
            values,
            normalization,
            rank_reduced_to: None,
        })
    }

    /// Unnormalized matrix, mostly for tests and synthetic data.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        Self::new(values, Normalization::None)
    }

    pub fn from_row_slice(p: usize, n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != p * n {
            return Err(Error::DimensionMismatch {
                expected: p * n,
                actual: data.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(p, n, data))
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    /// Number of observations `P`.
    pub fn p(&self) -> usize {
        self.values.nrows()
    }

    /// Number of observables `N`.
    pub fn n_obs(&self) -> usize {
        self.values.ncols()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn rank_reduced_to(&self) -> Option<usize> {
        self.rank_reduced_to
    }

    /// First `count` observations.
    pub fn take_rows(&self, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::EmptySelection);
        }
        let count = count.min(self.p());
        Ok(Self {
            values: self.values.rows(0, count).into_owned(),
            normalization: self.normalization,
            rank_reduced_to: self.rank_reduced_to,
        })
    }
}

/// Decoded IDX image tensor (`count × rows × cols`, row-major bytes).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, index: usize) -> &[u8] {
        let len = self.rows * self.cols;
        &self.pixels[index * len..(index + 1) * len]
    }

    /// Serializes back into the IDX byte layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(IDX_IMAGES_HEADER + self.pixels.len());
        for word in [
            IDX_IMAGES_MAGIC,
            self.count as u32,
            self.rows as u32,
            self.cols as u32,
        ] {
            out.extend_from_slice(&word.to_be_bytes());
        }
        out.extend_from_slice(&self.pixels);
        out
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ])
}

/// Parses an IDX3 image file (magic 2051).
pub fn parse_idx(bytes: &[u8]) -> Result<IdxImages> {
    if bytes.len() < IDX_IMAGES_HEADER {
        return Err(Error::TruncatedFile {
            expected: IDX_IMAGES_HEADER,
            actual: bytes.len(),
        });
    }
    let magic = be_u32(bytes, 0);
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::WrongMagic {
            expected: IDX_IMAGES_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4) as usize;
    let rows = be_u32(bytes, 8) as usize;
    let cols = be_u32(bytes, 12) as usize;
    if count == 0 || rows == 0 || cols == 0 {
        return Err(Error::ZeroDimension);
    }
    let expected = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .and_then(|v| v.checked_add(IDX_IMAGES_HEADER))
        .ok_or(Error::TruncatedFile {
            expected: usize::MAX,
            actual: bytes.len(),
        })?;
    if expected != bytes.len() {
        return Err(Error::TruncatedFile {
            expected,
            actual: bytes.len(),
        });
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[IDX_IMAGES_HEADER..].to_vec(),
    })
}

/// Parses an IDX1 label file (magic 2049).
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    if bytes.len() < IDX_LABELS_HEADER {
        return Err(Error::TruncatedFile {
            expected: IDX_LABELS_HEADER,
            actual: bytes.len(),
        });
    }
    let magic = be_u32(bytes, 0);
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::WrongMagic {
            expected: IDX_LABELS_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4) as usize;
    if count == 0 {
        return Err(Error::ZeroDimension);
    }
    let expected = IDX_LABELS_HEADER + count;
    if expected != bytes.len() {
        return Err(Error::TruncatedFile {
            expected,
            actual: bytes.len(),
        });
    }
    Ok(bytes[IDX_LABELS_HEADER..].to_vec())
}

/// Parses a CSV table of floats, one observation per row. A first row that
/// does not parse as numbers is treated as a header.
pub fn parse_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(r) => r,
            Err(_) if rows.is_empty() && width.is_none() => {
                // header
                width = Some(record.len());
                continue;
            }
            Err(e) => {
                return Err(Error::Parse {
                    line,
                    message: e.to_string(),
                })
            }
        };
        match width {
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {w} fields, found {}", row.len()),
                })
            }
            _ => width = Some(row.len()),
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptySelection);
    }
    let n = rows[0].len();
    if n == 0 {
        return Err(Error::EmptySelection);
    }
    Ok(DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DataFormat {
    IdxImages,
    Csv,
}

#[derive(Debug, Clone)]
pub struct DatasetConfig {
    pub source: PathBuf,
    pub format: DataFormat,
    pub max_observations: Option<usize>,
    pub normalization: Normalization,
    pub rank_reduce_to: Option<usize>,
}

impl DatasetConfig {
    pub fn idx(source: impl Into<PathBuf>) -> Self {
        Self {
            source: source.into(),
            format: DataFormat::IdxImages,
            max_observations: None,
            normalization: Normalization::UnitInterval,
            rank_reduce_to: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_observations == Some(0) {
            return Err(Error::InvalidInput(
                "max_observations must be at least 1".into(),
            ));
        }
        if self.rank_reduce_to == Some(0) {
            return Err(Error::InvalidInput(
                "rank_reduce_to must be at least 1".into(),
            ));
        }
        if let Normalization::PerElementScale(s) = self.normalization {
            if !s.is_finite() || s == 0.0 {
                return Err(Error::InvalidInput(format!("invalid scale factor {s}")));
            }
        }
        Ok(())
    }
}

/// Flattens images row-major into a `P × (rows·cols)` matrix.
pub fn build_training_matrix(raw: &IdxImages, config: &DatasetConfig) -> Result<TrainingMatrix> {
    config.validate()?;
    let p = config
        .max_observations
        .map_or(raw.count, |m| m.min(raw.count));
    if p == 0 {
        return Err(Error::EmptySelection);
    }
    let n = raw.rows * raw.cols;
    let scale = match config.normalization {
        Normalization::None => 1.0,
        Normalization::UnitInterval => 1.0 / 255.0,
        Normalization::PerElementScale(s) => s,
    };
    let pixels = &raw.pixels[..p * n];
    let values = DMatrix::from_fn(p, n, |i, j| pixels[i * n + j] as f64 * scale);
    let x = TrainingMatrix::new(values, config.normalization)?;
    match config.rank_reduce_to {
        Some(k) => reduce_observable_rank(&x, k),
        None => Ok(x),
    }
}

fn normalize_csv(values: DMatrix<f64>, normalization: Normalization) -> Result<DMatrix<f64>> {
    Ok(match normalization {
        Normalization::None => values,
        Normalization::PerElementScale(s) => values * s,
        Normalization::UnitInterval => {
            if values.iter().any(|&v| v < 0.0) {
                return Err(Error::InvalidInput(
                    "unit-interval normalization of CSV requires non-negative entries".into(),
                ));
            }
            let max = values.max();
            if max > 0.0 {
                values / max
            } else {
                values
            }
        }
    })
}

/// Reads and assembles the dataset described by `config`.
pub fn load(config: &DatasetConfig) -> Result<TrainingMatrix> {
    config.validate()?;
    match config.format {
        DataFormat::IdxImages => {
            let bytes = std::fs::read(resolve_idx_path(&config.source))?;
            let raw = parse_idx(&bytes)?;
            build_training_matrix(&raw, config)
        }
        DataFormat::Csv => {
            let text = std::fs::read_to_string(&config.source)?;
            let mut values = parse_csv(&text)?;
            if let Some(m) = config.max_observations {
                let keep = m.min(values.nrows());
                values = values.rows(0, keep).into_owned();
            }
            let values = normalize_csv(values, config.normalization)?;
            let x = TrainingMatrix::new(values, config.normalization)?;
            match config.rank_reduce_to {
                Some(k) => reduce_observable_rank(&x, k),
                None => Ok(x),
            }
        }
    }
}

/// A directory resolves to the MNIST training-image file inside it.
pub fn resolve_idx_path(source: &Path) -> PathBuf {
    if source.is_dir() {
        source.join("train-images-idx3-ubyte")
    } else {
        source.to_path_buf()
    }
}

/// Projects `X` onto its top `n_keep` right singular vectors, `X Ŵ Ŵᵀ`,
/// discarding the smallest-eigenvalue directions of `G = XᵀX`.
pub fn reduce_observable_rank(x: &TrainingMatrix, n_keep: usize) -> Result<TrainingMatrix> {
    let n = x.n_obs();
    if n_keep == 0 || n_keep > n {
        return Err(Error::RankTooLarge {
            requested: n_keep,
            available: n,
        });
    }
    let f = spectral::svd(x, 0.0)?;
    let keep = n_keep.min(f.m_rank());
    let w_hat = f.w().columns(0, keep);
    let reduced = x.values() * w_hat * w_hat.transpose();
    Ok(TrainingMatrix {
        values: reduced,
        normalization: x.normalization,
        rank_reduced_to: Some(n_keep),
    })
}
