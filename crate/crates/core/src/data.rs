//! Synthetic datasets, feature-file ingestion and result serialization.
//!
//! Feature files are CSV with a header row `f0,…,f{N−1}` and an optional final
//! integer column named `label`. Row numbers in errors are 1-based line
//! numbers of the file (the header is line 1); column numbers are 1-based.
//!
//! Random draws use `ChaCha8Rng` (see [`crate::sampling`]), so generated data
//! is identical on every platform for a given seed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{rng, stream};
use crate::simplex::LabelMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// M×N features.
    pub x: Array2<f64>,
    pub labels: Option<Vec<usize>>,
    /// Number of classes, when known.
    pub k: Option<usize>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, labels: Option<Vec<usize>>, k: Option<usize>) -> Result<Self> {
        if let Some(labels) = &labels {
            if labels.len() != x.nrows() {
                return Err(Error::LengthMismatch {
                    left: x.nrows(),
                    right: labels.len(),
                });
            }
            if let Some(k) = k {
                if let Some(&index) = labels.iter().find(|&&l| l >= k) {
                    return Err(Error::IndexOutOfRange { index, k });
                }
            }
        }
        Ok(Dataset { x, labels, k })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

/// Isotropic Gaussian mixture with an optional broad component per class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub k: usize,
    pub n: usize,
    pub per_class: usize,
    /// Norm of every class mean.
    pub separation: f64,
    /// Fraction of each class drawn with standard deviation `outlier_scale`
    /// instead of 1.
    #[serde(default)]
    pub outlier_fraction: f64,
    #[serde(default = "default_outlier_scale")]
    pub outlier_scale: f64,
}

fn default_outlier_scale() -> f64 {
    1.0
}

impl MixtureSpec {
    pub fn blobs(k: usize, n: usize, per_class: usize, separation: f64) -> Self {
        MixtureSpec {
            k,
            n,
            per_class,
            separation,
            outlier_fraction: 0.0,
            outlier_scale: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidParams(format!(
                "need at least 2 classes, got {}",
                self.k
            )));
        }
        if self.n == 0 || (self.n == 1 && self.k > 2) {
            return Err(Error::InvalidParams(format!(
                "dimension {} cannot hold {} equidistant means",
                self.n, self.k
            )));
        }
        if self.per_class == 0 {
            return Err(Error::InvalidParams(
                "per-class count must be positive".into(),
            ));
        }
        if !(self.separation > 0.0) || !self.separation.is_finite() {
            return Err(Error::InvalidParams(format!(
                "separation must be positive, got {}",
                self.separation
            )));
        }
        if !(0.0..=1.0).contains(&self.outlier_fraction) {
            return Err(Error::InvalidParams(format!(
                "outlier fraction must be in [0, 1], got {}",
                self.outlier_fraction
            )));
        }
        if !(self.outlier_scale > 0.0) || !self.outlier_scale.is_finite() {
            return Err(Error::InvalidParams(format!(
                "outlier scale must be positive, got {}",
                self.outlier_scale
            )));
        }
        Ok(())
    }

    /// Class means: `separation · e_k` when `N ≥ K`, otherwise evenly spaced
    /// on a circle of radius `separation` in the first two coordinates (or
    /// `±separation` when `N = 1`).
    pub fn means(&self) -> Array2<f64> {
        let mut means = Array2::zeros((self.k, self.n));
        if self.n >= self.k {
            for c in 0..self.k {
                means[[c, c]] = self.separation;
            }
        } else if self.n == 1 {
            means[[0, 0]] = self.separation;
            means[[1, 0]] = -self.separation;
        } else {
            for c in 0..self.k {
                let angle = 2.0 * std::f64::consts::PI * c as f64 / self.k as f64;
                means[[c, 0]] = self.separation * angle.cos();
                means[[c, 1]] = self.separation * angle.sin();
            }
        }
        means
    }
}

/// Draws `per_class` points for every class from stream `stream_id` of
/// `seed`. Rows are grouped by class; within a class the first
/// `⌊outlier_fraction · per_class⌋` rows come from the broad component.
pub fn make_gaussian_mixture(spec: &MixtureSpec, seed: u64, stream_id: u64) -> Result<Dataset> {
    spec.validate()?;
    let means = spec.means();
    let m = spec.k * spec.per_class;
    let outliers = (spec.outlier_fraction * spec.per_class as f64).floor() as usize;
    let mut r = rng(seed, stream_id);
    let mut x = Array2::zeros((m, spec.n));
    let mut labels = Vec::with_capacity(m);
    for c in 0..spec.k {
        for j in 0..spec.per_class {
            let i = c * spec.per_class + j;
            let scale = if j < outliers {
                spec.outlier_scale
            } else {
                1.0
            };
            for d in 0..spec.n {
                let z: f64 = r.sample(StandardNormal);
                x[[i, d]] = means[[c, d]] + scale * z;
            }
            labels.push(c);
        }
    }
    Dataset::new(x, Some(labels), Some(spec.k))
}

/// Train and test draws of the same mixture from separate streams.
pub fn make_split(
    spec: &MixtureSpec,
    test_per_class: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let train = make_gaussian_mixture(spec, seed, stream::DATA_TRAIN)?;
    let test_spec = MixtureSpec {
        per_class: test_per_class,
        ..spec.clone()
    };
    let test = make_gaussian_mixture(&test_spec, seed, stream::DATA_TEST)?;
    Ok((train, test))
}

/// Reads a feature CSV. `K` is set to `max(label) + 1` when labels exist.
pub fn load_features_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let width = headers.len();
    let has_label = headers
        .iter()
        .next_back()
        .map(|h| h.trim() == "label")
        .unwrap_or(false);
    let n = if has_label { width - 1 } else { width };

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0;
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(idx + 2);
        if record.len() != width {
            return Err(Error::RaggedRows {
                path: path.to_path_buf(),
                row: line,
                expected: width,
                found: record.len(),
            });
        }
        for (col, field) in record.iter().enumerate().take(n) {
            let parse_err = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                row: line,
                col: col + 1,
                msg,
            };
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("{e}: {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(format!("non-finite value {field:?}")));
            }
            values.push(v);
        }
        if has_label {
            let field = &record[n];
            let label: usize = field.trim().parse().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                row: line,
                col: width,
                msg: format!("label must be a non-negative integer: {e}: {field:?}"),
            })?;
            labels.push(label);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Empty);
    }
    let x = Array2::from_shape_vec((rows, n), values).expect("row widths checked");
    let (labels, k) = if has_label {
        let k = labels.iter().max().map(|&m| m + 1);
        (Some(labels), k)
    } else {
        (None, None)
    };
    Dataset::new(x, labels, k)
}

/// Writes a feature CSV readable by [`load_features_csv`].
pub fn save_features_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..data.dim()).map(|d| format!("f{d}")).collect();
    if data.labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for (i, row) in data.x.rows().into_iter().enumerate() {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(labels) = &data.labels {
            fields.push(labels[i].to_string());
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes serializable rows as CSV with a header. Floats use the shortest
/// representation that parses back to the same value.
pub fn save_results<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_results<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()?;
    Ok(rows)
}

/// Appends one JSON object per line.
pub struct JsonLinesWriter {
    out: BufWriter<File>,
}

impl JsonLinesWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        Ok(JsonLinesWriter {
            out: BufWriter::new(File::create(path)?),
        })
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Label matrix as CSV with header `y0,…,y{K−1}`.
pub fn save_label_matrix(path: impl AsRef<Path>, y: &LabelMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((0..y.ncols()).map(|k| format!("y{k}")))?;
    for row in y.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_label_matrix(path: impl AsRef<Path>) -> Result<LabelMatrix> {
    let data = load_features_csv(path)?;
    LabelMatrix::new(data.x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        p
    }

    #[test]
    fn mixture_is_deterministic_and_shaped() {
        let spec = MixtureSpec::blobs(3, 4, 10, 5.0);
        let a = make_gaussian_mixture(&spec, 7, stream::DATA_TRAIN).unwrap();
        let b = make_gaussian_mixture(&spec, 7, stream::DATA_TRAIN).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.x.dim(), (30, 4));
        assert_eq!(a.labels.as_ref().unwrap()[29], 2);
        let c = make_gaussian_mixture(&spec, 7, stream::DATA_TEST).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn mixture_means_have_equal_norms() {
        for (k, n) in [(4, 10), (5, 2), (2, 1)] {
            let means = MixtureSpec::blobs(k, n, 1, 3.0).means();
            for row in means.rows() {
                assert!((row.dot(&row).sqrt() - 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mixture_rejects_bad_params() {
        let bad = [
            MixtureSpec::blobs(1, 2, 5, 1.0),
            MixtureSpec::blobs(3, 2, 0, 1.0),
            MixtureSpec::blobs(3, 2, 5, 0.0),
            MixtureSpec::blobs(3, 1, 5, 1.0),
        ];
        for spec in bad {
            assert!(matches!(
                make_gaussian_mixture(&spec, 0, 1),
                Err(Error::InvalidParams(_))
            ));
        }
    }

    #[test]
    fn csv_with_labels() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "f0,f1,label\n1.0,2.0,0\n3.5,-1,2\n0,0,1\n");
        let d = load_features_csv(&p).unwrap();
        assert_eq!(d.x.dim(), (3, 2));
        assert_eq!(d.labels, Some(vec![0, 2, 1]));
        assert_eq!(d.k, Some(3));
    }

    #[test]
    fn csv_errors_carry_location() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "r.csv", "f0,f1\n1,2\n3\n");
        match load_features_csv(&p) {
            Err(Error::RaggedRows {
                row,
                expected,
                found,
                ..
            }) => assert_eq!((row, expected, found), (3, 2, 1)),
            other => panic!("{other:?}"),
        }
        let p = write(&dir, "n.csv", "f0,f1\n1,2\n3,NaN\n");
        match load_features_csv(&p) {
            Err(Error::Parse { row, col, .. }) => assert_eq!((row, col), (3, 2)),
            other => panic!("{other:?}"),
        }
        let p = write(&dir, "x.csv", "f0,f1\n1,abc\n");
        assert!(matches!(
            load_features_csv(&p),
            Err(Error::Parse { row: 2, col: 2, .. })
        ));
    }

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        eta: f64,
        loss: String,
        seed: u64,
        test_acc: f64,
    }

    #[test]
    fn results_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let rows = vec![
            Row {
                eta: 0.1 + 0.2,
                loss: "cce".into(),
                seed: 3,
                test_acc: 1.0 / 3.0,
            },
            Row {
                eta: 1e-300,
                loss: "sce".into(),
                seed: u64::MAX,
                test_acc: std::f64::consts::PI,
            },
        ];
        save_results(&p, &rows).unwrap();
        assert_eq!(load_results::<Row>(&p).unwrap(), rows);
        let header = std::fs::read_to_string(&p).unwrap();
        assert!(header.starts_with("eta,loss,seed,test_acc\n"));
    }

    #[test]
    fn label_matrix_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("y.csv");
        let y =
            LabelMatrix::from_rows(&[[0.1, 0.2, 0.7], [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]]).unwrap();
        save_label_matrix(&p, &y).unwrap();
        assert_eq!(load_label_matrix(&p).unwrap(), y);
    }
}
