use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Sparse binary-classification data in CSR layout, labels in `{−1, +1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticDataset {
    d: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    labels: Vec<f64>,
    hash: String,
}

impl LogisticDataset {
    /// Builds a dataset from 0-based sparse rows.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, labels: Vec<f64>, d: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Format(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if rows.is_empty() {
            return Err(Error::Format("dataset has no rows".into()));
        }
        if labels.iter().any(|y| *y != 1.0 && *y != -1.0) {
            return Err(Error::Format("labels must be -1 or +1".into()));
        }
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for (j, v) in row {
                if j >= d {
                    return Err(Error::Format(format!("feature index {j} >= d = {d}")));
                }
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        let mut h = Sha256::new();
        h.update(d.to_le_bytes());
        for (i, v) in indices.iter().zip(&values) {
            h.update(i.to_le_bytes());
            h.update(v.to_bits().to_le_bytes());
        }
        for y in &labels {
            h.update(y.to_bits().to_le_bytes());
        }
        Ok(Self {
            d,
            indptr,
            indices,
            values,
            labels,
            hash: hex::encode(h.finalize()),
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Feature indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    /// `⟨aᵢ, x⟩`
    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (idx, val) = self.row(i);
        idx.iter().zip(val).map(|(&j, v)| v * x[j]).sum()
    }

    /// Stable content hash (SHA-256 hex) of the parsed data.
    pub fn content_hash(&self) -> &str {
        &self.hash
    }
}

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_label(tok: &str) -> Option<f64> {
    let v: f64 = tok.parse().ok()?;
    if v == 1.0 {
        Some(1.0)
    } else if v == -1.0 || v == 0.0 {
        Some(-1.0)
    } else {
        None
    }
}

/// Reads a LIBSVM file (`label idx:val ...`, 1-based indices).
///
/// Labels `+1/-1` and `1/0` are accepted. `d` is the largest index seen, or
/// `d_hint` if that is larger. Blank lines and `#` comments are skipped.
pub fn load_libsvm(path: impl AsRef<Path>, d_hint: Option<usize>) -> Result<LogisticDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(PathBuf::from(path), e))?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = lineno + 1;
        let mut toks = line.split_whitespace();
        let label_tok = toks.next().expect("non-empty line has a token");
        let label = parse_label(label_tok)
            .ok_or_else(|| parse_error(path, lineno, format!("bad label '{label_tok}'")))?;
        let mut row = Vec::new();
        for tok in toks {
            let (i, v) = tok.split_once(':').ok_or_else(|| {
                parse_error(path, lineno, format!("expected idx:val, got '{tok}'"))
            })?;
            let i: usize = i
                .parse()
                .map_err(|_| parse_error(path, lineno, format!("bad feature index '{i}'")))?;
            if i == 0 {
                return Err(parse_error(path, lineno, "feature indices are 1-based"));
            }
            let v: f64 = v
                .parse()
                .map_err(|_| parse_error(path, lineno, format!("bad feature value '{v}'")))?;
            if !v.is_finite() {
                return Err(parse_error(path, lineno, "non-finite feature value"));
            }
            max_index = max_index.max(i);
            row.push((i - 1, v));
        }
        rows.push(row);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::Format(format!(
            "{} contains no samples",
            path.display()
        )));
    }
    let d = max_index.max(d_hint.unwrap_or(0)).max(1);
    LogisticDataset::from_rows(rows, labels, d)
}
