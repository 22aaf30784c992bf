//! JSON file formats: operator spec, chain file and basis file.
//!
//! Matrices are row-major arrays of `{"re": f, "im": f}` objects.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atlas::ManifoldPoint;
use crate::error::{Error, Result};
use crate::operator::{
    build_model, CMatrix, HermitianOperator, ModelHamiltonian, ModelKind, ModelParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub re: f64,
    pub im: f64,
}

pub type MatrixEntries = Vec<Vec<Entry>>;

pub fn to_entries(a: &HermitianOperator) -> MatrixEntries {
    let m = a.matrix();
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| Entry {
                    re: m[(i, j)].re,
                    im: m[(i, j)].im,
                })
                .collect()
        })
        .collect()
}

pub fn from_entries(entries: &MatrixEntries) -> Result<HermitianOperator> {
    let n = entries.len();
    if n == 0 {
        return Err(Error::Empty);
    }
    if let Some(row) = entries.iter().find(|r| r.len() != n) {
        return Err(Error::NotSquare {
            rows: n,
            cols: row.len(),
        });
    }
    let m = CMatrix::from_fn(n, n, |i, j| {
        Complex64::new(entries[i][j].re, entries[i][j].im)
    });
    HermitianOperator::new(m)
}

/// Operator spec: `{"dim", "kind", "beta0", "entries"}`; entries are optional for named kinds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub dim: usize,
    pub kind: ModelKind,
    #[serde(default)]
    pub beta0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<MatrixEntries>,
}

impl OperatorSpec {
    pub fn from_model(model: &ModelHamiltonian) -> OperatorSpec {
        OperatorSpec {
            dim: model.dim(),
            kind: model.kind(),
            beta0: model.beta0(),
            entries: Some(to_entries(model.h0())),
        }
    }

    pub fn to_model(&self) -> Result<ModelHamiltonian> {
        let custom = self.entries.as_ref().map(from_entries).transpose()?;
        if let Some(m) = &custom {
            m.check_dim(self.dim)?;
        }
        match (self.kind, custom) {
            (ModelKind::Custom, None) => {
                Err(Error::invalid("entries", "custom model requires entries"))
            }
            // named kinds honour explicit entries if present
            (kind, Some(h0)) => ModelHamiltonian::new(kind, h0, self.beta0),
            (kind, None) => build_model(
                kind,
                self.dim,
                &ModelParams {
                    beta0: self.beta0,
                    ..ModelParams::default()
                },
            ),
        }
    }
}

/// Chain file: `{"base": <operator spec>, "steps": [<matrix>, ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainFile {
    pub base: OperatorSpec,
    pub steps: Vec<MatrixEntries>,
}

impl ChainFile {
    pub fn from_point(p: &ManifoldPoint) -> ChainFile {
        ChainFile {
            base: OperatorSpec::from_model(p.base()),
            steps: p.steps().iter().map(to_entries).collect(),
        }
    }

    /// Replays the steps through the admission gates.
    pub fn to_point(&self) -> Result<ManifoldPoint> {
        let base = Arc::new(self.base.to_model()?);
        let steps = self
            .steps
            .iter()
            .map(from_entries)
            .collect::<Result<Vec<_>>>()?;
        ManifoldPoint::from_steps(base, &steps)
    }
}

/// Basis file: either `{"basis": [<matrix>, ...]}` or a bare array of matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BasisFile {
    Wrapped { basis: Vec<MatrixEntries> },
    Bare(Vec<MatrixEntries>),
}

impl BasisFile {
    pub fn matrices(&self) -> Result<Vec<HermitianOperator>> {
        let raw = match self {
            BasisFile::Wrapped { basis } => basis,
            BasisFile::Bare(v) => v,
        };
        raw.iter().map(from_entries).collect()
    }
}

/// Either a bare matrix or an operator spec whose entries are used.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MatrixFile {
    Bare(MatrixEntries),
    Spec { entries: MatrixEntries },
}

impl MatrixFile {
    pub fn matrix(&self) -> Result<HermitianOperator> {
        match self {
            MatrixFile::Bare(e) | MatrixFile::Spec { entries: e } => from_entries(e),
        }
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<ModelHamiltonian> {
    read_json::<OperatorSpec>(path)?.to_model()
}
