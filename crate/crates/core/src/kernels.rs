//! The six kernels and Gram-matrix assembly.
//!
//! Gram matrices go through a [`PairwiseCache`] of inner products, squared
//! Euclidean distances and ℓ₁ distances, so a grid search can rebuild the
//! matrix for every γ without touching the inputs again.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::ParamVector;
use crate::parallel::{map_indexed, Execution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Polynomial,
    Rbf,
    Laplacian,
    Sigmoid,
    Cosine,
}

pub const ALL_KERNELS: [KernelKind; 6] = [
    KernelKind::Linear,
    KernelKind::Polynomial,
    KernelKind::Rbf,
    KernelKind::Laplacian,
    KernelKind::Sigmoid,
    KernelKind::Cosine,
];

impl KernelKind {
    pub fn uses_gamma(self) -> bool {
        !matches!(self, KernelKind::Linear | KernelKind::Cosine)
    }

    pub fn uses_c0(self) -> bool {
        matches!(self, KernelKind::Polynomial | KernelKind::Sigmoid)
    }

    pub fn uses_degree(self) -> bool {
        self == KernelKind::Polynomial
    }

    fn name(self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Polynomial => "polynomial",
            KernelKind::Rbf => "rbf",
            KernelKind::Laplacian => "laplacian",
            KernelKind::Sigmoid => "sigmoid",
            KernelKind::Cosine => "cosine",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "poly" => return Ok(KernelKind::Polynomial),
            "gaussian" => return Ok(KernelKind::Rbf),
            _ => {}
        }
        ALL_KERNELS
            .into_iter()
            .find(|k| k.name() == lower)
            .ok_or_else(|| Error::invalid(format!("unknown kernel `{s}`")))
    }
}

/// A kernel with its hyperparameters. Fields a kind does not use are
/// carried but ignored, and serialized in canonical form (γ=1, c₀=0, d=1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "KernelRecord", try_from = "KernelRecord")]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub gamma: f64,
    pub c0: f64,
    pub degree: u32,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct KernelRecord {
    kind: KernelKind,
    gamma: f64,
    c0: f64,
    degree: u32,
}

impl From<KernelSpec> for KernelRecord {
    fn from(s: KernelSpec) -> Self {
        let c = s.canonical();
        KernelRecord { kind: c.kind, gamma: c.gamma, c0: c.c0, degree: c.degree }
    }
}

impl TryFrom<KernelRecord> for KernelSpec {
    type Error = Error;

    fn try_from(r: KernelRecord) -> Result<Self> {
        let spec = KernelSpec { kind: r.kind, gamma: r.gamma, c0: r.c0, degree: r.degree };
        spec.validate()?;
        Ok(spec)
    }
}

impl KernelSpec {
    pub fn new(kind: KernelKind, gamma: f64, c0: f64, degree: u32) -> Result<Self> {
        let s = KernelSpec { kind, gamma, c0, degree };
        s.validate()?;
        Ok(s)
    }

    pub fn linear() -> Self {
        KernelSpec { kind: KernelKind::Linear, gamma: 1.0, c0: 0.0, degree: 1 }
    }

    pub fn cosine() -> Self {
        KernelSpec { kind: KernelKind::Cosine, ..Self::linear() }
    }

    pub fn rbf(gamma: f64) -> Self {
        KernelSpec { kind: KernelKind::Rbf, gamma, ..Self::linear() }
    }

    pub fn laplacian(gamma: f64) -> Self {
        KernelSpec { kind: KernelKind::Laplacian, gamma, ..Self::linear() }
    }

    pub fn sigmoid(gamma: f64, c0: f64) -> Self {
        KernelSpec { kind: KernelKind::Sigmoid, gamma, c0, degree: 1 }
    }

    pub fn polynomial(gamma: f64, c0: f64, degree: u32) -> Self {
        KernelSpec { kind: KernelKind::Polynomial, gamma, c0, degree }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() || !self.c0.is_finite() {
            return Err(Error::invalid("kernel hyperparameters must be finite"));
        }
        if self.degree == 0 {
            return Err(Error::invalid("polynomial degree must be at least 1"));
        }
        Ok(())
    }

    /// Unused hyperparameters reset to γ=1, c₀=0, d=1.
    pub fn canonical(&self) -> KernelSpec {
        let k = self.kind;
        KernelSpec {
            kind: k,
            gamma: if k.uses_gamma() { self.gamma } else { 1.0 },
            c0: if k.uses_c0() { self.c0 } else { 0.0 },
            degree: if k.uses_degree() { self.degree } else { 1 },
        }
    }

    fn eval_parts(&self, dot: f64, sq: f64, l1: f64, norms: (f64, f64)) -> Result<f64> {
        Ok(match self.kind {
            KernelKind::Linear => dot,
            KernelKind::Polynomial => (self.gamma * dot + self.c0).powi(self.degree as i32),
            KernelKind::Rbf => (-self.gamma * sq).exp(),
            KernelKind::Laplacian => (-self.gamma * l1).exp(),
            KernelKind::Sigmoid => (self.gamma * dot + self.c0).tanh(),
            KernelKind::Cosine => {
                if norms.0 == 0.0 || norms.1 == 0.0 {
                    return Err(Error::Domain("cosine kernel is undefined at the zero vector".into()));
                }
                dot / (norms.0 * norms.1)
            }
        })
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if self.kind.uses_gamma() {
            write!(f, "(gamma={}", self.gamma)?;
            if self.kind.uses_c0() {
                write!(f, ", c0={}", self.c0)?;
            }
            if self.kind.uses_degree() {
                write!(f, ", degree={}", self.degree)?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &ParamVector, y: &ParamVector) -> Result<f64> {
    spec.eval_parts(x.dot(y), x.sq_dist(y), x.l1_dist(y), (x.norm(), y.norm()))
}

/// Pairwise quantities every kernel is a function of.
#[derive(Clone, Debug, PartialEq)]
pub struct PairwiseCache {
    pub dot: Array2<f64>,
    pub sq: Array2<f64>,
    pub l1: Array2<f64>,
    pub row_norms: Vec<f64>,
    pub col_norms: Vec<f64>,
    symmetric: bool,
}

impl PairwiseCache {
    /// Symmetric cache of `xs` against itself; only the upper triangle is
    /// computed and then mirrored.
    pub fn symmetric(xs: &[ParamVector], exec: Execution) -> PairwiseCache {
        let m = xs.len();
        let rows = map_indexed(m, exec, |i| {
            (i..m).map(|j| (xs[i].dot(&xs[j]), xs[i].sq_dist(&xs[j]), xs[i].l1_dist(&xs[j]))).collect::<Vec<_>>()
        });
        let mut dot = Array2::zeros((m, m));
        let mut sq = Array2::zeros((m, m));
        let mut l1 = Array2::zeros((m, m));
        for (i, row) in rows.into_iter().enumerate() {
            for (off, (d, s, l)) in row.into_iter().enumerate() {
                let j = i + off;
                dot[[i, j]] = d;
                dot[[j, i]] = d;
                sq[[i, j]] = s;
                sq[[j, i]] = s;
                l1[[i, j]] = l;
                l1[[j, i]] = l;
            }
        }
        let norms: Vec<f64> = xs.iter().map(|x| x.norm()).collect();
        PairwiseCache { dot, sq, l1, row_norms: norms.clone(), col_norms: norms, symmetric: true }
    }

    /// Cache of `rows` against `cols`.
    pub fn cross(rows: &[ParamVector], cols: &[ParamVector], exec: Execution) -> PairwiseCache {
        let (m, k) = (rows.len(), cols.len());
        let data = map_indexed(m, exec, |i| {
            cols.iter().map(|c| (rows[i].dot(c), rows[i].sq_dist(c), rows[i].l1_dist(c))).collect::<Vec<_>>()
        });
        let mut dot = Array2::zeros((m, k));
        let mut sq = Array2::zeros((m, k));
        let mut l1 = Array2::zeros((m, k));
        for (i, row) in data.into_iter().enumerate() {
            for (j, (d, s, l)) in row.into_iter().enumerate() {
                dot[[i, j]] = d;
                sq[[i, j]] = s;
                l1[[i, j]] = l;
            }
        }
        PairwiseCache {
            dot,
            sq,
            l1,
            row_norms: rows.iter().map(|x| x.norm()).collect(),
            col_norms: cols.iter().map(|x| x.norm()).collect(),
            symmetric: false,
        }
    }

    /// Restriction to the given row and column indices.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> PairwiseCache {
        let pick = |a: &Array2<f64>| Array2::from_shape_fn((rows.len(), cols.len()), |(i, j)| a[[rows[i], cols[j]]]);
        PairwiseCache {
            dot: pick(&self.dot),
            sq: pick(&self.sq),
            l1: pick(&self.l1),
            row_norms: rows.iter().map(|&i| self.row_norms[i]).collect(),
            col_norms: cols.iter().map(|&j| self.col_norms[j]).collect(),
            symmetric: self.symmetric && rows == cols,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.dot.dim()
    }

    pub fn kernel(&self, spec: &KernelSpec) -> Result<Array2<f64>> {
        spec.validate()?;
        let (m, k) = self.shape();
        let mut out = Array2::zeros((m, k));
        for i in 0..m {
            let j0 = if self.symmetric { i } else { 0 };
            for j in j0..k {
                let v = spec.eval_parts(
                    self.dot[[i, j]],
                    self.sq[[i, j]],
                    self.l1[[i, j]],
                    (self.row_norms[i], self.col_norms[j]),
                )?;
                out[[i, j]] = v;
                if self.symmetric {
                    out[[j, i]] = v;
                }
            }
        }
        Ok(out)
    }
}

pub fn gram_matrix(spec: &KernelSpec, xs: &[ParamVector]) -> Result<Array2<f64>> {
    gram_matrix_with(spec, xs, Execution::default())
}

pub fn gram_matrix_with(spec: &KernelSpec, xs: &[ParamVector], exec: Execution) -> Result<Array2<f64>> {
    if xs.is_empty() {
        return Err(Error::invalid("Gram matrix needs at least one input"));
    }
    PairwiseCache::symmetric(xs, exec).kernel(spec)
}

/// `K[i, j] = k(rows[i], cols[j])`.
pub fn cross_gram(spec: &KernelSpec, rows: &[ParamVector], cols: &[ParamVector], exec: Execution) -> Result<Array2<f64>> {
    PairwiseCache::cross(rows, cols, exec).kernel(spec)
}
