//! Kernel ridge regression in closed form, metrics, cross-validation and
//! learning curves.
//!
//! Training solves `(K² + λK) α = K y` with the pseudoinverse. With the
//! eigendecomposition `K = Q diag(μ) Qᵀ`, the matrix `K² + λK` has the same
//! eigenvectors and eigenvalues `μ² + λμ`, so
//! `α = Q diag(μ / (μ² + λμ)) Qᵀ y` with eigenvalues below the relative
//! cutoff treated as zero. One decomposition of `K` serves every λ.

mod cv;
mod curve;

pub use cv::{cross_validate, cross_validate_with, fold_assignment, CvReport, CvRow, HyperGrid, DEFAULT_FOLDS};
pub use curve::{learning_curve, learning_curve_with, CurveRow, DEFAULT_REPEATS};

use std::path::Path;

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::ParamVector;
use crate::kernels::{cross_gram, gram_matrix_with, KernelSpec};
use crate::parallel::Execution;

/// Relative cutoff on the singular values of `K² + λK`.
pub const PINV_RCOND: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kernel: KernelSpec,
    pub lambda: f64,
    pub alphas: Vec<f64>,
    pub train_inputs: Vec<ParamVector>,
    #[serde(default)]
    pub provenance: serde_json::Map<String, serde_json::Value>,
}

impl TrainedModel {
    pub fn check(&self) -> Result<()> {
        if self.alphas.len() != self.train_inputs.len() {
            return Err(Error::Integrity(format!(
                "model has {} coefficients for {} training inputs",
                self.alphas.len(),
                self.train_inputs.len()
            )));
        }
        self.kernel.validate()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<TrainedModel> {
        let m: TrainedModel = serde_json::from_str(text)?;
        m.check()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        crate::datasets::write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<TrainedModel> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Eigendecomposition of a Gram matrix, reusable across λ.
#[derive(Clone, Debug)]
pub struct SpectralSolver {
    evals: Array1<f64>,
    evecs: Array2<f64>,
}

impl SpectralSolver {
    pub fn new(k: &Array2<f64>) -> Result<Self> {
        if !k.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("Gram matrix has non-finite entries".into()));
        }
        let (evals, evecs) = k
            .eigh(UPLO::Upper)
            .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e}")))?;
        Ok(SpectralSolver { evals, evecs })
    }

    /// Minimum-norm least-squares solution of `(K² + λK) α = K y`.
    pub fn solve(&self, y: &Array1<f64>, lambda: f64) -> Array1<f64> {
        let sv: Vec<f64> = self.evals.iter().map(|&m| (m * m + lambda * m).abs()).collect();
        let top = sv.iter().cloned().fold(0.0, f64::max);
        let qty = self.evecs.t().dot(y);
        let scaled = Array1::from_iter(self.evals.iter().zip(&sv).zip(qty.iter()).map(|((&mu, &s), &c)| {
            if top > 0.0 && s > PINV_RCOND * top {
                c * mu / (mu * mu + lambda * mu)
            } else {
                0.0
            }
        }));
        self.evecs.dot(&scaled)
    }
}

fn check_training(xs: &[ParamVector], ys: &[f64], lambda: f64) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if xs.len() != ys.len() {
        return Err(Error::invalid(format!("{} inputs but {} labels", xs.len(), ys.len())));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid("lambda must be finite and non-negative"));
    }
    Ok(())
}

pub fn fit(xs: &[ParamVector], ys: &[f64], spec: &KernelSpec, lambda: f64) -> Result<TrainedModel> {
    fit_with(xs, ys, spec, lambda, Execution::default())
}

pub fn fit_with(xs: &[ParamVector], ys: &[f64], spec: &KernelSpec, lambda: f64, exec: Execution) -> Result<TrainedModel> {
    check_training(xs, ys, lambda)?;
    let k = gram_matrix_with(spec, xs, exec)?;
    let alpha = SpectralSolver::new(&k)?.solve(&Array1::from_vec(ys.to_vec()), lambda);
    Ok(TrainedModel {
        kernel: spec.canonical(),
        lambda,
        alphas: alpha.to_vec(),
        train_inputs: xs.to_vec(),
        provenance: Default::default(),
    })
}

pub fn predict(model: &TrainedModel, x: &ParamVector) -> Result<f64> {
    let mut acc = 0.0;
    for (a, xi) in model.alphas.iter().zip(&model.train_inputs) {
        acc += a * crate::kernels::kernel_eval(&model.kernel, x, xi)?;
    }
    Ok(acc)
}

pub fn predict_many(model: &TrainedModel, xs: &[ParamVector], exec: Execution) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Ok(Vec::new());
    }
    let k = cross_gram(&model.kernel, xs, &model.train_inputs, exec)?;
    Ok(k.dot(&Array1::from_vec(model.alphas.clone())).to_vec())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `None` when the evaluated labels are constant.
    pub r2: Option<f64>,
    pub rmse: f64,
    pub mae: f64,
}

impl Metrics {
    pub fn from_predictions(pred: &[f64], truth: &[f64]) -> Result<Metrics> {
        if truth.is_empty() || pred.len() != truth.len() {
            return Err(Error::invalid("metrics need equally long, nonempty prediction and label lists"));
        }
        let m = truth.len() as f64;
        let sse: f64 = pred.iter().zip(truth).map(|(p, y)| (p - y) * (p - y)).sum();
        let sae: f64 = pred.iter().zip(truth).map(|(p, y)| (p - y).abs()).sum();
        let mean = truth.iter().sum::<f64>() / m;
        let sst: f64 = truth.iter().map(|y| (y - mean) * (y - mean)).sum();
        Ok(Metrics { r2: (sst > 0.0).then(|| 1.0 - sse / sst), rmse: (sse / m).sqrt(), mae: sae / m })
    }

    pub fn r2(&self) -> Result<f64> {
        self.r2.ok_or(Error::UndefinedR2)
    }
}

pub fn r2_score(pred: &[f64], truth: &[f64]) -> Result<f64> {
    Metrics::from_predictions(pred, truth)?.r2()
}

pub fn evaluate(model: &TrainedModel, xs: &[ParamVector], ys: &[f64]) -> Result<Metrics> {
    evaluate_with(model, xs, ys, Execution::default())
}

pub fn evaluate_with(model: &TrainedModel, xs: &[ParamVector], ys: &[f64], exec: Execution) -> Result<Metrics> {
    if xs.len() != ys.len() {
        return Err(Error::invalid(format!("{} inputs but {} labels", xs.len(), ys.len())));
    }
    Metrics::from_predictions(&predict_many(model, xs, exec)?, ys)
}

/// `(1/M)‖Kα − y‖² + (λ/M) αᵀKα`, the regularised empirical risk of the
/// kernel expansion with coefficients `α`.
pub fn regularized_risk(k: &Array2<f64>, y: &Array1<f64>, alpha: &Array1<f64>, lambda: f64) -> f64 {
    let m = y.len() as f64;
    let ka = k.dot(alpha);
    let r = &ka - y;
    (r.dot(&r) + lambda * alpha.dot(&ka)) / m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_example() {
        let m = fit(&[ParamVector::new(1.0, 0.0, 0.0)], &[4.0], &KernelSpec::linear(), 0.0).unwrap();
        assert_eq!(m.alphas, vec![4.0]);
        assert_eq!(predict(&m, &ParamVector::new(1.0, 0.0, 0.0)).unwrap(), 4.0);
    }

    #[test]
    fn zero_alphas_predict_zero() {
        let m = TrainedModel {
            kernel: KernelSpec::rbf(1.0),
            lambda: 0.0,
            alphas: vec![0.0; 2],
            train_inputs: vec![ParamVector::new(1.0, 2.0, 3.0), ParamVector::ZERO],
            provenance: Default::default(),
        };
        assert_eq!(predict(&m, &ParamVector::new(-4.0, 0.5, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn metric_arithmetic() {
        let m = Metrics::from_predictions(&[1.0, 2.0], &[0.0, 3.0]).unwrap();
        assert_eq!((m.rmse, m.mae), (1.0, 1.0));
        let m = Metrics::from_predictions(&[1.0, 3.0], &[1.0, 1.0]).unwrap();
        assert_eq!(m.rmse, 2f64.sqrt());
        assert_eq!(m.mae, 1.0);
        assert!(matches!(m.r2(), Err(Error::UndefinedR2)));
        let y = [1.0, 2.0, 6.0];
        assert_eq!(r2_score(&y, &y).unwrap(), 1.0);
        assert_eq!(r2_score(&[3.0; 3], &y).unwrap(), 0.0);
    }

    #[test]
    fn argument_checks() {
        let x = [ParamVector::ZERO];
        assert!(fit(&x, &[1.0, 2.0], &KernelSpec::linear(), 0.0).is_err());
        assert!(fit(&[], &[], &KernelSpec::linear(), 0.0).is_err());
        assert!(fit(&x, &[1.0], &KernelSpec::linear(), -1.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let xs = [ParamVector::new(0.1, 0.2, 0.3), ParamVector::new(1.0 / 3.0, -2.5, 1e-17)];
        let mut m = fit(&xs, &[0.5, -0.25], &KernelSpec::laplacian(0.3), 1e-3).unwrap();
        m.provenance.insert("seed".into(), 7.into());
        let back = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let text = m.to_json().unwrap().replace("\"alphas\": [", "\"alphas\": [1.0,");
        assert!(matches!(TrainedModel::from_json(&text), Err(Error::Integrity(_))));
    }
}
