use ndarray::Array1;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{check_training, r2_score, SpectralSolver};
use crate::error::{Error, Result};
use crate::hamiltonians::ParamVector;
use crate::kernels::{KernelSpec, PairwiseCache};
use crate::parallel::{map_indexed, Execution};
use crate::rng::{substream, Domain};

pub const DEFAULT_REPEATS: usize = 20;

/// Test-set R² statistics over `repeats` random training subsets of size `m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub m: usize,
    pub mean_r2: f64,
    /// Population standard deviation over the repeats.
    pub std_r2: f64,
    pub repeats: usize,
}

pub fn learning_curve(
    train: (&[ParamVector], &[f64]),
    test: (&[ParamVector], &[f64]),
    spec: &KernelSpec,
    lambda: f64,
    sizes: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<Vec<CurveRow>> {
    learning_curve_with(train, test, spec, lambda, sizes, repeats, seed, Execution::default())
}

#[allow(clippy::too_many_arguments)]
pub fn learning_curve_with(
    train: (&[ParamVector], &[f64]),
    test: (&[ParamVector], &[f64]),
    spec: &KernelSpec,
    lambda: f64,
    sizes: &[usize],
    repeats: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<CurveRow>> {
    check_training(train.0, train.1, lambda)?;
    if test.0.is_empty() || test.0.len() != test.1.len() {
        return Err(Error::invalid("test set must be nonempty with one label per input"));
    }
    if repeats == 0 {
        return Err(Error::invalid("repeats must be at least 1"));
    }
    if sizes.iter().any(|&m| m == 0 || m > train.0.len()) {
        return Err(Error::invalid(format!("subset sizes must lie in 1..={}", train.0.len())));
    }
    let all: Vec<ParamVector> = train.0.iter().chain(test.0).copied().collect();
    let cache = PairwiseCache::symmetric(&all, exec);
    let n_train = train.0.len();
    let test_idx: Vec<usize> = (n_train..all.len()).collect();

    let scores: Vec<Result<f64>> = map_indexed(sizes.len() * repeats, exec, |t| {
        let (si, rep) = (t / repeats, t % repeats);
        let m = sizes[si];
        let mut rng = substream(seed, Domain::LearningCurve, m as u64, rep as u64);
        let mut subset = if m == n_train { (0..n_train).collect() } else { sample(&mut rng, n_train, m).into_vec() };
        subset.sort_unstable();
        let k = cache.select(&subset, &subset).kernel(spec)?;
        let y = Array1::from_iter(subset.iter().map(|&i| train.1[i]));
        let alpha = SpectralSolver::new(&k)?.solve(&y, lambda);
        let pred = cache.select(&test_idx, &subset).kernel(spec)?.dot(&alpha);
        r2_score(pred.as_slice().expect("contiguous"), test.1)
    });
    let mut rows = Vec::with_capacity(sizes.len());
    for (si, &m) in sizes.iter().enumerate() {
        let vals = scores[si * repeats..(si + 1) * repeats]
            .iter()
            .map(|r| match r {
                Ok(v) => Ok(*v),
                Err(e) => Err(Error::Numerical(format!("learning-curve fit at M={m} failed: {e}"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        let mean = vals.iter().sum::<f64>() / repeats as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / repeats as f64;
        rows.push(CurveRow { m, mean_r2: mean, std_r2: var.sqrt(), repeats });
    }
    Ok(rows)
}
