use ndarray::Array1;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_training, r2_score, SpectralSolver};
use crate::error::{Error, Result};
use crate::hamiltonians::ParamVector;
use crate::kernels::{KernelKind, KernelSpec, PairwiseCache};
use crate::parallel::{map_indexed, Execution};
use crate::rng::{substream, Domain};

pub const DEFAULT_FOLDS: usize = 10;

/// Candidate hyperparameter values. Lists for parameters a kernel does not
/// use are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub lambdas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub c0s: Vec<f64>,
    pub degrees: Vec<u32>,
}

fn decades(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| format!("1e{e}").parse().expect("literal")).collect()
}

impl Default for HyperGrid {
    /// λ ∈ {0, 10⁻⁸, …, 10⁵}; γ, c₀ ∈ {10⁻³, …, 10³}; d ∈ {1, …, 10}.
    fn default() -> Self {
        let mut lambdas = vec![0.0];
        lambdas.extend(decades(-8, 5));
        HyperGrid { lambdas, gammas: decades(-3, 3), c0s: decades(-3, 3), degrees: (1..=10).collect() }
    }
}

impl HyperGrid {
    /// Kernel specs in enumeration order (γ, then c₀, then d).
    pub fn specs(&self, kind: KernelKind) -> Vec<KernelSpec> {
        let one = |used: bool, v: &[f64], default: f64| if used { v.to_vec() } else { vec![default] };
        let gammas = one(kind.uses_gamma(), &self.gammas, 1.0);
        let c0s = one(kind.uses_c0(), &self.c0s, 0.0);
        let degrees = if kind.uses_degree() { self.degrees.clone() } else { vec![1] };
        let mut out = Vec::new();
        for &gamma in &gammas {
            for &c0 in &c0s {
                for &degree in &degrees {
                    out.push(KernelSpec { kind, gamma, c0, degree });
                }
            }
        }
        out
    }

    /// Number of (λ, spec) combinations for `kind`.
    pub fn size(&self, kind: KernelKind) -> usize {
        self.lambdas.len() * self.specs(kind).len()
    }

    fn validate(&self, kind: KernelKind) -> Result<()> {
        if self.lambdas.is_empty() || self.specs(kind).is_empty() {
            return Err(Error::invalid("hyperparameter grid is empty"));
        }
        if self.lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(Error::invalid("grid lambdas must be finite and non-negative"));
        }
        self.specs(kind).iter().try_for_each(|s| s.validate())
    }
}

/// Mean validation R² of one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub kernel: KernelSpec,
    pub lambda: f64,
    /// `None` when no fold produced a finite score.
    pub mean_r2: Option<f64>,
    pub scored_folds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub kind: KernelKind,
    pub folds: usize,
    pub seed: u64,
    pub best_kernel: KernelSpec,
    pub best_lambda: f64,
    pub best_mean_r2: f64,
    /// Folds whose validation labels were constant, so R² was skipped.
    pub skipped_folds: usize,
    /// Every grid point in enumeration order (λ outermost).
    pub table: Vec<CvRow>,
}

/// Seeded shuffle followed by contiguous slicing into `folds` parts; the
/// first `m % folds` parts get one extra element.
pub fn fold_assignment(m: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::invalid("cross-validation needs at least two folds"));
    }
    if m < folds {
        return Err(Error::invalid(format!("{m} samples cannot fill {folds} folds")));
    }
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(&mut substream(seed, Domain::Folds, m as u64, 0));
    let (base, extra) = (m / folds, m % folds);
    let mut out = Vec::with_capacity(folds);
    let mut pos = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(idx[pos..pos + len].to_vec());
        pos += len;
    }
    Ok(out)
}

pub fn cross_validate(
    xs: &[ParamVector],
    ys: &[f64],
    kind: KernelKind,
    grid: &HyperGrid,
    folds: usize,
    seed: u64,
) -> Result<CvReport> {
    cross_validate_with(xs, ys, kind, grid, folds, seed, Execution::default())
}

/// Grid search by k-fold cross-validation. Each (fold, kernel spec) task
/// decomposes its training Gram matrix once and scores every λ; tasks run
/// in parallel and are reduced in a fixed order.
pub fn cross_validate_with(
    xs: &[ParamVector],
    ys: &[f64],
    kind: KernelKind,
    grid: &HyperGrid,
    folds: usize,
    seed: u64,
    exec: Execution,
) -> Result<CvReport> {
    check_training(xs, ys, 0.0)?;
    grid.validate(kind)?;
    let parts = fold_assignment(xs.len(), folds, seed)?;
    let cache = PairwiseCache::symmetric(xs, exec);
    let specs = grid.specs(kind);

    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|f| {
            let train: Vec<usize> = parts.iter().enumerate().filter(|(g, _)| *g != f).flat_map(|(_, p)| p.clone()).collect();
            (train, parts[f].clone())
        })
        .collect();
    let constant: Vec<bool> = splits
        .iter()
        .map(|(_, val)| val.iter().all(|&i| ys[i] == ys[val[0]]))
        .collect();
    let skipped_folds = constant.iter().filter(|c| **c).count();

    // scores[spec][fold][lambda]
    let tasks = specs.len() * folds;
    let results: Vec<Vec<Option<f64>>> = map_indexed(tasks, exec, |t| {
        let (si, f) = (t / folds, t % folds);
        if constant[f] {
            return vec![None; grid.lambdas.len()];
        }
        let (train, val) = &splits[f];
        score_task(&cache, ys, &specs[si], train, val, &grid.lambdas)
    });

    let mut table = Vec::with_capacity(grid.lambdas.len() * specs.len());
    for (li, &lambda) in grid.lambdas.iter().enumerate() {
        for (si, spec) in specs.iter().enumerate() {
            let scores: Vec<f64> = (0..folds).filter_map(|f| results[si * folds + f][li]).collect();
            let mean_r2 = (!scores.is_empty() && scores.len() + skipped_folds == folds)
                .then(|| scores.iter().sum::<f64>() / scores.len() as f64);
            table.push(CvRow { kernel: spec.canonical(), lambda, mean_r2, scored_folds: scores.len() });
        }
    }
    let mut best: Option<&CvRow> = None;
    for row in &table {
        if let Some(s) = row.mean_r2 {
            if best.is_none_or(|b| s > b.mean_r2.expect("scored")) {
                best = Some(row);
            }
        }
    }
    let best = best.ok_or_else(|| Error::Numerical("no grid point produced a finite validation score".into()))?;
    Ok(CvReport {
        kind,
        folds,
        seed,
        best_kernel: best.kernel,
        best_lambda: best.lambda,
        best_mean_r2: best.mean_r2.expect("scored"),
        skipped_folds,
        table,
    })
}

fn score_task(
    cache: &PairwiseCache,
    ys: &[f64],
    spec: &KernelSpec,
    train: &[usize],
    val: &[usize],
    lambdas: &[f64],
) -> Vec<Option<f64>> {
    let fail = || vec![None; lambdas.len()];
    let Ok(k) = cache.select(train, train).kernel(spec) else { return fail() };
    let Ok(kv) = cache.select(val, train).kernel(spec) else { return fail() };
    let Ok(solver) = SpectralSolver::new(&k) else { return fail() };
    let y = Array1::from_iter(train.iter().map(|&i| ys[i]));
    let truth: Vec<f64> = val.iter().map(|&i| ys[i]).collect();
    lambdas
        .iter()
        .map(|&lambda| {
            let pred = kv.dot(&solver.solve(&y, lambda)).to_vec();
            r2_score(&pred, &truth).ok().filter(|s| s.is_finite())
        })
        .collect()
}
