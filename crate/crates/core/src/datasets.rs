//! Labelled datasets: generation, splitting and CSV persistence.
//!
//! A dataset is stored as a CSV body with header `x1,x2,x3,label` and a
//! JSON sidecar holding [`DatasetMeta`]; for `data.csv` the sidecar is
//! `data.meta.json`.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_sim::{check_cap, target_dense, Target, DEFAULT_DENSE_CAP};
use crate::hamiltonians::{sample_inputs_with, Family, ParamVector};
use crate::mpo::{target_mpo, MpoOptions, TruncationPolicy, DEFAULT_DT, DEFAULT_SVD_CUTOFF};
use crate::parallel::{map_indexed, Execution};
use crate::rng::{substream, Domain};

pub const CSV_HEADER: [&str; 4] = ["x1", "x2", "x3", "label"];

/// Relative slack when checking inputs against the sampling radius.
const RADIUS_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Dense,
    Mpo,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Dense => "dense",
            Engine::Mpo => "mpo",
        })
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dense" | "exact" => Ok(Engine::Dense),
            "mpo" | "tebd" => Ok(Engine::Mpo),
            other => Err(Error::invalid(format!("unknown engine `{other}`"))),
        }
    }
}

/// Which part of a split a dataset is and where it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitProvenance {
    pub part: String,
    pub train_fraction: f64,
    pub seed: u64,
    pub source_rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub family: Family,
    pub n: usize,
    pub target: Target,
    pub engine: Engine,
    /// Bond dimension for the MPO engine.
    pub chi: Option<usize>,
    /// Trotter step for the MPO engine.
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svd_cutoff: Option<f64>,
    pub seed: u64,
    pub radius: f64,
    pub generator_version: String,
    pub rows: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitProvenance>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<ParamVector>,
    pub labels: Vec<f64>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn check(&self) -> Result<()> {
        if self.inputs.len() != self.labels.len() {
            return Err(Error::Integrity(format!(
                "{} inputs but {} labels",
                self.inputs.len(),
                self.labels.len()
            )));
        }
        if self.meta.rows != self.inputs.len() {
            return Err(Error::Integrity(format!(
                "metadata records {} rows but the body has {}",
                self.meta.rows,
                self.inputs.len()
            )));
        }
        let limit = self.meta.radius * (1.0 + RADIUS_SLACK);
        if let Some(i) = self.inputs.iter().position(|x| !(x.norm() <= limit)) {
            return Err(Error::Integrity(format!("input {i} lies outside radius {}", self.meta.radius)));
        }
        Ok(())
    }

    fn subset(&self, idx: &[usize], split: SplitProvenance) -> Dataset {
        Dataset {
            inputs: idx.iter().map(|&i| self.inputs[i]).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            meta: DatasetMeta { rows: idx.len(), split: Some(split), ..self.meta.clone() },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub family: Family,
    pub target: Target,
    pub n: usize,
    pub count: usize,
    pub engine: Engine,
    pub seed: u64,
    pub chi: usize,
    pub dt: f64,
    pub svd_cutoff: f64,
}

impl GenerateConfig {
    pub fn new(family: Family, target: Target, n: usize, count: usize, engine: Engine, seed: u64) -> Self {
        GenerateConfig { family, target, n, count, engine, seed, chi: 64, dt: DEFAULT_DT, svd_cutoff: DEFAULT_SVD_CUTOFF }
    }
}

pub fn generate(cfg: &GenerateConfig) -> Result<Dataset> {
    generate_with(cfg, Execution::default())
}

/// Samples inputs and labels them. Rows are labelled independently; every
/// failure is collected and reported together with its row index.
pub fn generate_with(cfg: &GenerateConfig, exec: Execution) -> Result<Dataset> {
    if cfg.n < cfg.family.min_sites() {
        return Err(Error::invalid(format!("{} needs at least {} sites", cfg.family, cfg.family.min_sites())));
    }
    let opts = match cfg.engine {
        Engine::Dense => {
            check_cap(cfg.n, DEFAULT_DENSE_CAP)?;
            None
        }
        Engine::Mpo => {
            if !(cfg.dt > 0.0) || !cfg.dt.is_finite() {
                return Err(Error::invalid("Trotter step must be positive"));
            }
            Some(MpoOptions::new(TruncationPolicy::new(cfg.chi, cfg.svd_cutoff)?).with_dt(cfg.dt))
        }
    };
    let inputs = sample_inputs_with(cfg.family, cfg.n, cfg.count, cfg.seed, exec);
    let results = map_indexed(inputs.len(), exec, |i| {
        let x = inputs[i];
        let value = match &opts {
            None => target_dense(cfg.target, cfg.family, x, cfg.n),
            Some(o) => target_mpo(cfg.target, cfg.family, x, cfg.n, o).map(|r| r.value),
        }?;
        if !value.is_finite() {
            return Err(Error::Numerical("label is not finite".into()));
        }
        Ok(value)
    });
    let mut labels = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => labels.push(v),
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    if !failures.is_empty() {
        return Err(Error::SampleFailures(failures));
    }
    let mpo = cfg.engine == Engine::Mpo;
    Ok(Dataset {
        meta: DatasetMeta {
            family: cfg.family,
            n: cfg.n,
            target: cfg.target,
            engine: cfg.engine,
            chi: mpo.then_some(cfg.chi),
            dt: mpo.then_some(cfg.dt),
            svd_cutoff: mpo.then_some(cfg.svd_cutoff),
            seed: cfg.seed,
            radius: cfg.family.radius(cfg.n),
            generator_version: env!("CARGO_PKG_VERSION").to_string(),
            rows: inputs.len(),
            split: None,
        },
        inputs,
        labels,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.8, seed: 0 }
    }
}

/// Shuffled row indices for the train and test parts.
pub fn split_indices(count: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::invalid("train fraction must lie strictly between 0 and 1"));
    }
    if count < 2 {
        return Err(Error::invalid("splitting needs at least two rows"));
    }
    let n_train = (spec.train_fraction * count as f64).round() as usize;
    if n_train == 0 || n_train == count {
        return Err(Error::invalid(format!(
            "fraction {} of {count} rows leaves one side empty",
            spec.train_fraction
        )));
    }
    let mut idx: Vec<usize> = (0..count).collect();
    idx.shuffle(&mut substream(spec.seed, Domain::Split, count as u64, 0));
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds.len(), spec)?;
    let prov = |part: &str| SplitProvenance {
        part: part.into(),
        train_fraction: spec.train_fraction,
        seed: spec.seed,
        source_rows: ds.len(),
    };
    Ok((ds.subset(&train, prov("train")), ds.subset(&test, prov("test"))))
}

/// Sidecar path: `dir/name.csv` maps to `dir/name.meta.json`.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let written = (|| -> Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        Ok(())
    })();
    if let Err(e) = written {
        let _ = std::fs::remove_file(&tmp);
        return Err(e);
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Shortest representation that parses back to the same `f64`.
fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn to_csv(ds: &Dataset) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(io)?;
    for (x, y) in ds.inputs.iter().zip(&ds.labels) {
        w.write_record([num(x.0[0]), num(x.0[1]), num(x.0[2]), num(*y)]).map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

pub fn save(ds: &Dataset, path: &Path) -> Result<()> {
    ds.check()?;
    let mut meta = serde_json::to_string_pretty(&ds.meta)?;
    meta.push('\n');
    write_atomic(path, &to_csv(ds)?)?;
    write_atomic(&meta_path(path), meta.as_bytes())
}

/// Parses a CSV body. Line numbers in errors are 1-based and count the
/// header.
pub fn parse_csv(text: &[u8]) -> Result<(Vec<ParamVector>, Vec<f64>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text);
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    let mut saw_header = false;
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if !saw_header {
            if rec.iter().collect::<Vec<_>>() != CSV_HEADER {
                return Err(Error::Parse { line, message: format!("expected header `{}`", CSV_HEADER.join(",")) });
            }
            saw_header = true;
            continue;
        }
        if rec.len() != 4 {
            return Err(Error::Parse { line, message: format!("expected 4 fields, found {}", rec.len()) });
        }
        let mut vals = [0.0; 4];
        for (k, cell) in rec.iter().enumerate() {
            vals[k] = cell.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                line,
                message: format!("column `{}` is not a finite number: `{cell}`", CSV_HEADER[k]),
            })?;
        }
        inputs.push(ParamVector::new(vals[0], vals[1], vals[2]));
        labels.push(vals[3]);
    }
    if !saw_header {
        return Err(Error::Parse { line: 1, message: "file is empty".into() });
    }
    Ok((inputs, labels))
}

pub fn load(path: &Path) -> Result<Dataset> {
    let meta_text = std::fs::read_to_string(meta_path(path))?;
    let meta: DatasetMeta = serde_json::from_str(&meta_text)?;
    let (inputs, labels) = parse_csv(&std::fs::read(path)?)?;
    let ds = Dataset { inputs, labels, meta };
    ds.check()?;
    Ok(ds)
}
