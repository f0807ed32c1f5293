use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use otocml::datasets::{self, GenerateConfig, SplitSpec};
use otocml::kernels::KernelSpec;
use otocml::mpo::{chi_sweep, successive_differences, write_chi_sweep_file, MpoOptions, TruncationPolicy};
use otocml::parallel::{with_workers, worker_count, Execution};
use otocml::regression::{self, CvReport, HyperGrid, TrainedModel};
use otocml::{Error, Result};

use crate::manifest::{self, Manifest, Timestamps};
use crate::{Cli, Command, GridArgs, KernelArgs};

const EXEC: Execution = Execution::Parallel;

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub fn run(cli: &Cli) -> Result<()> {
    let started = manifest::now();
    let body = || -> Result<(Vec<PathBuf>, usize)> { Ok((dispatch(&cli.command)?, worker_count())) };
    let (outputs, workers) = match cli.workers {
        Some(0) => return Err(invalid("--workers must be at least 1")),
        Some(k) => with_workers(k, body)?,
        None => body()?,
    };
    let path = match (&cli.manifest, outputs.first()) {
        (Some(p), _) => p.clone(),
        (None, Some(primary)) => manifest::default_path(primary),
        (None, None) => return Ok(()),
    };
    let config = serde_json::to_value(cli)?;
    let command = config["command"].as_object().and_then(|o| o.keys().next().cloned()).unwrap_or_default();
    Manifest {
        tool: "otocml",
        version: env!("CARGO_PKG_VERSION"),
        command,
        workers,
        config,
        outputs,
        timestamps: Timestamps { started_unix: started, finished_unix: manifest::now() },
    }
    .write(&path)
}

/// Runs the command and returns the files it wrote, primary output first.
fn dispatch(cmd: &Command) -> Result<Vec<PathBuf>> {
    match cmd {
        Command::Gen(a) => {
            let cfg = GenerateConfig {
                family: a.family,
                target: a.target,
                n: a.n,
                count: a.count,
                engine: a.engine,
                seed: a.seed,
                chi: a.chi,
                dt: a.dt,
                svd_cutoff: a.svd_cutoff,
            };
            let ds = datasets::generate_with(&cfg, EXEC)?;
            datasets::save(&ds, &a.out)?;
            println!("wrote {} rows to {}", ds.len(), a.out.display());
            Ok(vec![a.out.clone(), datasets::meta_path(&a.out)])
        }
        Command::Split(a) => {
            let ds = datasets::load(&a.data)?;
            let (train, test) = datasets::split(&ds, &SplitSpec { train_fraction: a.train_fraction, seed: a.seed })?;
            datasets::save(&train, &a.train_out)?;
            datasets::save(&test, &a.test_out)?;
            println!("train {} rows, test {} rows", train.len(), test.len());
            Ok(vec![a.train_out.clone(), a.test_out.clone()])
        }
        Command::Cv(a) => {
            let ds = datasets::load(&a.data)?;
            let grid = resolve_grid(&a.grid);
            let report = regression::cross_validate_with(&ds.inputs, &ds.labels, a.kernel, &grid, a.folds, a.seed, EXEC)?;
            let doc = json!({ "data": a.data, "grid": grid, "report": report });
            emit_json(&doc, a.out.as_deref())
        }
        Command::Train(a) => {
            let ds = datasets::load(&a.data)?;
            let (spec, lambda) = resolve_kernel(&a.kernel)?;
            let mut model = regression::fit_with(&ds.inputs, &ds.labels, &spec, lambda, EXEC)?;
            model.provenance.insert("data".into(), json!(a.data));
            model.provenance.insert("dataset".into(), serde_json::to_value(&ds.meta)?);
            if let Some(cv) = &a.kernel.from_cv {
                model.provenance.insert("cv_report".into(), json!(cv));
            }
            model.save(&a.out)?;
            println!("trained {spec} with lambda={lambda} on {} rows", ds.len());
            Ok(vec![a.out.clone()])
        }
        Command::Eval(a) => {
            let model = TrainedModel::load(&a.model)?;
            let ds = datasets::load(&a.data)?;
            let m = regression::evaluate_with(&model, &ds.inputs, &ds.labels, EXEC)?;
            match m.r2 {
                Some(r2) => eprintln!("R2 {r2}  RMSE {}  MAE {}", m.rmse, m.mae),
                None => eprintln!("R2 undefined (constant labels)  RMSE {}  MAE {}", m.rmse, m.mae),
            }
            emit_json(&json!({ "model": a.model, "data": a.data, "rows": ds.len(), "metrics": m }), a.out.as_deref())
        }
        Command::Predict(a) => {
            let model = TrainedModel::load(&a.model)?;
            let inputs = match (&a.data, &a.x) {
                (Some(p), _) => datasets::load(p)?.inputs,
                (None, Some(x)) => vec![*x],
                (None, None) => return Err(invalid("either --data or --x is required")),
            };
            let preds = regression::predict_many(&model, &inputs, EXEC)?;
            let mut text = String::from("x1,x2,x3,prediction\n");
            for (x, p) in inputs.iter().zip(&preds) {
                text.push_str(&format!("{:?},{:?},{:?},{:?}\n", x.0[0], x.0[1], x.0[2], p));
            }
            emit_text(&text, a.out.as_deref())
        }
        Command::LearningCurve(a) => {
            let train = datasets::load(&a.train)?;
            let test = datasets::load(&a.test)?;
            let (spec, lambda) = resolve_kernel(&a.kernel)?;
            let sizes = a.sizes.clone().unwrap_or_else(|| (1..=20).map(|m| 50 * m).collect());
            let rows = regression::learning_curve_with(
                (&train.inputs, &train.labels),
                (&test.inputs, &test.labels),
                &spec,
                lambda,
                &sizes,
                a.repeats,
                a.seed,
                EXEC,
            )?;
            let mut text = String::from("m,mean_r2,std_r2,repeats\n");
            for r in &rows {
                text.push_str(&format!("{},{:?},{:?},{}\n", r.m, r.mean_r2, r.std_r2, r.repeats));
            }
            datasets::write_atomic(&a.out, text.as_bytes())?;
            println!("wrote {} rows to {}", rows.len(), a.out.display());
            Ok(vec![a.out.clone()])
        }
        Command::ChiSweep(a) => {
            let x = a.x;
            let first = *a.chi_list.first().ok_or_else(|| invalid("--chi-list is empty"))?;
            let opts = MpoOptions::new(TruncationPolicy::new(first, a.svd_cutoff)?)
                .with_dt(a.dt)
                .with_time_splitting(!a.no_time_splitting);
            let rows = chi_sweep(a.family, x, a.n, a.target, &a.chi_list, &opts)?;
            write_chi_sweep_file(&rows, &a.out)?;
            for (w, d) in rows.windows(2).zip(successive_differences(&rows)) {
                println!("chi {} -> {}: |delta| = {d:e}", w[0].chi, w[1].chi);
            }
            Ok(vec![a.out.clone()])
        }
    }
}

fn resolve_grid(g: &GridArgs) -> HyperGrid {
    let d = HyperGrid::default();
    HyperGrid {
        lambdas: g.lambdas.clone().unwrap_or(d.lambdas),
        gammas: g.gammas.clone().unwrap_or(d.gammas),
        c0s: g.c0s.clone().unwrap_or(d.c0s),
        degrees: g.degrees.clone().unwrap_or(d.degrees),
    }
}

fn resolve_kernel(k: &KernelArgs) -> Result<(KernelSpec, f64)> {
    if let Some(path) = &k.from_cv {
        let doc: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let report: CvReport = serde_json::from_value(doc.get("report").cloned().unwrap_or(doc))?;
        return Ok((report.best_kernel, report.best_lambda));
    }
    let kind = k.kernel.ok_or_else(|| invalid("either --kernel or --from-cv is required"))?;
    Ok((KernelSpec::new(kind, k.gamma, k.c0, k.degree)?, k.lambda))
}

fn emit_text(text: &str, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    match out {
        Some(p) => {
            datasets::write_atomic(p, text.as_bytes())?;
            Ok(vec![p.to_path_buf()])
        }
        None => {
            print!("{text}");
            Ok(Vec::new())
        }
    }
}

fn emit_json(doc: &Value, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    emit_text(&text, out)
}
