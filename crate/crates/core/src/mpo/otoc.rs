//! OTOCs and target functions from TEBD-evolved MPOs.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::contract::{trace_product4, TraceMethod};
use super::tebd::tebd_evolve;
use super::trotter::{make_trotter_plan, TrotterPlan, DEFAULT_DT};
use super::{pauli_mpo, Mpo, TruncationPolicy};
use crate::error::{Error, Result};
use crate::exact_sim::{pauli_dense, DenseOperator, OtocValue, Sign, Target, IMAG_TOL};
use crate::hamiltonians::{Family, ParamVector};
use crate::pauli::{Pauli, ALL_PAULIS};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpoOptions {
    pub policy: TruncationPolicy,
    pub dt: f64,
    /// Evolve each operator for half the time in opposite directions.
    pub time_splitting: bool,
    pub trace: TraceMethod,
}

impl MpoOptions {
    pub fn new(policy: TruncationPolicy) -> Self {
        MpoOptions { policy, dt: DEFAULT_DT, time_splitting: true, trace: TraceMethod::Auto }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_time_splitting(mut self, on: bool) -> Self {
        self.time_splitting = on;
        self
    }
}

/// A value computed by the MPO engine with its truncation diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpoRun {
    pub value: f64,
    /// Sum of the relative weights discarded over every evolution used.
    pub discarded_weight: f64,
    pub max_bond: usize,
}

fn real_part(tr: C64) -> Result<f64> {
    if !(tr.im.abs() < IMAG_TOL) {
        return Err(Error::InternalConsistency(format!("OTOC trace has imaginary part {:e}", tr.im)));
    }
    Ok(tr.re)
}

/// Evolution plans for `W` and `V`; `None` for `V` means it stays put.
fn plans(family: Family, x: ParamVector, n: usize, opts: &MpoOptions) -> Result<(TrotterPlan, Option<TrotterPlan>)> {
    let full = make_trotter_plan(family, x, n, opts.dt)?;
    if opts.time_splitting {
        let half = full.with_total_time(full.total_time / 2.0);
        Ok((half.clone(), Some(half)))
    } else {
        Ok((full, None))
    }
}

struct Evolver {
    w_plan: TrotterPlan,
    v_plan: Option<TrotterPlan>,
    sign: Sign,
    policy: TruncationPolicy,
}

impl Evolver {
    fn w(&self, letter: Pauli, site: usize) -> Result<Mpo> {
        tebd_evolve(pauli_mpo(letter, site, self.w_plan.n)?, &self.w_plan, self.sign, &self.policy)
    }

    fn v(&self, letter: Pauli, site: usize) -> Result<Mpo> {
        let op = pauli_mpo(letter, site, self.w_plan.n)?;
        match &self.v_plan {
            Some(plan) => tebd_evolve(op, plan, self.sign.flip(), &self.policy),
            None => Ok(op),
        }
    }
}

fn check_sites(n: usize, sites: &[usize]) -> Result<()> {
    if sites.iter().any(|&s| s >= n) {
        return Err(Error::invalid("operator site out of range"));
    }
    Ok(())
}

/// `(1/2ⁿ) Tr(V W' V W')` with `W' = e^{i·sign·H(x)} W e^{-i·sign·H(x)}`
/// evolved by TEBD.
#[allow(clippy::too_many_arguments)]
pub fn otoc_mpo(
    family: Family,
    x: ParamVector,
    n: usize,
    v: Pauli,
    v_site: usize,
    w: Pauli,
    w_site: usize,
    sign: Sign,
    opts: &MpoOptions,
) -> Result<OtocValue> {
    check_sites(n, &[v_site, w_site])?;
    let (w_plan, v_plan) = plans(family, x, n, opts)?;
    let ev = Evolver { w_plan, v_plan, sign, policy: opts.policy };
    let wm = ev.w(w, w_site)?;
    let vm = ev.v(v, v_site)?;
    Ok(OtocValue::from_f(real_part(trace_product4(&vm, &wm, &vm, &wm, opts.trace)?)?))
}

pub fn target_mpo(target: Target, family: Family, x: ParamVector, n: usize, opts: &MpoOptions) -> Result<MpoRun> {
    let (w_plan, v_plan) = plans(family, x, n, opts)?;
    let ev = Evolver { w_plan, v_plan, sign: target.sign(), policy: opts.policy };
    let mut ws: Vec<(Pauli, Mpo)> = Vec::new();
    let mut vs: Vec<(Pauli, Mpo)> = Vec::new();
    for &p in &ALL_PAULIS {
        if target.pairs().iter().any(|&(_, w)| w == p) {
            ws.push((p, ev.w(p, 0)?));
        }
        if target.pairs().iter().any(|&(v, _)| v == p) {
            vs.push((p, ev.v(p, n - 1)?));
        }
    }
    let find = |list: &[(Pauli, Mpo)], p: Pauli| list.iter().position(|(q, _)| *q == p).expect("evolved");
    let mut value = 0.0;
    for (v, w) in target.pairs() {
        let vm = &vs[find(&vs, v)].1;
        let wm = &ws[find(&ws, w)].1;
        value += real_part(trace_product4(vm, wm, vm, wm, opts.trace)?)?;
    }
    let all = ws.iter().chain(vs.iter()).map(|(_, m)| m);
    Ok(MpoRun {
        value,
        discarded_weight: all.clone().map(|m| m.discarded_weight).sum(),
        max_bond: all.map(|m| m.max_bond()).max().unwrap_or(1),
    })
}

/// Dense OTOC under exactly the Trotter propagator the MPO path applies,
/// including the time-splitting choice.
#[allow(clippy::too_many_arguments)]
pub fn otoc_dense_trotter(
    family: Family,
    x: ParamVector,
    n: usize,
    v: Pauli,
    v_site: usize,
    w: Pauli,
    w_site: usize,
    sign: Sign,
    dt: f64,
    time_splitting: bool,
) -> Result<OtocValue> {
    check_sites(n, &[v_site, w_site])?;
    let opts = MpoOptions::new(TruncationPolicy::untruncated(n)).with_dt(dt).with_time_splitting(time_splitting);
    let (w_plan, v_plan) = plans(family, x, n, &opts)?;
    let s = w_plan.dense_propagator()?;
    let wm = conjugate(&s, &pauli_dense(w, w_site, n)?, sign);
    let vm = match v_plan {
        Some(_) => conjugate(&s, &pauli_dense(v, v_site, n)?, sign.flip()),
        None => pauli_dense(v, v_site, n)?,
    };
    let m = vm.matrix.dot(&wm.matrix);
    let tr = crate::exact_sim::trace_of_square(&m) / (1u64 << n) as f64;
    Ok(OtocValue::from_f(real_part(tr)?))
}

/// Target value under the dense Trotter propagator (time splitting on).
pub fn target_dense_trotter(target: Target, family: Family, x: ParamVector, n: usize, dt: f64) -> Result<f64> {
    let mut total = 0.0;
    for (v, w) in target.pairs() {
        total += otoc_dense_trotter(family, x, n, v, n - 1, w, 0, target.sign(), dt, true)?.f;
    }
    Ok(total)
}

/// `Plus`: `S† O S`; `Minus`: `S O S†`.
fn conjugate(s: &Array2<C64>, o: &DenseOperator, sign: Sign) -> DenseOperator {
    let s_dag = s.t().mapv(|v| v.conj());
    let matrix = match sign {
        Sign::Plus => s_dag.dot(&o.matrix).dot(s),
        Sign::Minus => s.dot(&o.matrix).dot(&s_dag),
    };
    DenseOperator { n: o.n, matrix }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiRow {
    pub chi: usize,
    pub value: f64,
    pub discarded_weight: f64,
}

/// Recomputes the target at each bond dimension in `chis`.
pub fn chi_sweep(
    family: Family,
    x: ParamVector,
    n: usize,
    target: Target,
    chis: &[usize],
    opts: &MpoOptions,
) -> Result<Vec<ChiRow>> {
    if chis.is_empty() {
        return Err(Error::invalid("chi list is empty"));
    }
    if chis.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("chi list must be strictly ascending"));
    }
    chis.iter()
        .map(|&chi| {
            let o = MpoOptions { policy: TruncationPolicy::new(chi, opts.policy.svd_cutoff)?, ..*opts };
            let run = target_mpo(target, family, x, n, &o)?;
            Ok(ChiRow { chi, value: run.value, discarded_weight: run.discarded_weight })
        })
        .collect()
}

/// `|value(χ_{i+1}) - value(χ_i)|` for consecutive rows.
pub fn successive_differences(rows: &[ChiRow]) -> Vec<f64> {
    rows.windows(2).map(|w| (w[1].value - w[0].value).abs()).collect()
}

pub fn write_chi_sweep_csv<W: Write>(rows: &[ChiRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["chi", "value", "discarded_weight"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([r.chi.to_string(), r.value.to_string(), r.discarded_weight.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_chi_sweep_file(rows: &[ChiRow], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_chi_sweep_csv(rows, &mut buf)?;
    crate::datasets::write_atomic(path, &buf)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
