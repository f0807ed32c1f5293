//! Heisenberg-picture TEBD on Pauli-basis MPOs.
//!
//! A gate `G` on `s` sites acts on the `4^s` local Pauli coefficients as the
//! real orthogonal matrix `R[a', a] = 2^{-s} Re Tr(P_{a'} G† P_a G)`, the
//! representation of `O ↦ G† O G`. The reverse conjugation `O ↦ G O G†` is
//! `Rᵀ`.
//!
//! In lossless mode (roundoff cutoff, `chi_max` at least the full rank) a
//! bond that is already at its maximal dimension is re-split by QR instead
//! of SVD: nothing would be truncated there and QR is several times cheaper.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use ndarray::{Array2, Array3, Axis};
use ndarray_linalg::{JobSvd, QR, SVD, SVDDC};
use num_complex::Complex64 as C64;

use super::trotter::TrotterPlan;
use super::{Mpo, TruncationPolicy, ROUNDOFF_SVD_CUTOFF};
use crate::error::{Error, Result};
use crate::exact_sim::Sign;
use crate::pauli::{basis_matrix, kron};

/// Pauli-basis matrix of `O ↦ U† O U` for a `2^s`-dimensional unitary.
pub fn superoperator(u: &Array2<C64>) -> Array2<f64> {
    let dim = u.nrows();
    let s = dim.trailing_zeros() as usize;
    let paulis = pauli_strings(s);
    let d = paulis.len();
    let u_dag = u.t().mapv(|v| v.conj());
    // pt[a', (i, j)] = P_{a'}[j, i], mv[(i, j), a] = (U† P_a U)[i, j]
    let mut pt = Array2::<C64>::zeros((d, dim * dim));
    let mut mv = Array2::<C64>::zeros((dim * dim, d));
    for (a, p) in paulis.iter().enumerate() {
        let m = u_dag.dot(p).dot(u);
        for i in 0..dim {
            for j in 0..dim {
                pt[[a, i * dim + j]] = p[[j, i]];
                mv[[i * dim + j, a]] = m[[i, j]];
            }
        }
    }
    pt.dot(&mv).mapv(|v| v.re / dim as f64)
}

/// All `4^s` Pauli strings on `s` sites, first site most significant.
fn pauli_strings(s: usize) -> Vec<Array2<C64>> {
    let mut out = vec![Array2::from_elem((1, 1), C64::new(1.0, 0.0))];
    for _ in 0..s {
        out = out.iter().flat_map(|m| (0..4).map(move |p| kron(m, &basis_matrix(p)))).collect();
    }
    out
}

fn numerical(what: &str) -> Error {
    Error::Numerical(format!("non-finite values in {what}"))
}

fn reshape2(a: Array3<f64>, rows: usize, cols: usize) -> Array2<f64> {
    let a = if a.is_standard_layout() { a } else { a.as_standard_layout().to_owned() };
    a.into_shape_with_order((rows, cols)).expect("contiguous reshape")
}

fn reshape3(a: Array2<f64>, d0: usize, d1: usize, d2: usize) -> Array3<f64> {
    let a = if a.is_standard_layout() { a } else { a.as_standard_layout().to_owned() };
    a.into_shape_with_order((d0, d1, d2)).expect("contiguous reshape")
}

fn svd(m: &Array2<f64>) -> Result<(Array2<f64>, Vec<f64>, Array2<f64>)> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(numerical("SVD input"));
    }
    match m.svddc(JobSvd::Some) {
        Ok((Some(u), s, Some(vt))) => Ok((u, s.to_vec(), vt)),
        _ => {
            let (u, s, vt) = m.svd(true, true)?;
            let k = s.len();
            let u = u.expect("requested U");
            let vt = vt.expect("requested Vt");
            Ok((
                u.slice(ndarray::s![.., ..k]).to_owned(),
                s.to_vec(),
                vt.slice(ndarray::s![..k, ..]).to_owned(),
            ))
        }
    }
}

/// Exact split `m = Q R` with `Q` an isometry; used on saturated bonds in
/// lossless mode, where no singular value could be dropped anyway.
fn split_qr(m: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(numerical("QR input"));
    }
    Ok(m.qr()?)
}

/// Number of singular values to keep and the relative weight discarded.
pub(crate) fn truncation_rank(sigma: &[f64], policy: &TruncationPolicy) -> (usize, f64) {
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    if total == 0.0 || sigma.is_empty() {
        return (sigma.len().min(1), 0.0);
    }
    let threshold = policy.svd_cutoff * total;
    let mut keep = sigma.iter().take(policy.chi_max).take_while(|s| *s * *s >= threshold).count();
    keep = keep.max(1);
    let dropped: f64 = sigma[keep..].iter().map(|s| s * s).sum();
    (keep, dropped / total)
}

impl Mpo {
    fn move_center_right(&mut self) -> Result<()> {
        let i = self.center();
        let t = &mut self.tensors_mut();
        let (l, d, r) = t[i].dim();
        let (q, rr) = reshape2(t[i].clone(), l * d, r).qr()?;
        let k = q.ncols();
        t[i] = reshape3(q, l, d, k);
        let (_, d2, r2) = t[i + 1].dim();
        let next = rr.dot(&reshape2(t[i + 1].clone(), r, d2 * r2));
        t[i + 1] = reshape3(next, k, d2, r2);
        self.set_center(i + 1);
        Ok(())
    }

    fn move_center_left(&mut self) -> Result<()> {
        let i = self.center();
        let t = &mut self.tensors_mut();
        let (l, d, r) = t[i].dim();
        let m = reshape2(t[i].clone(), l, d * r);
        let (q, rr) = m.t().to_owned().qr()?;
        let k = q.ncols();
        t[i] = reshape3(q.t().to_owned(), k, d, r);
        let (l0, d0, _) = t[i - 1].dim();
        let prev = reshape2(t[i - 1].clone(), l0 * d0, l).dot(&rr.t());
        t[i - 1] = reshape3(prev, l0, d0, k);
        self.set_center(i - 1);
        Ok(())
    }

    /// Moves the orthogonality center into `lo..=hi`.
    pub(crate) fn focus(&mut self, lo: usize, hi: usize) -> Result<()> {
        while self.center() < lo {
            self.move_center_right()?;
        }
        while self.center() > hi {
            self.move_center_left()?;
        }
        Ok(())
    }

    /// Applies a local Pauli-basis map to sites `start..start+span` and
    /// re-splits with truncation. The center ends on the last site of the
    /// block when `rightward`, otherwise on the first.
    pub(crate) fn apply_local(
        &mut self,
        start: usize,
        span: usize,
        map: &Array2<f64>,
        policy: &TruncationPolicy,
        rightward: bool,
    ) -> Result<()> {
        self.focus(start, start + span - 1)?;
        let tensors = self.tensors_mut();
        let old_bonds: Vec<usize> = (start..start + span - 1).map(|i| tensors[i].dim().2).collect();
        let lossless = policy.svd_cutoff <= ROUNDOFF_SVD_CUTOFF;
        // theta (l, 4^span, r)
        let (l, _, _) = tensors[start].dim();
        let mut theta = tensors[start].clone();
        for t in &tensors[start + 1..start + span] {
            let (_, dl, k) = theta.dim();
            let (_, d, r) = t.dim();
            let m = reshape2(theta, l * dl, k).dot(&reshape2(t.clone(), k, d * r));
            theta = reshape3(m, l, dl * d, r);
        }
        let (_, dd, r) = theta.dim();
        let swapped = reshape2(theta.permuted_axes([1, 0, 2]).as_standard_layout().to_owned(), dd, l * r);
        let applied = reshape3(map.dot(&swapped), dd, l, r);
        let theta = applied.permuted_axes([1, 0, 2]).as_standard_layout().to_owned();
        if !theta.iter().all(|v| v.is_finite()) {
            return Err(numerical("gate application"));
        }

        let mut discarded = 0.0;
        if rightward {
            let mut rest = theta;
            let mut left = l;
            for site in start..start + span - 1 {
                let (_, drest, _) = rest.dim();
                let m = reshape2(rest, left * 4, (drest / 4) * r);
                let full = m.nrows().min(m.ncols());
                let (q, remainder) = if lossless && policy.chi_max >= full && old_bonds[site - start] == full {
                    split_qr(&m)?
                } else {
                    let (u, sig, vt) = svd(&m)?;
                    let (k, w) = truncation_rank(&sig, policy);
                    discarded += w;
                    let mut sv = vt.slice(ndarray::s![..k, ..]).to_owned();
                    for (mut row, s) in sv.axis_iter_mut(Axis(0)).zip(&sig) {
                        row *= *s;
                    }
                    (u.slice(ndarray::s![.., ..k]).to_owned(), sv)
                };
                let k = q.ncols();
                tensors[site] = reshape3(q, left, 4, k);
                rest = reshape3(remainder, k, drest / 4, r);
                left = k;
            }
            tensors[start + span - 1] = rest;
            self.set_center(start + span - 1);
        } else {
            let mut rest = theta;
            let mut right = r;
            for site in (start + 1..start + span).rev() {
                let (_, drest, _) = rest.dim();
                let m = reshape2(rest, l * (drest / 4), 4 * right);
                let full = m.nrows().min(m.ncols());
                let (remainder, q) = if lossless && policy.chi_max >= full && old_bonds[site - 1 - start] == full {
                    let (q, r) = split_qr(&m.t().to_owned())?;
                    (r.reversed_axes(), q.reversed_axes())
                } else {
                    let (u, sig, vt) = svd(&m)?;
                    let (k, w) = truncation_rank(&sig, policy);
                    discarded += w;
                    let mut us = u.slice(ndarray::s![.., ..k]).to_owned();
                    for (mut col, s) in us.axis_iter_mut(Axis(1)).zip(&sig) {
                        col *= *s;
                    }
                    (us, vt.slice(ndarray::s![..k, ..]).to_owned())
                };
                let k = q.nrows();
                tensors[site] = reshape3(q, k, 4, right);
                rest = reshape3(remainder, l, drest / 4, k);
                right = k;
            }
            tensors[start] = rest;
            self.set_center(start);
        }
        self.discarded_weight += discarded;
        Ok(())
    }
}

/// Evolves `op` through the Trotter plan: `Plus` gives `S† O S` and `Minus`
/// gives `S O S†`, where `S` is the Schrödinger-picture Trotter propagator.
pub fn tebd_evolve(mut op: Mpo, plan: &TrotterPlan, sign: Sign, policy: &TruncationPolicy) -> Result<Mpo> {
    if op.n() != plan.n {
        return Err(Error::invalid(format!(
            "plan is for {} sites but the operator has {}",
            plan.n,
            op.n()
        )));
    }
    let mut schedule = plan.schedule();
    if sign == Sign::Plus {
        schedule.reverse();
    }
    let mut cache: HashMap<(usize, u64), Vec<Array2<f64>>> = HashMap::new();
    for (layer, tau) in schedule {
        let gates = &plan.layers[layer];
        if let Entry::Vacant(slot) = cache.entry((layer, tau.to_bits())) {
            let maps = gates
                .iter()
                .map(|g| {
                    let r = superoperator(&g.unitary(tau)?);
                    Ok(match sign {
                        Sign::Plus => r,
                        Sign::Minus => r.reversed_axes().as_standard_layout().to_owned(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            slot.insert(maps);
        }
        let maps = &cache[&(layer, tau.to_bits())];
        let first = gates.first().map_or(0, |g| g.start);
        let last = gates.last().map_or(0, |g| g.start + g.span - 1);
        let rightward = 2 * op.center() <= first + last;
        let order: Vec<usize> = if rightward {
            (0..gates.len()).collect()
        } else {
            (0..gates.len()).rev().collect()
        };
        for gi in order {
            let g = &gates[gi];
            op.apply_local(g.start, g.span, &maps[gi], policy, rightward)?;
        }
    }
    if !op.is_finite() {
        return Err(numerical("evolved operator"));
    }
    Ok(op)
}
