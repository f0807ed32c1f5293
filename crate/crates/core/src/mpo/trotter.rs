//! Second-order Trotter schedules built from exactly exponentiated local
//! blocks.
//!
//! The chain is covered by sliding windows of `w` sites, where `w` is the
//! widest term support (at least two): two-site bond blocks for the XYZ and
//! Ising families, three-site blocks for the families with ZXZ or
//! next-nearest terms. Every term is shared equally among the windows that
//! contain it, so a single-site field in the bulk of a two-site cover goes
//! half to each adjacent bond. Windows starting at `j ≡ r (mod w)` are
//! disjoint and form layer `r`, and one step of size τ is the symmetric
//! product `L₀(τ/2)⋯L_{w-2}(τ/2) L_{w-1}(τ) L_{w-2}(τ/2)⋯L₀(τ/2)`.

use ndarray::Array2;
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hamiltonians::{build_terms, split_scaling, Family, ParamVector, Scaling, TermList};
use crate::pauli::{basis_matrix, kron};

pub const DEFAULT_DT: f64 = 0.05;

/// A Hermitian block acting on sites `start..start+span`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalTerm {
    pub start: usize,
    pub span: usize,
    /// `2^span × 2^span`, first site most significant.
    pub h: Array2<C64>,
}

impl LocalTerm {
    /// `exp(-i·h·tau)`.
    pub fn unitary(&self, tau: f64) -> Result<Array2<C64>> {
        let (evals, evecs) = self.h.eigh(UPLO::Upper)?;
        let mut scaled = evecs.clone();
        for (mut col, &e) in scaled.columns_mut().into_iter().zip(evals.iter()) {
            let ph = C64::from_polar(1.0, -e * tau);
            col.mapv_inplace(|v| v * ph);
        }
        Ok(scaled.dot(&evecs.t().mapv(|v| v.conj())))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrotterPlan {
    pub n: usize,
    pub dt: f64,
    pub total_time: f64,
    /// Step sizes; all equal to `dt` except possibly a shorter last one.
    pub steps: Vec<f64>,
    pub layers: Vec<Vec<LocalTerm>>,
}

/// `ceil(total/dt)` steps, the last one shortened to land on `total`.
pub fn step_sizes(total: f64, dt: f64) -> Vec<f64> {
    if total <= 0.0 {
        return Vec::new();
    }
    let ratio = total / dt;
    let full = (ratio + 1e-9).floor();
    let mut steps = vec![dt; full as usize];
    let rem = total - full * dt;
    if rem > 1e-12 * total.max(1.0) {
        steps.push(rem);
    }
    steps
}

impl TrotterPlan {
    pub fn from_terms(terms: &TermList, total_time: f64, dt: f64) -> Result<TrotterPlan> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid("Trotter step must be positive"));
        }
        if !(total_time >= 0.0) || !total_time.is_finite() {
            return Err(Error::invalid("total time must be finite and non-negative"));
        }
        let n = terms.n;
        let mut width = 1;
        for t in &terms.terms {
            width = width.max(t.last_site() - t.first_site() + 1);
        }
        if width > 3 {
            return Err(Error::invalid("terms spanning more than three sites are not supported"));
        }
        let width = if n >= 2 { width.max(2).min(n) } else { 1 };
        let windows = n + 1 - width;
        let dim = 1usize << width;
        let mut blocks: Vec<Array2<C64>> = vec![Array2::zeros((dim, dim)); windows];
        for t in &terms.terms {
            let (first, last) = (t.first_site(), t.last_site());
            // windows [j, j+width) containing the support
            let lo = (last + 1).saturating_sub(width);
            let hi = first.min(windows - 1);
            let share = t.coefficient / (hi + 1 - lo) as f64;
            for (j, block) in blocks.iter_mut().enumerate().take(hi + 1).skip(lo) {
                let mut m = Array2::from_elem((1, 1), C64::new(share, 0.0));
                for site in j..j + width {
                    let p = t.ops.iter().find(|(s, _)| *s == site).map_or(0, |(_, p)| p.basis_index());
                    m = kron(&m, &basis_matrix(p));
                }
                *block += &m;
            }
        }
        let layers: Vec<Vec<LocalTerm>> = (0..width)
            .map(|r| {
                blocks
                    .iter()
                    .enumerate()
                    .filter(|(j, b)| j % width == r && b.iter().any(|v| *v != C64::new(0.0, 0.0)))
                    .map(|(j, b)| LocalTerm { start: j, span: width, h: b.clone() })
                    .collect::<Vec<_>>()
            })
            .filter(|l| !l.is_empty())
            .collect();
        Ok(TrotterPlan { n, dt, total_time, steps: step_sizes(total_time, dt), layers })
    }

    /// Same layers with a different evolution time.
    pub fn with_total_time(&self, total_time: f64) -> TrotterPlan {
        TrotterPlan {
            n: self.n,
            dt: self.dt,
            total_time,
            steps: step_sizes(total_time, self.dt),
            layers: self.layers.clone(),
        }
    }

    /// Layer applications `(layer, duration)` in the order they act on a
    /// state, with adjacent applications of the same layer merged.
    pub fn schedule(&self) -> Vec<(usize, f64)> {
        let m = self.layers.len();
        let mut out: Vec<(usize, f64)> = Vec::new();
        let mut push = |layer: usize, tau: f64| match out.last_mut() {
            Some((l, t)) if *l == layer => *t += tau,
            _ => out.push((layer, tau)),
        };
        for &tau in &self.steps {
            if m == 0 {
                break;
            }
            for l in 0..m - 1 {
                push(l, tau / 2.0);
            }
            push(m - 1, tau);
            for l in (0..m - 1).rev() {
                push(l, tau / 2.0);
            }
        }
        out
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// Dense Schrödinger-picture propagator `S` of the whole schedule, built
    /// from Kronecker-embedded gates. Repeated full steps are raised by
    /// squaring.
    pub fn dense_propagator(&self) -> Result<Array2<C64>> {
        crate::exact_sim::check_cap(self.n, crate::exact_sim::DEFAULT_DENSE_CAP)?;
        let dim = 1usize << self.n;
        let mut s = Array2::<C64>::eye(dim);
        let full = self.steps.iter().filter(|&&t| t == self.dt).count();
        if full > 0 {
            s = matrix_power(&self.dense_step(self.dt)?, full);
        }
        for &tau in self.steps.iter().filter(|&&t| t != self.dt) {
            s = self.dense_step(tau)?.dot(&s);
        }
        Ok(s)
    }

    fn dense_layer(&self, layer: usize, tau: f64) -> Result<Array2<C64>> {
        let dim = 1usize << self.n;
        let mut m = Array2::<C64>::eye(dim);
        for g in &self.layers[layer] {
            let left = Array2::<C64>::eye(1 << g.start);
            let right = Array2::<C64>::eye(1 << (self.n - g.start - g.span));
            m = kron(&kron(&left, &g.unitary(tau)?), &right).dot(&m);
        }
        Ok(m)
    }

    fn dense_step(&self, tau: f64) -> Result<Array2<C64>> {
        let dim = 1usize << self.n;
        let m = self.layers.len();
        let mut s = Array2::<C64>::eye(dim);
        if m == 0 {
            return Ok(s);
        }
        for l in 0..m - 1 {
            s = self.dense_layer(l, tau / 2.0)?.dot(&s);
        }
        s = self.dense_layer(m - 1, tau)?.dot(&s);
        for l in (0..m - 1).rev() {
            s = self.dense_layer(l, tau / 2.0)?.dot(&s);
        }
        Ok(s)
    }
}

fn matrix_power(m: &Array2<C64>, mut k: usize) -> Array2<C64> {
    let mut result = Array2::<C64>::eye(m.nrows());
    let mut base = m.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = base.dot(&result);
        }
        k >>= 1;
        if k > 0 {
            base = base.dot(&base);
        }
    }
    result
}

/// Trotter plan for `H(x̂)` over the evolution time `‖x‖`.
pub fn make_trotter_plan(family: Family, x: ParamVector, n: usize, dt: f64) -> Result<TrotterPlan> {
    let (t, unit) = match split_scaling(x) {
        Scaling::ZeroTime => (0.0, x),
        Scaling::Scaled { t, unit } => (t, unit),
    };
    let terms = build_terms(family, unit, n)?;
    TrotterPlan::from_terms(&terms, t, dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_time_has_no_steps() {
        let p = make_trotter_plan(Family::H1, ParamVector::ZERO, 5, 0.05).unwrap();
        assert!(p.steps.is_empty());
        assert!(p.schedule().is_empty());
    }

    #[test]
    fn partial_last_step() {
        let s = step_sizes(0.125, 0.05);
        assert_eq!(s.len(), 3);
        assert!((s[0] - 0.05).abs() < 1e-15 && (s[1] - 0.05).abs() < 1e-15);
        assert!((s[2] - 0.025).abs() < 1e-12);
        // 0.1/0.05 must not produce a spurious sliver step.
        assert_eq!(step_sizes(0.1, 0.05).len(), 2);
        assert_eq!(step_sizes(0.3, 0.1).len(), 3);
        let total: f64 = step_sizes(3.7, 0.05).iter().sum();
        assert!((total - 3.7).abs() < 1e-12);
    }

    #[test]
    fn gates_are_unitary() {
        let p = make_trotter_plan(Family::H2, ParamVector::new(0.3, -1.2, 0.7), 4, 0.05).unwrap();
        for layer in &p.layers {
            for g in layer {
                let u = g.unitary(0.05).unwrap();
                let prod = u.t().mapv(|v| v.conj()).dot(&u);
                let id = Array2::<C64>::eye(u.nrows());
                let err = (&prod - &id).iter().map(|v| v.norm()).fold(0.0, f64::max);
                assert!(err < 1e-12, "{err}");
            }
        }
    }

    #[test]
    fn layers_have_disjoint_supports_and_cover_terms() {
        for fam in crate::hamiltonians::ALL_FAMILIES {
            let p = make_trotter_plan(fam, ParamVector::new(0.5, 0.2, -0.9), 7, 0.05).unwrap();
            for layer in &p.layers {
                for w in layer.windows(2) {
                    assert!(w[0].start + w[0].span <= w[1].start);
                }
            }
            // Summing every block rebuilds the Hamiltonian trace-norm: compare
            // Frobenius norms of Σ blocks (embedded) with the dense H.
            let terms = build_terms(fam, ParamVector::new(0.5, 0.2, -0.9).scale(1.0 / ParamVector::new(0.5, 0.2, -0.9).norm()), 7).unwrap();
            let h = crate::exact_sim::dense_hamiltonian(&terms).unwrap();
            let mut sum = Array2::<C64>::zeros((128, 128));
            for layer in &p.layers {
                for g in layer {
                    let mut m = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
                    let mut site = 0;
                    while site < 7 {
                        if site == g.start {
                            m = kron(&m, &g.h);
                            site += g.span;
                        } else {
                            m = kron(&m, &basis_matrix(0));
                            site += 1;
                        }
                    }
                    sum += &m;
                }
            }
            let err = (&sum - &h.matrix).iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(err < 1e-12, "{fam}: {err}");
        }
    }

    #[test]
    fn schedule_merges_half_steps() {
        let p = make_trotter_plan(Family::H2, ParamVector::new(0.0, 0.0, 0.15), 4, 0.05).unwrap();
        assert_eq!(p.layers.len(), 2);
        let s = p.schedule();
        // A B A | A B A | A B A  ->  A B A B A B A
        assert_eq!(s.len(), 7);
        assert!((s[0].1 - 0.025).abs() < 1e-15);
        assert!((s[2].1 - 0.05).abs() < 1e-15);
        let total_a: f64 = s.iter().filter(|(l, _)| *l == 0).map(|(_, t)| t).sum();
        assert!((total_a - 0.15).abs() < 1e-12);
    }

    #[test]
    fn layer_counts_follow_term_width() {
        let x = ParamVector::new(0.3, 0.5, 0.7);
        let layers = |f| make_trotter_plan(f, x, 7, 0.05).unwrap().layers;
        assert_eq!(layers(Family::H1).len(), 3);
        assert_eq!(layers(Family::H2).len(), 2);
        assert_eq!(layers(Family::H3).len(), 3);
        assert_eq!(layers(Family::H4).len(), 2);
        assert!(layers(Family::H1).iter().flatten().all(|g| g.span == 3));
        assert_eq!(make_trotter_plan(Family::H4, x, 2, 0.05).unwrap().layers.len(), 1);
    }

    #[test]
    fn bulk_fields_are_shared_between_bonds() {
        // x1·ΣX on four sites: bond (0,1) carries X₀ + X₁/2.
        let p = make_trotter_plan(Family::H4, ParamVector::new(2.0, 0.0, 0.0), 4, 0.05).unwrap();
        let first = &p.layers[0][0];
        assert_eq!((first.start, first.span), (0, 2));
        let expected = kron(&basis_matrix(1), &basis_matrix(0)) + kron(&basis_matrix(0), &basis_matrix(1)).mapv(|v| v * 0.5);
        let err = (&first.h - &expected).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(err < 1e-15);
    }

    #[test]
    fn single_site_chain() {
        let p = make_trotter_plan(Family::H4, ParamVector::new(1.0, 0.5, 0.0), 1, 0.05).unwrap();
        assert_eq!(p.layers.len(), 1);
        assert_eq!(p.layers[0][0].span, 1);
    }

    #[test]
    fn propagator_matches_schedule() {
        let p = make_trotter_plan(Family::H3, ParamVector::new(0.3, 0.2, -0.4), 4, 0.1).unwrap();
        assert_eq!(p.steps.len(), 6);
        // Product of the merged schedule, layer by layer.
        let mut direct = Array2::<C64>::eye(16);
        for (l, tau) in p.schedule() {
            direct = p.dense_layer(l, tau).unwrap().dot(&direct);
        }
        let s = p.dense_propagator().unwrap();
        let err = (&s - &direct).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn invalid_dt() {
        assert!(make_trotter_plan(Family::H2, ParamVector::new(1.0, 0.0, 0.0), 3, 0.0).is_err());
        assert!(make_trotter_plan(Family::H2, ParamVector::new(1.0, 0.0, 0.0), 3, -0.1).is_err());
    }
}
