//! Matrix-product-operator engine for Heisenberg-picture TEBD.
//!
//! Operators are stored in the local Pauli basis {I, X, Y, Z}: site tensor
//! `A[l, p, r]` carries the coefficient of `P_p` on that site, so
//! `O = Σ A₀[p₀]⋯A_{n-1}[p_{n-1}] P_{p₀}⊗⋯⊗P_{p_{n-1}}`. Unitary conjugation
//! maps Hermitian operators to Hermitian operators, so every coefficient is
//! real and all tensor algebra runs in `f64`. In this basis the normalised
//! Hilbert–Schmidt product `(1/2ⁿ)Tr(A†B)` is the Euclidean product of the
//! coefficient vectors, and the network is kept in mixed-canonical form
//! around `center`.

pub mod contract;
pub mod otoc;
pub mod tebd;
pub mod trotter;

use ndarray::{s, Array2, Array3, Array4, Axis};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_sim::DenseOperator;
use crate::pauli::{basis_matrix, Pauli};

pub use contract::{trace_product4, TraceMethod};
pub use otoc::{
    chi_sweep, otoc_dense_trotter, otoc_mpo, successive_differences, target_dense_trotter, target_mpo,
    write_chi_sweep_csv, write_chi_sweep_file, ChiRow, MpoOptions, MpoRun,
};
pub use tebd::tebd_evolve;
pub use trotter::{make_trotter_plan, LocalTerm, TrotterPlan, DEFAULT_DT};

pub const DEFAULT_SVD_CUTOFF: f64 = 1e-12;

/// Cutoff that only drops singular values at roundoff level
/// (`σ/‖σ‖ < 10⁻¹²`).
pub const ROUNDOFF_SVD_CUTOFF: f64 = 1e-24;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub chi_max: usize,
    /// Singular values whose squared weight relative to the total falls
    /// below this are dropped.
    pub svd_cutoff: f64,
}

impl TruncationPolicy {
    pub fn new(chi_max: usize, svd_cutoff: f64) -> Result<Self> {
        if chi_max == 0 {
            return Err(Error::invalid("chi_max must be at least 1"));
        }
        if !(svd_cutoff >= 0.0) {
            return Err(Error::invalid("svd_cutoff must be non-negative"));
        }
        Ok(TruncationPolicy { chi_max, svd_cutoff })
    }

    pub fn with_chi(chi_max: usize) -> Result<Self> {
        Self::new(chi_max, DEFAULT_SVD_CUTOFF)
    }

    /// Bond dimension `2ⁿ` bounds every bond of an `n`-site operator; with
    /// the roundoff cutoff nothing of numerical significance is dropped.
    pub fn untruncated(n: usize) -> Self {
        TruncationPolicy { chi_max: 1usize << n.min(40), svd_cutoff: ROUNDOFF_SVD_CUTOFF }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mpo {
    n: usize,
    tensors: Vec<Array3<f64>>,
    center: usize,
    /// Accumulated relative squared weight dropped by truncations.
    pub discarded_weight: f64,
}

impl Mpo {
    fn product(n: usize, locals: impl Fn(usize) -> usize) -> Mpo {
        let tensors = (0..n)
            .map(|i| {
                let mut t = Array3::zeros((1, 4, 1));
                t[[0, locals(i), 0]] = 1.0;
                t
            })
            .collect();
        Mpo { n, tensors, center: 0, discarded_weight: 0.0 }
    }

    pub fn identity(n: usize) -> Result<Mpo> {
        if n == 0 {
            return Err(Error::invalid("an MPO needs at least one site"));
        }
        Ok(Mpo::product(n, |_| 0))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn tensors(&self) -> &[Array3<f64>] {
        &self.tensors
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut Vec<Array3<f64>> {
        &mut self.tensors
    }

    pub(crate) fn set_center(&mut self, c: usize) {
        self.center = c;
    }

    /// Bond dimensions including the two boundary bonds.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.tensors[0].dim().0];
        dims.extend(self.tensors.iter().map(|t| t.dim().2));
        dims
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Site tensor indexed `[left, physical out, physical in, right]`.
    pub fn site_tensor(&self, i: usize) -> Array4<C64> {
        let a = &self.tensors[i];
        let (l, _, r) = a.dim();
        let paulis: Vec<Array2<C64>> = (0..4).map(basis_matrix).collect();
        let mut out = Array4::zeros((l, 2, 2, r));
        for ((li, p, ri), &c) in a.indexed_iter() {
            if c == 0.0 {
                continue;
            }
            for so in 0..2 {
                for si in 0..2 {
                    out[[li, so, si, ri]] += paulis[p][[so, si]] * c;
                }
            }
        }
        out
    }

    /// `(1/2ⁿ) Tr(O†O)`.
    pub fn norm_sq(&self) -> f64 {
        let mut env = Array2::<f64>::eye(1);
        for a in &self.tensors {
            let (l, d, r) = a.dim();
            // env'[r, r'] = Σ A[l,p,r] env[l,l'] A[l',p,r']
            let mat = a.view().into_shape_with_order((l, d * r)).expect("contiguous");
            let tmp = env.dot(&mat); // (l, d*r)
            let tmp = tmp.into_shape_with_order((l, d, r)).expect("shape");
            let mut next = Array2::zeros((r, r));
            for p in 0..d {
                let ap = a.index_axis(Axis(1), p);
                let tp = tmp.index_axis(Axis(1), p);
                next = next + ap.t().dot(&tp);
            }
            env = next;
        }
        env[[0, 0]]
    }

    /// Dense 2ⁿ×2ⁿ matrix, site 0 most significant.
    pub fn to_dense(&self) -> DenseOperator {
        // Row `r` of `blocks` is the flattened operator on the sites absorbed
        // so far, conditioned on right bond index `r`.
        let mut re = Array2::<f64>::ones((1, 1));
        let mut im = Array2::<f64>::zeros((1, 1));
        let mut dim = 1usize;
        let paulis: Vec<Array2<C64>> = (0..4).map(basis_matrix).collect();
        for a in &self.tensors {
            let (l, d, r) = a.dim();
            let nd = 2 * dim;
            let mut kre = Array2::<f64>::zeros((l * d, nd * nd));
            let mut kim = Array2::<f64>::zeros((l * d, nd * nd));
            for li in 0..l {
                let blk = Array2::from_shape_fn((dim, dim), |(i, j)| {
                    C64::new(re[[li, i * dim + j]], im[[li, i * dim + j]])
                });
                for (p, pm) in paulis.iter().enumerate().take(d) {
                    let k = crate::pauli::kron(&blk, pm);
                    for (c, v) in k.iter().enumerate() {
                        kre[[li * d + p, c]] = v.re;
                        kim[[li * d + p, c]] = v.im;
                    }
                }
            }
            let at = a.view().into_shape_with_order((l * d, r)).expect("contiguous");
            re = at.t().dot(&kre);
            im = at.t().dot(&kim);
            dim = nd;
        }
        let matrix = Array2::from_shape_fn((dim, dim), |(i, j)| C64::new(re[[0, i * dim + j]], im[[0, i * dim + j]]));
        DenseOperator { n: self.n, matrix }
    }

    /// Coefficient of a Pauli string given as basis indices per site.
    pub fn coefficient(&self, string: &[usize]) -> f64 {
        let mut v = Array2::<f64>::eye(1);
        for (a, &p) in self.tensors.iter().zip(string) {
            v = v.dot(&a.slice(s![.., p, ..]));
        }
        v[[0, 0]]
    }
}

/// Single-site Pauli tensored with identities; every bond has dimension 1.
pub fn pauli_mpo(letter: Pauli, site: usize, n: usize) -> Result<Mpo> {
    if site >= n {
        return Err(Error::invalid(format!("site {site} out of range for {n} sites")));
    }
    Ok(Mpo::product(n, |i| if i == site { letter.basis_index() } else { 0 }))
}
