//! Dense ground-truth engine.
//!
//! Operators are full 2ⁿ×2ⁿ complex matrices. Heisenberg evolution goes
//! through one eigendecomposition of the Hamiltonian, which serves both
//! propagation directions.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Zip};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{build_terms, Family, ParamVector, TermList};
use crate::pauli::{accumulate_string, Pauli, ALL_PAULIS};

pub const DEFAULT_DENSE_CAP: usize = 12;
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Largest tolerated |Im Tr(...)| / 2ⁿ for an OTOC.
pub const IMAG_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    pub n: usize,
    pub matrix: Array2<C64>,
}

impl DenseOperator {
    pub fn identity(n: usize) -> Self {
        DenseOperator { n, matrix: Array2::eye(1 << n) }
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn dagger(&self) -> DenseOperator {
        DenseOperator { n: self.n, matrix: self.matrix.t().mapv(|v| v.conj()) }
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        let m = &self.matrix;
        let mut worst: f64 = 0.0;
        for ((i, j), v) in m.indexed_iter() {
            worst = worst.max((v - m[[j, i]].conj()).norm());
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &DenseOperator) -> f64 {
        let mut worst: f64 = 0.0;
        Zip::from(&self.matrix).and(&other.matrix).for_each(|a, b| worst = worst.max((a - b).norm()));
        worst
    }

    /// `(1/2ⁿ) Tr(self)`.
    pub fn normalized_trace(&self) -> C64 {
        self.matrix.diag().sum() / self.dim() as f64
    }
}

/// Sign of the Heisenberg exponent: `Plus` gives `e^{iH} O e^{-iH}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// OTOC `f` together with its squared-commutator form `c = 1 - f`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtocValue {
    pub f: f64,
    pub c: f64,
}

impl OtocValue {
    pub fn from_f(f: f64) -> Self {
        OtocValue { f, c: 1.0 - f }
    }
}

/// The two learned functions of the couplings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// X on the last site against Z on the first site evolved with `e^{iH}·e^{-iH}`.
    Xz,
    /// Sum of all nine end-to-end OTOCs, first-site operator evolved with `e^{-iH}·e^{iH}`.
    Sum,
}

impl Target {
    /// Closed range every label of this target must lie in.
    pub fn label_range(self) -> (f64, f64) {
        match self {
            Target::Xz => (-1.0, 1.0),
            Target::Sum => (-3.0, 9.0),
        }
    }

    pub fn sign(self) -> Sign {
        match self {
            Target::Xz => Sign::Plus,
            Target::Sum => Sign::Minus,
        }
    }

    /// `(V, W)` pairs summed by the target. `V` sits on site n-1, `W` on site 0.
    pub fn pairs(self) -> Vec<(Pauli, Pauli)> {
        match self {
            Target::Xz => vec![(Pauli::X, Pauli::Z)],
            Target::Sum => ALL_PAULIS
                .iter()
                .flat_map(|&v| ALL_PAULIS.iter().map(move |&w| (v, w)))
                .collect(),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Xz => "xz",
            Target::Sum => "sum",
        })
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xz" | "o_xz" => Ok(Target::Xz),
            "sum" | "o_sum" => Ok(Target::Sum),
            other => Err(Error::invalid(format!("unknown target `{other}`"))),
        }
    }
}

pub(crate) fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::ResourceLimit(format!(
            "{n} sites exceed the dense cap of {cap}"
        )));
    }
    Ok(())
}

pub fn dense_hamiltonian(terms: &TermList) -> Result<DenseOperator> {
    dense_hamiltonian_capped(terms, DEFAULT_DENSE_CAP)
}

pub fn dense_hamiltonian_capped(terms: &TermList, cap: usize) -> Result<DenseOperator> {
    check_cap(terms.n, cap)?;
    let dim = 1usize << terms.n;
    let mut m = Array2::zeros((dim, dim));
    for t in &terms.terms {
        accumulate_string(&mut m, terms.n, &t.ops, t.coefficient);
    }
    let op = DenseOperator { n: terms.n, matrix: m };
    let defect = op.hermiticity_defect();
    if defect >= HERMITIAN_TOL {
        return Err(Error::InternalConsistency(format!(
            "assembled Hamiltonian deviates from Hermitian by {defect:e}"
        )));
    }
    Ok(op)
}

/// Dense matrix of a single-site Pauli on `site` of an `n`-site chain.
pub fn pauli_dense(letter: Pauli, site: usize, n: usize) -> Result<DenseOperator> {
    if site >= n {
        return Err(Error::invalid(format!("site {site} out of range for {n} sites")));
    }
    let dim = 1usize << n;
    let mut m = Array2::zeros((dim, dim));
    accumulate_string(&mut m, n, &[(site, letter)], 1.0);
    Ok(DenseOperator { n, matrix: m })
}

/// `e^{i·sign·H}` and its adjoint, from one eigendecomposition of `H`.
#[derive(Clone, Debug)]
pub struct Conjugator {
    left: Array2<C64>,
    right: Array2<C64>,
}

impl Conjugator {
    pub fn new(h: &DenseOperator, sign: Sign) -> Result<Self> {
        let defect = h.hermiticity_defect();
        if defect >= HERMITIAN_TOL {
            return Err(Error::invalid(format!(
                "Hamiltonian is not Hermitian (defect {defect:e})"
            )));
        }
        let (evals, evecs): (Array1<f64>, Array2<C64>) = h.matrix.eigh(UPLO::Upper)?;
        let s = sign.value();
        let mut scaled = evecs.clone();
        for (mut col, &e) in scaled.columns_mut().into_iter().zip(evals.iter()) {
            let ph = C64::from_polar(1.0, s * e);
            col.mapv_inplace(|v| v * ph);
        }
        let evecs_h = evecs.t().mapv(|v| v.conj());
        let left = scaled.dot(&evecs_h);
        let right = left.t().mapv(|v| v.conj());
        Ok(Conjugator { left, right })
    }

    /// `e^{i·sign·H} O e^{-i·sign·H}`.
    pub fn apply(&self, o: &DenseOperator) -> DenseOperator {
        DenseOperator { n: o.n, matrix: self.left.dot(&o.matrix).dot(&self.right) }
    }

    pub fn unitary(&self) -> &Array2<C64> {
        &self.left
    }
}

pub fn heisenberg_dense(h: &DenseOperator, o: &DenseOperator, sign: Sign) -> Result<DenseOperator> {
    if h.n != o.n {
        return Err(Error::invalid("operator dimensions do not match"));
    }
    Ok(Conjugator::new(h, sign)?.apply(o))
}

/// `Tr(V W V W)` for a single-site Pauli `V` and an arbitrary dense `W`.
pub(crate) fn pauli_otoc_trace(v: Pauli, v_site: usize, w: &DenseOperator) -> C64 {
    let n = w.n;
    let dim = w.dim();
    let shift = n - 1 - v_site;
    // M = V·W: row k of W lands on row k^mask with the Pauli phase.
    let mut m = Array2::<C64>::zeros((dim, dim));
    for k in 0..dim {
        let (nb, ph) = v.act((k >> shift) & 1);
        let r = (k & !(1 << shift)) | (nb << shift);
        let src = w.matrix.row(k);
        let mut dst = m.row_mut(r);
        Zip::from(&mut dst).and(&src).for_each(|d, s| *d = ph * s);
    }
    trace_of_square(&m)
}

/// `Tr(M M)` in O(dim²).
pub(crate) fn trace_of_square(m: &Array2<C64>) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for ((i, j), v) in m.indexed_iter() {
        acc += v * m[[j, i]];
    }
    acc
}

pub(crate) fn otoc_from_trace(tr: C64, n: usize) -> Result<OtocValue> {
    let scale = (1u64 << n) as f64;
    let im = tr.im / scale;
    if !(im.abs() < IMAG_TOL) {
        return Err(Error::InternalConsistency(format!(
            "OTOC trace has imaginary part {im:e}"
        )));
    }
    Ok(OtocValue::from_f(tr.re / scale))
}

/// Exact OTOC `(1/2ⁿ) Re Tr(V W' V W')` with `W' = e^{i·sign·H(x)} W e^{-i·sign·H(x)}`.
#[allow(clippy::too_many_arguments)]
pub fn otoc_dense(
    family: Family,
    x: ParamVector,
    n: usize,
    v: Pauli,
    v_site: usize,
    w: Pauli,
    w_site: usize,
    sign: Sign,
) -> Result<OtocValue> {
    check_cap(n, DEFAULT_DENSE_CAP)?;
    if v_site >= n || w_site >= n {
        return Err(Error::invalid("operator site out of range"));
    }
    let h = dense_hamiltonian(&build_terms(family, x, n)?)?;
    let evolved = heisenberg_dense(&h, &pauli_dense(w, w_site, n)?, sign)?;
    otoc_from_trace(pauli_otoc_trace(v, v_site, &evolved), n)
}

pub fn target_dense(target: Target, family: Family, x: ParamVector, n: usize) -> Result<f64> {
    target_dense_capped(target, family, x, n, DEFAULT_DENSE_CAP)
}

pub fn target_dense_capped(target: Target, family: Family, x: ParamVector, n: usize, cap: usize) -> Result<f64> {
    check_cap(n, cap)?;
    let h = dense_hamiltonian_capped(&build_terms(family, x, n)?, cap)?;
    let conj = Conjugator::new(&h, target.sign())?;
    let mut total = 0.0;
    let mut cache: Vec<(Pauli, DenseOperator)> = Vec::new();
    for (v, w) in target.pairs() {
        if !cache.iter().any(|(p, _)| *p == w) {
            cache.push((w, conj.apply(&pauli_dense(w, 0, n)?)));
        }
        let evolved = &cache.iter().find(|(p, _)| *p == w).expect("cached").1;
        total += otoc_from_trace(pauli_otoc_trace(v, n - 1, evolved), n)?.f;
    }
    Ok(total)
}

/// Lower bound `4 - log₂(7 + O_Sum)` on the end-to-end mutual information.
pub fn mi_lower_bound(o_sum: f64) -> Result<f64> {
    const TOL: f64 = 1e-9;
    if !o_sum.is_finite() || 7.0 + o_sum <= 0.0 {
        return Err(Error::Domain(format!("7 + O_Sum must be positive, got O_Sum = {o_sum}")));
    }
    if !(-3.0 - TOL..=9.0 + TOL).contains(&o_sum) {
        return Err(Error::Domain(format!("O_Sum = {o_sum} lies outside [-3, 9]")));
    }
    Ok(4.0 - (7.0 + o_sum).log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::PauliTerm;
    use crate::pauli::kron;

    #[test]
    fn single_z_is_diagonal() {
        let terms = TermList { n: 1, terms: vec![PauliTerm { coefficient: 1.0, ops: vec![(0, Pauli::Z)] }] };
        let h = dense_hamiltonian(&terms).unwrap();
        assert_eq!(h.matrix, Pauli::Z.matrix());
    }

    #[test]
    fn h4_on_one_site_is_x() {
        let h = dense_hamiltonian(&build_terms(Family::H4, ParamVector::new(1.0, 0.0, 0.0), 1).unwrap()).unwrap();
        assert_eq!(h.matrix, Pauli::X.matrix());
    }

    #[test]
    fn hamiltonians_are_hermitian_and_match_kron() {
        let x = ParamVector::new(0.4, -1.3, 0.9);
        for fam in crate::hamiltonians::ALL_FAMILIES {
            let terms = build_terms(fam, x, 4).unwrap();
            let h = dense_hamiltonian(&terms).unwrap();
            assert_eq!(h.hermiticity_defect(), 0.0);
            // Kronecker oracle.
            let mut k = Array2::<C64>::zeros((16, 16));
            for t in &terms.terms {
                let mut m = Array2::from_elem((1, 1), C64::new(t.coefficient, 0.0));
                for site in 0..4 {
                    let local = t
                        .ops
                        .iter()
                        .find(|(s, _)| *s == site)
                        .map(|(_, p)| p.matrix())
                        .unwrap_or_else(|| crate::pauli::basis_matrix(0));
                    m = kron(&m, &local);
                }
                k += &m;
            }
            assert!(h.max_abs_diff(&DenseOperator { n: 4, matrix: k }) < 1e-14);
        }
    }

    #[test]
    fn dense_cap_is_enforced() {
        let terms = build_terms(Family::H2, ParamVector::new(1.0, 1.0, 1.0), 5).unwrap();
        assert!(matches!(dense_hamiltonian_capped(&terms, 4), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn heisenberg_trivial_cases() {
        let n = 3;
        let h = dense_hamiltonian(&build_terms(Family::H1, ParamVector::new(0.3, 0.8, -0.5), n).unwrap()).unwrap();
        let zero = DenseOperator { n, matrix: Array2::zeros((8, 8)) };
        let o = pauli_dense(Pauli::Y, 1, n).unwrap();
        assert!(heisenberg_dense(&zero, &o, Sign::Plus).unwrap().max_abs_diff(&o) < 1e-14);
        let id = DenseOperator::identity(n);
        assert!(heisenberg_dense(&h, &id, Sign::Plus).unwrap().max_abs_diff(&id) < 1e-12);
        let fwd = heisenberg_dense(&h, &o, Sign::Plus).unwrap();
        let back = heisenberg_dense(&h, &fwd, Sign::Minus).unwrap();
        assert!(back.max_abs_diff(&o) < 1e-12);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = Array2::<C64>::zeros((2, 2));
        m[[0, 1]] = C64::new(1.0, 0.0);
        let h = DenseOperator { n: 1, matrix: m };
        let o = pauli_dense(Pauli::X, 0, 1).unwrap();
        assert!(matches!(heisenberg_dense(&h, &o, Sign::Plus), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn zero_couplings_give_unit_otoc() {
        for fam in crate::hamiltonians::ALL_FAMILIES {
            let v = otoc_dense(fam, ParamVector::ZERO, 5, Pauli::X, 4, Pauli::Z, 0, Sign::Plus).unwrap();
            assert!((v.f - 1.0).abs() < 1e-12);
            assert!(v.c.abs() < 1e-12);
            assert!((target_dense(Target::Sum, fam, ParamVector::ZERO, 5).unwrap() - 9.0).abs() < 1e-12);
            assert!((target_dense(Target::Xz, fam, ParamVector::ZERO, 5).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn static_z_under_zz_chain() {
        // On two sites H4 at x=(0,0,t) is t·Z₀Z₁, which commutes with Z₀.
        for t in [0.0, 0.3, 1.7, 5.0] {
            let v = otoc_dense(Family::H4, ParamVector::new(0.0, 0.0, t), 2, Pauli::X, 1, Pauli::Z, 0, Sign::Plus).unwrap();
            assert!((v.f - 1.0).abs() < 1e-12, "t={t}: {v:?}");
        }
    }

    #[test]
    fn mi_bound_values() {
        assert!(mi_lower_bound(9.0).unwrap().abs() < 1e-15);
        assert!((mi_lower_bound(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((mi_lower_bound(-3.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(mi_lower_bound(-8.0), Err(Error::Domain(_))));
        assert!(matches!(mi_lower_bound(f64::NAN), Err(Error::Domain(_))));
    }
}
