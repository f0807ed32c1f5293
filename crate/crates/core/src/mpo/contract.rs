//! Normalised trace `(1/2ⁿ) Tr(ABCD)` of four MPOs.

use ndarray::{Array2, ArrayD, Axis, IxDyn};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::Mpo;
use crate::error::{Error, Result};
use crate::pauli::basis_matrix;

/// Largest chain the dense contraction is chosen for automatically.
pub const DENSE_TRACE_MAX_SITES: usize = 10;

/// Peak working-set limit for the environment contraction, in bytes.
pub const ENVIRONMENT_BUDGET_BYTES: usize = 1 << 30;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceMethod {
    /// Cheaper of the two by a flop estimate.
    #[default]
    Auto,
    /// Reconstruct dense matrices and multiply.
    Dense,
    /// Site-by-site transfer contraction with a four-index environment.
    Environment,
}

/// `P_p P_q = ω[p][q] P_{p^q}`.
fn product_phases() -> [[C64; 4]; 4] {
    let mats: Vec<Array2<C64>> = (0..4).map(basis_matrix).collect();
    let mut out = [[C64::new(0.0, 0.0); 4]; 4];
    for p in 0..4 {
        for q in 0..4 {
            let prod = mats[p].dot(&mats[q]);
            let c = p ^ q;
            // Tr(P_c P_p P_q) / 2
            let t = mats[c].dot(&prod);
            out[p][q] = (t[[0, 0]] + t[[1, 1]]) / 2.0;
        }
    }
    out
}

pub fn trace_product4(a: &Mpo, b: &Mpo, c: &Mpo, d: &Mpo, method: TraceMethod) -> Result<C64> {
    let n = a.n();
    if [b.n(), c.n(), d.n()].iter().any(|&m| m != n) {
        return Err(Error::invalid("operators act on different chain lengths"));
    }
    let method = match method {
        TraceMethod::Auto => {
            if n <= DENSE_TRACE_MAX_SITES && dense_flops(n) <= environment_flops(a, b, c, d) {
                TraceMethod::Dense
            } else {
                TraceMethod::Environment
            }
        }
        m => m,
    };
    match method {
        TraceMethod::Dense => trace_dense(a, b, c, d),
        _ => trace_environment(a, b, c, d),
    }
}

fn dense_flops(n: usize) -> f64 {
    let dim = (1u64 << n) as f64;
    3.0 * 8.0 * dim * dim * dim
}

fn environment_flops(a: &Mpo, b: &Mpo, c: &Mpo, d: &Mpo) -> f64 {
    let dims: Vec<Vec<usize>> = [a, b, c, d].iter().map(|m| m.bond_dims()).collect();
    (0..a.n())
        .map(|i| {
            let widths: Vec<f64> = dims.iter().map(|v| v[i].max(v[i + 1]) as f64).collect();
            let widest = widths.iter().cloned().fold(1.0, f64::max);
            64.0 * widths.iter().product::<f64>() * widest
        })
        .sum()
}

fn trace_dense(a: &Mpo, b: &Mpo, c: &Mpo, d: &Mpo) -> Result<C64> {
    if a.n() > crate::exact_sim::DEFAULT_DENSE_CAP {
        return Err(Error::ResourceLimit(format!(
            "dense trace of a {}-site operator exceeds the dense cap",
            a.n()
        )));
    }
    let ab = a.to_dense().matrix.dot(&b.to_dense().matrix);
    let cd = c.to_dense().matrix.dot(&d.to_dense().matrix);
    let mut acc = C64::new(0.0, 0.0);
    for ((i, j), v) in ab.indexed_iter() {
        acc += v * cd[[j, i]];
    }
    Ok(acc / (1u64 << a.n()) as f64)
}

fn check_budget(elements: usize) -> Result<()> {
    let bytes = elements.saturating_mul(std::mem::size_of::<C64>()).saturating_mul(2);
    if bytes > ENVIRONMENT_BUDGET_BYTES {
        return Err(Error::ResourceLimit(format!(
            "environment contraction needs about {} MiB",
            bytes >> 20
        )));
    }
    Ok(())
}

/// Contracts the leading axis of `x` with `t[k, p, k']`, appending `(p, k')`.
fn absorb(x: ArrayD<C64>, t: &ndarray::Array3<f64>) -> Result<ArrayD<C64>> {
    let shape = x.shape().to_vec();
    let k = shape[0];
    let rest: usize = shape[1..].iter().product();
    let (tk, tp, tr) = t.dim();
    debug_assert_eq!(k, tk);
    check_budget(rest * tp * tr)?;
    let xm = x.into_shape_with_order((k, rest)).expect("contiguous");
    let tm = t.view().into_shape_with_order((tk, tp * tr)).expect("contiguous").mapv(|v| C64::new(v, 0.0));
    let out = xm.t().dot(&tm);
    let mut new_shape = shape[1..].to_vec();
    new_shape.extend([tp, tr]);
    Ok(out.into_shape_with_order(IxDyn(&new_shape)).expect("contiguous"))
}

/// Replaces Pauli axes `ap < aq` by their product index, appended last.
fn merge_paulis(x: &ArrayD<C64>, ap: usize, aq: usize, w: &[[C64; 4]; 4]) -> ArrayD<C64> {
    let mut parts = Vec::with_capacity(4);
    for u in 0..4 {
        let mut acc: Option<ArrayD<C64>> = None;
        for (p, row) in w.iter().enumerate() {
            let q = p ^ u;
            let slice = x.index_axis(Axis(aq), q);
            let slice = slice.index_axis(Axis(ap), p);
            let term = slice.mapv(|v| v * row[q]);
            acc = Some(match acc {
                None => term,
                Some(a) => a + term,
            });
        }
        parts.push(acc.expect("four terms"));
    }
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    ndarray::stack(Axis(parts[0].ndim()), &views).expect("equal shapes").as_standard_layout().to_owned()
}

fn trace_environment(a: &Mpo, b: &Mpo, c: &Mpo, d: &Mpo) -> Result<C64> {
    let w = product_phases();
    let mut env = ArrayD::from_elem(IxDyn(&[1, 1, 1, 1]), C64::new(1.0, 0.0));
    for i in 0..a.n() {
        // [a,b,c,d] -> [b,c,d,p,a'] -> [c,d,p,a',q,b'] -> [c,d,a',b',u]
        let x = absorb(env, &a.tensors()[i])?;
        let x = absorb(x, &b.tensors()[i])?;
        let x = merge_paulis(&x, 2, 4, &w);
        // -> [d,a',b',u,r,c'] -> [d,a',b',c',v]
        let x = absorb(x, &c.tensors()[i])?;
        let x = merge_paulis(&x, 3, 4, &w);
        // -> [d,v,a',b',c'] contracted with D[d,v,d']
        let x = x.permuted_axes(IxDyn(&[0, 4, 1, 2, 3])).as_standard_layout().to_owned();
        let s = x.shape().to_vec();
        let (dl, dp, dr) = d.tensors()[i].dim();
        let rest = s[2] * s[3] * s[4];
        let xm = x.into_shape_with_order((dl * dp, rest)).expect("contiguous");
        let dm = d.tensors()[i].view().into_shape_with_order((dl * dp, dr)).expect("contiguous").mapv(|v| C64::new(v, 0.0));
        let out = xm.t().dot(&dm);
        env = out.into_shape_with_order(IxDyn(&[s[2], s[3], s[4], dr])).expect("contiguous");
    }
    Ok(env.iter().next().copied().expect("scalar environment"))
}
