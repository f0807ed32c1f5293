//! Single-qubit Pauli letters and the fixed qubit ordering shared by every
//! engine: in a dense 2ⁿ×2ⁿ matrix, site 0 is the leftmost Kronecker factor,
//! i.e. the most significant bit of the basis index.

use std::fmt;
use std::str::FromStr;

use ndarray::{array, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

pub const ALL_PAULIS: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

impl Pauli {
    /// Index in the local operator basis {I, X, Y, Z}.
    pub fn basis_index(self) -> usize {
        match self {
            Pauli::X => 1,
            Pauli::Y => 2,
            Pauli::Z => 3,
        }
    }

    pub fn matrix(self) -> Array2<C64> {
        basis_matrix(self.basis_index())
    }

    /// Action on a computational basis state: `P|b⟩ = phase·|b ⊕ flip⟩`.
    pub(crate) fn act(self, bit: usize) -> (usize, C64) {
        match (self, bit) {
            (Pauli::X, b) => (b ^ 1, C64::new(1.0, 0.0)),
            (Pauli::Y, 0) => (1, C64::new(0.0, 1.0)),
            (Pauli::Y, _) => (0, C64::new(0.0, -1.0)),
            (Pauli::Z, 0) => (0, C64::new(1.0, 0.0)),
            (Pauli::Z, _) => (1, C64::new(-1.0, 0.0)),
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Pauli::X => "X",
            Pauli::Y => "Y",
            Pauli::Z => "Z",
        };
        f.write_str(c)
    }
}

impl FromStr for Pauli {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "x" | "X" => Ok(Pauli::X),
            "y" | "Y" => Ok(Pauli::Y),
            "z" | "Z" => Ok(Pauli::Z),
            other => Err(Error::invalid(format!("unknown Pauli letter `{other}`"))),
        }
    }
}

/// 2×2 matrix of basis element `p` in {I, X, Y, Z}.
pub fn basis_matrix(p: usize) -> Array2<C64> {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match p {
        0 => array![[l, o], [o, l]],
        1 => array![[o, l], [l, o]],
        2 => array![[o, -i], [i, o]],
        3 => array![[l, o], [o, -l]],
        _ => panic!("Pauli basis index out of range: {p}"),
    }
}

pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let s = a[[i, j]];
            if s == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = s * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Adds `coefficient · P_string` into the dense matrix `m` without forming
/// Kronecker products: every Pauli string is a phased permutation.
pub(crate) fn accumulate_string(m: &mut Array2<C64>, n: usize, ops: &[(usize, Pauli)], coefficient: f64) {
    let dim = 1usize << n;
    for col in 0..dim {
        let mut row = col;
        let mut phase = C64::new(coefficient, 0.0);
        for &(site, p) in ops {
            let shift = n - 1 - site;
            let bit = (col >> shift) & 1;
            let (new_bit, ph) = p.act(bit);
            row = (row & !(1 << shift)) | (new_bit << shift);
            phase *= ph;
        }
        m[[row, col]] += phase;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_algebra() {
        let x = Pauli::X.matrix();
        let y = Pauli::Y.matrix();
        let z = Pauli::Z.matrix();
        let i = C64::new(0.0, 1.0);
        // XY = iZ
        let xy = x.dot(&y);
        for (a, b) in xy.iter().zip(z.iter()) {
            assert!((a - i * b).norm() < 1e-15);
        }
        for p in [&x, &y, &z] {
            let sq = p.dot(p);
            assert_eq!(sq, basis_matrix(0));
        }
    }

    #[test]
    fn accumulate_matches_kron() {
        let n = 3;
        let ops = [(0, Pauli::Z), (1, Pauli::Y), (2, Pauli::X)];
        let mut m = Array2::zeros((8, 8));
        accumulate_string(&mut m, n, &ops, 0.5);
        let k = kron(&kron(&Pauli::Z.matrix(), &Pauli::Y.matrix()), &Pauli::X.matrix()).mapv(|v| v * 0.5);
        assert_eq!(m, k);
    }
}
