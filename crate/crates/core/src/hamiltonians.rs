//! The four parameterised spin-chain families and their input distribution.
//!
//! Each family is linear in its three couplings, `H(c·x) = c·H(x)`, so the
//! norm of a parameter vector acts as an evolution time for the unit-norm
//! Hamiltonian `H(x/‖x‖)`. Chains have open boundaries and 0-based sites.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::{map_indexed, Execution};
use crate::pauli::Pauli;
use crate::rng::{substream, Domain};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Field + Ising + cluster (ZXZ) terms.
    H1,
    /// XYZ Heisenberg chain.
    H2,
    /// Heisenberg chain with half-strength next-nearest couplings.
    H3,
    /// Mixed-field Ising chain.
    H4,
}

pub const ALL_FAMILIES: [Family; 4] = [Family::H1, Family::H2, Family::H3, Family::H4];

impl Family {
    /// Smallest chain for which every sum of the family is non-empty.
    pub fn min_sites(self) -> usize {
        match self {
            Family::H1 | Family::H3 => 3,
            Family::H2 => 2,
            Family::H4 => 1,
        }
    }

    /// Radius of the input ball: `n` for H1–H3 and `2n` for H4.
    pub fn radius(self, n: usize) -> f64 {
        match self {
            Family::H4 => 2.0 * n as f64,
            _ => n as f64,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::H1 => "h1",
            Family::H2 => "h2",
            Family::H3 => "h3",
            Family::H4 => "h4",
        };
        f.write_str(s)
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h1" => Ok(Family::H1),
            "h2" => Ok(Family::H2),
            "h3" => Ok(Family::H3),
            "h4" => Ok(Family::H4),
            other => Err(Error::invalid(format!("unknown family `{other}`"))),
        }
    }
}

/// A point in the three-dimensional coupling space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub [f64; 3]);

impl ParamVector {
    pub const ZERO: ParamVector = ParamVector([0.0; 3]);

    pub fn new(x1: f64, x2: f64, x3: f64) -> Self {
        ParamVector([x1, x2, x3])
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn sq_dist(&self, other: &ParamVector) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn l1_dist(&self, other: &ParamVector) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b).abs()).sum()
    }

    pub fn scale(&self, c: f64) -> ParamVector {
        ParamVector(self.0.map(|v| v * c))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// One weighted Pauli string. Sites are strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub ops: Vec<(usize, Pauli)>,
}

impl PauliTerm {
    fn new(coefficient: f64, ops: Vec<(usize, Pauli)>) -> Self {
        debug_assert!(ops.windows(2).all(|w| w[0].0 < w[1].0));
        PauliTerm { coefficient, ops }
    }

    pub fn first_site(&self) -> usize {
        self.ops[0].0
    }

    pub fn last_site(&self) -> usize {
        self.ops[self.ops.len() - 1].0
    }
}

/// A Hamiltonian as a real-weighted sum of Pauli strings on `n` sites.
#[derive(Clone, Debug, PartialEq)]
pub struct TermList {
    pub n: usize,
    pub terms: Vec<PauliTerm>,
}

impl TermList {
    pub fn scaled(&self, c: f64) -> TermList {
        TermList {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|t| PauliTerm::new(t.coefficient * c, t.ops.clone()))
                .collect(),
        }
    }
}

/// Builds the Pauli-term list of `family` at couplings `x` on `n` sites.
///
/// Terms whose coupling is exactly zero are dropped.
pub fn build_terms(family: Family, x: ParamVector, n: usize) -> Result<TermList> {
    if n < family.min_sites() {
        return Err(Error::invalid(format!(
            "family {family} needs at least {} sites, got {n}",
            family.min_sites()
        )));
    }
    if !x.is_finite() {
        return Err(Error::invalid("parameter vector has non-finite components"));
    }
    let [x1, x2, x3] = x.0;
    let mut terms = Vec::new();
    let mut push = |c: f64, ops: Vec<(usize, Pauli)>| {
        if c != 0.0 {
            terms.push(PauliTerm::new(c, ops));
        }
    };
    use Pauli::{X, Y, Z};
    match family {
        Family::H1 => {
            for i in 0..n {
                push(x1, vec![(i, X)]);
            }
            for j in 0..n - 1 {
                push(x2, vec![(j, X), (j + 1, X)]);
            }
            for k in 0..n - 2 {
                push(x3, vec![(k, Z), (k + 1, X), (k + 2, Z)]);
            }
        }
        Family::H2 => {
            for (c, p) in [(x1, X), (x2, Y), (x3, Z)] {
                for j in 0..n - 1 {
                    push(c, vec![(j, p), (j + 1, p)]);
                }
            }
        }
        Family::H3 => {
            for (c, p) in [(x1, X), (x2, Y), (x3, Z)] {
                for i in 0..n - 1 {
                    push(c, vec![(i, p), (i + 1, p)]);
                }
                // Next-nearest sums stop at the last valid pair (n-3, n-1).
                for j in 0..n - 2 {
                    push(0.5 * c, vec![(j, p), (j + 2, p)]);
                }
            }
        }
        Family::H4 => {
            for i in 0..n {
                push(x1, vec![(i, X)]);
            }
            for i in 0..n {
                push(x2, vec![(i, Z)]);
            }
            for k in 0..n.saturating_sub(1) {
                push(x3, vec![(k, Z), (k + 1, Z)]);
            }
        }
    }
    Ok(TermList { n, terms })
}

/// `x = t·x̂` with `t = ‖x‖`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scaling {
    /// The zero vector: zero evolution time, no direction.
    ZeroTime,
    Scaled { t: f64, unit: ParamVector },
}

pub fn split_scaling(x: ParamVector) -> Scaling {
    let t = x.norm();
    if t == 0.0 {
        Scaling::ZeroTime
    } else {
        Scaling::Scaled { t, unit: x.scale(1.0 / t) }
    }
}

/// Uniform draw from the closed unit ball for sample `index`.
///
/// The stream depends on `(seed, n, index)` only, never on the family, so
/// every family at a given chain length sees the same directions and radial
/// fractions.
pub fn unit_ball_sample(seed: u64, n: usize, index: usize) -> ParamVector {
    let mut rng = substream(seed, Domain::Inputs, n as u64, index as u64);
    let dir = loop {
        let g: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        if norm > 1e-300 {
            break ParamVector(g).scale(1.0 / norm);
        }
    };
    let u: f64 = rng.random();
    dir.scale(u.cbrt())
}

/// `count` i.i.d. uniform samples from the family's input ball.
pub fn sample_inputs(family: Family, n: usize, count: usize, seed: u64) -> Result<Vec<ParamVector>> {
    if count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    Ok(sample_inputs_with(family, n, count, seed, Execution::default()))
}

pub(crate) fn sample_inputs_with(
    family: Family,
    n: usize,
    count: usize,
    seed: u64,
    exec: Execution,
) -> Vec<ParamVector> {
    let r = family.radius(n);
    map_indexed(count, exec, |i| unit_ball_sample(seed, n, i).scale(r))
}
