use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fieldhash::HashFunction;
use crate::qcore::{DensityMatrix, FunctionOracle};
use crate::scalar::Real;

/// The verifier side of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VerifierRole {
    /// Replies with fresh uniform challenges.
    HonestArthur,
    /// Replies to round `i` with `h_i` of the whole transcript so far.
    HashArthur { hashes: Vec<HashFunction> },
    /// Like `HashArthur` with arbitrary functions (e.g. a uniformly random
    /// function drawn from all of them).
    FunctionArthur { functions: Vec<FunctionOracle> },
    /// Private-coin verifier; `coins = None` draws them uniformly.
    HonestIpVerifier {
        #[serde(default)]
        coins: Option<u64>,
    },
    /// Private-coin verifier that takes its coins as `h(a)`.
    HashIpVerifier { hash: HashFunction },
    /// Private-coin verifier that takes its coins as `f(a)`.
    FunctionIpVerifier { function: FunctionOracle },
}

impl VerifierRole {
    pub(crate) fn is_private_coin(&self) -> bool {
        matches!(
            self,
            VerifierRole::HonestIpVerifier { .. } | VerifierRole::HashIpVerifier { .. } | VerifierRole::FunctionIpVerifier { .. }
        )
    }
}

/// A prover that answers every prefix from explicit tables.
///
/// `messages[j]` maps a classical prefix of length `2j` to the distribution
/// of message `2j+1`; `finals` maps the full classical transcript to the final
/// message. Missing prefixes fall back to message 0 and `|0><0|`.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedProver<T: Real> {
    pub messages: Vec<BTreeMap<Vec<u64>, BTreeMap<u64, T>>>,
    pub finals: BTreeMap<Vec<u64>, DensityMatrix<T>>,
    pub final_qubits: usize,
}

impl<T: Real> TabulatedProver<T> {
    pub fn new(
        messages: Vec<BTreeMap<Vec<u64>, BTreeMap<u64, T>>>,
        finals: BTreeMap<Vec<u64>, DensityMatrix<T>>,
        final_qubits: usize,
    ) -> Result<Self> {
        let p = TabulatedProver { messages, finals, final_qubits };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (j, table) in self.messages.iter().enumerate() {
            for (prefix, dist) in table {
                if prefix.len() != 2 * j {
                    return Err(Error::config(format!("round {j} prefix has {} messages", prefix.len())));
                }
                if dist.values().any(|&p| p < T::zero()) {
                    return Err(Error::domain("prover distribution", "negative probability"));
                }
                let total = dist.values().fold(T::zero(), |a, &p| a + p);
                if (total - T::one()).abs() > T::exact_tol() {
                    return Err(Error::domain("prover distribution", format!("sums to {total}")));
                }
            }
        }
        for (prefix, rho) in &self.finals {
            if prefix.len() != 2 * self.messages.len() || rho.num_qubits() != self.final_qubits {
                return Err(Error::config("final-message table does not match the round count"));
            }
            rho.validate(T::one())?;
        }
        Ok(())
    }

    pub fn rounds(&self) -> usize {
        self.messages.len()
    }

    /// Distribution of the next prover message after `prefix` (even length).
    pub fn next_message(&self, prefix: &[u64]) -> BTreeMap<u64, T> {
        self.messages
            .get(prefix.len() / 2)
            .and_then(|t| t.get(prefix))
            .cloned()
            .unwrap_or_else(|| BTreeMap::from([(0, T::one())]))
    }

    pub fn final_state(&self, prefix: &[u64]) -> DensityMatrix<T> {
        self.finals.get(prefix).cloned().unwrap_or_else(|| DensityMatrix::zero_state(self.final_qubits))
    }

    /// A prover that always sends `messages` and a fixed final state.
    pub fn deterministic(messages: &[u64], challenge_space: &[Vec<u64>], final_state: DensityMatrix<T>) -> Result<Self> {
        // challenge_space[j] lists the possible challenges of round j
        let mut tables = Vec::new();
        let mut prefixes: Vec<Vec<u64>> = vec![vec![]];
        for (j, &m) in messages.iter().enumerate() {
            let mut table = BTreeMap::new();
            let mut next = Vec::new();
            for p in &prefixes {
                table.insert(p.clone(), BTreeMap::from([(m, T::one())]));
                for &b in &challenge_space[j] {
                    next.push([p.as_slice(), &[m, b]].concat());
                }
            }
            tables.push(table);
            prefixes = next;
        }
        let q = final_state.num_qubits();
        let finals = prefixes.into_iter().map(|p| (p, final_state.clone())).collect();
        Self::new(tables, finals, q)
    }

    /// Independent provers on consecutive bit blocks. `lengths[j]` are the
    /// per-copy message widths.
    pub fn parallel(copies: &[TabulatedProver<T>], lengths: &[usize]) -> Result<Self> {
        let Some(first) = copies.first() else {
            return Err(Error::domain("copies", "parallel prover needs at least one copy"));
        };
        let rounds = first.rounds();
        if copies.iter().any(|c| c.rounds() != rounds || c.final_qubits != first.final_qubits) {
            return Err(Error::config("parallel provers must share their shape"));
        }
        let split = |prefix: &[u64], j: usize| -> Vec<u64> {
            prefix.iter().zip(lengths).map(|(&m, &n)| super::field(m, j * n, n)).collect()
        };
        // enumerate composed prefixes reachable by every copy
        let mut tables = Vec::new();
        let mut prefixes: Vec<Vec<u64>> = vec![vec![]];
        for r in 0..rounds {
            let mut table = BTreeMap::new();
            let mut next = Vec::new();
            for p in &prefixes {
                let mut dist: BTreeMap<u64, T> = BTreeMap::from([(0, T::one())]);
                for (j, c) in copies.iter().enumerate() {
                    let part = c.next_message(&split(p, j));
                    let mut merged = BTreeMap::new();
                    for (&m, &pm) in &dist {
                        for (&x, &px) in &part {
                            *merged.entry(m | (x << (j * lengths[2 * r]))).or_insert_with(T::zero) += pm * px;
                        }
                    }
                    dist = merged;
                }
                let challenge_bits = lengths[2 * r + 1] * copies.len();
                for &m in dist.keys() {
                    for b in 0..1u64 << challenge_bits {
                        next.push([p.as_slice(), &[m, b]].concat());
                    }
                }
                table.insert(p.clone(), dist);
            }
            tables.push(table);
            prefixes = next;
        }
        let mut finals = BTreeMap::new();
        for p in prefixes {
            let mut rho = copies[0].final_state(&split(&p, 0));
            for (j, c) in copies.iter().enumerate().skip(1) {
                rho = rho.kron(&c.final_state(&split(&p, j)));
            }
            finals.insert(p, rho);
        }
        Self::new(tables, finals, first.final_qubits * copies.len())
    }
}

/// The prover side of a run.
#[derive(Clone, Debug, PartialEq)]
pub enum ProverRole<T: Real> {
    /// The honest prover's strategy with its private randomness averaged out,
    /// plus the witness it was built from.
    Honest { strategy: TabulatedProver<T>, witness: Option<Vec<usize>> },
    Tabulated(TabulatedProver<T>),
}

impl<T: Real> ProverRole<T> {
    pub fn strategy(&self) -> &TabulatedProver<T> {
        match self {
            ProverRole::Honest { strategy, .. } | ProverRole::Tabulated(strategy) => strategy,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_prover_tables() {
        let p = TabulatedProver::<f64>::deterministic(&[1, 0], &[vec![0, 1], vec![0, 1]], DensityMatrix::zero_state(1))
            .unwrap();
        assert_eq!(p.next_message(&[]), BTreeMap::from([(1, 1.0)]));
        assert_eq!(p.next_message(&[1, 1]), BTreeMap::from([(0, 1.0)]));
        assert_eq!(p.finals.len(), 4);
        // unreachable prefixes fall back to message 0
        assert_eq!(p.next_message(&[0, 0]), BTreeMap::from([(0, 1.0)]));
    }

    #[test]
    fn rejects_unnormalised_tables() {
        let bad = vec![BTreeMap::from([(vec![], BTreeMap::from([(0u64, 0.5)]))])];
        assert!(TabulatedProver::<f64>::new(bad, BTreeMap::new(), 1).is_err());
    }

    #[test]
    fn parallel_prover_is_product() {
        let a = TabulatedProver::<f64>::deterministic(&[1], &[vec![0, 1]], DensityMatrix::basis(1, 1).unwrap()).unwrap();
        let b = TabulatedProver::<f64>::deterministic(&[0], &[vec![0, 1]], DensityMatrix::basis(1, 0).unwrap()).unwrap();
        let p = TabulatedProver::parallel(&[a, b], &[1, 1]).unwrap();
        assert_eq!(p.next_message(&[]), BTreeMap::from([(0b01, 1.0)]));
        assert_eq!(p.final_state(&[0b01, 0b10]).entry(0b01, 0b01).re, 1.0);
        assert_eq!(p.finals.len(), 4);
    }
}
