//! Exact simulation of quantum query algorithms.
//!
//! States are stored sparsely as sorted `(basis index, amplitude)` pairs, so
//! circuits whose gates are mostly classical permutations (oracles, xor
//! tables) stay cheap even with wide registers. A register is a list of wires;
//! bit `j` of the register value lives on `wires[j]`.

mod circuit;
mod density;
mod predicate;
mod state;

pub use circuit::{
    apply_oracle, run_query_algorithm, run_with_oracles, Control, FunctionOracle, OutputLayout, PreparedAlgorithm, QueryAlgorithm, QueryRun,
    Step, DENSE_GATE_MAX_QUBITS,
};
pub use density::{mix, DensityMatrix};
pub use predicate::{predicate_accept, QuantumPredicate, PREDICATE_DENSE_MAX_QUBITS};
pub use state::{measure, Branch, OutcomeDistribution, StateVector, DENSE_QUBIT_CAP, MAX_QUBITS};

/// Reads the value of `wires` out of a basis index.
#[inline]
pub fn read_register(index: u64, wires: &[usize]) -> u64 {
    wires.iter().enumerate().fold(0u64, |acc, (j, &w)| acc | (((index >> w) & 1) << j))
}

/// Overwrites the bits of `wires` in `index` with `value`.
#[inline]
pub fn write_register(index: u64, wires: &[usize], value: u64) -> u64 {
    wires.iter().enumerate().fold(index, |acc, (j, &w)| (acc & !(1u64 << w)) | (((value >> j) & 1) << w))
}

/// Xors `value` into the bits of `wires`.
#[inline]
pub fn xor_register(index: u64, wires: &[usize], value: u64) -> u64 {
    wires.iter().enumerate().fold(index, |acc, (j, &w)| acc ^ (((value >> j) & 1) << w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn register_roundtrip() {
        let wires = [3, 0, 5];
        let idx = write_register(0b1000_0010, &wires, 0b101);
        assert_eq!(read_register(idx, &wires), 0b101);
        assert_eq!(idx & 0b10, 0b10);
        assert_eq!(xor_register(idx, &wires, 0b101), write_register(idx, &wires, 0));
    }
}
