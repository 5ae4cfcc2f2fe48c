use proptest::prelude::*;
use zklab_core::qcore::{measure, run_query_algorithm, OutputLayout, QueryAlgorithm};
use zklab_core::{FunctionOracle, Step};

const QUBITS: usize = 4;

fn step() -> impl Strategy<Value = Step<f64>> {
    prop_oneof![
        (0..QUBITS).prop_map(|wire| Step::H { wire }),
        (0..QUBITS).prop_map(|wire| Step::X { wire }),
        (0..QUBITS, -3.0..3.0f64).prop_map(|(wire, angle)| Step::Ry { wire, angle }),
        (0..QUBITS, -3.0..3.0f64).prop_map(|(wire, angle)| Step::Rz { wire, angle }),
        (0..QUBITS, 1..QUBITS).prop_map(|(c, d)| Step::Cx { control: c, target: (c + d) % QUBITS }),
        Just(Step::Oracle { round: 0, input: vec![0, 1], output: vec![2] }),
    ]
}

fn algorithm(steps: Vec<Step<f64>>) -> QueryAlgorithm<f64> {
    let budget = steps.iter().filter(|s| matches!(s, Step::Oracle { .. })).count();
    QueryAlgorithm::new(QUBITS, steps, OutputLayout::default(), budget).unwrap()
}

proptest! {
    #[test]
    fn circuits_preserve_norm(steps in prop::collection::vec(step(), 0..24), table in prop::collection::vec(0u64..2, 4)) {
        let f = FunctionOracle::new(2, 1, table).unwrap();
        let run = run_query_algorithm(&algorithm(steps), &f).unwrap();
        prop_assert!((run.state.norm_sqr() - 1.0).abs() < 1e-10);
        let dist = measure(&run.state, &[0, 1, 2, 3]).unwrap();
        prop_assert!((dist.total() - 1.0).abs() < 1e-10);
    }

    /// Appending the reversed circuit with inverted rotations returns to `|0000>`.
    #[test]
    fn mirrored_circuit_is_identity(steps in prop::collection::vec(step(), 0..16), table in prop::collection::vec(0u64..2, 4)) {
        let inverse = steps.iter().rev().map(|s| match s {
            Step::Ry { wire, angle } => Step::Ry { wire: *wire, angle: -angle },
            Step::Rz { wire, angle } => Step::Rz { wire: *wire, angle: -angle },
            other => other.clone(),
        });
        let all: Vec<_> = steps.iter().cloned().chain(inverse).collect();
        let f = FunctionOracle::new(2, 1, table).unwrap();
        let run = run_query_algorithm(&algorithm(all), &f).unwrap();
        prop_assert!((run.state.amplitude(0).norm_sqr() - 1.0).abs() < 1e-9);
    }
}
