use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zklab_core::qcore::{OutputLayout, QueryAlgorithm, Step};
use zklab_core::searchlab::*;
use zklab_core::Error;

#[test]
fn classical_search_matches_formula() {
    let o = classical_optimal_search::<f64>(1, 2, 2).unwrap();
    assert!((o.measured - 7.0 / 16.0).abs() < 1e-12 && o.within_bound());
    let o = classical_optimal_search::<f64>(3, 2, 1).unwrap();
    assert!((o.measured - 15.0 / 16.0).abs() < 1e-12);
    assert_eq!(classical_optimal_search::<f64>(0, 1, 3).unwrap().measured, 0.125);
    for t in 0..=3 {
        for n2 in 1..=4 {
            let o = classical_optimal_search::<f64>(t, 2, n2).unwrap();
            assert!((o.measured - classical_closed_form::<f64>(t, n2)).abs() < 1e-12);
            assert!(o.within_bound());
        }
    }
    assert!(matches!(classical_optimal_search::<f64>(4, 2, 1), Err(Error::Domain { .. })));
}

#[test]
fn non_adaptive_strategies_stay_below_bound() {
    let beta = [1u64, 2, 3, 0];
    // query 0 and 1, then output 2 regardless of answers
    let s = |h: &[(u64, u64)]| if h.len() < 2 { Move::Query(h.len() as u64) } else { Move::Output(2) };
    let p: f64 = classical_strategy_success(2, 2, 2, &beta, &s).unwrap();
    assert!((p - 0.25).abs() < 1e-12);
    let greedy = |h: &[(u64, u64)]| Move::Query(h.len() as u64);
    assert!(matches!(classical_strategy_success::<f64>(2, 2, 1, &beta, &greedy), Err(Error::BudgetViolation { .. })));
}

#[test]
fn grover_matches_closed_form() {
    assert!((grover_search::<f64>(1, 2).unwrap().measured - 1.0).abs() < 1e-12);
    let o = grover_search::<f64>(2, 4).unwrap();
    assert!((o.measured - 0.908_51).abs() < 1e-4);
    for n2 in 1..=4 {
        for t in 0..=3 {
            let o = grover_search::<f64>(t, n2).unwrap();
            assert!((o.measured - grover_closed_form::<f64>(t, n2)).abs() < 1e-9, "t={t} n2={n2}");
            if t >= 1 {
                assert!(o.within_bound());
            }
        }
    }
    assert!((grover_search::<f64>(0, 3).unwrap().measured - 0.125).abs() < 1e-12);
}

#[test]
fn grover_respects_budget() {
    let alg = grover_circuit::<f64>(2, 3).unwrap();
    assert_eq!(alg.oracle_slots(), 2);
    let over = QueryAlgorithm::<f64>::new(alg.num_qubits, alg.steps.clone(), alg.layout.clone(), 1);
    assert!(matches!(over, Err(Error::BudgetViolation { .. })));
}

#[test]
fn hashing_matches_random_functions() {
    let mut worst_control = 0.0f64;
    for (name, alg) in equivalence_test_algorithms::<f64>().unwrap() {
        let d = twise_equivalence_check(&alg, 2, 1, None).unwrap();
        assert!(d <= 1e-10, "{name}: {d}");
        worst_control = worst_control.max(twise_equivalence_check(&alg, 2, 1, Some(1)).unwrap());
    }
    assert!(worst_control > 1e-3);
}

#[test]
fn zero_query_algorithm_is_trivially_equivalent() {
    let layout = OutputLayout { prover_messages: vec![vec![0, 1]], ..OutputLayout::default() };
    let alg = QueryAlgorithm::<f64>::new(3, vec![Step::H { wire: 0 }], layout, 0).unwrap();
    assert!(twise_equivalence_check(&alg, 2, 1, Some(1)).unwrap() < 1e-12);
}

fn one_query(n1: usize, n2: usize) -> QueryAlgorithm<f64> {
    let a: Vec<usize> = (0..n1).collect();
    let b: Vec<usize> = (n1..n1 + n2).collect();
    let mut steps: Vec<Step<f64>> = a.iter().map(|&wire| Step::H { wire }).collect();
    steps.push(Step::Oracle { round: 0, input: a.clone(), output: b.clone() });
    steps.push(Step::Cx { control: b[0], target: a[0] });
    steps.push(Step::Ry { wire: a[0], angle: 0.3 });
    let layout = OutputLayout { prover_messages: vec![a], ..OutputLayout::default() };
    QueryAlgorithm::new(n1 + n2, steps, layout, 1).unwrap()
}

#[test]
fn reduction_preserves_success_and_doubles_queries() {
    let alg = one_query(1, 1);
    for beta in [[0u64, 0], [0, 1], [1, 0], [1, 1]] {
        let avg = algorithm_b_exhaustive(&alg, 1, 1, &beta).unwrap();
        assert_eq!(avg.max_x_queries, 2);
        assert_eq!(avg.choices, 8);
        assert!((avg.success - avg.direct).abs() < 1e-10, "{beta:?}: {} vs {}", avg.success, avg.direct);
    }
}

#[test]
fn reduction_of_query_free_algorithm() {
    let layout = OutputLayout { prover_messages: vec![vec![0]], ..OutputLayout::default() };
    let alg = QueryAlgorithm::<f64>::new(2, vec![Step::H { wire: 0 }], layout, 0).unwrap();
    let avg = algorithm_b_exhaustive(&alg, 1, 1, &[0, 1]).unwrap();
    assert_eq!(avg.max_x_queries, 0);
    assert!((avg.success - 0.5).abs() < 1e-12);
}

#[test]
fn reduction_rejects_bad_planting() {
    let alg = one_query(1, 2);
    let beta = [1u64, 2];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut c = ReductionChoices::sample(1, 2, &beta, &mut rng);
    assert!(c.z.iter().zip(&beta).all(|(z, b)| z != b));
    let run = algorithm_b::<f64>(&alg, 1, 2, &beta, &c).unwrap();
    assert_eq!(run.x_queries, 2);
    c.x = vec![1, 1, 0, 0];
    assert!(matches!(algorithm_b::<f64>(&alg, 1, 2, &beta, &c), Err(Error::Domain { .. })));
    c.x = vec![0; 4];
    assert!(matches!(algorithm_b::<f64>(&alg, 1, 2, &beta, &c), Err(Error::Domain { .. })));
}

#[test]
fn one_query_sweep_respects_search_bound() {
    for n2 in 1..=3usize {
        for step in 0..8 {
            let angle = step as f64 * std::f64::consts::PI / 8.0;
            let a = vec![0usize];
            let b: Vec<usize> = (1..1 + n2).collect();
            let steps = vec![
                Step::Ry { wire: 0, angle },
                Step::Oracle { round: 0, input: a.clone(), output: b.clone() },
                Step::Cx { control: 1, target: 0 },
                Step::Ry { wire: 0, angle: -angle },
            ];
            let layout = OutputLayout { prover_messages: vec![a], ..OutputLayout::default() };
            let alg = QueryAlgorithm::<f64>::new(1 + n2, steps, layout, 1).unwrap();
            let p = direct_search_success(&alg, 1, n2, &[0, 1]).unwrap();
            assert!(p <= 10.0 / (1u64 << n2) as f64 + 1e-12);
        }
    }
}
