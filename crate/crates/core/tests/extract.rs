use zklab_core::extract::{
    algorithm_z, algorithm_z_k, algorithm_z_prime, build_joint, markov_network_check, sims, DeltaPolicy,
    ExtractConfig, HashingRule, Mode, OracleSource,
};
use zklab_core::protocols::{gi_protocol, gi_protocol_with_shape, gi_witness_simulator, Shape};
use zklab_core::Error;

type Cfg = ExtractConfig<f64>;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

#[test]
fn witness_simulator_is_always_accepted() {
    let (g0, g1) = sims::isomorphic_pair(3).unwrap();
    let gi = gi_protocol::<f64>(&g0, &g1, 1).unwrap();
    let sim = gi_witness_simulator(&gi.spec, gi.witness.as_deref()).unwrap();
    let out = algorithm_z(&gi.spec, &sim, &Cfg::default()).unwrap();
    assert!(close(out.q, 1.0));
    assert!(close(out.report.cheat_prob, 1.0));
    assert!(out.report.chain_holds, "{:#?}", out.report.chain);
    assert!(out.report.b_unused);
}

#[test]
fn nonisomorphic_simulators_respect_chain() {
    let (g0, g1) = sims::non_isomorphic_pair(3).unwrap();
    let gi = gi_protocol::<f64>(&g0, &g1, 1).unwrap();
    let cases = [
        (sims::gi_fixed_transcript_simulator(&gi.spec).unwrap(), 0.5),
        (sims::gi_guessing_simulator(&gi.spec).unwrap(), 0.25),
        (sims::gi_query_then_commit_simulator(&gi.spec).unwrap(), 0.75),
    ];
    for (sim, q) in cases {
        let r = algorithm_z(&gi.spec, &sim, &Cfg::default()).unwrap().report;
        assert!(close(r.q, q), "q = {}, expected {q}", r.q);
        assert!(r.cheat_prob <= 0.5 + 1e-12);
        assert!(close(r.optimal_cheat.unwrap(), 0.5));
        assert!(r.chain_holds, "{:#?}", r.chain);
        assert!(r.expected_s_within_bounds());
        assert!(r.cheat_prob + 1e-12 >= r.q * r.q / 40.0);
    }
}

#[test]
fn four_vertex_instance_runs_exactly() {
    let (g0, g1) = sims::non_isomorphic_pair(4).unwrap();
    let gi = gi_protocol::<f64>(&g0, &g1, 1).unwrap();
    let sim = sims::gi_guessing_simulator(&gi.spec).unwrap();
    let r = algorithm_z(&gi.spec, &sim, &Cfg::default()).unwrap().report;
    assert_eq!(r.worlds, 1 << 18);
    assert!(r.chain_holds);
}

#[test]
fn echo_witness_over_two_rounds() {
    let spec = sims::echo_protocol::<f64>(2, false).unwrap();
    let sim = sims::echo_witness_simulator(&spec).unwrap();
    let cfg = Cfg { t: 2, ..Cfg::default() };
    let out = algorithm_z_k(&spec, &sim, &cfg).unwrap();
    assert_eq!(out.report.worlds, 1 << 20);
    assert!(close(out.q, 1.0));
    assert!(out.report.chain_holds, "{:#?}", out.report.chain);
}

#[test]
fn guessing_protocol_over_two_rounds() {
    let spec = sims::echo_protocol::<f64>(2, true).unwrap();
    for uniform in [false, true] {
        let sim = sims::oracle_ignoring_simulator(&spec, uniform).unwrap();
        let r = algorithm_z_k(&spec, &sim, &Cfg::default()).unwrap().report;
        assert_eq!(r.worlds, 1 << 12);
        assert!(close(r.q, 0.25));
        assert!(close(r.cheat_prob, 0.25));
        assert!(r.chain_holds, "{:#?}", r.chain);
    }
}

#[test]
fn one_round_multi_round_matches_three_round() {
    let (g0, g1) = sims::non_isomorphic_pair(3).unwrap();
    let gi = gi_protocol::<f64>(&g0, &g1, 1).unwrap();
    let sim = sims::gi_query_then_commit_simulator(&gi.spec).unwrap();
    let a = algorithm_z(&gi.spec, &sim, &Cfg::default()).unwrap().report;
    let b = algorithm_z_k(&gi.spec, &sim, &Cfg::default()).unwrap().report;
    assert_eq!(a, b);
}

#[test]
fn last_message_hashing_leaks_the_next_challenge() {
    let spec = sims::prefix_probe_protocol::<f64>().unwrap();
    let mc = Mode::MonteCarlo { samples: 1 << 14, seed: 7 };
    let sim = sims::prefix_probe_simulator(&spec).unwrap();
    let run = |rule| {
        algorithm_z_k(&spec, &sim, &Cfg { mode: mc, rule, ..Cfg::default() }).unwrap().report
    };
    let full = run(HashingRule::FullPrefix);
    let last = run(HashingRule::LastMessage);
    let bound = full.s_bounds[1];
    assert!(close(bound, 10.0 / 16.0));
    assert!(close(last.rounds[1].expected_s, 1.0));
    assert!(last.rounds[1].expected_s > bound);
    assert!(full.rounds[1].expected_s < 0.25, "{}", full.rounds[1].expected_s);
}

#[test]
fn private_coin_gi_matches_all_functions() {
    let (g0, g1) = sims::non_isomorphic_pair(3).unwrap();
    let gi = gi_protocol_with_shape::<f64>(&g0, &g1, 1, Shape::Ip3).unwrap();
    for sim in [sims::gi_guessing_simulator(&gi.spec).unwrap(), sims::gi_query_then_commit_simulator(&gi.spec).unwrap()] {
        let r = algorithm_z_prime(&gi.spec, &sim, &Cfg::default()).unwrap().report;
        assert!(close(r.q, r.q_functions.unwrap()));
        assert!(r.markov_error.unwrap() < 1e-10);
        assert!(r.chain_holds, "{:#?}", r.chain);
    }
}

#[test]
fn markov_property_and_its_negative_control() {
    let spec = sims::and_protocol::<f64>().unwrap();
    let sim = sims::and_copy_simulator().unwrap();
    let cfg = Cfg { source: OracleSource::AllFunctions, ..Cfg::default() };
    let joint = build_joint(&spec, &sim, &cfg).unwrap();
    assert_eq!(joint.worlds, 4);
    assert!(markov_network_check(&joint).unwrap() < 1e-12);
    let leaky = sims::coin_leaking_joint(&joint, 1).unwrap();
    assert!(close(markov_network_check(&leaky).unwrap(), 1.0));
    let r = algorithm_z_prime(&spec, &sim, &Cfg::default()).unwrap().report;
    assert!(r.chain_holds, "{:#?}", r.chain);
}

#[test]
fn errors_are_typed() {
    let (g0, g1) = sims::non_isomorphic_pair(3).unwrap();
    let gi = gi_protocol::<f64>(&g0, &g1, 1).unwrap();
    let sim = sims::gi_guessing_simulator(&gi.spec).unwrap();
    let zero = Cfg { t: 0, ..Cfg::default() };
    assert!(matches!(algorithm_z(&gi.spec, &sim, &zero), Err(Error::BudgetViolation { used: 1, budget: 0 })));
    assert!(matches!(algorithm_z_prime(&gi.spec, &sim, &Cfg::default()), Err(Error::WrongShape { .. })));
    let tiny = Cfg { enum_limit: 16, ..Cfg::default() };
    assert!(matches!(algorithm_z(&gi.spec, &sim, &tiny), Err(Error::EnumerationLimit { .. })));
    let bad_delta = Cfg { delta: DeltaPolicy::Fixed(1.5), ..Cfg::default() };
    assert!(matches!(algorithm_z(&gi.spec, &sim, &bad_delta), Err(Error::Domain { .. })));
    assert!(matches!(sims::echo_protocol::<f64>(0, true), Err(Error::DegenerateSpec(_))));
}

#[test]
fn monte_carlo_is_seeded() {
    let (g0, g1) = sims::non_isomorphic_pair(3).unwrap();
    let gi = gi_protocol::<f64>(&g0, &g1, 1).unwrap();
    let sim = sims::gi_query_then_commit_simulator(&gi.spec).unwrap();
    let cfg = Cfg { mode: Mode::MonteCarlo { samples: 2000, seed: 11 }, ..Cfg::default() };
    let a = algorithm_z(&gi.spec, &sim, &cfg).unwrap();
    let b = algorithm_z(&gi.spec, &sim, &cfg).unwrap();
    assert_eq!(a.q, b.q);
    assert!((a.q - 0.75).abs() < 5.0 * a.report.q_std_error + 1e-9);
}
