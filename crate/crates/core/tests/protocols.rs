use std::collections::BTreeMap;

use zklab_core::extract::sims;
use zklab_core::fieldhash::{enumerate_family, DEFAULT_ENUM_LIMIT};
use zklab_core::protocols::{
    gi_honest_prover, gi_protocol, optimal_cheater, parallel_compose, run_protocol, ProverRole, TabulatedProver,
    TranscriptDistribution, VerifierRole,
};
use zklab_core::HashFamily;

fn law(dist: &TranscriptDistribution<f64>) -> BTreeMap<Vec<u64>, f64> {
    let mut out = BTreeMap::new();
    for e in &dist.entries {
        *out.entry(e.transcript.classical_messages.clone()).or_insert(0.0) += e.probability;
    }
    out
}

fn distance(a: &BTreeMap<Vec<u64>, f64>, b: &BTreeMap<Vec<u64>, f64>) -> f64 {
    a.keys().chain(b.keys()).map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs()).fold(0.0, f64::max)
}

/// Averaging hash verifiers over the family reproduces the honest verifier.
#[test]
fn hash_verifiers_average_to_honest_arthur() {
    for iso in [true, false] {
        let (g0, g1) = if iso { sims::isomorphic_pair(3).unwrap() } else { sims::non_isomorphic_pair(3).unwrap() };
        let gi = gi_protocol::<f64>(&g0, &g1, 1).unwrap();
        let prover = if iso {
            gi_honest_prover(&g0, &g1, 1).unwrap()
        } else {
            ProverRole::Tabulated(optimal_cheater(&gi.spec).unwrap().1)
        };
        let honest = run_protocol(&gi.spec, &prover, &VerifierRole::HonestArthur).unwrap();
        let family = HashFamily::new(gi.spec.message_lengths[0] as u8, 1, 3).unwrap();
        let mut avg = BTreeMap::new();
        let mut acceptance = 0.0;
        let mut members = 0.0;
        for h in enumerate_family(&family, DEFAULT_ENUM_LIMIT).unwrap() {
            let d = run_protocol(&gi.spec, &prover, &VerifierRole::HashArthur { hashes: vec![h] }).unwrap();
            for (k, p) in law(&d) {
                *avg.entry(k).or_insert(0.0) += p;
            }
            acceptance += d.acceptance;
            members += 1.0;
        }
        avg.values_mut().for_each(|p| *p /= members);
        assert!(distance(&avg, &law(&honest)) < 1e-10);
        assert!((acceptance / members - honest.acceptance).abs() < 1e-10);
    }
}

#[test]
fn composed_cheating_multiplies() {
    let (g0, g1) = sims::non_isomorphic_pair(3).unwrap();
    let gi = gi_protocol::<f64>(&g0, &g1, 1).unwrap();
    let (value, cheater) = optimal_cheater(&gi.spec).unwrap();
    for copies in 1..=3 {
        let spec = parallel_compose(&gi.spec, copies).unwrap();
        let prover = TabulatedProver::parallel(&vec![cheater.clone(); copies], &gi.spec.message_lengths).unwrap();
        let d = run_protocol(&spec, &ProverRole::Tabulated(prover), &VerifierRole::HonestArthur).unwrap();
        assert!((d.acceptance - value.powi(copies as i32)).abs() < 1e-10);
        assert!((d.total_probability() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn honest_prover_is_complete_for_every_stock_pair() {
    for v in 3..=5 {
        let (g0, g1) = sims::isomorphic_pair(v).unwrap();
        let gi = gi_protocol::<f64>(&g0, &g1, 1).unwrap();
        let d = run_protocol(&gi.spec, &gi_honest_prover(&g0, &g1, 1).unwrap(), &VerifierRole::HonestArthur).unwrap();
        assert!((d.acceptance - 1.0).abs() < 1e-10, "{v} vertices");
    }
}
