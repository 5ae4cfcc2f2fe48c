//! Small simulators and protocols used to exercise extraction.

use super::joint::JointDistribution;
use crate::error::{Error, Result};
use crate::protocols::{
    isomorphism, perm_bits, permutation_index, Graph, IpVerifierFn, Predicate, ProtocolSpec, Shape,
};
use crate::qcore::{DensityMatrix, OutputLayout, QueryAlgorithm, Step};
use crate::scalar::Real;

/// Declared soundness for toy protocols with no real soundness; chains use
/// the computed optimum instead.
fn nominal<T: Real>() -> T {
    T::lit(0.5)
}

fn span(start: usize, width: usize) -> Vec<usize> {
    (start..start + width).collect()
}

fn set_bits<T: Real>(wires: &[usize], value: u64) -> impl Iterator<Item = Step<T>> + '_ {
    wires.iter().enumerate().filter(move |(i, _)| value >> i & 1 == 1).map(|(_, &wire)| Step::X { wire })
}

/// A non-isomorphic pair on 3 or 4 vertices: path vs triangle, or 4-cycle vs star.
pub fn non_isomorphic_pair(vertices: usize) -> Result<(Graph, Graph)> {
    match vertices {
        3 => Ok((Graph::new(3, &[[0, 1], [1, 2]])?, Graph::new(3, &[[0, 1], [0, 2], [1, 2]])?)),
        4 => Ok((Graph::new(4, &[[0, 1], [1, 2], [2, 3], [0, 3]])?, Graph::new(4, &[[0, 1], [0, 2], [0, 3]])?)),
        _ => Err(Error::domain("vertices", format!("no stock pair on {vertices} vertices"))),
    }
}

/// A path and a relabelled copy of it.
pub fn isomorphic_pair(vertices: usize) -> Result<(Graph, Graph)> {
    if !(3..=5).contains(&vertices) {
        return Err(Error::domain("vertices", format!("no stock pair on {vertices} vertices")));
    }
    let path: Vec<[usize; 2]> = (0..vertices - 1).map(|v| [v, v + 1]).collect();
    let g0 = Graph::new(vertices, &path)?;
    let mut perm: Vec<usize> = (0..vertices).collect();
    perm.rotate_left(1);
    perm.swap(0, vertices - 1);
    let g1 = g0.permuted(&perm);
    Ok((g0, g1))
}

fn gi_parts<T: Real>(spec: &ProtocolSpec<T>) -> Result<(&Graph, &Graph, usize)> {
    match &spec.predicate {
        Predicate::GraphIsomorphism { g0, g1, copies } => Ok((g0, g1, *copies)),
        p => Err(Error::WrongShape { expected: "graph isomorphism protocol".into(), got: format!("{p:?}") }),
    }
}

/// Ignores the oracle: sends `G1` in every copy and answers with the identity.
pub fn gi_fixed_transcript_simulator<T: Real>(spec: &ProtocolSpec<T>) -> Result<QueryAlgorithm<T>> {
    let (_, g1, copies) = gi_parts(spec)?;
    let (e, p) = (g1.edge_slots(), perm_bits(g1.vertices()));
    let a = span(0, copies * e);
    let c = span(copies * e, copies * p);
    let steps = (0..copies).flat_map(|j| set_bits(&a[j * e..(j + 1) * e], g1.edge_bits()).collect::<Vec<_>>()).collect();
    let layout = OutputLayout { prover_messages: vec![a], verifier_messages: vec![], final_message: c, failure_flag: None };
    QueryAlgorithm::new(copies * (e + p), steps, layout, 0)
}

/// Sends a uniformly random graph, asks the oracle for the challenge, and
/// answers whenever the graph happens to match it.
pub fn gi_guessing_simulator<T: Real>(spec: &ProtocolSpec<T>) -> Result<QueryAlgorithm<T>> {
    let (g0, g1, copies) = gi_parts(spec)?;
    let (n, e, p) = (g0.vertices(), g0.edge_slots(), perm_bits(g0.vertices()));
    let block = e + 1 + p;
    let wires_a = |j: usize| span(j * block, e);
    let wire_b = |j: usize| j * block + e;
    let wires_c = |j: usize| span(j * block + e + 1, p);
    let answer: Vec<u64> = (0..2u64 << e)
        .map(|x| {
            let target = Graph::from_bits(n, x & ((1 << e) - 1))?;
            let source = if x >> e == 0 { g0 } else { g1 };
            Ok(isomorphism(source, &target).map_or(0, |s| permutation_index(&s)))
        })
        .collect::<Result<_>>()?;
    let all_a: Vec<usize> = (0..copies).flat_map(wires_a).collect();
    let all_b: Vec<usize> = (0..copies).map(wire_b).collect();
    let mut steps: Vec<Step<T>> = all_a.iter().map(|&wire| Step::H { wire }).collect();
    steps.push(Step::Oracle { round: 0, input: all_a.clone(), output: all_b.clone() });
    for j in 0..copies {
        let input = [wires_a(j), vec![wire_b(j)]].concat();
        steps.push(Step::Xor { input, output: wires_c(j), table: answer.clone(), controls: vec![] });
    }
    let layout = OutputLayout {
        prover_messages: vec![all_a],
        verifier_messages: vec![all_b],
        final_message: (0..copies).flat_map(wires_c).collect(),
        failure_flag: None,
    };
    QueryAlgorithm::new(copies * block, steps, layout, 1)
}

/// Queries the oracle at `G1`, then commits to `G0` or `G1` according to the
/// answer and replies with the identity. Single copy only; accepted with
/// probability 3/4 against a pairwise independent hash.
pub fn gi_query_then_commit_simulator<T: Real>(spec: &ProtocolSpec<T>) -> Result<QueryAlgorithm<T>> {
    let (g0, g1, copies) = gi_parts(spec)?;
    if copies != 1 {
        return Err(Error::config("query-then-commit simulator handles one copy"));
    }
    let (e, p) = (g0.edge_slots(), perm_bits(g0.vertices()));
    let probe = span(0, e);
    let a = span(e, e);
    let b = 2 * e;
    let c = span(2 * e + 1, p);
    let mut steps: Vec<Step<T>> = set_bits(&probe, g1.edge_bits()).collect();
    steps.push(Step::Oracle { round: 0, input: probe, output: vec![b] });
    steps.push(Step::Xor { input: vec![b], output: a.clone(), table: vec![g0.edge_bits(), g1.edge_bits()], controls: vec![] });
    let layout = OutputLayout { prover_messages: vec![a], verifier_messages: vec![vec![b]], final_message: c, failure_flag: None };
    QueryAlgorithm::new(2 * e + 1 + p, steps, layout, 1)
}

/// `k`-round protocol on single bits. With `predict` the prover must guess
/// every challenge; otherwise it must echo each challenge in its next
/// message and finally in its quantum register.
pub fn echo_protocol<T: Real>(k: usize, predict: bool) -> Result<ProtocolSpec<T>> {
    if k == 0 {
        return Err(Error::DegenerateSpec("no verifier rounds".into()));
    }
    let spec = ProtocolSpec {
        shape: if k == 1 { Shape::Qam3 } else { Shape::Qam2k1 },
        message_lengths: vec![1; 2 * k],
        final_qubits: 1,
        coin_length: 0,
        ip_verifier: None,
        predicate: Predicate::Echo { predict },
        completeness_error: T::zero(),
        soundness_error: if predict { T::one() / T::from_count(1 << k) } else { nominal() },
    };
    spec.validate()?;
    Ok(spec)
}

/// Honest simulator for the echo protocol: asks each round's oracle on the
/// prefix so far and echoes the answer. Uses `k` queries.
pub fn echo_witness_simulator<T: Real>(spec: &ProtocolSpec<T>) -> Result<QueryAlgorithm<T>> {
    if spec.predicate != (Predicate::Echo { predict: false }) || spec.message_lengths.iter().any(|&n| n != 1) {
        return Err(Error::WrongShape { expected: "single-bit echo protocol".into(), got: format!("{:?}", spec.predicate) });
    }
    let k = spec.k();
    // wire 2i carries message 2i (prover), 2i+1 the oracle answer; wire 2k is the final register
    let mut steps = Vec::new();
    for i in 0..k {
        steps.push(Step::Oracle { round: i, input: span(0, 2 * i + 1), output: vec![2 * i + 1] });
        steps.push(Step::Cx { control: 2 * i + 1, target: 2 * i + 2 });
    }
    let layout = OutputLayout {
        prover_messages: (0..k).map(|i| vec![2 * i]).collect(),
        verifier_messages: (0..k).map(|i| vec![2 * i + 1]).collect(),
        final_message: vec![2 * k],
        failure_flag: None,
    };
    QueryAlgorithm::new(2 * k + 1, steps, layout, k)
}

/// Makes no queries; prover registers are uniform when `uniform`, zero otherwise.
pub fn oracle_ignoring_simulator<T: Real>(spec: &ProtocolSpec<T>, uniform: bool) -> Result<QueryAlgorithm<T>> {
    let k = spec.k();
    let mut next = 0;
    let prover: Vec<Vec<usize>> = (0..k)
        .map(|i| {
            let w = span(next, spec.message_lengths[2 * i]);
            next += w.len();
            w
        })
        .collect();
    let final_message = span(next, spec.final_qubits);
    let steps = if uniform { prover.iter().flatten().map(|&wire| Step::H { wire }).collect() } else { vec![] };
    let layout = OutputLayout { prover_messages: prover, verifier_messages: vec![], final_message, failure_flag: None };
    QueryAlgorithm::new(next + spec.final_qubits, steps, layout, 0)
}

/// Two rounds, messages of widths 4, 1, 1, 4, accepting everything.
pub fn prefix_probe_protocol<T: Real>() -> Result<ProtocolSpec<T>> {
    let spec = ProtocolSpec {
        shape: Shape::Qam2k1,
        message_lengths: vec![4, 1, 1, 4],
        final_qubits: 1,
        coin_length: 0,
        ip_verifier: None,
        predicate: Predicate::AlwaysAccept,
        completeness_error: T::zero(),
        soundness_error: nominal(),
    };
    spec.validate()?;
    Ok(spec)
}

/// For [`prefix_probe_protocol`]: picks a random bit `z`, asks the
/// second-round oracle about the point it would see for prefix `(0, 0, z)`,
/// sends the answer as its first message and `z` as its second.
///
/// If the second-round function only reads the last prover message, the
/// answer to that query is exactly the challenge that follows, so the
/// second challenge is fully predictable from the prefix.
pub fn prefix_probe_simulator<T: Real>(spec: &ProtocolSpec<T>) -> Result<QueryAlgorithm<T>> {
    if spec.message_lengths != [4, 1, 1, 4] {
        return Err(Error::config("prefix probe expects message widths [4, 1, 1, 4]"));
    }
    let (a1, b1, a3, y, c) = (span(0, 4), 4, 5, span(6, 4), 10);
    let input = [a1.clone(), vec![b1, a3]].concat();
    let mut steps = vec![Step::H { wire: a3 }, Step::Oracle { round: 1, input, output: y.clone() }];
    steps.extend(a1.iter().zip(&y).map(|(&target, &control)| Step::Cx { control, target }));
    let layout =
        OutputLayout { prover_messages: vec![a1, vec![a3]], verifier_messages: vec![], final_message: vec![c], failure_flag: None };
    QueryAlgorithm::new(11, steps, layout, 1)
}

/// Private-coin protocol on single bits with reply `r & a`, accepting everything.
pub fn and_protocol<T: Real>() -> Result<ProtocolSpec<T>> {
    let spec = ProtocolSpec {
        shape: Shape::Ip3,
        message_lengths: vec![1, 1],
        final_qubits: 1,
        coin_length: 1,
        ip_verifier: Some(IpVerifierFn::And),
        predicate: Predicate::AlwaysAccept,
        completeness_error: T::zero(),
        soundness_error: nominal(),
    };
    spec.validate()?;
    Ok(spec)
}

/// For [`and_protocol`]: random `a`, one query, reply copied to the final register.
pub fn and_copy_simulator<T: Real>() -> Result<QueryAlgorithm<T>> {
    let steps = vec![Step::H { wire: 0 }, Step::Oracle { round: 0, input: vec![0], output: vec![1] }, Step::Cx { control: 1, target: 2 }];
    let layout = OutputLayout { prover_messages: vec![vec![0]], verifier_messages: vec![vec![1]], final_message: vec![2], failure_flag: None };
    QueryAlgorithm::new(3, steps, layout, 1)
}

/// Replaces every final state by `|coins>`: a joint no query algorithm can
/// produce, which breaks the Markov property whenever the reply hides the coins.
pub fn coin_leaking_joint<T: Real>(joint: &JointDistribution<T>, final_qubits: usize) -> Result<JointDistribution<T>> {
    let mut out = joint.clone();
    for e in &mut out.entries {
        e.mass = DensityMatrix::basis(final_qubits, e.coins.unwrap_or(0))?.scaled(e.probability);
    }
    Ok(out)
}
