//! The three-message Graph Isomorphism protocol, one block per copy.
//!
//! Per copy the prover sends `a = pi(G1)` as edge bits, the verifier a bit
//! `b`, and the prover a permutation index `s` with `s(G_b) = a`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{field, IpVerifierFn, Predicate, ProtocolSpec, ProverRole, Shape, TabulatedProver};
use crate::error::{Error, Result};
use crate::qcore::{mix, DensityMatrix, OutputLayout, QuantumPredicate, QueryAlgorithm, Step};
use crate::scalar::{creal, Real};

/// Largest supported vertex count.
pub const MAX_VERTICES: usize = 5;

#[derive(Deserialize)]
struct GraphRecord {
    vertices: usize,
    edges: Vec<[usize; 2]>,
}

/// Simple undirected graph on `0..vertices`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GraphRecord")]
pub struct Graph {
    vertices: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphRecord> for Graph {
    type Error = Error;

    fn try_from(r: GraphRecord) -> Result<Self> {
        Graph::new(r.vertices, &r.edges)
    }
}

impl Graph {
    pub fn new(vertices: usize, edges: &[[usize; 2]]) -> Result<Self> {
        if !(2..=MAX_VERTICES).contains(&vertices) {
            return Err(Error::domain("graph", format!("{vertices} vertices outside 2..={MAX_VERTICES}")));
        }
        let mut norm = Vec::with_capacity(edges.len());
        for &[a, b] in edges {
            if a == b || a >= vertices || b >= vertices {
                return Err(Error::domain("graph", format!("bad edge ({a}, {b})")));
            }
            norm.push([a.min(b), a.max(b)]);
        }
        norm.sort_unstable();
        norm.dedup();
        Ok(Graph { vertices, edges: norm })
    }

    pub fn from_bits(vertices: usize, bits: u64) -> Result<Self> {
        let edges: Vec<[usize; 2]> =
            pairs(vertices).enumerate().filter(|(i, _)| bits >> i & 1 == 1).map(|(_, p)| p).collect();
        Graph::new(vertices, &edges)
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Number of vertex pairs, the width of an edge-bit encoding.
    pub fn edge_slots(&self) -> usize {
        self.vertices * (self.vertices - 1) / 2
    }

    /// Bit `i` is set when the `i`-th pair (lexicographic, `a < b`) is an edge.
    pub fn edge_bits(&self) -> u64 {
        pairs(self.vertices)
            .enumerate()
            .filter(|(_, p)| self.edges.binary_search(p).is_ok())
            .fold(0, |acc, (i, _)| acc | 1 << i)
    }

    /// The image under `v -> perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Graph {
        let mut edges: Vec<[usize; 2]> = self
            .edges
            .iter()
            .map(|&[a, b]| {
                let (x, y) = (perm[a], perm[b]);
                [x.min(y), x.max(y)]
            })
            .collect();
        edges.sort_unstable();
        Graph { vertices: self.vertices, edges }
    }
}

fn pairs(n: usize) -> impl Iterator<Item = [usize; 2]> {
    (0..n).flat_map(move |a| (a + 1..n).map(move |b| [a, b]))
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// Bits needed for a permutation index, at least one.
pub fn perm_bits(n: usize) -> usize {
    let f = factorial(n);
    (64 - (f - 1).leading_zeros() as usize).max(1)
}

/// The `index`-th permutation of `0..n` in lexicographic order.
pub fn permutation_at(n: usize, index: u64) -> Result<Vec<usize>> {
    if index >= factorial(n) {
        return Err(Error::domain("permutation index", format!("{index} >= {n}!")));
    }
    let mut pool: Vec<usize> = (0..n).collect();
    let mut rest = index;
    let mut out = Vec::with_capacity(n);
    for i in (0..n).rev() {
        let f = factorial(i);
        out.push(pool.remove((rest / f) as usize));
        rest %= f;
    }
    Ok(out)
}

/// Inverse of [`permutation_at`].
pub fn permutation_index(perm: &[usize]) -> u64 {
    let n = perm.len();
    (0..n)
        .map(|i| perm[i + 1..].iter().filter(|&&x| x < perm[i]).count() as u64 * factorial(n - 1 - i))
        .sum()
}

fn all_permutations(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..factorial(n)).map(move |i| permutation_at(n, i).expect("index below n!"))
}

/// Lexicographically first `phi` with `phi(g0) = g1`.
pub fn isomorphism(g0: &Graph, g1: &Graph) -> Option<Vec<usize>> {
    if g0.vertices != g1.vertices || g0.edges.len() != g1.edges.len() {
        return None;
    }
    all_permutations(g0.vertices).find(|p| g0.permuted(p) == *g1)
}

/// Acceptance operator on the final permutation register.
pub(crate) fn acceptance<T: Real>(g0: &Graph, g1: &Graph, copies: usize, messages: &[u64]) -> Result<QuantumPredicate<T>> {
    let (e, p) = (g0.edge_slots(), perm_bits(g0.vertices));
    let mut accepted: Vec<u64> = vec![0];
    for j in 0..copies {
        let alpha = field(messages[0], j * e, e);
        let g = if field(messages[1], j, 1) == 0 { g0 } else { g1 };
        let ok: Vec<u64> = (0..factorial(g.vertices))
            .filter(|&s| g.permuted(&permutation_at(g.vertices, s).expect("index below n!")).edge_bits() == alpha)
            .collect();
        accepted = accepted.iter().flat_map(|&acc| ok.iter().map(move |&s| acc | s << (j * p))).collect();
    }
    QuantumPredicate::accepting_set(copies * p, accepted)
}

/// A protocol instance with its honest prover when the graphs are isomorphic.
#[derive(Clone, Debug, PartialEq)]
pub struct GiInstance<T: Real> {
    pub spec: ProtocolSpec<T>,
    pub honest: Option<ProverRole<T>>,
    pub witness: Option<Vec<usize>>,
}

/// Public-coin protocol with `copies` parallel blocks.
pub fn gi_protocol<T: Real>(g0: &Graph, g1: &Graph, copies: usize) -> Result<GiInstance<T>> {
    gi_protocol_with_shape(g0, g1, copies, Shape::Qam3)
}

/// As [`gi_protocol`]; `Shape::Ip3` recasts the challenge bits as private
/// coins the verifier echoes.
pub fn gi_protocol_with_shape<T: Real>(g0: &Graph, g1: &Graph, copies: usize, shape: Shape) -> Result<GiInstance<T>> {
    if copies == 0 {
        return Err(Error::domain("copies", "the protocol needs at least one copy"));
    }
    if g0.vertices != g1.vertices {
        return Err(Error::config("graphs must have the same vertex count"));
    }
    let (ip_verifier, coin_length) = match shape {
        Shape::Qam3 => (None, 0),
        Shape::Ip3 => (Some(IpVerifierFn::CoinEcho), copies),
        Shape::Qam2k1 => {
            return Err(Error::WrongShape { expected: "qam3 or ip3".into(), got: shape.to_string() });
        }
    };
    let spec = ProtocolSpec {
        shape,
        message_lengths: vec![copies * g0.edge_slots(), copies],
        final_qubits: copies * perm_bits(g0.vertices),
        coin_length,
        ip_verifier,
        predicate: Predicate::GraphIsomorphism { g0: g0.clone(), g1: g1.clone(), copies },
        completeness_error: T::zero(),
        soundness_error: T::lit(0.5).powi(copies as i32),
    };
    spec.validate()?;
    let witness = isomorphism(g0, g1);
    let honest = match witness {
        Some(_) => Some(gi_honest_prover(g0, g1, copies)?),
        None => None,
    };
    Ok(GiInstance { spec, honest, witness })
}

/// The honest prover with its random permutations averaged out.
pub fn gi_honest_prover<T: Real>(g0: &Graph, g1: &Graph, copies: usize) -> Result<ProverRole<T>> {
    let phi = isomorphism(g0, g1).ok_or_else(|| Error::NotConstructible("graphs are not isomorphic".into()))?;
    let n = g0.vertices;
    let (p_bits, weight) = (perm_bits(n), T::one() / T::from_count(factorial(n)));
    let mut first: BTreeMap<u64, T> = BTreeMap::new();
    // (alpha, beta) -> answers of the permutations consistent with alpha
    let mut answers: BTreeMap<(u64, u64), Vec<(T, DensityMatrix<T>)>> = BTreeMap::new();
    for pi in all_permutations(n) {
        let alpha = g1.permuted(&pi).edge_bits();
        *first.entry(alpha).or_insert_with(T::zero) += weight;
        let composed: Vec<usize> = phi.iter().map(|&v| pi[v]).collect();
        for (beta, sigma) in [(0, permutation_index(&composed)), (1, permutation_index(&pi))] {
            answers.entry((alpha, beta)).or_default().push((weight, DensityMatrix::basis(p_bits, sigma)?));
        }
    }
    let mut finals = BTreeMap::new();
    for ((alpha, beta), branches) in answers {
        finals.insert(vec![alpha, beta], mix(&branches, true)?);
    }
    let single = TabulatedProver::new(vec![BTreeMap::from([(vec![], first)])], finals, p_bits)?;
    let strategy = if copies == 1 {
        single
    } else {
        TabulatedProver::parallel(&vec![single; copies], &[g0.edge_slots(), 1])?
    };
    Ok(ProverRole::Honest { strategy, witness: Some(phi) })
}

/// Black-box simulator that runs the honest prover in superposition and asks
/// the verifier oracle once for all challenge bits.
///
/// Wires per copy `j`, in blocks: permutation register `P_j`, first message
/// `A_j`, challenge `B_j`, answer `C_j`.
pub fn gi_witness_simulator<T: Real>(spec: &ProtocolSpec<T>, witness: Option<&[usize]>) -> Result<QueryAlgorithm<T>> {
    let phi = witness.ok_or_else(|| Error::NotConstructible("the simulator needs an isomorphism".into()))?;
    let Predicate::GraphIsomorphism { g0, g1, copies } = &spec.predicate else {
        return Err(Error::WrongShape { expected: "graph isomorphism protocol".into(), got: format!("{:?}", spec.predicate) });
    };
    if g0.permuted(phi) != *g1 {
        return Err(Error::NotConstructible("witness does not map G0 to G1".into()));
    }
    let (n, copies) = (g0.vertices, *copies);
    let (e, p) = (g0.edge_slots(), perm_bits(n));
    let nf = factorial(n);
    let block = |offset: usize, width: usize| -> Vec<usize> { (offset..offset + width).collect() };
    let base = |j: usize| j * (2 * p + e + 1);
    let wires_p = |j| block(base(j), p);
    let wires_a = |j| block(base(j) + p, e);
    let wire_b = |j| base(j) + p + e;
    let wires_c = |j| block(base(j) + p + e + 1, p);

    // real reflection sending |0> to the uniform state on the first n! values
    let dim = 1usize << p;
    let amp = T::one() / T::from_count(nf).sqrt();
    let u: Vec<T> = (0..dim).map(|i| if (i as u64) < nf { amp } else { T::zero() }).collect();
    let v: Vec<T> = (0..dim).map(|i| if i == 0 { T::one() - u[0] } else { -u[i] }).collect();
    let vv = v.iter().fold(T::zero(), |a, &x| a + x * x);
    let prep: Vec<Vec<_>> = (0..dim)
        .map(|r| {
            (0..dim)
                .map(|c| {
                    let id = if r == c { T::one() } else { T::zero() };
                    let refl = if vv > T::zero() { T::lit(2.0) * v[r] * v[c] / vv } else { T::zero() };
                    creal(id - refl)
                })
                .collect()
        })
        .collect();

    let image: Vec<u64> = (0..dim as u64)
        .map(|i| if i < nf { g1.permuted(&permutation_at(n, i).expect("index below n!")).edge_bits() } else { 0 })
        .collect();
    let answer: Vec<u64> = (0..2 * dim as u64)
        .map(|x| {
            let (i, beta) = (x % dim as u64, x / dim as u64);
            if i >= nf {
                return 0;
            }
            if beta == 1 {
                return i;
            }
            let pi = permutation_at(n, i).expect("index below n!");
            permutation_index(&phi.iter().map(|&v| pi[v]).collect::<Vec<_>>())
        })
        .collect();

    let mut steps = Vec::new();
    for j in 0..copies {
        steps.push(Step::Unitary { wires: wires_p(j), matrix: prep.clone() });
        steps.push(Step::Xor { input: wires_p(j), output: wires_a(j), table: image.clone(), controls: vec![] });
    }
    let all_a: Vec<usize> = (0..copies).flat_map(wires_a).collect();
    let all_b: Vec<usize> = (0..copies).map(wire_b).collect();
    steps.push(Step::Oracle { round: 0, input: all_a.clone(), output: all_b.clone() });
    for j in 0..copies {
        let input = [wires_p(j), vec![wire_b(j)]].concat();
        steps.push(Step::Xor { input, output: wires_c(j), table: answer.clone(), controls: vec![] });
    }
    let layout = OutputLayout {
        prover_messages: vec![all_a],
        verifier_messages: vec![all_b],
        final_message: (0..copies).flat_map(wires_c).collect(),
        failure_flag: None,
    };
    QueryAlgorithm::new(copies * (2 * p + e + 1), steps, layout, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{optimal_cheater, run_protocol, VerifierRole};

    fn path3() -> Graph {
        Graph::new(3, &[[0, 1], [1, 2]]).unwrap()
    }

    #[test]
    fn permutation_indexing_round_trips() {
        for n in 1..=5 {
            for i in 0..factorial(n) {
                assert_eq!(permutation_index(&permutation_at(n, i).unwrap()), i);
            }
        }
        assert_eq!(permutation_at(3, 0).unwrap(), vec![0, 1, 2]);
        assert_eq!(permutation_at(3, 5).unwrap(), vec![2, 1, 0]);
        assert_eq!(perm_bits(3), 3);
        assert_eq!(perm_bits(4), 5);
        assert_eq!(perm_bits(5), 7);
    }

    #[test]
    fn edge_bits_round_trip() {
        let g = path3();
        assert_eq!(g.edge_bits(), 0b101);
        assert_eq!(Graph::from_bits(3, 0b101).unwrap(), g);
        let json = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<Graph>(&json).unwrap(), g);
        assert!(serde_json::from_str::<Graph>(r#"{"vertices":3,"edges":[[0,0]]}"#).is_err());
    }

    #[test]
    fn isomorphism_search() {
        let k3 = Graph::new(3, &[[0, 1], [1, 2], [0, 2]]).unwrap();
        assert!(isomorphism(&path3(), &k3).is_none());
        let other = Graph::new(3, &[[0, 2], [1, 2]]).unwrap();
        let phi = isomorphism(&path3(), &other).unwrap();
        assert_eq!(path3().permuted(&phi), other);
    }

    #[test]
    fn honest_prover_is_complete() {
        let g1 = Graph::new(3, &[[0, 2], [0, 1]]).unwrap();
        for copies in 1..=2 {
            let inst = gi_protocol::<f64>(&path3(), &g1, copies).unwrap();
            let d = run_protocol(&inst.spec, inst.honest.as_ref().unwrap(), &VerifierRole::HonestArthur).unwrap();
            assert!((d.acceptance - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn non_isomorphic_cheating_is_half_per_copy() {
        let k3 = Graph::new(3, &[[0, 1], [1, 2], [0, 2]]).unwrap();
        let inst = gi_protocol::<f64>(&path3(), &k3, 1).unwrap();
        assert!(inst.honest.is_none());
        assert!(matches!(gi_witness_simulator(&inst.spec, None), Err(Error::NotConstructible(_))));
        let (opt, _) = optimal_cheater(&inst.spec).unwrap();
        assert!((opt - 0.5).abs() < 1e-12);
        let c4 = Graph::new(4, &[[0, 1], [1, 2], [2, 3], [0, 3]]).unwrap();
        let star = Graph::new(4, &[[0, 1], [0, 2], [0, 3]]).unwrap();
        let (opt, _) = optimal_cheater(&gi_protocol::<f64>(&c4, &star, 1).unwrap().spec).unwrap();
        assert!((opt - 0.5).abs() < 1e-12);
    }

    #[test]
    fn simulator_is_one_query() {
        let inst = gi_protocol::<f64>(&path3(), &path3(), 1).unwrap();
        let alg = gi_witness_simulator(&inst.spec, inst.witness.as_deref()).unwrap();
        assert_eq!(alg.oracle_slots(), 1);
        assert_eq!(alg.num_qubits, 3 + 3 + 1 + 3);
    }
}
