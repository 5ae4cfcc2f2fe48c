//! Protocol shapes, predicates and party roles.
//!
//! Classical messages are integers; message `i` occupies `message_lengths[i]`
//! bits. A prefix `a_1 .. a_j` is packed little-endian, `a_1` in the low bits,
//! which is also the layout of the hash oracle inputs.

mod gi;
mod roles;
mod run;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::QuantumPredicate;
use crate::scalar::Real;

pub use gi::{
    gi_honest_prover, gi_protocol, gi_protocol_with_shape, gi_witness_simulator, isomorphism, perm_bits,
    permutation_at, permutation_index, GiInstance, Graph,
};
pub use roles::{ProverRole, TabulatedProver, VerifierRole};
pub use run::{
    as_function_oracle, optimal_cheater, run_protocol, sample_protocol, verifier_response, Response, Transcript,
    TranscriptDistribution, TranscriptEntry,
};

/// Widest classical message.
pub const MAX_MESSAGE_BITS: usize = 16;
/// Widest packed transcript prefix that may index an oracle table.
pub const MAX_PREFIX_BITS: usize = 24;

/// The three protocol shapes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// Three-round public-coin protocol.
    Qam3,
    /// Three-round private-coin protocol.
    Ip3,
    /// `2k+1`-round public-coin protocol.
    Qam2k1,
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Shape::Qam3 => "qam3",
            Shape::Ip3 => "ip3",
            Shape::Qam2k1 => "qam2k1",
        })
    }
}

/// The private-coin verifier's response `V^r(a)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IpVerifierFn {
    /// Sends its coins; requires `n2 = n_c`.
    CoinEcho,
    /// Bitwise `r & a`; requires `n1 = n2 = n_c`.
    And,
    /// `table[a | r << n1]`.
    Table { table: Vec<u64> },
    /// Independent copies of `inner` acting on consecutive bit blocks.
    Parallel { copies: usize, n1: usize, n2: usize, coin_length: usize, inner: Box<IpVerifierFn> },
}

impl IpVerifierFn {
    pub fn respond(&self, n1: usize, n2: usize, coin_length: usize, coins: u64, alpha: u64) -> Result<u64> {
        Ok(match self {
            IpVerifierFn::CoinEcho => field(coins, 0, coin_length),
            IpVerifierFn::And => coins & alpha,
            IpVerifierFn::Table { table } => {
                let idx = (alpha | (coins << n1)) as usize;
                let v = *table
                    .get(idx)
                    .ok_or_else(|| Error::config(format!("verifier table has no entry for index {idx}")))?;
                if v >> n2 != 0 {
                    return Err(Error::config(format!("verifier response {v} wider than {n2} bits")));
                }
                v
            }
            IpVerifierFn::Parallel { copies, n1: a, n2: b, coin_length: c, inner } => {
                let mut out = 0;
                for j in 0..*copies {
                    let beta = inner.respond(*a, *b, *c, field(coins, j * c, *c), field(alpha, j * a, *a))?;
                    out |= beta << (j * b);
                }
                out
            }
        })
    }

    fn check(&self, n1: usize, n2: usize, coin_length: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::config(format!("{what} verifier does not fit widths {n1}/{n2}/{coin_length}")));
        match self {
            IpVerifierFn::CoinEcho if n2 != coin_length => bad("coin-echo"),
            IpVerifierFn::And if n1 != n2 || n2 != coin_length => bad("and"),
            IpVerifierFn::Table { table } if table.len() != 1usize << (n1 + coin_length) => bad("table"),
            IpVerifierFn::Parallel { copies, n1: a, n2: b, coin_length: c, inner } => {
                if copies * a != n1 || copies * b != n2 || copies * c != coin_length {
                    return bad("parallel");
                }
                inner.check(*a, *b, *c)
            }
            _ => Ok(()),
        }
    }
}

/// Reads `width` bits of `value` starting at `offset`.
pub(crate) fn field(value: u64, offset: usize, width: usize) -> u64 {
    (value >> offset) & ((1u64 << width) - 1)
}

/// Packs messages little-endian according to `lengths`.
pub fn pack(messages: &[u64], lengths: &[usize]) -> u64 {
    let mut offset = 0;
    let mut out = 0;
    for (&m, &n) in messages.iter().zip(lengths) {
        out |= m << offset;
        offset += n;
    }
    out
}

/// Arthur's acceptance test, as a function of the classical transcript.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub enum Predicate<T: Real> {
    AlwaysAccept,
    AlwaysReject,
    /// Per copy: the final message is a permutation index mapping `G_b` to
    /// the graph sent first.
    GraphIsomorphism { g0: Graph, g1: Graph, copies: usize },
    /// `predict = false`: each prover message after a challenge repeats it.
    /// `predict = true`: each prover message must equal the challenge that
    /// follows it.
    Echo { predict: bool },
    /// Explicit operators per classical transcript (plus coins for private
    /// coin protocols); unlisted transcripts are rejected.
    Table { entries: Vec<PredicateEntry<T>> },
    /// Conjunction of independent copies of `component`.
    Parallel { copies: usize, component: Box<ProtocolSpec<T>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct PredicateEntry<T: Real> {
    pub messages: Vec<u64>,
    #[serde(default)]
    pub coins: Option<u64>,
    pub operator: QuantumPredicate<T>,
}

/// Round structure, widths and acceptance predicate of a protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ProtocolSpec<T: Real> {
    pub shape: Shape,
    /// `n_1 .. n_{2k}`.
    pub message_lengths: Vec<usize>,
    pub final_qubits: usize,
    #[serde(default)]
    pub coin_length: usize,
    #[serde(default)]
    pub ip_verifier: Option<IpVerifierFn>,
    pub predicate: Predicate<T>,
    pub completeness_error: T,
    pub soundness_error: T,
}

impl<T: Real> ProtocolSpec<T> {
    pub fn validate(&self) -> Result<()> {
        let len = self.message_lengths.len();
        if len == 0 {
            return Err(Error::DegenerateSpec("no classical rounds (k = 0)".into()));
        }
        if !len.is_multiple_of(2) {
            return Err(Error::config(format!("{len} classical messages; expected an even count")));
        }
        match self.shape {
            Shape::Qam3 | Shape::Ip3 if len != 2 => {
                return Err(Error::WrongShape { expected: format!("{} with 2 classical messages", self.shape), got: format!("{len} messages") })
            }
            _ => {}
        }
        if let Some(&n) = self.message_lengths.iter().find(|&&n| n == 0 || n > MAX_MESSAGE_BITS) {
            return Err(Error::config(format!("message length {n} outside 1..={MAX_MESSAGE_BITS}")));
        }
        if self.final_qubits == 0 || self.final_qubits > 20 {
            return Err(Error::config(format!("final message of {} qubits outside 1..=20", self.final_qubits)));
        }
        if self.prefix_bits(self.k() + 1) > MAX_PREFIX_BITS {
            return Err(Error::config(format!(
                "classical transcript of {} bits exceeds {MAX_PREFIX_BITS}",
                self.prefix_bits(self.k() + 1)
            )));
        }
        match (self.shape, &self.ip_verifier) {
            (Shape::Ip3, None) => return Err(Error::config("private-coin protocol needs a verifier function")),
            (Shape::Ip3, Some(v)) => {
                if self.coin_length == 0 || self.coin_length > MAX_MESSAGE_BITS {
                    return Err(Error::config(format!("coin length {} outside 1..={MAX_MESSAGE_BITS}", self.coin_length)));
                }
                v.check(self.message_lengths[0], self.message_lengths[1], self.coin_length)?;
            }
            (_, Some(_)) => return Err(Error::config("public-coin protocols take no verifier function")),
            _ => {}
        }
        let (ec, es) = (self.completeness_error, self.soundness_error);
        if ec < T::zero() || es < T::zero() || ec + es >= T::lit(2.0 / 3.0) {
            return Err(Error::config(format!("error bounds {ec} + {es} must be nonnegative and below 2/3")));
        }
        self.check_predicate()
    }

    fn check_predicate(&self) -> Result<()> {
        match &self.predicate {
            Predicate::GraphIsomorphism { g0, g1, copies } => {
                if g0.vertices() != g1.vertices() || *copies == 0 {
                    return Err(Error::config("graph predicate needs equal vertex counts and copies >= 1"));
                }
                let want = vec![copies * g0.edge_slots(), *copies];
                if self.message_lengths != want || self.final_qubits != copies * perm_bits(g0.vertices()) {
                    return Err(Error::config("graph predicate widths do not match the message lengths"));
                }
            }
            Predicate::Echo { predict: false } => {
                let n = &self.message_lengths;
                if (1..self.k()).any(|i| n[2 * i] != n[2 * i - 1]) || self.final_qubits != n[n.len() - 1] {
                    return Err(Error::config("echo predicate needs each reply as wide as the challenge it repeats"));
                }
            }
            Predicate::Echo { predict: true } => {
                let n = &self.message_lengths;
                if (0..self.k()).any(|i| n[2 * i] != n[2 * i + 1]) {
                    return Err(Error::config("predict predicate needs each guess as wide as its challenge"));
                }
            }
            Predicate::Table { entries } => {
                if let Some(e) = entries.iter().find(|e| e.operator.num_qubits() != self.final_qubits) {
                    return Err(Error::config(format!("table operator acts on {} qubits", e.operator.num_qubits())));
                }
            }
            Predicate::Parallel { copies, component } => {
                component.validate()?;
                let c = *copies;
                if c == 0
                    || self.message_lengths != component.message_lengths.iter().map(|n| n * c).collect::<Vec<_>>()
                    || self.final_qubits != component.final_qubits * c
                    || self.coin_length != component.coin_length * c
                {
                    return Err(Error::config("parallel predicate widths do not match the component"));
                }
            }
            Predicate::AlwaysAccept | Predicate::AlwaysReject => {}
        }
        Ok(())
    }

    /// Number of prover/verifier exchanges before the final message.
    pub fn k(&self) -> usize {
        self.message_lengths.len() / 2
    }

    /// `N_i = n_1 + ... + n_{2i-1}` for `i` in `1..=k`, the hash input width
    /// of round `i`. `N_{k+1}` is the full classical transcript width.
    pub fn prefix_bits(&self, i: usize) -> usize {
        self.message_lengths.iter().take((2 * i).saturating_sub(1).min(self.message_lengths.len())).sum()
    }

    /// Width of the round-`i` verifier message (`i` from 1).
    pub fn challenge_bits(&self, i: usize) -> usize {
        self.message_lengths[2 * i - 1]
    }

    /// Acceptance operator on the final message given the classical
    /// transcript and, for private-coin protocols, the verifier's coins.
    pub fn acceptance(&self, messages: &[u64], coins: Option<u64>) -> Result<QuantumPredicate<T>> {
        if messages.len() != self.message_lengths.len() {
            return Err(Error::config(format!(
                "transcript has {} classical messages, spec has {}",
                messages.len(),
                self.message_lengths.len()
            )));
        }
        let q = self.final_qubits;
        match &self.predicate {
            Predicate::AlwaysAccept => Ok(QuantumPredicate::identity(q)),
            Predicate::AlwaysReject => Ok(QuantumPredicate::zero(q)),
            Predicate::GraphIsomorphism { g0, g1, copies } => gi::acceptance(g0, g1, *copies, messages),
            Predicate::Echo { predict } => {
                let k = self.k();
                if *predict {
                    let ok = (0..k).all(|i| messages[2 * i] == messages[2 * i + 1]);
                    Ok(if ok { QuantumPredicate::identity(q) } else { QuantumPredicate::zero(q) })
                } else if (1..k).all(|i| messages[2 * i] == messages[2 * i - 1]) {
                    QuantumPredicate::projector(q, messages[2 * k - 1])
                } else {
                    Ok(QuantumPredicate::zero(q))
                }
            }
            Predicate::Table { entries } => Ok(entries
                .iter()
                .find(|e| e.messages == messages && (e.coins.is_none() || e.coins == coins))
                .map_or_else(|| QuantumPredicate::zero(q), |e| e.operator.clone())),
            Predicate::Parallel { copies, component } => {
                let mut acc: Option<QuantumPredicate<T>> = None;
                for j in 0..*copies {
                    let msgs: Vec<u64> = messages
                        .iter()
                        .zip(&component.message_lengths)
                        .map(|(&m, &n)| field(m, j * n, n))
                        .collect();
                    let c = coins.map(|r| field(r, j * component.coin_length, component.coin_length));
                    let e = component.acceptance(&msgs, c)?;
                    acc = Some(match acc {
                        None => e,
                        Some(prev) => prev.kron(&e)?,
                    });
                }
                acc.ok_or_else(|| Error::domain("copies", "zero"))
            }
        }
    }

    /// `V^r(a)` for private-coin protocols.
    pub fn ip_response(&self, coins: u64, alpha: u64) -> Result<u64> {
        let v = self
            .ip_verifier
            .as_ref()
            .ok_or_else(|| Error::WrongShape { expected: "ip3".into(), got: self.shape.to_string() })?;
        v.respond(self.message_lengths[0], self.message_lengths[1], self.coin_length, coins, alpha)
    }
}

/// `copies` independent instances run side by side: messages concatenate
/// block-wise and the predicate is the conjunction of the per-copy checks.
pub fn parallel_compose<T: Real>(spec: &ProtocolSpec<T>, copies: usize) -> Result<ProtocolSpec<T>> {
    if copies == 0 {
        return Err(Error::domain("copies", "parallel composition needs at least one copy"));
    }
    spec.validate()?;
    if copies == 1 {
        return Ok(spec.clone());
    }
    let ip_verifier = spec.ip_verifier.as_ref().map(|inner| IpVerifierFn::Parallel {
        copies,
        n1: spec.message_lengths[0],
        n2: spec.message_lengths[1],
        coin_length: spec.coin_length,
        inner: Box::new(inner.clone()),
    });
    let c = copies as i32;
    let composed = ProtocolSpec {
        shape: spec.shape,
        message_lengths: spec.message_lengths.iter().map(|n| n * copies).collect(),
        final_qubits: spec.final_qubits * copies,
        coin_length: spec.coin_length * copies,
        ip_verifier,
        predicate: Predicate::Parallel { copies, component: Box::new(spec.clone()) },
        completeness_error: T::one() - (T::one() - spec.completeness_error).powi(c),
        soundness_error: spec.soundness_error.powi(c),
    };
    composed.validate()?;
    Ok(composed)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn echo_spec(predict: bool) -> ProtocolSpec<f64> {
        ProtocolSpec {
            shape: Shape::Qam2k1,
            message_lengths: vec![1, 1, 1, 1],
            final_qubits: 1,
            coin_length: 0,
            ip_verifier: None,
            predicate: Predicate::Echo { predict },
            completeness_error: 0.0,
            soundness_error: 0.25,
        }
    }

    #[test]
    fn prefix_widths() {
        let s = ProtocolSpec { message_lengths: vec![2, 1, 3, 1], ..echo_spec(false) };
        assert_eq!(s.prefix_bits(1), 2);
        assert_eq!(s.prefix_bits(2), 6);
        assert_eq!(s.prefix_bits(3), 7);
        assert_eq!(pack(&[0b10, 1, 0b101], &[2, 1, 3]), 0b101_1_10);
    }

    #[test]
    fn validation() {
        echo_spec(false).validate().unwrap();
        let degenerate = ProtocolSpec { message_lengths: vec![], ..echo_spec(false) };
        assert!(matches!(degenerate.validate(), Err(Error::DegenerateSpec(_))));
        let loose = ProtocolSpec { soundness_error: 0.7, ..echo_spec(false) };
        assert!(loose.validate().is_err());
        let wrong = ProtocolSpec { shape: Shape::Qam3, ..echo_spec(false) };
        assert!(matches!(wrong.validate(), Err(Error::WrongShape { .. })));
    }

    #[test]
    fn echo_acceptance() {
        let s = echo_spec(false);
        assert_eq!(s.acceptance(&[0, 1, 1, 0], None).unwrap().weight(0), 1.0);
        assert_eq!(s.acceptance(&[0, 1, 1, 0], None).unwrap().weight(1), 0.0);
        assert_eq!(s.acceptance(&[0, 1, 0, 0], None).unwrap().weight(0), 0.0);
        let p = echo_spec(true);
        assert_eq!(p.acceptance(&[1, 1, 0, 0], None).unwrap().weight(1), 1.0);
        assert_eq!(p.acceptance(&[1, 0, 0, 0], None).unwrap().weight(1), 0.0);
    }

    #[test]
    fn composition_widths_and_predicate() {
        let s = echo_spec(true);
        assert_eq!(parallel_compose(&s, 1).unwrap(), s);
        assert!(parallel_compose(&s, 0).is_err());
        let c = parallel_compose(&ProtocolSpec { soundness_error: 0.25, ..s }, 2).unwrap();
        assert_eq!(c.message_lengths, vec![2, 2, 2, 2]);
        assert_eq!(c.final_qubits, 2);
        // copy 0 guesses right, copy 1 wrong
        assert_eq!(c.acceptance(&[0b01, 0b11, 0, 0], None).unwrap().weight(0), 0.0);
        assert_eq!(c.acceptance(&[0b01, 0b01, 0b10, 0b10], None).unwrap().weight(3), 1.0);
    }

    #[test]
    fn ip_verifier_functions() {
        assert_eq!(IpVerifierFn::And.respond(1, 1, 1, 1, 1).unwrap(), 1);
        assert_eq!(IpVerifierFn::And.respond(1, 1, 1, 1, 0).unwrap(), 0);
        let par = IpVerifierFn::Parallel { copies: 2, n1: 1, n2: 1, coin_length: 1, inner: Box::new(IpVerifierFn::And) };
        assert_eq!(par.respond(2, 2, 2, 0b11, 0b10).unwrap(), 0b10);
        assert!(IpVerifierFn::CoinEcho.check(3, 1, 2).is_err());
    }
}
