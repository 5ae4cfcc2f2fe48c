use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use super::{pack, ProtocolSpec, ProverRole, Shape, TabulatedProver, VerifierRole};
use crate::error::{Error, Result};
use crate::fieldhash::{eval_hash, HashFunction};
use crate::qcore::{predicate_accept, DensityMatrix, FunctionOracle, QuantumPredicate};
use crate::scalar::{inv_pow2, Real};

/// A verifier's reply to a prefix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Response {
    /// A fresh uniform challenge of this width; exact runs enumerate it.
    Uniform { bits: usize },
    /// Depends on private coins of this width that have not been fixed.
    RandomCoins { bits: usize },
    Message(u64),
}

/// One complete protocol transcript.
#[derive(Clone, Debug, PartialEq)]
pub struct Transcript<T: Real> {
    pub classical_messages: Vec<u64>,
    /// The private-coin verifier's coins, when there are any.
    pub coins: Option<u64>,
    pub final_message: DensityMatrix<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TranscriptEntry<T: Real> {
    pub transcript: Transcript<T>,
    pub probability: T,
    /// `Tr(E rho)` for this transcript.
    pub acceptance: T,
}

/// Exact distribution of transcripts and the overall acceptance probability.
#[derive(Clone, Debug, PartialEq)]
pub struct TranscriptDistribution<T: Real> {
    pub entries: Vec<TranscriptEntry<T>>,
    pub acceptance: T,
}

impl<T: Real> TranscriptDistribution<T> {
    pub fn total_probability(&self) -> T {
        self.entries.iter().fold(T::zero(), |acc, e| acc + e.probability)
    }

    /// Marginal of classical message `index`.
    pub fn message_marginal(&self, index: usize) -> BTreeMap<u64, T> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            *out.entry(e.transcript.classical_messages[index]).or_insert_with(T::zero) += e.probability;
        }
        out
    }
}

fn hash_reply(h: &HashFunction, input: u64, in_bits: usize, out_bits: usize) -> Result<u64> {
    if h.n1() as usize != in_bits || h.n2() as usize != out_bits {
        return Err(Error::config(format!(
            "hash maps {} -> {} bits but the round needs {in_bits} -> {out_bits}",
            h.n1(),
            h.n2()
        )));
    }
    eval_hash(h, input)
}

fn function_reply(f: &FunctionOracle, input: u64, in_bits: usize, out_bits: usize) -> Result<u64> {
    if f.n1() != in_bits || f.n2() > out_bits {
        return Err(Error::config(format!(
            "function maps {} -> {} bits but the round needs {in_bits} -> {out_bits}",
            f.n1(),
            f.n2()
        )));
    }
    Ok(f.eval(input))
}

fn check_compatible<T: Real>(spec: &ProtocolSpec<T>, verifier: &VerifierRole) -> Result<()> {
    let private = spec.shape == Shape::Ip3;
    if private != verifier.is_private_coin() {
        return Err(Error::config(format!("verifier role {verifier:?} does not fit a {} protocol", spec.shape)));
    }
    Ok(())
}

/// The verifier's next message after an odd-length prefix.
pub fn verifier_response<T: Real>(spec: &ProtocolSpec<T>, verifier: &VerifierRole, prefix: &[u64]) -> Result<Response> {
    check_compatible(spec, verifier)?;
    if prefix.len().is_multiple_of(2) || prefix.len() >= spec.message_lengths.len() {
        return Err(Error::ProtocolOrder(format!(
            "the verifier replies after an odd prefix shorter than {}, got {} messages",
            spec.message_lengths.len(),
            prefix.len()
        )));
    }
    let round = prefix.len().div_ceil(2);
    let in_bits = spec.prefix_bits(round);
    let out_bits = spec.challenge_bits(round);
    let input = pack(prefix, &spec.message_lengths);
    let alpha = prefix[0];
    Ok(match verifier {
        VerifierRole::HonestArthur => Response::Uniform { bits: out_bits },
        VerifierRole::HashArthur { hashes } => {
            let h = hashes.get(round - 1).ok_or_else(|| Error::config(format!("no hash function for round {round}")))?;
            Response::Message(hash_reply(h, input, in_bits, out_bits)?)
        }
        VerifierRole::FunctionArthur { functions } => {
            let f = functions.get(round - 1).ok_or_else(|| Error::config(format!("no function for round {round}")))?;
            Response::Message(function_reply(f, input, in_bits, out_bits)?)
        }
        VerifierRole::HonestIpVerifier { coins: None } => Response::RandomCoins { bits: spec.coin_length },
        VerifierRole::HonestIpVerifier { coins: Some(r) } => Response::Message(spec.ip_response(*r, alpha)?),
        VerifierRole::HashIpVerifier { hash } => {
            let r = hash_reply(hash, alpha, in_bits, spec.coin_length)?;
            Response::Message(spec.ip_response(r, alpha)?)
        }
        VerifierRole::FunctionIpVerifier { function } => {
            let r = function_reply(function, alpha, in_bits, spec.coin_length)?;
            Response::Message(spec.ip_response(r, alpha)?)
        }
    })
}

/// Coins a deterministic private-coin verifier uses on first message `alpha`.
fn derived_coins<T: Real>(spec: &ProtocolSpec<T>, verifier: &VerifierRole, alpha: u64) -> Result<Option<u64>> {
    let n1 = spec.message_lengths[0];
    Ok(match verifier {
        VerifierRole::HonestIpVerifier { coins } => *coins,
        VerifierRole::HashIpVerifier { hash } => Some(hash_reply(hash, alpha, n1, spec.coin_length)?),
        VerifierRole::FunctionIpVerifier { function } => Some(function_reply(function, alpha, n1, spec.coin_length)?),
        _ => None,
    })
}

/// The round-`round` response function of a deterministic verifier as an
/// oracle over the packed prefix (`round` counts from 1).
pub fn as_function_oracle<T: Real>(spec: &ProtocolSpec<T>, verifier: &VerifierRole, round: usize) -> Result<FunctionOracle> {
    check_compatible(spec, verifier)?;
    if round == 0 || round > spec.k() {
        return Err(Error::ProtocolOrder(format!("round {round} outside 1..={}", spec.k())));
    }
    let in_bits = spec.prefix_bits(round);
    let out_bits = spec.challenge_bits(round);
    match verifier {
        VerifierRole::HonestArthur | VerifierRole::HonestIpVerifier { coins: None } => Err(Error::NotOracleRepresentable(
            "an honest verifier answers with fresh randomness, not a function of the transcript".into(),
        )),
        VerifierRole::HashArthur { hashes } => {
            let h = hashes.get(round - 1).ok_or_else(|| Error::config(format!("no hash function for round {round}")))?;
            hash_reply(h, 0, in_bits, out_bits)?;
            FunctionOracle::new(in_bits, out_bits, h.table())
        }
        VerifierRole::FunctionArthur { functions } => {
            let f = functions.get(round - 1).ok_or_else(|| Error::config(format!("no function for round {round}")))?;
            function_reply(f, 0, in_bits, out_bits)?;
            FunctionOracle::new(in_bits, out_bits, f.table().to_vec())
        }
        _ => FunctionOracle::from_fn(in_bits, out_bits, |a| {
            derived_coins(spec, verifier, a)
                .and_then(|r| spec.ip_response(r.unwrap_or(0), a))
                .unwrap_or(u64::MAX)
        })
        .map_err(|_| Error::config("verifier function does not fit the protocol widths")),
    }
}

fn check_prover<T: Real>(spec: &ProtocolSpec<T>, prover: &TabulatedProver<T>) -> Result<()> {
    if prover.rounds() != spec.k() || prover.final_qubits != spec.final_qubits {
        return Err(Error::config(format!(
            "prover has {} rounds and {} final qubits; the spec needs {} and {}",
            prover.rounds(),
            prover.final_qubits,
            spec.k(),
            spec.final_qubits
        )));
    }
    Ok(())
}

struct Walker<'a, T: Real> {
    spec: &'a ProtocolSpec<T>,
    prover: &'a TabulatedProver<T>,
    verifier: &'a VerifierRole,
    out: Vec<TranscriptEntry<T>>,
}

impl<T: Real> Walker<'_, T> {
    fn walk(&mut self, prefix: &mut Vec<u64>, prob: T, coins: Option<u64>) -> Result<()> {
        if prob <= T::zero() {
            return Ok(());
        }
        let len = prefix.len();
        if len == self.spec.message_lengths.len() {
            let rho = self.prover.final_state(prefix);
            let e = self.spec.acceptance(prefix, coins)?;
            let acceptance = predicate_accept(&e, &rho)?;
            self.out.push(TranscriptEntry {
                transcript: Transcript { classical_messages: prefix.clone(), coins, final_message: rho },
                probability: prob,
                acceptance,
            });
            return Ok(());
        }
        if len.is_multiple_of(2) {
            for (m, p) in self.prover.next_message(prefix) {
                if m >> self.spec.message_lengths[len] != 0 {
                    return Err(Error::config(format!("prover message {m} wider than {} bits", self.spec.message_lengths[len])));
                }
                prefix.push(m);
                self.walk(prefix, prob * p, coins)?;
                prefix.pop();
            }
            return Ok(());
        }
        let coins = match coins {
            Some(r) => Some(r),
            None => derived_coins(self.spec, self.verifier, prefix[0])?,
        };
        if let (Shape::Ip3, Some(r)) = (self.spec.shape, coins) {
            prefix.push(self.spec.ip_response(r, prefix[0])?);
            self.walk(prefix, prob, Some(r))?;
            prefix.pop();
            return Ok(());
        }
        match verifier_response(self.spec, self.verifier, prefix)? {
            Response::Message(b) => {
                prefix.push(b);
                self.walk(prefix, prob, coins)?;
                prefix.pop();
            }
            Response::Uniform { bits } => {
                let w = inv_pow2::<T>(bits);
                for b in 0..1u64 << bits {
                    prefix.push(b);
                    self.walk(prefix, prob * w, coins)?;
                    prefix.pop();
                }
            }
            Response::RandomCoins { .. } => unreachable!("coins are drawn before the walk"),
        }
        Ok(())
    }
}

/// Exact transcript distribution of `prover` against `verifier`, enumerating
/// all verifier randomness and prover branches.
pub fn run_protocol<T: Real>(
    spec: &ProtocolSpec<T>,
    prover: &ProverRole<T>,
    verifier: &VerifierRole,
) -> Result<TranscriptDistribution<T>> {
    spec.validate()?;
    check_compatible(spec, verifier)?;
    let strategy = prover.strategy();
    check_prover(spec, strategy)?;
    let mut walker = Walker { spec, prover: strategy, verifier, out: Vec::new() };
    match verifier {
        VerifierRole::HonestIpVerifier { coins: None } => {
            let w = inv_pow2::<T>(spec.coin_length);
            for r in 0..1u64 << spec.coin_length {
                walker.walk(&mut Vec::new(), w, Some(r))?;
            }
        }
        _ => walker.walk(&mut Vec::new(), T::one(), None)?,
    }
    let acceptance = walker.out.iter().fold(T::zero(), |acc, e| acc + e.probability * e.acceptance);
    Ok(TranscriptDistribution { entries: walker.out, acceptance })
}

fn draw<T: Real, R: Rng + ?Sized>(dist: &BTreeMap<u64, T>, rng: &mut R) -> u64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (&m, &p) in dist {
        acc += p.as_f64();
        if u < acc {
            return m;
        }
    }
    *dist.keys().next_back().unwrap_or(&0)
}

/// One run with all randomness drawn from `rng`; returns the transcript, its
/// acceptance probability and a sampled accept bit.
pub fn sample_protocol<T: Real, R: Rng + ?Sized>(
    spec: &ProtocolSpec<T>,
    prover: &ProverRole<T>,
    verifier: &VerifierRole,
    rng: &mut R,
) -> Result<(Transcript<T>, T, bool)> {
    spec.validate()?;
    check_compatible(spec, verifier)?;
    let strategy = prover.strategy();
    check_prover(spec, strategy)?;
    let mut coins = match verifier {
        VerifierRole::HonestIpVerifier { coins: None } => Some(rng.random_range(0..1u64 << spec.coin_length)),
        _ => None,
    };
    let mut prefix = Vec::new();
    while prefix.len() < spec.message_lengths.len() {
        if prefix.len() % 2 == 0 {
            prefix.push(draw(&strategy.next_message(&prefix), rng));
            continue;
        }
        if coins.is_none() {
            coins = derived_coins(spec, verifier, prefix[0])?;
        }
        let reply = match (spec.shape, coins) {
            (Shape::Ip3, Some(r)) => spec.ip_response(r, prefix[0])?,
            _ => match verifier_response(spec, verifier, &prefix)? {
                Response::Message(b) => b,
                Response::Uniform { bits } => rng.random_range(0..1u64 << bits),
                Response::RandomCoins { .. } => unreachable!("coins are drawn up front"),
            },
        };
        prefix.push(reply);
    }
    let rho = strategy.final_state(&prefix);
    let p = predicate_accept(&spec.acceptance(&prefix, coins)?, &rho)?;
    let accepted = rng.random::<f64>() < p.as_f64();
    Ok((Transcript { classical_messages: prefix, coins, final_message: rho }, p, accepted))
}

/// Largest acceptance probability any prover achieves against the honest
/// verifier, with a prover attaining it. Ties go to the lexicographically
/// smallest message (and smallest basis state for classical final messages).
pub fn optimal_cheater<T: Real>(spec: &ProtocolSpec<T>) -> Result<(T, TabulatedProver<T>)> {
    spec.validate()?;
    if spec.prefix_bits(spec.k() + 1) > 22 {
        return Err(Error::EnumerationLimit {
            what: "cheating-prover transcripts".into(),
            size_log2: spec.prefix_bits(spec.k() + 1) as u32,
            limit: 1 << 22,
        });
    }
    if spec.shape == Shape::Ip3 {
        return optimal_private_coin(spec);
    }
    let mut dp = Dp { spec, choice: HashMap::new(), finals: HashMap::new() };
    let value = dp.value(&mut Vec::new())?;
    // keep only the prefixes the chosen strategy reaches
    let k = spec.k();
    let mut tables = vec![BTreeMap::new(); k];
    let mut finals = BTreeMap::new();
    let mut frontier: Vec<Vec<u64>> = vec![vec![]];
    for (r, table) in tables.iter_mut().enumerate() {
        let mut next = Vec::new();
        for p in frontier {
            let m = dp.choice[&p];
            table.insert(p.clone(), BTreeMap::from([(m, T::one())]));
            for b in 0..1u64 << spec.message_lengths[2 * r + 1] {
                next.push([p.as_slice(), &[m, b]].concat());
            }
        }
        frontier = next;
    }
    for p in frontier {
        let rho = dp.finals.remove(&p).expect("dp visits every full prefix");
        finals.insert(p, rho);
    }
    Ok((value, TabulatedProver::new(tables, finals, spec.final_qubits)?))
}

struct Dp<'a, T: Real> {
    spec: &'a ProtocolSpec<T>,
    choice: HashMap<Vec<u64>, u64>,
    finals: HashMap<Vec<u64>, DensityMatrix<T>>,
}

impl<T: Real> Dp<'_, T> {
    fn value(&mut self, prefix: &mut Vec<u64>) -> Result<T> {
        let len = prefix.len();
        if len == self.spec.message_lengths.len() {
            let (v, rho) = self.spec.acceptance(prefix, None)?.top_eigenpair()?;
            self.finals.insert(prefix.clone(), rho);
            return Ok(v);
        }
        let n = self.spec.message_lengths[len];
        if len.is_multiple_of(2) {
            let mut best: Option<(u64, T)> = None;
            for m in 0..1u64 << n {
                prefix.push(m);
                let v = self.value(prefix)?;
                prefix.pop();
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((m, v));
                }
            }
            let (m, v) = best.expect("message space is nonempty");
            self.choice.insert(prefix.clone(), m);
            Ok(v)
        } else {
            let mut total = T::zero();
            for b in 0..1u64 << n {
                prefix.push(b);
                total += self.value(prefix)?;
                prefix.pop();
            }
            Ok(total * inv_pow2::<T>(n))
        }
    }
}

fn optimal_private_coin<T: Real>(spec: &ProtocolSpec<T>) -> Result<(T, TabulatedProver<T>)> {
    let (n1, n2, nc) = (spec.message_lengths[0], spec.message_lengths[1], spec.coin_length);
    let w = inv_pow2::<T>(nc);
    let mut best: Option<(u64, T, BTreeMap<u64, DensityMatrix<T>>)> = None;
    for alpha in 0..1u64 << n1 {
        // operators seen by the prover for each reply, averaged over the coins behind it
        let mut by_reply: BTreeMap<u64, Vec<QuantumPredicate<T>>> = BTreeMap::new();
        for r in 0..1u64 << nc {
            let beta = spec.ip_response(r, alpha)?;
            by_reply.entry(beta).or_default().push(spec.acceptance(&[alpha, beta], Some(r))?);
        }
        let mut value = T::zero();
        let mut states = BTreeMap::new();
        for beta in 0..1u64 << n2 {
            match by_reply.get(&beta) {
                Some(ops) => {
                    let terms: Vec<(T, &QuantumPredicate<T>)> = ops.iter().map(|e| (w, e)).collect();
                    let (v, rho) = QuantumPredicate::weighted_sum(&terms)?.top_eigenpair()?;
                    value += v;
                    states.insert(beta, rho);
                }
                None => {
                    states.insert(beta, DensityMatrix::zero_state(spec.final_qubits));
                }
            }
        }
        if best.as_ref().is_none_or(|(_, b, _)| value > *b) {
            best = Some((alpha, value, states));
        }
    }
    let (alpha, value, states) = best.expect("message space is nonempty");
    let tables = vec![BTreeMap::from([(vec![], BTreeMap::from([(alpha, T::one())]))])];
    let finals = states.into_iter().map(|(beta, rho)| (vec![alpha, beta], rho)).collect();
    Ok((value, TabulatedProver::new(tables, finals, spec.final_qubits)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldhash::{FieldElement, HashFamily};
    use crate::protocols::{IpVerifierFn, Predicate};

    fn echo(predict: bool) -> ProtocolSpec<f64> {
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

    fn zero_hash(n1: u8, n2: u8) -> HashFunction {
        let m = n1.max(n2);
        HashFunction::new(n1, n2, vec![FieldElement::zero(m).unwrap(); 3]).unwrap()
    }

    #[test]
    fn parity_and_oracle_errors() {
        let s = echo(false);
        assert!(matches!(verifier_response(&s, &VerifierRole::HonestArthur, &[]), Err(Error::ProtocolOrder(_))));
        assert!(matches!(verifier_response(&s, &VerifierRole::HonestArthur, &[0, 1]), Err(Error::ProtocolOrder(_))));
        assert!(matches!(as_function_oracle(&s, &VerifierRole::HonestArthur, 1), Err(Error::NotOracleRepresentable(_))));
    }

    #[test]
    fn zero_hash_arthur_answers_zero_and_second_round_reads_whole_prefix() {
        let s = echo(false);
        let v = VerifierRole::HashArthur { hashes: vec![zero_hash(1, 1), zero_hash(3, 1)] };
        assert_eq!(verifier_response(&s, &v, &[1]).unwrap(), Response::Message(0));
        assert_eq!(verifier_response(&s, &v, &[1, 0, 1]).unwrap(), Response::Message(0));
        let f = as_function_oracle(&s, &v, 2).unwrap();
        assert_eq!(f.n1(), 3);
        // a second-round function that depends only on the first message
        let g = FunctionOracle::from_fn(3, 1, |x| x & 1).unwrap();
        let fv = VerifierRole::FunctionArthur { functions: vec![FunctionOracle::constant(1, 1, 0).unwrap(), g] };
        assert_eq!(verifier_response(&s, &fv, &[0, 0, 1]).unwrap(), Response::Message(0));
        assert_eq!(verifier_response(&s, &fv, &[1, 0, 1]).unwrap(), Response::Message(1));
    }

    #[test]
    fn deterministic_prover_against_hash_verifier_is_point_mass() {
        let s = echo(true);
        let prover = ProverRole::Tabulated(
            TabulatedProver::deterministic(&[1, 0], &[vec![0, 1], vec![0, 1]], DensityMatrix::zero_state(1)).unwrap(),
        );
        let fam = HashFamily::new(1, 1, 3).unwrap();
        let v = VerifierRole::HashArthur { hashes: vec![fam.function_at(5).unwrap(), HashFamily::new(3, 1, 3).unwrap().function_at(77).unwrap()] };
        let d = run_protocol(&s, &prover, &v).unwrap();
        assert_eq!(d.entries.len(), 1);
        assert_eq!(d.entries[0].probability, 1.0);
    }

    #[test]
    fn honest_arthur_is_uniform_and_predict_cheater_gets_quarter() {
        let s = echo(true);
        let prover = ProverRole::Tabulated(
            TabulatedProver::deterministic(&[1, 0], &[vec![0, 1], vec![0, 1]], DensityMatrix::zero_state(1)).unwrap(),
        );
        let d = run_protocol(&s, &prover, &VerifierRole::HonestArthur).unwrap();
        assert!((d.total_probability() - 1.0).abs() < 1e-12);
        assert!((d.acceptance - 0.25).abs() < 1e-12);
        for (_, p) in d.message_marginal(1) {
            assert!((p - 0.5).abs() < 1e-12);
        }
        let (opt, best) = optimal_cheater(&s).unwrap();
        assert!((opt - 0.25).abs() < 1e-12);
        let d = run_protocol(&s, &ProverRole::Tabulated(best), &VerifierRole::HonestArthur).unwrap();
        assert!((d.acceptance - 0.25).abs() < 1e-12);
        let (opt, _) = optimal_cheater(&echo(false)).unwrap();
        assert!((opt - 1.0).abs() < 1e-12);
    }

    #[test]
    fn private_coin_runs() {
        let s: ProtocolSpec<f64> = ProtocolSpec {
            shape: Shape::Ip3,
            message_lengths: vec![1, 1],
            final_qubits: 1,
            coin_length: 1,
            ip_verifier: Some(IpVerifierFn::And),
            predicate: Predicate::AlwaysAccept,
            completeness_error: 0.0,
            soundness_error: 0.5,
        };
        let prover = ProverRole::Tabulated(
            TabulatedProver::deterministic(&[1], &[vec![0, 1]], DensityMatrix::zero_state(1)).unwrap(),
        );
        let d = run_protocol(&s, &prover, &VerifierRole::HonestIpVerifier { coins: None }).unwrap();
        assert_eq!(d.entries.len(), 2);
        assert!((d.acceptance - 1.0).abs() < 1e-12);
        assert!(matches!(run_protocol(&s, &prover, &VerifierRole::HonestArthur), Err(Error::Config(_))));
        let f = as_function_oracle(&s, &VerifierRole::FunctionIpVerifier { function: FunctionOracle::new(1, 1, vec![1, 1]).unwrap() }, 1).unwrap();
        assert_eq!(f.table(), &[0, 1]);
        let (opt, _) = optimal_cheater(&s).unwrap();
        assert!((opt - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_seeded() {
        use rand::SeedableRng;
        let s = echo(true);
        let prover = ProverRole::Tabulated(
            TabulatedProver::deterministic(&[1, 0], &[vec![0, 1], vec![0, 1]], DensityMatrix::zero_state(1)).unwrap(),
        );
        let mut a = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut b = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x = sample_protocol(&s, &prover, &VerifierRole::HonestArthur, &mut a).unwrap();
        let y = sample_protocol(&s, &prover, &VerifierRole::HonestArthur, &mut b).unwrap();
        assert_eq!(x, y);
    }
}
