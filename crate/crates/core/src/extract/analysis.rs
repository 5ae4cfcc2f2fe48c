use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::joint::{accept_cached, JointDistribution};
use crate::error::{Error, Result};
use crate::protocols::{run_protocol, ProtocolSpec, ProverRole, Shape, TabulatedProver, VerifierRole};
use crate::qcore::{DensityMatrix, QuantumPredicate};
use crate::scalar::{inv_pow2, Real};

/// `s` for one conditioning prefix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SRow<T: Real> {
    pub prefix: Vec<u64>,
    pub probability: T,
    /// Largest conditional probability of the verifier message (or coins).
    pub s: T,
    /// Its smallest maximiser.
    pub argmax: u64,
}

/// Concentration of the round-`round` verifier message given the prefix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct RoundStats<T: Real> {
    pub round: usize,
    /// Width of the predicted value: `n_{2i}`, or the coin length.
    pub out_bits: usize,
    pub rows: Vec<SRow<T>>,
    pub expected_s: T,
}

impl<T: Real> RoundStats<T> {
    /// `c t^2 / 2^out_bits`.
    pub fn bound(&self, c: T, t: usize) -> T {
        c * ct_squared_factor(t) * inv_pow2::<T>(self.out_bits)
    }
}

fn ct_squared_factor<T: Real>(t: usize) -> T {
    // a zero-query bound would be vacuous; treat t = 0 like t = 1
    let t = T::from_count(t.max(1) as u64);
    t * t
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct MinEntropyStats<T: Real> {
    pub rounds: Vec<RoundStats<T>>,
}

/// Per-round `s` tables and their expectations.
pub fn min_entropy_stats<T: Real>(spec: &ProtocolSpec<T>, joint: &JointDistribution<T>) -> MinEntropyStats<T> {
    let rounds = if spec.shape == Shape::Ip3 {
        vec![round_stats(joint, 1, spec.coin_length, |e| (e.messages[..1].to_vec(), e.coins.unwrap_or(0)))]
    } else {
        (1..=spec.k())
            .map(|i| {
                round_stats(joint, i, spec.challenge_bits(i), |e| (e.messages[..2 * i - 1].to_vec(), e.messages[2 * i - 1]))
            })
            .collect()
    };
    MinEntropyStats { rounds }
}

fn round_stats<T: Real>(
    joint: &JointDistribution<T>,
    round: usize,
    out_bits: usize,
    split: impl Fn(&super::joint::JointEntry<T>) -> (Vec<u64>, u64),
) -> RoundStats<T> {
    let mut table: BTreeMap<Vec<u64>, BTreeMap<u64, T>> = BTreeMap::new();
    for e in &joint.entries {
        let (prefix, target) = split(e);
        *table.entry(prefix).or_default().entry(target).or_insert_with(T::zero) += e.probability;
    }
    let mut expected_s = T::zero();
    let rows = table
        .into_iter()
        .filter_map(|(prefix, dist)| {
            let probability = dist.values().fold(T::zero(), |a, &p| a + p);
            if probability <= T::zero() {
                return None;
            }
            let (mut argmax, mut best) = (0, -T::one());
            for (&v, &p) in &dist {
                if p > best {
                    (argmax, best) = (v, p);
                }
            }
            expected_s += best;
            Some(SRow { prefix, probability, s: best / probability, argmax })
        })
        .collect();
    RoundStats { round, out_bits, rows, expected_s }
}

/// Prefixes whose `s` is at most `c t^2 / (delta 2^n)`, per round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct GoodSet<T: Real> {
    pub delta: T,
    pub thresholds: Vec<T>,
    pub members: Vec<BTreeSet<Vec<u64>>>,
    /// `Pr[prefix in Good_i]` per round.
    pub round_mass: Vec<T>,
    /// Mass of transcripts with every prefix good.
    pub mass: T,
}

impl<T: Real> GoodSet<T> {
    pub fn contains(&self, messages: &[u64]) -> bool {
        self.members.iter().enumerate().all(|(i, m)| m.contains(&messages[..(2 * i + 1).min(messages.len())]))
    }
}

/// The Markov good set for `0 < delta <= 1`.
pub fn good_set<T: Real>(
    joint: &JointDistribution<T>,
    stats: &MinEntropyStats<T>,
    delta: T,
    c: T,
    t: usize,
) -> Result<GoodSet<T>> {
    if !(delta > T::zero() && delta <= T::one()) {
        return Err(Error::domain("delta", format!("{delta} outside (0, 1]")));
    }
    Ok(good_set_any(joint, stats, delta, c, t))
}

/// As [`good_set`]; `delta = 0` admits every prefix with positive mass.
fn good_set_any<T: Real>(joint: &JointDistribution<T>, stats: &MinEntropyStats<T>, delta: T, c: T, t: usize) -> GoodSet<T> {
    let mut thresholds = Vec::new();
    let mut members = Vec::new();
    let mut round_mass = Vec::new();
    for r in &stats.rounds {
        let thr = if delta > T::zero() { r.bound(c, t) / delta } else { T::max_value().unwrap_or_else(T::one) };
        let good: Vec<&SRow<T>> = r.rows.iter().filter(|row| row.s <= thr + T::exact_tol()).collect();
        round_mass.push(good.iter().fold(T::zero(), |a, row| a + row.probability));
        members.push(good.into_iter().map(|row| row.prefix.clone()).collect());
        thresholds.push(thr);
    }
    let mut set = GoodSet { delta, thresholds, members, round_mass, mass: T::zero() };
    set.mass = joint.entries.iter().filter(|e| set.contains(&e.messages)).fold(T::zero(), |a, e| a + e.probability);
    set
}

/// Final-message states of the cheating prover: the simulator's conditional
/// output, with failure mass sent as `|0><0|`.
fn conditional_finals<T: Real, K: Ord + Clone>(
    joint: &JointDistribution<T>,
    final_qubits: usize,
    key: impl Fn(&super::joint::JointEntry<T>) -> K,
) -> Result<BTreeMap<K, DensityMatrix<T>>> {
    let mut acc: BTreeMap<K, (T, DensityMatrix<T>)> = BTreeMap::new();
    let fill = DensityMatrix::zero_state(final_qubits);
    for e in &joint.entries {
        let (p, m) = acc.entry(key(e)).or_insert_with(|| (T::zero(), DensityMatrix::null(final_qubits)));
        *p += e.probability;
        if e.failed {
            m.add_scaled(&fill, e.probability)?;
        } else {
            m.add_scaled(&e.mass, T::one())?;
        }
    }
    Ok(acc
        .into_iter()
        .filter(|(_, (p, _))| *p > T::zero())
        .map(|(k, (p, m))| (k, m.scaled(T::one() / p)))
        .collect())
}

/// The cheating prover read off the joint: each prover message follows its
/// conditional law given the transcript so far, and the final message is the
/// conditional simulator output (or `|0><0|` on a null condition).
pub fn build_cheating_prover<T: Real>(spec: &ProtocolSpec<T>, joint: &JointDistribution<T>) -> Result<TabulatedProver<T>> {
    let marg = joint.prefix_marginals();
    let mut tables = vec![BTreeMap::new(); spec.k()];
    for (prefix, &p) in &marg {
        if prefix.len() % 2 == 1 && p > T::zero() {
            let parent = &prefix[..prefix.len() - 1];
            let denom = marg[parent];
            let dist: &mut BTreeMap<u64, T> = tables[parent.len() / 2].entry(parent.to_vec()).or_default();
            dist.insert(prefix[prefix.len() - 1], p / denom);
        }
    }
    let finals = conditional_finals(joint, spec.final_qubits, |e| e.messages.clone())?;
    TabulatedProver::new(tables, finals, spec.final_qubits)
}

pub(crate) fn honest_verifier<T: Real>(spec: &ProtocolSpec<T>) -> VerifierRole {
    match spec.shape {
        Shape::Ip3 => VerifierRole::HonestIpVerifier { coins: None },
        _ => VerifierRole::HonestArthur,
    }
}

/// Exact acceptance of `prover` against the honest verifier.
pub fn cheating_probability<T: Real>(prover: &TabulatedProver<T>, spec: &ProtocolSpec<T>) -> Result<T> {
    Ok(run_protocol(spec, &ProverRole::Tabulated(prover.clone()), &honest_verifier(spec))?.acceptance)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Eq,
    Ge,
}

/// One instantiated step `lhs (= | >=) rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ChainLine<T: Real> {
    pub label: String,
    pub relation: Relation,
    pub lhs: T,
    pub rhs: T,
    pub slack: T,
    pub holds: bool,
}

/// Tolerance for chain verdicts.
pub const CHAIN_TOL: f64 = 1e-10;

fn line<T: Real>(label: &str, relation: Relation, lhs: T, rhs: T) -> ChainLine<T> {
    let slack = lhs - rhs;
    let tol = T::lit(CHAIN_TOL);
    let holds = match relation {
        Relation::Eq => slack.abs() <= tol,
        Relation::Ge => slack >= -tol,
    };
    ChainLine { label: label.to_string(), relation, lhs, rhs, slack, holds }
}

/// Everything the chain needs, computed once.
pub(crate) struct ChainInputs<'a, T: Real> {
    pub spec: &'a ProtocolSpec<T>,
    pub joint: &'a JointDistribution<T>,
    pub good: &'a GoodSet<T>,
    pub prover: &'a TabulatedProver<T>,
    pub cheat: T,
    pub soundness: T,
    pub q: T,
    pub q_hash: Option<T>,
    pub c: T,
    pub t: usize,
    pub auto_delta: bool,
}

type PredCache<T> = BTreeMap<(Vec<u64>, Option<u64>), QuantumPredicate<T>>;

struct Walker<'a, T: Real> {
    spec: &'a ProtocolSpec<T>,
    children: BTreeMap<Vec<u64>, Vec<(u64, T)>>,
    marg: BTreeMap<Vec<u64>, T>,
    prover: &'a TabulatedProver<T>,
    good: Option<&'a GoodSet<T>>,
    cache: PredCache<T>,
}

impl<T: Real> Walker<'_, T> {
    /// Closed-form acceptance of the cheating prover against honest Arthur.
    fn walk(&mut self, prefix: &mut Vec<u64>, weight: T) -> Result<T> {
        let len = prefix.len();
        if len == self.spec.message_lengths.len() {
            let rho = self.prover.final_state(prefix);
            return Ok(weight * accept_cached(self.spec, &mut self.cache, prefix, None, &rho)?);
        }
        let mut total = T::zero();
        if len.is_multiple_of(2) {
            let m = self.marg.get(prefix.as_slice()).copied().unwrap_or_else(T::zero);
            if m <= T::zero() {
                if self.good.is_some() {
                    return Ok(T::zero());
                }
                prefix.push(0);
                total = self.walk(prefix, weight)?;
                prefix.pop();
                return Ok(total);
            }
            let kids = self.children.get(prefix.as_slice()).cloned().unwrap_or_default();
            for (a, p) in kids {
                prefix.push(a);
                if self.good.is_none_or(|g| g.members[len / 2].contains(prefix.as_slice())) {
                    total += self.walk(prefix, weight * p / m)?;
                }
                prefix.pop();
            }
        } else {
            let n = self.spec.message_lengths[len];
            let w = inv_pow2::<T>(n);
            for b in 0..1u64 << n {
                prefix.push(b);
                total += self.walk(prefix, weight * w)?;
                prefix.pop();
            }
        }
        Ok(total)
    }
}

fn children_of<T: Real>(marg: &BTreeMap<Vec<u64>, T>) -> BTreeMap<Vec<u64>, Vec<(u64, T)>> {
    let mut out: BTreeMap<Vec<u64>, Vec<(u64, T)>> = BTreeMap::new();
    for (prefix, &p) in marg {
        if prefix.len() % 2 == 1 && p > T::zero() {
            out.entry(prefix[..prefix.len() - 1].to_vec()).or_default().push((prefix[prefix.len() - 1], p));
        }
    }
    out
}

/// `Pr[accept, Good]` and `Pr[Good]` over the joint, failures rejected.
fn good_acceptance<T: Real>(inp: &ChainInputs<T>, cache: &mut PredCache<T>) -> Result<T> {
    let mut acc = T::zero();
    for e in inp.joint.entries.iter().filter(|e| !e.failed && inp.good.contains(&e.messages)) {
        acc += accept_cached(inp.spec, cache, &e.messages, e.coins, &e.mass)?;
    }
    Ok(acc)
}

fn public_coin_chain<T: Real>(inp: &ChainInputs<T>) -> Result<Vec<ChainLine<T>>> {
    let spec = inp.spec;
    let k = spec.k();
    let marg = inp.joint.prefix_marginals();
    let children = children_of(&marg);
    let mut walker =
        Walker { spec, children, marg: marg.clone(), prover: inp.prover, good: None, cache: BTreeMap::new() };
    let closed = walker.walk(&mut Vec::new(), T::one())?;
    walker.good = Some(inp.good);
    let restricted = walker.walk(&mut Vec::new(), T::one())?;
    let mut cache = walker.cache;

    let delta = inp.good.delta;
    let factor = delta / (inp.c * ct_squared_factor::<T>(inp.t));
    let factor_k = factor.powi(k as i32);
    // sum over good transcripts of Pr[transcript] * acceptance of the prover's final state
    let mut product = T::zero();
    let mut ratio = T::zero();
    for (prefix, &p) in marg.iter().filter(|(m, p)| m.len() == 2 * k && **p > T::zero()) {
        if !inp.good.contains(prefix) {
            continue;
        }
        let acc = accept_cached(spec, &mut cache, prefix, None, &inp.prover.final_state(prefix))?;
        product += p * acc;
        if k == 1 {
            ratio += marg[&prefix[..1]] * inv_pow2::<T>(spec.message_lengths[1]) * acc;
        }
    }
    let good_acc = good_acceptance(inp, &mut cache)?;
    let q = inp.q;
    let kd = T::from_count(k as u64) * delta;

    let mut lines = vec![
        line("soundness >= cheat", Relation::Ge, inp.soundness, inp.cheat),
        line("cheat = closed-form sum", Relation::Eq, inp.cheat, closed),
        line("closed-form >= sum over Good", Relation::Ge, closed, restricted),
    ];
    let mut last = restricted;
    if k == 1 {
        lines.push(line("sum over Good >= ratio form", Relation::Ge, last, ratio));
        last = ratio;
    }
    let steps = [
        ("(d/ct^2)^k * sum_Good Pr[a] acc", factor_k * product),
        ("(d/ct^2)^k * Pr[accept, Good]", factor_k * good_acc),
        ("(d/ct^2)^k * (q - Pr[not Good])", factor_k * (q - (T::one() - inp.good.mass))),
        ("(d/ct^2)^k * (q - k d)", factor_k * (q - kd)),
    ];
    for (label, rhs) in steps {
        lines.push(line(label, Relation::Ge, last, rhs));
        last = rhs;
    }
    if inp.auto_delta {
        let ct2 = inp.c * ct_squared_factor::<T>(inp.t);
        let target = (q / T::from_count(2 * k as u64)).powi(k as i32) * (q / T::lit(2.0)) / ct2.powi(k as i32);
        lines.push(line("cheat >= (q/2k)^k (q/2) / (ct^2)^k", Relation::Ge, inp.cheat, target));
    }
    Ok(lines)
}

fn private_coin_chain<T: Real>(inp: &ChainInputs<T>) -> Result<Vec<ChainLine<T>>> {
    let spec = inp.spec;
    let nc = spec.coin_length;
    let wc = inv_pow2::<T>(nc);
    let mut cache: PredCache<T> = BTreeMap::new();
    let marg_a: BTreeMap<u64, T> = inp.joint.prefix_marginals().into_iter().filter(|(p, _)| p.len() == 1).map(|(p, v)| (p[0], v)).collect();
    let mut p_ar: BTreeMap<(u64, u64), T> = BTreeMap::new();
    for e in &inp.joint.entries {
        *p_ar.entry((e.messages[0], e.coins.unwrap_or(0))).or_insert_with(T::zero) += e.probability;
    }
    let by_coins = conditional_finals(inp.joint, spec.final_qubits, |e| (e.messages[0], e.coins.unwrap_or(0)))?;
    let delta = inp.good.delta;
    let factor = delta / (inp.c * ct_squared_factor::<T>(inp.t));

    let (mut closed, mut restricted, mut ratio, mut via_reply, mut via_coins) =
        (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for (&alpha, &pa) in marg_a.iter().filter(|(_, p)| **p > T::zero()) {
        let good = inp.good.members[0].contains(&vec![alpha]);
        for r in 0..1u64 << nc {
            let beta = spec.ip_response(r, alpha)?;
            let msgs = [alpha, beta];
            let acc = accept_cached(spec, &mut cache, &msgs, Some(r), &inp.prover.final_state(&msgs))?;
            closed += pa * wc * acc;
            if !good {
                continue;
            }
            restricted += pa * wc * acc;
            let par = p_ar.get(&(alpha, r)).copied().unwrap_or_else(T::zero);
            if par > T::zero() {
                ratio += pa * wc * acc;
                via_reply += par * acc;
                let rho = by_coins.get(&(alpha, r)).cloned().unwrap_or_else(|| DensityMatrix::zero_state(spec.final_qubits));
                via_coins += par * accept_cached(spec, &mut cache, &msgs, Some(r), &rho)?;
            }
        }
    }
    let good_acc = good_acceptance(inp, &mut cache)?;
    let q = inp.q;
    let mut lines = Vec::new();
    if let Some(qh) = inp.q_hash {
        lines.push(line("q over H = q over all functions", Relation::Eq, qh, q));
    }
    lines.extend([
        line("soundness >= cheat", Relation::Ge, inp.soundness, inp.cheat),
        line("cheat = closed-form sum", Relation::Eq, inp.cheat, closed),
        line("closed-form >= sum over Good", Relation::Ge, closed, restricted),
        line("sum over Good >= ratio form", Relation::Ge, restricted, ratio),
        line("ratio form >= (d/ct^2) sum Pr[a,r] acc(C | a, B=V^r(a))", Relation::Ge, ratio, factor * via_reply),
        line("Markov substitution: C | a, B  ->  C | a, F(a)=r", Relation::Eq, factor * via_reply, factor * via_coins),
        line("(d/ct^2) * Pr[accept, Good]", Relation::Ge, factor * via_coins, factor * good_acc),
        line("(d/ct^2) * (q - Pr[not Good])", Relation::Ge, factor * good_acc, factor * (q - (T::one() - inp.good.mass))),
        line("(d/ct^2) * (q - d)", Relation::Ge, factor * (q - (T::one() - inp.good.mass)), factor * (q - delta)),
    ]);
    if inp.auto_delta {
        let target = q * q / (T::lit(4.0) * inp.c * ct_squared_factor::<T>(inp.t));
        lines.push(line("cheat >= q^2 / (4 c t^2)", Relation::Ge, inp.cheat, target));
    }
    Ok(lines)
}

pub(crate) fn inequality_chain<T: Real>(inp: &ChainInputs<T>) -> Result<Vec<ChainLine<T>>> {
    match inp.spec.shape {
        Shape::Ip3 => private_coin_chain(inp),
        _ => public_coin_chain(inp),
    }
}

pub(crate) fn good_set_for<T: Real>(
    joint: &JointDistribution<T>,
    stats: &MinEntropyStats<T>,
    delta: T,
    c: T,
    t: usize,
) -> GoodSet<T> {
    good_set_any(joint, stats, delta, c, t)
}

/// Largest trace-norm gap between the conditional law of `(F(a), C')` given
/// `(A' = a, B' = b)` and the product of its marginals.
pub fn markov_network_check<T: Real>(joint: &JointDistribution<T>) -> Result<T> {
    if joint.shape != Shape::Ip3 {
        return Err(Error::WrongShape { expected: "ip3 joint".into(), got: joint.shape.to_string() });
    }
    // (a, b) -> r -> failure flag -> (probability, mass)
    type Cell<T> = BTreeMap<u64, BTreeMap<bool, (T, DensityMatrix<T>)>>;
    let mut groups: BTreeMap<(u64, u64), Cell<T>> = BTreeMap::new();
    for e in &joint.entries {
        let slot = groups
            .entry((e.messages[0], e.messages[1]))
            .or_default()
            .entry(e.coins.unwrap_or(0))
            .or_default()
            .entry(e.failed)
            .or_insert_with(|| (T::zero(), DensityMatrix::null(e.mass.num_qubits())));
        slot.0 += e.probability;
        slot.1.add_scaled(&e.mass, T::one())?;
    }
    let mut worst = T::zero();
    for by_r in groups.values() {
        let total = by_r.values().flat_map(|f| f.values()).fold(T::zero(), |a, (p, _)| a + *p);
        if total <= T::zero() {
            continue;
        }
        let mut mean: BTreeMap<bool, DensityMatrix<T>> = BTreeMap::new();
        for f in by_r.values() {
            for (&flag, (_, m)) in f {
                let slot = mean.entry(flag).or_insert_with(|| DensityMatrix::null(m.num_qubits()));
                slot.add_scaled(m, T::one() / total)?;
            }
        }
        let mut err = T::zero();
        for f in by_r.values() {
            let pr = f.values().fold(T::zero(), |a, (p, _)| a + *p) / total;
            for (flag, avg) in &mean {
                let mut diff = f.get(flag).map_or_else(|| DensityMatrix::null(avg.num_qubits()), |(_, m)| m.scaled(T::one() / total));
                diff.add_scaled(avg, -pr)?;
                err += diff.trace_norm();
            }
        }
        worst = worst.max(err);
    }
    Ok(worst)
}
