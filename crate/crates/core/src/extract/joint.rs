use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_enumerable, Error, Result};
use crate::fieldhash::{HashFamily, DEFAULT_ENUM_LIMIT};
use crate::protocols::{field, pack, ProtocolSpec, Shape};
use crate::qcore::{predicate_accept, read_register, DensityMatrix, FunctionOracle, PreparedAlgorithm, QueryAlgorithm};
use crate::scalar::{Complex, Real};

/// Worlds handled per parallel task; fixed so that sums are grouped the same
/// way on every machine.
const CHUNK: u64 = 512;

/// Where the verifier functions come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleSource {
    /// `H(2t+1)` per round.
    #[default]
    HashFamily,
    /// Every function of the right shape, uniformly.
    AllFunctions,
}

/// What the round-`i` verifier function reads.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HashingRule {
    /// The whole transcript so far.
    #[default]
    FullPrefix,
    /// Only the prover message just sent. Kept as a regression target.
    LastMessage,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    /// Every member of the (product) family.
    #[default]
    Exact,
    /// `samples` members drawn with a seeded stream.
    MonteCarlo { samples: u64, seed: u64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub enum DeltaPolicy<T: Real> {
    /// `delta = q / (2k)`.
    #[default]
    Auto,
    Fixed(T),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ExtractConfig<T: Real> {
    /// Query bound; the families are `(2t+1)`-wise independent.
    pub t: usize,
    /// The search-lemma constant.
    pub c: T,
    #[serde(default)]
    pub delta: DeltaPolicy<T>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub source: OracleSource,
    #[serde(default)]
    pub rule: HashingRule,
    #[serde(default = "default_limit")]
    pub enum_limit: u64,
}

fn default_limit() -> u64 {
    DEFAULT_ENUM_LIMIT
}

impl<T: Real> Default for ExtractConfig<T> {
    fn default() -> Self {
        ExtractConfig {
            t: 1,
            c: T::lit(10.0),
            delta: DeltaPolicy::Auto,
            mode: Mode::Exact,
            source: OracleSource::HashFamily,
            rule: HashingRule::FullPrefix,
            enum_limit: DEFAULT_ENUM_LIMIT,
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum RoundFamily {
    Hash(HashFamily),
    Functions { in_bits: usize, out_bits: usize },
}

impl RoundFamily {
    fn new(source: OracleSource, in_bits: usize, out_bits: usize, t: usize) -> Result<Self> {
        Ok(match source {
            OracleSource::HashFamily => {
                let narrow = |n: usize| u8::try_from(n).map_err(|_| Error::domain("hash width", format!("{n} bits")));
                RoundFamily::Hash(HashFamily::new(narrow(in_bits)?, narrow(out_bits)?, 2 * t + 1)?)
            }
            OracleSource::AllFunctions => {
                if in_bits > 20 {
                    return Err(Error::EnumerationLimit {
                        what: format!("functions on {in_bits} bits"),
                        size_log2: u32::MAX,
                        limit: 1 << 20,
                    });
                }
                RoundFamily::Functions { in_bits, out_bits }
            }
        })
    }

    fn size_log2(&self) -> u32 {
        match *self {
            RoundFamily::Hash(f) => f.size_log2(),
            RoundFamily::Functions { in_bits, out_bits } => u32::try_from(out_bits << in_bits).unwrap_or(u32::MAX),
        }
    }

    fn table(&self, index: u64) -> Result<Vec<u64>> {
        match *self {
            RoundFamily::Hash(f) => Ok(f.function_at(index)?.table()),
            RoundFamily::Functions { in_bits, out_bits } => {
                Ok((0..1usize << in_bits).map(|x| field(index, x * out_bits, out_bits)).collect())
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u64> {
        match *self {
            RoundFamily::Hash(f) => f.sample(rng).table(),
            RoundFamily::Functions { in_bits, out_bits } => {
                (0..1usize << in_bits).map(|_| rng.random_range(0..1u64 << out_bits)).collect()
            }
        }
    }
}

/// One cell of the joint distribution.
///
/// `messages` is the classical transcript as the extraction algorithm sees
/// it: prover messages as measured, verifier messages recomputed from the
/// verifier functions. `recorded` holds the verifier messages as the
/// simulator wrote them, `coins` the private coins `F(a)` (or `H(a)`).
#[derive(Clone, Debug, PartialEq)]
pub struct JointEntry<T: Real> {
    pub messages: Vec<u64>,
    pub recorded: Vec<u64>,
    pub coins: Option<u64>,
    pub failed: bool,
    pub probability: T,
    /// Final-message state weighted by `probability`.
    pub mass: DensityMatrix<T>,
}

/// Joint law of the transcript, coins and final message, with the verifier
/// functions averaged out.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution<T: Real> {
    pub shape: Shape,
    pub source: OracleSource,
    pub rule: HashingRule,
    pub entries: Vec<JointEntry<T>>,
    /// Number of verifier-function draws (or family members) averaged.
    pub worlds: u64,
    /// Sampling standard error of `q`; zero in exact mode.
    pub q_std_error: T,
}

type Key = (Vec<u64>, Vec<u64>, Option<u64>, bool);
type Cells<T> = BTreeMap<Key, (T, DensityMatrix<T>)>;

impl<T: Real> JointDistribution<T> {
    pub fn total_probability(&self) -> T {
        self.entries.iter().fold(T::zero(), |acc, e| acc + e.probability)
    }

    /// `Pr[Z accepts]`: the predicate on the recomputed transcript, failures
    /// rejected.
    pub fn acceptance(&self, spec: &ProtocolSpec<T>) -> Result<T> {
        let mut cache = BTreeMap::new();
        let mut q = T::zero();
        for e in self.entries.iter().filter(|e| !e.failed) {
            q += accept_cached(spec, &mut cache, &e.messages, e.coins, &e.mass)?;
        }
        Ok(q)
    }

    /// Marginal of every classical prefix, lengths `0..=2k`.
    pub fn prefix_marginals(&self) -> BTreeMap<Vec<u64>, T> {
        let mut out: BTreeMap<Vec<u64>, T> = BTreeMap::new();
        for e in &self.entries {
            for len in 0..=e.messages.len() {
                *out.entry(e.messages[..len].to_vec()).or_insert_with(T::zero) += e.probability;
            }
        }
        out
    }

    /// Copy with the recorded verifier messages replaced by `f(recorded)`.
    pub fn with_recorded(&self, f: impl Fn(&[u64]) -> Vec<u64>) -> Result<Self> {
        let mut cells: Cells<T> = BTreeMap::new();
        for e in &self.entries {
            let key = (e.messages.clone(), f(&e.recorded), e.coins, e.failed);
            add_cell(&mut cells, key, e.probability, &e.mass, T::one())?;
        }
        Ok(JointDistribution { entries: into_entries(cells), ..self.clone_header() })
    }

    pub(crate) fn clone_header(&self) -> Self {
        JointDistribution {
            shape: self.shape,
            source: self.source,
            rule: self.rule,
            entries: Vec::new(),
            worlds: self.worlds,
            q_std_error: self.q_std_error,
        }
    }
}

pub(crate) fn accept_cached<T: Real>(
    spec: &ProtocolSpec<T>,
    cache: &mut BTreeMap<(Vec<u64>, Option<u64>), crate::qcore::QuantumPredicate<T>>,
    messages: &[u64],
    coins: Option<u64>,
    mass: &DensityMatrix<T>,
) -> Result<T> {
    let key = (messages.to_vec(), coins);
    if !cache.contains_key(&key) {
        cache.insert(key.clone(), spec.acceptance(messages, coins)?);
    }
    predicate_accept(&cache[&key], mass)
}

fn add_cell<T: Real>(cells: &mut Cells<T>, key: Key, p: T, mass: &DensityMatrix<T>, w: T) -> Result<()> {
    match cells.get_mut(&key) {
        Some((prob, m)) => {
            *prob += p * w;
            m.add_scaled(mass, w)?;
        }
        None => {
            cells.insert(key, (p * w, mass.scaled(w)));
        }
    }
    Ok(())
}

fn into_entries<T: Real>(cells: Cells<T>) -> Vec<JointEntry<T>> {
    cells
        .into_iter()
        .map(|((messages, recorded, coins, failed), (probability, mass))| JointEntry {
            messages,
            recorded,
            coins,
            failed,
            probability,
            mass,
        })
        .collect()
}

/// Wires read at the end of a simulator run and how to split them.
struct Readout {
    wires: Vec<usize>,
    prover: Vec<usize>,
    verifier: Vec<usize>,
    failure: bool,
    final_wires: Vec<usize>,
}

impl Readout {
    fn decode(&self, mut v: u64) -> (Vec<u64>, Vec<u64>, bool) {
        let mut take = |w: usize| {
            let x = field(v, 0, w);
            v >>= w;
            x
        };
        let prover = self.prover.iter().map(|&w| take(w)).collect();
        let verifier = self.verifier.iter().map(|&w| take(w)).collect();
        let failed = self.failure && take(1) == 1;
        (prover, verifier, failed)
    }
}

fn readout<T: Real>(spec: &ProtocolSpec<T>, sim: &QueryAlgorithm<T>) -> Result<Readout> {
    let layout = &sim.layout;
    let k = spec.k();
    let lens = &spec.message_lengths;
    let widths = |regs: &[Vec<usize>]| regs.iter().map(Vec::len).collect::<Vec<_>>();
    let prover = widths(&layout.prover_messages);
    let want_prover: Vec<usize> = (0..k).map(|i| lens[2 * i]).collect();
    if prover != want_prover {
        return Err(Error::config(format!("simulator prover registers {prover:?}, protocol needs {want_prover:?}")));
    }
    let verifier = widths(&layout.verifier_messages);
    let want_verifier: Vec<usize> = (0..k).map(|i| lens[2 * i + 1]).collect();
    if !verifier.is_empty() && verifier != want_verifier {
        return Err(Error::config(format!("simulator verifier registers {verifier:?}, protocol needs {want_verifier:?}")));
    }
    if layout.final_message.len() != spec.final_qubits {
        return Err(Error::config(format!(
            "simulator final register has {} wires, protocol needs {}",
            layout.final_message.len(),
            spec.final_qubits
        )));
    }
    let mut wires: Vec<usize> = layout.prover_messages.iter().chain(&layout.verifier_messages).flatten().copied().collect();
    wires.extend(layout.failure_flag);
    if wires.len() > 63 {
        return Err(Error::config("measured registers exceed 63 bits"));
    }
    Ok(Readout { wires, prover, verifier, failure: layout.failure_flag.is_some(), final_wires: layout.final_message.clone() })
}

struct Engine<'a, T: Real> {
    spec: &'a ProtocolSpec<T>,
    families: Vec<RoundFamily>,
    rule: HashingRule,
    readout: Readout,
    prepared: PreparedAlgorithm<'a, T>,
}

impl<T: Real> Engine<'_, T> {
    fn oracles(&self, tables: &[Vec<u64>]) -> Result<Vec<FunctionOracle>> {
        let spec = self.spec;
        if spec.shape == Shape::Ip3 {
            let table = &tables[0];
            let f = FunctionOracle::from_fn(spec.message_lengths[0], spec.message_lengths[1], |a| {
                spec.ip_response(table[a as usize], a).unwrap_or(u64::MAX)
            });
            return Ok(vec![f.map_err(|_| Error::config("verifier response does not fit its width"))?]);
        }
        tables
            .iter()
            .enumerate()
            .map(|(i, table)| {
                let (in_bits, out_bits) = (spec.prefix_bits(i + 1), spec.challenge_bits(i + 1));
                match self.rule {
                    HashingRule::FullPrefix => FunctionOracle::new(in_bits, out_bits, table.clone()),
                    HashingRule::LastMessage => {
                        let n = spec.message_lengths[2 * i];
                        FunctionOracle::from_fn(in_bits, out_bits, |x| table[field(x, in_bits - n, n) as usize])
                    }
                }
            })
            .collect()
    }

    /// The transcript the extraction algorithm evaluates, and the coins.
    fn recompute(&self, tables: &[Vec<u64>], prover: &[u64]) -> Result<(Vec<u64>, Option<u64>)> {
        let spec = self.spec;
        if spec.shape == Shape::Ip3 {
            let r = tables[0][prover[0] as usize];
            return Ok((vec![prover[0], spec.ip_response(r, prover[0])?], Some(r)));
        }
        let mut messages = Vec::with_capacity(2 * prover.len());
        for (i, &a) in prover.iter().enumerate() {
            messages.push(a);
            let x = match self.rule {
                HashingRule::FullPrefix => pack(&messages, &spec.message_lengths),
                HashingRule::LastMessage => a,
            };
            messages.push(tables[i][x as usize]);
        }
        Ok((messages, None))
    }

    /// Runs one world and adds its outcomes with weight `w`; returns the
    /// world's acceptance probability when `with_q` is set.
    fn world(&self, tables: &[Vec<u64>], w: T, cells: &mut Cells<T>, with_q: bool) -> Result<T> {
        let run = self.prepared.run(&self.oracles(tables)?)?;
        let mut groups: BTreeMap<u64, Vec<(u64, Complex<T>)>> = BTreeMap::new();
        for &(i, a) in run.state.support() {
            groups.entry(read_register(i, &self.readout.wires)).or_default().push((i, a));
        }
        let mut q = T::zero();
        for (value, amps) in groups {
            let p = amps.iter().fold(T::zero(), |acc, (_, a)| acc + a.norm_sqr());
            if p <= T::lit(T::PRUNE) {
                continue;
            }
            let mass = DensityMatrix::reduce_amplitudes(amps.into_iter(), &self.readout.final_wires);
            let (prover, recorded, failed) = self.readout.decode(value);
            let (messages, coins) = self.recompute(tables, &prover)?;
            if with_q && !failed {
                q += predicate_accept(&self.spec.acceptance(&messages, coins)?, &mass)?;
            }
            add_cell(cells, (messages, recorded, coins, failed), p, &mass, w)?;
        }
        Ok(q)
    }
}

fn merge<T: Real>(into: &mut Cells<T>, from: Cells<T>) -> Result<()> {
    for (key, (p, mass)) in from {
        add_cell(into, key, p, &mass, T::one())?;
    }
    Ok(())
}

/// Runs `sim` against every verifier function of the configured source and
/// collects the joint distribution of transcript, coins and final message.
pub fn build_joint<T: Real>(
    spec: &ProtocolSpec<T>,
    sim: &QueryAlgorithm<T>,
    cfg: &ExtractConfig<T>,
) -> Result<JointDistribution<T>> {
    spec.validate()?;
    let used = sim.oracle_slots();
    if used > cfg.t {
        return Err(Error::BudgetViolation { used, budget: cfg.t });
    }
    if sim.rounds() > spec.k() {
        return Err(Error::config(format!("simulator queries round {} of a {}-round protocol", sim.rounds(), spec.k())));
    }
    let families: Vec<RoundFamily> = if spec.shape == Shape::Ip3 {
        vec![RoundFamily::new(cfg.source, spec.message_lengths[0], spec.coin_length, cfg.t)?]
    } else {
        (1..=spec.k())
            .map(|i| {
                let in_bits = match cfg.rule {
                    HashingRule::FullPrefix => spec.prefix_bits(i),
                    HashingRule::LastMessage => spec.message_lengths[2 * i - 2],
                };
                RoundFamily::new(cfg.source, in_bits, spec.challenge_bits(i), cfg.t)
            })
            .collect::<Result<_>>()?
    };
    let engine = Engine { spec, families, rule: cfg.rule, readout: readout(spec, sim)?, prepared: sim.prepare()? };
    let header = |worlds, q_std_error| JointDistribution {
        shape: spec.shape,
        source: cfg.source,
        rule: cfg.rule,
        entries: Vec::new(),
        worlds,
        q_std_error,
    };
    match cfg.mode {
        Mode::Exact => {
            let sizes: Vec<u32> = engine.families.iter().map(RoundFamily::size_log2).collect();
            let total_log2 = sizes.iter().try_fold(0u32, |a, &s| a.checked_add(s)).unwrap_or(u32::MAX);
            let total = check_enumerable("verifier-function worlds", total_log2, cfg.enum_limit)?;
            let w = T::one() / T::from_count(total);
            let chunks: Vec<Cells<T>> = (0..total.div_ceil(CHUNK))
                .into_par_iter()
                .map(|c| {
                    let mut cells = BTreeMap::new();
                    for world in c * CHUNK..((c + 1) * CHUNK).min(total) {
                        let mut rest = world;
                        let mut tables = Vec::with_capacity(sizes.len());
                        for (fam, &s) in engine.families.iter().zip(&sizes) {
                            tables.push(fam.table(field(rest, 0, s as usize))?);
                            rest >>= s;
                        }
                        engine.world(&tables, w, &mut cells, false)?;
                    }
                    Ok(cells)
                })
                .collect::<Result<_>>()?;
            let mut cells = BTreeMap::new();
            for c in chunks {
                merge(&mut cells, c)?;
            }
            Ok(JointDistribution { entries: into_entries(cells), ..header(total, T::zero()) })
        }
        Mode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::domain("samples", "Monte-Carlo mode needs at least one sample"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let worlds: Vec<Vec<Vec<u64>>> =
                (0..samples).map(|_| engine.families.iter().map(|f| f.sample(&mut rng)).collect()).collect();
            let w = T::one() / T::from_count(samples);
            let chunks: Vec<(Cells<T>, Vec<T>)> = worlds
                .par_chunks(CHUNK as usize)
                .map(|chunk| {
                    let mut cells = BTreeMap::new();
                    let qs = chunk.iter().map(|tables| engine.world(tables, w, &mut cells, true)).collect::<Result<_>>()?;
                    Ok((cells, qs))
                })
                .collect::<Result<_>>()?;
            let mut cells = BTreeMap::new();
            let mut qs = Vec::with_capacity(samples as usize);
            for (c, q) in chunks {
                merge(&mut cells, c)?;
                qs.extend(q);
            }
            let n = T::from_count(samples);
            let mean = qs.iter().fold(T::zero(), |a, &x| a + x) / n;
            let var = qs.iter().fold(T::zero(), |a, &x| a + (x - mean) * (x - mean)) / n;
            Ok(JointDistribution { entries: into_entries(cells), ..header(samples, (var / n).sqrt()) })
        }
    }
}
