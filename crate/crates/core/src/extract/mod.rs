//! Prover extraction from a black-box simulator: run the simulator against
//! random verifier functions, read off the joint law of transcript and final
//! message, and check the inequality chain on it.

mod analysis;
mod joint;
pub mod sims;

use serde::{Deserialize, Serialize};

pub use analysis::{
    build_cheating_prover, cheating_probability, good_set, markov_network_check, min_entropy_stats, ChainLine,
    GoodSet, MinEntropyStats, Relation, RoundStats, SRow, CHAIN_TOL,
};
pub use joint::{build_joint, DeltaPolicy, ExtractConfig, HashingRule, JointDistribution, JointEntry, Mode, OracleSource};

use crate::error::{check_enumerable, Error, Result};
use crate::protocols::{optimal_cheater, ProtocolSpec, Shape, TabulatedProver};
use crate::qcore::QueryAlgorithm;
use crate::scalar::Real;
use analysis::{good_set_for, inequality_chain, ChainInputs};

/// Everything computed about one extraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct DiagnosticsReport<T: Real> {
    pub shape: Shape,
    pub k: usize,
    /// Acceptance of the extraction algorithm over the configured source.
    pub q: T,
    pub q_std_error: T,
    pub worlds: u64,
    pub t: usize,
    pub c: T,
    pub delta: T,
    pub rounds: Vec<RoundStats<T>>,
    /// `c t^2 / 2^n` per round.
    pub s_bounds: Vec<T>,
    pub good: GoodSet<T>,
    pub cheat_prob: T,
    pub optimal_cheat: Option<T>,
    pub soundness_error: T,
    pub chain: Vec<ChainLine<T>>,
    pub chain_holds: bool,
    /// Private-coin only: acceptance over all functions, when enumerable.
    pub q_functions: Option<T>,
    /// Private-coin only: independence gap of the Markov network.
    pub markov_error: Option<T>,
    /// Acceptance unchanged when the simulator's own verifier messages are
    /// scrambled.
    pub b_unused: bool,
}

impl<T: Real> DiagnosticsReport<T> {
    pub fn expected_s_within_bounds(&self) -> bool {
        self.rounds.iter().zip(&self.s_bounds).all(|(r, &b)| r.expected_s <= b + T::lit(CHAIN_TOL))
    }
}

#[derive(Clone, Debug)]
pub struct Extraction<T: Real> {
    pub q: T,
    pub prover: TabulatedProver<T>,
    pub joint: JointDistribution<T>,
    pub report: DiagnosticsReport<T>,
}

fn require_shape<T: Real>(spec: &ProtocolSpec<T>, ok: &[Shape], expected: &str) -> Result<()> {
    if ok.contains(&spec.shape) {
        Ok(())
    } else {
        Err(Error::WrongShape { expected: expected.into(), got: spec.shape.to_string() })
    }
}

/// Three-round public-coin extraction.
pub fn algorithm_z<T: Real>(spec: &ProtocolSpec<T>, sim: &QueryAlgorithm<T>, cfg: &ExtractConfig<T>) -> Result<Extraction<T>> {
    require_shape(spec, &[Shape::Qam3], "qam3")?;
    extract(spec, sim, cfg)
}

/// Three-round private-coin extraction: the simulator's oracle answers
/// `V^{H(a)}(a)` for a random `H`.
pub fn algorithm_z_prime<T: Real>(
    spec: &ProtocolSpec<T>,
    sim: &QueryAlgorithm<T>,
    cfg: &ExtractConfig<T>,
) -> Result<Extraction<T>> {
    require_shape(spec, &[Shape::Ip3], "ip3")?;
    extract(spec, sim, cfg)
}

/// `2k+1`-round public-coin extraction with one verifier function per round.
pub fn algorithm_z_k<T: Real>(spec: &ProtocolSpec<T>, sim: &QueryAlgorithm<T>, cfg: &ExtractConfig<T>) -> Result<Extraction<T>> {
    require_shape(spec, &[Shape::Qam3, Shape::Qam2k1], "qam3 or qam2k1")?;
    if spec.k() == 0 {
        return Err(Error::DegenerateSpec("no verifier rounds".into()));
    }
    extract(spec, sim, cfg)
}

fn extract<T: Real>(spec: &ProtocolSpec<T>, sim: &QueryAlgorithm<T>, cfg: &ExtractConfig<T>) -> Result<Extraction<T>> {
    if !(cfg.c > T::zero()) {
        return Err(Error::domain("c", format!("{} must be positive", cfg.c)));
    }
    let joint = build_joint(spec, sim, cfg)?;
    let q = joint.acceptance(spec)?;

    // The private-coin chain lives on the all-functions joint; fall back to
    // the configured one when that is too large to enumerate.
    let mut q_functions = None;
    let mut functions_joint = None;
    if spec.shape == Shape::Ip3 {
        if cfg.source == OracleSource::AllFunctions {
            q_functions = Some(q);
        } else if matches!(cfg.mode, Mode::Exact) && functions_enumerable(spec, cfg.enum_limit) {
            let fcfg = ExtractConfig { source: OracleSource::AllFunctions, ..cfg.clone() };
            let fj = build_joint(spec, sim, &fcfg)?;
            q_functions = Some(fj.acceptance(spec)?);
            functions_joint = Some(fj);
        }
    }
    let (analysed, q_analysed) = match &functions_joint {
        Some(fj) => (fj, q_functions.unwrap_or(q)),
        None => (&joint, q),
    };

    let k = spec.k();
    let stats = min_entropy_stats(spec, analysed);
    let auto_delta = matches!(cfg.delta, DeltaPolicy::Auto);
    let good = match cfg.delta {
        DeltaPolicy::Fixed(d) => good_set(analysed, &stats, d, cfg.c, cfg.t)?,
        DeltaPolicy::Auto => good_set_for(analysed, &stats, q_analysed / T::from_count(2 * k as u64), cfg.c, cfg.t),
    };
    let analysed_prover = build_cheating_prover(spec, analysed)?;
    let cheat_prob = cheating_probability(&analysed_prover, spec)?;
    let optimal_cheat = optimal_cheater(spec).ok().map(|(v, _)| v);
    let soundness = optimal_cheat.unwrap_or(spec.soundness_error);
    let chain = inequality_chain(&ChainInputs {
        spec,
        joint: analysed,
        good: &good,
        prover: &analysed_prover,
        cheat: cheat_prob,
        soundness,
        q: q_analysed,
        q_hash: functions_joint.as_ref().map(|_| q),
        c: cfg.c,
        t: cfg.t,
        auto_delta,
    })?;
    let markov_error = if spec.shape == Shape::Ip3 { Some(markov_network_check(analysed)?) } else { None };
    let scrambled = joint.with_recorded(|r| r.iter().map(|b| !b).collect())?.acceptance(spec)?;
    let b_unused = (scrambled - q).abs() <= T::lit(CHAIN_TOL);

    let prover = if functions_joint.is_some() { build_cheating_prover(spec, &joint)? } else { analysed_prover };
    let report = DiagnosticsReport {
        shape: spec.shape,
        k,
        q,
        q_std_error: joint.q_std_error,
        worlds: joint.worlds,
        t: cfg.t,
        c: cfg.c,
        delta: good.delta,
        s_bounds: stats.rounds.iter().map(|r| r.bound(cfg.c, cfg.t)).collect(),
        rounds: stats.rounds,
        good,
        cheat_prob,
        optimal_cheat,
        soundness_error: spec.soundness_error,
        chain_holds: chain.iter().all(|l| l.holds),
        chain,
        q_functions,
        markov_error,
        b_unused,
    };
    Ok(Extraction { q, prover, joint, report })
}

fn functions_enumerable<T: Real>(spec: &ProtocolSpec<T>, limit: u64) -> bool {
    let n1 = spec.message_lengths[0];
    n1 < 32
        && u32::try_from(spec.coin_length << n1).is_ok_and(|bits| check_enumerable("functions", bits, limit).is_ok())
}
