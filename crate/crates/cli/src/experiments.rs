//! One function per subcommand. Each returns the staged artifacts and the
//! list of checks that make up its verdict.

use std::path::Path;

use serde::Serialize;
use serde_json::json;

use zklab_core::extract::{
    algorithm_z, algorithm_z_k, algorithm_z_prime, sims, DeltaPolicy, DiagnosticsReport, ExtractConfig, HashingRule,
    Mode, OracleSource,
};
use zklab_core::fieldhash::{audit_family, HashFamily};
use zklab_core::protocols::{
    gi_honest_prover, gi_protocol_with_shape, gi_witness_simulator, isomorphism, optimal_cheater, parallel_compose,
    run_protocol, Predicate, ProtocolSpec, ProverRole, Shape, VerifierRole,
};
use zklab_core::searchlab;
use zklab_core::QueryAlgorithm;

use crate::config::{fork_seed, RunConfig};
use crate::output::Artifacts;
use crate::CliError;

/// A named pass/fail assertion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub artifacts: Artifacts,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Stages `report.json` as `{command, result, checks, passed}`.
    fn report<S: Serialize>(&mut self, command: &str, result: &S) -> Result<(), CliError> {
        let value = json!({
            "command": command,
            "result": result,
            "checks": self.checks,
            "passed": self.passed(),
        });
        self.artifacts.json("report.json", &value)
    }
}

fn parse_json<V: serde::de::DeserializeOwned>(path: &Path) -> Result<V, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse { path: path.to_path_buf(), message: e.to_string() })
}

fn choice<'a>(value: &'a Option<String>, key: &str, default: &'a str, allowed: &[&str]) -> Result<&'a str, CliError> {
    let v = value.as_deref().unwrap_or(default);
    if allowed.contains(&v) {
        Ok(v)
    } else {
        Err(CliError::Config(format!("`{key}` = {v:?}, expected one of {allowed:?}")))
    }
}

pub fn hash_audit(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (n1, n2, t) = (cfg.n1.unwrap_or(2), cfg.n2.unwrap_or(2), cfg.t.unwrap_or(3));
    let family = HashFamily::new(n1, n2, t)?;
    let audit = audit_family(&family, cfg.enum_limit())?;
    let mut out = Outcome::default();
    out.checks.push(Check::new(
        "joint outputs uniform",
        audit.passed(),
        format!("{} members, max deviation {}", audit.family_size, audit.max_deviation),
    ));
    let rows: Vec<(usize, usize, u64)> = audit
        .point_counts
        .iter()
        .enumerate()
        .flat_map(|(a, row)| row.iter().enumerate().map(move |(b, &c)| (a, b, c)))
        .collect();
    out.artifacts.csv("point_counts.csv", &["alpha", "beta", "count"], &rows)?;
    out.report("hash-audit", &audit)?;
    Ok(out)
}

fn load_spec(cfg: &RunConfig) -> Result<ProtocolSpec<f64>, CliError> {
    match &cfg.spec {
        Some(p) => {
            let spec: ProtocolSpec<f64> = parse_json(p)?;
            spec.validate()?;
            Ok(spec)
        }
        None => Ok(gi_instance(cfg)?.0),
    }
}

type GiBuild = (ProtocolSpec<f64>, Option<Vec<usize>>);

fn gi_instance(cfg: &RunConfig) -> Result<GiBuild, CliError> {
    let vertices = cfg.vertices.unwrap_or(3);
    let pair = choice(&cfg.pair, "pair", "iso", &["iso", "noniso"])?;
    let shape = match choice(&cfg.shape, "shape", "qam3", &["qam3", "ip3"])? {
        "ip3" => Shape::Ip3,
        _ => Shape::Qam3,
    };
    let (g0, g1) = if pair == "iso" { sims::isomorphic_pair(vertices)? } else { sims::non_isomorphic_pair(vertices)? };
    let gi = gi_protocol_with_shape::<f64>(&g0, &g1, cfg.copies.unwrap_or(1), shape)?;
    Ok((gi.spec, gi.witness))
}

fn gi_simulator(spec: &ProtocolSpec<f64>, witness: Option<&[usize]>, kind: &str) -> Result<QueryAlgorithm, CliError> {
    Ok(match kind {
        "witness" => gi_witness_simulator(spec, witness)?,
        "fixed" => sims::gi_fixed_transcript_simulator(spec)?,
        "guess" => sims::gi_guessing_simulator(spec)?,
        "commit" => sims::gi_query_then_commit_simulator(spec)?,
        _ => unreachable!("validated by choice"),
    })
}

fn sim_kind<'a>(cfg: &'a RunConfig, witness: Option<&[usize]>) -> Result<&'a str, CliError> {
    let default = if witness.is_some() { "witness" } else { "guess" };
    choice(&cfg.sim_kind, "sim_kind", default, &["witness", "fixed", "guess", "commit"])
}

fn load_simulator(cfg: &RunConfig, spec: &ProtocolSpec<f64>) -> Result<QueryAlgorithm, CliError> {
    if let Some(p) = &cfg.simulator {
        return parse_json(p);
    }
    let Predicate::GraphIsomorphism { g0, g1, .. } = &spec.predicate else {
        return Err(CliError::Config("missing required key `simulator` for a non graph-isomorphism spec".into()));
    };
    let witness = isomorphism(g0, g1);
    gi_simulator(spec, witness.as_deref(), sim_kind(cfg, witness.as_deref())?)
}

#[derive(Serialize)]
struct TranscriptRow {
    messages: String,
    coins: Option<u64>,
    probability: f64,
    acceptance: f64,
}

fn join(values: &[u64]) -> String {
    values.iter().map(u64::to_string).collect::<Vec<_>>().join("-")
}

pub fn protocol_run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = load_spec(cfg)?;
    let verifier = match spec.shape {
        Shape::Ip3 => VerifierRole::HonestIpVerifier { coins: None },
        _ => VerifierRole::HonestArthur,
    };
    let mut out = Outcome::default();
    let (prover, label) = match choice(&cfg.prover, "prover", "optimal", &["optimal", "honest"])? {
        "honest" => {
            let Predicate::GraphIsomorphism { g0, g1, copies } = &spec.predicate else {
                return Err(CliError::Config("an honest prover is only built for graph isomorphism specs".into()));
            };
            (gi_honest_prover(g0, g1, *copies)?, "honest")
        }
        _ => {
            let (value, strategy) = optimal_cheater(&spec)?;
            out.checks.push(Check::new("optimum recorded", true, format!("{value}")));
            (ProverRole::Tabulated(strategy), "optimal")
        }
    };
    let dist = run_protocol(&spec, &prover, &verifier)?;
    if label == "honest" {
        let ok = dist.acceptance >= 1.0 - spec.completeness_error - 1e-10;
        out.checks.push(Check::new("completeness", ok, format!("accept {}", dist.acceptance)));
    }
    let rows: Vec<TranscriptRow> = dist
        .entries
        .iter()
        .map(|e| TranscriptRow {
            messages: join(&e.transcript.classical_messages),
            coins: e.transcript.coins,
            probability: e.probability,
            acceptance: e.acceptance,
        })
        .collect();
    out.artifacts.csv("transcripts.csv", &["messages", "coins", "probability", "acceptance"], &rows)?;
    out.report(
        "protocol run",
        &json!({ "prover": label, "acceptance": dist.acceptance, "transcripts": rows.len(),
                 "total_probability": dist.total_probability() }),
    )?;
    Ok(out)
}

pub fn protocol_compose(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = load_spec(cfg)?;
    let copies = *cfg.require(&cfg.copies, "copies")?;
    let composed = parallel_compose(&spec, copies)?;
    let mut out = Outcome::default();
    out.artifacts.json("spec.json", &composed)?;
    out.report(
        "protocol compose",
        &json!({ "copies": copies, "message_lengths": composed.message_lengths, "final_qubits": composed.final_qubits,
                 "soundness_error": composed.soundness_error }),
    )?;
    Ok(out)
}

pub fn gi_build(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (spec, witness) = gi_instance(cfg)?;
    let kind = sim_kind(cfg, witness.as_deref())?;
    let sim = gi_simulator(&spec, witness.as_deref(), kind)?;
    let optimum = optimal_cheater(&spec).ok().map(|(v, _)| v);
    let mut out = Outcome::default();
    out.artifacts.json("spec.json", &spec)?;
    out.artifacts.json("simulator.json", &sim)?;
    out.report(
        "gi build",
        &json!({ "message_lengths": spec.message_lengths, "final_qubits": spec.final_qubits, "witness": witness,
                 "simulator": kind, "simulator_qubits": sim.num_qubits, "optimal_cheat": optimum }),
    )?;
    Ok(out)
}

/// Extraction algorithm to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ExtractKind {
    Zq3,
    Zip3,
    Zk,
}

pub fn extract_config(cfg: &RunConfig) -> Result<ExtractConfig<f64>, CliError> {
    let mode = match choice(&cfg.mode, "mode", "exact", &["exact", "mc"])? {
        "mc" => Mode::MonteCarlo { samples: cfg.samples.unwrap_or(4096), seed: fork_seed(cfg.seed(), "extract") },
        _ => Mode::Exact,
    };
    let rule = match choice(&cfg.rule, "rule", "full-prefix", &["full-prefix", "last-message"])? {
        "last-message" => HashingRule::LastMessage,
        _ => HashingRule::FullPrefix,
    };
    let source = match choice(&cfg.source, "source", "hash", &["hash", "functions"])? {
        "functions" => OracleSource::AllFunctions,
        _ => OracleSource::HashFamily,
    };
    Ok(ExtractConfig {
        t: cfg.t.unwrap_or(1),
        c: cfg.c.unwrap_or(10.0),
        delta: cfg.delta.map_or(DeltaPolicy::Auto, DeltaPolicy::Fixed),
        mode,
        source,
        rule,
        enum_limit: cfg.enum_limit(),
    })
}

#[derive(Serialize)]
struct ChainRow<'a> {
    index: usize,
    label: &'a str,
    relation: &'a str,
    lhs: f64,
    rhs: f64,
    slack: f64,
    holds: bool,
}

#[derive(Serialize)]
struct SRowOut {
    round: usize,
    prefix: String,
    probability: f64,
    s: f64,
    argmax: u64,
    bound: f64,
}

pub fn extraction_checks(r: &DiagnosticsReport<f64>) -> Vec<Check> {
    let mut checks = vec![
        Check::new("inequality chain", r.chain_holds, format!("{} lines", r.chain.len())),
        Check::new(
            "expected s within c t^2 / 2^n",
            r.expected_s_within_bounds(),
            format!("{:?} vs {:?}", r.rounds.iter().map(|x| x.expected_s).collect::<Vec<_>>(), r.s_bounds),
        ),
        Check::new("recorded verifier messages unused", r.b_unused, String::new()),
    ];
    if let Some(m) = r.markov_error {
        checks.push(Check::new("Markov factorization", m <= 1e-10, format!("{m:e}")));
    }
    checks
}

pub fn extract(cfg: &RunConfig, kind: ExtractKind) -> Result<Outcome, CliError> {
    let spec = load_spec(cfg)?;
    let sim = load_simulator(cfg, &spec)?;
    extract_with(&spec, &sim, &extract_config(cfg)?, kind)
}

pub fn extract_with(
    spec: &ProtocolSpec<f64>,
    sim: &QueryAlgorithm,
    ecfg: &ExtractConfig<f64>,
    kind: ExtractKind,
) -> Result<Outcome, CliError> {
    let extraction = match kind {
        ExtractKind::Zq3 => algorithm_z(spec, sim, ecfg)?,
        ExtractKind::Zip3 => algorithm_z_prime(spec, sim, ecfg)?,
        ExtractKind::Zk => algorithm_z_k(spec, sim, ecfg)?,
    };
    let r = &extraction.report;
    let mut out = Outcome { checks: extraction_checks(r), ..Outcome::default() };
    let chain: Vec<ChainRow> = r
        .chain
        .iter()
        .enumerate()
        .map(|(index, l)| ChainRow {
            index,
            label: &l.label,
            relation: if l.relation == zklab_core::extract::Relation::Eq { "=" } else { ">=" },
            lhs: l.lhs,
            rhs: l.rhs,
            slack: l.slack,
            holds: l.holds,
        })
        .collect();
    out.artifacts.csv("chain.csv", &["index", "label", "relation", "lhs", "rhs", "slack", "holds"], &chain)?;
    let srows: Vec<SRowOut> = r
        .rounds
        .iter()
        .zip(&r.s_bounds)
        .flat_map(|(round, &bound)| {
            round.rows.iter().map(move |row| SRowOut {
                round: round.round,
                prefix: join(&row.prefix),
                probability: row.probability,
                s: row.s,
                argmax: row.argmax,
                bound,
            })
        })
        .collect();
    out.artifacts.csv("s_table.csv", &["round", "prefix", "probability", "s", "argmax", "bound"], &srows)?;
    out.report("extract", r)?;
    Ok(out)
}

/// Search experiment to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SearchKind {
    Classical,
    Grover,
    Equiv,
    Reduce,
}

#[derive(Serialize)]
struct SweepRow {
    t: usize,
    n2: usize,
    measured: f64,
    bound: f64,
    slack: f64,
    closed_form: f64,
}

pub fn searchlab_run(cfg: &RunConfig, kind: SearchKind) -> Result<Outcome, CliError> {
    let (tmax, n2) = (cfg.t.unwrap_or(3), cfg.n2.unwrap_or(4) as usize);
    let mut out = Outcome::default();
    match kind {
        SearchKind::Classical | SearchKind::Grover => {
            let mut rows = Vec::new();
            {
                for t in 0..=tmax {
                    let (o, closed, tol): (searchlab::SearchOutcome<f64>, f64, f64) = if kind == SearchKind::Classical {
                        let n1 = (usize::BITS - t.leading_zeros()) as usize;
                        (searchlab::classical_optimal_search::<f64>(t, n1.max(1), n2)?, searchlab::classical_closed_form(t, n2), 1e-12)
                    } else {
                        (searchlab::grover_search::<f64>(t, n2)?, searchlab::grover_closed_form(t, n2), 1e-9)
                    };
                    let tag = format!("t={t} n2={n2}");
                    out.checks.push(Check::new(format!("closed form {tag}"), (o.measured - closed).abs() <= tol, format!("{}", o.measured)));
                    if kind == SearchKind::Classical || t >= 1 {
                        out.checks.push(Check::new(format!("bound {tag}"), o.within_bound(), format!("{} <= {}", o.measured, o.bound)));
                    }
                    rows.push(SweepRow { t, n2, measured: o.measured, bound: o.bound, slack: o.slack, closed_form: closed });
                }
            }
            let name = if kind == SearchKind::Classical { "classical" } else { "grover" };
            out.artifacts.csv("sweep.csv", &["t", "n2", "measured", "bound", "slack", "closed_form"], &rows)?;
            out.report("searchlab", &json!({ "experiment": name, "rows": rows }))?;
        }
        SearchKind::Equiv => {
            #[derive(Serialize)]
            struct Row {
                algorithm: &'static str,
                queries: usize,
                distance: f64,
                control_distance: f64,
            }
            let mut rows = Vec::new();
            for (name, alg) in searchlab::equivalence_test_algorithms::<f64>()? {
                let distance = searchlab::twise_equivalence_check(&alg, 2, 1, None)?;
                let control_distance = searchlab::twise_equivalence_check(&alg, 2, 1, Some(1))?;
                out.checks.push(Check::new(format!("{name} equivalent"), distance <= 1e-10, format!("{distance:e}")));
                rows.push(Row { algorithm: name, queries: alg.oracle_slots(), distance, control_distance });
            }
            let control = rows.iter().map(|r| r.control_distance).fold(0.0, f64::max);
            out.checks.push(Check::new("1-wise control separates", control > 1e-3, format!("{control}")));
            out.artifacts.csv("equivalence.csv", &["algorithm", "queries", "distance", "control_distance"], &rows)?;
            out.report("searchlab", &json!({ "experiment": "equiv", "rows": rows }))?;
        }
        SearchKind::Reduce => {
            #[derive(Serialize)]
            struct Row {
                beta: String,
                success: f64,
                direct: f64,
                x_queries: usize,
                choices: u64,
            }
            let alg = reduction_test_algorithm()?;
            let mut rows = Vec::new();
            for beta in [[0u64, 0], [0, 1], [1, 0], [1, 1]] {
                let avg = searchlab::algorithm_b_exhaustive(&alg, 1, 1, &beta)?;
                let tag = join(&beta);
                out.checks.push(Check::new(format!("success matches beta={tag}"), (avg.success - avg.direct).abs() <= 1e-10, format!("{} vs {}", avg.success, avg.direct)));
                out.checks.push(Check::new(format!("x queries <= 2t beta={tag}"), avg.max_x_queries <= 2 * alg.oracle_slots(), format!("{}", avg.max_x_queries)));
                rows.push(Row { beta: tag, success: avg.success, direct: avg.direct, x_queries: avg.max_x_queries, choices: avg.choices });
            }
            out.artifacts.csv("reduction.csv", &["beta", "success", "direct", "x_queries", "choices"], &rows)?;
            out.report("searchlab", &json!({ "experiment": "reduce", "rows": rows }))?;
        }
    }
    Ok(out)
}

/// One query on a uniform 1-bit input, answer folded back into the output.
pub fn reduction_test_algorithm() -> Result<QueryAlgorithm, CliError> {
    use zklab_core::qcore::{OutputLayout, Step};
    let steps = vec![
        Step::H { wire: 0 },
        Step::Oracle { round: 0, input: vec![0], output: vec![1] },
        Step::Cx { control: 1, target: 0 },
        Step::Ry { wire: 0, angle: 0.3 },
    ];
    let layout = OutputLayout { prover_messages: vec![vec![0]], ..OutputLayout::default() };
    Ok(QueryAlgorithm::new(2, steps, layout, 1)?)
}
