//! The fixed experiment battery, with a digest per sub-report.

use serde::Serialize;

use zklab_core::extract::{sims, DeltaPolicy, ExtractConfig, Mode};
use zklab_core::protocols::{gi_protocol, gi_protocol_with_shape, gi_witness_simulator, Shape};

use crate::config::{fork_seed, RunConfig};
use crate::experiments::{self, Check, ExtractKind, Outcome, SearchKind};
use crate::output::sha256_hex;
use crate::CliError;

#[derive(Serialize)]
struct Entry {
    name: String,
    passed: bool,
    sha256: String,
}

fn gi_case(
    name: &str,
    vertices: usize,
    iso: bool,
    shape: Shape,
    sim: &str,
    ecfg: &ExtractConfig<f64>,
    kind: ExtractKind,
) -> Result<(String, Outcome), CliError> {
    let (g0, g1) = if iso { sims::isomorphic_pair(vertices)? } else { sims::non_isomorphic_pair(vertices)? };
    let gi = if shape == Shape::Qam3 { gi_protocol::<f64>(&g0, &g1, 1)? } else { gi_protocol_with_shape::<f64>(&g0, &g1, 1, shape)? };
    let alg = match sim {
        "witness" => gi_witness_simulator(&gi.spec, gi.witness.as_deref())?,
        "commit" => sims::gi_query_then_commit_simulator(&gi.spec)?,
        _ => sims::gi_guessing_simulator(&gi.spec)?,
    };
    Ok((name.to_string(), experiments::extract_with(&gi.spec, &alg, ecfg, kind)?))
}

pub fn run_suite(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let seed = cfg.seed();
    let base = RunConfig { enum_limit: cfg.enum_limit, ..RunConfig::default() };
    let mut runs: Vec<(String, Outcome)> = Vec::new();
    for (n1, n2, t) in [(2u8, 1u8, 3usize), (2, 2, 3), (3, 2, 3)] {
        let c = RunConfig { n1: Some(n1), n2: Some(n2), t: Some(t), ..base.clone() };
        runs.push((format!("hash-audit-{n1}-{n2}-{t}"), experiments::hash_audit(&c)?));
    }
    let search = [
        ("classical", SearchKind::Classical, 4, 6),
        ("grover", SearchKind::Grover, 3, 4),
        ("equiv", SearchKind::Equiv, 2, 1),
        ("reduce", SearchKind::Reduce, 1, 1),
    ];
    for (name, kind, t, n2) in search {
        let c = RunConfig { t: Some(t), n2: Some(n2), ..base.clone() };
        runs.push((format!("searchlab-{name}"), experiments::searchlab_run(&c, kind)?));
    }
    let exact = ExtractConfig { enum_limit: cfg.enum_limit(), ..ExtractConfig::default() };
    let mc = ExtractConfig { mode: Mode::MonteCarlo { samples: 2048, seed: fork_seed(seed, "suite-mc") }, ..exact.clone() };
    runs.push(gi_case("extract-gi3-witness", 3, true, Shape::Qam3, "witness", &exact, ExtractKind::Zq3)?);
    runs.push(gi_case("extract-gi3-commit", 3, false, Shape::Qam3, "commit", &exact, ExtractKind::Zq3)?);
    runs.push(gi_case("extract-gi3-guess-mc", 3, false, Shape::Qam3, "guess", &mc, ExtractKind::Zq3)?);
    let fixed = ExtractConfig { delta: DeltaPolicy::Fixed(0.25), ..exact.clone() };
    runs.push(gi_case("extract-gi3-guess-delta", 3, false, Shape::Qam3, "guess", &fixed, ExtractKind::Zq3)?);
    runs.push(gi_case("extract-gi3-ip3-commit", 3, false, Shape::Ip3, "commit", &exact, ExtractKind::Zip3)?);
    let echo = sims::echo_protocol::<f64>(2, false)?;
    let echo_sim = sims::echo_witness_simulator(&echo)?;
    runs.push((
        "extract-echo2-witness".into(),
        experiments::extract_with(&echo, &echo_sim, &ExtractConfig { t: 2, ..exact.clone() }, ExtractKind::Zk)?,
    ));

    let mut out = Outcome::default();
    let mut entries = Vec::new();
    for (name, run) in runs {
        let report = run.artifacts.get("report.json").map(<[u8]>::to_vec).unwrap_or_default();
        let passed = run.passed();
        out.checks.push(Check::new(name.clone(), passed, String::new()));
        entries.push(Entry { name: name.clone(), passed, sha256: sha256_hex(&report) });
        out.artifacts.push(&format!("{name}.json"), report);
    }
    let digest = sha256_hex(entries.iter().map(|e| e.sha256.as_str()).collect::<Vec<_>>().join("").as_bytes());
    let report = serde_json::json!({
        "command": "suite",
        "seed": seed,
        "result": { "runs": entries, "suite_digest": digest },
        "checks": out.checks,
        "passed": out.passed(),
    });
    out.artifacts.json("report.json", &report)?;
    Ok(out)
}
