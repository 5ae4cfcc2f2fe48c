//! Run configuration: a flat TOML table, overridden by command-line flags,
//! then by `ZKLAB_ENUM_LIMIT`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const ENUM_LIMIT_VAR: &str = "ZKLAB_ENUM_LIMIT";

/// Every tunable of every subcommand. Unset keys fall back to per-command defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub enum_limit: Option<u64>,
    // hash audit
    #[arg(long, global = true)]
    pub n1: Option<u8>,
    #[arg(long, global = true)]
    pub n2: Option<u8>,
    #[arg(long, global = true)]
    pub t: Option<usize>,
    // protocol and extraction inputs
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    #[arg(long, global = true)]
    pub simulator: Option<PathBuf>,
    #[arg(long, global = true)]
    pub prover: Option<String>,
    #[arg(long, global = true)]
    pub copies: Option<usize>,
    // graph isomorphism instances
    #[arg(long, global = true)]
    pub vertices: Option<usize>,
    #[arg(long, global = true)]
    pub pair: Option<String>,
    #[arg(long, global = true)]
    pub shape: Option<String>,
    #[arg(long, global = true)]
    pub sim_kind: Option<String>,
    // extraction
    #[arg(long, global = true)]
    pub c: Option<f64>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub mode: Option<String>,
    #[arg(long, global = true)]
    pub samples: Option<u64>,
    #[arg(long, global = true)]
    pub rule: Option<String>,
    #[arg(long, global = true)]
    pub source: Option<String>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Parse { path: path.to_path_buf(), message: e.to_string() })
    }

    /// `self` with every key set in `top` replaced.
    pub fn overlay(mut self, top: &RunConfig) -> Self {
        overlay!(self, top; seed, enum_limit, n1, n2, t, spec, simulator, prover, copies, vertices, pair, shape,
            sim_kind, c, delta, mode, samples, rule, source);
        self
    }

    /// Applies the environment override.
    pub fn with_env(mut self) -> Result<Self, CliError> {
        if let Ok(v) = std::env::var(ENUM_LIMIT_VAR) {
            let limit = v
                .trim()
                .parse::<u64>()
                .map_err(|_| CliError::Config(format!("{ENUM_LIMIT_VAR}={v:?} is not an unsigned integer")))?;
            self.enum_limit = Some(limit);
        }
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn enum_limit(&self) -> u64 {
        self.enum_limit.unwrap_or(zklab_core::fieldhash::DEFAULT_ENUM_LIMIT)
    }

    pub fn require<'a, V>(&self, value: &'a Option<V>, key: &str) -> Result<&'a V, CliError> {
        value.as_ref().ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }
}

/// Seed for a named sub-task, derived from the run seed.
pub fn fork_seed(seed: u64, label: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_prefers_top() {
        let base = RunConfig { t: Some(1), c: Some(10.0), ..Default::default() };
        let top = RunConfig { t: Some(3), ..Default::default() };
        let m = base.overlay(&top);
        assert_eq!((m.t, m.c), (Some(3), Some(10.0)));
    }

    #[test]
    fn forks_differ_by_label() {
        assert_ne!(fork_seed(1, "a"), fork_seed(1, "b"));
        assert_eq!(fork_seed(1, "a"), fork_seed(1, "a"));
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
        let c: RunConfig = toml::from_str("t = 2\nmode = \"exact\"").unwrap();
        assert_eq!(c.t, Some(2));
    }
}
