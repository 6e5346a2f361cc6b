//! Experiment configuration: a flat key = value text format with section
//! headers, chosen so a run's full provenance fits in one auditable file.
//!
//! ```text
//! # unit-rate arrivals, direct series evaluation
//! [experiment]
//! kind = series
//! seed = 42
//! replicates = 10000
//!
//! [params]
//! f = sinc
//! distribution = exponential(rate=1)
//! n = 100000
//! ```
//!
//! `[experiment]` holds the dispatch fields; everything under `[params]` is
//! passed to the experiment as string knobs. The seed is required: runs must
//! be reproducible, so there is no wall-clock default.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Series,
    Abel,
    Permute,
    Blocks,
    NormGrowth,
    Chf,
    Lepage,
    Kfun,
    ThreeSeries,
    Improper,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 10] = [
        ExperimentKind::Series,
        ExperimentKind::Abel,
        ExperimentKind::Permute,
        ExperimentKind::Blocks,
        ExperimentKind::NormGrowth,
        ExperimentKind::Chf,
        ExperimentKind::Lepage,
        ExperimentKind::Kfun,
        ExperimentKind::ThreeSeries,
        ExperimentKind::Improper,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Series => "series",
            ExperimentKind::Abel => "abel",
            ExperimentKind::Permute => "permute",
            ExperimentKind::Blocks => "blocks",
            ExperimentKind::NormGrowth => "norm-growth",
            ExperimentKind::Chf => "chf",
            ExperimentKind::Lepage => "lepage",
            ExperimentKind::Kfun => "kfun",
            ExperimentKind::ThreeSeries => "three-series",
            ExperimentKind::Improper => "improper",
        }
    }

    /// Stable stream-key component so different experiments never share
    /// random streams under one master seed.
    pub fn stream_id(&self) -> u64 {
        match self {
            ExperimentKind::Series => 0x5e51,
            ExperimentKind::Abel => 0xab31,
            ExperimentKind::Permute => 0x9e12,
            ExperimentKind::Blocks => 0xb10c,
            ExperimentKind::NormGrowth => 0x6e02,
            ExperimentKind::Chf => 0xc4f0,
            ExperimentKind::Lepage => 0x1e9a,
            ExperimentKind::Kfun => 0x4f6e,
            ExperimentKind::ThreeSeries => 0x3553,
            ExperimentKind::Improper => 0x1290,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .find(|k| k.name() == text)
            .copied()
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|k| k.name()).collect();
                anyhow!("unknown experiment kind `{text}`; expected one of {}", names.join(", "))
            })
    }

    /// What this experiment does, for `list-experiments`.
    pub fn describe(&self) -> &'static str {
        match self {
            ExperimentKind::Series => "partial sums of sum f(S_n) over replicate arrival streams",
            ExperimentKind::Abel => "direct vs summation-by-parts evaluation of sum e^(iS_n)/S_n",
            ExperimentKind::Permute => "permutation invariance and excursions of finite sums",
            ExperimentKind::Blocks => "block-partitioned summation with Campbell mean/variance checks",
            ExperimentKind::NormGrowth => "Monte Carlo growth of ||Z_n||_p with bootstrap intervals",
            ExperimentKind::Chf => "empirical vs analytic characteristic function of the series",
            ExperimentKind::Lepage => "marked (LePage) series over a Levy measure",
            ExperimentKind::Kfun => "three-series K function sweep over s",
            ExperimentKind::ThreeSeries => "integrability verdicts for the K functions",
            ExperimentKind::Improper => "windowed improper integral of f with acceleration",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A parsed and validated experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub replicates: usize,
    pub out_dir: PathBuf,
    /// 0 means the default worker pool.
    pub workers: usize,
    pub params: BTreeMap<String, String>,
    /// Knobs that fell back to defaults during parsing, for `validate`.
    pub defaulted: Vec<String>,
}

impl ExperimentConfig {
    /// Parse the config text; errors carry 1-based line numbers.
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| anyhow!("line {lineno}: unterminated section header"))?;
                current = name.trim().to_ascii_lowercase();
                sections.entry(current.clone()).or_default();
                continue;
            }
            if current.is_empty() {
                bail!("line {lineno}: key outside any [section]");
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {lineno}: expected `key = value`"))?;
            let key = k.trim().to_ascii_lowercase();
            if key.is_empty() {
                bail!("line {lineno}: empty key");
            }
            let prev = sections
                .get_mut(&current)
                .unwrap()
                .insert(key.clone(), v.trim().to_string());
            if prev.is_some() {
                bail!("line {lineno}: duplicate key `{key}` in [{current}]");
            }
        }

        let experiment = sections
            .get("experiment")
            .ok_or_else(|| anyhow!("missing [experiment] section; required fields: kind, seed"))?;
        let kind = ExperimentKind::parse(
            experiment
                .get("kind")
                .ok_or_else(|| anyhow!("missing required field `kind` in [experiment]"))?,
        )?;
        let seed: u64 = experiment
            .get("seed")
            .ok_or_else(|| {
                anyhow!("missing required field `seed` in [experiment] (runs must be reproducible)")
            })?
            .parse()
            .context("seed must be an unsigned 64-bit integer")?;

        let mut defaulted = Vec::new();
        let replicates = match experiment.get("replicates") {
            Some(v) => v.parse().context("replicates must be a positive integer")?,
            None => {
                defaulted.push("replicates = 1000".into());
                1000
            }
        };
        if replicates == 0 {
            bail!("replicates must be at least 1");
        }
        let out_dir = match experiment.get("out") {
            Some(v) => PathBuf::from(v),
            None => {
                defaulted.push("out = results".into());
                PathBuf::from("results")
            }
        };
        let workers = match experiment.get("workers") {
            Some(v) => v.parse().context("workers must be a nonnegative integer")?,
            None => {
                defaulted.push("workers = 0 (library default)".into());
                0
            }
        };

        let params = sections.remove("params").unwrap_or_default();
        for key in sections.keys() {
            if key != "experiment" && key != "params" {
                bail!("unknown section [{key}]; expected [experiment] and [params]");
            }
        }

        Ok(Self { kind, seed, replicates, out_dir, workers, params, defaulted })
    }

    /// Canonical text form: sorted keys, normalized spacing. Hashing this
    /// string identifies the run in every CSV header. Execution details
    /// (output directory, worker count) are excluded: they cannot change any
    /// emitted number.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "experiment.kind={}\nexperiment.replicates={}\nexperiment.seed={}\n",
            self.kind, self.replicates, self.seed,
        ));
        for (k, v) in &self.params {
            out.push_str(&format!("params.{k}={v}\n"));
        }
        out
    }

    pub fn config_hash(&self) -> u64 {
        sincint::util::fnv1a64(self.canonical().as_bytes())
    }

    // typed parameter accessors -------------------------------------------

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(|s| s.as_str())
    }

    pub fn param_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.param(key).unwrap_or(default)
    }

    pub fn param_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.param(key) {
            Some(v) => v.parse().with_context(|| format!("param `{key}` must be a number")),
            None => Ok(default),
        }
    }

    pub fn param_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.param(key) {
            Some(v) => v.parse().with_context(|| format!("param `{key}` must be an integer")),
            None => Ok(default),
        }
    }

    /// Comma-separated list of numbers.
    pub fn param_grid(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.param(key) {
            Some(v) => v
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .with_context(|| format!("param `{key}`: bad number `{}`", x.trim()))
                })
                .collect(),
            None => Ok(default.to_vec()),
        }
    }
}
