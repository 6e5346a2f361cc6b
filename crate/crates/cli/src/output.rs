//! CSV output with a provenance header on every file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::config::ExperimentConfig;

/// Writes experiment CSVs into the output directory. Every file starts with
/// `# sincint v<version> config=0x<hash>` so results can always be traced
/// back to the exact configuration. Nothing time-dependent is written: a
/// rerun of the same config produces byte-identical files.
pub struct OutputWriter {
    dir: PathBuf,
    header: String,
}

impl OutputWriter {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        fs::create_dir_all(&config.out_dir)
            .with_context(|| format!("creating output dir {}", config.out_dir.display()))?;
        Ok(Self {
            dir: config.out_dir.clone(),
            header: format!(
                "# sincint v{} config=0x{:016x}\n",
                sincint::VERSION,
                config.config_hash()
            ),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Write a CSV file: header comment first, then whatever `body` emits.
    pub fn write_csv<F>(&self, name: &str, body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let mut buf = Vec::with_capacity(4096);
        buf.extend_from_slice(self.header.as_bytes());
        body(&mut buf)?;
        let path = self.path(name);
        fs::write(&path, &buf).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// One summary metric row.
#[derive(Debug, Clone)]
pub struct MetricRow {
    pub metric: String,
    pub value: f64,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub verdict: Option<String>,
}

impl MetricRow {
    pub fn plain(metric: &str, value: f64) -> Self {
        Self { metric: metric.into(), value, ci_lo: None, ci_hi: None, verdict: None }
    }

    pub fn with_ci(metric: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self { metric: metric.into(), value, ci_lo: Some(lo), ci_hi: Some(hi), verdict: None }
    }

    pub fn with_verdict(metric: &str, value: f64, verdict: &str) -> Self {
        Self {
            metric: metric.into(),
            value,
            ci_lo: None,
            ci_hi: None,
            verdict: Some(verdict.into()),
        }
    }
}

pub fn write_summary(out: &OutputWriter, name: &str, rows: &[MetricRow]) -> Result<PathBuf> {
    out.write_csv(name, |w| {
        writeln!(w, "metric,value,ci_lo,ci_hi,verdict")?;
        for r in rows {
            let fmt_opt = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{}",
                r.metric,
                r.value,
                fmt_opt(&r.ci_lo),
                fmt_opt(&r.ci_hi),
                r.verdict.clone().unwrap_or_default()
            )?;
        }
        Ok(())
    })
}

/// Echo a human-readable line per metric to stdout.
pub fn print_summary(kind: &str, rows: &[MetricRow], path: &Path) {
    for r in rows {
        let verdict = r.verdict.as_deref().unwrap_or("");
        match (r.ci_lo, r.ci_hi) {
            (Some(lo), Some(hi)) => {
                println!("{kind}: {} = {} [{}, {}] {verdict}", r.metric, r.value, lo, hi)
            }
            _ => println!("{kind}: {} = {} {verdict}", r.metric, r.value),
        }
    }
    println!("{kind}: summary written to {}", path.display());
}
