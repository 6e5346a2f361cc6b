//! Experiment runners: each configures core-library calls from the parsed
//! config, writes trace/summary CSVs and returns the metric rows.
//!
//! Determinism contract: every random stream is keyed by (seed, experiment,
//! replicate) and all reductions run in replicate order, so a rerun of the
//! same config — with any worker count — produces byte-identical CSVs.

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use anyhow::{anyhow, Context, Result};
use num_complex::Complex64;

use sincint::chf::{self, Horizon};
use sincint::distributions::{DistributionSpec, MarkerDensity};
use sincint::exec;
use sincint::levy::{self, ImproperScheme, KFunctionSet, LevyModel, ModularOutcome};
use sincint::pointprocess::ArrivalStream;
use sincint::quad;
use sincint::rng::StreamKey;
use sincint::series::{self, SeriesFunction};
use sincint::trigsums;
use sincint::util;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::output::{print_summary, write_summary, MetricRow, OutputWriter};

pub struct ExperimentResult {
    pub kind: ExperimentKind,
    pub metrics: Vec<MetricRow>,
    pub files: Vec<PathBuf>,
    pub wall: Duration,
}

/// Run one experiment end to end.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let started = Instant::now();
    let out = OutputWriter::new(config)?;
    let run_inner = || -> Result<(Vec<MetricRow>, Vec<PathBuf>)> {
        match config.kind {
            ExperimentKind::Series => run_series(config, &out),
            ExperimentKind::Abel => run_abel(config, &out),
            ExperimentKind::Permute => run_permute(config, &out),
            ExperimentKind::Blocks => run_blocks(config, &out),
            ExperimentKind::NormGrowth => run_norm_growth(config, &out),
            ExperimentKind::Chf => run_chf(config, &out),
            ExperimentKind::Lepage => run_lepage(config, &out),
            ExperimentKind::Kfun => run_kfun(config, &out),
            ExperimentKind::ThreeSeries => run_three_series(config, &out),
            ExperimentKind::Improper => run_improper(config, &out),
        }
    };
    let (metrics, mut files) = if config.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .context("building worker pool")?
            .install(run_inner)?
    } else {
        run_inner()?
    };
    let summary_name = format!("{}_summary.csv", config.kind.name().replace('-', "_"));
    let summary = write_summary(&out, &summary_name, &metrics)?;
    print_summary(config.kind.name(), &metrics, &summary);
    files.push(summary);
    Ok(ExperimentResult { kind: config.kind, metrics, files, wall: started.elapsed() })
}

// -- shared parsing helpers --------------------------------------------------

fn distribution(config: &ExperimentConfig) -> Result<DistributionSpec> {
    DistributionSpec::parse(config.param_or("distribution", "exponential(rate=1)"))
        .map_err(|e| anyhow!("distribution: {e}"))
}

fn function(config: &ExperimentConfig, default: &str) -> Result<SeriesFunction> {
    SeriesFunction::parse(config.param_or("f", default)).map_err(|e| anyhow!("f: {e}"))
}

fn model(config: &ExperimentConfig) -> Result<LevyModel> {
    LevyModel::parse(config.param_or("model", "poissonunit")).map_err(|e| anyhow!("model: {e}"))
}

fn marker(config: &ExperimentConfig) -> Result<MarkerDensity> {
    MarkerDensity::parse(config.param_or("marker", "exponentialunit"))
        .map_err(|e| anyhow!("marker: {e}"))
}

fn key_for(config: &ExperimentConfig, replicate: u64) -> StreamKey {
    StreamKey::new(config.seed, config.kind.stream_id(), replicate)
}

fn clt_ci(values: &[f64]) -> (f64, f64, f64) {
    let m = util::mean(values);
    let se = util::standard_error(values);
    (m, m - 1.96 * se, m + 1.96 * se)
}

/// Horizon for sampling a series: indicator windows terminate at their upper
/// edge; everything else runs a fixed number of terms.
fn horizon_for(config: &ExperimentConfig, f: &SeriesFunction, default_n: usize) -> Result<Horizon> {
    if let SeriesFunction::IndicatorWindow { hi, .. } = f {
        return Ok(Horizon::Past(*hi));
    }
    Ok(Horizon::Terms(config.param_usize("n", default_n)?))
}

// -- runners ------------------------------------------------------------------

fn run_series(
    config: &ExperimentConfig,
    out: &OutputWriter,
) -> Result<(Vec<MetricRow>, Vec<PathBuf>)> {
    let spec = distribution(config)?;
    let f = function(config, "sinc")?;
    let n = config.param_usize("n", 100_000)?;
    let horizon = horizon_for(config, &f, 100_000)?;
    let rows: Vec<Complex64> = collect_results(exec::map_replicates(config.replicates, |rep| {
        let mut s = ArrivalStream::new(spec, key_for(config, rep as u64));
        let count = match horizon {
            Horizon::Terms(n) => {
                s.extend(n);
                n
            }
            Horizon::Past(t) => s.extend_past(t),
        };
        series::partial_sum(&f, s.arrivals(), count).map_err(anyhow::Error::from)
    }))?;
    let re: Vec<f64> = rows.iter().map(|v| v.re).collect();
    let im: Vec<f64> = rows.iter().map(|v| v.im).collect();
    let (m_re, lo_re, hi_re) = clt_ci(&re);
    let (m_im, lo_im, hi_im) = clt_ci(&im);

    // trace of the first replicate's prefix
    let mut s = ArrivalStream::new(spec, key_for(config, 0));
    let count = match horizon {
        Horizon::Terms(n) => {
            s.extend(n);
            n
        }
        Horizon::Past(t) => s.extend_past(t),
    };
    let eval = series::evaluate_direct(&f, s.arrivals(), count)?;
    let stride = (count / 2048).max(1);
    let trace = out.write_csv("series_trace.csv", |w| eval.write_trace_csv(stride, w))?;

    let _ = n;
    Ok((
        vec![
            MetricRow::with_ci("mean_re", m_re, lo_re, hi_re),
            MetricRow::with_ci("mean_im", m_im, lo_im, hi_im),
            MetricRow::plain("var_re", util::sample_variance(&re)),
            MetricRow::plain("replicates", config.replicates as f64),
        ],
        vec![trace],
    ))
}

fn run_abel(
    config: &ExperimentConfig,
    out: &OutputWriter,
) -> Result<(Vec<MetricRow>, Vec<PathBuf>)> {
    let spec = distribution(config)?;
    let f = function(config, "cisoverx")?;
    let n = config.param_usize("n", 100_000)?;
    let per_rep: Vec<(f64, f64, f64)> =
        collect_results(exec::map_replicates(config.replicates, |rep| {
            let mut s = ArrivalStream::new(spec, key_for(config, rep as u64));
            s.extend(n);
            let direct = series::partial_sum(&f, s.arrivals(), n)?;
            let abel = series::abel_evaluate(s.arrivals(), n, &f)?;
            let parts = abel.abel.expect("abel evaluation carries components");
            let rel = (abel.final_value - direct).norm() / direct.norm().max(1e-30);
            Ok::<_, anyhow::Error>((rel, parts.boundary.norm(), parts.series_part.norm()))
        }))?;
    let max_rel = per_rep.iter().map(|r| r.0).fold(0.0, f64::max);
    let boundary: Vec<f64> = per_rep.iter().map(|r| r.1).collect();
    let series_part: Vec<f64> = per_rep.iter().map(|r| r.2).collect();

    let mut s = ArrivalStream::new(spec, key_for(config, 0));
    s.extend(n);
    let eval = series::abel_evaluate(s.arrivals(), n, &f)?;
    let trace = out.write_csv("abel_trace.csv", |w| eval.write_trace_csv((n / 2048).max(1), w))?;

    let verdict = if max_rel < 1e-9 { "pass" } else { "fail" };
    Ok((
        vec![
            MetricRow::with_verdict("max_rel_discrepancy", max_rel, verdict),
            MetricRow::plain("mean_abs_boundary", util::mean(&boundary)),
            MetricRow::plain("mean_abs_series_part", util::mean(&series_part)),
        ],
        vec![trace],
    ))
}

fn run_permute(
    config: &ExperimentConfig,
    out: &OutputWriter,
) -> Result<(Vec<MetricRow>, Vec<PathBuf>)> {
    let spec = distribution(config)?;
    let f = function(config, "cisoverx")?;
    let n = config.param_usize("n", 100_000)?;
    let nperms = config.param_usize("nperms", 200)?;
    let mut s = ArrivalStream::new(spec, key_for(config, 0));
    s.extend(n);
    let arrivals = s.arrivals().to_vec();
    let direct = series::evaluate_direct(&f, &arrivals, n)?;
    let rows: Vec<(u64, Complex64, f64)> =
        collect_results(exec::map_replicates(nperms, |j| {
            let perm_seed = config.seed.wrapping_add(j as u64);
            let eval = series::permuted_sum(&f, &arrivals, n, perm_seed)?;
            Ok::<_, anyhow::Error>((perm_seed, eval.final_value, eval.max_excursion()))
        }))?;
    let spread =
        rows.iter().map(|r| (r.1 - direct.final_value).norm()).fold(0.0, f64::max);
    let mut excursions: Vec<f64> = rows.iter().map(|r| r.2).collect();
    excursions.sort_by(|a, b| a.total_cmp(b));
    let p95 = util::percentile_sorted(&excursions, 0.95);
    let direct_excursion = direct.max_excursion();

    let trace = out.write_csv("permute_trace.csv", |w| {
        writeln!(w, "perm_seed,final_re,final_im,max_excursion")?;
        for (seed, v, exc) in &rows {
            writeln!(w, "{seed},{},{},{exc}", v.re, v.im)?;
        }
        Ok(())
    })?;

    let tol = 1e-9 * direct.final_value.norm().max(1.0);
    let verdict = if spread <= tol { "pass" } else { "fail" };
    Ok((
        vec![
            MetricRow::with_verdict("max_total_spread", spread, verdict),
            MetricRow::plain("p95_excursion", p95),
            MetricRow::plain("direct_excursion", direct_excursion),
            MetricRow::plain("excursion_ratio_p95", p95 / direct_excursion.max(1e-300)),
        ],
        vec![trace],
    ))
}

fn run_blocks(
    config: &ExperimentConfig,
    out: &OutputWriter,
) -> Result<(Vec<MetricRow>, Vec<PathBuf>)> {
    let spec = distribution(config)?;
    let f = function(config, "sinc")?;
    let blocks = config.param_usize("blocks", 200)?;
    let endpoints = series::half_period_partition(blocks);
    let horizon = *endpoints.last().expect("at least one block");

    let finals: Vec<f64> = collect_results(exec::map_replicates(config.replicates, |rep| {
        let mut s = ArrivalStream::new(spec, key_for(config, rep as u64));
        s.extend_past(horizon);
        let eval = series::block_sum(&f, s.arrivals(), &endpoints)?;
        Ok::<_, anyhow::Error>(eval.final_value().re)
    }))?;
    let (mc_mean, m_lo, m_hi) = clt_ci(&finals);
    let mc_var = util::sample_variance(&finals);

    // Campbell oracles over [0, horizon] by quadrature
    let lambda_f = quad::adaptive(&|x| f.eval(x).re, 0.0, horizon, 1e-11)
        .map_err(|e| anyhow!("lambda f quadrature: {e}"))?
        .value;
    let lambda_f2 = quad::adaptive(&|x| f.eval(x).re.powi(2), 0.0, horizon, 1e-11)
        .map_err(|e| anyhow!("lambda f^2 quadrature: {e}"))?
        .value;

    // per-block trace and the exact blocked/direct boundary consistency
    let mut s = ArrivalStream::new(spec, key_for(config, 0));
    s.extend_past(horizon);
    let eval = series::block_sum(&f, s.arrivals(), &endpoints)?;
    let mut boundary_exact = true;
    for (k, &end) in endpoints.iter().enumerate() {
        let covered = s.arrivals().partition_point(|&x| x < end);
        let direct = series::partial_sum(&f, s.arrivals(), covered)?;
        if eval.running[k] != direct {
            boundary_exact = false;
        }
    }
    let integrals = series::block_integrals(&f, &endpoints)?;
    let trace = out.write_csv("blocks_trace.csv", |w| {
        writeln!(w, "k,endpoint,count,X_re,X_im,running_re,running_im,lambda_f_k")?;
        for k in 0..endpoints.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                k + 1,
                endpoints[k],
                eval.block_counts[k],
                eval.block_values[k].re,
                eval.block_values[k].im,
                eval.running[k].re,
                eval.running[k].im,
                integrals[k].re
            )?;
        }
        Ok(())
    })?;

    let var_ratio = mc_var / lambda_f2;
    let verdict = if (var_ratio - 1.0).abs() < 0.1 { "pass" } else { "fail" };
    Ok((
        vec![
            MetricRow::with_ci("mc_mean", mc_mean, m_lo, m_hi),
            MetricRow::plain("lambda_f", lambda_f),
            MetricRow::plain("mc_variance", mc_var),
            MetricRow::plain("lambda_f_squared", lambda_f2),
            MetricRow::with_verdict("variance_ratio", var_ratio, verdict),
            MetricRow::with_verdict(
                "blocked_direct_exact",
                boundary_exact as u8 as f64,
                if boundary_exact { "pass" } else { "fail" },
            ),
        ],
        vec![trace],
    ))
}

fn run_norm_growth(
    config: &ExperimentConfig,
    out: &OutputWriter,
) -> Result<(Vec<MetricRow>, Vec<PathBuf>)> {
    let spec = distribution(config)?;
    let p = config.param_f64("p", 2.0)?;
    let grid: Vec<usize> = match config.param("ngrid") {
        Some(text) => text
            .split(',')
            .map(|x| x.trim().parse::<usize>().context("ngrid entries must be integers"))
            .collect::<Result<_>>()?,
        None => (7..=14).map(|j| 1usize << j).collect(),
    };
    let report = trigsums::estimate_norm_growth(&spec, p, &grid, config.replicates, key_for(config, 0))
        .map_err(|e| anyhow!("norm growth: {e}"))?;
    let file = out.write_csv("norm_growth_report.csv", |w| report.write_csv(w))?;
    Ok((
        vec![
            MetricRow::with_ci(
                "slope",
                report.slope,
                report.slope - 2.0 * report.slope_se,
                report.slope + 2.0 * report.slope_se,
            ),
            MetricRow::plain("cz_reference", report.cz_ref),
            MetricRow::plain("wide_ci", report.wide_ci as u8 as f64),
        ],
        vec![file],
    ))
}

fn run_chf(
    config: &ExperimentConfig,
    out: &OutputWriter,
) -> Result<(Vec<MetricRow>, Vec<PathBuf>)> {
    let spec = distribution(config)?;
    let f = function(config, "indicator(lo=0,hi=1)")?;
    let t_grid = config.param_grid("tgrid", &[0.5, 1.0, 2.0])?;
    let z_threshold = config.param_f64("zthreshold", 4.0)?;
    let horizon = horizon_for(config, &f, 1_000_000)?;
    let samples = chf::sample_nf(&spec, &f, horizon, key_for(config, 0), config.replicates)
        .map_err(|e| anyhow!("sampling: {e}"))?;
    let emp = chf::empirical_chf(&samples, &t_grid).map_err(|e| anyhow!("empirical: {e}"))?;
    let ana = chf::analytic_chf_nf(&f, &t_grid).map_err(|e| anyhow!("analytic: {e}"))?;
    let cmp = chf::compare(&emp, &ana, z_threshold).map_err(|e| anyhow!("compare: {e}"))?;
    let file = out.write_csv("chf_comparison.csv", |w| cmp.write_csv(w))?;
    let max_z = cmp.points.iter().map(|p| p.zscore).fold(0.0, f64::max);
    Ok((
        vec![
            MetricRow::with_verdict("max_zscore", max_z, if cmp.pass { "pass" } else { "fail" }),
            MetricRow::plain("max_abs_discrepancy", cmp.max_abs_discrepancy),
            MetricRow::plain("wide_ci", emp.wide_ci as u8 as f64),
        ],
        vec![file],
    ))
}

fn run_lepage(
    config: &ExperimentConfig,
    out: &OutputWriter,
) -> Result<(Vec<MetricRow>, Vec<PathBuf>)> {
    let spec = distribution(config)?;
    let m = model(config)?;
    let md = marker(config)?;
    let f = function(config, "indicator(lo=0,hi=1)")?;
    let n = config.param_usize("n", 1000)?;
    let finals: Vec<f64> = collect_results(exec::map_replicates(config.replicates, |rep| {
        let key = key_for(config, rep as u64);
        let mut s = ArrivalStream::new(spec, key);
        s.extend(n);
        let eval = levy::lepage_evaluate(&m, &md, &f, s.arrivals(), n, key.child(1))?;
        Ok::<_, anyhow::Error>(eval.final_value.re)
    }))?;
    let (mean, lo, hi) = clt_ci(&finals);
    let mut metrics = vec![
        MetricRow::with_ci("mean", mean, lo, hi),
        MetricRow::plain("variance", util::sample_variance(&finals)),
        MetricRow::plain("replicates", config.replicates as f64),
    ];
    let mut files = Vec::new();

    // optional characteristic-function comparison against the exponent form
    if let Some(_grid) = config.param("tgrid") {
        let t_grid = config.param_grid("tgrid", &[1.0])?;
        let emp = chf::empirical_chf(&finals, &t_grid).map_err(|e| anyhow!("empirical: {e}"))?;
        let ana = chf::analytic_chf_xf(&m, &f, &t_grid).map_err(|e| anyhow!("analytic: {e}"))?;
        let cmp = chf::compare(&emp, &ana, config.param_f64("zthreshold", 4.0)?)
            .map_err(|e| anyhow!("compare: {e}"))?;
        files.push(out.write_csv("lepage_chf.csv", |w| cmp.write_csv(w))?);
        let max_z = cmp.points.iter().map(|p| p.zscore).fold(0.0, f64::max);
        metrics.push(MetricRow::with_verdict(
            "chf_max_zscore",
            max_z,
            if cmp.pass { "pass" } else { "fail" },
        ));
    }
    Ok((metrics, files))
}

fn run_kfun(
    config: &ExperimentConfig,
    out: &OutputWriter,
) -> Result<(Vec<MetricRow>, Vec<PathBuf>)> {
    let m = model(config)?;
    let md = marker(config)?;
    let f = function(config, "sinc")?;
    let set = KFunctionSet::new(m, md, f).map_err(|e| anyhow!("{e}"))?;
    let set = match config.param("cutoff") {
        Some(c) => set
            .with_cutoff(c.parse().context("cutoff must be a number")?)
            .map_err(|e| anyhow!("{e}"))?,
        None => set,
    };
    let s_grid = config.param_grid("sgrid", &[1e2, 1e3, 1e4, 1e5, 1e6])?;
    let mut rows = Vec::with_capacity(s_grid.len());
    for &s in &s_grid {
        let k = levy::k_functions(&set, s).map_err(|e| anyhow!("K at s={s}: {e}"))?;
        rows.push((s, k));
    }
    let file = out.write_csv("kfun_sweep.csv", |w| levy::write_k_sweep_csv(&rows, w))?;

    let mut metrics = vec![MetricRow::plain("grid_points", s_grid.len() as f64)];
    if set.model == LevyModel::PoissonUnit && set.marker.is_strictly_decreasing() {
        let (slope, _) =
            levy::k2_envelope_slope(&set, &s_grid, 32).map_err(|e| anyhow!("envelope: {e}"))?;
        metrics.push(MetricRow::plain("envelope_slope", slope));
    }
    Ok((metrics, vec![file]))
}

fn run_three_series(
    config: &ExperimentConfig,
    out: &OutputWriter,
) -> Result<(Vec<MetricRow>, Vec<PathBuf>)> {
    let m = model(config)?;
    let md = marker(config)?;
    let f = function(config, "sinc")?;
    let set = KFunctionSet::new(m, md, f).map_err(|e| anyhow!("{e}"))?;
    let report = levy::three_series_check(&set).map_err(|e| anyhow!("{e}"))?;

    let verdict_row = |name: &str, outcome: &ModularOutcome| match outcome {
        ModularOutcome::Finite(v) => MetricRow::with_verdict(name, *v, "finite"),
        ModularOutcome::Divergent => MetricRow::with_verdict(name, f64::INFINITY, "divergent"),
        ModularOutcome::Inconclusive => MetricRow::with_verdict(name, f64::NAN, "inconclusive"),
    };
    let k2 = &report.k2_improper;
    let trace = out.write_csv("three_series_k2_trace.csv", |w| {
        writeln!(w, "window_index,endpoint,partial_re,partial_im")?;
        for rec in &k2.trace {
            writeln!(w, "{},{},{},{}", rec.index, rec.endpoint, rec.partial.re, rec.partial.im)?;
        }
        Ok(())
    })?;
    let mut metrics = vec![
        verdict_row("k1_integral", &report.k1),
        verdict_row("k3_integral", &report.k3),
        MetricRow::with_verdict(
            "k2_improper_converged",
            k2.converged as u8 as f64,
            if k2.converged { "converged" } else { "inconclusive" },
        ),
    ];
    if let Some(v) = k2.value {
        metrics.push(MetricRow::plain("k2_integral_re", v.re));
        metrics.push(MetricRow::plain("k2_integral_im", v.im));
    }
    Ok((metrics, vec![trace]))
}

fn run_improper(
    config: &ExperimentConfig,
    out: &OutputWriter,
) -> Result<(Vec<MetricRow>, Vec<PathBuf>)> {
    let f = function(config, "sinc")?;
    let scheme = ImproperScheme {
        tol: config.param_f64("tol", 1e-10)?,
        max_windows: config.param_usize("max_windows", 200)?,
        exhaustion: levy::Exhaustion::HalfPeriods {
            period: config.param_f64("period", std::f64::consts::PI)?,
        },
        acceleration: levy::Acceleration::Euler,
        window_tol: config.param_f64("window_tol", 1e-12)?,
    };
    let start = config.param_f64("start", 0.0)?;
    let report = levy::improper_integral_from(&f, start, &scheme).map_err(|e| anyhow!("{e}"))?;
    let trace = out.write_csv("improper_trace.csv", |w| {
        writeln!(w, "window_index,endpoint,partial_re,partial_im")?;
        for rec in &report.trace {
            writeln!(w, "{},{},{},{}", rec.index, rec.endpoint, rec.partial.re, rec.partial.im)?;
        }
        Ok(())
    })?;
    let value = report.value.unwrap_or(Complex64::new(f64::NAN, f64::NAN));
    Ok((
        vec![
            MetricRow::with_verdict(
                "value_re",
                value.re,
                if report.converged { "converged" } else { "non-convergent" },
            ),
            MetricRow::plain("value_im", value.im),
            MetricRow::plain("achieved_tol", report.achieved_tol),
            MetricRow::plain("windows_used", report.windows_used as f64),
            MetricRow::plain("accelerated", report.accelerated as u8 as f64),
        ],
        vec![trace],
    ))
}

/// Collect replicate results, surfacing the first error.
fn collect_results<T>(rows: Vec<std::result::Result<T, anyhow::Error>>) -> Result<Vec<T>> {
    rows.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text).unwrap()
    }

    #[test]
    fn improper_runs_and_reports_pi_over_two() {
        let dir = std::env::temp_dir().join("sincint_test_improper");
        let text = format!(
            "[experiment]\nkind = improper\nseed = 1\nout = {}\n[params]\nf = sinc\n",
            dir.display()
        );
        let result = run(&cfg(&text)).unwrap();
        let value = result.metrics.iter().find(|m| m.metric == "value_re").unwrap();
        assert!((value.value - std::f64::consts::FRAC_PI_2).abs() < 1e-8);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn unknown_series_function_is_an_error() {
        let dir = std::env::temp_dir().join("sincint_test_badf");
        let text = format!(
            "[experiment]\nkind = improper\nseed = 1\nout = {}\n[params]\nf = nosuch\n",
            dir.display()
        );
        assert!(run(&cfg(&text)).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
