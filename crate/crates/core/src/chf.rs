//! Empirical characteristic functions of random-series values versus the
//! analytic Poisson-functional formulas.
//!
//! The analytic side uses E e^{it Nf} = exp(lambda(cos(t f) - 1)
//! + i lambda sin(t f)) with both Lebesgue integrals from the quadrature
//! engines (the imaginary one may exist only as an improper limit), and the
//! marked-series analogue with (psi_r, psi_i) composed with t f.

use std::io::Write;

use num_complex::Complex64;

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::exec;
use crate::levy::LevyModel;
use crate::pointprocess::ArrivalStream;
use crate::quad::{self, ImproperScheme, TailConfig, TailVerdict};
use crate::rng::StreamKey;
use crate::series::{self, SeriesFunction};
use crate::util::CompensatedComplex;

/// Empirical estimate of E e^{itW} on a grid, with componentwise standard
/// errors.
#[derive(Debug, Clone)]
pub struct EmpiricalChf {
    pub points: Vec<EmpiricalChfPoint>,
    pub n_samples: usize,
    /// Set when there are fewer than 1000 samples.
    pub wide_ci: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct EmpiricalChfPoint {
    pub t: f64,
    pub mean: Complex64,
    pub se_re: f64,
    pub se_im: f64,
}

/// Mean of e^{itW} over real-valued samples at each t.
pub fn empirical_chf(samples: &[f64], t_grid: &[f64]) -> Result<EmpiricalChf> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("empirical chf needs samples".into()));
    }
    let n = samples.len();
    let points = t_grid
        .iter()
        .map(|&t| {
            let mut acc = CompensatedComplex::new();
            for &w in samples {
                let (sin, cos) = (t * w).sin_cos();
                acc.add(Complex64::new(cos, sin));
            }
            let mean = acc.value() / n as f64;
            // componentwise CLT standard errors
            let mut var_re = 0.0;
            let mut var_im = 0.0;
            for &w in samples {
                let (sin, cos) = (t * w).sin_cos();
                var_re += (cos - mean.re) * (cos - mean.re);
                var_im += (sin - mean.im) * (sin - mean.im);
            }
            let denom = (n.max(2) - 1) as f64 * n as f64;
            EmpiricalChfPoint {
                t,
                mean,
                se_re: (var_re / denom).sqrt(),
                se_im: (var_im / denom).sqrt(),
            }
        })
        .collect();
    Ok(EmpiricalChf { points, n_samples: n, wide_ci: n < 1000 })
}

/// The two exponents of the analytic characteristic functional of Nf at t:
/// (int (1 - cos(t f)), improper int sin(t f)).
pub fn nf_exponents(f: &SeriesFunction, t: f64) -> Result<(f64, f64)> {
    let start = if f.singular_at_zero() { f64::MIN_POSITIVE } else { 0.0 };
    let real_tail = quad::integrate_tail(
        &|x| {
            // 1 - cos(u) written cancellation-free
            let h = (0.5 * t * f.eval(x).re).sin();
            2.0 * h * h
        },
        start,
        &TailConfig { max_windows: 24, ..Default::default() },
    );
    let real_part = match real_tail.verdict {
        TailVerdict::Finite { value, .. } => value,
        _ => {
            return Err(Error::NonConvergent(format!(
                "int (1 - cos(t f)) did not classify as finite: {}",
                real_tail.detail
            )))
        }
    };
    let scheme = ImproperScheme { tol: 1e-10, max_windows: 400, ..Default::default() };
    let imag_rep = quad::improper(&|x| (t * f.eval(x).re).sin(), start, &scheme)?;
    let imag_part = imag_rep.require_value()?.re;
    Ok((real_part, imag_part))
}

/// Analytic E e^{it Nf} = exp(-(int (1-cos t f)) + i (improper int sin t f)).
pub fn analytic_chf_nf(f: &SeriesFunction, t_grid: &[f64]) -> Result<Vec<Complex64>> {
    t_grid
        .iter()
        .map(|&t| {
            let (re, im) = nf_exponents(f, t)?;
            Ok(Complex64::new(-re, im).exp())
        })
        .collect()
}

/// Analytic E e^{it Xf} for the marked series under `model`:
/// exp(-(int psi_r(t f(v)) dv) + i (int psi_i(t f(v)) dv)).
pub fn analytic_chf_xf(
    model: &LevyModel,
    f: &SeriesFunction,
    t_grid: &[f64],
) -> Result<Vec<Complex64>> {
    model.validate()?;
    let start = if f.singular_at_zero() { f64::MIN_POSITIVE } else { 0.0 };
    t_grid
        .iter()
        .map(|&t| {
            let real_tail = quad::integrate_tail(
                &|v| model.psi(t * f.eval(v).re).0,
                start,
                &TailConfig { max_windows: 24, ..Default::default() },
            );
            let re = match real_tail.verdict {
                TailVerdict::Finite { value, .. } => value,
                TailVerdict::Divergent => {
                    return Err(Error::NonConvergent(
                        "int psi_r(t f) diverges; Xf does not exist for this pair".into(),
                    ))
                }
                TailVerdict::Inconclusive => {
                    return Err(Error::NonConvergent("int psi_r(t f) inconclusive".into()))
                }
            };
            let scheme = ImproperScheme { tol: 1e-10, max_windows: 400, ..Default::default() };
            let imag_rep = quad::improper(&|v| model.psi(t * f.eval(v).re).1, start, &scheme)?;
            let im = imag_rep.require_value()?.re;
            Ok(Complex64::new(-re, im).exp())
        })
        .collect()
}

/// One compared grid point.
#[derive(Debug, Clone, Copy)]
pub struct ChfPoint {
    pub t: f64,
    pub empirical: Complex64,
    pub se_re: f64,
    pub se_im: f64,
    pub analytic: Complex64,
    /// Worst componentwise standardized discrepancy.
    pub zscore: f64,
}

/// Comparison verdict over a grid.
#[derive(Debug, Clone)]
pub struct ChfComparison {
    pub points: Vec<ChfPoint>,
    pub max_abs_discrepancy: f64,
    pub threshold: f64,
    pub pass: bool,
    pub note: String,
}

impl ChfComparison {
    /// CSV rows (t, emp_re, emp_im, ci, ana_re, ana_im, zscore); `ci` is the
    /// larger componentwise standard error.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "t,emp_re,emp_im,ci,ana_re,ana_im,zscore")?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                p.t,
                p.empirical.re,
                p.empirical.im,
                p.se_re.max(p.se_im),
                p.analytic.re,
                p.analytic.im,
                p.zscore
            )?;
        }
        Ok(())
    }
}

/// Standardized pointwise comparison; passes when every point is within
/// `z_threshold` standard errors componentwise.
pub fn compare(
    empirical: &EmpiricalChf,
    analytic: &[Complex64],
    z_threshold: f64,
) -> Result<ChfComparison> {
    if empirical.points.len() != analytic.len() {
        return Err(Error::InvalidParameter("grids of different lengths".into()));
    }
    let mut points = Vec::with_capacity(analytic.len());
    let mut max_abs = 0.0f64;
    let mut pass = true;
    for (e, &a) in empirical.points.iter().zip(analytic) {
        let dre = (e.mean.re - a.re).abs();
        let dim = (e.mean.im - a.im).abs();
        max_abs = max_abs.max((e.mean - a).norm());
        let zre = if e.se_re > 0.0 { dre / e.se_re } else if dre > 1e-12 { f64::INFINITY } else { 0.0 };
        let zim = if e.se_im > 0.0 { dim / e.se_im } else if dim > 1e-12 { f64::INFINITY } else { 0.0 };
        let z = zre.max(zim);
        if z > z_threshold {
            pass = false;
        }
        points.push(ChfPoint {
            t: e.t,
            empirical: e.mean,
            se_re: e.se_re,
            se_im: e.se_im,
            analytic: a,
            zscore: z,
        });
    }
    let n = points.len();
    Ok(ChfComparison {
        points,
        max_abs_discrepancy: max_abs,
        threshold: z_threshold,
        pass,
        note: format!("pointwise {z_threshold} sigma over {n} points (no Bonferroni correction)"),
    })
}

/// How far to run the series when sampling Nf.
#[derive(Debug, Clone, Copy)]
pub enum Horizon {
    /// Fixed number of terms.
    Terms(usize),
    /// All arrivals below a time horizon (enough for compactly supported f).
    Past(f64),
}

/// Replicate samples of the (real-valued) series sum f(S_n).
pub fn sample_nf(
    spec: &DistributionSpec,
    f: &SeriesFunction,
    horizon: Horizon,
    key: StreamKey,
    replicates: usize,
) -> Result<Vec<f64>> {
    if matches!(f, SeriesFunction::CisOverX) {
        return Err(Error::Unsupported(
            "characteristic-function sampling needs a real-valued series".into(),
        ));
    }
    let rows = exec::map_replicates(replicates, |rep| -> Result<f64> {
        let mut s = ArrivalStream::new(*spec, key.with_replicate(rep as u64));
        let n = match horizon {
            Horizon::Terms(n) => {
                s.extend(n);
                n
            }
            Horizon::Past(t) => s.extend_past(t),
        };
        Ok(series::partial_sum(f, s.arrivals(), n)?.re)
    });
    rows.into_iter().collect()
}
