//! One-sided Levy measure analytics: characteristic exponents, tails and
//! their inverses, modular functionals, the improper-integral engine surface,
//! LePage series evaluation and the three-series K functions.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::distributions::{parse_callform, MarkerDensity};
use crate::error::{Error, Result};
use crate::quad::{self, TailConfig, TailVerdict};
use crate::rng::StreamKey;
use crate::series::SeriesFunction;
use crate::special;
use crate::util::CompensatedComplex;

pub use crate::quad::{Acceleration, Exhaustion, ImproperReport, ImproperScheme, WindowRecord};

/// Supported one-sided Levy measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevyModel {
    /// nu = delta_1 (standard Poisson process).
    PoissonUnit,
    /// nu(dx) = alpha x^{-alpha-1} dx with alpha in (0, 1).
    Stable { alpha: f64 },
    /// nu(dx) = e^{-x}/x dx (Gamma subordinator).
    GammaUnit,
}

impl LevyModel {
    pub fn validate(&self) -> Result<()> {
        if let LevyModel::Stable { alpha } = self {
            if !(*alpha > 0.0 && *alpha < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "stable exponent must lie in (0, 1), got {alpha}"
                )));
            }
        }
        Ok(())
    }

    /// Characteristic exponent pair (psi_r, psi_i) in closed form.
    ///
    /// For the stable model both constants carry Gamma(1 - alpha); direct
    /// quadrature of the defining integrals confirms this factor (see the
    /// exponent tests), so it is used for psi_r as well as psi_i.
    pub fn psi(&self, theta: f64) -> (f64, f64) {
        match self {
            LevyModel::PoissonUnit => (1.0 - theta.cos(), theta.sin()),
            LevyModel::Stable { alpha } => {
                let a = *alpha;
                let g = special::gamma(1.0 - a);
                let c = g * (a * PI / 2.0).cos();
                let s = g * (a * PI / 2.0).sin();
                let pow = theta.abs().powf(a);
                (c * pow, s * theta.signum() * pow)
            }
            LevyModel::GammaUnit => (0.5 * (1.0 + theta * theta).ln(), theta.atan()),
        }
    }

    /// Laplace exponent psi(theta) = int (1 - e^{-theta x}) nu(dx), theta >= 0.
    pub fn laplace_exponent(&self, theta: f64) -> Result<f64> {
        if theta < 0.0 {
            return Err(Error::Domain(format!("Laplace exponent needs theta >= 0, got {theta}")));
        }
        Ok(match self {
            LevyModel::PoissonUnit => 1.0 - (-theta).exp(),
            LevyModel::Stable { alpha } => special::gamma(1.0 - alpha) * theta.powf(*alpha),
            LevyModel::GammaUnit => theta.ln_1p(),
        })
    }

    /// Tail G(x) = nu(x, infinity), with the unit-interval indicator
    /// convention for the Poisson model.
    pub fn tail(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("tail needs x > 0, got {x}")));
        }
        Ok(match self {
            LevyModel::PoissonUnit => {
                if x <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            LevyModel::Stable { alpha } => x.powf(-alpha),
            LevyModel::GammaUnit => special::exp_integral_e1(x)?,
        })
    }

    /// Generalized inverse H = G^{-1}.
    pub fn tail_inverse(&self, u: f64) -> Result<f64> {
        if !(u > 0.0) {
            return Err(Error::Domain(format!("tail inverse needs u > 0, got {u}")));
        }
        Ok(match self {
            LevyModel::PoissonUnit => {
                if u <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            LevyModel::Stable { alpha } => u.powf(-1.0 / alpha),
            LevyModel::GammaUnit => special::inv_exp_integral_e1(u)?,
        })
    }

    /// Density of nu where one exists (used by quadrature cross-checks).
    pub fn density(&self, x: f64) -> Option<f64> {
        match self {
            LevyModel::PoissonUnit => None,
            LevyModel::Stable { alpha } => Some(alpha * x.powf(-alpha - 1.0)),
            LevyModel::GammaUnit => Some((-x).exp() / x),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (name, params) = parse_callform(text)?;
        let model = match name.as_str() {
            "poissonunit" | "poisson" => LevyModel::PoissonUnit,
            "stable" => {
                let alpha = params
                    .iter()
                    .find(|(k, _)| k == "alpha")
                    .map(|(_, v)| *v)
                    .ok_or_else(|| Error::InvalidParameter("stable: missing `alpha`".into()))?;
                LevyModel::Stable { alpha }
            }
            "gammaunit" | "gamma" => LevyModel::GammaUnit,
            other => return Err(Error::InvalidParameter(format!("unknown model `{other}`"))),
        };
        model.validate()?;
        Ok(model)
    }
}

impl std::fmt::Display for LevyModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LevyModel::PoissonUnit => write!(f, "poissonunit"),
            LevyModel::Stable { alpha } => write!(f, "stable(alpha={alpha})"),
            LevyModel::GammaUnit => write!(f, "gammaunit"),
        }
    }
}

// ---------------------------------------------------------------------------
// Improper integral operation
// ---------------------------------------------------------------------------

/// Improper integral of a series function over (0, infinity).
///
/// A window whose quadrature cannot meet tolerance (a non-integrable stretch,
/// e.g. 1/x near 0) is reported as non-convergence with the value withheld,
/// not as a hard error.
pub fn improper_integral(f: &SeriesFunction, scheme: &ImproperScheme) -> Result<ImproperReport> {
    improper_integral_from(f, 0.0, scheme)
}

/// Same, from an interior lower limit.
pub fn improper_integral_from(
    f: &SeriesFunction,
    start: f64,
    scheme: &ImproperScheme,
) -> Result<ImproperReport> {
    match quad::improper_complex(&|x| f.eval(x), start, scheme) {
        Ok(rep) => Ok(rep),
        Err(Error::Tolerance { achieved, .. }) => Ok(ImproperReport {
            value: None,
            achieved_tol: achieved,
            windows_used: 0,
            converged: false,
            accelerated: false,
            detail: "window quadrature failed to converge; integrand appears non-integrable"
                .into(),
            trace: Vec::new(),
        }),
        Err(e) => Err(e),
    }
}

// ---------------------------------------------------------------------------
// Modular functionals
// ---------------------------------------------------------------------------

/// Outcome of a modular evaluation; divergence is a flag, not an error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModularOutcome {
    Finite(f64),
    Divergent,
    Inconclusive,
}

impl ModularOutcome {
    fn from_tail(report: &quad::TailReport) -> Self {
        match report.verdict {
            TailVerdict::Finite { value, .. } => ModularOutcome::Finite(value),
            TailVerdict::Divergent => ModularOutcome::Divergent,
            TailVerdict::Inconclusive => ModularOutcome::Inconclusive,
        }
    }
}

/// Inner x-integrals of the modulars: int (|x c| ^ 1) nu(dx) and
/// int (x^2 c^2 ^ 1) nu(dx) for c = |f(t)|, in closed form per model.
fn modular_inner(model: &LevyModel, c: f64, square: bool) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    match model {
        LevyModel::PoissonUnit => {
            if square {
                (c * c).min(1.0)
            } else {
                c.min(1.0)
            }
        }
        LevyModel::Stable { alpha } => {
            let a = *alpha;
            if square {
                2.0 * c.powf(a) / (2.0 - a)
            } else {
                c.powf(a) / (1.0 - a)
            }
        }
        LevyModel::GammaUnit => {
            let inv = 1.0 / c;
            let e1 = special::exp_integral_e1(inv).unwrap_or(0.0);
            if square {
                c * c * (1.0 - (1.0 + inv) * (-inv).exp()) + e1
            } else {
                c * (1.0 - (-inv).exp()) + e1
            }
        }
    }
}

/// Modular functionals (Psi_1, Psi_2) of f under the model, via closed inner
/// integrals and dyadic outer quadrature with divergence detection.
pub fn modulars(f: &SeriesFunction, model: &LevyModel) -> Result<(ModularOutcome, ModularOutcome)> {
    model.validate()?;
    let start = if f.singular_at_zero() { f64::MIN_POSITIVE } else { 0.0 };
    let cfg = TailConfig::default();
    let psi1 = quad::integrate_tail(&|t| modular_inner(model, f.eval(t).norm(), false), start, &cfg);
    let psi2 = quad::integrate_tail(&|t| modular_inner(model, f.eval(t).norm(), true), start, &cfg);
    Ok((ModularOutcome::from_tail(&psi1), ModularOutcome::from_tail(&psi2)))
}

// ---------------------------------------------------------------------------
// LePage series
// ---------------------------------------------------------------------------

/// Partial sums of the marked series sum_n H(S_n p(V_n)) f(V_n).
#[derive(Debug, Clone)]
pub struct LepageEvaluation {
    pub partials: Vec<Complex64>,
    pub final_value: Complex64,
    /// Terms with a nonzero weight H.
    pub nonzero_terms: usize,
}

/// Evaluate the LePage series along `n` arrivals, drawing marks from the
/// stream of `marker_key`.
pub fn lepage_evaluate(
    model: &LevyModel,
    marker: &MarkerDensity,
    f: &SeriesFunction,
    arrivals: &[f64],
    n: usize,
    marker_key: StreamKey,
) -> Result<LepageEvaluation> {
    model.validate()?;
    if arrivals.len() < n {
        return Err(Error::NotRealized { needed: n, realized: arrivals.len() });
    }
    let mut rng = marker_key.rng();
    let marks = marker.sample(n, &mut rng);
    let mut acc = CompensatedComplex::new();
    let mut partials = Vec::with_capacity(n + 1);
    partials.push(Complex64::new(0.0, 0.0));
    let mut nonzero_terms = 0usize;
    for k in 0..n {
        let s = arrivals[k];
        let v = marks[k];
        if s <= 0.0 {
            return Err(Error::Domain("LePage series needs strictly positive arrivals".into()));
        }
        if f.singular_at_zero() && v == 0.0 {
            return Err(Error::Domain("mark at 0 with a kind singular at 0".into()));
        }
        let weight = model.tail_inverse(s * marker.density(v))?;
        if weight != 0.0 {
            nonzero_terms += 1;
            acc.add(f.eval(v) * weight);
        }
        partials.push(acc.value());
    }
    Ok(LepageEvaluation { final_value: *partials.last().unwrap(), partials, nonzero_terms })
}

// ---------------------------------------------------------------------------
// Three-series K functions
// ---------------------------------------------------------------------------

/// Everything needed to evaluate the three-series functions K_1, K_2, K_3.
#[derive(Debug, Clone)]
pub struct KFunctionSet {
    pub model: LevyModel,
    pub marker: MarkerDensity,
    pub f: SeriesFunction,
    /// Truncation constant c (the classical cut-off is 1).
    pub cutoff: f64,
}

impl KFunctionSet {
    pub fn new(model: LevyModel, marker: MarkerDensity, f: SeriesFunction) -> Result<Self> {
        model.validate()?;
        Ok(Self { model, marker, f, cutoff: 1.0 })
    }

    pub fn with_cutoff(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!("cutoff must be positive, got {c}")));
        }
        self.cutoff = c;
        Ok(self)
    }
}

/// Values of the three K functions at one s.
#[derive(Debug, Clone, Copy)]
pub struct KValues {
    /// P(H(s p(V)) |f(V)| > c).
    pub k1: f64,
    /// E [H(s p(V)) f(V)]_c (truncated mean).
    pub k2: Complex64,
    /// E [H(s p(V)) f(V)]^2 restricted to |..| <= c.
    pub k3: f64,
}

fn k_weight(set: &KFunctionSet, s: f64, v: f64) -> Result<Complex64> {
    let p = set.marker.density(v);
    if p == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let h = set.model.tail_inverse(s * p)?;
    Ok(set.f.eval(v) * h)
}

const K_TOL: f64 = 1e-11;

/// Integrate g(v) p(v) over the marker support until four consecutive dyadic
/// windows fall below tolerance.
fn integrate_vanishing(
    set: &KFunctionSet,
    g: &dyn Fn(f64) -> Complex64,
) -> Result<Complex64> {
    let start = set.marker.support_start();
    let sup_end = set.marker.support_end();
    if sup_end.is_finite() {
        return Ok(quad::adaptive_complex(&|v| g(v), start, sup_end, K_TOL)?.value);
    }
    let mut lo = start;
    let mut hi = (2.0 * start).max(start + 1.0);
    let mut acc = CompensatedComplex::new();
    let mut quiet = 0usize;
    for _ in 0..64 {
        let w = quad::adaptive_complex(&|v| g(v), lo, hi, K_TOL)?;
        acc.add(w.value);
        if w.value.norm() <= K_TOL {
            quiet += 1;
            if quiet >= 4 {
                return Ok(acc.value());
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        hi *= 2.0;
    }
    Err(Error::NonConvergent("marker-weighted integral did not exhaust".into()))
}

/// K_1 at s: the probability that the truncation rejects the term.
pub fn k1_value(set: &KFunctionSet, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("K functions need s > 0, got {s}")));
    }
    let c = set.cutoff;
    let g = |v: f64| -> Complex64 {
        let w = k_weight(set, s, v).unwrap_or(Complex64::new(0.0, 0.0));
        let p = set.marker.density(v);
        Complex64::new(if w.norm() > c { p } else { 0.0 }, 0.0)
    };
    Ok(integrate_vanishing_nonneg(set, &g)?)
}

fn integrate_vanishing_nonneg(
    set: &KFunctionSet,
    g: &dyn Fn(f64) -> Complex64,
) -> Result<f64> {
    let start = set.marker.support_start();
    let sup_end = set.marker.support_end();
    if sup_end.is_finite() {
        return Ok(quad::adaptive_complex(&|v| g(v), start, sup_end, K_TOL)?.value.re);
    }
    let rep = quad::integrate_tail(&|v| g(v).re, start, &TailConfig::default());
    match rep.verdict {
        TailVerdict::Finite { value, .. } => Ok(value),
        TailVerdict::Divergent => Err(Error::NonConvergent("nonnegative K integrand diverged".into())),
        TailVerdict::Inconclusive => {
            Err(Error::NonConvergent(format!("K integral inconclusive: {}", rep.detail)))
        }
    }
}

/// K_2 = K at s (truncated mean), by the closed-form cutoff reduction for the
/// Poisson model with a decreasing marker, and by direct marker-weighted
/// quadrature otherwise.
pub fn k2_value(set: &KFunctionSet, s: f64) -> Result<Complex64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("K functions need s > 0, got {s}")));
    }
    if set.model == LevyModel::PoissonUnit && set.marker.is_strictly_decreasing() {
        return k2_poisson_reduction(set, s);
    }
    let c = set.cutoff;
    integrate_vanishing(set, &|v| {
        let w = k_weight(set, s, v).unwrap_or(Complex64::new(0.0, 0.0));
        if w.norm() <= c {
            w * set.marker.density(v)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// The reduction K(s) = int_{a(s)} [f(v)]_c p(v) dv with a(s) = q(1/s).
///
/// Requires the Poisson model and a strictly decreasing marker density.
pub fn k2_poisson_reduction(set: &KFunctionSet, s: f64) -> Result<Complex64> {
    if set.model != LevyModel::PoissonUnit {
        return Err(Error::Unsupported("cutoff reduction needs the Poisson model".into()));
    }
    if !set.marker.is_strictly_decreasing() {
        return Err(Error::Unsupported(
            "cutoff reduction needs a strictly decreasing marker density".into(),
        ));
    }
    let a = set.marker.lower_cutoff(s)?;
    let c = set.cutoff;
    let scheme = ImproperScheme { tol: 1e-10, max_windows: 240, ..Default::default() };
    let rep = quad::improper_complex(
        &|v| {
            let fv = set.f.eval(v);
            if fv.norm() <= c {
                fv * set.marker.density(v)
            } else {
                Complex64::new(0.0, 0.0)
            }
        },
        a,
        &scheme,
    )?;
    rep.require_value()
}

/// K_3 at s (truncated second moment).
pub fn k3_value(set: &KFunctionSet, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("K functions need s > 0, got {s}")));
    }
    let c = set.cutoff;
    integrate_vanishing_nonneg(set, &|v| {
        let w = k_weight(set, s, v).unwrap_or(Complex64::new(0.0, 0.0));
        let n2 = w.norm_sqr();
        Complex64::new(
            if n2 <= c * c { n2 * set.marker.density(v) } else { 0.0 },
            0.0,
        )
    })
}

/// All three K functions at s.
pub fn k_functions(set: &KFunctionSet, s: f64) -> Result<KValues> {
    Ok(KValues { k1: k1_value(set, s)?, k2: k2_value(set, s)?, k3: k3_value(set, s)? })
}

/// Sweep CSV with columns (s, K1, K2_real, K2_imag, K3).
pub fn write_k_sweep_csv<W: Write>(rows: &[(f64, KValues)], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "s,K1,K2_real,K2_imag,K3")?;
    for (s, k) in rows {
        writeln!(w, "{},{},{},{},{}", s, k.k1, k.k2.re, k.k2.im, k.k3)?;
    }
    Ok(())
}

/// One local |K_2| peak near an anchor s.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopePoint {
    pub s: f64,
    pub value: f64,
}

/// Fit the log-log slope of the |K_2| envelope over anchor values of s.
///
/// Around each anchor the cutoff a(s) is scanned across one full oscillation
/// period (width 2 pi) on a fine grid; the largest interior local maximum of
/// |K_2| and the s where it occurs form one envelope point. Scan-edge maxima
/// are not oscillation peaks (the integral grows monotonically toward small
/// cutoffs) and are ignored. The fitted slope of log value against log s
/// across the peaks estimates the decay exponent.
pub fn k2_envelope_slope(
    set: &KFunctionSet,
    anchors: &[f64],
    points_per_window: usize,
) -> Result<(f64, Vec<EnvelopePoint>)> {
    if anchors.len() < 2 {
        return Err(Error::InvalidParameter("need at least two anchors".into()));
    }
    if points_per_window < 8 {
        return Err(Error::InvalidParameter("need at least 8 scan points per window".into()));
    }
    let mut points = Vec::with_capacity(anchors.len());
    for &s0 in anchors {
        let a0 = set.marker.lower_cutoff(s0)?;
        let mut scan: Vec<(f64, f64)> = Vec::with_capacity(points_per_window);
        for j in 0..points_per_window {
            // one full oscillation period upward of the anchor's cutoff,
            // slightly overlapped so a peak at the anchor itself is interior
            let a = a0 - 0.25 + (2.0 * PI + 0.5) * (j as f64 + 0.5) / points_per_window as f64;
            if a <= set.marker.support_start() {
                continue;
            }
            // invert a = q(1/s): s = 1 / p(a)
            let s = 1.0 / set.marker.density(a);
            if !s.is_finite() || s <= 0.0 {
                continue;
            }
            scan.push((s, k2_value(set, s)?.norm()));
        }
        let mut best: Option<EnvelopePoint> = None;
        for w in scan.windows(3) {
            let peak = w[1].1 > w[0].1 && w[1].1 > w[2].1;
            if peak && best.map_or(true, |b| w[1].1 > b.value) {
                best = Some(EnvelopePoint { s: w[1].0, value: w[1].1 });
            }
        }
        let best = best.ok_or_else(|| {
            Error::NonConvergent(format!("no interior |K| peak near s = {s0}"))
        })?;
        points.push(best);
    }
    let xs: Vec<f64> = points.iter().map(|p| p.s.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.value.ln()).collect();
    let (slope, _, _) = crate::util::ols_fit(&xs, &ys);
    Ok((slope, points))
}

/// Integrability verdicts for the three-series diagnostics.
#[derive(Debug, Clone)]
pub struct ThreeSeriesReport {
    pub k1: ModularOutcome,
    pub k3: ModularOutcome,
    /// Improper-integration evidence for int K_2(s) ds.
    pub k2_improper: ImproperReport,
}

/// Numeric three-series diagnostics: tail-classified integrals of K_1 and
/// K_3 over s, plus windowed improper evidence for the K_2 integral with
/// windows aligned to the oscillation nodes of the integrand.
pub fn three_series_check(set: &KFunctionSet) -> Result<ThreeSeriesReport> {
    let cfg = TailConfig { max_windows: 14, window_tol: 1e-9, atol: 1e-9, ..Default::default() };
    let k1_int = quad::integrate_tail(
        &|s| if s <= 0.0 { 0.0 } else { k1_value(set, s).unwrap_or(f64::NAN) },
        0.0,
        &cfg,
    );
    let k3_int = quad::integrate_tail(
        &|s| if s <= 0.0 { 0.0 } else { k3_value(set, s).unwrap_or(f64::NAN) },
        0.0,
        &cfg,
    );

    // window endpoints where the reduction cutoff a(s) crosses multiples of
    // pi, i.e. s_k = 1/p(k pi); fall back to doubling windows for markers
    // without a decreasing branch
    let ends: Vec<f64> = if set.marker.is_strictly_decreasing() {
        let start_a = set.marker.support_start().max(1e-12);
        let k0 = (start_a / PI).ceil() as usize + 1;
        (k0..k0 + 48)
            .map(|k| 1.0 / set.marker.density(k as f64 * PI))
            .filter(|s| s.is_finite() && *s > 0.0)
            .collect()
    } else {
        (0..32).map(|j| 2.0_f64.powi(j)).collect()
    };
    let scheme = ImproperScheme {
        exhaustion: Exhaustion::Windows(ends),
        acceleration: Acceleration::Euler,
        tol: 1e-6,
        max_windows: 48,
        window_tol: 1e-9,
    };
    let k2_improper = quad::improper_complex(
        &|s| {
            if s <= 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                k2_value(set, s).unwrap_or(Complex64::new(f64::NAN, f64::NAN))
            }
        },
        0.0,
        &scheme,
    )?;

    Ok(ThreeSeriesReport {
        k1: ModularOutcome::from_tail(&k1_int),
        k3: ModularOutcome::from_tail(&k3_int),
        k2_improper,
    })
}

// ---------------------------------------------------------------------------
// Amplitude bound (integration-by-parts identity)
// ---------------------------------------------------------------------------

/// The three pieces of the integration-by-parts identity
/// int_a A(x) e^{ix} x^{-r} dx = i (A(a) e^{ia} / a^r
///   + int_a A'(x) e^{ix} x^{-r} dx - r int_a A(x) e^{ix} x^{-r-1} dx),
/// evaluated at one s with a = s^{1/r}.
#[derive(Debug, Clone, Copy)]
pub struct AmplitudeComponents {
    pub s: f64,
    pub direct: Complex64,
    pub quotient: Complex64,
    pub derivative_integral: Complex64,
    pub order_integral: Complex64,
}

#[derive(Debug, Clone)]
pub struct AmplitudeKReport {
    pub rows: Vec<AmplitudeComponents>,
    /// Crude integral of |K| over the s grid (trapezoid on the grid).
    pub abs_k_estimate: f64,
}

/// Verify the integration-by-parts identity for f(x) = A(x) e^{ix} with a
/// Pareto-type density exponent r, at each s in the grid.
///
/// Preconditions checked numerically: A is square-integrable and A' is
/// absolutely integrable on tails. A component/direct mismatch larger than
/// 1e-8 is an error.
pub fn amplitude_k_bound(
    amplitude: &dyn Fn(f64) -> f64,
    derivative: &dyn Fn(f64) -> f64,
    r: f64,
    s_grid: &[f64],
) -> Result<AmplitudeKReport> {
    if !(r > 1.0) {
        return Err(Error::InvalidParameter(format!("need r > 1, got {r}")));
    }
    if s_grid.is_empty() || s_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("s grid must be strictly increasing".into()));
    }
    // tail integrability of A^2 and |A'|. A tail-bounded amplitude is also
    // admitted (the constant-amplitude specialization), since every component
    // integral converges for it; growing amplitudes are rejected.
    let cfg = TailConfig::default();
    let a_sq = quad::integrate_tail(&|x| amplitude(x) * amplitude(x), 1.0, &cfg);
    let square_integrable = a_sq.verdict.is_finite();
    if !square_integrable {
        let near = (0..64).map(|j| amplitude(1.0 + j as f64)).fold(0.0, f64::max);
        let far =
            (0..64).map(|j| amplitude(2f64.powi(20) * (1.0 + j as f64))).fold(0.0, f64::max);
        if !(near.is_finite() && far.is_finite() && far <= 2.0 * near.max(1e-300)) {
            return Err(Error::InvalidParameter(
                "amplitude is neither square-integrable nor bounded on tails".into(),
            ));
        }
    }
    let ap_abs = quad::integrate_tail(&|x| derivative(x).abs(), 1.0, &cfg);
    if !ap_abs.verdict.is_finite() {
        return Err(Error::InvalidParameter(
            "amplitude derivative is not absolutely integrable on tails".into(),
        ));
    }

    let i = Complex64::new(0.0, 1.0);
    let scheme = ImproperScheme { tol: 1e-10, max_windows: 400, ..Default::default() };
    let cis = |x: f64| {
        let (sin, cos) = x.sin_cos();
        Complex64::new(cos, sin)
    };
    let mut rows = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let a = s.powf(1.0 / r);
        let direct = quad::improper_complex(&|x| cis(x) * amplitude(x) * x.powf(-r), a, &scheme)?
            .require_value()?;
        let quotient = i * amplitude(a) * cis(a) / a.powf(r);
        let derivative_integral = i * quad::improper_complex(
            &|x| cis(x) * derivative(x) * x.powf(-r),
            a,
            &scheme,
        )?
        .require_value()?;
        let order_integral = -i * r
            * quad::improper_complex(&|x| cis(x) * amplitude(x) * x.powf(-r - 1.0), a, &scheme)?
                .require_value()?;
        let mismatch =
            (direct - (quotient + derivative_integral + order_integral)).norm();
        if mismatch > 1e-8 {
            return Err(Error::Tolerance { achieved: mismatch, requested: 1e-8 });
        }
        rows.push(AmplitudeComponents { s, direct, quotient, derivative_integral, order_integral });
    }
    // trapezoid of |direct| over the grid
    let mut abs_k = 0.0;
    for w in rows.windows(2) {
        abs_k += 0.5 * (w[0].direct.norm() + w[1].direct.norm()) * (w[1].s - w[0].s);
    }
    Ok(AmplitudeKReport { rows, abs_k_estimate: abs_k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::MarkerFamily;
    use crate::pointprocess::ArrivalStream;
    use crate::util;

    #[test]
    fn psi_poisson_at_half_pi() {
        let (r, i) = LevyModel::PoissonUnit.psi(PI / 2.0);
        assert!((r - 1.0).abs() < 1e-15);
        assert!((i - 1.0).abs() < 1e-15);
    }

    #[test]
    fn psi_gamma_at_one() {
        let (r, i) = LevyModel::GammaUnit.psi(1.0);
        assert!((r - 0.5 * 2.0_f64.ln()).abs() < 1e-15);
        assert!((i - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn psi_stable_matches_oscillatory_quadrature() {
        // arbitration of the constants by quadrature of the defining
        // integrals with nu(dx) = alpha x^{-alpha-1} dx. The heads over
        // [0, A] are rewritten by two exact integrations by parts so the
        // quadrature never touches the x^{-alpha-1} singularity:
        //   int_0^A sin(x) a x^{-a-1} dx
        //     = -A^{-a} sin A + A^{1-a} cos A/(1-a)
        //       + (1/(1-a)) int_0^A x^{1-a} sin x dx
        //   int_0^A (1-cos x) a x^{-a-1} dx
        //     = -A^{-a}(1-cos A) + A^{1-a} sin A/(1-a)
        //       - (1/(1-a)) int_0^A x^{1-a} cos x dx  + ... (see below)
        for &alpha in &[0.3, 0.5, 0.7] {
            let model = LevyModel::Stable { alpha };
            let density = |x: f64| alpha * x.powf(-alpha - 1.0);
            let (pr, pi_) = model.psi(1.0);
            let a = 8.0 * PI;
            let scheme = ImproperScheme { tol: 1e-11, max_windows: 400, ..Default::default() };

            let smooth_sin =
                quad::adaptive(&|x: f64| x.powf(1.0 - alpha) * x.sin(), 0.0, a, 1e-13)
                    .unwrap()
                    .value;
            let smooth_cos =
                quad::adaptive(&|x: f64| x.powf(1.0 - alpha) * x.cos(), 0.0, a, 1e-13)
                    .unwrap()
                    .value;

            // psi_i head by parts, then the alternating improper tail
            let head_i = -a.powf(-alpha) * a.sin()
                + a.powf(1.0 - alpha) * a.cos() / (1.0 - alpha)
                + smooth_sin / (1.0 - alpha);
            let tail_i = quad::improper(&|x| x.sin() * density(x), a, &scheme)
                .unwrap()
                .require_value()
                .unwrap()
                .re;
            assert!((pr >= 0.0) && pi_ > 0.0);
            assert!(
                (head_i + tail_i - pi_).abs() < 1e-8,
                "alpha={alpha}: psi_i {pi_} vs quadrature {}",
                head_i + tail_i
            );

            // psi_r head by parts, tail as nu-mass minus oscillatory part
            let one_minus_cos_a = {
                let h = (0.5 * a).sin();
                2.0 * h * h
            };
            let head_r = -a.powf(-alpha) * one_minus_cos_a
                + a.powf(1.0 - alpha) * a.sin() / (1.0 - alpha)
                - smooth_cos / (1.0 - alpha);
            let tail_mass = a.powf(-alpha); // int_a^inf nu(dx)
            let osc = quad::improper(&|x| x.cos() * density(x), a, &scheme)
                .unwrap()
                .require_value()
                .unwrap()
                .re;
            let oracle = head_r + tail_mass - osc;
            assert!(
                (pr - oracle).abs() < 1e-8,
                "alpha={alpha}: psi_r {pr} vs quadrature {oracle}"
            );
        }
    }

    #[test]
    fn psi_stable_half_matches_gamma_half_constants() {
        // alpha = 1/2, theta = 1: both constants carry Gamma(1/2)
        let (r, i) = LevyModel::Stable { alpha: 0.5 }.psi(1.0);
        let expect = special::gamma(0.5) * (PI / 4.0).cos();
        assert!((r - expect).abs() < 1e-12);
        assert!((i - expect).abs() < 1e-12);
    }

    #[test]
    fn psi_symmetry_on_grid() {
        for model in
            [LevyModel::PoissonUnit, LevyModel::Stable { alpha: 0.4 }, LevyModel::GammaUnit]
        {
            for j in 1..=100 {
                let theta = 0.173 * j as f64 - 8.0;
                let (r_pos, i_pos) = model.psi(theta);
                let (r_neg, i_neg) = model.psi(-theta);
                assert!((r_pos - r_neg).abs() <= 1e-12, "{model} even part at {theta}");
                assert!((i_pos + i_neg).abs() <= 1e-12, "{model} odd part at {theta}");
                assert!(r_pos >= 0.0);
            }
            let (r0, i0) = model.psi(0.0);
            assert_eq!((r0, i0), (0.0, 0.0));
        }
    }

    #[test]
    fn stable_scaling_identity() {
        let model = LevyModel::Stable { alpha: 0.5 };
        for &c in &[0.5, 2.0, 7.3] {
            for &theta in &[0.3, 1.0, 4.0] {
                let (r1, i1) = model.psi(c * theta);
                let (r0, i0) = model.psi(theta);
                let factor = c.powf(0.5);
                assert!((r1 - factor * r0).abs() < 1e-12 * r1.max(1.0));
                assert!((i1 - factor * i0).abs() < 1e-12 * i1.abs().max(1.0));
            }
        }
    }

    #[test]
    fn stable_alpha_out_of_range_rejected() {
        assert!(LevyModel::parse("stable(alpha=1.0)").is_err());
        assert!(LevyModel::parse("stable(alpha=0)").is_err());
        assert!(LevyModel::parse("stable(alpha=0.5)").is_ok());
    }

    #[test]
    fn poisson_tail_indicator_values() {
        let m = LevyModel::PoissonUnit;
        assert_eq!(m.tail_inverse(0.5).unwrap(), 1.0);
        assert_eq!(m.tail_inverse(2.0).unwrap(), 0.0);
        assert_eq!(m.tail(0.7).unwrap(), 1.0);
        assert_eq!(m.tail(1.5).unwrap(), 0.0);
    }

    #[test]
    fn stable_inverse_example() {
        let m = LevyModel::Stable { alpha: 0.5 };
        assert!((m.tail_inverse(4.0).unwrap() - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn tail_inverse_round_trip_log_grid() {
        for model in [LevyModel::Stable { alpha: 0.5 }, LevyModel::GammaUnit] {
            for j in 0..40 {
                let u = 10f64.powf(-6.0 + 0.2 * j as f64);
                let x = model.tail_inverse(u).unwrap();
                let back = model.tail(x).unwrap();
                assert!(
                    (back - u).abs() < 1e-10 * u,
                    "{model}: u={u} x={x} back={back}"
                );
            }
        }
    }

    #[test]
    fn e1_matches_high_precision_quadrature() {
        // independent oracle: adaptive quadrature of the defining integral
        for j in 0..20 {
            let x = 10f64.powf(-2.0 + 0.15 * j as f64);
            let far = x + 60.0; // e^{-60} beyond double precision
            let oracle = quad::adaptive(&|u: f64| (-u).exp() / u, x, far, 1e-14).unwrap().value;
            let e1 = special::exp_integral_e1(x).unwrap();
            assert!(
                (e1 - oracle).abs() <= 1e-12 * oracle.abs(),
                "x={x}: {e1} vs {oracle}"
            );
        }
        let known = special::exp_integral_e1(1.0).unwrap();
        assert!((known - 0.21938393).abs() < 5e-9);
    }

    #[test]
    fn improper_integral_examples() {
        let scheme = ImproperScheme::default();
        let sinc = improper_integral(&SeriesFunction::Sinc, &scheme).unwrap();
        assert!((sinc.require_value().unwrap().re - PI / 2.0).abs() < 1e-8);

        let ind = improper_integral(
            &SeriesFunction::IndicatorWindow { lo: 0.0, hi: 1.0 },
            &scheme,
        )
        .unwrap();
        assert!((ind.require_value().unwrap().re - 1.0).abs() < 1e-10);

        // 1/x: no alternation, no decay -> value withheld
        let harmonic = improper_integral(&SeriesFunction::CosOverX, &scheme);
        // cos x / x is integrable at no point near 0; report, not error
        assert!(!harmonic.unwrap().converged);
    }

    #[test]
    fn modulars_poisson_sinc() {
        let (psi1, psi2) = modulars(&SeriesFunction::Sinc, &LevyModel::PoissonUnit).unwrap();
        assert_eq!(psi1, ModularOutcome::Divergent);
        match psi2 {
            ModularOutcome::Finite(v) => assert!((v - PI / 2.0).abs() < 0.02, "{v}"),
            other => panic!("expected finite Psi_2, got {other:?}"),
        }
    }

    #[test]
    fn modulars_zero_function() {
        let zero = SeriesFunction::AmplitudeSin {
            amplitude: std::sync::Arc::new(|_| 0.0),
            derivative: std::sync::Arc::new(|_| 0.0),
        };
        let (psi1, psi2) = modulars(&zero, &LevyModel::PoissonUnit).unwrap();
        assert_eq!(psi1, ModularOutcome::Finite(0.0));
        assert_eq!(psi2, ModularOutcome::Finite(0.0));
    }

    #[test]
    fn modulars_unit_indicator() {
        let f = SeriesFunction::IndicatorWindow { lo: 0.0, hi: 1.0 };
        let (psi1, psi2) = modulars(&f, &LevyModel::PoissonUnit).unwrap();
        match (psi1, psi2) {
            (ModularOutcome::Finite(a), ModularOutcome::Finite(b)) => {
                assert!((a - 1.0).abs() < 1e-8, "{a}");
                assert!((b - 1.0).abs() < 1e-8, "{b}");
            }
            other => panic!("expected finite pair, got {other:?}"),
        }
    }

    #[test]
    fn lepage_poisson_indicator_is_poisson_count() {
        // with nu = delta_1 the kept atoms form a unit-mean Poisson count
        let model = LevyModel::PoissonUnit;
        let marker = MarkerDensity::new(MarkerFamily::ExponentialUnit).unwrap();
        let f = SeriesFunction::IndicatorWindow { lo: 0.0, hi: 1.0 };
        let spec = crate::distributions::DistributionSpec::exponential(1.0).unwrap();
        let reps = 10_000;
        let values: Vec<f64> = crate::exec::map_replicates(reps, |rep| {
            let key = StreamKey::new(31, 0x1e9a, rep as u64);
            let mut s = ArrivalStream::new(spec, key);
            s.extend(128);
            lepage_evaluate(&model, &marker, &f, s.arrivals(), 128, key.child(7))
                .unwrap()
                .final_value
                .re
        });
        let m = util::mean(&values);
        let v = util::sample_variance(&values);
        assert!((m - 1.0).abs() < 0.03, "mean {m}");
        assert!((v - 1.0).abs() < 0.06, "variance {v}");
    }

    #[test]
    fn lepage_empty_prefix_is_zero() {
        let model = LevyModel::PoissonUnit;
        let marker = MarkerDensity::new(MarkerFamily::ExponentialUnit).unwrap();
        let f = SeriesFunction::Sinc;
        let eval = lepage_evaluate(&model, &marker, &f, &[], 0, StreamKey::new(1, 2, 3)).unwrap();
        assert_eq!(eval.final_value, Complex64::new(0.0, 0.0));
        assert_eq!(eval.nonzero_terms, 0);
    }

    #[test]
    fn lepage_stable_uniform_marker_is_classic_sum() {
        // H_n = S_n^{-2} for alpha = 1/2 and p = 1 on [0,1]
        let model = LevyModel::Stable { alpha: 0.5 };
        let marker = MarkerDensity::new(MarkerFamily::UniformUnit).unwrap();
        let f = SeriesFunction::IndicatorWindow { lo: 0.0, hi: 1.0 };
        let spec = crate::distributions::DistributionSpec::exponential(1.0).unwrap();
        let key = StreamKey::new(5, 0xab, 0);
        let mut s = ArrivalStream::new(spec, key);
        s.extend(500);
        let eval =
            lepage_evaluate(&model, &marker, &f, s.arrivals(), 500, key.child(1)).unwrap();
        let classic: f64 = s.arrivals().iter().map(|&t| t.powi(-2)).sum();
        assert!((eval.final_value.re - classic).abs() < 1e-9 * classic);
    }

    #[test]
    fn k2_pareto_reduction_matches_direct_quadrature() {
        // K(s) = int_{sqrt s} sin v * v^{-3} dv for the unnormalized r=2 marker
        let marker = MarkerDensity::new(MarkerFamily::ParetoTail { r: 2.0, x0: 1.0 })
            .unwrap()
            .unnormalized()
            .unwrap();
        let set = KFunctionSet::new(LevyModel::PoissonUnit, marker, SeriesFunction::Sinc).unwrap();
        for &s in &[100.0, 400.0, 1600.0] {
            let k2 = k2_value(&set, s).unwrap();
            let a = s.sqrt();
            // independent route: truncated proper integral with analytic bound
            let far = a + 6000.0 * PI;
            let direct = quad::adaptive_complex(
                &|v: f64| Complex64::new(v.sin() * v.powf(-3.0), 0.0),
                a,
                far,
                1e-13,
            )
            .unwrap()
            .value;
            // |int_far^inf sin v v^{-3}| <= far^{-3} * pi-ish
            assert!(
                (k2.re - direct.re).abs() < 1e-9,
                "s={s}: {} vs {}",
                k2.re,
                direct.re
            );
            assert!(k2.im.abs() < 1e-12);
        }
    }

    #[test]
    fn k2_scaled_magnitude_bounded_for_pareto_marker() {
        let marker = MarkerDensity::new(MarkerFamily::ParetoTail { r: 2.0, x0: 1.0 })
            .unwrap()
            .unnormalized()
            .unwrap();
        let set = KFunctionSet::new(LevyModel::PoissonUnit, marker, SeriesFunction::Sinc).unwrap();
        for j in 2..=6 {
            let s = 10f64.powi(j);
            let k2 = k2_value(&set, s).unwrap();
            let scaled = k2.norm() * s.powf(1.5);
            assert!(scaled < 2.0, "s={s}: scaled {scaled}");
        }
    }

    #[test]
    fn k1_vanishes_for_bounded_f() {
        let marker = MarkerDensity::new(MarkerFamily::ParetoTail { r: 2.0, x0: 1.0 }).unwrap();
        let set = KFunctionSet::new(LevyModel::PoissonUnit, marker, SeriesFunction::Sinc).unwrap();
        for &s in &[1.0, 10.0, 1e4] {
            assert_eq!(k1_value(&set, s).unwrap(), 0.0, "s={s}");
        }
    }

    #[test]
    fn k_bounds_hold() {
        let marker = MarkerDensity::new(MarkerFamily::ExponentialUnit).unwrap();
        let set =
            KFunctionSet::new(LevyModel::PoissonUnit, marker, SeriesFunction::CisOverX).unwrap();
        for &s in &[2.0, 50.0, 1e3] {
            let k = k_functions(&set, s).unwrap();
            assert!((0.0..=1.0).contains(&k.k1), "K1 {} at s={s}", k.k1);
            assert!(k.k2.norm() <= set.cutoff + 1e-9, "K2 {} at s={s}", k.k2.norm());
            assert!(k.k3 >= 0.0 && k.k3 <= set.cutoff * set.cutoff + 1e-9);
        }
    }

    #[test]
    fn uniform_marker_rejected_by_reduction_but_not_general_path() {
        let marker = MarkerDensity::new(MarkerFamily::UniformUnit).unwrap();
        let set = KFunctionSet::new(LevyModel::PoissonUnit, marker, SeriesFunction::Sinc).unwrap();
        assert!(matches!(k2_poisson_reduction(&set, 0.5), Err(Error::Unsupported(_))));
        // general path: H(s * 1) = 1 for s <= 1, 0 beyond
        let below = k2_value(&set, 0.5).unwrap();
        let oracle = quad::adaptive(&|v: f64| v.sin() / v.max(1e-300), 0.0, 1.0, 1e-13)
            .unwrap()
            .value;
        assert!((below.re - oracle).abs() < 1e-9, "{below} vs {oracle}");
        let above = k2_value(&set, 2.0).unwrap();
        assert!(above.norm() < 1e-12);
    }

    #[test]
    fn three_series_poisson_sinc_pareto() {
        let marker = MarkerDensity::new(MarkerFamily::ParetoTail { r: 3.0, x0: 1.0 })
            .unwrap()
            .unnormalized()
            .unwrap();
        let set = KFunctionSet::new(LevyModel::PoissonUnit, marker, SeriesFunction::Sinc).unwrap();
        let report = three_series_check(&set).unwrap();
        match report.k1 {
            ModularOutcome::Finite(v) => assert!(v.abs() < 1e-9, "K1 integral {v}"),
            other => panic!("K1 verdict {other:?}"),
        }
        assert!(matches!(report.k3, ModularOutcome::Finite(_)), "{:?}", report.k3);
        assert!(report.k2_improper.converged, "{}", report.k2_improper.detail);
    }

    #[test]
    fn three_series_zero_function_all_finite() {
        let marker = MarkerDensity::new(MarkerFamily::ExponentialUnit).unwrap();
        let zero = SeriesFunction::AmplitudeSin {
            amplitude: std::sync::Arc::new(|_| 0.0),
            derivative: std::sync::Arc::new(|_| 0.0),
        };
        let set = KFunctionSet::new(LevyModel::PoissonUnit, marker, zero).unwrap();
        let report = three_series_check(&set).unwrap();
        assert!(matches!(report.k1, ModularOutcome::Finite(v) if v == 0.0));
        assert!(matches!(report.k3, ModularOutcome::Finite(v) if v == 0.0));
        assert!(report.k2_improper.converged);
        assert!(report.k2_improper.require_value().unwrap().norm() < 1e-9);
    }

    #[test]
    fn amplitude_identity_constant_amplitude() {
        // A == 1 reduces to the plain e^{ix} x^{-r} case
        let report =
            amplitude_k_bound(&|_| 1.0, &|_| 0.0, 2.0, &[100.0, 10_000.0]).unwrap();
        for row in &report.rows {
            let sum = row.quotient + row.derivative_integral + row.order_integral;
            assert!((row.direct - sum).norm() < 1e-8);
        }
        assert!(report.abs_k_estimate.is_finite());
    }

    #[test]
    fn amplitude_identity_log_amplitude() {
        let a = |x: f64| 1.0 / (x + 2.0).ln();
        let ap = |x: f64| -1.0 / ((x + 2.0) * (x + 2.0).ln().powi(2));
        let report = amplitude_k_bound(&a, &ap, 2.0, &[100.0, 10_000.0]).unwrap();
        assert_eq!(report.rows.len(), 2);
    }

    #[test]
    fn amplitude_linear_growth_rejected() {
        let err = amplitude_k_bound(&|x| x, &|_| 1.0, 2.0, &[100.0]);
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }
}
