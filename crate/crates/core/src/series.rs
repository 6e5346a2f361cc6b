//! Evaluation of random series sum_n f(S_n) along a realized arrival prefix:
//! direct, Abel-decomposed, permuted and block-partitioned summation, plus
//! oscillation diagnostics for the tail of the partial sums.
//!
//! All evaluators take the realized arrivals as a slice; generation lives in
//! `pointprocess`. Partial sums use compensated accumulation throughout.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::quad;
use crate::rng::StreamKey;
use crate::util::{self, CompensatedComplex};

/// Shared handle for amplitude functions.
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The function family the series evaluators understand.
#[derive(Clone)]
pub enum SeriesFunction {
    /// sin x / x, extended by 1 at 0.
    Sinc,
    /// e^{ix} / x; singular at 0.
    CisOverX,
    /// cos x / x; singular at 0.
    CosOverX,
    /// A(x) sin x with an explicit derivative handle for A.
    AmplitudeSin { amplitude: RealFn, derivative: RealFn },
    /// Indicator of [lo, hi).
    IndicatorWindow { lo: f64, hi: f64 },
    /// Base function cut off beyond x = cutoff.
    Truncated { base: Box<SeriesFunction>, cutoff: f64 },
}

impl fmt::Debug for SeriesFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sinc => write!(f, "Sinc"),
            Self::CisOverX => write!(f, "CisOverX"),
            Self::CosOverX => write!(f, "CosOverX"),
            Self::AmplitudeSin { .. } => write!(f, "AmplitudeSin"),
            Self::IndicatorWindow { lo, hi } => write!(f, "IndicatorWindow({lo}, {hi})"),
            Self::Truncated { base, cutoff } => write!(f, "Truncated({base:?}, {cutoff})"),
        }
    }
}

impl fmt::Display for SeriesFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sinc => write!(f, "sinc"),
            Self::CisOverX => write!(f, "cisoverx"),
            Self::CosOverX => write!(f, "cosoverx"),
            Self::AmplitudeSin { .. } => write!(f, "amplitudesin"),
            Self::IndicatorWindow { lo, hi } => write!(f, "indicator(lo={lo},hi={hi})"),
            Self::Truncated { base, cutoff } => write!(f, "truncated({base},cutoff={cutoff})"),
        }
    }
}

impl SeriesFunction {
    /// Whether evaluation at 0 is undefined.
    pub fn singular_at_zero(&self) -> bool {
        match self {
            Self::Sinc | Self::IndicatorWindow { .. } | Self::AmplitudeSin { .. } => false,
            Self::CisOverX | Self::CosOverX => true,
            Self::Truncated { base, .. } => base.singular_at_zero(),
        }
    }

    /// Evaluate at x >= 0 (x > 0 for kinds singular at zero).
    pub fn eval(&self, x: f64) -> Complex64 {
        match self {
            Self::Sinc => Complex64::new(if x == 0.0 { 1.0 } else { x.sin() / x }, 0.0),
            Self::CisOverX => {
                let (sin, cos) = x.sin_cos();
                Complex64::new(cos / x, sin / x)
            }
            Self::CosOverX => Complex64::new(x.cos() / x, 0.0),
            Self::AmplitudeSin { amplitude, .. } => Complex64::new(amplitude(x) * x.sin(), 0.0),
            Self::IndicatorWindow { lo, hi } => {
                Complex64::new(if *lo <= x && x < *hi { 1.0 } else { 0.0 }, 0.0)
            }
            Self::Truncated { base, cutoff } => {
                if x <= *cutoff {
                    base.eval(x)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
        }
    }

    /// Real-part shortcut for purely real kinds.
    pub fn eval_re(&self, x: f64) -> f64 {
        self.eval(x).re
    }

    /// Parse `sinc`, `cisoverx`, `cosoverx`, `indicator(lo=..,hi=..)` or
    /// `truncated_sinc(cutoff=..)` strings.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, params) = crate::distributions::parse_callform(text)?;
        let get = |key: &str| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::InvalidParameter(format!("{name}: missing `{key}`")))
        };
        match name.as_str() {
            "sinc" => Ok(Self::Sinc),
            "cisoverx" => Ok(Self::CisOverX),
            "cosoverx" => Ok(Self::CosOverX),
            "indicator" => {
                let lo = get("lo")?;
                let hi = get("hi")?;
                if !(hi > lo && lo >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "indicator needs 0 <= lo < hi, got [{lo}, {hi})"
                    )));
                }
                Ok(Self::IndicatorWindow { lo, hi })
            }
            "truncated_sinc" => {
                Ok(Self::Truncated { base: Box::new(Self::Sinc), cutoff: get("cutoff")? })
            }
            other => Err(Error::InvalidParameter(format!("unknown series function `{other}`"))),
        }
    }
}

fn check_arrivals(f: &SeriesFunction, arrivals: &[f64], n: usize) -> Result<()> {
    if arrivals.len() < n {
        return Err(Error::NotRealized { needed: n, realized: arrivals.len() });
    }
    let singular = f.singular_at_zero();
    for &s in &arrivals[..n] {
        if s < 0.0 || (singular && s == 0.0) {
            return Err(Error::Domain(format!("arrival {s} outside the domain of {f:?}")));
        }
    }
    Ok(())
}

/// How an evaluation was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Direct,
    Abel,
    Permuted { seed: u64 },
    Blocked,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Abel => "abel",
            Method::Permuted { .. } => "permuted",
            Method::Blocked => "blocked",
        }
    }
}

/// Summation-by-parts pieces of a prefix sum: the boundary term R_N Z_N and
/// the absolutely converging series part sum_{n<N} D_n Z_n.
#[derive(Debug, Clone, Copy)]
pub struct AbelComponents {
    pub boundary: Complex64,
    pub series_part: Complex64,
}

/// Partial sums of one series evaluation (P_0 = 0), with optional Abel
/// components.
#[derive(Debug, Clone)]
pub struct SeriesEvaluation {
    pub method: Method,
    pub partials: Vec<Complex64>,
    pub final_value: Complex64,
    pub abel: Option<AbelComponents>,
}

impl SeriesEvaluation {
    /// Largest deviation of the running prefix from the final value.
    pub fn max_excursion(&self) -> f64 {
        self.partials.iter().map(|p| (p - self.final_value).norm()).fold(0.0, f64::max)
    }

    /// Trace CSV rows (method, n_or_k, partial_real, partial_imag), sampled
    /// every `stride` indices (the final row is always written).
    pub fn write_trace_csv<W: Write>(&self, stride: usize, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "method,n_or_k,partial_real,partial_imag")?;
        let stride = stride.max(1);
        let last = self.partials.len() - 1;
        for (i, p) in self.partials.iter().enumerate() {
            if i % stride == 0 || i == last {
                writeln!(w, "{},{},{},{}", self.method.label(), i, p.re, p.im)?;
            }
        }
        Ok(())
    }
}

/// Compensated partial sum sum_{n<=N} f(S_n).
pub fn partial_sum(f: &SeriesFunction, arrivals: &[f64], n: usize) -> Result<Complex64> {
    check_arrivals(f, arrivals, n)?;
    let mut acc = CompensatedComplex::new();
    for &s in &arrivals[..n] {
        acc.add(f.eval(s));
    }
    Ok(acc.value())
}

/// Direct evaluation retaining every partial sum.
pub fn evaluate_direct(f: &SeriesFunction, arrivals: &[f64], n: usize) -> Result<SeriesEvaluation> {
    check_arrivals(f, arrivals, n)?;
    let mut acc = CompensatedComplex::new();
    let mut partials = Vec::with_capacity(n + 1);
    partials.push(Complex64::new(0.0, 0.0));
    for &s in &arrivals[..n] {
        acc.add(f.eval(s));
        partials.push(acc.value());
    }
    Ok(SeriesEvaluation {
        method: Method::Direct,
        final_value: *partials.last().unwrap(),
        partials,
        abel: None,
    })
}

/// Abel (summation-by-parts) evaluation of sum e^{iS_n}/S_n:
///
///   sum_{n=1}^N zeta_n / S_n = R_N Z_N + sum_{n=1}^{N-1} D_n Z_n,
///
/// with R_n = 1/S_n, D_n = R_n - R_{n+1} and Z_n the trigonometric prefix
/// sums. The sinc and cos kinds are the imaginary and real projections of the
/// same decomposition; other kinds have no such structure and are rejected.
pub fn abel_evaluate(arrivals: &[f64], n: usize, f: &SeriesFunction) -> Result<SeriesEvaluation> {
    let project: fn(Complex64) -> Complex64 = match f {
        SeriesFunction::CisOverX => |z| z,
        SeriesFunction::Sinc => |z| Complex64::new(z.im, 0.0),
        SeriesFunction::CosOverX => |z| Complex64::new(z.re, 0.0),
        other => {
            return Err(Error::Unsupported(format!(
                "Abel decomposition applies to e^(ix)/x and its projections, not {other:?}"
            )))
        }
    };
    if n < 1 {
        return Err(Error::InvalidParameter("Abel evaluation needs n >= 1".into()));
    }
    check_arrivals(&SeriesFunction::CisOverX, arrivals, n)?;

    let mut zsum = CompensatedComplex::new(); // Z_n
    let mut series = CompensatedComplex::new(); // sum D_n Z_n
    let mut direct = CompensatedComplex::new(); // running direct sum, for partials
    let mut partials = Vec::with_capacity(n + 1);
    partials.push(Complex64::new(0.0, 0.0));
    for k in 0..n {
        let s = arrivals[k];
        let (sin, cos) = s.sin_cos();
        let zeta = Complex64::new(cos, sin);
        zsum.add(zeta);
        direct.add(zeta / s);
        partials.push(project(direct.value()));
        if k + 1 < n {
            let d = 1.0 / s - 1.0 / arrivals[k + 1];
            series.add(zsum.value() * d);
        }
    }
    let boundary = zsum.value() / arrivals[n - 1];
    let series_part = series.value();
    Ok(SeriesEvaluation {
        method: Method::Abel,
        final_value: project(boundary + series_part),
        partials,
        abel: Some(AbelComponents {
            boundary: project(boundary),
            series_part: project(series_part),
        }),
    })
}

/// Partial sums along a uniformly random permutation of the first n indices.
pub fn permuted_sum(
    f: &SeriesFunction,
    arrivals: &[f64],
    n: usize,
    perm_seed: u64,
) -> Result<SeriesEvaluation> {
    check_arrivals(f, arrivals, n)?;
    let mut order: Vec<u32> = (0..n as u32).collect();
    let mut rng = StreamKey::new(perm_seed, 0x9e43, 0).rng();
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut acc = CompensatedComplex::new();
    let mut partials = Vec::with_capacity(n + 1);
    partials.push(Complex64::new(0.0, 0.0));
    for &idx in &order {
        acc.add(f.eval(arrivals[idx as usize]));
        partials.push(acc.value());
    }
    Ok(SeriesEvaluation {
        method: Method::Permuted { seed: perm_seed },
        final_value: *partials.last().unwrap(),
        partials,
        abel: None,
    })
}

/// Block-partitioned evaluation over intervals [e_{k-1}, e_k) with e_0 = 0.
#[derive(Debug, Clone)]
pub struct BlockEvaluation {
    /// Right endpoints e_1 < ... < e_K.
    pub endpoints: Vec<f64>,
    /// X_k = sum of f(S_n) over arrivals in block k, in arrival order.
    pub block_values: Vec<Complex64>,
    /// Running sums over blocks; running[k] = X_1 + ... + X_{k+1}.
    pub running: Vec<Complex64>,
    /// Arrival count per block.
    pub block_counts: Vec<usize>,
}

impl BlockEvaluation {
    pub fn final_value(&self) -> Complex64 {
        self.running.last().copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Trace CSV (method, n_or_k, partial_real, partial_imag) over blocks.
    pub fn write_trace_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "method,n_or_k,partial_real,partial_imag")?;
        for (k, p) in self.running.iter().enumerate() {
            writeln!(w, "blocked,{},{},{}", k + 1, p.re, p.im)?;
        }
        Ok(())
    }
}

/// Evaluate the series block by block. The running sums accumulate the same
/// terms in the same order as the direct evaluation, so at each block
/// boundary they agree exactly with the direct partial sum over the arrivals
/// seen so far.
pub fn block_sum(
    f: &SeriesFunction,
    arrivals: &[f64],
    endpoints: &[f64],
) -> Result<BlockEvaluation> {
    if endpoints.is_empty() {
        return Err(Error::InvalidParameter("need at least one block endpoint".into()));
    }
    if endpoints[0] <= 0.0 || endpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "block endpoints must be positive and strictly increasing".into(),
        ));
    }
    let last_end = *endpoints.last().unwrap();
    match arrivals.last() {
        Some(&s) if s >= last_end => {}
        _ => return Err(Error::NotRealized { needed: 0, realized: arrivals.len() }),
    }
    let covered = arrivals.partition_point(|&s| s < last_end);
    check_arrivals(f, arrivals, covered)?;

    let mut acc = CompensatedComplex::new();
    let mut block_values = Vec::with_capacity(endpoints.len());
    let mut running = Vec::with_capacity(endpoints.len());
    let mut block_counts = Vec::with_capacity(endpoints.len());
    let mut idx = 0usize;
    let mut prev_total = Complex64::new(0.0, 0.0);
    for &end in endpoints {
        let mut count = 0usize;
        while idx < covered && arrivals[idx] < end {
            acc.add(f.eval(arrivals[idx]));
            idx += 1;
            count += 1;
        }
        let total = acc.value();
        block_values.push(total - prev_total);
        running.push(total);
        block_counts.push(count);
        prev_total = total;
    }
    Ok(BlockEvaluation { endpoints: endpoints.to_vec(), block_values, running, block_counts })
}

/// Half-period partition endpoints (pi, 2 pi, ..., k pi).
pub fn half_period_partition(blocks: usize) -> Vec<f64> {
    (1..=blocks).map(|k| k as f64 * std::f64::consts::PI).collect()
}

/// Per-block integrals lambda f_k = int over [e_{k-1}, e_k) of f, by
/// adaptive quadrature.
pub fn block_integrals(f: &SeriesFunction, endpoints: &[f64]) -> Result<Vec<Complex64>> {
    let mut lo = 0.0;
    let mut out = Vec::with_capacity(endpoints.len());
    for &hi in endpoints {
        let q = quad::adaptive_complex(&|x| f.eval(x), lo, hi, 1e-12)?;
        out.push(q.value);
        lo = hi;
    }
    Ok(out)
}

/// Oscillation of the partial sums inside index windows, with a fitted decay
/// exponent.
#[derive(Debug, Clone)]
pub struct TailDiagnostics {
    /// (window lo, window hi, oscillation).
    pub rows: Vec<(usize, usize, f64)>,
    /// Positive exponent beta when oscillation shrinks like n^{-beta};
    /// infinite when the oscillation vanishes exactly.
    pub decay_exponent: f64,
    pub exponent_se: f64,
}

impl TailDiagnostics {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "window_lo,window_hi,oscillation")?;
        for (lo, hi, osc) in &self.rows {
            writeln!(w, "{lo},{hi},{osc}")?;
        }
        Ok(())
    }
}

/// Per-window oscillation (bounding-box diagonal of the partial sums, which
/// is max minus min for real series) and the fitted log-log decay exponent
/// against the window start.
pub fn tail_diagnostics(
    eval: &SeriesEvaluation,
    windows: &[(usize, usize)],
) -> Result<TailDiagnostics> {
    if windows.len() < 2 {
        return Err(Error::InvalidParameter("need at least 2 windows of prefix data".into()));
    }
    let mut rows = Vec::with_capacity(windows.len());
    for &(lo, hi) in windows {
        if lo >= hi || hi >= eval.partials.len() {
            return Err(Error::InvalidParameter(format!(
                "window [{lo}, {hi}] outside the evaluated prefix"
            )));
        }
        let slice = &eval.partials[lo..=hi];
        let mut re_min = f64::INFINITY;
        let mut re_max = f64::NEG_INFINITY;
        let mut im_min = f64::INFINITY;
        let mut im_max = f64::NEG_INFINITY;
        for p in slice {
            re_min = re_min.min(p.re);
            re_max = re_max.max(p.re);
            im_min = im_min.min(p.im);
            im_max = im_max.max(p.im);
        }
        rows.push((lo, hi, (re_max - re_min).hypot(im_max - im_min)));
    }
    let fit: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(_, _, osc)| *osc > 0.0)
        .map(|(lo, _, osc)| ((*lo as f64).ln(), osc.ln()))
        .collect();
    let (decay_exponent, exponent_se) = if fit.len() >= 2 {
        let xs: Vec<f64> = fit.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = fit.iter().map(|p| p.1).collect();
        let (slope, _, se) = util::ols_fit(&xs, &ys);
        (-slope, se)
    } else {
        // oscillation vanished: the series terminated inside the windows
        (f64::INFINITY, 0.0)
    };
    Ok(TailDiagnostics { rows, decay_exponent, exponent_se })
}
