//! Increment distributions for renewal arrivals and marker densities for
//! LePage series.
//!
//! Every law lives on [0, inf). `char_value` evaluates z = E e^{iX} in closed
//! form where one exists and by oscillatory quadrature otherwise; a
//! nondegenerate law has |z| < 1, which downstream trigonometric-sum code
//! relies on.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::Distribution as RandDistribution;

use crate::error::{Error, Result};
use crate::quad::{self, Acceleration, Exhaustion, ImproperScheme};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Increment law family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Exponential { rate: f64 },
    Pareto { index: f64, scale: f64 },
    Gamma { shape: f64, rate: f64 },
    Deterministic { value: f64 },
    UniformInterval { lo: f64, hi: f64 },
}

/// A validated increment distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionSpec {
    family: Family,
}

impl DistributionSpec {
    pub fn new(family: Family) -> Result<Self> {
        match family {
            Family::Exponential { rate } => {
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "exponential rate must be positive, got {rate}"
                    )));
                }
            }
            Family::Pareto { index, scale } => {
                if !(index > 1.0 && index.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "pareto index must exceed 1, got {index}"
                    )));
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "pareto scale must be positive, got {scale}"
                    )));
                }
            }
            Family::Gamma { shape, rate } => {
                if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "gamma shape/rate must be positive, got ({shape}, {rate})"
                    )));
                }
            }
            Family::Deterministic { value } => {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "deterministic value must be positive, got {value}"
                    )));
                }
            }
            Family::UniformInterval { lo, hi } => {
                if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "uniform interval needs 0 <= lo < hi, got [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(Self { family })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(Family::Exponential { rate })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Deterministic laws are the only degenerate family here (|z| = 1).
    pub fn is_nondegenerate(&self) -> bool {
        !matches!(self.family, Family::Deterministic { .. })
    }

    pub fn mean(&self) -> f64 {
        match self.family {
            Family::Exponential { rate } => 1.0 / rate,
            Family::Pareto { index, scale } => index * scale / (index - 1.0),
            Family::Gamma { shape, rate } => shape / rate,
            Family::Deterministic { value } => value,
            Family::UniformInterval { lo, hi } => 0.5 * (lo + hi),
        }
    }

    /// Variance; infinite for Pareto with index <= 2.
    pub fn variance(&self) -> f64 {
        match self.family {
            Family::Exponential { rate } => 1.0 / (rate * rate),
            Family::Pareto { index, scale } => {
                if index > 2.0 {
                    scale * scale * index / ((index - 1.0).powi(2) * (index - 2.0))
                } else {
                    f64::INFINITY
                }
            }
            Family::Gamma { shape, rate } => shape / (rate * rate),
            Family::Deterministic { .. } => 0.0,
            Family::UniformInterval { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
        }
    }

    /// z = E e^{iX}: closed forms for exponential, gamma, deterministic and
    /// uniform laws; oscillatory quadrature (1e-10 absolute) for Pareto.
    pub fn char_value(&self) -> Result<Complex64> {
        match self.family {
            Family::Exponential { rate } => Ok(Complex64::new(rate, 0.0) / Complex64::new(rate, -1.0)),
            Family::Gamma { shape, rate } => {
                Ok((Complex64::new(rate, 0.0) / Complex64::new(rate, -1.0)).powf(shape))
            }
            Family::Deterministic { value } => Ok((I * value).exp()),
            Family::UniformInterval { lo, hi } => {
                Ok(((I * hi).exp() - (I * lo).exp()) / (I * (hi - lo)))
            }
            Family::Pareto { index, scale } => {
                let density = move |x: f64| index * scale.powf(index) * x.powf(-index - 1.0);
                let scheme = ImproperScheme {
                    exhaustion: Exhaustion::HalfPeriods { period: std::f64::consts::PI },
                    acceleration: Acceleration::Euler,
                    tol: 1e-11,
                    max_windows: 400,
                    window_tol: 1e-13,
                };
                let rep = quad::improper_complex(&|x| (I * x).exp() * density(x), scale, &scheme)?;
                match rep.value {
                    Some(v) => Ok(v),
                    None => Err(Error::Tolerance { achieved: rep.achieved_tol, requested: 1e-10 }),
                }
            }
        }
    }

    /// c_z = 1 + 2 Re(z / (1 - z)), strictly positive for nondegenerate laws;
    /// algebraically equal to (1 - |z|^2)/|1 - z|^2.
    pub fn cz_constant(&self) -> Result<f64> {
        let z = self.char_value()?;
        if 1.0 - z.norm() < 1e-9 {
            return Err(Error::Degenerate(format!(
                "|E e^(iX)| = {} is too close to 1",
                z.norm()
            )));
        }
        Ok(1.0 + 2.0 * (z / (Complex64::new(1.0, 0.0) - z)).re)
    }

    /// n i.i.d. draws; deterministic given the stream state.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        match self.family {
            Family::Exponential { rate } => {
                let d = rand_distr::Exp::new(rate).expect("validated rate");
                out.extend((0..n).map(|_| d.sample(rng)));
            }
            Family::Pareto { index, scale } => {
                for _ in 0..n {
                    let u: f64 = rng.random();
                    out.push(scale * (1.0 - u).powf(-1.0 / index));
                }
            }
            Family::Gamma { shape, rate } => {
                let d = rand_distr::Gamma::new(shape, 1.0 / rate).expect("validated params");
                out.extend((0..n).map(|_| d.sample(rng)));
            }
            Family::Deterministic { value } => out.resize(n, value),
            Family::UniformInterval { lo, hi } => {
                for _ in 0..n {
                    let u: f64 = rng.random();
                    out.push(lo + (hi - lo) * u);
                }
            }
        }
        out
    }

    /// Parse `family(param=value, ...)` strings, e.g. `exponential(rate=1)`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, params) = parse_callform(text)?;
        let get = |key: &str| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::InvalidParameter(format!("{name}: missing `{key}`")))
        };
        let family = match name.as_str() {
            "exponential" | "exp" => Family::Exponential { rate: get("rate")? },
            "pareto" => Family::Pareto { index: get("index")?, scale: get("scale")? },
            "gamma" => Family::Gamma { shape: get("shape")?, rate: get("rate")? },
            "deterministic" => Family::Deterministic { value: get("value")? },
            "uniform" => Family::UniformInterval { lo: get("lo")?, hi: get("hi")? },
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown distribution family `{other}`"
                )))
            }
        };
        Self::new(family)
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Exponential { rate } => write!(f, "exponential(rate={rate})"),
            Family::Pareto { index, scale } => write!(f, "pareto(index={index},scale={scale})"),
            Family::Gamma { shape, rate } => write!(f, "gamma(shape={shape},rate={rate})"),
            Family::Deterministic { value } => write!(f, "deterministic(value={value})"),
            Family::UniformInterval { lo, hi } => write!(f, "uniform(lo={lo},hi={hi})"),
        }
    }
}

/// Shared `name(k=v, ...)` parser for distribution, marker and model strings.
pub(crate) fn parse_callform(text: &str) -> Result<(String, Vec<(String, f64)>)> {
    let text = text.trim();
    let (name, args) = match text.find('(') {
        Some(open) => {
            if !text.ends_with(')') {
                return Err(Error::InvalidParameter(format!("unbalanced parens in `{text}`")));
            }
            (&text[..open], &text[open + 1..text.len() - 1])
        }
        None => (text, ""),
    };
    let mut params = Vec::new();
    for part in args.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("expected k=v, got `{part}`")))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad number `{}`", v.trim())))?;
        params.push((k.trim().to_ascii_lowercase(), value));
    }
    Ok((name.to_ascii_lowercase(), params))
}

// ---------------------------------------------------------------------------
// Marker densities
// ---------------------------------------------------------------------------

/// Auxiliary density for the marks V_n of a LePage series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarkerFamily {
    /// p(v) proportional to v^{-r} on [x0, inf).
    ParetoTail { r: f64, x0: f64 },
    /// p(v) = e^{-v} on [0, inf).
    ExponentialUnit,
    /// p(v) = 1 on [0, 1]; has no decreasing branch.
    UniformUnit,
}

/// A marker density with sampler and (where it exists) the inverse of its
/// decreasing branch.
///
/// `unnormalized` switches the Pareto evaluation to plain v^{-r} (and its
/// inverse to y^{-1/r}), which differs from the probability density by the
/// constant (r-1) x0^{r-1}. Sampling always uses the normalized density; the
/// unnormalized form exists so cutoffs a(s) = q(1/s) come out as s^{1/r}
/// exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkerDensity {
    family: MarkerFamily,
    unnormalized: bool,
}

impl MarkerDensity {
    pub fn new(family: MarkerFamily) -> Result<Self> {
        if let MarkerFamily::ParetoTail { r, x0 } = family {
            if !(r > 1.0 && r.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "pareto marker needs r > 1, got {r}"
                )));
            }
            if !(x0 > 0.0 && x0.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "pareto marker needs x0 > 0, got {x0}"
                )));
            }
        }
        Ok(Self { family, unnormalized: false })
    }

    /// Switch the Pareto family to its unnormalized v^{-r} evaluation mode.
    pub fn unnormalized(mut self) -> Result<Self> {
        match self.family {
            MarkerFamily::ParetoTail { .. } => {
                self.unnormalized = true;
                Ok(self)
            }
            _ => Err(Error::Unsupported(
                "unnormalized mode only applies to the Pareto marker".into(),
            )),
        }
    }

    pub fn family(&self) -> MarkerFamily {
        self.family
    }

    pub fn is_unnormalized(&self) -> bool {
        self.unnormalized
    }

    pub fn support_start(&self) -> f64 {
        match self.family {
            MarkerFamily::ParetoTail { x0, .. } => x0,
            _ => 0.0,
        }
    }

    pub fn support_end(&self) -> f64 {
        match self.family {
            MarkerFamily::UniformUnit => 1.0,
            _ => f64::INFINITY,
        }
    }

    /// Whether p is strictly decreasing on its support (required by the
    /// closed-form cutoff reduction).
    pub fn is_strictly_decreasing(&self) -> bool {
        !matches!(self.family, MarkerFamily::UniformUnit)
    }

    /// Density evaluation; zero off the support.
    pub fn density(&self, v: f64) -> f64 {
        match self.family {
            MarkerFamily::ParetoTail { r, x0 } => {
                if v < x0 {
                    0.0
                } else if self.unnormalized {
                    v.powf(-r)
                } else {
                    (r - 1.0) * x0.powf(r - 1.0) * v.powf(-r)
                }
            }
            MarkerFamily::ExponentialUnit => {
                if v < 0.0 {
                    0.0
                } else {
                    (-v).exp()
                }
            }
            MarkerFamily::UniformUnit => {
                if (0.0..=1.0).contains(&v) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// q = p^{-1} on the decreasing branch: q(p(x)) = x for x in the tail.
    pub fn decreasing_inverse(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::Domain(format!("inverse needs y > 0, got {y}")));
        }
        match self.family {
            MarkerFamily::ParetoTail { r, x0 } => {
                let c = if self.unnormalized { 1.0 } else { (r - 1.0) * x0.powf(r - 1.0) };
                Ok((c / y).powf(1.0 / r))
            }
            MarkerFamily::ExponentialUnit => Ok(-y.ln()),
            MarkerFamily::UniformUnit => Err(Error::Unsupported(
                "uniform marker density has no decreasing branch".into(),
            )),
        }
    }

    /// Cutoff a(s) = q(1/s), clamped to the support start for normalized
    /// densities. In unnormalized Pareto mode the clamp is skipped so that
    /// a(s) = s^{1/r} exactly.
    pub fn lower_cutoff(&self, s: f64) -> Result<f64> {
        let a = self.decreasing_inverse(1.0 / s)?;
        if self.unnormalized {
            Ok(a)
        } else {
            Ok(a.max(self.support_start()))
        }
    }

    /// n i.i.d. draws by inverse CDF.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random();
            out.push(match self.family {
                MarkerFamily::ParetoTail { r, x0 } => x0 * (1.0 - u).powf(-1.0 / (r - 1.0)),
                MarkerFamily::ExponentialUnit => -(1.0 - u).ln(),
                MarkerFamily::UniformUnit => u,
            });
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (name, params) = parse_callform(text)?;
        let get = |key: &str, default: Option<f64>| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .or(default)
                .ok_or_else(|| Error::InvalidParameter(format!("{name}: missing `{key}`")))
        };
        let marker = match name.as_str() {
            "paretotail" => MarkerDensity::new(MarkerFamily::ParetoTail {
                r: get("r", None)?,
                x0: get("x0", Some(1.0))?,
            })?,
            "exponentialunit" => MarkerDensity::new(MarkerFamily::ExponentialUnit)?,
            "uniformunit" => MarkerDensity::new(MarkerFamily::UniformUnit)?,
            other => {
                return Err(Error::InvalidParameter(format!("unknown marker family `{other}`")))
            }
        };
        if params.iter().any(|(k, v)| k == "unnormalized" && *v != 0.0) {
            marker.unnormalized()
        } else {
            Ok(marker)
        }
    }
}

impl fmt::Display for MarkerDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            MarkerFamily::ParetoTail { r, x0 } => {
                write!(f, "paretotail(r={r},x0={x0}")?;
                if self.unnormalized {
                    write!(f, ",unnormalized=1")?;
                }
                write!(f, ")")
            }
            MarkerFamily::ExponentialUnit => write!(f, "exponentialunit"),
            MarkerFamily::UniformUnit => write!(f, "uniformunit"),
        }
    }
}
