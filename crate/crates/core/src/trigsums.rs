//! Complex exponential sums Z_n = sum_{k<=n} e^{iS_k}, their Doob
//! decomposition and Monte Carlo estimation of the L^p norm growth.
//!
//! With z = E e^{iX} the conditional expectation of an increment is
//! E[e^{iS_n} | F_{n-1}] = z e^{iS_{n-1}}, which gives the pathwise recursion
//! Z_n = M_n + z Z_{n-1} and, by iteration, the convolution
//! Z_N = sum_{k=0}^N z^{N-k} M_k. Both identities hold exactly for
//! M_n := Z_n - z Z_{n-1} (martingale for n >= 1, E M_1 = z) and are verified
//! to float tolerance in tests.

use std::io::Write;

use num_complex::Complex64;

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::exec;
use crate::pointprocess::ArrivalStream;
use crate::rng::StreamKey;
use crate::util::{self, CompensatedComplex, CompensatedSum};

/// One realized path of trigonometric prefix sums with its Doob pieces,
/// indexed 0..=n (index 0 holds the zero initial values).
#[derive(Debug, Clone)]
pub struct TrigSumPath {
    pub z: Complex64,
    /// Z_0..Z_n.
    pub sums: Vec<Complex64>,
    /// M_0..M_n with M_n = Z_n - z Z_{n-1}.
    pub martingale: Vec<Complex64>,
    /// A_0..A_n with A_n = z Z_{n-1} (predictable part).
    pub compensator: Vec<Complex64>,
}

impl TrigSumPath {
    /// Reconstruct Z_N as sum_k z^{N-k} M_k (Horner form); used by tests and
    /// diagnostics to exercise the convolution identity.
    pub fn convolution_reconstruct(&self) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &m in &self.martingale {
            acc = acc * self.z + m;
        }
        acc
    }
}

/// Build the path for the first `n` arrivals. Requires |z| < 1.
pub fn build_trig_path(arrivals: &ArrivalStream, n: usize, z: Complex64) -> Result<TrigSumPath> {
    if 1.0 - z.norm() < 1e-9 {
        return Err(Error::Degenerate(format!("|z| = {} is too close to 1", z.norm())));
    }
    if arrivals.len() < n {
        return Err(Error::NotRealized { needed: n, realized: arrivals.len() });
    }
    let mut sums = Vec::with_capacity(n + 1);
    let mut martingale = Vec::with_capacity(n + 1);
    let mut compensator = Vec::with_capacity(n + 1);
    let zero = Complex64::new(0.0, 0.0);
    sums.push(zero);
    martingale.push(zero);
    compensator.push(zero);
    let mut acc = CompensatedComplex::new();
    let mut prev = zero;
    for &s in &arrivals.arrivals()[..n] {
        let (sin, cos) = s.sin_cos();
        acc.add(Complex64::new(cos, sin));
        let cur = acc.value();
        sums.push(cur);
        martingale.push(cur - z * prev);
        compensator.push(z * prev);
        prev = cur;
    }
    Ok(TrigSumPath { z, sums, martingale, compensator })
}

/// E Z_n = z (1 - z^n) / (1 - z), with E Z_0 = 0.
pub fn mean_of_z(n: usize, z: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    z * (one - z.powu(n as u32)) / (one - z)
}

#[derive(Debug, Clone, Copy)]
pub struct NormGrowthEntry {
    pub n: usize,
    pub norm_est: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Estimated growth of ||Z_n||_p over a grid of n values.
#[derive(Debug, Clone)]
pub struct NormGrowthReport {
    pub p: f64,
    pub entries: Vec<NormGrowthEntry>,
    /// OLS slope of log ||Z_n||_p against log n.
    pub slope: f64,
    pub slope_se: f64,
    /// c_z reference from the increment law.
    pub cz_ref: f64,
    /// Set when the replicate count is too small for tight intervals.
    pub wide_ci: bool,
}

impl NormGrowthReport {
    /// CSV rows (p, n, norm_est, ci_lo, ci_hi) with a slope footer record.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "p,n,norm_est,ci_lo,ci_hi")?;
        for e in &self.entries {
            writeln!(w, "{},{},{},{},{}", self.p, e.n, e.norm_est, e.ci_lo, e.ci_hi)?;
        }
        writeln!(
            w,
            "# slope,{},{},{},{}",
            self.p, self.slope, self.slope_se, self.cz_ref
        )
    }
}

const BOOTSTRAP_RESAMPLES: usize = 2000;

/// Monte Carlo estimate of ||Z_n||_p on `n_grid` with percentile-bootstrap
/// confidence intervals and a log-log slope fit.
///
/// Replicates use independent streams of `key` and reduce in replicate order,
/// so results do not depend on the worker count.
pub fn estimate_norm_growth(
    spec: &DistributionSpec,
    p: f64,
    n_grid: &[usize],
    replicates: usize,
    key: StreamKey,
) -> Result<NormGrowthReport> {
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("p must be positive, got {p}")));
    }
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("n grid must be strictly increasing".into()));
    }
    if replicates < 2 {
        return Err(Error::InvalidParameter("need at least 2 replicates".into()));
    }
    let z = spec.char_value()?;
    if 1.0 - z.norm() < 1e-9 {
        return Err(Error::Degenerate("norm growth needs a nondegenerate law".into()));
    }
    let cz_ref = spec.cz_constant()?;
    let max_n = *n_grid.last().unwrap();

    // |Z_n|^p per replicate at each grid point
    let rows: Vec<Vec<f64>> = exec::map_replicates(replicates, |rep| {
        let mut stream = ArrivalStream::new(*spec, key.with_replicate(rep as u64));
        stream.extend(max_n);
        let mut acc = CompensatedComplex::new();
        let mut out = Vec::with_capacity(n_grid.len());
        let mut next = 0usize;
        for (i, &s) in stream.arrivals()[..max_n].iter().enumerate() {
            let (sin, cos) = s.sin_cos();
            acc.add(Complex64::new(cos, sin));
            if next < n_grid.len() && i + 1 == n_grid[next] {
                out.push(acc.value().norm().powf(p));
                next += 1;
            }
        }
        out
    });

    // bootstrap each grid point on its own child stream
    let entries: Vec<NormGrowthEntry> = exec::map_replicates(n_grid.len(), |j| {
        let values: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let mut acc = CompensatedSum::new();
        for &v in &values {
            acc.add(v);
        }
        let mean_p = acc.value() / replicates as f64;
        let mut boot_rng = key.child(0x6007 + j as u64).rng();
        let (lo, hi) = util::bootstrap_ci_mean(&values, BOOTSTRAP_RESAMPLES, 0.95, &mut boot_rng);
        NormGrowthEntry {
            n: n_grid[j],
            norm_est: mean_p.powf(1.0 / p),
            ci_lo: lo.max(0.0).powf(1.0 / p),
            ci_hi: hi.powf(1.0 / p),
        }
    });

    let xs: Vec<f64> = entries.iter().map(|e| (e.n as f64).ln()).collect();
    let ys: Vec<f64> = entries.iter().map(|e| e.norm_est.ln()).collect();
    let (slope, _, slope_se) = util::ols_fit(&xs, &ys);

    Ok(NormGrowthReport { p, entries, slope, slope_se, cz_ref, wide_ci: replicates < 1000 })
}
