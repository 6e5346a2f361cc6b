//! Renewal arrival streams S_n = X_1 + ... + X_n, generated lazily and
//! reproducibly. Poisson arrivals are the exponential special case.

use std::io::Write;

use rand_chacha::ChaCha8Rng;

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::util::CompensatedSum;

/// A realized prefix of a renewal arrival sequence.
///
/// Extension continues the stream's own generator, so `extend(extend(s, m), n)`
/// and `extend(s, n)` realize identical prefixes. Arrivals are accumulated
/// with compensated summation; prefixes do not drift even at 1e8 terms.
#[derive(Debug, Clone)]
pub struct ArrivalStream {
    spec: DistributionSpec,
    key: StreamKey,
    rng: ChaCha8Rng,
    increments: Vec<f64>,
    arrivals: Vec<f64>,
    acc: CompensatedSum,
}

impl ArrivalStream {
    pub fn new(spec: DistributionSpec, key: StreamKey) -> Self {
        Self {
            spec,
            key,
            rng: key.rng(),
            increments: Vec::new(),
            arrivals: Vec::new(),
            acc: CompensatedSum::new(),
        }
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    /// Number of realized arrivals.
    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    pub fn arrivals(&self) -> &[f64] {
        &self.arrivals
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Realize arrivals up to index `up_to` (1-based count). Earlier entries
    /// are never touched.
    pub fn extend(&mut self, up_to: usize) {
        if up_to <= self.arrivals.len() {
            return;
        }
        let need = up_to - self.arrivals.len();
        let xs = self.spec.sample(need, &mut self.rng);
        self.increments.reserve(need);
        self.arrivals.reserve(need);
        for x in xs {
            self.acc.add(x);
            self.increments.push(x);
            self.arrivals.push(self.acc.value());
        }
    }

    /// Extend until the last arrival exceeds `t`; returns the count of
    /// arrivals at or below `t`.
    pub fn extend_past(&mut self, t: f64) -> usize {
        let chunk = 64.max(self.arrivals.len() / 4);
        while self.arrivals.last().map_or(true, |&s| s <= t) {
            let target = self.arrivals.len() + chunk;
            self.extend(target);
        }
        self.arrivals.partition_point(|&s| s <= t)
    }

    /// Reciprocals R_n = 1/S_n for n <= count and their differences
    /// D_n = R_n - R_{n+1} for n < count.
    ///
    /// Differences are evaluated in the cancellation-free product form
    /// X_{n+1} R_n R_{n+1}, which equals R_n - R_{n+1} exactly in real
    /// arithmetic and keeps the stated 1e-12 relative accuracy where the
    /// naive subtraction would lose digits.
    pub fn reciprocals(&self, count: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if count > self.arrivals.len() {
            return Err(Error::NotRealized { needed: count, realized: self.arrivals.len() });
        }
        if self.arrivals[..count].iter().any(|&s| s <= 0.0) {
            return Err(Error::Domain("arrival at or below 0 has no reciprocal".into()));
        }
        let recip: Vec<f64> = self.arrivals[..count].iter().map(|&s| 1.0 / s).collect();
        let diffs: Vec<f64> = (0..count.saturating_sub(1))
            .map(|n| self.increments[n + 1] * recip[n] * recip[n + 1])
            .collect();
        #[cfg(debug_assertions)]
        for (n, &d) in diffs.iter().enumerate() {
            // D_n <= X_{n+1} R_n^2
            debug_assert!(
                d <= self.increments[n + 1] * recip[n] * recip[n] * (1.0 + 1e-12) + 1e-300,
                "difference bound violated at n={n}"
            );
        }
        Ok((recip, diffs))
    }

    /// Debug CSV of the realized prefix, columns (n, S_n).
    pub fn write_prefix_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "n,S_n")?;
        for (i, s) in self.arrivals.iter().enumerate() {
            writeln!(w, "{},{}", i + 1, s)?;
        }
        Ok(())
    }
}

/// Monte Carlo estimate of n^p * E[R_n^p] on a grid of n values.
///
/// Small indices can have infinite moments, so indices below
/// `floor_for_moment(p)` are rejected rather than averaged.
pub fn reciprocal_moment_scaled(
    spec: &DistributionSpec,
    p: f64,
    ns: &[usize],
    replicates: usize,
    key: StreamKey,
) -> Result<Vec<(usize, f64)>> {
    let floor = floor_for_moment(p);
    if let Some(&bad) = ns.iter().find(|&&n| n < floor) {
        return Err(Error::InvalidParameter(format!(
            "n = {bad} is below the moment floor {floor} for p = {p}"
        )));
    }
    let max_n = *ns.iter().max().ok_or_else(|| {
        Error::InvalidParameter("empty grid of n values".into())
    })?;
    let sums = crate::exec::map_replicates(replicates, |rep| {
        let mut stream = ArrivalStream::new(*spec, key.with_replicate(rep as u64));
        stream.extend(max_n);
        ns.iter()
            .map(|&n| stream.arrivals()[n - 1].powf(-p))
            .collect::<Vec<f64>>()
    });
    let mut out = Vec::with_capacity(ns.len());
    for (j, &n) in ns.iter().enumerate() {
        let mut acc = CompensatedSum::new();
        for row in &sums {
            acc.add(row[j]);
        }
        let mean = acc.value() / replicates as f64;
        out.push((n, (n as f64).powf(p) * mean));
    }
    Ok(out)
}

/// Smallest index whose p-th reciprocal moment is averaged (margin over the
/// n > 2p requirement).
pub fn floor_for_moment(p: f64) -> usize {
    (4.0 * p).ceil() as usize + 1
}

impl StreamKey {
    /// Same key with the replicate field replaced.
    pub fn with_replicate(&self, replicate: u64) -> Self {
        StreamKey { replicate, ..*self }
    }
}
