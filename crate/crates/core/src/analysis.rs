//! Verification statistics: empirical summaries, Kolmogorov–Smirnov
//! distances, CLT intervals, log-log rate fits, and the constant
//! `beta = -zeta(1/2) / sqrt(2 pi)`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{ensure, invalid, Result};

/// Quantile levels reported by [`EmpiricalSummary`].
pub const QUANTILE_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.50, 0.75, 0.95, 0.99];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSummary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub q01: f64,
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
    pub q99: f64,
    /// KS distance to the reference law of this component, when one exists.
    pub ks: Option<f64>,
    /// Fitted log-log slope, for rate experiments.
    pub slope: Option<f64>,
    #[serde(skip)]
    sorted: Vec<f64>,
}

impl EmpiricalSummary {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        ensure(!samples.is_empty(), || "cannot summarize an empty sample".into())?;
        let sorted = sorted_copy(samples)?;
        let count = sorted.len();
        let mean = sorted.iter().sum::<f64>() / count as f64;
        let variance = if count > 1 {
            sorted.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (count - 1) as f64
        } else {
            0.0
        };
        let q = |p| quantile_sorted(&sorted, p);
        Ok(Self {
            count,
            mean,
            variance,
            q01: q(0.01),
            q05: q(0.05),
            q25: q(0.25),
            q50: q(0.50),
            q75: q(0.75),
            q95: q(0.95),
            q99: q(0.99),
            ks: None,
            slope: None,
            sorted,
        })
    }

    pub fn with_ks(mut self, ks: f64) -> Self {
        self.ks = Some(ks);
        self
    }

    pub fn with_slope(mut self, slope: f64) -> Self {
        self.slope = Some(slope);
        self
    }

    pub fn quantiles(&self) -> [f64; 7] {
        [self.q01, self.q05, self.q25, self.q50, self.q75, self.q95, self.q99]
    }

    /// The sorted sample, empty for summaries read back from JSON.
    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }
}

fn sorted_copy(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.iter().any(|x| x.is_nan()) {
        return Err(invalid("sample contains NaN"));
    }
    let mut v = samples.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    Ok(v)
}

/// Linear-interpolation quantile (Hyndman–Fan type 7) of a sorted slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(samples: &[f64]) -> Result<f64> {
    ensure(!samples.is_empty(), || "median of empty sample".into())?;
    Ok(quantile_sorted(&sorted_copy(samples)?, 0.5))
}

/// Two-sample KS statistic `sup |F_a - F_b|`, swept exactly over the merged
/// order statistics (ties advance both samples together).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    ensure(!a.is_empty() && !b.is_empty(), || {
        "KS two-sample test needs two nonempty samples".into()
    })?;
    let a = sorted_copy(a)?;
    let b = sorted_copy(b)?;
    Ok(ks_two_sample_sorted(&a, &b))
}

pub fn ks_two_sample_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// One-sample KS statistic against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    ensure(!samples.is_empty(), || "KS test needs a nonempty sample".into())?;
    let sorted = sorted_copy(samples)?;
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max))
}

/// One-sample KS statistic against U(0, 1).
pub fn ks_vs_uniform(samples: &[f64]) -> Result<f64> {
    if let Some(x) = samples.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(invalid(format!("value {x} outside [0, 1]")));
    }
    ks_one_sample(samples, |x| x)
}

/// Asymptotic 95% critical value of the one-sample KS statistic.
pub fn ks_critical_one_sample(n: usize) -> f64 {
    1.358 / (n as f64).sqrt()
}

/// Asymptotic 95% critical value of the two-sample KS statistic.
pub fn ks_critical_two_sample(n1: usize, n2: usize) -> f64 {
    let (n1, n2) = (n1 as f64, n2 as f64);
    1.358 * ((n1 + n2) / (n1 * n2)).sqrt()
}

/// CLT interval `mean ± z sd / sqrt(N)` with `z = Phi^{-1}((1 + level)/2)`.
pub fn mean_ci(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    ensure(samples.len() >= 2, || {
        format!("mean_ci needs at least 2 samples, got {}", samples.len())
    })?;
    ensure(level > 0.0 && level < 1.0, || format!("level must be in (0,1), got {level}"))?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let z = standard_normal().inverse_cdf(0.5 + level / 2.0);
    Ok((mean, z * var.sqrt() / n.sqrt()))
}

/// Least-squares slope of `ln(median)` against `ln(n)`.
pub fn median_rate_slope(points: &[(f64, f64)]) -> Result<f64> {
    ensure(points.len() >= 3, || "rate fit needs at least 3 points".into())?;
    if let Some((_, m)) = points.iter().find(|(_, m)| !(*m > 0.0)) {
        return Err(invalid(format!("rate fit needs positive medians, got {m}")));
    }
    if let Some((n, _)) = points.iter().find(|(n, _)| !(*n > 0.0)) {
        return Err(invalid(format!("rate fit needs positive n, got {n}")));
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| n.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, m)| m.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    ensure(sxx > 0.0, || "rate fit needs distinct n values".into())?;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

pub(crate) fn standard_normal() -> Normal {
    Normal::standard()
}

/// Dirichlet eta `sum_{k>=1} (-1)^{k-1} k^{-s}` for real `s > 0`.
///
/// Van Wijngaarden's form of the Euler transform: the partial sums are
/// averaged pairwise until one value is left. Averaging never subtracts
/// nearly equal numbers, so the f64 result carries ~15 digits.
pub fn dirichlet_eta(s: f64) -> f64 {
    const TERMS: usize = 64;
    let mut partial = [0.0f64; TERMS];
    let mut acc = 0.0;
    for (k, slot) in partial.iter_mut().enumerate() {
        let term = ((k + 1) as f64).powf(-s);
        acc += if k % 2 == 0 { term } else { -term };
        *slot = acc;
    }
    for width in (1..TERMS).rev() {
        for i in 0..width {
            partial[i] = 0.5 * (partial[i] + partial[i + 1]);
        }
    }
    partial[0]
}

/// Riemann zeta for real `s > 0`, `s != 1`, through `eta(s) / (1 - 2^{1-s})`.
pub fn zeta(s: f64) -> Result<f64> {
    ensure(s > 0.0 && s != 1.0, || format!("zeta evaluator needs s > 0, s != 1; got {s}"))?;
    Ok(dirichlet_eta(s) / (1.0 - (1.0 - s).exp2()))
}

/// Euler–Maclaurin evaluation of zeta(s) for real `s > 0`, `s != 1`,
/// independent of the eta series. Accurate to ~1e-13 near `s = 1/2`.
pub fn zeta_euler_maclaurin(s: f64) -> f64 {
    const N: usize = 20;
    // B_2, B_4, ..., B_16
    const BERNOULLI: [f64; 8] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
        -3617.0 / 510.0,
    ];
    let n = N as f64;
    let mut sum: f64 = (1..N).map(|k| (k as f64).powf(-s)).sum();
    sum += n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // rising factorial s (s+1) ... (s+2j-2) / (2j)!
    let mut rising = s;
    let mut fact = 2.0;
    for (j, b) in BERNOULLI.iter().enumerate() {
        let order = 2 * (j + 1);
        sum += b / fact * rising * n.powf(-s - order as f64 + 1.0);
        rising *= (s + order as f64 - 1.0) * (s + order as f64);
        fact *= ((order + 1) * (order + 2)) as f64;
    }
    sum
}

/// `beta = -zeta(1/2) / sqrt(2 pi) ≈ 0.5825971579`.
pub fn beta_constant() -> f64 {
    static BETA: OnceLock<f64> = OnceLock::new();
    *BETA.get_or_init(|| {
        let z = dirichlet_eta(0.5) / (1.0 - std::f64::consts::SQRT_2);
        -z / (2.0 * std::f64::consts::PI).sqrt()
    })
}
