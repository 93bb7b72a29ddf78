//! Continuity correction for discretely monitored barrier crossing.
//!
//! The probability that a path monitored at `n` points per unit time
//! crosses `b` by time `t` and ends above `y` is approximated by the
//! continuously monitored probability with the barrier shifted to
//! `b + sigma * beta / sqrt(n)`.

use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

use crate::analysis::{beta_constant, standard_normal};
use crate::error::{ensure, Result};
use crate::paths::bridge_cross_prob;
use crate::rng::Stream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierQuery {
    pub b: f64,
    pub y: f64,
    pub t: f64,
    pub n: u32,
    pub mu: f64,
    pub sigma: f64,
}

impl BarrierQuery {
    pub fn validate(&self) -> Result<()> {
        ensure(self.b > 0.0 && self.b.is_finite(), || format!("barrier must be > 0, got {}", self.b))?;
        ensure(self.y <= self.b, || format!("threshold y = {} exceeds barrier b = {}", self.y, self.b))?;
        ensure(self.t > 0.0 && self.t.is_finite(), || format!("horizon must be > 0, got {}", self.t))?;
        ensure(self.n >= 1, || "monitoring count n must be >= 1".into())?;
        ensure(self.sigma > 0.0 && self.sigma.is_finite(), || format!("sigma must be > 0, got {}", self.sigma))?;
        ensure(self.mu.is_finite(), || format!("drift must be finite, got {}", self.mu))?;
        let steps = self.n as f64 * self.t;
        ensure((steps - steps.round()).abs() < 1e-9 && steps.round() >= 1.0, || {
            format!("horizon {} is not on the monitoring mesh 1/{}", self.t, self.n)
        })?;
        Ok(())
    }

    /// Number of monitoring dates in `(0, t]`.
    pub fn steps(&self) -> u64 {
        (self.n as f64 * self.t).round() as u64
    }

    /// `sigma * beta / sqrt(n)`.
    pub fn shift(&self) -> f64 {
        self.sigma * beta_constant() / (self.n as f64).sqrt()
    }
}

/// `P(B(t) > y, max_{[0,t]} B >= level)` for drifted Brownian motion, `y <= level`.
pub fn continuous_cross_prob(level: f64, y: f64, t: f64, mu: f64, sigma: f64) -> f64 {
    let phi = standard_normal();
    let sd = sigma * t.sqrt();
    let above = 1.0 - phi.cdf((level - mu * t) / sd);
    let reflected = phi.cdf((-level - mu * t) / sd) - phi.cdf((y - 2.0 * level - mu * t) / sd);
    let weight = (2.0 * mu * level / (sigma * sigma)).exp();
    (above + weight * reflected).clamp(0.0, 1.0)
}

/// The continuous probability at barrier `b` (`continuous = true`) or the
/// corrected approximation to the discrete one at `b + shift`.
pub fn joint_cross_terminal_prob(q: &BarrierQuery, continuous: bool) -> Result<f64> {
    q.validate()?;
    let level = if continuous { q.b } else { q.b + q.shift() };
    Ok(continuous_cross_prob(level, q.y, q.t, q.mu, q.sigma))
}

/// Monte Carlo estimate and binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub se: f64,
    pub samples: u64,
}

impl McEstimate {
    fn from_hits(hits: u64, samples: u64) -> Self {
        let p = hits as f64 / samples as f64;
        Self {
            estimate: p,
            se: (p * (1.0 - p) / samples as f64).sqrt(),
            samples,
        }
    }
}

/// Frequency of `{max_k B(k/n) >= b, B(t) > y}` over `samples` mesh paths.
pub fn mc_discrete_prob(q: &BarrierQuery, samples: u64, s: &mut Stream) -> Result<McEstimate> {
    q.validate()?;
    ensure(samples >= 1, || "need at least one sample".into())?;
    let steps = q.steps();
    let dt = 1.0 / q.n as f64;
    let drift = q.mu * dt;
    let vol = q.sigma * dt.sqrt();
    let mut hits = 0;
    for _ in 0..samples {
        let mut x = 0.0;
        let mut crossed = false;
        for _ in 0..steps {
            x += drift + vol * s.std_normal();
            crossed |= x >= q.b;
        }
        if crossed && x > q.y {
            hits += 1;
        }
    }
    Ok(McEstimate::from_hits(hits, samples))
}

/// Frequency of the continuously monitored event, using exact bridge
/// crossing tests between mesh points.
pub fn mc_continuous_prob(q: &BarrierQuery, samples: u64, s: &mut Stream) -> Result<McEstimate> {
    q.validate()?;
    ensure(samples >= 1, || "need at least one sample".into())?;
    let steps = q.steps();
    let dt = 1.0 / q.n as f64;
    let drift = q.mu * dt;
    let vol = q.sigma * dt.sqrt();
    let mut hits = 0;
    for _ in 0..samples {
        let mut x = 0.0;
        let mut crossed = false;
        for _ in 0..steps {
            let next = x + drift + vol * s.std_normal();
            if !crossed {
                let p = bridge_cross_prob(x, next, dt, q.b, q.sigma);
                crossed = p >= 1.0 || (p > 0.0 && s.uniform() < p);
            }
            x = next;
        }
        if crossed && x > q.y {
            hits += 1;
        }
    }
    Ok(McEstimate::from_hits(hits, samples))
}

/// Discrete-monitoring estimates at each of `ns` from the same paths,
/// simulated on the finest mesh. Every entry of `ns` must divide the
/// largest one.
pub fn mc_discrete_nested(q: &BarrierQuery, ns: &[u32], samples: u64, s: &mut Stream) -> Result<Vec<McEstimate>> {
    let finest = *ns.iter().max().ok_or_else(|| crate::error::invalid("no monitoring counts"))?;
    for &n in ns {
        ensure(n >= 1 && finest % n == 0, || format!("{n} does not divide {finest}"))?;
        BarrierQuery { n, ..*q }.validate()?;
    }
    let fine = BarrierQuery { n: finest, ..*q };
    let steps = fine.steps();
    let dt = 1.0 / finest as f64;
    let drift = q.mu * dt;
    let vol = q.sigma * dt.sqrt();
    let strides: Vec<u64> = ns.iter().map(|&n| (finest / n) as u64).collect();
    let mut hits = vec![0u64; ns.len()];
    let mut crossed = vec![false; ns.len()];
    for _ in 0..samples {
        crossed.iter_mut().for_each(|c| *c = false);
        let mut x = 0.0;
        for k in 1..=steps {
            x += drift + vol * s.std_normal();
            if x >= q.b {
                for (c, &st) in crossed.iter_mut().zip(&strides) {
                    *c |= k % st == 0;
                }
            }
        }
        for (h, &c) in hits.iter_mut().zip(&crossed) {
            *h += (c && x > q.y) as u64;
        }
    }
    Ok(hits.into_iter().map(|h| McEstimate::from_hits(h, samples)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::create_stream;
    use proptest::prelude::*;

    fn query(b: f64, y: f64, n: u32) -> BarrierQuery {
        BarrierQuery {
            b,
            y,
            t: 1.0,
            n,
            mu: 0.0,
            sigma: 1.0,
        }
    }

    #[test]
    fn rejects_bad_queries() {
        assert!(joint_cross_terminal_prob(&query(1.0, 2.0, 10), true).is_err());
        assert!(joint_cross_terminal_prob(&query(0.0, -1.0, 10), true).is_err());
        let off_mesh = BarrierQuery { t: 0.55, ..query(1.0, 0.0, 10) };
        assert!(off_mesh.validate().is_err());
    }

    #[test]
    fn shift_uses_beta() {
        let q = BarrierQuery { sigma: 2.0, ..query(1.0, 0.0, 16) };
        assert_eq!(q.shift(), 2.0 * beta_constant() / 4.0);
    }

    #[test]
    fn unreachable_barrier_has_zero_probability() {
        let p = joint_cross_terminal_prob(&query(40.0, 0.0, 10), true).unwrap();
        assert!(p < 1e-300);
    }

    #[test]
    fn driftless_reflection_identity() {
        // mu = 0: y = b leaves P(B(t) > b); y far below b gives P(max >= b) = 2 P(B(t) > b)
        let phi = standard_normal();
        let p = joint_cross_terminal_prob(&query(1.5, 1.5, 10), true).unwrap();
        assert!((p - (1.0 - phi.cdf(1.5))).abs() < 1e-14);
        let p = joint_cross_terminal_prob(&query(1.5, -40.0, 10), true).unwrap();
        assert!((p - 2.0 * (1.0 - phi.cdf(1.5))).abs() < 1e-14);
    }

    #[test]
    fn closed_form_matches_exact_mc() {
        let mut s = create_stream(1, 0);
        for q in [
            query(2.0, 0.0, 1),
            query(1.0, 1.0, 4),
            BarrierQuery { mu: 0.7, sigma: 1.3, ..query(1.2, 0.3, 4) },
        ] {
            let exact = joint_cross_terminal_prob(&q, true).unwrap();
            let mc = mc_continuous_prob(&q, 1_000_000, &mut s).unwrap();
            assert!((mc.estimate - exact).abs() < 3.0 * mc.se, "{q:?}: {exact} vs {mc:?}");
        }
    }

    #[test]
    fn single_monitoring_point() {
        let mut s = create_stream(2, 0);
        let q = query(1.0, 0.5, 1);
        let mc = mc_discrete_prob(&q, 1_000_000, &mut s).unwrap();
        let exact = 1.0 - standard_normal().cdf(1.0);
        assert!((mc.estimate - exact).abs() < 3.0 * mc.se, "{mc:?} vs {exact}");
    }

    #[test]
    fn very_low_threshold_is_plain_crossing() {
        let mut s = create_stream(3, 0);
        let q = query(1.0, -50.0, 20);
        let a = mc_discrete_prob(&q, 200_000, &mut s.clone()).unwrap();
        let mut crossings = 0;
        for _ in 0..200_000 {
            let mut x: f64 = 0.0;
            let mut hit = false;
            for _ in 0..20 {
                x += 0.0 + (1.0 / 20f64).sqrt() * s.std_normal();
                hit |= x >= 1.0;
            }
            crossings += hit as u64;
        }
        assert_eq!(a.estimate, crossings as f64 / 200_000.0);
    }

    #[test]
    fn correction_beats_continuous() {
        let mut s = create_stream(4, 0);
        let q = query(2.0, 1.9, 50);
        let mc = mc_discrete_prob(&q, 1_000_000, &mut s).unwrap();
        let corrected = joint_cross_terminal_prob(&q, false).unwrap();
        let plain = joint_cross_terminal_prob(&q, true).unwrap();
        assert!((mc.estimate - corrected).abs() < (mc.estimate - plain).abs());
        assert!((mc.estimate - corrected).abs() < (3.0 * mc.se).max(0.002));
    }

    #[test]
    fn correction_error_shrinks_with_n() {
        let mut s = create_stream(5, 0);
        let q = query(2.0, 1.9, 400);
        let ns = [25, 100, 400];
        let est = mc_discrete_nested(&q, &ns, 200_000, &mut s).unwrap();
        let err: Vec<f64> = ns
            .iter()
            .zip(&est)
            .map(|(&n, e)| (e.estimate - joint_cross_terminal_prob(&BarrierQuery { n, ..q }, false).unwrap()).abs())
            .collect();
        for (w, e) in err.windows(2).zip(&est[1..]) {
            assert!(w[1] <= w[0] + 3.0 * e.se, "{err:?}");
        }
    }

    proptest! {
        #[test]
        fn monotone_in_barrier_and_threshold(b in 0.1f64..4.0, db in 0.0f64..1.0, y in -3.0f64..0.1, dy in 0.0f64..1.0, mu in -1.0f64..1.0) {
            let q = BarrierQuery { mu, ..query(b, y, 25) };
            let p = joint_cross_terminal_prob(&q, false).unwrap();
            let higher = joint_cross_terminal_prob(&BarrierQuery { b: b + db, ..q }, false).unwrap();
            let lower_y = joint_cross_terminal_prob(&BarrierQuery { y: y - dy, ..q }, false).unwrap();
            prop_assert!(higher <= p + 1e-12);
            prop_assert!(lower_y >= p - 1e-12);
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
