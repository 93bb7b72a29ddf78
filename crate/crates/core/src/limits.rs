//! Direct samplers for the limit laws of the normalized error triplets.
//!
//! Hitting: `(U + k*, sigma W(U + k*), U)` where `W(U) ~ N(0, U)`, `W` has
//! unit Gaussian increments at integer offsets after `U`, and
//! `k* = min{k >= 0 : W(U + k) > 0}`.
//!
//! Minimum: `(U + k*, sigma R(U + k*), U)` with `R` a two-sided Bessel(3)
//! process and `k*` the argmin of `R(U + k)` over all integers `k`.
//!
//! Both samplers jump over long excursions with exact first-passage laws,
//! so their cost per draw is bounded in probability even though the time
//! components have infinite mean.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::rng::Stream;

/// Step cap for the stepping samplers.
pub const MAX_STEPS: u64 = 1_000_000_000;

const FRACTION_RESOLUTION_LIMIT: f64 = (1u64 << 40) as f64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitTriplet {
    pub time_comp: f64,
    pub pos_comp: f64,
    pub u: f64,
}

fn check_sigma(sigma: f64) -> Result<()> {
    ensure(sigma > 0.0 && sigma.is_finite(), || format!("sigma must be > 0, got {sigma}"))
}

/// Integer number of unit steps to pass a real offset `q > 0`, and the
/// remaining distance to that integer.
fn ceil_split(q: f64, s: &mut Stream) -> (f64, f64) {
    if q < FRACTION_RESOLUTION_LIMIT {
        let c = q.ceil();
        (c, c - q)
    } else {
        let u = s.uniform();
        (q + u, u)
    }
}

/// One draw from the hitting limit law.
///
/// While the walk is at `-d < 0`, the continuous interpolation first reaches
/// 0 after a Lévy time `d^2 / Z^2`; the walk value at the next integer
/// offset is then `N(0, delta)` for the leftover `delta`.
pub fn sample_hit_limit(sigma: f64, s: &mut Stream) -> Result<LimitTriplet> {
    check_sigma(sigma)?;
    let u = s.uniform();
    let mut w = u.sqrt() * s.std_normal();
    let mut k = 0.0;
    for _ in 0..MAX_STEPS {
        if w > 0.0 {
            return Ok(LimitTriplet {
                time_comp: u + k,
                pos_comp: sigma * w,
                u,
            });
        }
        if w == 0.0 {
            w = s.std_normal();
            k += 1.0;
            continue;
        }
        let z = s.std_normal();
        let q = w * w / (z * z);
        let (steps, delta) = ceil_split(q, s);
        k += steps;
        w = delta.sqrt() * s.std_normal();
    }
    Err(Error::Internal(format!("hit limit sampler exceeded {MAX_STEPS} excursions")))
}

/// Literal version of [`sample_hit_limit`]: unit Gaussian steps until the
/// walk is positive. Gives up after `cap` steps and returns `None`.
pub fn sample_hit_limit_stepping(sigma: f64, cap: u64, s: &mut Stream) -> Result<Option<LimitTriplet>> {
    check_sigma(sigma)?;
    let u = s.uniform();
    let mut w = u.sqrt() * s.std_normal();
    let mut k = 0u64;
    while w <= 0.0 {
        if k >= cap.min(MAX_STEPS) {
            return Ok(None);
        }
        w += s.std_normal();
        k += 1;
    }
    Ok(Some(LimitTriplet {
        time_comp: u + k as f64,
        pos_comp: sigma * w,
        u,
    }))
}

/// One draw from the minimum limit law.
///
/// `eps` is the per-draw truncation budget the caller is willing to spend;
/// it is validated but the sampler needs none of it: each leg stops on an
/// exact escape event. From radius `r` above the current minimum `m`, a
/// Bessel(3) process ever returns to `m` with probability `m / r`; given
/// that it does, the radius moves as a plain Brownian motion until then,
/// so the return takes a Lévy time `(r - m)^2 / Z^2`.
pub fn sample_min_limit(sigma: f64, eps: f64, s: &mut Stream) -> Result<LimitTriplet> {
    check_sigma(sigma)?;
    ensure(eps > 0.0 && eps < 1.0, || format!("eps must be in (0,1), got {eps}"))?;
    let u = s.uniform();
    let mut best = (f64::INFINITY, 0.0);
    // Offsets u + k, k = 0, 1, ...
    bessel_leg(u, 0.0, 1.0, f64::INFINITY, &mut best, s)?;
    // Offsets u - j, j = 1, 2, ..., at distance j - u from the origin.
    bessel_leg(1.0 - u, -1.0, -1.0, f64::INFINITY, &mut best, s)?;
    Ok(LimitTriplet {
        time_comp: u + best.1,
        pos_comp: sigma * best.0,
        u,
    })
}

/// Explore one Bessel leg read at unit spacing from `first`. The point after
/// `steps` unit steps is `k = base + direction * steps`; the leg stops once
/// `steps` would pass `cap`. Updates `best = (min, k)`.
fn bessel_leg(first: f64, base: f64, direction: f64, cap: f64, best: &mut (f64, f64), s: &mut Stream) -> Result<()> {
    let mut r = first.sqrt() * s.norm3_from(0.0, 1.0);
    let mut steps = 0.0;
    let record = |r: f64, steps: f64, best: &mut (f64, f64)| {
        if r < best.0 {
            *best = (r, base + direction * steps);
        }
    };
    record(r, steps, best);
    for _ in 0..MAX_STEPS {
        let m = best.0;
        if r <= m {
            if steps + 1.0 > cap {
                return Ok(());
            }
            r = s.norm3_from(r, 1.0);
            steps += 1.0;
        } else {
            if s.uniform() >= m / r {
                return Ok(());
            }
            let z = s.std_normal();
            let t = (r - m) * (r - m) / (z * z);
            let (whole, delta) = floor_split(t, s);
            steps += whole;
            if steps > cap {
                return Ok(());
            }
            r = s.norm3_from(m, delta.sqrt());
        }
        record(r, steps, best);
    }
    Err(Error::Internal(format!("min limit sampler exceeded {MAX_STEPS} excursions")))
}

/// Unit steps from offset 0 to the first integer strictly after `t`, and
/// the distance from `t` to that integer.
fn floor_split(t: f64, s: &mut Stream) -> (f64, f64) {
    if t < FRACTION_RESOLUTION_LIMIT {
        let whole = t.floor() + 1.0;
        (whole, whole - t)
    } else {
        let u = s.uniform();
        (t + u, u)
    }
}

/// Minimum limit draw restricted to `k in -half_width..=half_width`, using the
/// same excursion sampler as [`sample_min_limit`] with the legs cut off.
pub fn sample_min_limit_truncated(sigma: f64, half_width: u32, s: &mut Stream) -> Result<LimitTriplet> {
    check_sigma(sigma)?;
    ensure(half_width >= 1, || "half_width must be >= 1".into())?;
    let u = s.uniform();
    let k = half_width as f64;
    let mut best = (f64::INFINITY, 0.0);
    bessel_leg(u, 0.0, 1.0, k, &mut best, s)?;
    bessel_leg(1.0 - u, -1.0, -1.0, k - 1.0, &mut best, s)?;
    Ok(LimitTriplet {
        time_comp: u + best.1,
        pos_comp: sigma * best.0,
        u,
    })
}

/// Minimum limit draw restricted to the window `k in -half_width..=half_width`,
/// sampled from a two-sided Bessel grid. Serves as a brute-force reference.
pub fn sample_min_limit_window(sigma: f64, half_width: u32, s: &mut Stream) -> Result<LimitTriplet> {
    check_sigma(sigma)?;
    let u = s.uniform();
    let h = half_width as i64;
    let offsets: Vec<f64> = (-h..=h).map(|k| u + k as f64).collect();
    let grid = crate::paths::sample_bessel3_two_sided(&offsets, s)?;
    let (i, v) = grid
        .values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    Ok(LimitTriplet {
        time_comp: grid.offsets[i],
        pos_comp: sigma * v,
        u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{beta_constant, ks_critical_two_sample, ks_two_sample};
    use crate::rng::create_stream;
    use proptest::prelude::*;

    fn pos(v: &[LimitTriplet]) -> Vec<f64> {
        v.iter().map(|t| t.pos_comp).collect()
    }

    #[test]
    fn hit_limit_immediate_branch() {
        let mut s = create_stream(1, 0);
        let mut seen = 0;
        for _ in 0..1000 {
            let t = sample_hit_limit(1.0, &mut s).unwrap();
            assert!(t.pos_comp > 0.0);
            assert!(t.time_comp >= t.u);
            if t.time_comp == t.u {
                seen += 1;
                assert!(t.u > 0.0 && t.u < 1.0);
            }
        }
        assert!(seen > 400, "{seen}");
    }

    #[test]
    fn hit_limit_mean_is_beta() {
        let mut s = create_stream(2, 0);
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_hit_limit(1.0, &mut s).unwrap().pos_comp).sum::<f64>() / n as f64;
        assert!((mean - beta_constant()).abs() < 0.005, "{mean}");
    }

    #[test]
    fn hit_limit_scales_with_sigma() {
        let mut s = create_stream(3, 0);
        let n = 100_000;
        let two: Vec<f64> = (0..n).map(|_| sample_hit_limit(2.0, &mut s).unwrap().pos_comp).collect();
        let one: Vec<f64> = (0..n).map(|_| 2.0 * sample_hit_limit(1.0, &mut s).unwrap().pos_comp).collect();
        assert!(ks_two_sample(&two, &one).unwrap() < 0.0122);
    }

    #[test]
    fn hit_limit_jumps_match_stepping() {
        // Compare on the event {k* <= 200}, which both samplers resolve.
        let mut s = create_stream(4, 0);
        let n = 100_000;
        let keep = |t: &LimitTriplet| t.time_comp - t.u <= 200.0;
        let mut fast = Vec::new();
        while fast.len() < n {
            let t = sample_hit_limit(1.0, &mut s).unwrap();
            if keep(&t) {
                fast.push(t);
            }
        }
        let mut slow = Vec::new();
        while slow.len() < n {
            if let Some(t) = sample_hit_limit_stepping(1.0, 200, &mut s).unwrap() {
                slow.push(t);
            }
        }
        assert!(ks_two_sample(&pos(&fast), &pos(&slow)).unwrap() < 0.0122);
        let tf: Vec<f64> = fast.iter().map(|t| t.time_comp).collect();
        let ts: Vec<f64> = slow.iter().map(|t| t.time_comp).collect();
        assert!(ks_two_sample(&tf, &ts).unwrap() < 0.0122);
    }

    #[test]
    fn min_limit_rejects_bad_eps() {
        let mut s = create_stream(5, 0);
        assert!(sample_min_limit(1.0, 0.0, &mut s).is_err());
        assert!(sample_min_limit(1.0, 1.0, &mut s).is_err());
        assert!(sample_min_limit(0.0, 0.5, &mut s).is_err());
    }

    #[test]
    fn min_limit_mean_is_beta() {
        let mut s = create_stream(6, 0);
        let n = 1_000_000;
        let mean = (0..n)
            .map(|_| sample_min_limit(1.0, 1e-6, &mut s).unwrap().pos_comp)
            .sum::<f64>()
            / n as f64;
        assert!((mean - beta_constant()).abs() < 0.005, "{mean}");
    }

    #[test]
    fn min_limit_tighter_eps_changes_nothing() {
        for seed in 0..2000 {
            let a = sample_min_limit(1.0, 1e-4, &mut create_stream(seed, 7)).unwrap();
            let b = sample_min_limit(1.0, 1e-5, &mut create_stream(seed, 7)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn truncated_excursions_match_window() {
        // Both draw the minimum over the same finite window, one by
        // excursions and one by brute force over every grid point.
        let mut s = create_stream(8, 0);
        let n = 20_000;
        let jumps: Vec<LimitTriplet> = (0..n).map(|_| sample_min_limit_truncated(1.0, 100, &mut s).unwrap()).collect();
        let window: Vec<LimitTriplet> = (0..n).map(|_| sample_min_limit_window(1.0, 100, &mut s).unwrap()).collect();
        let crit = 1.5 * ks_critical_two_sample(n, n);
        assert!(ks_two_sample(&pos(&jumps), &pos(&window)).unwrap() < crit);
        let time = |v: &[LimitTriplet]| -> Vec<f64> { v.iter().map(|t| t.time_comp).collect() };
        assert!(ks_two_sample(&time(&jumps), &time(&window)).unwrap() < crit);
        assert!(jumps.iter().all(|t| t.time_comp.abs() < 101.0));
    }

    #[test]
    fn window_bias_decays() {
        // A finite window misses the global minimum with probability of
        // order K^{-1/2}, which shows up as an upward shift of the mean.
        let mut s = create_stream(11, 0);
        let n = 200_000;
        let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
        let full = mean((0..n).map(|_| sample_min_limit(1.0, 1e-4, &mut s).unwrap().pos_comp).collect());
        let narrow = mean((0..n).map(|_| sample_min_limit_truncated(1.0, 4, &mut s).unwrap().pos_comp).collect());
        let wide = mean((0..n).map(|_| sample_min_limit_truncated(1.0, 400, &mut s).unwrap().pos_comp).collect());
        assert!(narrow - full > 0.02, "{narrow} vs {full}");
        assert!((wide - full).abs() < (narrow - full) / 3.0, "{wide} vs {full}");
    }

    #[test]
    fn min_limit_scales_with_sigma() {
        let mut s = create_stream(9, 0);
        let n = 100_000;
        let two: Vec<f64> = (0..n).map(|_| sample_min_limit(2.0, 1e-4, &mut s).unwrap().pos_comp).collect();
        let one: Vec<f64> = (0..n).map(|_| 2.0 * sample_min_limit(1.0, 1e-4, &mut s).unwrap().pos_comp).collect();
        assert!(ks_two_sample(&two, &one).unwrap() < 0.0122);
    }

    proptest! {
        #[test]
        fn min_limit_invariants(seed in 0u64..10_000) {
            let t = sample_min_limit(1.0, 1e-4, &mut create_stream(seed, 1)).unwrap();
            prop_assert!(t.pos_comp > 0.0);
            prop_assert!(t.u > 0.0 && t.u < 1.0);
            let k = t.time_comp - t.u;
            prop_assert!((k - k.round()).abs() < 1e-6 * (1.0 + k.abs()));
        }

        #[test]
        fn hit_limit_invariants(seed in 0u64..10_000) {
            let t = sample_hit_limit(1.0, &mut create_stream(seed, 2)).unwrap();
            prop_assert!(t.pos_comp > 0.0);
            prop_assert!(t.time_comp >= t.u);
        }
    }
}
