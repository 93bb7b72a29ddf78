//! Gaussian random walks read off a Brownian path at integer times.
//!
//! `S_k = B(k)` exactly, so every walk quantity has a continuous-path
//! counterpart on the same sample. The pairs returned here are
//! `(walk quantity - path quantity)` for times and values.

use crate::error::{ensure, Result};
use crate::events::{
    global_min_truncated, hit_constant_exact, hit_record, min_record, BmParams, MinRecord,
};
use crate::paths::{sample_bm_grid, BarrierSpec, PathGrid};
use crate::rng::Stream;

/// A walk and the Brownian path it is read from.
#[derive(Clone, Debug)]
pub struct CoupledWalk {
    path: PathGrid,
}

impl CoupledWalk {
    /// Walk with drift `nu` per step and step volatility `sigma`, over
    /// `steps` steps.
    pub fn simulate(nu: f64, sigma: f64, steps: u32, s: &mut Stream) -> Result<Self> {
        ensure(steps >= 1, || "walk needs at least one step".into())?;
        Ok(Self {
            path: sample_bm_grid(nu, sigma, 1, steps as f64, s)?,
        })
    }

    pub fn from_path(path: PathGrid) -> Result<Self> {
        ensure(path.step() == 1.0, || format!("walk paths have unit mesh, got {}", path.step()))?;
        Ok(Self { path })
    }

    /// `S_0, S_1, ...`.
    pub fn walk(&self) -> &[f64] {
        self.path.values()
    }

    pub fn path(&self) -> &PathGrid {
        &self.path
    }

    /// `(tau_S - tau_B, S_{tau_S} - m)` for the level `m`, with the path
    /// crossing located by bridge bisection to `depth` levels. `None` when
    /// the walk does not reach `m`.
    pub fn overshoot(&self, m: f64, depth: u32, s: &mut Stream) -> Result<Option<(f64, f64)>> {
        let b = BarrierSpec::constant(m)?;
        Ok(hit_record(&self.path, &b, depth, s)?.map(|r| (r.tau_n - r.tau_cont, r.value_n - m)))
    }

    /// `(argmin S - argmin B, min S - min B)` over the whole walk.
    pub fn min_pair(&self, s: &mut Stream) -> (f64, f64) {
        min_pair_of(&min_record(&self.path, s))
    }
}

fn min_pair_of(r: &MinRecord) -> (f64, f64) {
    (r.grid_index as f64 - r.cont_time, r.grid_value - r.cont_value)
}

/// `(tau_S - tau_B, S_{tau_S} - m)` for a walk with drift `nu >= 0` and
/// level `m`. Sampled without a horizon by alternating exact first passages
/// of the path and Gaussian steps to the next integer time.
pub fn overshoot_pair(m: f64, sigma: f64, nu: f64, s: &mut Stream) -> Result<(f64, f64)> {
    let (_, t) = hit_constant_exact(1, m, BmParams { mu: nu, sigma }, s)?;
    Ok((t.time_err, t.pos_err))
}

/// `(argmin_{k<=n} S_k - argmin_{[0,n]} B, min_{k<=n} S_k - min_{[0,n]} B)`
/// for a driftless walk.
pub fn running_min_pair(n: u32, sigma: f64, s: &mut Stream) -> Result<(f64, f64)> {
    ensure(sigma > 0.0, || format!("sigma must be > 0, got {sigma}"))?;
    Ok(CoupledWalk::simulate(0.0, sigma, n, s)?.min_pair(s))
}

/// Global-minimum pair for a walk with drift `nu > 0`, on a path extended
/// until a return below its running minimum has probability below `eps`.
pub fn vanishing_drift_pair(nu: f64, sigma: f64, eps: f64, s: &mut Stream) -> Result<(f64, f64)> {
    ensure(nu > 0.0, || format!("walk drift must be > 0, got {nu}"))?;
    ensure(sigma > 0.0, || format!("sigma must be > 0, got {sigma}"))?;
    let (path, _) = global_min_truncated(nu, sigma, 1, eps, s)?;
    Ok(min_pair_of(&min_record(&path, s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{beta_constant, ks_critical_two_sample, ks_two_sample};
    use crate::events::error_triplet_hit;
    use crate::limits::sample_hit_limit;
    use crate::paths::bridge_min_sample;
    use crate::rng::create_stream;
    use proptest::prelude::*;

    #[test]
    fn walk_is_restriction_of_path() {
        let mut s = create_stream(1, 0);
        let w = CoupledWalk::simulate(0.3, 1.0, 50, &mut s).unwrap();
        assert_eq!(w.walk().len(), 51);
        for (k, &x) in w.walk().iter().enumerate() {
            assert_eq!(x.to_bits(), w.path().values()[k].to_bits());
            assert_eq!(w.path().time(k), k as f64);
        }
    }

    #[test]
    fn overshoot_matches_walk_stepping() {
        // With drift the walk reaches m = 5 quickly, so a literal walk on
        // 60 steps with a bisected path crossing is an independent oracle.
        let mut s = create_stream(2, 0);
        let n = 20_000;
        let exact: Vec<(f64, f64)> = (0..n).map(|_| overshoot_pair(5.0, 1.0, 0.5, &mut s).unwrap()).collect();
        let mut literal = Vec::new();
        while literal.len() < n {
            let w = CoupledWalk::simulate(0.5, 1.0, 60, &mut s).unwrap();
            if let Some(p) = w.overshoot(5.0, 16, &mut s).unwrap() {
                literal.push(p);
            }
        }
        let crit = 1.5 * ks_critical_two_sample(n, n);
        let first = |v: &[(f64, f64)]| v.iter().map(|p| p.0).collect::<Vec<_>>();
        let second = |v: &[(f64, f64)]| v.iter().map(|p| p.1).collect::<Vec<_>>();
        assert!(ks_two_sample(&first(&exact), &first(&literal)).unwrap() < crit);
        assert!(ks_two_sample(&second(&exact), &second(&literal)).unwrap() < crit);
    }

    #[test]
    fn overshoot_signs() {
        let mut s = create_stream(3, 0);
        for _ in 0..10_000 {
            let (dt, over) = overshoot_pair(50.0, 1.0, 0.0, &mut s).unwrap();
            assert!(dt >= 0.0);
            assert!(over >= 0.0);
        }
    }

    #[test]
    fn overshoot_at_large_level_near_limit() {
        let mut s = create_stream(4, 0);
        let n = 100_000;
        let over: Vec<f64> = (0..n).map(|_| overshoot_pair(50.0, 1.0, 0.0, &mut s).unwrap().1).collect();
        let lim: Vec<f64> = (0..n).map(|_| sample_hit_limit(1.0, &mut s).unwrap().pos_comp).collect();
        assert!(ks_two_sample(&over, &lim).unwrap() < 0.02);
        let mean = over.iter().sum::<f64>() / n as f64;
        assert!((mean - beta_constant()).abs() < 0.02, "{mean}");
    }

    #[test]
    fn scaling_bridge_to_hit_experiment() {
        // Level m on a unit mesh is level 1 on a 1/m^2 mesh, rescaled.
        let mut s = create_stream(5, 0);
        let n = 50_000;
        let walk: Vec<f64> = (0..n).map(|_| overshoot_pair(16.0, 1.0, 0.0, &mut s).unwrap().1).collect();
        let hit: Vec<f64> = (0..n)
            .map(|_| hit_constant_exact(256, 1.0, BmParams { mu: 0.0, sigma: 1.0 }, &mut s).unwrap().1.pos_err)
            .collect();
        assert!(ks_two_sample(&walk, &hit).unwrap() < 1.5 * ks_critical_two_sample(n, n));
    }

    #[test]
    fn hit_path_oracle_agrees_with_walk_overshoot() {
        // Same law read through the general path-based triplet.
        let mut s = create_stream(6, 0);
        let b = BarrierSpec::constant(5.0).unwrap();
        let n = 10_000;
        let mut via_events = Vec::new();
        while via_events.len() < n {
            if let Some((_, t)) = error_triplet_hit(1, &b, BmParams { mu: 0.5, sigma: 1.0 }, 60.0, 16, &mut s).unwrap() {
                via_events.push(t.pos_err);
            }
        }
        let via_walks: Vec<f64> = (0..n).map(|_| overshoot_pair(5.0, 1.0, 0.5, &mut s).unwrap().1).collect();
        assert!(ks_two_sample(&via_events, &via_walks).unwrap() < 1.5 * ks_critical_two_sample(n, n));
    }

    #[test]
    fn single_step_running_min() {
        for seed in 0..200 {
            let mut s1 = create_stream(seed, 0);
            let (_, diff) = running_min_pair(1, 1.0, &mut s1).unwrap();
            let mut s2 = create_stream(seed, 0);
            let x1 = s2.std_normal();
            let m = bridge_min_sample(0.0, x1, 1.0, 1.0, &mut s2);
            assert!((diff - (x1.min(0.0) - m)).abs() < 1e-12);
        }
    }

    #[test]
    fn vanishing_drift_rejects_nonpositive() {
        let mut s = create_stream(7, 0);
        assert!(vanishing_drift_pair(0.0, 1.0, 1e-6, &mut s).is_err());
        assert!(vanishing_drift_pair(-1.0, 1.0, 1e-6, &mut s).is_err());
    }

    #[test]
    fn strong_drift_matches_short_horizon() {
        // With drift 10 a return below the minimum after 6 steps is
        // astronomically unlikely, so a fixed 6-step walk is a brute-force
        // oracle for the global pair.
        let mut s = create_stream(8, 0);
        let n = 50_000;
        let global: Vec<f64> = (0..n).map(|_| vanishing_drift_pair(10.0, 1.0, 1e-6, &mut s).unwrap().1).collect();
        let short: Vec<f64> = (0..n)
            .map(|_| CoupledWalk::simulate(10.0, 1.0, 6, &mut s).unwrap().min_pair(&mut s).1)
            .collect();
        assert!(ks_two_sample(&global, &short).unwrap() < 1.5 * ks_critical_two_sample(n, n));
    }

    proptest! {
        #[test]
        fn min_pairs_nonnegative(seed in 0u64..300) {
            let mut s = create_stream(seed, 1);
            prop_assert!(running_min_pair(64, 1.0, &mut s).unwrap().1 >= 0.0);
            prop_assert!(vanishing_drift_pair(0.5, 1.0, 1e-6, &mut s).unwrap().1 >= 0.0);
        }
    }
}
