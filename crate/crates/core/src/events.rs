//! Barrier-hitting and minimum events on mesh paths and on their continuous
//! interpolation, and the normalized error triplets built from them.
//!
//! Conventions:
//! - the grid hitting index is the first `k` with `B(k/n) >= b(k/n)`;
//! - the grid argmin is the first index attaining the minimum;
//! - `NoHit` (an empty infimum) is `None`, never an error.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, invalid, Error, Result};
use crate::paths::{
    bridge_argmin_time, bridge_cross_prob_linear, bridge_min_from_exp, sample_bm_grid, BarrierSpec,
    PathGrid,
};
use crate::rng::Stream;

/// Guard on the number of excursions in the event-driven samplers.
pub const MAX_EXCURSIONS: u64 = 1_000_000_000;

/// Above this many mesh steps the fractional part of an f64 time is no
/// longer resolved; a fresh uniform stands in for it. The fractional part of
/// such a spread-out continuous variable is uniform up to a negligible error.
const FRACTION_RESOLUTION_LIMIT: f64 = (1u64 << 40) as f64;

/// Normalized discretization errors of one path:
/// `(n (t_grid - t_cont), sqrt(n) (x_grid - x_cont), ceil(n t_cont) - n t_cont)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorTriplet {
    pub time_err: f64,
    pub pos_err: f64,
    pub frac: f64,
}

/// Grid and continuous barrier-hitting times of one coupled path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HitRecord {
    pub tau_n: f64,
    pub value_n: f64,
    pub tau_cont: f64,
    pub value_cont: f64,
}

/// Grid and continuous minima of one coupled path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinRecord {
    pub grid_index: usize,
    pub grid_value: f64,
    pub cont_time: f64,
    pub cont_value: f64,
}

impl MinRecord {
    /// Error triplet for a mesh of `n` points per unit time.
    pub fn triplet(&self, n: f64) -> ErrorTriplet {
        let scaled = n * self.cont_time;
        ErrorTriplet {
            time_err: self.grid_index as f64 - scaled,
            pos_err: n.sqrt() * (self.grid_value - self.cont_value),
            frac: scaled.ceil() - scaled,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridHit {
    pub index: usize,
    pub time: f64,
    pub value: f64,
}

/// First mesh point (after time 0) where the path weakly exceeds the barrier.
pub fn detect_hit_grid(p: &PathGrid, b: &BarrierSpec) -> Option<GridHit> {
    p.values()
        .iter()
        .enumerate()
        .skip(1)
        .find(|&(k, &x)| x >= b.value(p.time(k)))
        .map(|(index, &value)| GridHit {
            index,
            time: p.time(index),
            value,
        })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HitLocation {
    pub time: f64,
    pub value: f64,
}

/// Continuous first-passage time of the Brownian interpolation of `p` over
/// `b`.
///
/// Intervals are scanned left to right. In each, a crossing of the chord of
/// the barrier is decided with the exact bridge crossing probability; a
/// crossing interval is then bisected with bridge midpoints down to
/// `depth` levels, resampling until a half that crosses is found. For
/// constant barriers the only approximation is the leaf width
/// `step / 2^depth`; curved barriers add the chord error.
pub fn locate_hit_continuous(
    p: &PathGrid,
    b: &BarrierSpec,
    depth: u32,
    s: &mut Stream,
) -> Result<Option<HitLocation>> {
    ensure(depth <= 40, || format!("bisection depth {depth} is unreasonably large"))?;
    let mut search = CrossingSearch {
        barrier: b,
        sigma: p.sigma(),
        max_depth: depth,
        s,
    };
    for (k, w) in p.values().windows(2).enumerate() {
        let (t0, t1) = (p.time(k), p.time(k + 1));
        if let Some(t) = search.unconditioned(t0, w[0], t1, w[1], 0) {
            return Ok(Some(HitLocation {
                time: t,
                value: b.value(t),
            }));
        }
    }
    Ok(None)
}

struct CrossingSearch<'a> {
    barrier: &'a BarrierSpec,
    sigma: f64,
    max_depth: u32,
    s: &'a mut Stream,
}

impl CrossingSearch<'_> {
    /// First crossing time inside `[t0, t1]`, or `None` with the exact
    /// no-crossing probability.
    fn unconditioned(&mut self, t0: f64, x0: f64, t1: f64, x1: f64, depth: u32) -> Option<f64> {
        let (b0, b1) = (self.barrier.value(t0), self.barrier.value(t1));
        let p = bridge_cross_prob_linear(x0, x1, t1 - t0, b0, b1, self.sigma);
        if p <= 0.0 || (p < 1.0 && self.s.uniform() >= p) {
            return None;
        }
        if depth == self.max_depth {
            return Some(leaf_time(t0, x0 - b0, t1, x1 - b1));
        }
        // Conditioned on a crossing: rejection over fresh midpoints.
        let half_sd = 0.5 * self.sigma * (t1 - t0).sqrt();
        loop {
            let tm = 0.5 * (t0 + t1);
            let xm = 0.5 * (x0 + x1) + half_sd * self.s.std_normal();
            if let Some(t) = self.unconditioned(t0, x0, tm, xm, depth + 1) {
                return Some(t);
            }
            if let Some(t) = self.unconditioned(tm, xm, t1, x1, depth + 1) {
                return Some(t);
            }
        }
    }
}

/// Crossing time inside a leaf: the chord crossing when the right end is at
/// or above the barrier, otherwise the leaf midpoint.
fn leaf_time(t0: f64, gap0: f64, t1: f64, gap1: f64) -> f64 {
    if gap0 >= 0.0 {
        return t0;
    }
    if gap1 >= 0.0 {
        let lambda = -gap0 / (gap1 - gap0);
        return (t0 + lambda * (t1 - t0)).min(t1);
    }
    0.5 * (t0 + t1)
}

/// Hitting record of a mesh path. `None` if either the grid or the
/// continuous path fails to hit within the path's horizon.
pub fn hit_record(p: &PathGrid, b: &BarrierSpec, depth: u32, s: &mut Stream) -> Result<Option<HitRecord>> {
    let Some(grid) = detect_hit_grid(p, b) else {
        return Ok(None);
    };
    let Some(cont) = locate_hit_continuous(p, b, depth, s)? else {
        return Ok(None);
    };
    Ok(Some(HitRecord {
        tau_n: grid.time,
        value_n: grid.value,
        tau_cont: cont.time,
        value_cont: cont.value,
    }))
}

impl HitRecord {
    pub fn triplet(&self, n: f64) -> ErrorTriplet {
        let scaled = n * self.tau_cont;
        ErrorTriplet {
            time_err: n * self.tau_n - scaled,
            pos_err: n.sqrt() * (self.value_n - self.value_cont),
            frac: scaled.ceil() - scaled,
        }
    }
}

/// Drift and volatility of the underlying Brownian motion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmParams {
    pub mu: f64,
    pub sigma: f64,
}

/// Hit error triplet from one path simulated on `[0, horizon]` with mesh
/// `1/n`. `Ok(None)` means no hit on the horizon; callers count discards.
pub fn error_triplet_hit(
    n: u32,
    b: &BarrierSpec,
    params: BmParams,
    horizon: f64,
    depth: u32,
    s: &mut Stream,
) -> Result<Option<(HitRecord, ErrorTriplet)>> {
    let p = sample_bm_grid(params.mu, params.sigma, n, horizon, s)?;
    Ok(hit_record(&p, b, depth, s)?.map(|r| (r, r.triplet(n as f64))))
}

/// Exact hit sample for a constant barrier, without a horizon.
///
/// Strong Markov property: between mesh points the path either stays below
/// the barrier or first touches it at a first-passage time, which is
/// IG/Lévy distributed from the current deficit. So the sampler alternates
/// "first passage from the current mesh value" and "Gaussian step to the
/// next mesh point" until a mesh value lands at or above the barrier. The
/// first passage from time 0 is the continuous hitting time itself.
pub fn hit_constant_exact(
    n: u32,
    level: f64,
    params: BmParams,
    s: &mut Stream,
) -> Result<(HitRecord, ErrorTriplet)> {
    ensure(n >= 1, || "mesh resolution n must be >= 1".into())?;
    ensure(level > 0.0 && level.is_finite(), || format!("barrier must be > 0, got {level}"))?;
    ensure(params.sigma > 0.0, || format!("sigma must be > 0, got {}", params.sigma))?;
    ensure(params.mu >= 0.0, || {
        format!("drift must be >= 0 so the barrier is hit a.s., got {}", params.mu)
    })?;
    let nf = n as f64;
    let dt = 1.0 / nf;
    let mut deficit = level;
    let mut first_passage = None;
    let mut time_err = 0.0;
    for _ in 0..MAX_EXCURSIONS {
        let q = s.first_passage_time(deficit, params.mu, params.sigma) * nf;
        let (steps, frac) = if q < FRACTION_RESOLUTION_LIMIT {
            let c = q.ceil();
            (c, c - q)
        } else {
            let u = s.uniform();
            (q + u, u)
        };
        let excess = if frac > 0.0 {
            params.mu * frac * dt + params.sigma * (frac * dt).sqrt() * s.std_normal()
        } else {
            0.0
        };
        match first_passage {
            None => {
                first_passage = Some((q, frac, steps));
                time_err = frac;
            }
            Some(_) => time_err += steps,
        }
        if excess >= 0.0 {
            let (q1, frac1, steps1) = first_passage.expect("set above");
            let tau_cont = q1 * dt;
            let tau_n = (steps1 + (time_err - frac1)) * dt;
            let record = HitRecord {
                tau_n,
                value_n: level + excess,
                tau_cont,
                value_cont: level,
            };
            let triplet = ErrorTriplet {
                time_err,
                pos_err: nf.sqrt() * excess,
                frac: frac1,
            };
            return Ok((record, triplet));
        }
        deficit = -excess;
    }
    Err(Error::Internal(format!("hit sampler exceeded {MAX_EXCURSIONS} excursions")))
}

/// First index attaining the minimum over `window`.
pub fn grid_argmin(p: &PathGrid, window: std::ops::Range<usize>) -> Result<(usize, f64)> {
    ensure(!window.is_empty(), || "argmin window is empty".into())?;
    if window.end > p.len() {
        return Err(Error::IndexOutOfRange {
            index: window.end - 1,
            len: p.len(),
        });
    }
    let start = window.start;
    let (k, v) = p.values()[window]
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc });
    Ok((start + k, v))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContinuousMin {
    pub time: f64,
    pub value: f64,
    /// Mesh interval `[k, k+1]` containing the minimum.
    pub interval: usize,
}

/// Intervals whose bridge minimum undercuts the grid minimum with
/// probability below `exp(-SCREEN_LEVEL)` are skipped without a draw.
const SCREEN_LEVEL: f64 = 50.0;

/// Minimum of the Brownian interpolation of `p` and the time it is
/// attained.
///
/// An interval's bridge minimum falls below the grid minimum `g` with
/// probability `exp(-L)`, `L = 2 (x0-g)(x1-g) / (sigma^2 dt)`. Intervals
/// with `L < SCREEN_LEVEL` get an exponential draw `E` that fixes their
/// bridge minimum by inversion, and the square root is only taken when
/// `L < E`. The intervals next to the grid minimum always qualify. The time inside the winning interval comes from the
/// exact bridge argmin law.
pub fn continuous_min(p: &PathGrid, s: &mut Stream) -> ContinuousMin {
    let values = p.values();
    let dt = p.step();
    let sigma = p.sigma();
    if values.len() == 1 {
        return ContinuousMin {
            time: 0.0,
            value: values[0],
            interval: 0,
        };
    }
    if sigma == 0.0 {
        let (k, v) = grid_argmin(p, 0..p.len()).expect("nonempty path");
        return ContinuousMin {
            time: p.time(k),
            value: v,
            interval: k.min(p.len() - 2),
        };
    }
    let g = values.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = 2.0 / (sigma * sigma * dt);
    let mut best = (f64::INFINITY, 0usize);
    for (k, w) in values.windows(2).enumerate() {
        let level = scale * (w[0] - g) * (w[1] - g);
        if level >= SCREEN_LEVEL {
            continue;
        }
        let e = s.exp1();
        if level < e {
            let m = bridge_min_from_exp(w[0], w[1], dt, sigma, e).min(w[0]).min(w[1]);
            if m < best.0 {
                best = (m, k);
            }
        }
    }
    let (value, k) = best;
    let theta = bridge_argmin_time(values[k], values[k + 1], value, dt, sigma, s);
    ContinuousMin {
        time: p.time(k) + theta,
        value,
        interval: k,
    }
}

/// Grid and continuous minima of the whole path.
pub fn min_record(p: &PathGrid, s: &mut Stream) -> MinRecord {
    let (grid_index, grid_value) = grid_argmin(p, 0..p.len()).expect("nonempty path");
    let cont = continuous_min(p, s);
    MinRecord {
        grid_index,
        grid_value,
        cont_time: cont.time,
        cont_value: cont.value,
    }
}

/// Minimum error triplet on `[0, a]` with mesh `1/n`.
pub fn error_triplet_min(a: f64, n: u32, params: BmParams, s: &mut Stream) -> Result<ErrorTriplet> {
    let p = sample_bm_grid(params.mu, params.sigma, n, a, s)?;
    Ok(min_record(&p, s).triplet(n as f64))
}

/// Running-gap level beyond which a drift-`mu` path returns below its
/// running minimum with probability at most `eps`.
pub fn truncation_gap(mu: f64, sigma: f64, eps: f64) -> f64 {
    sigma * sigma / (2.0 * mu) * (1.0 / eps).ln()
}

/// Path with positive drift extended until it sits `truncation_gap` above
/// its running minimum. Returns the path and its last index.
pub fn global_min_truncated(
    mu: f64,
    sigma: f64,
    n: u32,
    eps: f64,
    s: &mut Stream,
) -> Result<(PathGrid, usize)> {
    ensure(mu > 0.0, || format!("global minimum needs drift > 0, got {mu}"))?;
    ensure(sigma >= 0.0, || format!("sigma must be >= 0, got {sigma}"))?;
    ensure(eps > 0.0 && eps < 1.0, || format!("eps must be in (0,1), got {eps}"))?;
    ensure(n >= 1, || "mesh resolution n must be >= 1".into())?;
    let dt = 1.0 / n as f64;
    let gap = truncation_gap(mu, sigma, eps);
    let drift = mu * dt;
    let vol = sigma * dt.sqrt();
    let mut values = vec![0.0];
    let mut x: f64 = 0.0;
    let mut running = 0.0f64;
    loop {
        x += drift + vol * s.std_normal();
        values.push(x);
        running = running.min(x);
        if x - running >= gap {
            break;
        }
    }
    let stop = values.len() - 1;
    Ok((PathGrid::new(dt, values, mu, sigma)?, stop))
}

/// Global-minimum error triplet on the truncated infinite horizon.
pub fn error_triplet_globalmin(mu: f64, sigma: f64, n: u32, eps: f64, s: &mut Stream) -> Result<ErrorTriplet> {
    ensure(sigma > 0.0, || format!("sigma must be > 0, got {sigma}"))?;
    let (p, _) = global_min_truncated(mu, sigma, n, eps, s)?;
    Ok(min_record(&p, s).triplet(n as f64))
}

/// A path recentred at `(center_time, center_value)` and rescaled by
/// `scale` in time and `sqrt(scale)` in space, read at the mesh points.
///
/// Mesh point `k` sits at offset `k - scale * center_time`, which is
/// `u + (k - ceil(scale * center_time))` with
/// `u = ceil(scale * center_time) - scale * center_time`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZoomedProcess {
    pub center_time: f64,
    pub scale: f64,
    /// Offset of mesh point 0 relative to the center, in zoomed units.
    pub first_offset: f64,
    pub u: f64,
    /// Index of the first mesh point at offset `>= 0`, i.e. `k = 0` in
    /// `u + k`.
    pub zero_index: usize,
    pub values: Vec<f64>,
}

impl ZoomedProcess {
    pub fn around(p: &PathGrid, center_time: f64, center_value: f64) -> Self {
        let scale = 1.0 / p.step();
        let scaled = scale * center_time;
        let ceil = scaled.ceil();
        let root = scale.sqrt();
        Self {
            center_time,
            scale,
            first_offset: -scaled,
            u: ceil - scaled,
            zero_index: ceil as usize,
            values: p.values().iter().map(|x| root * (x - center_value)).collect(),
        }
    }

    /// Zoomed value at offset `u + k`, if inside the path.
    pub fn at(&self, k: i64) -> Option<f64> {
        let idx = self.zero_index as i64 + k;
        (idx >= 0).then(|| self.values.get(idx as usize).copied()).flatten()
    }

    /// Range of `k` available in `u + k`.
    pub fn k_range(&self) -> std::ops::RangeInclusive<i64> {
        let lo = -(self.zero_index as i64);
        lo..=(self.values.len() as i64 - 1 + lo)
    }

    pub fn offset(&self, k: i64) -> f64 {
        self.u + k as f64
    }
}

/// `(u + k*, f(u + k*))` with `k* = min{k >= 0 : f(u+k) > g(u+k)}`; `None`
/// when no available `k` qualifies.
pub fn apply_error_mapping_hit(
    u: f64,
    zoomed: &ZoomedProcess,
    zoomed_barrier: impl Fn(f64) -> f64,
) -> Option<(f64, f64)> {
    (0..=*zoomed.k_range().end()).find_map(|k| {
        let f = zoomed.at(k)?;
        let offset = u + k as f64;
        (f > zoomed_barrier(offset)).then_some((offset, f))
    })
}

/// `(u + argmin_k f(u+k), min_k f(u+k))` over every available `k`, first
/// index on ties.
pub fn apply_error_mapping_min(u: f64, zoomed: &ZoomedProcess) -> Result<(f64, f64)> {
    let (k, v) = zoomed
        .k_range()
        .filter_map(|k| zoomed.at(k).map(|v| (k, v)))
        .fold((None, f64::INFINITY), |acc, (k, v)| if v < acc.1 { (Some(k), v) } else { acc });
    let k = k.ok_or_else(|| invalid("zoomed process has no values"))?;
    Ok((u + k as f64, v))
}
