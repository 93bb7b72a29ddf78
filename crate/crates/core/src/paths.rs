//! Brownian paths on regular meshes, Brownian-bridge refinement and exact
//! bridge laws, Bessel(3) sampling, and the reflection / busy-period maps.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::error::{ensure, invalid, Error, Result};
use crate::rng::Stream;

/// A process sampled on the regular mesh `{0, step, 2 step, ...}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathGrid {
    step: f64,
    values: Vec<f64>,
    mu: f64,
    sigma: f64,
}

impl PathGrid {
    pub fn new(step: f64, values: Vec<f64>, mu: f64, sigma: f64) -> Result<Self> {
        ensure(step > 0.0 && step.is_finite(), || format!("mesh step must be > 0, got {step}"))?;
        ensure(!values.is_empty(), || "path needs at least one value".into())?;
        ensure(values[0] == 0.0, || format!("path must start at 0, got {}", values[0]))?;
        ensure(sigma >= 0.0, || format!("sigma must be >= 0, got {sigma}"))?;
        Ok(Self {
            step,
            values,
            mu,
            sigma,
        })
    }

    /// The deterministic path `t -> mu t` on the mesh `k/n` (a `sigma = 0`
    /// test fixture).
    pub fn drift_line(mu: f64, n: u32, horizon: f64) -> Result<Self> {
        let steps = mesh_points(n, horizon)?;
        let values = (0..=steps).map(|k| mu * k as f64 / n as f64).collect();
        Self::new(1.0 / n as f64, values, mu, 0.0)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }

    /// CSV dump with a `time,value` header and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,value")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(w, "{:.16e},{:.16e}", self.time(k), v)?;
        }
        Ok(())
    }
}

fn mesh_points(n: u32, horizon: f64) -> Result<usize> {
    ensure(n >= 1, || "mesh resolution n must be >= 1".into())?;
    ensure(horizon > 0.0 && horizon.is_finite(), || {
        format!("horizon must be > 0, got {horizon}")
    })?;
    let steps = (n as f64 * horizon).ceil();
    ensure(steps >= 1.0, || format!("n * horizon must be >= 1, got {}", n as f64 * horizon))?;
    Ok(steps as usize)
}

/// Brownian motion with drift `mu` and volatility `sigma` at the mesh points
/// `k/n`, `k = 0..=ceil(n horizon)`.
pub fn sample_bm_grid(mu: f64, sigma: f64, n: u32, horizon: f64, s: &mut Stream) -> Result<PathGrid> {
    ensure(sigma > 0.0, || format!("sigma must be > 0, got {sigma}"))?;
    let steps = mesh_points(n, horizon)?;
    let dt = 1.0 / n as f64;
    let drift = mu * dt;
    let vol = sigma * dt.sqrt();
    let mut values = Vec::with_capacity(steps + 1);
    let mut x = 0.0;
    values.push(x);
    for _ in 0..steps {
        x += drift + vol * s.std_normal();
        values.push(x);
    }
    PathGrid::new(dt, values, mu, sigma)
}

/// Splits every interval `2^depth` times by recursive bridge midpoints.
/// The original values are copied unchanged into every `2^depth`-th slot.
pub fn refine_bridge(p: &PathGrid, depth: u32, s: &mut Stream) -> Result<PathGrid> {
    ensure(depth >= 1, || "refinement depth must be >= 1".into())?;
    ensure(depth <= 30, || format!("refinement depth {depth} is unreasonably large"))?;
    let mut values = p.values.clone();
    let mut step = p.step;
    for _ in 0..depth {
        let sd = 0.5 * p.sigma * step.sqrt();
        let mut next = Vec::with_capacity(2 * values.len() - 1);
        for w in values.windows(2) {
            next.push(w[0]);
            next.push(0.5 * (w[0] + w[1]) + sd * s.std_normal());
        }
        next.push(*values.last().expect("nonempty"));
        values = next;
        step *= 0.5;
    }
    PathGrid::new(step, values, p.mu, p.sigma)
}

/// Probability that a Brownian bridge from `x0` to `x1` over time `delta`
/// reaches `level`.
pub fn bridge_cross_prob(x0: f64, x1: f64, delta: f64, level: f64, sigma: f64) -> f64 {
    bridge_cross_prob_linear(x0, x1, delta, level, level, sigma)
}

/// Probability that a Brownian bridge from `x0` to `x1` over time `delta`
/// reaches the straight line from `level0` to `level1`.
pub fn bridge_cross_prob_linear(x0: f64, x1: f64, delta: f64, level0: f64, level1: f64, sigma: f64) -> f64 {
    if x0 >= level0 || x1 >= level1 {
        return 1.0;
    }
    if sigma == 0.0 {
        return 0.0;
    }
    (-2.0 * (level0 - x0) * (level1 - x1) / (sigma * sigma * delta)).exp()
}

/// Bridge minimum by inversion of `P(m <= z) = exp(-2 (x0-z)(x1-z) / (sigma^2 delta))`,
/// given `e = -ln V`.
#[inline]
pub fn bridge_min_from_exp(x0: f64, x1: f64, delta: f64, sigma: f64, e: f64) -> f64 {
    let d = x0 - x1;
    0.5 * ((x0 + x1) - (d * d + 2.0 * sigma * sigma * delta * e).sqrt())
}

/// Exact draw of the minimum of a Brownian bridge from `x0` to `x1` over
/// time `delta`. Always `<= min(x0, x1)`.
pub fn bridge_min_sample(x0: f64, x1: f64, delta: f64, sigma: f64, s: &mut Stream) -> f64 {
    let m = bridge_min_from_exp(x0, x1, delta, sigma, s.exp1());
    m.min(x0).min(x1)
}

/// Exact draw of the time (measured from the left end) at which a Brownian
/// bridge from `x0` to `x1` over `delta` attains a given minimum `m`.
///
/// With endpoints shifted and scaled so the bridge starts at 0 and
/// `c1 = (b-m)^2 / 2 delta`, `c2 = m^2 / 2 delta`, the ratio
/// `V = (delta - theta) / theta` is a two-component mixture of
/// IG(sqrt(c1/c2), 2 c1) and the reciprocal of IG(sqrt(c2/c1), 2 c2).
pub fn bridge_argmin_time(x0: f64, x1: f64, m: f64, delta: f64, sigma: f64, s: &mut Stream) -> f64 {
    let left = (x0 - m) / sigma;
    let right = (x1 - m) / sigma;
    if !(left > 0.0) {
        return 0.0;
    }
    if !(right > 0.0) {
        return delta;
    }
    let c1 = right * right / (2.0 * delta);
    let c2 = left * left / (2.0 * delta);
    let ratio = (c1 / c2).sqrt();
    let v = if s.uniform() * (1.0 + ratio) < 1.0 {
        s.inverse_gaussian_unchecked(ratio, 2.0 * c1)
    } else {
        1.0 / s.inverse_gaussian_unchecked(1.0 / ratio, 2.0 * c2)
    };
    (delta / (1.0 + v)).clamp(0.0, delta)
}

/// Bessel(3) values at (possibly negative) offsets.
#[derive(Clone, Debug, PartialEq)]
pub struct BesselGrid {
    pub offsets: Vec<f64>,
    pub values: Vec<f64>,
}

/// One-sided Bessel(3) leg: the norm of a standard 3D Brownian motion at
/// the given sorted nonnegative offsets.
pub fn sample_bessel3_at(offsets: &[f64], s: &mut Stream) -> Result<BesselGrid> {
    if let Some(w) = offsets.windows(2).find(|w| !(w[0] <= w[1])) {
        return Err(invalid(format!("Bessel offsets must be sorted, got {} then {}", w[0], w[1])));
    }
    if let Some(&t) = offsets.first() {
        ensure(t >= 0.0, || format!("Bessel offsets must be >= 0, got {t}"))?;
    }
    let mut pos = [0.0f64; 3];
    let mut t_prev = 0.0;
    let mut values = Vec::with_capacity(offsets.len());
    for &t in offsets {
        let sd = (t - t_prev).sqrt();
        if sd > 0.0 {
            for c in &mut pos {
                *c += sd * s.std_normal();
            }
        }
        t_prev = t;
        values.push((pos[0] * pos[0] + pos[1] * pos[1] + pos[2] * pos[2]).sqrt());
    }
    Ok(BesselGrid {
        offsets: offsets.to_vec(),
        values,
    })
}

/// Two-sided Bessel(3) process: independent legs for the negative and
/// positive offsets, glued at 0. Output offsets are sorted ascending.
pub fn sample_bessel3_two_sided(offsets: &[f64], s: &mut Stream) -> Result<BesselGrid> {
    if let Some(w) = offsets.windows(2).find(|w| !(w[0] <= w[1])) {
        return Err(invalid(format!("Bessel offsets must be sorted, got {} then {}", w[0], w[1])));
    }
    let split = offsets.partition_point(|&t| t < 0.0);
    let neg: Vec<f64> = offsets[..split].iter().rev().map(|t| -t).collect();
    let left = sample_bessel3_at(&neg, s)?;
    let right = sample_bessel3_at(&offsets[split..], s)?;
    let mut values: Vec<f64> = left.values.into_iter().rev().collect();
    values.extend(right.values);
    Ok(BesselGrid {
        offsets: offsets.to_vec(),
        values,
    })
}

/// Reflection map: `X(t) - min_{s <= t} X(s)` at every mesh point.
pub fn reflect(p: &PathGrid) -> PathGrid {
    let mut running = f64::INFINITY;
    let values = p
        .values
        .iter()
        .map(|&x| {
            running = running.min(x);
            x - running
        })
        .collect();
    PathGrid {
        values,
        ..p.clone()
    }
}

/// Busy-period map at mesh index `t_index`: time elapsed since the last mesh
/// point at which the path sat at its running minimum.
pub fn busy_period(p: &PathGrid, t_index: usize) -> Result<f64> {
    if t_index >= p.len() {
        return Err(Error::IndexOutOfRange {
            index: t_index,
            len: p.len(),
        });
    }
    let mut running = f64::INFINITY;
    let mut last = 0;
    for (k, &x) in p.values[..=t_index].iter().enumerate() {
        if x <= running {
            running = x;
            last = k;
        }
    }
    Ok(p.time(t_index) - p.time(last))
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A deterministic nondecreasing barrier `t -> b(t)` with `b(0) > 0`.
#[derive(Clone)]
pub struct BarrierSpec {
    value: ScalarFn,
    slope: ScalarFn,
    b0: f64,
    constant: bool,
}

impl fmt::Debug for BarrierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BarrierSpec")
            .field("b0", &self.b0)
            .field("constant", &self.constant)
            .finish_non_exhaustive()
    }
}

impl BarrierSpec {
    pub fn new(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        slope: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let b0 = value(0.0);
        ensure(b0 > 0.0 && b0.is_finite(), || format!("barrier must start above 0, got b(0) = {b0}"))?;
        Ok(Self {
            value: Arc::new(value),
            slope: Arc::new(slope),
            b0,
            constant: false,
        })
    }

    pub fn constant(level: f64) -> Result<Self> {
        let mut b = Self::new(move |_| level, |_| 0.0)?;
        b.constant = true;
        Ok(b)
    }

    /// `b0 + rate * t`, `rate >= 0`.
    pub fn linear(b0: f64, rate: f64) -> Result<Self> {
        ensure(rate >= 0.0, || format!("barrier must be nondecreasing, got rate {rate}"))?;
        if rate == 0.0 {
            return Self::constant(b0);
        }
        Self::new(move |t| b0 + rate * t, move |_| rate)
    }

    /// `b0 + c sqrt(1 + t) - c`, a concave barrier with `b'(0) = c/2`.
    pub fn sqrt_growth(b0: f64, c: f64) -> Result<Self> {
        ensure(c >= 0.0, || format!("barrier must be nondecreasing, got c {c}"))?;
        Self::new(move |t| b0 + c * ((1.0 + t).sqrt() - 1.0), move |t| 0.5 * c / (1.0 + t).sqrt())
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        (self.value)(t)
    }

    pub fn slope(&self, t: f64) -> f64 {
        (self.slope)(t)
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    /// Checks monotonicity and a finite derivative on the given times.
    pub fn check_on(&self, times: impl IntoIterator<Item = f64>) -> Result<()> {
        let mut prev: Option<(f64, f64)> = None;
        for t in times {
            let v = self.value(t);
            if let Some((tp, vp)) = prev {
                ensure(v >= vp, || format!("barrier decreases between t={tp} and t={t}"))?;
            }
            if t > 0.0 {
                let d = self.slope(t);
                ensure(d.is_finite(), || format!("barrier derivative not finite at t={t}"))?;
            }
            prev = Some((t, v));
        }
        Ok(())
    }
}
