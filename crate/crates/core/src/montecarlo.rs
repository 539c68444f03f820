//! Event-driven simulation of the true status and the tracker's estimate.
//!
//! All holding times are exponential, so after every event each active clock
//! is simply redrawn and the earliest one fires. This relies on
//! memorylessness: non-exponential holding times would need a proper event
//! calendar instead.
//!
//! Time averages are reported with batch-means standard errors: the window
//! after the warm-up is split into equal consecutive batches and the spread
//! of the per-batch averages gives the error bar.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::ctmc::PairParams;
use crate::error::{Error, Result};
use crate::metrics::Theta;
use crate::model::{ErrorModel, PersonParams, TestPolicy};

pub const DEFAULT_BATCHES: usize = 20;
pub const DEFAULT_WARMUP_FRACTION: f64 = 0.01;

/// Deterministic generator for `(seed, stream)`. Independent runs of one
/// experiment share the seed and differ by stream, so results do not depend
/// on the order in which runs are scheduled.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub horizon: f64,
    pub warmup: f64,
    pub seed: u64,
    pub stream: u64,
    pub batches: usize,
}

impl SimConfig {
    /// Warm-up of 1% of the horizon and 20 batches.
    pub fn new(horizon: f64, seed: u64) -> Result<Self> {
        let cfg = Self {
            horizon,
            warmup: DEFAULT_WARMUP_FRACTION * horizon,
            seed,
            stream: 0,
            batches: DEFAULT_BATCHES,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn with_warmup(mut self, warmup: f64) -> Result<Self> {
        self.warmup = warmup;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::param(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.warmup >= 0.0 && self.warmup < self.horizon) {
            return Err(Error::param(format!(
                "warm-up must lie in [0, horizon), got {} for horizon {}",
                self.warmup, self.horizon
            )));
        }
        if self.batches < 2 {
            return Err(Error::param("at least two batches are needed for a standard error"));
        }
        Ok(())
    }
}

/// Empirical time average with its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub batches: usize,
}

impl SimEstimate {
    /// `|mean - reference| <= max(k * std_error, floor)`.
    pub fn agrees_with(&self, reference: f64, k: f64, floor: f64) -> bool {
        (self.mean - reference).abs() <= (k * self.std_error).max(floor)
    }
}

/// Integrals of a piecewise-affine path over consecutive equal batches of
/// `[start, end)`.
#[derive(Debug, Clone)]
pub struct BatchIntegrals {
    start: f64,
    end: f64,
    width: f64,
    sums: Vec<f64>,
}

impl BatchIntegrals {
    pub fn new(start: f64, end: f64, batches: usize) -> Self {
        Self {
            start,
            end,
            width: (end - start) / batches as f64,
            sums: vec![0.0; batches],
        }
    }

    /// Adds `∫ (value0 + slope (t - t0)) dt` over `[t0, t1]`, clipped to the
    /// window and split at batch boundaries.
    pub fn add_affine(&mut self, t0: f64, t1: f64, value0: f64, slope: f64) {
        let lo = t0.max(self.start);
        let hi = t1.min(self.end);
        if hi <= lo {
            return;
        }
        let last = self.sums.len() - 1;
        let mut k = (((lo - self.start) / self.width) as usize).min(last);
        let mut a = lo;
        while a < hi {
            let b = if k == last {
                hi
            } else {
                hi.min(self.start + (k + 1) as f64 * self.width)
            };
            let (da, db) = (a - t0, b - t0);
            self.sums[k] += (b - a) * value0 + 0.5 * slope * (db * db - da * da);
            a = b;
            k = (k + 1).min(last);
        }
    }

    pub fn add_constant(&mut self, t0: f64, t1: f64, value: f64) {
        self.add_affine(t0, t1, value, 0.0);
    }

    pub fn batch_means(&self) -> Vec<f64> {
        self.sums.iter().map(|s| s / self.width).collect()
    }

    pub fn estimate(&self) -> SimEstimate {
        estimate_from_batches(&self.batch_means())
    }

    /// Estimate of `Σ w_k · path_k`, with the error bar computed from the
    /// combined per-batch averages.
    pub fn combine(parts: &[(&BatchIntegrals, f64)]) -> SimEstimate {
        let nb = parts[0].0.sums.len();
        let means: Vec<f64> = (0..nb)
            .map(|k| parts.iter().map(|(b, w)| w * b.sums[k] / b.width).sum())
            .collect();
        estimate_from_batches(&means)
    }
}

fn estimate_from_batches(means: &[f64]) -> SimEstimate {
    let n = means.len() as f64;
    let mean = means.iter().sum::<f64>() / n;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0);
    SimEstimate {
        mean,
        std_error: (var / n).sqrt(),
        batches: means.len(),
    }
}

/// Which time average the simulator accumulates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimMetric {
    /// Mismatch indicators, weighted by `theta` in `weighted`.
    RealTime { theta: Theta },
    /// Age of incorrect information: time since the estimate was last right.
    Aoii,
}

/// Simulated components for one person.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersonSim {
    /// Infected but marked healthy.
    pub first: SimEstimate,
    /// Healthy but marked infected.
    pub second: SimEstimate,
    /// `first + second`.
    pub total: SimEstimate,
    /// `theta·first + (1-theta)·second` for the real-time metric; equals
    /// `total` for AoII.
    pub weighted: SimEstimate,
}

/// Single-person path accumulator. It holds the current `(x, x̂)` and the
/// start of the current mismatch, and integrates the metric as time
/// advances.
#[derive(Debug, Clone)]
pub struct PathTracker {
    metric: SimMetric,
    now: f64,
    infected: bool,
    marked: bool,
    mismatch_since: Option<f64>,
    first: BatchIntegrals,
    second: BatchIntegrals,
}

impl PathTracker {
    pub fn new(metric: SimMetric, cfg: &SimConfig, infected: bool, marked: bool) -> Self {
        Self {
            metric,
            now: 0.0,
            infected,
            marked,
            mismatch_since: (infected != marked).then_some(0.0),
            first: BatchIntegrals::new(cfg.warmup, cfg.horizon, cfg.batches),
            second: BatchIntegrals::new(cfg.warmup, cfg.horizon, cfg.batches),
        }
    }

    pub fn state(&self) -> (bool, bool) {
        (self.infected, self.marked)
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Integrates the current state over `[now, t]`.
    pub fn advance_to(&mut self, t: f64) {
        debug_assert!(t >= self.now);
        if let Some(since) = self.mismatch_since {
            let sink = if self.infected { &mut self.first } else { &mut self.second };
            match self.metric {
                SimMetric::RealTime { .. } => sink.add_constant(self.now, t, 1.0),
                SimMetric::Aoii => sink.add_affine(self.now, t, self.now - since, 1.0),
            }
        }
        self.now = t;
    }

    /// Applies a state change at the current time.
    pub fn set_state(&mut self, infected: bool, marked: bool) {
        let was_wrong = self.infected != self.marked;
        self.infected = infected;
        self.marked = marked;
        match (was_wrong, infected != marked) {
            (false, true) => self.mismatch_since = Some(self.now),
            (_, false) => self.mismatch_since = None,
            (true, true) => {}
        }
    }

    pub fn finish(&self) -> PersonSim {
        let first = self.first.estimate();
        let second = self.second.estimate();
        let total = BatchIntegrals::combine(&[(&self.first, 1.0), (&self.second, 1.0)]);
        let weighted = match self.metric {
            SimMetric::RealTime { theta } => BatchIntegrals::combine(&[
                (&self.first, theta.value()),
                (&self.second, theta.complement()),
            ]),
            SimMetric::Aoii => total,
        };
        PersonSim {
            first,
            second,
            total,
            weighted,
        }
    }
}

#[inline]
fn exp_time<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    if rate > 0.0 {
        let e: f64 = rng.sample(Exp1);
        e / rate
    } else {
        f64::INFINITY
    }
}

/// Simulates one person under `policy` with test errors `error`.
pub fn simulate_person(
    person: &PersonParams,
    policy: &TestPolicy,
    error: &ErrorModel,
    metric: SimMetric,
    cfg: &SimConfig,
) -> Result<PersonSim> {
    cfg.validate()?;
    if matches!(metric, SimMetric::Aoii) && matches!(policy, TestPolicy::Pair { .. }) {
        return Err(Error::param("the AoII simulation expects a single-rate or untested policy"));
    }
    let mut rng = stream_rng(cfg.seed, cfg.stream);
    let initial_mark = policy.constant_estimate().map(|e| e.bit() == 1).unwrap_or(false);
    let mut path = PathTracker::new(metric, cfg, false, initial_mark);
    let mark_of = |m: bool| crate::model::Estimate::from_bit(m as u8);

    while path.now() < cfg.horizon {
        let (x, xhat) = path.state();
        let flip_rate = if x { person.mu() } else { person.lambda() };
        let test_rate = policy.rate_when_marked(mark_of(xhat));
        let t_flip = exp_time(&mut rng, flip_rate);
        let t_test = exp_time(&mut rng, test_rate);
        let dt = t_flip.min(t_test);
        let next = (path.now() + dt).min(cfg.horizon);
        path.advance_to(next);
        if next >= cfg.horizon {
            break;
        }
        if t_flip <= t_test {
            path.set_state(!x, xhat);
        } else {
            let wrong = error.flip_probability(x);
            let reported = if wrong > 0.0 && rng.random::<f64>() < wrong { !x } else { x };
            path.set_state(x, reported);
        }
    }
    Ok(path.finish())
}

/// Simulated occupancies and mismatch components of the coupled pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSim {
    pub p_one_infected: SimEstimate,
    pub p_two_infected: SimEstimate,
    pub p_both_infected: SimEstimate,
    /// `[Δ11, Δ12, Δ21, Δ22]`: person `i` infected-but-marked-healthy and
    /// healthy-but-marked-infected.
    pub errors: [SimEstimate; 4],
}

pub fn simulate_pair(params: &PairParams, cfg: &SimConfig) -> Result<PairSim> {
    params.validate()?;
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, cfg.stream);
    let mut acc: Vec<BatchIntegrals> = (0..7)
        .map(|_| BatchIntegrals::new(cfg.warmup, cfg.horizon, cfg.batches))
        .collect();
    let mut state: [(u8, u8); 2] = [(0, 0), (0, 0)];
    let mut now = 0.0;

    while now < cfg.horizon {
        // Four clocks: a status change and an effective test per person.
        let mut best = (f64::INFINITY, 0usize);
        for me in 0..2 {
            let (x, xhat) = state[me];
            let flip_rate = if x == 0 { params.infection_rate(state, me) } else { params.mu };
            let test_rate = if x != xhat { params.test_rate(xhat) } else { 0.0 };
            for (k, rate) in [(2 * me, flip_rate), (2 * me + 1, test_rate)] {
                let t = exp_time(&mut rng, rate);
                if t < best.0 {
                    best = (t, k);
                }
            }
        }
        let next = (now + best.0).min(cfg.horizon);
        let [(x1, h1), (x2, h2)] = state;
        let indicators = [
            x1 == 1,
            x2 == 1,
            x1 == 1 && x2 == 1,
            x1 == 1 && h1 == 0,
            x1 == 0 && h1 == 1,
            x2 == 1 && h2 == 0,
            x2 == 0 && h2 == 1,
        ];
        for (a, on) in acc.iter_mut().zip(indicators) {
            if on {
                a.add_constant(now, next, 1.0);
            }
        }
        now = next;
        if now >= cfg.horizon {
            break;
        }
        let me = best.1 / 2;
        if best.1 % 2 == 0 {
            state[me].0 ^= 1;
        } else {
            state[me].1 = state[me].0;
        }
    }

    let e: Vec<SimEstimate> = acc.iter().map(BatchIntegrals::estimate).collect();
    Ok(PairSim {
        p_one_infected: e[0],
        p_two_infected: e[1],
        p_both_infected: e[2],
        errors: [e[3], e[4], e[5], e[6]],
    })
}
