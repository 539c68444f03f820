//! Domain parameters: individuals, populations, testing policies and test
//! error probabilities.
//!
//! Every person alternates between healthy (`x = 0`) and infected (`x = 1`)
//! with exponential holding times: healthy spells end at rate `lambda`,
//! infected spells at rate `mu`. The tracker keeps an estimate `x̂` that is
//! refreshed only by tests.

use std::fmt;

use crate::error::{Error, Result};

/// Infection rate `lambda` and recovery rate `mu` of one person.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersonParams {
    lambda: f64,
    mu: f64,
}

impl PersonParams {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::param(format!("infection rate must be positive and finite, got {lambda}")));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::param(format!("recovery rate must be positive and finite, got {mu}")));
        }
        Ok(Self { lambda, mu })
    }

    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[inline]
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Long-run fraction of time spent infected, `lambda / (lambda + mu)`.
    #[inline]
    pub fn infected_fraction(&self) -> f64 {
        self.lambda / (self.lambda + self.mu)
    }
}

/// An ordered, non-empty population. Index `i` (0-based here) corresponds to
/// "person i+1" in experiment tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    people: Vec<PersonParams>,
}

impl Population {
    pub fn new(people: Vec<PersonParams>) -> Result<Self> {
        if people.is_empty() {
            return Err(Error::param("population must contain at least one person"));
        }
        Ok(Self { people })
    }

    pub fn people(&self) -> &[PersonParams] {
        &self.people
    }

    pub fn len(&self) -> usize {
        self.people.len()
    }

    pub fn is_empty(&self) -> bool {
        self.people.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PersonParams> {
        self.people.iter()
    }

    pub fn total_lambda(&self) -> f64 {
        self.people.iter().map(|p| p.lambda).sum()
    }

    pub fn total_mu(&self) -> f64 {
        self.people.iter().map(|p| p.mu).sum()
    }
}

impl std::ops::Index<usize> for Population {
    type Output = PersonParams;

    fn index(&self, i: usize) -> &PersonParams {
        &self.people[i]
    }
}

/// The constant estimate used for a person who is never tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimate {
    Healthy,
    Infected,
}

impl Estimate {
    pub fn bit(self) -> u8 {
        match self {
            Estimate::Healthy => 0,
            Estimate::Infected => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            Estimate::Healthy
        } else {
            Estimate::Infected
        }
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bit())
    }
}

/// Per-person Poisson testing policy.
///
/// `Pair` tests at rate `s` while the person is marked healthy and `c` while
/// marked infected; `Single` uses one rate regardless of the mark. A person
/// with no testing at all is `Untested` and carries the constant estimate the
/// tracker reports for them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestPolicy {
    Pair { s: f64, c: f64 },
    Single { rate: f64 },
    Untested { estimate: Estimate },
}

fn check_rate(name: &str, r: f64) -> Result<()> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::param(format!("{name} must be finite and non-negative, got {r}")));
    }
    Ok(())
}

impl TestPolicy {
    /// A mark-dependent policy. At least one rate must be positive; use
    /// [`TestPolicy::Untested`] for persons who are never tested.
    pub fn pair(s: f64, c: f64) -> Result<Self> {
        check_rate("s", s)?;
        check_rate("c", c)?;
        if s == 0.0 && c == 0.0 {
            return Err(Error::param("both rates are zero; an untested policy needs a constant estimate"));
        }
        Ok(TestPolicy::Pair { s, c })
    }

    pub fn single(rate: f64) -> Result<Self> {
        check_rate("rate", rate)?;
        if rate == 0.0 {
            return Err(Error::param("zero rate; an untested policy needs a constant estimate"));
        }
        Ok(TestPolicy::Single { rate })
    }

    pub fn untested(estimate: Estimate) -> Self {
        TestPolicy::Untested { estimate }
    }

    /// Rate used while the estimate equals `mark`.
    pub fn rate_when_marked(&self, mark: Estimate) -> f64 {
        match (*self, mark) {
            (TestPolicy::Pair { s, .. }, Estimate::Healthy) => s,
            (TestPolicy::Pair { c, .. }, Estimate::Infected) => c,
            (TestPolicy::Single { rate }, _) => rate,
            (TestPolicy::Untested { .. }, _) => 0.0,
        }
    }

    /// Budget consumed by this policy. A `Single` rate counts once.
    pub fn budget(&self) -> f64 {
        match *self {
            TestPolicy::Pair { s, c } => s + c,
            TestPolicy::Single { rate } => rate,
            TestPolicy::Untested { .. } => 0.0,
        }
    }

    pub fn is_tested(&self) -> bool {
        !matches!(self, TestPolicy::Untested { .. })
    }

    pub fn constant_estimate(&self) -> Option<Estimate> {
        match *self {
            TestPolicy::Untested { estimate } => Some(estimate),
            _ => None,
        }
    }
}

/// False-positive probability `p` and false-negative probability `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorModel {
    p: f64,
    q: f64,
}

impl ErrorModel {
    pub const PERFECT: ErrorModel = ErrorModel { p: 0.0, q: 0.0 };

    pub fn new(p: f64, q: f64) -> Result<Self> {
        for (name, v) in [("false-positive probability p", p), ("false-negative probability q", q)] {
            if !(0.0..0.5).contains(&v) {
                return Err(Error::param(format!("{name} must lie in [0, 1/2), got {v}")));
            }
        }
        Ok(Self { p, q })
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.p
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Probability that a test reports the wrong status for true state `x`.
    #[inline]
    pub fn flip_probability(&self, infected: bool) -> f64 {
        if infected {
            self.q
        } else {
            self.p
        }
    }
}

impl Default for ErrorModel {
    fn default() -> Self {
        Self::PERFECT
    }
}

/// `sum_{i=1..n} ratio^i` in closed form.
fn geometric_sum(ratio: f64, n: usize) -> f64 {
    if (ratio - 1.0).abs() < 1e-12 {
        n as f64
    } else {
        ratio * (1.0 - ratio.powi(n as i32)) / (1.0 - ratio)
    }
}

/// Population with `lambda_i = a * r^i` and `mu_i = b * g^i` for
/// `i = 1..=n`, scaled so the rates sum to `lambda_total` and `mu_total`.
pub fn geometric_population(n: usize, r: f64, g: f64, lambda_total: f64, mu_total: f64) -> Result<Population> {
    if n == 0 {
        return Err(Error::param("population size must be at least 1"));
    }
    for (name, v) in [("r", r), ("g", g), ("lambda_total", lambda_total), ("mu_total", mu_total)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::param(format!("{name} must be positive and finite, got {v}")));
        }
    }
    let a = lambda_total / geometric_sum(r, n);
    let b = mu_total / geometric_sum(g, n);
    let people = (1..=n)
        .map(|i| PersonParams::new(a * r.powi(i as i32), b * g.powi(i as i32)))
        .collect::<Result<Vec<_>>>()?;
    Population::new(people)
}

pub fn uniform_population(n: usize, lambda_total: f64, mu_total: f64) -> Result<Population> {
    if n == 0 {
        return Err(Error::param("population size must be at least 1"));
    }
    let person = PersonParams::new(lambda_total / n as f64, mu_total / n as f64)?;
    Population::new(vec![person; n])
}
