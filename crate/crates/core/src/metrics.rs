//! Closed-form long-run error metrics for a single tracked person.
//!
//! Three metrics are covered:
//!
//! * the weighted real-time mismatch under mark-dependent test rates
//!   `(s, c)`, split into the missed-infection component (`x = 1, x̂ = 0`)
//!   and the missed-recovery component (`x = 0, x̂ = 1`);
//! * the total mismatch under a single test rate `v` with false positives
//!   and false negatives;
//! * the age of incorrect information (AoII) under a single error-free test
//!   rate `w`, where the penalty grows linearly for as long as the mismatch
//!   persists.
//!
//! Each metric also has a no-test baseline: the tracker then reports a
//! constant estimate and only the better constant is kept.

use crate::error::{Error, Result};
use crate::model::{ErrorModel, Estimate, PersonParams, Population, TestPolicy};

/// Importance weight on missed infections versus missed recoveries.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Theta(f64);

impl Theta {
    pub const HALF: Theta = Theta(0.5);

    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::param(format!("theta must lie in [0, 1], got {value}")));
        }
        Ok(Theta(value))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn complement(self) -> f64 {
        1.0 - self.0
    }
}

/// Time-average mismatch of one person split by error type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBreakdown {
    /// Infected but marked healthy.
    pub delta1: f64,
    /// Healthy but marked infected.
    pub delta2: f64,
    pub weighted: f64,
}

impl ErrorBreakdown {
    pub fn new(delta1: f64, delta2: f64, theta: Theta) -> Self {
        Self {
            delta1,
            delta2,
            weighted: theta.value() * delta1 + theta.complement() * delta2,
        }
    }
}

#[inline]
fn scale(person: &PersonParams) -> f64 {
    let (l, m) = (person.lambda(), person.mu());
    m * l / (m + l)
}

#[inline]
fn denom(person: &PersonParams, s: f64, c: f64) -> f64 {
    person.mu() * c + person.lambda() * s + c * s
}

/// `(delta1, delta2)` for strictly positive rates `s` and `c`.
pub fn delta_components(person: &PersonParams, s: f64, c: f64) -> Result<(f64, f64)> {
    if !(s > 0.0 && c > 0.0) || !s.is_finite() || !c.is_finite() {
        return Err(Error::Domain(format!(
            "two-rate components need s > 0 and c > 0 (got s = {s}, c = {c}); \
             use delta_one_sided or delta_no_test for zero rates"
        )));
    }
    let k = scale(person) / denom(person, s, c);
    Ok((k * c, k * s))
}

/// Components when at most one of the two rates is zero. With `s = 0` the
/// estimate eventually sticks at healthy; with `c = 0` it sticks at infected.
pub fn delta_one_sided(person: &PersonParams, s: f64, c: f64) -> Result<(f64, f64)> {
    if s < 0.0 || c < 0.0 || !s.is_finite() || !c.is_finite() {
        return Err(Error::param(format!("rates must be finite and non-negative (s = {s}, c = {c})")));
    }
    match (s > 0.0, c > 0.0) {
        (true, true) => delta_components(person, s, c),
        (false, true) => Ok((person.infected_fraction(), 0.0)),
        (true, false) => Ok((0.0, 1.0 - person.infected_fraction())),
        (false, false) => Err(Error::Domain(
            "no testing at all; the value depends on the constant estimate (use delta_no_test)".into(),
        )),
    }
}

pub fn delta_weighted(person: &PersonParams, s: f64, c: f64, theta: Theta) -> Result<f64> {
    let (d1, d2) = delta_one_sided(person, s, c)?;
    Ok(theta.value() * d1 + theta.complement() * d2)
}

/// Value of a constant estimate for an untested person under the weighted
/// real-time metric.
pub fn delta_constant(person: &PersonParams, estimate: Estimate, theta: Theta) -> ErrorBreakdown {
    let f = person.infected_fraction();
    match estimate {
        Estimate::Healthy => ErrorBreakdown::new(f, 0.0, theta),
        Estimate::Infected => ErrorBreakdown::new(0.0, 1.0 - f, theta),
    }
}

/// Best constant estimate for an untested person and its value. Ties go to
/// `Infected`.
pub fn delta_no_test(person: &PersonParams, theta: Theta) -> (f64, Estimate) {
    let healthy = theta.value() * person.infected_fraction();
    let infected = theta.complement() * (1.0 - person.infected_fraction());
    if healthy < infected {
        (healthy, Estimate::Healthy)
    } else {
        (infected, Estimate::Infected)
    }
}

/// Total mismatch `delta1 + delta2` under a single test rate `v` with
/// erroneous tests. At `v = 0` the tracker keeps the better constant.
pub fn delta_noisy(person: &PersonParams, v: f64, error: &ErrorModel) -> Result<f64> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::param(format!("test rate must be finite and non-negative, got {v}")));
    }
    if v == 0.0 {
        return Ok(delta_noisy_no_test(person).0);
    }
    Ok(delta_noisy_tested(person, v, error))
}

/// The tested branch evaluated at any `v >= 0`, including `v = 0` where it
/// describes a stale-but-never-refreshed estimate rather than a constant.
pub fn delta_noisy_tested(person: &PersonParams, v: f64, error: &ErrorModel) -> f64 {
    let (l, m) = (person.lambda(), person.mu());
    let (p, q) = (error.p(), error.q());
    let sum = l + m;
    let num = p * m * m + q * l * l + (2.0 - p - q) * m * l + v * (p * m + q * l);
    num / (sum * (sum + v))
}

/// Untested baseline for the total-mismatch metric: mark infected iff
/// `mu < lambda`.
pub fn delta_noisy_no_test(person: &PersonParams) -> (f64, Estimate) {
    let f = person.infected_fraction();
    if person.mu() < person.lambda() {
        (1.0 - f, Estimate::Infected)
    } else {
        (f, Estimate::Healthy)
    }
}

/// Long-run average AoII under a single error-free test rate `w`.
pub fn delta_aoii(person: &PersonParams, w: f64) -> Result<f64> {
    if !(w.is_finite() && w >= 0.0) {
        return Err(Error::param(format!("test rate must be finite and non-negative, got {w}")));
    }
    if w == 0.0 {
        return Ok(delta_aoii_no_test(person).0);
    }
    Ok(delta_aoii_tested(person, w))
}

pub fn delta_aoii_tested(person: &PersonParams, w: f64) -> f64 {
    delta_aoii_components(person, w).iter().sum()
}

/// AoII split into missed-infection and missed-recovery parts, `w > 0`.
pub fn delta_aoii_components(person: &PersonParams, w: f64) -> [f64; 2] {
    let (l, m) = (person.lambda(), person.mu());
    // Renewal cycle: time marked healthy plus time marked infected.
    let marked_healthy = 1.0 / w + (w + m) / (w * l);
    let marked_infected = 1.0 / w + (w + l) / (w * m);
    let cycle = marked_healthy + marked_infected;
    // Expected triangle areas accrued per cycle.
    [1.0 / (w * (w + m)) / cycle, 1.0 / (w * (w + l)) / cycle]
}

/// Untested AoII baseline. A constant "infected" mark accrues `W^2/2` over
/// each healthy spell `W ~ Exp(lambda)`, giving `(1/lambda) mu/(mu+lambda)`;
/// the healthy mark is the mirror image. Infected is chosen iff `mu < lambda`.
pub fn delta_aoii_no_test(person: &PersonParams) -> (f64, Estimate) {
    let (l, m) = (person.lambda(), person.mu());
    let marked_infected = m / (l * (m + l));
    let marked_healthy = l / (m * (m + l));
    if m < l {
        (marked_infected, Estimate::Infected)
    } else {
        (marked_healthy, Estimate::Healthy)
    }
}

/// AoII of a constant estimate.
pub fn delta_aoii_constant(person: &PersonParams, estimate: Estimate) -> f64 {
    let (l, m) = (person.lambda(), person.mu());
    match estimate {
        Estimate::Infected => m / (l * (m + l)),
        Estimate::Healthy => l / (m * (m + l)),
    }
}

/// `∂Δ/∂s` of the weighted metric.
pub fn grad_weighted_s(person: &PersonParams, s: f64, c: f64, theta: Theta) -> f64 {
    let (l, m, t) = (person.lambda(), person.mu(), theta.value());
    let d = denom(person, s, c);
    scale(person) * c * ((1.0 - t) * m - t * (c + l)) / (d * d)
}

/// `∂Δ/∂c` of the weighted metric.
pub fn grad_weighted_c(person: &PersonParams, s: f64, c: f64, theta: Theta) -> f64 {
    let (l, m, t) = (person.lambda(), person.mu(), theta.value());
    let d = denom(person, s, c);
    scale(person) * s * (t * l - (1.0 - t) * (s + m)) / (d * d)
}

/// `∂Δ^e/∂v` of the tested branch.
pub fn grad_noisy_v(person: &PersonParams, v: f64, error: &ErrorModel) -> f64 {
    let (l, m) = (person.lambda(), person.mu());
    let sum = l + m;
    -2.0 * (1.0 - error.p() - error.q()) * m * l / (sum * (sum + v) * (sum + v))
}

/// `∂Δ^s/∂w` of the tested branch.
pub fn grad_aoii_w(person: &PersonParams, w: f64) -> f64 {
    let (l, m) = (person.lambda(), person.mu());
    let a = w + m + l;
    let num = 2.0 * w + m + l;
    let d = a * (w + m) * (w + l);
    scale(person) / d * (2.0 - num * (1.0 / a + 1.0 / (w + m) + 1.0 / (w + l)))
}

/// Population-level summary of the weighted real-time metric.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationDelta {
    /// `(1/n) Σ Δ_i`.
    pub aggregate: f64,
    /// `(1/n) Σ Δ_i1`.
    pub mean_delta1: f64,
    /// `(1/n) Σ Δ_i2`.
    pub mean_delta2: f64,
    pub per_person: Vec<ErrorBreakdown>,
}

/// Breakdown of one person's weighted metric under `policy`. A `Single`
/// policy is read as `s = c = rate`.
pub fn person_delta(person: &PersonParams, policy: &TestPolicy, theta: Theta) -> Result<ErrorBreakdown> {
    match *policy {
        TestPolicy::Pair { s, c } => {
            let (d1, d2) = delta_one_sided(person, s, c)?;
            Ok(ErrorBreakdown::new(d1, d2, theta))
        }
        TestPolicy::Single { rate } => {
            let (d1, d2) = delta_one_sided(person, rate, rate)?;
            Ok(ErrorBreakdown::new(d1, d2, theta))
        }
        TestPolicy::Untested { estimate } => Ok(delta_constant(person, estimate, theta)),
    }
}

pub fn population_delta(population: &Population, policies: &[TestPolicy], theta: Theta) -> Result<PopulationDelta> {
    if policies.len() != population.len() {
        return Err(Error::param(format!(
            "{} policies for a population of {}",
            policies.len(),
            population.len()
        )));
    }
    let per_person = population
        .iter()
        .zip(policies)
        .map(|(person, policy)| person_delta(person, policy, theta))
        .collect::<Result<Vec<_>>>()?;
    let n = per_person.len() as f64;
    let mean = |f: fn(&ErrorBreakdown) -> f64| per_person.iter().map(f).sum::<f64>() / n;
    Ok(PopulationDelta {
        aggregate: mean(|b| b.weighted),
        mean_delta1: mean(|b| b.delta1),
        mean_delta2: mean(|b| b.delta2),
        per_person,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn person(l: f64, m: f64) -> PersonParams {
        PersonParams::new(l, m).unwrap()
    }

    // Reference values below come from a dense linear solve of the 4-state
    // (x, x̂) chain, computed outside this crate.
    #[test]
    fn components_match_chain_solutions() {
        let (d1, d2) = delta_components(&person(1.0, 1.0), 1.0, 1.0).unwrap();
        assert!((d1 - 0.16666666666666669).abs() < 1e-15);
        assert!((d2 - 0.16666666666666666).abs() < 1e-15);

        let (d1, d2) = delta_components(&person(2.0, 1.0), 3.0, 5.0).unwrap();
        assert!((d1 - 0.12820512820512817).abs() < 1e-15);
        assert!((d2 - 0.07692307692307691).abs() < 1e-15);
    }

    #[test]
    fn components_symmetric_when_rates_match() {
        for v in [0.01, 0.3, 1.0, 7.0, 250.0] {
            let (d1, d2) = delta_components(&person(1.3, 1.3), v, v).unwrap();
            assert!((d1 - d2).abs() < 1e-15);
        }
    }

    #[test]
    fn components_reject_zero_rates() {
        assert!(matches!(delta_components(&person(1.0, 1.0), 0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(delta_components(&person(1.0, 1.0), 1.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn weighted_values_and_one_sided_branches() {
        let p = person(1.0, 1.0);
        assert!((delta_weighted(&p, 1.0, 1.0, Theta::HALF).unwrap() - 1.0 / 6.0).abs() < 1e-15);

        let p = person(2.0, 3.0);
        let t = Theta::new(0.3).unwrap();
        for c in [0.1, 1.0, 10.0] {
            let v = delta_weighted(&p, 0.0, c, t).unwrap();
            assert!((v - 0.3 * 2.0 / 5.0).abs() < 1e-15);
        }
        for s in [0.1, 1.0, 10.0] {
            let v = delta_weighted(&p, s, 0.0, t).unwrap();
            assert!((v - 0.7 * 3.0 / 5.0).abs() < 1e-15);
        }
        assert!(matches!(delta_weighted(&p, 0.0, 0.0, t), Err(Error::Domain(_))));
    }

    #[test]
    fn no_test_choice() {
        let (v, e) = delta_no_test(&person(2.0, 1.0), Theta::HALF);
        assert!((v - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(e, Estimate::Infected);

        let (v, e) = delta_no_test(&person(1.5, 1.5), Theta::HALF);
        assert!((v - 0.25).abs() < 1e-15);
        assert_eq!(e, Estimate::Infected);

        let (v, e) = delta_no_test(&person(1.0, 9.0), Theta::HALF);
        assert!((v - 0.05).abs() < 1e-15);
        assert_eq!(e, Estimate::Healthy);
    }

    #[test]
    fn noisy_values() {
        let v = delta_noisy(&person(1.0, 1.0), 2.0, &ErrorModel::PERFECT).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
        let (d1, d2) = delta_components(&person(1.0, 1.0), 2.0, 2.0).unwrap();
        assert!((v - d1 - d2).abs() < 1e-15);

        let any = ErrorModel::new(0.3, 0.1).unwrap();
        assert!((delta_noisy(&person(2.0, 1.0), 0.0, &any).unwrap() - 1.0 / 3.0).abs() < 1e-15);

        let e = ErrorModel::new(0.1, 0.2).unwrap();
        let v = delta_noisy(&person(1.0, 2.0), 3.0, &e).unwrap();
        assert!((v - 0.28888888888888886).abs() < 1e-14);
    }

    #[test]
    fn aoii_values() {
        let v = delta_aoii(&person(1.0, 1.0), 1.0).unwrap();
        assert!((v - 1.0 / 6.0).abs() < 1e-15);
        // both constant marks tie at lambda = mu
        let v = delta_aoii(&person(2.5, 2.5), 0.0).unwrap();
        assert!((v - 1.0 / 5.0).abs() < 1e-15);
        let big = delta_aoii(&person(1.0, 1.0), 1e6).unwrap();
        assert!(big < v && big > 0.0);
        assert!((big - 1e-12).abs() < 1e-16);
    }

    #[test]
    fn aoii_closed_form_matches_product_expression() {
        let p = person(0.7, 1.9);
        for w in [0.05, 0.5, 3.0, 40.0] {
            let (l, m) = (0.7, 1.9);
            let expected = m * l / (m + l) * (2.0 * w + m + l) / ((w + m + l) * (w + m) * (w + l));
            assert!((delta_aoii_tested(&p, w) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn population_aggregates() {
        let pop = Population::new(vec![person(1.0, 1.0)]).unwrap();
        let pol = [TestPolicy::pair(1.0, 1.0).unwrap()];
        let d = population_delta(&pop, &pol, Theta::HALF).unwrap();
        assert!((d.aggregate - 1.0 / 6.0).abs() < 1e-15);

        let pop = crate::model::uniform_population(5, 3.0, 2.0).unwrap();
        let pol = vec![TestPolicy::pair(0.4, 0.7).unwrap(); 5];
        let d = population_delta(&pop, &pol, Theta::HALF).unwrap();
        let single = delta_weighted(&pop[0], 0.4, 0.7, Theta::HALF).unwrap();
        assert!((d.aggregate - single).abs() < 1e-15);

        assert!(population_delta(&pop, &pol[..3], Theta::HALF).is_err());
    }

    #[test]
    fn theta_bounds() {
        assert!(Theta::new(-0.01).is_err());
        assert!(Theta::new(1.01).is_err());
        assert!(Theta::new(f64::NAN).is_err());
        assert!(Theta::new(0.0).is_ok() && Theta::new(1.0).is_ok());
    }
}
