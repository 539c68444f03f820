use super::{waterfill, AllocationResult};
use crate::error::{Error, Result};
use crate::metrics;
use crate::model::{ErrorModel, Estimate, PersonParams, Population, TestPolicy};

/// Rates for the persons in `tested` and the budget multiplier.
struct Inner {
    rates: Vec<f64>,
    beta: f64,
}

/// Shared greedy loop: solve the convex problem on the tested set, then
/// drop the tested person whose metric improves most by going untested.
/// Ties go to the smallest index.
struct Greedy<'a, S, T, B, G>
where
    S: Fn(&[usize]) -> Result<Inner>,
    T: Fn(&PersonParams, f64) -> f64,
    B: Fn(&PersonParams) -> (f64, Estimate),
    G: Fn(&PersonParams, f64) -> f64,
{
    population: &'a Population,
    solve: S,
    tested_value: T,
    baseline: B,
    gradient: G,
}

impl<S, T, B, G> Greedy<'_, S, T, B, G>
where
    S: Fn(&[usize]) -> Result<Inner>,
    T: Fn(&PersonParams, f64) -> f64,
    B: Fn(&PersonParams) -> (f64, Estimate),
    G: Fn(&PersonParams, f64) -> f64,
{
    fn run(&self) -> Result<AllocationResult> {
        let n = self.population.len();
        let mut tested: Vec<usize> = (0..n).collect();
        let mut rates = vec![0.0; n];
        let mut beta = 0.0;
        let mut rounds = 0;

        while !tested.is_empty() {
            rounds += 1;
            let inner = (self.solve)(&tested)?;
            rates.iter_mut().for_each(|r| *r = 0.0);
            for (&i, &r) in tested.iter().zip(&inner.rates) {
                rates[i] = r;
            }
            beta = inner.beta;

            let mut drop: Option<(f64, usize)> = None;
            for &i in &tested {
                if rates[i] <= 0.0 {
                    continue;
                }
                let person = &self.population[i];
                let gain = (self.tested_value)(person, rates[i]) - (self.baseline)(person).0;
                if gain > 0.0 && drop.is_none_or(|(g, _)| gain > g) {
                    drop = Some((gain, i));
                }
            }
            match drop {
                Some((_, i)) => tested.retain(|&j| j != i),
                None => break,
            }
        }
        if tested.is_empty() {
            rates.iter_mut().for_each(|r| *r = 0.0);
            beta = 0.0;
        }

        let mut policies = Vec::with_capacity(n);
        let mut per_person = Vec::with_capacity(n);
        let mut untested = Vec::new();
        let mut residual: f64 = 0.0;
        for (i, person) in self.population.iter().enumerate() {
            if rates[i] > 0.0 {
                policies.push(TestPolicy::single(rates[i])?);
                per_person.push((self.tested_value)(person, rates[i]));
                residual = residual.max(((self.gradient)(person, rates[i]) + beta).abs());
            } else {
                let (value, est) = (self.baseline)(person);
                policies.push(TestPolicy::untested(est));
                per_person.push(value);
                untested.push((i, est));
                if tested.contains(&i) {
                    // below the water level: gradient at zero must not beat β
                    residual = residual.max((-((self.gradient)(person, 0.0) + beta)).max(0.0));
                }
            }
        }
        Ok(AllocationResult {
            aggregate_delta: per_person.iter().sum::<f64>() / n as f64,
            per_person_delta: per_person,
            policies,
            untested,
            beta,
            kkt_residual: residual,
            iterations: rounds,
            restarts_used: 1,
        })
    }
}

fn check_budget(budget: f64) -> Result<()> {
    if !(budget.is_finite() && budget > 0.0) {
        return Err(Error::param(format!("budget must be positive, got {budget}")));
    }
    Ok(())
}

/// Water-filling score of a person under noisy tests,
/// `2(1-p-q) μλ / (μ+λ)^3`.
pub fn noisy_score(person: &PersonParams, error: &ErrorModel) -> f64 {
    let (l, m) = (person.lambda(), person.mu());
    2.0 * (1.0 - error.p() - error.q()) * m * l / (m + l).powi(3)
}

/// Greedy single-rate allocation with erroneous tests.
///
/// On the tested set the optimum is `v_i = (μ_i+λ_i)(sqrt(score_i/β) - 1)^+`.
/// Untested persons are marked infected iff `μ < λ`.
pub fn optimize_noisy(population: &Population, budget: f64, error: &ErrorModel) -> Result<AllocationResult> {
    check_budget(budget)?;
    let solve = |tested: &[usize]| -> Result<Inner> {
        let coeff: Vec<f64> = tested
            .iter()
            .map(|&i| population[i].lambda() + population[i].mu())
            .collect();
        let scores: Vec<f64> = tested.iter().map(|&i| noisy_score(&population[i], error)).collect();
        let wf = waterfill(&coeff, &scores, budget)?;
        Ok(Inner {
            rates: wf.u,
            beta: wf.beta.unwrap_or(0.0),
        })
    };
    Greedy {
        population,
        solve,
        tested_value: |p: &PersonParams, v: f64| metrics::delta_noisy_tested(p, v, error),
        baseline: metrics::delta_noisy_no_test,
        gradient: |p: &PersonParams, v: f64| metrics::grad_noisy_v(p, v, error),
    }
    .run()
}

const ROOT_TOL: f64 = 1e-12;
const MAX_BISECTIONS: usize = 400;

/// Rate at which the marginal AoII reduction `-∂Δ^s/∂w` falls to `level`,
/// searched on `[0, cap]`.
fn aoii_rate_at(person: &PersonParams, level: f64, cap: f64) -> f64 {
    let marginal = |w: f64| -metrics::grad_aoii_w(person, w);
    if marginal(0.0) <= level {
        return 0.0;
    }
    if marginal(cap) >= level {
        return cap;
    }
    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= ROOT_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if marginal(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Per-person AoII rates for a trial multiplier, capped at `cap`.
pub fn aoii_rates_for_multiplier(people: &[PersonParams], multiplier: f64, cap: f64) -> Vec<f64> {
    people.iter().map(|p| aoii_rate_at(p, multiplier, cap)).collect()
}

/// Convex AoII allocation on a fixed tested set by nested bisection: the
/// inner search finds each rate for a trial multiplier, the outer one moves
/// the multiplier until the rates use the whole budget.
fn aoii_inner(people: &[PersonParams], budget: f64) -> Inner {
    let marginal0 = |p: &PersonParams| -metrics::grad_aoii_w(p, 0.0);
    let marginal_cap = |p: &PersonParams| -metrics::grad_aoii_w(p, budget);
    let mut hi = people.iter().map(marginal0).fold(0.0, f64::max);
    let mut lo = people.iter().map(marginal_cap).fold(f64::INFINITY, f64::min);
    let total = |m: f64| aoii_rates_for_multiplier(people, m, budget).iter().sum::<f64>();

    let mut mid = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTIONS {
        mid = 0.5 * (lo + hi);
        let used = total(mid);
        if (used - budget).abs() <= 1e-9 * budget * 1e-3 || hi - lo <= f64::EPSILON * hi {
            break;
        }
        if used > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut rates = aoii_rates_for_multiplier(people, mid, budget);
    let used: f64 = rates.iter().sum();
    if used > 0.0 {
        // Close the last sub-tolerance gap so the budget is met exactly.
        rates.iter_mut().for_each(|r| *r *= budget / used);
    }
    Inner { rates, beta: mid }
}

/// Greedy single-rate allocation under the AoII metric. Untested persons are
/// marked infected iff `μ < λ`.
pub fn optimize_aoii(population: &Population, budget: f64) -> Result<AllocationResult> {
    check_budget(budget)?;
    let solve = |tested: &[usize]| -> Result<Inner> {
        let people: Vec<PersonParams> = tested.iter().map(|&i| population[i]).collect();
        Ok(aoii_inner(&people, budget))
    };
    Greedy {
        population,
        solve,
        tested_value: metrics::delta_aoii_tested,
        baseline: metrics::delta_aoii_no_test,
        gradient: metrics::grad_aoii_w,
    }
    .run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{geometric_population, uniform_population};

    #[test]
    fn aoii_single_person_takes_everything() {
        let pop = Population::new(vec![PersonParams::new(0.7, 1.3).unwrap()]).unwrap();
        let res = optimize_aoii(&pop, 3.0).unwrap();
        assert!((res.single_rates()[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn aoii_uniform_population_is_even() {
        let pop = uniform_population(5, 3.0, 2.0).unwrap();
        let res = optimize_aoii(&pop, 4.0).unwrap();
        for w in res.single_rates() {
            assert!((w - 0.8).abs() < 1e-9, "{w}");
        }
    }

    #[test]
    fn noisy_without_errors_matches_plain_waterfill() {
        let pop = geometric_population(10, 0.9, 1.1, 6.0, 4.0).unwrap();
        let res = optimize_noisy(&pop, 20.0, &ErrorModel::PERFECT).unwrap();
        let coeff: Vec<f64> = pop.iter().map(|p| p.lambda() + p.mu()).collect();
        let scores: Vec<f64> = pop.iter().map(|p| noisy_score(p, &ErrorModel::PERFECT)).collect();
        let wf = waterfill(&coeff, &scores, 20.0).unwrap();
        assert_eq!(res.iterations, 1);
        for (a, b) in res.single_rates().iter().zip(&wf.u) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn aoii_rates_monotone_in_multiplier() {
        let people = [PersonParams::new(0.5, 0.8).unwrap(), PersonParams::new(2.0, 0.3).unwrap()];
        let a = aoii_rates_for_multiplier(&people, 0.01, 10.0);
        let b = aoii_rates_for_multiplier(&people, 0.02, 10.0);
        assert!(a.iter().zip(&b).all(|(x, y)| x >= y));
    }
}
