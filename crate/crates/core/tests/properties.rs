use proptest::prelude::*;

use timely_tracking::ctmc;
use timely_tracking::metrics::{self, Theta};
use timely_tracking::model::{geometric_population, uniform_population, ErrorModel, PersonParams, Population, TestPolicy};
use timely_tracking::optimize::{self, noisy_score, waterfill, AlternatingOptions};
use timely_tracking::Execution;

fn log_rate(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

fn person(lo: f64, hi: f64) -> impl Strategy<Value = PersonParams> {
    (log_rate(lo, hi), log_rate(lo, hi)).prop_map(|(l, m)| PersonParams::new(l, m).unwrap())
}

fn errors() -> impl Strategy<Value = ErrorModel> {
    (0.0..0.49f64, 0.0..0.49f64).prop_map(|(p, q)| ErrorModel::new(p, q).unwrap())
}

fn population(max: usize) -> impl Strategy<Value = Population> {
    prop::collection::vec(person(0.1, 5.0), 1..=max).prop_map(|v| Population::new(v).unwrap())
}

fn quick_opts(restarts: usize, seed: u64) -> AlternatingOptions {
    AlternatingOptions {
        restarts,
        seed,
        exec: Execution::Sequential,
        ..AlternatingOptions::default()
    }
}

proptest! {
    #[test]
    fn components_equal_chain_mismatch(p in person(0.01, 100.0), s in log_rate(0.01, 100.0), c in log_rate(0.01, 100.0)) {
        let (d1, d2) = metrics::delta_components(&p, s, c).unwrap();
        let pi = ctmc::steady_state(&ctmc::build_single_chain(&p, s, c).unwrap()).unwrap();
        prop_assert!((d1 - pi.single(1, 0)).abs() <= 1e-9);
        prop_assert!((d2 - pi.single(0, 1)).abs() <= 1e-9);
        prop_assert!((0.0..=1.0).contains(&d1) && (0.0..=1.0).contains(&d2));
    }

    #[test]
    fn noisy_without_errors_reduces_to_components(p in person(0.01, 100.0), v in log_rate(0.01, 100.0)) {
        let (d1, d2) = metrics::delta_components(&p, v, v).unwrap();
        let noisy = metrics::delta_noisy(&p, v, &ErrorModel::PERFECT).unwrap();
        prop_assert!((noisy - (d1 + d2)).abs() <= 1e-12);
    }

    #[test]
    fn noisy_metric_decreasing_and_convex(p in person(0.05, 20.0), e in errors()) {
        let f = |v: f64| metrics::delta_noisy_tested(&p, v, &e);
        for k in 0..30 {
            let v = 0.05 * 1.3f64.powi(k);
            let h = 1e-3 * v;
            prop_assert!(f(v + h) < f(v - h));
            prop_assert!(f(v + h) - 2.0 * f(v) + f(v - h) > 0.0);
            prop_assert!((0.0..=1.0).contains(&f(v)));
        }
    }

    #[test]
    fn noisy_error_sensitivity_signs(p in person(0.1, 10.0), v in log_rate(0.1, 10.0), pp in 0.01..0.45f64, q in 0.01..0.45f64) {
        let (l, m) = (p.lambda(), p.mu());
        let f = |pp: f64, q: f64| metrics::delta_noisy_tested(&p, v, &ErrorModel::new(pp, q).unwrap());
        let h = 1e-6;
        let dp = (f(pp + h, q) - f(pp - h, q)) / (2.0 * h);
        let dq = (f(pp, q + h) - f(pp, q - h)) / (2.0 * h);
        if (v + m - l).abs() > 1e-3 {
            prop_assert_eq!(dp > 0.0, v + m - l > 0.0);
        }
        if (v + l - m).abs() > 1e-3 {
            prop_assert_eq!(dq > 0.0, v + l - m > 0.0);
        }
    }

    #[test]
    fn aoii_metric_decreasing_and_convex(p in person(0.05, 20.0)) {
        let f = |w: f64| metrics::delta_aoii_tested(&p, w);
        // Rare tests leave the metric at 1/(λ+μ), above the best constant mark.
        let limit = 1.0 / (p.lambda() + p.mu());
        prop_assert!((f(1e-9) - limit).abs() <= 1e-6 * limit);
        prop_assert!(limit >= metrics::delta_aoii_no_test(&p).0);
        for k in 0..30 {
            let w = 0.05 * 1.3f64.powi(k);
            let h = 1e-3 * w;
            prop_assert!(f(w + h) < f(w - h));
            prop_assert!(f(w + h) - 2.0 * f(w) + f(w - h) > 0.0);
            prop_assert!(f(w) >= 0.0);
        }
    }

    #[test]
    fn geometric_totals_and_ordering(n in 1usize..40, lt in 0.1..50.0f64, mt in 0.1..50.0f64) {
        let pop = geometric_population(n, 0.9, 1.1, lt, mt).unwrap();
        prop_assert!((pop.total_lambda() - lt).abs() <= 1e-12 * lt);
        prop_assert!((pop.total_mu() - mt).abs() <= 1e-12 * mt);
        for w in pop.people().windows(2) {
            prop_assert!(w[1].lambda() < w[0].lambda());
            prop_assert!(w[1].mu() > w[0].mu());
        }
        let flat = geometric_population(n, 1.0, 1.0, lt, mt).unwrap();
        let even = uniform_population(n, lt, mt).unwrap();
        for (a, b) in flat.iter().zip(even.iter()) {
            prop_assert!((a.lambda() - b.lambda()).abs() <= 1e-15 * lt && (a.mu() - b.mu()).abs() <= 1e-15 * mt);
        }
    }

    #[test]
    fn waterfill_spends_budget_with_threshold(
        entries in prop::collection::vec((0.01..5.0f64, -1.0..5.0f64), 1..20),
        budget in 0.1..50.0f64,
    ) {
        let (a, phi): (Vec<f64>, Vec<f64>) = entries.into_iter().unzip();
        let wf = waterfill(&a, &phi, budget).unwrap();
        match wf.beta {
            None => prop_assert!(phi.iter().all(|&x| x <= 0.0)),
            Some(beta) => {
                prop_assert!((wf.u.iter().sum::<f64>() - budget).abs() <= 1e-9 * budget.max(1.0));
                for (j, &u) in wf.u.iter().enumerate() {
                    prop_assert!(u >= 0.0);
                    prop_assert_eq!(u > 0.0, phi[j] > beta);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn alternating_result_is_consistent(pop in population(8), budget in 0.5..30.0f64, t in 0.05..0.95f64, seed in any::<u64>()) {
        let theta = Theta::new(t).unwrap();
        let res = optimize::alternating_minimize(&pop, budget, theta, &quick_opts(4, seed)).unwrap();
        let total = res.total_rate();
        prop_assert!(total <= budget + 1e-9);
        if res.tested_count() > 0 {
            prop_assert!((total - budget).abs() <= 1e-9);
        }
        for policy in &res.policies {
            if let TestPolicy::Pair { s, c } = *policy {
                prop_assert!(s > 0.0 && c > 0.0, "one-sided allocation {:?}", policy);
            }
        }
        let check = metrics::population_delta(&pop, &res.policies, theta).unwrap();
        prop_assert!((check.aggregate - res.aggregate_delta).abs() <= 1e-12);
        for &(i, est) in &res.untested {
            prop_assert_eq!(est, metrics::delta_no_test(&pop[i], theta).1);
        }
        // same seed, same answer
        let again = optimize::alternating_minimize(&pop, budget, theta, &quick_opts(4, seed)).unwrap();
        prop_assert_eq!(&res, &again);
    }

    #[test]
    fn alternating_beats_uniform_and_no_tests(pop in population(8), budget in 0.5..30.0f64, seed in any::<u64>()) {
        let theta = Theta::HALF;
        let res = optimize::alternating_minimize(&pop, budget, theta, &quick_opts(4, seed)).unwrap();
        let n = pop.len();
        let even = budget / (2 * n) as f64;
        let uniform = metrics::population_delta(&pop, &vec![TestPolicy::pair(even, even).unwrap(); n], theta).unwrap();
        let none = pop.iter().map(|p| metrics::delta_no_test(p, theta).0).sum::<f64>() / n as f64;
        prop_assert!(res.aggregate_delta <= uniform.aggregate + 1e-12);
        prop_assert!(res.aggregate_delta <= none + 1e-12);
    }

    #[test]
    fn more_restarts_never_hurt(pop in population(8), budget in 0.5..30.0f64, seed in any::<u64>()) {
        let mut last = f64::INFINITY;
        for k in 1..=6 {
            let res = optimize::alternating_minimize(&pop, budget, Theta::HALF, &quick_opts(k, seed)).unwrap();
            prop_assert!(res.aggregate_delta <= last);
            last = res.aggregate_delta;
        }
    }

    #[test]
    fn noisy_allocation_invariants(pop in population(12), budget in 0.1..40.0f64, e in errors()) {
        let res = optimize::optimize_noisy(&pop, budget, &e).unwrap();
        let v = res.single_rates();
        if res.tested_count() > 0 {
            prop_assert!((res.total_rate() - budget).abs() <= 1e-9);
            prop_assert!(res.kkt_residual <= 1e-7);
        }
        let n = pop.len() as f64;
        let none: f64 = pop.iter().map(|p| metrics::delta_noisy_no_test(p).0).sum::<f64>() / n;
        let uniform: f64 = pop.iter().map(|p| metrics::delta_noisy(p, budget / n, &e).unwrap()).sum::<f64>() / n;
        prop_assert!(res.aggregate_delta <= none + 1e-12);
        prop_assert!(res.aggregate_delta <= uniform + 1e-12);
        for (i, p) in pop.iter().enumerate() {
            let want = metrics::delta_noisy(p, v[i], &e).unwrap();
            prop_assert!((res.per_person_delta[i] - want).abs() <= 1e-15);
            // nobody tested is better off untested
            if v[i] > 0.0 {
                prop_assert!(res.per_person_delta[i] <= metrics::delta_noisy_no_test(p).0);
            }
        }
        // Tested persons sit above the final water level. Persons removed by
        // the greedy step may score higher still, so no single threshold
        // covers everyone.
        for (i, p) in pop.iter().enumerate() {
            if v[i] > 0.0 {
                prop_assert!(noisy_score(p, &e) > res.beta);
            }
        }
    }

    #[test]
    fn aoii_allocation_invariants(pop in population(12), budget in 0.1..40.0f64) {
        let res = optimize::optimize_aoii(&pop, budget).unwrap();
        let w = res.single_rates();
        if res.tested_count() > 0 {
            prop_assert!((res.total_rate() - budget).abs() <= 1e-9);
        }
        let n = pop.len() as f64;
        let none: f64 = pop.iter().map(|p| metrics::delta_aoii_no_test(p).0).sum::<f64>() / n;
        let uniform: f64 = pop.iter().map(|p| metrics::delta_aoii(p, budget / n).unwrap()).sum::<f64>() / n;
        prop_assert!(res.aggregate_delta <= none * (1.0 + 1e-12));
        prop_assert!(res.aggregate_delta <= uniform * (1.0 + 1e-9));
        for (i, p) in pop.iter().enumerate() {
            if w[i] > 0.0 {
                prop_assert!(res.per_person_delta[i] <= metrics::delta_aoii_no_test(p).0);
            }
        }
    }
}
