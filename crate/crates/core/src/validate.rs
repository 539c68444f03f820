//! Cross-checks between the closed forms, the chain solver and the
//! simulator, grouped into pass/fail families.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::ctmc::{self, PairParams};
use crate::error::{Error, Result};
use crate::experiments::{Cell, Provenance, ResultTable};
use crate::metrics::{self, Theta};
use crate::model::{ErrorModel, PersonParams, TestPolicy};
use crate::montecarlo::{self, stream_rng, SimConfig, SimEstimate, SimMetric};
use crate::par::{self, Execution};

pub const MIN_HORIZON: f64 = 1e5;
pub const DEFAULT_HORIZON: f64 = 1e6;

/// Statistical agreement band: `max(K_SIGMA * std_error, SIM_FLOOR)`.
pub const K_SIGMA: f64 = 3.0;
pub const SIM_FLOOR: f64 = 1e-3;

const CHAIN_TUPLES: usize = 1000;
const SIM_TUPLES: usize = 20;
const SIM_UNTESTED: usize = 4;
const PAIR_TUPLES: usize = 6;
const GRADIENT_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    pub seed: u64,
    pub horizon: f64,
    /// Flips the sign of the test-rate term in the noisy closed form, so the
    /// noisy families must fail. Exists to prove the checks can fail.
    pub tamper: bool,
    pub exec: Execution,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            horizon: DEFAULT_HORIZON,
            tamper: false,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyResult {
    pub name: &'static str,
    pub cases: usize,
    /// Largest absolute (or, for gradients, relative) deviation.
    pub max_deviation: f64,
    /// Largest deviation divided by the allowed band; at most 1 to pass.
    pub worst_ratio: f64,
}

impl FamilyResult {
    pub fn passed(&self) -> bool {
        self.worst_ratio <= 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub families: Vec<FamilyResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.families.iter().all(FamilyResult::passed)
    }

    pub fn family(&self, name: &str) -> Option<&FamilyResult> {
        self.families.iter().find(|f| f.name == name)
    }

    pub fn to_table(&self, provenance: Provenance) -> ResultTable {
        ResultTable {
            name: "validate".into(),
            columns: ["family", "cases", "max_deviation", "worst_ratio", "passed"]
                .map(String::from)
                .to_vec(),
            rows: self
                .families
                .iter()
                .map(|f| {
                    vec![
                        Cell::Text(f.name.into()),
                        Cell::Int(f.cases as i64),
                        Cell::Float(f.max_deviation),
                        Cell::Float(f.worst_ratio),
                        Cell::Int(f.passed() as i64),
                    ]
                })
                .collect(),
            provenance,
        }
    }
}

/// Running maximum of `(deviation, deviation / allowed)`.
#[derive(Default)]
struct Worst {
    cases: usize,
    deviation: f64,
    ratio: f64,
}

impl Worst {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn add(&mut self, deviation: f64, allowed: f64) {
        self.cases += 1;
        // NaN must fail, so compare with `!(x <= y)`.
        if !(deviation <= self.deviation) {
            self.deviation = deviation;
        }
        let ratio = deviation / allowed;
        if !(ratio <= self.ratio) {
            self.ratio = ratio;
        }
    }

    fn add_sim(&mut self, est: &SimEstimate, reference: f64) {
        self.add((est.mean - reference).abs(), (K_SIGMA * est.std_error).max(SIM_FLOOR));
    }

    fn finish(self, name: &'static str) -> FamilyResult {
        FamilyResult {
            name,
            cases: self.cases,
            max_deviation: self.deviation,
            worst_ratio: self.ratio,
        }
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn person(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> PersonParams {
    PersonParams::new(log_uniform(rng, lo, hi), log_uniform(rng, lo, hi)).expect("positive rates")
}

fn error_model(rng: &mut ChaCha8Rng, hi: f64) -> ErrorModel {
    ErrorModel::new(rng.random::<f64>() * hi, rng.random::<f64>() * hi).expect("in range")
}

/// Noisy closed form, optionally with the deliberate sign error.
fn noisy_closed_form(p: &PersonParams, v: f64, e: &ErrorModel, tamper: bool) -> f64 {
    if !tamper {
        return metrics::delta_noisy_tested(p, v, e);
    }
    let (l, m, pp, q) = (p.lambda(), p.mu(), e.p(), e.q());
    let num = pp * m * m + q * l * l + (2.0 - pp - q) * m * l - v * (pp * m + q * l);
    num / ((l + m) * (l + m + v))
}

fn mismatch(pi: &ctmc::SteadyState) -> (f64, f64) {
    (pi.single(1, 0), pi.single(0, 1))
}

fn formula_vs_chain(rng: &mut ChaCha8Rng) -> Result<FamilyResult> {
    let mut w = Worst::default();
    for _ in 0..CHAIN_TUPLES {
        let p = person(rng, 0.01, 100.0);
        let (s, c) = (log_uniform(rng, 0.01, 100.0), log_uniform(rng, 0.01, 100.0));
        let (d1, d2) = metrics::delta_components(&p, s, c)?;
        let (p10, p01) = mismatch(&ctmc::steady_state(&ctmc::build_single_chain(&p, s, c)?)?);
        w.add((d1 - p10).abs().max((d2 - p01).abs()), 1e-9);
    }
    Ok(w.finish("formula_vs_chain"))
}

fn noisy_vs_chain(rng: &mut ChaCha8Rng, tamper: bool) -> Result<FamilyResult> {
    let mut w = Worst::default();
    for _ in 0..CHAIN_TUPLES {
        let p = person(rng, 0.01, 100.0);
        let v = log_uniform(rng, 0.01, 100.0);
        let e = error_model(rng, 0.49);
        let (p10, p01) = mismatch(&ctmc::steady_state(&ctmc::build_noisy_chain(&p, v, &e)?)?);
        w.add((noisy_closed_form(&p, v, &e, tamper) - (p10 + p01)).abs(), 1e-10);
    }
    Ok(w.finish("noisy_vs_chain"))
}

fn noisy_reduction(rng: &mut ChaCha8Rng) -> Result<FamilyResult> {
    let mut w = Worst::default();
    for _ in 0..CHAIN_TUPLES {
        let p = person(rng, 0.01, 100.0);
        let v = log_uniform(rng, 0.01, 100.0);
        let (d1, d2) = metrics::delta_components(&p, v, v)?;
        w.add((metrics::delta_noisy(&p, v, &ErrorModel::PERFECT)? - (d1 + d2)).abs(), 1e-12);
    }
    Ok(w.finish("noisy_reduction"))
}

fn random_pair(rng: &mut ChaCha8Rng, lambda12: f64) -> Result<PairParams> {
    PairParams::new(
        log_uniform(rng, 0.1, 10.0),
        lambda12,
        log_uniform(rng, 0.1, 10.0),
        log_uniform(rng, 0.1, 10.0),
        log_uniform(rng, 0.1, 10.0),
    )
}

fn pair_product_form(rng: &mut ChaCha8Rng) -> Result<FamilyResult> {
    let mut w = Worst::default();
    let mut cases: Vec<PairParams> = (0..100).map(|_| random_pair(rng, 0.0)).collect::<Result<_>>()?;
    cases.push(PairParams::new(2.5, 0.0, 5.0, 5.0, 5.0)?);
    for params in cases {
        let joint = ctmc::steady_state(&ctmc::build_pair_chain(&params)?)?;
        let one = PersonParams::new(params.lambda, params.mu)?;
        let single = ctmc::steady_state(&ctmc::build_single_chain(&one, params.s, params.c)?)?;
        let mut dev: f64 = 0.0;
        for (label, &mass) in joint.labels().iter().zip(joint.pi()) {
            let product = single.single(label.bit(0), label.bit(1)) * single.single(label.bit(2), label.bit(3));
            dev = dev.max((mass - product).abs());
        }
        let occ = ctmc::pair_occupancy(&joint)?;
        dev = dev.max((occ.p_one_infected - params.lambda / (params.lambda + params.mu)).abs());
        w.add(dev, 1e-9);
    }
    Ok(w.finish("pair_product_form"))
}

fn pair_balance(rng: &mut ChaCha8Rng) -> Result<FamilyResult> {
    let mut w = Worst::default();
    for _ in 0..100 {
        let l12 = log_uniform(rng, 0.1, 50.0);
        let params = random_pair(rng, l12)?;
        let pi = ctmc::steady_state(&ctmc::build_pair_chain(&params)?)?;
        let res = ctmc::pair_balance_residuals(&pi, &params)?;
        w.add(res.iter().fold(0.0, |a, r| a.max(r.abs())), 1e-9);
    }
    Ok(w.finish("pair_balance"))
}

enum SimCase {
    RealTime(PersonParams, TestPolicy, Theta, f64),
    Noisy(PersonParams, f64, ErrorModel, f64),
    Aoii(PersonParams, TestPolicy, f64),
}

fn sim_cases(rng: &mut ChaCha8Rng) -> Result<Vec<(&'static str, SimCase)>> {
    let mut cases = Vec::new();
    for k in 0..SIM_TUPLES + SIM_UNTESTED {
        let p = person(rng, 0.25, 4.0);
        let theta = Theta::new(0.2 + 0.6 * rng.random::<f64>())?;
        let case = if k < SIM_TUPLES {
            let (s, c) = (log_uniform(rng, 0.25, 4.0), log_uniform(rng, 0.25, 4.0));
            SimCase::RealTime(p, TestPolicy::pair(s, c)?, theta, metrics::delta_weighted(&p, s, c, theta)?)
        } else {
            let (value, est) = metrics::delta_no_test(&p, theta);
            SimCase::RealTime(p, TestPolicy::untested(est), theta, value)
        };
        cases.push(("sim_realtime", case));
    }
    for _ in 0..SIM_TUPLES {
        let p = person(rng, 0.25, 4.0);
        let v = log_uniform(rng, 0.25, 4.0);
        let e = error_model(rng, 0.45);
        cases.push(("sim_noisy", SimCase::Noisy(p, v, e, metrics::delta_noisy(&p, v, &e)?)));
    }
    for k in 0..SIM_TUPLES + SIM_UNTESTED {
        let p = person(rng, 0.5, 4.0);
        let case = if k < SIM_TUPLES {
            let w = log_uniform(rng, 0.25, 4.0);
            SimCase::Aoii(p, TestPolicy::single(w)?, metrics::delta_aoii(&p, w)?)
        } else {
            let (value, est) = metrics::delta_aoii_no_test(&p);
            SimCase::Aoii(p, TestPolicy::untested(est), value)
        };
        cases.push(("sim_aoii", case));
    }
    Ok(cases)
}

fn run_sim_case(case: &SimCase, cfg: &SimConfig, tamper: bool) -> Result<(SimEstimate, f64)> {
    Ok(match case {
        SimCase::RealTime(p, policy, theta, reference) => {
            let sim = montecarlo::simulate_person(
                p,
                policy,
                &ErrorModel::PERFECT,
                SimMetric::RealTime { theta: *theta },
                cfg,
            )?;
            (sim.weighted, *reference)
        }
        SimCase::Noisy(p, v, e, reference) => {
            let reference = if tamper { noisy_closed_form(p, *v, e, true) } else { *reference };
            let policy = TestPolicy::single(*v)?;
            let sim = montecarlo::simulate_person(p, &policy, e, SimMetric::RealTime { theta: Theta::HALF }, cfg)?;
            (sim.total, reference)
        }
        SimCase::Aoii(p, policy, reference) => {
            let sim = montecarlo::simulate_person(p, policy, &ErrorModel::PERFECT, SimMetric::Aoii, cfg)?;
            (sim.total, *reference)
        }
    })
}

fn simulation_families(rng: &mut ChaCha8Rng, opts: &ValidationOptions) -> Result<Vec<FamilyResult>> {
    let cases = sim_cases(rng)?;
    let base = SimConfig::new(opts.horizon, opts.seed)?;
    let indexed: Vec<(usize, &(&'static str, SimCase))> = cases.iter().enumerate().collect();
    let outcomes = par::map(opts.exec, indexed, |(k, (_, case))| {
        run_sim_case(case, &base.with_stream(k as u64), opts.tamper)
    });
    let mut families = Vec::new();
    for name in ["sim_realtime", "sim_noisy", "sim_aoii"] {
        let mut w = Worst::default();
        for ((family, _), outcome) in cases.iter().zip(&outcomes) {
            if *family == name {
                let (est, reference) = outcome.as_ref().map_err(|e| Error::Numerical(e.to_string()))?;
                w.add_sim(est, *reference);
            }
        }
        families.push(w.finish(name));
    }

    // Pair simulation against the chain.
    let mut pairs = vec![PairParams::new(2.5, 10.0, 5.0, 5.0, 5.0)?, PairParams::new(2.5, 0.0, 5.0, 5.0, 5.0)?];
    while pairs.len() < PAIR_TUPLES {
        let l12 = log_uniform(rng, 0.5, 20.0);
        pairs.push(random_pair(rng, l12)?);
    }
    let offset = cases.len() as u64;
    let indexed: Vec<(u64, PairParams)> = pairs.into_iter().enumerate().map(|(k, p)| (offset + k as u64, p)).collect();
    let outcomes = par::map(opts.exec, indexed, |(stream, params)| -> Result<_> {
        let sim = montecarlo::simulate_pair(&params, &base.with_stream(stream))?;
        let pi = ctmc::steady_state(&ctmc::build_pair_chain(&params)?)?;
        Ok((sim, ctmc::pair_occupancy(&pi)?, ctmc::pair_error_metrics(&pi)?))
    });
    let mut w = Worst::default();
    for outcome in outcomes {
        let (sim, occ, err) = outcome?;
        w.add_sim(&sim.p_one_infected, occ.p_one_infected);
        w.add_sim(&sim.p_two_infected, occ.p_two_infected);
        w.add_sim(&sim.p_both_infected, occ.p_both_infected);
        for (est, reference) in sim.errors.iter().zip([err.d11, err.d12, err.d21, err.d22]) {
            w.add_sim(est, reference);
        }
    }
    families.push(w.finish("sim_pair"));
    Ok(families)
}

/// Central difference with a relative step.
fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-5 * x;
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn gradients(rng: &mut ChaCha8Rng) -> Result<FamilyResult> {
    let mut w = Worst::default();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
    for _ in 0..GRADIENT_POINTS {
        let p = person(rng, 0.1, 10.0);
        let (s, c) = (log_uniform(rng, 0.1, 10.0), log_uniform(rng, 0.1, 10.0));
        let theta = Theta::new(rng.random::<f64>())?;
        let e = error_model(rng, 0.45);
        let weighted = |s: f64, c: f64| metrics::delta_weighted(&p, s, c, theta).expect("interior");

        let fd_s = central(|x| weighted(x, c), s);
        let fd_c = central(|x| weighted(s, x), c);
        let fd_v = central(|x| metrics::delta_noisy_tested(&p, x, &e), s);
        let fd_w = central(|x| metrics::delta_aoii_tested(&p, x), s);
        let dev = rel(metrics::grad_weighted_s(&p, s, c, theta), fd_s)
            .max(rel(metrics::grad_weighted_c(&p, s, c, theta), fd_c))
            .max(rel(metrics::grad_noisy_v(&p, s, &e), fd_v))
            .max(rel(metrics::grad_aoii_w(&p, s), fd_w));
        w.add(dev, 1e-5);
    }
    Ok(w.finish("gradients"))
}

/// Runs every family. Each family draws its cases from its own stream of
/// `opts.seed`; simulation `k` uses stream `k`.
pub fn run_validation(opts: &ValidationOptions) -> Result<ValidationReport> {
    if !(opts.horizon.is_finite() && opts.horizon >= MIN_HORIZON) {
        return Err(Error::config(
            "horizon",
            format!("must be at least {MIN_HORIZON:e}, got {}", opts.horizon),
        ));
    }
    let rng = |family: u64| stream_rng(opts.seed, 1_000_000 + family);
    let mut families = vec![
        formula_vs_chain(&mut rng(0))?,
        noisy_vs_chain(&mut rng(1), opts.tamper)?,
        noisy_reduction(&mut rng(2))?,
        pair_product_form(&mut rng(3))?,
        pair_balance(&mut rng(4))?,
        gradients(&mut rng(5))?,
    ];
    families.extend(simulation_families(&mut rng(6), opts)?);
    Ok(ValidationReport { families })
}
