//! Finite continuous-time Markov chains over `(x, x̂)` tuples.
//!
//! Three chains are built: one person with error-free mark-dependent tests,
//! one person with a single noisy test rate, and two coupled people whose
//! undetected infections can spread. Stationary distributions come from a
//! dense LU solve of `π Q = 0, Σπ = 1`; the chains have at most 16 states.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{ErrorModel, Estimate, PersonParams};

/// A state as a bit string, most significant bit first. Single-person
/// chains use `(x, x̂)`; the pair chain uses `(x1, x̂1, x2, x̂2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateLabel {
    bits: u8,
    width: u8,
}

impl StateLabel {
    pub fn new(bits: u8, width: u8) -> Self {
        debug_assert!(width <= 8 && (width == 8 || bits >> width == 0));
        Self { bits, width }
    }

    /// Bit at position `k`, counting from the left.
    pub fn bit(&self, k: u8) -> u8 {
        (self.bits >> (self.width - 1 - k)) & 1
    }

    pub fn index(&self) -> usize {
        self.bits as usize
    }

    pub fn width(&self) -> u8 {
        self.width
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 0..self.width {
            write!(f, "{}", self.bit(k))?;
        }
        Ok(())
    }
}

/// Labelled generator matrix. Off-diagonal entries are transition rates and
/// every row sums to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    labels: Vec<StateLabel>,
    rates: DMatrix<f64>,
}

impl Generator {
    /// Empty generator over all `2^width` bit strings in lexicographic order.
    fn over_bits(width: u8) -> Self {
        let n = 1usize << width;
        Self {
            labels: (0..n).map(|b| StateLabel::new(b as u8, width)).collect(),
            rates: DMatrix::zeros(n, n),
        }
    }

    /// Builds a generator from explicit off-diagonal rates. The diagonal of
    /// `rates` is ignored and recomputed.
    pub fn from_rates(labels: Vec<StateLabel>, rates: DMatrix<f64>) -> Result<Self> {
        let n = labels.len();
        if rates.nrows() != n || rates.ncols() != n {
            return Err(Error::param(format!(
                "{}x{} rate matrix for {n} labels",
                rates.nrows(),
                rates.ncols()
            )));
        }
        let mut g = Self { labels, rates };
        for i in 0..n {
            for j in 0..n {
                let r = g.rates[(i, j)];
                if i != j && !(r.is_finite() && r >= 0.0) {
                    return Err(Error::param(format!("rate {i}->{j} must be finite and non-negative, got {r}")));
                }
            }
        }
        g.fix_diagonal();
        Ok(g)
    }

    fn add(&mut self, from: usize, to: usize, rate: f64) {
        if from != to && rate > 0.0 {
            self.rates[(from, to)] += rate;
        }
    }

    fn fix_diagonal(&mut self) {
        let n = self.len();
        for i in 0..n {
            self.rates[(i, i)] = 0.0;
            let out: f64 = self.rates.row(i).iter().sum();
            self.rates[(i, i)] = -out;
        }
    }

    pub fn labels(&self) -> &[StateLabel] {
        &self.labels
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.rates[(from, to)]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Largest absolute row sum; zero for a well-formed generator.
    pub fn row_sum_defect(&self) -> f64 {
        self.rates
            .row_iter()
            .map(|row| row.iter().sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    /// `max_j |(π Q)_j|`.
    pub fn balance_residual(&self, pi: &[f64]) -> f64 {
        let p = DVector::from_column_slice(pi);
        (self.rates.transpose() * p).amax()
    }
}

/// Stationary distribution aligned with the generator's labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    labels: Vec<StateLabel>,
    pi: Vec<f64>,
}

impl SteadyState {
    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn labels(&self) -> &[StateLabel] {
        &self.labels
    }

    /// Total probability of the states whose label satisfies `pred`.
    pub fn mass(&self, pred: impl Fn(&StateLabel) -> bool) -> f64 {
        self.labels
            .iter()
            .zip(&self.pi)
            .filter(|(l, _)| pred(l))
            .map(|(_, p)| p)
            .sum()
    }

    /// Probability of the single-person state `(x, x̂)`.
    pub fn single(&self, x: u8, xhat: u8) -> f64 {
        debug_assert_eq!(self.labels.len(), 4);
        self.pi[(x as usize) << 1 | xhat as usize]
    }
}

#[inline]
fn single_index(x: u8, xhat: u8) -> usize {
    ((x as usize) << 1) | xhat as usize
}

/// Error-free chain for one person tested at `s` while marked healthy and
/// `c` while marked infected.
pub fn build_single_chain(person: &PersonParams, s: f64, c: f64) -> Result<Generator> {
    for (name, r) in [("s", s), ("c", c)] {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::param(format!("{name} must be finite and non-negative, got {r}")));
        }
    }
    let (l, m) = (person.lambda(), person.mu());
    let mut g = Generator::over_bits(2);
    g.add(single_index(0, 0), single_index(1, 0), l);
    g.add(single_index(1, 0), single_index(0, 0), m);
    g.add(single_index(1, 0), single_index(1, 1), s);
    g.add(single_index(1, 1), single_index(0, 1), m);
    g.add(single_index(0, 1), single_index(1, 1), l);
    g.add(single_index(0, 1), single_index(0, 0), c);
    g.fix_diagonal();
    Ok(g)
}

/// One person tested at rate `v` from every state; a test reports the wrong
/// status with probability `p` (healthy) or `q` (infected).
pub fn build_noisy_chain(person: &PersonParams, v: f64, error: &ErrorModel) -> Result<Generator> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::param(format!("v must be finite and non-negative, got {v}")));
    }
    let (l, m, p, q) = (person.lambda(), person.mu(), error.p(), error.q());
    let mut g = Generator::over_bits(2);
    for xhat in 0..2 {
        g.add(single_index(0, xhat), single_index(1, xhat), l);
        g.add(single_index(1, xhat), single_index(0, xhat), m);
    }
    g.add(single_index(0, 0), single_index(0, 1), v * p);
    g.add(single_index(0, 1), single_index(0, 0), v * (1.0 - p));
    g.add(single_index(1, 0), single_index(1, 1), v * (1.0 - q));
    g.add(single_index(1, 1), single_index(1, 0), v * q);
    g.fix_diagonal();
    Ok(g)
}

/// Who is shielded from cross-infection in the two-person chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Isolation {
    /// Anyone marked infected is isolated: cross-infection needs an
    /// undetected infected source *and* a target marked healthy.
    #[default]
    MarkedIsolated,
    /// Only a detected source is isolated; a healthy person marked infected
    /// can still catch the disease from an undetected one.
    DetectedSourceOnly,
}

/// Two identical people with coupled infections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairParams {
    pub lambda: f64,
    /// Extra infection rate from an undetected infected partner.
    pub lambda12: f64,
    pub mu: f64,
    pub s: f64,
    pub c: f64,
    pub isolation: Isolation,
}

impl PairParams {
    pub fn new(lambda: f64, lambda12: f64, mu: f64, s: f64, c: f64) -> Result<Self> {
        let p = Self {
            lambda,
            lambda12,
            mu,
            s,
            c,
            isolation: Isolation::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_isolation(mut self, isolation: Isolation) -> Self {
        self.isolation = isolation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0 && self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::param("pair chain needs positive finite lambda and mu"));
        }
        for (name, r) in [("lambda12", self.lambda12), ("s", self.s), ("c", self.c)] {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::param(format!("{name} must be finite and non-negative, got {r}")));
            }
        }
        Ok(())
    }

    /// Total infection rate of person `me` (0 or 1) in the given state;
    /// `state` holds `(x, x̂)` per person.
    pub fn infection_rate(&self, state: [(u8, u8); 2], me: usize) -> f64 {
        let (_, my_mark) = state[me];
        let (other_x, other_mark) = state[1 - me];
        let source_active = other_x == 1 && other_mark == 0;
        let target_exposed = match self.isolation {
            Isolation::MarkedIsolated => my_mark == 0,
            Isolation::DetectedSourceOnly => true,
        };
        if source_active && target_exposed {
            self.lambda + self.lambda12
        } else {
            self.lambda
        }
    }

    /// Test rate of a person with mark `xhat`.
    pub fn test_rate(&self, xhat: u8) -> f64 {
        if xhat == 0 {
            self.s
        } else {
            self.c
        }
    }
}

#[inline]
fn pair_index(state: [(u8, u8); 2]) -> usize {
    let [(x1, h1), (x2, h2)] = state;
    ((x1 as usize) << 3) | ((h1 as usize) << 2) | ((x2 as usize) << 1) | h2 as usize
}

#[inline]
fn pair_state(index: usize) -> [(u8, u8); 2] {
    let b = |k: usize| ((index >> k) & 1) as u8;
    [(b(3), b(2)), (b(1), b(0))]
}

/// Sixteen-state generator for two coupled people, built from the per-person
/// transition rules: infection, recovery, and an error-free test that sets
/// the mark to the true status.
pub fn build_pair_chain(params: &PairParams) -> Result<Generator> {
    params.validate()?;
    let mut g = Generator::over_bits(4);
    for from in 0..16 {
        let state = pair_state(from);
        for me in 0..2 {
            let (x, xhat) = state[me];
            let mut next = state;
            if x == 0 {
                next[me].0 = 1;
                g.add(from, pair_index(next), params.infection_rate(state, me));
            } else {
                next[me].0 = 0;
                g.add(from, pair_index(next), params.mu);
            }
            if x != xhat {
                let mut tested = state;
                tested[me].1 = x;
                g.add(from, pair_index(tested), params.test_rate(xhat));
            }
        }
    }
    g.fix_diagonal();
    Ok(g)
}

/// Stationary distribution of an irreducible chain (or one with a single
/// recurrent class).
pub fn steady_state(gen: &Generator) -> Result<SteadyState> {
    let n = gen.len();
    if n == 0 {
        return Err(Error::param("empty generator"));
    }
    let scale = gen.rates.amax().max(f64::MIN_POSITIVE);
    if gen.row_sum_defect() > 1e-12 * scale * n as f64 {
        return Err(Error::param("generator rows do not sum to zero"));
    }
    // Qᵀ π = 0 with the last equation replaced by Σπ = 1. Scaling by the
    // largest rate keeps the pivots O(1).
    let mut a = gen.rates.transpose() / scale;
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;

    let lu = a.clone().lu();
    let u_diag_min = lu.u().diagonal().amin();
    if u_diag_min < 1e-13 {
        return Err(Error::Numerical(format!(
            "stationary system is singular (min pivot {u_diag_min:e}); the chain has more than one recurrent class"
        )));
    }
    let x = lu
        .solve(&b)
        .ok_or_else(|| Error::Numerical("stationary system is singular".into()))?;
    finish(gen, x.as_slice().to_vec())
}

/// Stationary distribution restricted to a closed class of states. Used for
/// untested people, whose chain splits into two closed classes.
pub fn steady_state_on_class(gen: &Generator, class: &[usize]) -> Result<SteadyState> {
    let n = gen.len();
    if class.is_empty() || class.iter().any(|&i| i >= n) {
        return Err(Error::param("class indices out of range"));
    }
    for &i in class {
        for j in 0..n {
            if !class.contains(&j) && gen.rate(i, j) > 0.0 {
                return Err(Error::param(format!(
                    "state {} leaves the class towards {}",
                    gen.labels[i], gen.labels[j]
                )));
            }
        }
    }
    let k = class.len();
    let sub = DMatrix::from_fn(k, k, |a, b| gen.rate(class[a], class[b]));
    let sub_labels = class.iter().map(|&i| gen.labels[i]).collect();
    let sub_gen = Generator::from_rates(sub_labels, sub)?;
    let sub_pi = steady_state(&sub_gen)?;
    let mut pi = vec![0.0; n];
    for (a, &i) in class.iter().enumerate() {
        pi[i] = sub_pi.pi[a];
    }
    finish(gen, pi)
}

/// Stationary distribution of an untested person's chain given the constant
/// estimate: the states carrying the other mark are transient.
pub fn untested_steady_state(person: &PersonParams, estimate: Estimate) -> Result<SteadyState> {
    let g = build_single_chain(person, 0.0, 0.0)?;
    let h = estimate.bit();
    steady_state_on_class(&g, &[single_index(0, h), single_index(1, h)])
}

fn finish(gen: &Generator, mut pi: Vec<f64>) -> Result<SteadyState> {
    for p in pi.iter_mut() {
        if !p.is_finite() {
            return Err(Error::Numerical("non-finite stationary probability".into()));
        }
        if *p < 0.0 {
            if *p < -1e-9 {
                return Err(Error::Numerical(format!("negative stationary probability {p:e}")));
            }
            *p = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    for p in pi.iter_mut() {
        *p /= total;
    }
    Ok(SteadyState {
        labels: gen.labels.clone(),
        pi,
    })
}

/// Per-person mismatch components of the pair chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairErrors {
    /// Person 1 infected, marked healthy.
    pub d11: f64,
    /// Person 1 healthy, marked infected.
    pub d12: f64,
    pub d21: f64,
    pub d22: f64,
}

impl PairErrors {
    pub fn person_total(&self, person: usize) -> f64 {
        match person {
            0 => self.d11 + self.d12,
            _ => self.d21 + self.d22,
        }
    }
}

fn check_pair(pi: &SteadyState) -> Result<()> {
    if pi.pi.len() != 16 || pi.labels.iter().any(|l| l.width() != 4) {
        return Err(Error::param(format!(
            "expected a 16-state pair distribution, got {} states",
            pi.pi.len()
        )));
    }
    Ok(())
}

pub fn pair_error_metrics(pi: &SteadyState) -> Result<PairErrors> {
    check_pair(pi)?;
    Ok(PairErrors {
        d11: pi.mass(|l| l.bit(0) == 1 && l.bit(1) == 0),
        d12: pi.mass(|l| l.bit(0) == 0 && l.bit(1) == 1),
        d21: pi.mass(|l| l.bit(2) == 1 && l.bit(3) == 0),
        d22: pi.mass(|l| l.bit(2) == 0 && l.bit(3) == 1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOccupancy {
    /// `P(x1 = 1)`.
    pub p_one_infected: f64,
    /// `P(x2 = 1)`.
    pub p_two_infected: f64,
    /// `P(x1 = 1, x2 = 1)`.
    pub p_both_infected: f64,
}

pub fn pair_occupancy(pi: &SteadyState) -> Result<PairOccupancy> {
    check_pair(pi)?;
    Ok(PairOccupancy {
        p_one_infected: pi.mass(|l| l.bit(0) == 1),
        p_two_infected: pi.mass(|l| l.bit(2) == 1),
        p_both_infected: pi.mass(|l| l.bit(0) == 1 && l.bit(2) == 1),
    })
}

/// Residuals of the sixteen flow-conservation equations of the pair chain,
/// written out state by state (outflow minus inflow), in label order
/// `0000, 0001, …, 1111`. They hold for the [`Isolation::MarkedIsolated`]
/// rules and serve as an independent check of the rule-based construction.
pub fn pair_balance_residuals(pi: &SteadyState, params: &PairParams) -> Result<[f64; 16]> {
    check_pair(pi)?;
    let p = |bits: &str| pi.pi[usize::from_str_radix(bits, 2).expect("binary label")];
    let (l, l12, m, s, c) = (params.lambda, params.lambda12, params.mu, params.s, params.c);
    Ok([
        2.0 * l * p("0000") - (m * p("1000") + c * p("0100") + m * p("0010") + c * p("0001")),
        (2.0 * l + c) * p("0001") - (m * p("0011") + c * p("0101") + m * p("1001")),
        (l + l12 + m + s) * p("0010") - (c * p("0110") + m * p("1010") + l * p("0000")),
        (l + m) * p("0011") - (c * p("0111") + m * p("1011") + s * p("0010") + l * p("0001")),
        (2.0 * l + c) * p("0100") - (c * p("0101") + m * p("0110") + m * p("1100")),
        (2.0 * l + 2.0 * c) * p("0101") - (m * p("0111") + m * p("1101")),
        (l + m + s + c) * p("0110") - (l * p("0100") + m * p("1110")),
        (l + m + c) * p("0111") - (s * p("0110") + l * p("0101") + m * p("1111")),
        (l + l12 + m + s) * p("1000") - (l * p("0000") + c * p("1001") + m * p("1010")),
        (l + m + s + c) * p("1001") - (m * p("1011") + l * p("0001")),
        (2.0 * m + 2.0 * s) * p("1010") - ((l + l12) * p("1000") + (l + l12) * p("0010")),
        (2.0 * m + s) * p("1011") - (s * p("1010") + l * p("1001") + l * p("0011")),
        (l + m) * p("1100") - (s * p("1000") + l * p("0100") + c * p("1101") + m * p("1110")),
        (l + m + c) * p("1101") - (s * p("1001") + l * p("0101") + m * p("1111")),
        (2.0 * m + s) * p("1110") - (l * p("1100") + s * p("1010") + l * p("0110")),
        2.0 * m * p("1111") - (s * p("1110") + l * p("1101") + s * p("1011") + l * p("0111")),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn person(l: f64, m: f64) -> PersonParams {
        PersonParams::new(l, m).unwrap()
    }

    #[test]
    fn single_chain_unit_rates() {
        let g = build_single_chain(&person(1.0, 1.0), 1.0, 1.0).unwrap();
        assert_eq!(g.row_sum_defect(), 0.0);
        let pi = steady_state(&g).unwrap();
        assert!((pi.single(1, 0) - 1.0 / 6.0).abs() < 1e-14);
        assert!((pi.single(0, 1) - 1.0 / 6.0).abs() < 1e-14);
        assert!((pi.single(0, 0) - 1.0 / 3.0).abs() < 1e-14);
        assert!((pi.single(1, 1) - 1.0 / 3.0).abs() < 1e-14);
        // π00 = ((μ + s)/λ) π10 and π11 = ((c + λ)/μ) π01
        assert!((pi.single(0, 0) - 2.0 * pi.single(1, 0)).abs() < 1e-14);
        assert!((pi.single(1, 1) - 2.0 * pi.single(0, 1)).abs() < 1e-14);
    }

    #[test]
    fn untested_chain_splits_into_closed_classes() {
        let p = person(1.0, 1.0);
        let g = build_single_chain(&p, 0.0, 0.0).unwrap();
        // From (0,0) only (1,0) is reachable and vice versa.
        assert_eq!(g.rate(0, 1), 0.0);
        assert_eq!(g.rate(0, 3), 0.0);
        assert_eq!(g.rate(2, 1), 0.0);
        assert_eq!(g.rate(2, 3), 0.0);
        assert!(matches!(steady_state(&g), Err(Error::Numerical(_))));

        let pi = untested_steady_state(&person(2.0, 1.0), Estimate::Infected).unwrap();
        assert_eq!(pi.single(0, 0), 0.0);
        assert_eq!(pi.single(1, 0), 0.0);
        assert!((pi.single(1, 1) - 2.0 / 3.0).abs() < 1e-14);
        assert!((pi.single(0, 1) - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn two_state_birth_death() {
        let labels = vec![StateLabel::new(0, 1), StateLabel::new(1, 1)];
        let q = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 7.0, 0.0]);
        let pi = steady_state(&Generator::from_rates(labels, q).unwrap()).unwrap();
        assert!((pi.pi()[0] - 0.7).abs() < 1e-15);
        assert!((pi.pi()[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn equal_rates_give_uniform_distribution() {
        let labels = (0..5).map(|i| StateLabel::new(i, 3)).collect();
        let q = DMatrix::from_fn(5, 5, |i, j| if i == j { 0.0 } else { 2.5 });
        let pi = steady_state(&Generator::from_rates(labels, q).unwrap()).unwrap();
        assert!(pi.pi().iter().all(|p| (p - 0.2).abs() < 1e-15));
    }

    #[test]
    fn noisy_chain_collapses_without_errors() {
        let p = person(0.8, 1.7);
        let a = build_noisy_chain(&p, 2.2, &ErrorModel::PERFECT).unwrap();
        let b = build_single_chain(&p, 2.2, 2.2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noisy_chain_matches_reference_value() {
        let e = ErrorModel::new(0.1, 0.2).unwrap();
        let pi = steady_state(&build_noisy_chain(&person(1.0, 2.0), 3.0, &e).unwrap()).unwrap();
        assert!((pi.single(1, 0) + pi.single(0, 1) - 5.2 / 18.0).abs() < 1e-14);
    }

    #[test]
    fn noisy_chain_matches_closed_form_states() {
        let (l, m, v, p, q) = (1.3, 0.6, 2.4, 0.15, 0.35);
        let e = ErrorModel::new(p, q).unwrap();
        let pi = steady_state(&build_noisy_chain(&person(l, m), v, &e).unwrap()).unwrap();
        let d = (l + m) * (l + m + v);
        let expected = [
            (m * l * q + (1.0 - p) * m * (v + m)) / d,
            (m * l * (1.0 - q) + p * m * (v + m)) / d,
            (m * l * (1.0 - p) + q * l * (v + l)) / d,
            (m * l * p + (1.0 - q) * l * (v + l)) / d,
        ];
        for (a, b) in pi.pi().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn pair_chain_rows_sum_to_zero() {
        let g = build_pair_chain(&PairParams::new(2.5, 10.0, 5.0, 3.0, 4.0).unwrap()).unwrap();
        assert!(g.row_sum_defect() < 1e-12);
        assert_eq!(g.labels()[6].to_string(), "0110");
    }

    #[test]
    fn pair_chain_is_product_form_without_coupling() {
        let (l, m, s, c) = (2.5, 5.0, 3.0, 7.0);
        let pi = steady_state(&build_pair_chain(&PairParams::new(l, 0.0, m, s, c).unwrap()).unwrap()).unwrap();
        let single = steady_state(&build_single_chain(&person(l, m), s, c).unwrap()).unwrap();
        for (k, label) in pi.labels().iter().enumerate() {
            let a = single.single(label.bit(0), label.bit(1));
            let b = single.single(label.bit(2), label.bit(3));
            assert!((pi.pi()[k] - a * b).abs() < 1e-12);
        }
        let occ = pair_occupancy(&pi).unwrap();
        assert!((occ.p_one_infected - 1.0 / 3.0).abs() < 1e-12);
        assert!((occ.p_both_infected - 1.0 / 9.0).abs() < 1e-12);
        let err = pair_error_metrics(&pi).unwrap();
        assert!((err.d11 - single.single(1, 0)).abs() < 1e-12);
        assert!((err.d11 - err.d21).abs() < 1e-12);
        assert!((err.d12 - err.d22).abs() < 1e-12);
    }

    #[test]
    fn pair_balance_equations_hold_for_marked_isolation() {
        let params = PairParams::new(2.5, 10.0, 5.0, 5.0, 5.0).unwrap();
        let pi = steady_state(&build_pair_chain(&params).unwrap()).unwrap();
        let res = pair_balance_residuals(&pi, &params).unwrap();
        assert!(res.iter().all(|r| r.abs() < 1e-12), "{res:?}");
    }

    #[test]
    fn balance_equations_detect_other_isolation_rule() {
        let params = PairParams::new(2.5, 10.0, 5.0, 5.0, 5.0)
            .unwrap()
            .with_isolation(Isolation::DetectedSourceOnly);
        let pi = steady_state(&build_pair_chain(&params).unwrap()).unwrap();
        let res = pair_balance_residuals(&pi, &params).unwrap();
        assert!(res.iter().any(|r| r.abs() > 1e-6));
    }

    #[test]
    fn pair_metrics_reject_wrong_dimension() {
        let pi = steady_state(&build_single_chain(&person(1.0, 1.0), 1.0, 1.0).unwrap()).unwrap();
        assert!(pair_error_metrics(&pi).is_err());
        assert!(pair_occupancy(&pi).is_err());
    }
}
