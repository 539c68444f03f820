//! Test-rate allocation under a total budget `C`.
//!
//! * [`alternating_minimize`]: mark-dependent rates `(s_i, c_i)` for the
//!   weighted real-time metric. The problem is non-convex, so the result is
//!   the best of several random restarts, not a certified optimum.
//! * [`optimize_noisy`]: one rate `v_i` per person with erroneous tests.
//! * [`optimize_aoii`]: one error-free rate `w_i` per person under AoII.
//!
//! The last two solve the convex problem over a tested set and then greedily
//! move to "untested" the person who gains most from it, until nobody does.

mod alternating;
mod greedy;
mod waterfill;

pub use alternating::{alternating_minimize, kkt_residual, phi, AlternatingOptions};
pub use greedy::{aoii_rates_for_multiplier, optimize_aoii, optimize_noisy, noisy_score};
pub use waterfill::{waterfill, WaterFill};

use crate::model::{Estimate, TestPolicy};

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub policies: Vec<TestPolicy>,
    /// Metric value of each person under its policy.
    pub per_person_delta: Vec<f64>,
    /// Mean of `per_person_delta`.
    pub aggregate_delta: f64,
    /// Persons without tests and the constant estimate reported for them.
    pub untested: Vec<(usize, Estimate)>,
    /// Multiplier of the budget constraint; zero when nobody is tested.
    pub beta: f64,
    /// Largest violation of the stationarity conditions at the result.
    pub kkt_residual: f64,
    pub iterations: usize,
    pub restarts_used: usize,
}

impl AllocationResult {
    pub fn total_rate(&self) -> f64 {
        self.policies.iter().map(TestPolicy::budget).sum()
    }

    pub fn tested_count(&self) -> usize {
        self.policies.iter().filter(|p| p.is_tested()).count()
    }

    pub fn is_tested(&self, person: usize) -> bool {
        self.policies[person].is_tested()
    }

    /// Rate vector of a single-rate allocation (zero for untested persons).
    pub fn single_rates(&self) -> Vec<f64> {
        self.policies
            .iter()
            .map(|p| match *p {
                TestPolicy::Single { rate } => rate,
                TestPolicy::Pair { s, c } if s == c => s,
                _ => 0.0,
            })
            .collect()
    }

    /// `(s_i, c_i)` of a mark-dependent allocation.
    pub fn pair_rates(&self) -> Vec<(f64, f64)> {
        self.policies
            .iter()
            .map(|p| match *p {
                TestPolicy::Pair { s, c } => (s, c),
                TestPolicy::Single { rate } => (rate, rate),
                TestPolicy::Untested { .. } => (0.0, 0.0),
            })
            .collect()
    }
}
