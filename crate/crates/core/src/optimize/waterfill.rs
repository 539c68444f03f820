use crate::error::{Error, Result};

/// Output of [`waterfill`].
#[derive(Debug, Clone, PartialEq)]
pub struct WaterFill {
    pub u: Vec<f64>,
    /// Budget multiplier; `None` when no entry has a positive score and
    /// nothing is allocated.
    pub beta: Option<f64>,
}

/// Splits `budget` over entries `u_j = a_j (sqrt(phi_j / beta) - 1)^+` with
/// `Σ u_j = budget`.
///
/// Entries with `phi_j <= 0` or `a_j = 0` never receive anything. The
/// multiplier is solved in closed form on the active set; the weakest
/// active entry is dropped while its score is below the multiplier.
pub fn waterfill(coeff: &[f64], phi: &[f64], budget: f64) -> Result<WaterFill> {
    if coeff.len() != phi.len() {
        return Err(Error::param(format!(
            "{} coefficients for {} scores",
            coeff.len(),
            phi.len()
        )));
    }
    if !(budget.is_finite() && budget > 0.0) {
        return Err(Error::param(format!("budget must be positive, got {budget}")));
    }
    if coeff.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
        return Err(Error::param("water-filling coefficients must be finite and non-negative"));
    }

    let mut active: Vec<usize> = (0..phi.len())
        .filter(|&j| phi[j] > 0.0 && phi[j].is_finite() && coeff[j] > 0.0)
        .collect();
    let mut u = vec![0.0; phi.len()];
    if active.is_empty() {
        return Ok(WaterFill { u, beta: None });
    }
    // Drop order: ascending score, ties by index.
    active.sort_by(|&a, &b| phi[a].total_cmp(&phi[b]).then(a.cmp(&b)));

    let mut first = 0;
    let beta = loop {
        let set = &active[first..];
        let weighted: f64 = set.iter().map(|&j| coeff[j] * phi[j].sqrt()).sum();
        let mass: f64 = set.iter().map(|&j| coeff[j]).sum();
        let root = weighted / (budget + mass);
        let beta = root * root;
        if phi[set[0]] < beta && set.len() > 1 {
            first += 1;
        } else {
            break beta;
        }
    };
    for &j in &active[first..] {
        u[j] = coeff[j] * ((phi[j] / beta).sqrt() - 1.0).max(0.0);
    }
    Ok(WaterFill { u, beta: Some(beta) })
}
