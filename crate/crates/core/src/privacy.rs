//! Gaussian-DP accounting: composition, conversion to (ε,δ), and the budget
//! splits used by the tuners. Every noise scale in the crate comes from here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Domain(format!("mu must be positive and finite, got {mu}")));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must lie in (0,1), got {delta}")));
    }
    Ok(())
}

/// `√(Σ μᵢ²)`.
pub fn compose_gdp(budgets: &[f64]) -> Result<f64> {
    if budgets.is_empty() {
        return Err(Error::Domain("cannot compose an empty list of budgets".into()));
    }
    for &m in budgets {
        check_mu(m)?;
    }
    Ok(budgets.iter().map(|m| m * m).sum::<f64>().sqrt())
}

/// `μ²/2 + μ√(2 ln(1/δ))`.
pub fn gdp_to_approx_dp(mu: f64, delta: f64) -> Result<f64> {
    check_mu(mu)?;
    check_delta(delta)?;
    Ok(0.5 * mu * mu + mu * (2.0 * (1.0 / delta).ln()).sqrt())
}

/// `2μ√(2 ln(1/δ))`, valid for `μ ≤ 2√(2 ln(1/δ))`.
pub fn gdp_to_approx_dp_high_privacy(mu: f64, delta: f64) -> Result<f64> {
    check_mu(mu)?;
    check_delta(delta)?;
    let root = (2.0 * (1.0 / delta).ln()).sqrt();
    if mu > 2.0 * root {
        return Err(Error::Precondition(format!(
            "high-privacy conversion needs mu <= 2*sqrt(2 ln(1/delta)) = {}, got {mu}",
            2.0 * root
        )));
    }
    Ok(2.0 * mu * root)
}

/// Total GDP budget for the iterate tuner: `ε / (2√(2 ln(1/δ)))`.
pub fn master_iter_budget(epsilon: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let cap = 8.0 * (1.0 / delta).ln();
    if !(epsilon > 0.0 && epsilon <= cap) {
        return Err(Error::Precondition(format!(
            "epsilon must lie in (0, 8 ln(1/delta)] = (0, {cap}], got {epsilon}"
        )));
    }
    Ok(epsilon / (2.0 * (2.0 * (1.0 / delta).ln()).sqrt()))
}

/// Budget of one base run and the score-noise multiplier under the iterate tuner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateBudget {
    pub base_mu: f64,
    /// Score noise std per unit of score sensitivity.
    pub score_sigma_factor: f64,
}

impl CandidateBudget {
    pub fn score_sigma(&self, sensitivity: f64) -> f64 {
        sensitivity * self.score_sigma_factor
    }
}

/// `μ/√(2|Θ|)` per base run and score noise `Δ√(2|Θ|)/μ`.
pub fn per_candidate_budget(mu: f64, grid_size: usize) -> Result<CandidateBudget> {
    check_mu(mu)?;
    if grid_size == 0 {
        return Err(Error::Domain("grid size must be at least 1".into()));
    }
    let two_g = 2.0 * grid_size as f64;
    Ok(CandidateBudget { base_mu: mu / two_g.sqrt(), score_sigma_factor: two_g.sqrt() / mu })
}

/// Per-run split for the randomized tuner: `μ/√2` and score noise `Δ√2/μ`.
pub fn priv_tune_run_budget(mu: f64) -> Result<CandidateBudget> {
    per_candidate_budget(mu, 1)
}

/// `(3/2)μ² + 3μ√(2 ln(1/(rδ))) + δ`.
pub fn tnb_tune_privacy(mu: f64, r: f64, delta: f64) -> Result<f64> {
    check_mu(mu)?;
    check_delta(delta)?;
    check_rate(r)?;
    let root = (2.0 * (1.0 / (r * delta)).ln()).sqrt();
    Ok(1.5 * mu * mu + 3.0 * mu * root + delta)
}

/// `6μ√(2 ln(1/(rδ))) + δ`, valid for `μ ≤ 2√(2 ln(1/(rδ)))`.
pub fn tnb_tune_privacy_simplified(mu: f64, r: f64, delta: f64) -> Result<f64> {
    check_mu(mu)?;
    check_delta(delta)?;
    check_rate(r)?;
    let root = (2.0 * (1.0 / (r * delta)).ln()).sqrt();
    if mu > 2.0 * root {
        return Err(Error::Precondition(format!(
            "simplified bound needs mu <= 2*sqrt(2 ln(1/(r delta))) = {}, got {mu}",
            2.0 * root
        )));
    }
    Ok(6.0 * mu * root + delta)
}

fn check_rate(r: f64) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("r must lie in (0,1), got {r}")));
    }
    Ok(())
}

/// `(μ, r)` for the randomized tuner with `r = 1/(|Θ|(n²−1))`.
pub fn master_tnb_budget(epsilon: f64, delta: f64, grid_size: usize, n: usize) -> Result<(f64, f64)> {
    check_delta(delta)?;
    if grid_size == 0 || n < 2 {
        return Err(Error::Domain(format!("need grid size >= 1 and n >= 2, got {grid_size}, {n}")));
    }
    let nn = n as f64;
    let inv_r = grid_size as f64 * (nn * nn - 1.0);
    let log_term = (inv_r / delta).ln();
    let cap = 24.0 * log_term;
    if !(epsilon > delta && epsilon < cap) {
        return Err(Error::Precondition(format!(
            "epsilon must lie in (delta, 24 ln(|grid|(n^2-1)/delta)) = ({delta}, {cap}), got {epsilon}"
        )));
    }
    let mu = epsilon / (6.0 * (2.0 * log_term).sqrt());
    let r = 1.0 / inv_r;
    check_rate(r)?;
    Ok((mu, r))
}

/// Per-coordinate Gaussian std for noisy gradient descent: `Δ√T/μ`.
pub fn ngd_noise_sigma(sensitivity: f64, iterations: u64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    if !(sensitivity >= 0.0) || iterations == 0 {
        return Err(Error::Domain("sensitivity must be nonnegative and T positive".into()));
    }
    Ok(sensitivity * (iterations as f64).sqrt() / mu)
}

/// One Gaussian noise injection, as recorded in model provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub source: String,
    pub sensitivity: f64,
    pub mu: f64,
    pub sigma: f64,
    /// Number of compositions at this scale (iterations, or 1).
    pub repetitions: u64,
}

impl NoiseRecord {
    /// The GDP parameter this record accounts for: `√reps · Δ/σ`.
    pub fn effective_mu(&self) -> f64 {
        if self.sigma == 0.0 {
            f64::INFINITY
        } else {
            (self.repetitions as f64).sqrt() * self.sensitivity / self.sigma
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TunerKind {
    Iterate,
    PrivTune,
}

/// Privacy statement for a full run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyLedger {
    pub tuner: TunerKind,
    pub requested_epsilon: f64,
    pub delta: f64,
    pub mu_total: f64,
    pub base_mu: f64,
    pub score_sigma: f64,
    pub grid_size: usize,
    /// Run-count rate for the randomized tuner.
    pub r: Option<f64>,
    pub composed_mu: f64,
    /// The guarantee actually granted: `(ε, δ)` for iterate, `(ε+δ, δ)` for priv-tune.
    pub guaranteed_epsilon: f64,
    pub guaranteed_delta: f64,
}

impl PrivacyLedger {
    /// Ledger for the iterate tuner at `(ε, δ)` over `grid_size` candidates.
    pub fn iterate(epsilon: f64, delta: f64, grid_size: usize, score_sensitivity: f64) -> Result<Self> {
        let mu = master_iter_budget(epsilon, delta)?;
        let split = per_candidate_budget(mu, grid_size)?;
        // base runs and noisy scores share the split equally
        let composed = compose_gdp(&vec![split.base_mu; 2 * grid_size])?;
        let eps = gdp_to_approx_dp_high_privacy(composed, delta)?;
        Ok(PrivacyLedger {
            tuner: TunerKind::Iterate,
            requested_epsilon: epsilon,
            delta,
            mu_total: mu,
            base_mu: split.base_mu,
            score_sigma: split.score_sigma(score_sensitivity),
            grid_size,
            r: None,
            composed_mu: composed,
            guaranteed_epsilon: eps,
            guaranteed_delta: delta,
        })
    }

    /// Ledger for the randomized tuner with run-count rate `1/(|Θ|(n²−1))`.
    pub fn priv_tune(epsilon: f64, delta: f64, grid_size: usize, n: usize, score_sensitivity: f64) -> Result<Self> {
        let (mu, r) = master_tnb_budget(epsilon, delta, grid_size, n)?;
        let split = priv_tune_run_budget(mu)?;
        let composed = compose_gdp(&[split.base_mu, split.base_mu])?;
        let eps = tnb_tune_privacy_simplified(composed, r, delta)?;
        Ok(PrivacyLedger {
            tuner: TunerKind::PrivTune,
            requested_epsilon: epsilon,
            delta,
            mu_total: mu,
            base_mu: split.base_mu,
            score_sigma: split.score_sigma(score_sensitivity),
            grid_size,
            r: Some(r),
            composed_mu: composed,
            guaranteed_epsilon: eps,
            guaranteed_delta: delta,
        })
    }

    /// Whether the split composes back to the total budget.
    pub fn round_trip_ok(&self) -> bool {
        (self.composed_mu - self.mu_total).abs() <= 1e-12 * self.mu_total.max(1.0)
    }

    pub fn statement(&self) -> String {
        match self.tuner {
            TunerKind::Iterate => format!(
                "({}, {})-DP via {}-GDP",
                self.guaranteed_epsilon, self.guaranteed_delta, self.mu_total
            ),
            TunerKind::PrivTune => format!(
                "(epsilon+delta, delta) = ({}, {})-DP via randomized tuning at {}-GDP per run",
                self.guaranteed_epsilon, self.guaranteed_delta, self.mu_total
            ),
        }
    }
}
