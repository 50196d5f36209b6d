//! The adaptive-margin mechanism: a doubling grid of margin guesses, one JL
//! projection per guess, noisy descent per candidate, and private selection.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::data::{masks_with_popcount, min_outliers_oracle, subset_separator, Dataset};
use crate::error::{Error, Result};
use crate::optimizer::{jlgd, LinearModel, NgdConfig, OutputMode, DEFAULT_T_CAP};
use crate::privacy::{PrivacyLedger, TunerKind};
use crate::projection::{projection_dim_with, sample_jl, C_JL};
use crate::rng::derive_seed;
use crate::tuning::{iter_tune, priv_tune, score, Candidate, ScoreKind, ScoreSpec, TnbDist, DEFAULT_RUN_CAP};

/// `{b·2^j/n : 0 ≤ j ≤ ⌊log₂ n⌋} ∪ {b}`, ascending and deduplicated.
pub fn margin_grid(n: usize, b: f64) -> Result<Vec<f64>> {
    if n < 2 || !(b > 0.0 && b.is_finite()) {
        return Err(Error::Domain(format!("margin grid needs n >= 2 and b > 0, got n={n}, b={b}")));
    }
    let top = usize::BITS - 1 - n.leading_zeros();
    let mut grid: Vec<f64> = (0..=top).map(|j| b * (1u64 << j) as f64 / n as f64).collect();
    if *grid.last().unwrap() != b {
        grid.push(b);
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasterConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub tuner: TunerKind,
    pub score_kind: ScoreKind,
    /// `None` picks last-iterate for the penalized score, averaged otherwise.
    pub output_mode: Option<OutputMode>,
    /// JL failure probability; `None` means `1/n²`.
    pub jl_failure_beta: Option<f64>,
    pub seed: u64,
    pub c_jl: f64,
    pub t_cap: u64,
    pub run_cap: u64,
}

impl MasterConfig {
    pub fn new(epsilon: f64, delta: f64, seed: u64) -> Self {
        MasterConfig {
            epsilon,
            delta,
            tuner: TunerKind::Iterate,
            score_kind: ScoreKind::EmpiricalZeroOne,
            output_mode: None,
            jl_failure_beta: None,
            seed,
            c_jl: C_JL,
            t_cap: DEFAULT_T_CAP,
            run_cap: DEFAULT_RUN_CAP,
        }
    }

    pub fn mode(&self) -> OutputMode {
        self.output_mode.unwrap_or(match self.score_kind {
            ScoreKind::PenalizedPopulation => OutputMode::LastIterate,
            ScoreKind::EmpiricalZeroOne => OutputMode::Averaged,
        })
    }

    pub fn beta(&self, n: usize) -> f64 {
        self.jl_failure_beta.unwrap_or(1.0 / (n as f64 * n as f64))
    }

    /// The privacy ledger this configuration grants on `n` points, or the
    /// precondition it violates.
    pub fn ledger(&self, n: usize, b: f64) -> Result<PrivacyLedger> {
        let grid = margin_grid(n, b)?.len();
        let sens = ScoreSpec::of_kind(self.score_kind).sensitivity;
        match self.tuner {
            TunerKind::Iterate => PrivacyLedger::iterate(self.epsilon, self.delta, grid, sens),
            TunerKind::PrivTune => PrivacyLedger::priv_tune(self.epsilon, self.delta, grid, n, sens),
        }
    }
}

/// Margin candidates with their projections. Depends only on the public
/// sizes `(n, b, d)` and the seed, never on the data.
pub fn build_candidates(n: usize, b: f64, d: usize, cfg: &MasterConfig) -> Result<Vec<Candidate>> {
    let grid = margin_grid(n, b)?;
    let beta = cfg.beta(n);
    grid.iter()
        .enumerate()
        .map(|(i, &gamma)| {
            let k = projection_dim_with(cfg.c_jl, gamma, n, grid.len(), beta, b)?;
            let phi = sample_jl(k, d, derive_seed(cfg.seed, "jl", i as u64))?;
            Ok(Candidate { gamma, phi })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct MasterOutput {
    pub model: LinearModel,
    pub gamma_out: f64,
    pub jl_seed: u64,
    pub k: usize,
    pub ledger: PrivacyLedger,
    pub grid: Vec<f64>,
    pub selected_index: usize,
    pub runs: u64,
}

/// Trains on `s` with the configured tuner.
pub fn dp_adaptive_margin(s: &Dataset, cfg: &MasterConfig) -> Result<MasterOutput> {
    let (n, b, d) = (s.len(), s.norm_bound(), s.dim());
    let ledger = cfg.ledger(n, b)?;
    let candidates = build_candidates(n, b, d, cfg)?;
    let spec = ScoreSpec::of_kind(cfg.score_kind);
    let mode = cfg.mode();
    let base = |i: usize, mu: f64, seed: u64| -> Result<LinearModel> {
        let cand = &candidates[i];
        let mut ngd = NgdConfig::new(mode, seed);
        ngd.t_cap = cfg.t_cap;
        let mut m = jlgd(&cand.phi, cand.gamma / 3.0, s, mu, &ngd)?;
        m.provenance.gamma = Some(cand.gamma);
        Ok(m)
    };
    let scorer = |m: &LinearModel, _: usize| score(m, s, &spec);
    let outcome = match cfg.tuner {
        TunerKind::Iterate => iter_tune(candidates.len(), ledger.mu_total, spec.sensitivity, cfg.seed, base, scorer)?,
        TunerKind::PrivTune => {
            let dist = TnbDist::geometric(ledger.r.expect("randomized ledger carries r"))?;
            priv_tune(
                candidates.len(),
                &dist,
                ledger.mu_total,
                spec.sensitivity,
                cfg.seed,
                cfg.run_cap,
                base,
                scorer,
            )?
        }
    };
    let winner = &candidates[outcome.index];
    Ok(MasterOutput {
        gamma_out: winner.gamma,
        jl_seed: winner.phi.seed(),
        k: winner.phi.k(),
        model: outcome.model,
        ledger,
        grid: candidates.iter().map(|c| c.gamma).collect(),
        selected_index: outcome.index,
        runs: outcome.runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timestamps {
    pub started: String,
    pub finished: String,
}

impl Timestamps {
    /// Wall-clock times, or `SOURCE_DATE_EPOCH` for both when that is set.
    pub fn capture(started: SystemTime) -> Self {
        match std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.trim().parse::<i64>().ok()) {
            Some(fixed) => Timestamps { started: rfc3339(fixed), finished: rfc3339(fixed) },
            None => Timestamps { started: rfc3339(unix_secs(started)), finished: rfc3339(unix_secs(SystemTime::now())) },
        }
    }
}

fn unix_secs(t: SystemTime) -> i64 {
    match t.duration_since(UNIX_EPOCH) {
        Ok(d) => d.as_secs() as i64,
        Err(e) => -(e.duration().as_secs() as i64),
    }
}

/// UTC `YYYY-MM-DDTHH:MM:SSZ` from Unix seconds.
pub fn rfc3339(secs: i64) -> String {
    let days = secs.div_euclid(86_400);
    let tod = secs.rem_euclid(86_400);
    // civil-from-days
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = doy - (153 * mp + 2) / 5 + 1;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    let year = yoe + era * 400 + i64::from(month <= 2);
    format!("{year:04}-{month:02}-{day:02}T{:02}:{:02}:{:02}Z", tod / 3600, tod % 3600 / 60, tod % 60)
}

/// Trained model as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub weights: Vec<f64>,
    pub d: usize,
    pub gamma_out: f64,
    pub k: usize,
    pub jl_seed: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub tuner: TunerKind,
    pub score_kind: ScoreKind,
    pub output_mode: OutputMode,
    pub seed: u64,
    pub hinge_c: f64,
    pub ledger: PrivacyLedger,
    pub timestamps: Timestamps,
}

impl ModelDocument {
    pub fn new(out: &MasterOutput, cfg: &MasterConfig, timestamps: Timestamps) -> Self {
        ModelDocument {
            weights: out.model.weights.clone(),
            d: out.model.ambient_dim,
            gamma_out: out.gamma_out,
            k: out.k,
            jl_seed: out.jl_seed,
            epsilon: cfg.epsilon,
            delta: cfg.delta,
            tuner: cfg.tuner,
            score_kind: cfg.score_kind,
            output_mode: cfg.mode(),
            seed: cfg.seed,
            hinge_c: out.model.provenance.hinge_c,
            ledger: out.ledger.clone(),
            timestamps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCompetitiveness {
    pub grid_min: f64,
    pub continuous_min: f64,
    pub ratio: f64,
}

/// Largest dataset accepted by [`grid_competitiveness_check`].
pub const COMPETITIVENESS_CAP: usize = 12;

fn rate(removed: usize, n: usize, gamma: f64, epsilon: f64) -> f64 {
    let n = n as f64;
    (removed as f64 / (n * gamma) + 1.0 / (n * gamma * gamma * epsilon)).min(1.0)
}

/// Compares the best rate over the doubling grid with the best rate over all
/// removal sets, each rate being `min(|S_out|/(nγ) + 1/(nγ²ε), 1)`.
pub fn grid_competitiveness_check(s: &Dataset, epsilon: f64) -> Result<GridCompetitiveness> {
    let n = s.len();
    if n > COMPETITIVENESS_CAP {
        return Err(Error::Size { n, cap: COMPETITIVENESS_CAP });
    }
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let tol = 1e-9;
    let mut grid_min = f64::INFINITY;
    for gamma in margin_grid(n, s.norm_bound())? {
        let w = min_outliers_oracle(s, gamma, tol)?;
        grid_min = grid_min.min(rate(w.count, n, gamma, epsilon));
    }
    let mut continuous_min = 1.0f64;
    for removed in 0..n {
        for mask in masks_with_popcount(n, removed) {
            let keep: Vec<usize> = (0..n).filter(|i| mask & (1 << i) == 0).collect();
            let margin = subset_separator(s, &keep, tol)?.margin;
            if margin > 0.0 {
                continuous_min = continuous_min.min(rate(removed, n, margin, epsilon));
            }
        }
    }
    Ok(GridCompetitiveness { grid_min, continuous_min, ratio: grid_min / continuous_min })
}
