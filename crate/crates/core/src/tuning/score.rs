use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::misclassified;
use crate::optimizer::LinearModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    EmpiricalZeroOne,
    PenalizedPopulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSpec {
    pub kind: ScoreKind,
    /// Confidence parameter of the penalty; `None` means `1/n²`.
    pub beta: Option<f64>,
    /// Sensitivity of the score under replacement of one point.
    pub sensitivity: f64,
}

impl ScoreSpec {
    pub fn empirical() -> Self {
        ScoreSpec { kind: ScoreKind::EmpiricalZeroOne, beta: None, sensitivity: 1.0 }
    }

    pub fn penalized(beta: Option<f64>) -> Self {
        ScoreSpec { kind: ScoreKind::PenalizedPopulation, beta, sensitivity: 1.0 }
    }

    pub fn of_kind(kind: ScoreKind) -> Self {
        match kind {
            ScoreKind::EmpiricalZeroOne => Self::empirical(),
            ScoreKind::PenalizedPopulation => Self::penalized(None),
        }
    }
}

/// `(5/2)(k ln(2n) + ln(4/β))`.
pub fn vc_penalty(k: usize, n: usize, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) || n == 0 {
        return Err(Error::Domain(format!("penalty needs beta in (0,1) and n >= 1, got {beta}, {n}")));
    }
    Ok(2.5 * (k as f64 * (2.0 * n as f64).ln() + (4.0 / beta).ln()))
}

/// Summed zero-one loss, plus the VC penalty for the penalized kind.
pub fn score(model: &LinearModel, s: &Dataset, spec: &ScoreSpec) -> Result<f64> {
    let errors = misclassified(&model.weights, s)? as f64;
    match spec.kind {
        ScoreKind::EmpiricalZeroOne => Ok(errors),
        ScoreKind::PenalizedPopulation => {
            let k = model.provenance.k.ok_or_else(|| {
                Error::MissingContext("penalized score needs the candidate projection dimension".into())
            })?;
            let n = s.len();
            let beta = spec.beta.unwrap_or(1.0 / (n as f64 * n as f64));
            Ok(errors + vc_penalty(k, n, beta)?)
        }
    }
}
