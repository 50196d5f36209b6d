//! Private selection among candidate hyperparameters.

mod score;
mod select;
mod tnb;

pub use score::{score, vc_penalty, ScoreKind, ScoreSpec};
pub use select::{iter_tune, priv_tune, CandidateScore, TuneOutcome, DEFAULT_RUN_CAP};
pub use tnb::{
    rate_for_miss_prob, sample_tnb, sample_tnb_with, tnb_mean, tnb_not_selected_prob, tnb_pgf, tnb_pmf, TnbDist,
};

use crate::projection::JlMatrix;

/// A margin guess with the projection sampled for it.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub gamma: f64,
    pub phi: JlMatrix,
}
