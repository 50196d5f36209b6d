//! Noisy-argmin selectors over candidate base runs.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::tnb::{sample_tnb, TnbDist};
use crate::error::{Error, Result};
use crate::optimizer::LinearModel;
use crate::privacy::{per_candidate_budget, priv_tune_run_budget, NoiseRecord};
use crate::rng::{derive_seed, stream_rng};

/// Default ceiling on the number of runs of the randomized tuner.
pub const DEFAULT_RUN_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScore {
    pub index: usize,
    pub score: f64,
    pub noisy_score: f64,
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub model: LinearModel,
    /// Index of the winning candidate.
    pub index: usize,
    pub score: f64,
    pub noisy_score: f64,
    /// Base runs performed.
    pub runs: u64,
    /// How often each candidate was run.
    pub runs_per_candidate: Vec<u64>,
    /// Per-run scores for the iterate tuner; empty for the randomized one.
    pub trace: Vec<CandidateScore>,
    pub base_mu: f64,
    pub score_noise: NoiseRecord,
}

fn gaussian(seed: u64, sigma: f64) -> f64 {
    let z: f64 = StandardNormal.sample(&mut stream_rng(seed, 0));
    sigma * z
}

fn wrap(index: usize, e: Error) -> Error {
    Error::Candidate { index, source: Box::new(e) }
}

/// Runs `base(i, μ/√(2m), seed_i)` for every candidate, perturbs each
/// `score(model, i)` with `N(0, 2mΔ²/μ²)`, and returns the noisy argmin
/// (first index on ties).
pub fn iter_tune<B, S>(
    candidates: usize,
    mu: f64,
    score_sensitivity: f64,
    seed: u64,
    base: B,
    score: S,
) -> Result<TuneOutcome>
where
    B: Fn(usize, f64, u64) -> Result<LinearModel> + Sync,
    S: Fn(&LinearModel, usize) -> Result<f64> + Sync,
{
    if candidates == 0 {
        return Err(Error::Domain("iterate tuner needs at least one candidate".into()));
    }
    let split = per_candidate_budget(mu, candidates)?;
    let sigma = split.score_sigma(score_sensitivity);
    let runs: Vec<Result<(LinearModel, f64, f64)>> = (0..candidates)
        .into_par_iter()
        .map(|i| {
            let model = base(i, split.base_mu, derive_seed(seed, "base", i as u64)).map_err(|e| wrap(i, e))?;
            let s = score(&model, i).map_err(|e| wrap(i, e))?;
            let noisy = s + gaussian(derive_seed(seed, "score", i as u64), sigma);
            Ok((model, s, noisy))
        })
        .collect();
    let runs: Vec<(LinearModel, f64, f64)> = runs.into_iter().collect::<Result<_>>()?;
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.2 < runs[best].2 {
            best = i;
        }
    }
    let trace = runs
        .iter()
        .enumerate()
        .map(|(index, r)| CandidateScore { index, score: r.1, noisy_score: r.2 })
        .collect();
    let (model, s, noisy) = runs.into_iter().nth(best).unwrap();
    Ok(TuneOutcome {
        model,
        index: best,
        score: s,
        noisy_score: noisy,
        runs: candidates as u64,
        runs_per_candidate: vec![1; candidates],
        trace,
        base_mu: split.base_mu,
        score_noise: NoiseRecord {
            source: "iterate-score".into(),
            sensitivity: score_sensitivity,
            mu: split.base_mu,
            sigma,
            repetitions: 1,
        },
    })
}

type Run = (usize, std::result::Result<(f64, usize, LinearModel, f64), Error>);

/// Keeps the earliest failure, else the smallest `(noisy score, run index)`.
fn better(a: Run, b: Run) -> Run {
    match (&a.1, &b.1) {
        (Err(_), Err(_)) => {
            if a.0 <= b.0 {
                a
            } else {
                b
            }
        }
        (Err(_), _) => a,
        (_, Err(_)) => b,
        (Ok(x), Ok(y)) => match x.0.total_cmp(&y.0) {
            std::cmp::Ordering::Less => a,
            std::cmp::Ordering::Greater => b,
            std::cmp::Ordering::Equal => {
                if a.0 <= b.0 {
                    a
                } else {
                    b
                }
            }
        },
    }
}

/// Draws `K ~ dist`, runs `base` at `μ/√2` on `K` uniformly drawn candidates,
/// perturbs each score with `N(0, 2Δ²/μ²)` and returns the noisy argmin
/// (first run on ties).
#[allow(clippy::too_many_arguments)]
pub fn priv_tune<B, S>(
    candidates: usize,
    dist: &TnbDist,
    mu: f64,
    score_sensitivity: f64,
    seed: u64,
    run_cap: u64,
    base: B,
    score: S,
) -> Result<TuneOutcome>
where
    B: Fn(usize, f64, u64) -> Result<LinearModel> + Sync,
    S: Fn(&LinearModel, usize) -> Result<f64> + Sync,
{
    if candidates == 0 {
        return Err(Error::Domain("randomized tuner needs at least one candidate".into()));
    }
    let split = priv_tune_run_budget(mu)?;
    let sigma = split.score_sigma(score_sensitivity);
    let k = sample_tnb(dist, derive_seed(seed, "runs", 0))?;
    if k > run_cap {
        return Err(Error::Resource(format!("randomized tuner drew {k} runs, above the cap {run_cap}")));
    }
    let mut pick_rng = stream_rng(derive_seed(seed, "pick", 0), 0);
    let picks: Vec<usize> = (0..k).map(|_| pick_rng.random_range(0..candidates)).collect();
    let mut runs_per_candidate = vec![0u64; candidates];
    for &p in &picks {
        runs_per_candidate[p] += 1;
    }
    let (_, winner) = picks
        .par_iter()
        .enumerate()
        .map(|(t, &i)| -> Run {
            let res = (|| {
                let model =
                    base(i, split.base_mu, derive_seed(seed, "run", t as u64)).map_err(|e| wrap(i, e))?;
                let s = score(&model, i).map_err(|e| wrap(i, e))?;
                let noisy = s + gaussian(derive_seed(seed, "run-score", t as u64), sigma);
                Ok((noisy, i, model, s))
            })();
            (t, res)
        })
        .reduce_with(better)
        .expect("at least one run");
    let (noisy, index, model, s) = winner?;
    Ok(TuneOutcome {
        model,
        index,
        score: s,
        noisy_score: noisy,
        runs: k,
        runs_per_candidate,
        trace: Vec::new(),
        base_mu: split.base_mu,
        score_noise: NoiseRecord {
            source: "priv-tune-score".into(),
            sensitivity: score_sensitivity,
            mu: split.base_mu,
            sigma,
            repetitions: 1,
        },
    })
}
