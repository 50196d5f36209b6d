//! Noisy full-batch subgradient descent on the summed hinge loss, plain and
//! behind a JL projection.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, PointRef};
use crate::error::{Error, Result};
use crate::loss::{accumulate_hinge_subgrad, hinge_sensitivity, Neighbor};
use crate::privacy::{ngd_noise_sigma, NoiseRecord};
use crate::projection::{project_and_clip, JlMatrix, SubspaceEmbedding};
use crate::rng::stream_rng;

/// Default ceiling on the iteration count.
pub const DEFAULT_T_CAP: u64 = 10_000_000;

/// Failure probability in the last-iterate step size.
pub const BETA_OPT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    Averaged,
    LastIterate,
}

/// Explicit replacements for the derived `T`, `σ`, `η`. Any override of `σ`
/// or `η` voids the privacy guarantee and is meant for testing.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NgdOverrides {
    pub iterations: Option<u64>,
    pub sigma: Option<f64>,
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgdConfig {
    pub mode: OutputMode,
    pub seed: u64,
    /// Distance bound between the start point and the reference separator.
    pub ref_norm: f64,
    pub t_cap: u64,
    pub beta_opt: f64,
    pub overrides: NgdOverrides,
}

impl NgdConfig {
    pub fn new(mode: OutputMode, seed: u64) -> Self {
        NgdConfig {
            mode,
            seed,
            ref_norm: 1.0,
            t_cap: DEFAULT_T_CAP,
            beta_opt: BETA_OPT,
            overrides: NgdOverrides::default(),
        }
    }
}

/// Resolved iteration count, noise and step size for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NgdPlan {
    pub iterations: u64,
    pub sigma: f64,
    pub eta: f64,
    pub sensitivity: f64,
}

/// `T = ⌈n²μ²⌉`, `σ = Δ√T/μ` and the mode-specific step size for noise in
/// `noise_dim` coordinates.
pub fn plan(n: usize, sensitivity: f64, mu: f64, noise_dim: usize, cfg: &NgdConfig) -> Result<NgdPlan> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Domain(format!("mu must be positive, got {mu}")));
    }
    if !(cfg.ref_norm > 0.0) || !(cfg.beta_opt > 0.0 && cfg.beta_opt < 1.0) {
        return Err(Error::Domain("ref_norm must be positive and beta_opt in (0,1)".into()));
    }
    let iterations = match cfg.overrides.iterations {
        Some(0) => return Err(Error::Domain("iteration override must be positive".into())),
        Some(t) => t,
        None => {
            let nf = n as f64;
            let t = (nf * nf * mu * mu).ceil().max(1.0);
            if t > cfg.t_cap as f64 {
                return Err(Error::Resource(format!(
                    "noisy gradient descent needs T = {t:.0} iterations, above the cap {}; \
                     raise the cap (DPMARGIN_T_CAP) or override T",
                    cfg.t_cap
                )));
            }
            t as u64
        }
    };
    let sigma = match cfg.overrides.sigma {
        Some(s) if !(s >= 0.0 && s.is_finite()) => {
            return Err(Error::Domain(format!("sigma override must be nonnegative, got {s}")))
        }
        Some(s) => s,
        None => ngd_noise_sigma(sensitivity, iterations, mu)?,
    };
    let eta = match cfg.overrides.eta {
        Some(e) if !(e > 0.0 && e.is_finite()) => {
            return Err(Error::Domain(format!("eta override must be positive, got {e}")))
        }
        Some(e) => e,
        None => {
            let nf = n as f64;
            let noise = noise_dim as f64 * sigma * sigma;
            let noise = match cfg.mode {
                OutputMode::Averaged => noise,
                OutputMode::LastIterate => noise * (1.0 / cfg.beta_opt).ln(),
            };
            let denom = iterations as f64 * (nf * nf * sensitivity * sensitivity + noise);
            (cfg.ref_norm * cfg.ref_norm / denom).sqrt()
        }
    };
    Ok(NgdPlan { iterations, sigma, eta, sensitivity })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub gamma: Option<f64>,
    pub hinge_c: f64,
    pub jl_seed: Option<u64>,
    pub k: Option<usize>,
    pub output_mode: OutputMode,
    pub mu: f64,
    pub iterations: u64,
    pub sigma: f64,
    pub eta: f64,
    /// Whether training ran in column-space coordinates of the projection.
    pub subspace: bool,
    pub noise: Vec<NoiseRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub ambient_dim: usize,
    pub provenance: Provenance,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> Result<i8> {
        if x.len() != self.ambient_dim {
            return Err(Error::Dimension { expected: self.ambient_dim, found: x.len() });
        }
        Ok(if crate::linalg::dot(&self.weights, x) < 0.0 { -1 } else { 1 })
    }
}

/// Runs the descent loop on `s` (points already in training coordinates).
fn descend(s: &Dataset, c: f64, p: &NgdPlan, mode: OutputMode, seed: u64) -> Vec<f64> {
    let m = s.dim();
    let mut w = vec![0.0; m];
    let mut sum = vec![0.0; m];
    let mut g = vec![0.0; m];
    for t in 0..p.iterations {
        if mode == OutputMode::Averaged {
            for (a, v) in sum.iter_mut().zip(&w) {
                *a += v;
            }
        }
        g.iter_mut().for_each(|v| *v = 0.0);
        for (x, &y) in s.features().chunks_exact(m).zip(s.labels()) {
            accumulate_hinge_subgrad(&w, PointRef { x, y }, c, &mut g);
        }
        if p.sigma > 0.0 {
            let mut rng = stream_rng(seed, t);
            for v in g.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += p.sigma * z;
            }
        }
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= p.eta * gi;
        }
    }
    match mode {
        OutputMode::LastIterate => w,
        OutputMode::Averaged => {
            let inv = 1.0 / p.iterations as f64;
            sum.iter().map(|v| v * inv).collect()
        }
    }
}

fn check_c(c: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!("hinge parameter must be positive, got {c}")));
    }
    Ok(())
}

fn noise_record(p: &NgdPlan, mu: f64) -> NoiseRecord {
    NoiseRecord {
        source: "ngd".into(),
        sensitivity: p.sensitivity,
        mu,
        sigma: p.sigma,
        repetitions: p.iterations,
    }
}

/// Noisy gradient descent at `μ`-GDP on the hinge loss with parameter `c`.
pub fn ngd(c: f64, s: &Dataset, mu: f64, cfg: &NgdConfig) -> Result<LinearModel> {
    check_c(c)?;
    let delta = hinge_sensitivity(s.norm_bound(), c, Neighbor::AddRemove);
    let p = plan(s.len(), delta, mu, s.dim(), cfg)?;
    let weights = descend(s, c, &p, cfg.mode, cfg.seed);
    Ok(LinearModel {
        weights,
        ambient_dim: s.dim(),
        provenance: Provenance {
            gamma: None,
            hinge_c: c,
            jl_seed: None,
            k: None,
            output_mode: cfg.mode,
            mu,
            iterations: p.iterations,
            sigma: p.sigma,
            eta: p.eta,
            subspace: false,
            noise: vec![noise_record(&p, mu)],
        },
    })
}

/// Projects with `Φ`, clips to twice the norm bound, trains, and lifts back
/// with `Φᵀ`.
///
/// When `k > d` training runs in isometric coordinates of the column space of
/// `Φ`. The component of the `k`-dimensional noise orthogonal to that space
/// never affects the loss or the lifted output, so this has the same output
/// law as training on `k`-vectors, at `O(d)` cost per point.
pub fn jlgd(phi: &JlMatrix, c: f64, s: &Dataset, mu: f64, cfg: &NgdConfig) -> Result<LinearModel> {
    check_c(c)?;
    if phi.d() != s.dim() {
        return Err(Error::Dimension { expected: phi.d(), found: s.dim() });
    }
    let v = s.norm_bound();
    let delta = hinge_sensitivity(2.0 * v, c, Neighbor::AddRemove);
    let p = plan(s.len(), delta, mu, phi.k(), cfg)?;
    let (weights, subspace) = match SubspaceEmbedding::new(phi)? {
        Some(emb) => {
            let z = emb.embed_and_clip(s, v)?;
            (emb.lift(&descend(&z, c, &p, cfg.mode, cfg.seed)), true)
        }
        None => {
            let z = project_and_clip(phi, s, v)?;
            (phi.apply_transpose(&descend(&z, c, &p, cfg.mode, cfg.seed))?, false)
        }
    };
    Ok(LinearModel {
        weights,
        ambient_dim: s.dim(),
        provenance: Provenance {
            gamma: None,
            hinge_c: c,
            jl_seed: Some(phi.seed()),
            k: Some(phi.k()),
            output_mode: cfg.mode,
            mu,
            iterations: p.iterations,
            sigma: p.sigma,
            eta: p.eta,
            subspace,
            noise: vec![noise_record(&p, mu)],
        },
    })
}
