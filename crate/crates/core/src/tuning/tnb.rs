//! Truncated negative binomial run-count law on `{1, 2, ...}`.

use rand::Rng;
use rand_distr::Open01;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TnbDist {
    pub eta: f64,
    pub r: f64,
}

impl TnbDist {
    pub fn new(eta: f64, r: f64) -> Result<Self> {
        if !(eta > -1.0) || !(r > 0.0 && r < 1.0) {
            return Err(Error::Domain(format!("TNB needs eta > -1 and r in (0,1), got eta={eta}, r={r}")));
        }
        Ok(TnbDist { eta, r })
    }

    /// The geometric case `η = 1`.
    pub fn geometric(r: f64) -> Result<Self> {
        Self::new(1.0, r)
    }

    fn closed_form(&self) -> Result<bool> {
        if self.eta == 1.0 {
            Ok(true)
        } else if self.eta == 0.0 {
            Ok(false)
        } else {
            Err(Error::Unsupported(format!("closed forms are implemented for eta in {{0, 1}}, got {}", self.eta)))
        }
    }
}

/// `P(K = k)`: `r(1−r)^{k−1}` at `η = 1`, `(1−r)^k / (k ln(1/r))` at `η = 0`.
pub fn tnb_pmf(dist: &TnbDist, k: u64) -> Result<f64> {
    let geometric = dist.closed_form()?;
    if k == 0 {
        return Ok(0.0);
    }
    let q = 1.0 - dist.r;
    Ok(if geometric {
        dist.r * q.powf((k - 1) as f64)
    } else {
        q.powf(k as f64) / (k as f64 * (1.0 / dist.r).ln())
    })
}

/// `1/r` at `η = 1`, `(1/r − 1)/ln(1/r)` at `η = 0`.
pub fn tnb_mean(dist: &TnbDist) -> Result<f64> {
    Ok(if dist.closed_form()? {
        1.0 / dist.r
    } else {
        (1.0 / dist.r - 1.0) / (1.0 / dist.r).ln()
    })
}

/// `E[x^K]` for `x ∈ [0, 1]`.
pub fn tnb_pgf(dist: &TnbDist, x: f64) -> Result<f64> {
    let geometric = dist.closed_form()?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("PGF argument must lie in [0,1], got {x}")));
    }
    let q = 1.0 - dist.r;
    Ok(if geometric {
        dist.r * x / (1.0 - q * x)
    } else {
        (1.0 - q * x).ln() / dist.r.ln()
    })
}

/// Probability that a fixed one of `grid_size` uniformly drawn candidates is never run.
pub fn tnb_not_selected_prob(dist: &TnbDist, grid_size: usize) -> Result<f64> {
    if grid_size == 0 {
        return Err(Error::Domain("grid size must be at least 1".into()));
    }
    tnb_pgf(dist, 1.0 - 1.0 / grid_size as f64)
}

/// Largest geometric rate whose non-selection probability is at most `beta`:
/// `β / ((1−β)(|Θ|−1))`, so `1/r ≥ (1−β)(|Θ|−1)/β`. Capped at 1/2 to stay a valid rate.
pub fn rate_for_miss_prob(beta: f64, grid_size: usize) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) || grid_size < 2 {
        return Err(Error::Domain(format!("need beta in (0,1) and grid size >= 2, got {beta}, {grid_size}")));
    }
    Ok((beta / ((1.0 - beta) * (grid_size - 1) as f64)).min(0.5))
}

/// Inverse-CDF draw `⌈ln u / ln(1−r)⌉` (at least 1); geometric case only.
pub fn sample_tnb_with<R: Rng + ?Sized>(dist: &TnbDist, rng: &mut R) -> Result<u64> {
    if dist.eta != 1.0 {
        return Err(Error::Unsupported(format!("sampling is implemented for eta = 1 only, got {}", dist.eta)));
    }
    let u: f64 = rng.sample(Open01);
    let k = (u.ln() / (-dist.r).ln_1p()).ceil();
    Ok(if k < 1.0 { 1 } else if k >= u64::MAX as f64 { u64::MAX } else { k as u64 })
}

pub fn sample_tnb(dist: &TnbDist, seed: u64) -> Result<u64> {
    sample_tnb_with(dist, &mut stream_rng(seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_pmf_values() {
        let d = TnbDist::geometric(0.5).unwrap();
        assert_eq!(tnb_pmf(&d, 1).unwrap(), 0.5);
        assert_eq!(tnb_pmf(&d, 2).unwrap(), 0.25);
        let d = TnbDist::geometric(0.01).unwrap();
        for k in 1..=100u64 {
            let mut expect = 0.01;
            for _ in 1..k {
                expect *= 0.99;
            }
            assert!((tnb_pmf(&d, k).unwrap() - expect).abs() < 1e-12);
        }
        assert_eq!(tnb_mean(&TnbDist::geometric(0.5).unwrap()).unwrap(), 2.0);
    }

    #[test]
    fn pmfs_sum_to_one() {
        for eta in [0.0, 1.0] {
            let d = TnbDist::new(eta, 0.05).unwrap();
            let total: f64 = (1..5000).map(|k| tnb_pmf(&d, k).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-9, "eta={eta}: {total}");
            let mean: f64 = (1..5000).map(|k| k as f64 * tnb_pmf(&d, k).unwrap()).sum();
            assert!((mean - tnb_mean(&d).unwrap()).abs() < 1e-6);
            let x: f64 = 0.7;
            let pgf: f64 = (1..5000).map(|k| x.powi(k as i32) * tnb_pmf(&d, k).unwrap()).sum();
            assert!((pgf - tnb_pgf(&d, x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn unsupported_shapes() {
        let d = TnbDist::new(0.5, 0.1).unwrap();
        assert!(matches!(tnb_pmf(&d, 1), Err(Error::Unsupported(_))));
        assert!(matches!(sample_tnb(&d, 1), Err(Error::Unsupported(_))));
        assert!(TnbDist::new(-1.0, 0.1).is_err());
    }

    #[test]
    fn not_selected_matches_simplified_form() {
        // r x / (1 - (1-r) x) at x = 1 - 1/G equals r(G-1) / (1 + r(G-1))
        for g in [2usize, 5, 13] {
            for r in [0.001, 0.1, 0.6] {
                let d = TnbDist::geometric(r).unwrap();
                let gm = (g - 1) as f64;
                let expect = r * gm / (1.0 + r * gm);
                assert!((tnb_not_selected_prob(&d, g).unwrap() - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rate_threshold_bounds_non_selection() {
        for beta in [0.001, 0.01, 0.05, 0.2, 0.4] {
            for g in [2usize, 3, 8, 13, 100] {
                let r = rate_for_miss_prob(beta, g).unwrap();
                let p = tnb_not_selected_prob(&TnbDist::geometric(r).unwrap(), g).unwrap();
                assert!(p <= beta * (1.0 + 1e-12), "beta={beta}, g={g}: {p}");
                let smaller = tnb_not_selected_prob(&TnbDist::geometric(r / 2.0).unwrap(), g).unwrap();
                assert!(smaller <= p);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_positive() {
        let d = TnbDist::geometric(0.3).unwrap();
        for seed in 0..200 {
            let k = sample_tnb(&d, seed).unwrap();
            assert!(k >= 1);
            assert_eq!(k, sample_tnb(&d, seed).unwrap());
        }
    }
}
