use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm};
use crate::rng::stream_rng;

/// Upper limit on rejected proposals across one call of [`synth_margin_dataset`].
pub const SYNTH_DRAW_CAP: u64 = 1_000_000;

/// A planted-margin dataset together with its ground truth.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub dataset: Dataset,
    /// Unit vector that separates the clean points with margin at least `gamma`.
    pub separator: Vec<f64>,
    /// Positions (after shuffling) of the points whose labels were flipped.
    pub outliers: Vec<usize>,
}

/// Samples `n` points on the unit sphere with `y⟨w*, x⟩ ≥ gamma`, then flips
/// the labels of `n_outliers` of them.
///
/// The coordinate along `w*` is drawn from its exact marginal under the
/// uniform sphere law, conditioned on exceeding `gamma`, by rejection against
/// a tangent exponential envelope; the orthogonal part is uniform. This is the
/// conditional law itself, so no bias is introduced, and it stays cheap in
/// high dimension where naive rejection on the sphere is hopeless.
pub fn synth_margin_dataset(
    n: usize,
    d: usize,
    gamma: f64,
    n_outliers: usize,
    seed: u64,
) -> Result<SynthDataset> {
    if d < 2 {
        return Err(Error::Domain(format!("dimension must be at least 2, got {d}")));
    }
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 points, got {n}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Domain(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    if 2 * n_outliers >= n {
        return Err(Error::Domain(format!(
            "outlier count {n_outliers} must be below n/2 = {}",
            n as f64 / 2.0
        )));
    }

    let mut rng = stream_rng(seed, 0);
    let w_star = random_unit(&mut rng, d);
    let mut draws = 0u64;
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let t = sample_margin_coordinate(&mut rng, d, gamma, &mut draws)?;
        let side: f64 = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let u = random_orthogonal_unit(&mut rng, &w_star);
        let mut x = u;
        x.iter_mut().for_each(|v| *v *= (1.0 - t * t).max(0.0).sqrt());
        axpy(side * t, &w_star, &mut x);
        // guard against rounding pushing the norm above 1
        let nx = norm(&x);
        if nx > 1.0 {
            x.iter_mut().for_each(|v| *v /= nx);
        }
        let mut y = side as i8;
        if i < n_outliers {
            y = -y;
        }
        features.extend_from_slice(&x);
        labels.push(y);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut shuffled = Vec::with_capacity(n * d);
    let mut shuffled_labels = Vec::with_capacity(n);
    let mut outliers = Vec::with_capacity(n_outliers);
    for (pos, &src) in order.iter().enumerate() {
        shuffled.extend_from_slice(&features[src * d..(src + 1) * d]);
        shuffled_labels.push(labels[src]);
        if src < n_outliers {
            outliers.push(pos);
        }
    }
    let dataset = Dataset::from_parts(shuffled, shuffled_labels, d, Some(1.0))?;
    Ok(SynthDataset { dataset, separator: w_star, outliers })
}

fn random_unit<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let nv = norm(&v);
        if nv > 1e-8 {
            return v.into_iter().map(|x| x / nv).collect();
        }
    }
}

fn random_orthogonal_unit<R: Rng>(rng: &mut R, w: &[f64]) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..w.len()).map(|_| rng.sample(StandardNormal)).collect();
        let proj = dot(&v, w);
        axpy(-proj, w, &mut v);
        let nv = norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            return v;
        }
    }
}

/// Draws `t = ⟨w*, x⟩` for `x` uniform on the sphere, conditioned on `t ≥ gamma`.
/// The marginal density is proportional to `(1 - t²)^((d-3)/2)`.
fn sample_margin_coordinate<R: Rng>(
    rng: &mut R,
    d: usize,
    gamma: f64,
    draws: &mut u64,
) -> Result<f64> {
    if gamma >= 1.0 {
        return Ok(1.0);
    }
    let exponent = (d as f64 - 3.0) / 2.0;
    loop {
        match d {
            2 => {
                // uniform angle on the arc where cos(angle) ≥ gamma
                let angle = rng.random::<f64>() * gamma.acos();
                return Ok(angle.cos());
            }
            3 => return Ok(gamma + (1.0 - gamma) * rng.random::<f64>()),
            _ => {
                let width = 1.0 - gamma;
                let rate = 2.0 * exponent * gamma / (1.0 - gamma * gamma);
                let u: f64 = rng.random();
                let offset = if rate * width < 1e-12 {
                    u * width
                } else {
                    -(-u * (-(-rate * width).exp_m1())).ln_1p() / rate
                };
                let t = (gamma + offset).min(1.0);
                let log_accept = exponent * ((1.0 - t * t).ln() - (1.0 - gamma * gamma).ln())
                    + rate * offset;
                if rng.random::<f64>().ln() <= log_accept {
                    return Ok(t);
                }
                *draws += 1;
                if *draws > SYNTH_DRAW_CAP {
                    return Err(Error::Generation(format!(
                        "rejection sampling exceeded {SYNTH_DRAW_CAP} rejected draws (gamma={gamma}, d={d})"
                    )));
                }
            }
        }
    }
}
