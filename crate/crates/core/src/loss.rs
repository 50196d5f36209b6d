//! Hinge and zero-one losses for linear classifiers.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, PointRef};
use crate::error::{Error, Result};
use crate::linalg::dot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    /// `max{0, 1 - y⟨w,x⟩/c}` with confidence margin `c`.
    Hinge { c: f64 },
    ZeroOne,
}

impl LossSpec {
    pub fn hinge(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("hinge parameter c must be positive, got {c}")));
        }
        Ok(LossSpec::Hinge { c })
    }

    pub fn eval(&self, w: &[f64], p: PointRef<'_>) -> Result<f64> {
        match *self {
            LossSpec::Hinge { c } => hinge_loss(w, p, c),
            LossSpec::ZeroOne => zero_one_loss(w, p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskMode {
    Averaged,
    Summed,
}

/// Neighbouring-dataset relation used for sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighbor {
    AddRemove,
    Replace,
}

fn check_dim(w: &[f64], p: &PointRef<'_>) -> Result<()> {
    if w.len() != p.x.len() {
        return Err(Error::Dimension { expected: p.x.len(), found: w.len() });
    }
    Ok(())
}

pub fn hinge_loss(w: &[f64], p: PointRef<'_>, c: f64) -> Result<f64> {
    check_dim(w, &p)?;
    Ok((1.0 - p.y() * dot(w, p.x) / c).max(0.0))
}

/// `-(y/c)x` in the active region, zero elsewhere (the kink included).
pub fn hinge_subgrad(w: &[f64], p: PointRef<'_>, c: f64) -> Result<Vec<f64>> {
    let mut g = vec![0.0; w.len()];
    check_dim(w, &p)?;
    accumulate_hinge_subgrad(w, p, c, &mut g);
    Ok(g)
}

/// Adds the hinge subgradient at `p` into `acc`; returns whether it was active.
#[inline]
pub(crate) fn accumulate_hinge_subgrad(w: &[f64], p: PointRef<'_>, c: f64, acc: &mut [f64]) -> bool {
    let y = p.y();
    if 1.0 - y * dot(w, p.x) / c > 0.0 {
        let s = -y / c;
        for (a, x) in acc.iter_mut().zip(p.x) {
            *a += s * x;
        }
        true
    } else {
        false
    }
}

/// 1 iff `y⟨w,x⟩ < 0`.
pub fn zero_one_loss(w: &[f64], p: PointRef<'_>) -> Result<f64> {
    check_dim(w, &p)?;
    Ok(if p.y() * dot(w, p.x) < 0.0 { 1.0 } else { 0.0 })
}

pub fn empirical_risk(w: &[f64], s: &Dataset, spec: LossSpec, mode: RiskMode) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::Domain("empirical risk of an empty dataset".into()));
    }
    let mut total = 0.0;
    for p in s.iter() {
        total += spec.eval(w, p)?;
    }
    Ok(match mode {
        RiskMode::Summed => total,
        RiskMode::Averaged => total / s.len() as f64,
    })
}

/// Number of points with `y⟨w,x⟩ < 0`.
pub fn misclassified(w: &[f64], s: &Dataset) -> Result<usize> {
    Ok(empirical_risk(w, s, LossSpec::ZeroOne, RiskMode::Summed)? as usize)
}

/// L2 sensitivity of the summed hinge subgradient: `b/c` or `2b/c`.
pub fn hinge_sensitivity(b: f64, c: f64, relation: Neighbor) -> f64 {
    let base = b / c;
    match relation {
        Neighbor::AddRemove => base,
        Neighbor::Replace => 2.0 * base,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabeledPoint;
    use crate::linalg::norm;
    use proptest::prelude::*;
    use rand::Rng;

    fn pt(x: &[f64], y: i8) -> PointRef<'_> {
        PointRef { x, y }
    }

    #[test]
    fn hinge_examples() {
        assert_eq!(hinge_loss(&[0.0, 0.0], pt(&[1.0, 2.0], 1), 0.3).unwrap(), 1.0);
        assert_eq!(hinge_loss(&[0.5, 0.0], pt(&[1.0, 0.0], 1), 0.5).unwrap(), 0.0);
        assert_eq!(hinge_loss(&[1.0, 0.0], pt(&[0.5, 0.0], -1), 0.25).unwrap(), 3.0);
        assert!(matches!(hinge_loss(&[1.0], pt(&[1.0, 0.0], 1), 1.0), Err(Error::Dimension { .. })));
    }

    #[test]
    fn subgrad_examples() {
        assert_eq!(hinge_subgrad(&[0.0, 0.0], pt(&[1.0, 0.0], 1), 0.5).unwrap(), vec![-2.0, 0.0]);
        assert_eq!(hinge_subgrad(&[1.0, 0.0], pt(&[1.0, 0.0], 1), 0.5).unwrap(), vec![0.0, 0.0]);
        // exactly at the kink
        assert_eq!(hinge_subgrad(&[0.5, 0.0], pt(&[1.0, 0.0], 1), 0.5).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn subgrad_matches_central_differences() {
        let mut rng = crate::rng::stream_rng(7, 0);
        let h = 1e-6;
        let mut checked = 0;
        while checked < 50 {
            let w: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = if rng.random::<bool>() { 1 } else { -1 };
            let c = rng.random_range(0.1..1.0);
            let margin = 1.0 - y as f64 * dot(&w, &x) / c;
            if margin.abs() < 1e-3 {
                continue;
            }
            let g = hinge_subgrad(&w, pt(&x, y), c).unwrap();
            for j in 0..4 {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[j] += h;
                wm[j] -= h;
                let fd = (hinge_loss(&wp, pt(&x, y), c).unwrap() - hinge_loss(&wm, pt(&x, y), c).unwrap())
                    / (2.0 * h);
                assert!((fd - g[j]).abs() < 1e-6, "coordinate {j}: {fd} vs {}", g[j]);
            }
            checked += 1;
        }
    }

    #[test]
    fn zero_one_ties_are_correct() {
        assert_eq!(zero_one_loss(&[1.0, 0.0], pt(&[1.0, 0.0], 1)).unwrap(), 0.0);
        assert_eq!(zero_one_loss(&[1.0, 0.0], pt(&[1.0, 0.0], -1)).unwrap(), 1.0);
        assert_eq!(zero_one_loss(&[0.0, 1.0], pt(&[1.0, 0.0], -1)).unwrap(), 0.0);
    }

    #[test]
    fn empirical_risk_matches_loop() {
        let mut rng = crate::rng::stream_rng(11, 0);
        let pts: Vec<LabeledPoint> = (0..7)
            .map(|_| LabeledPoint {
                features: (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
                label: if rng.random::<bool>() { 1 } else { -1 },
            })
            .collect();
        let s = Dataset::new(pts.clone()).unwrap();
        let w: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = 0.4;
        let mut expect = 0.0;
        for p in &pts {
            let m: f64 = w.iter().zip(&p.features).map(|(a, b)| a * b).sum::<f64>() * p.label as f64;
            expect += f64::max(0.0, 1.0 - m / c);
        }
        let spec = LossSpec::hinge(c).unwrap();
        let summed = empirical_risk(&w, &s, spec, RiskMode::Summed).unwrap();
        assert!((summed - expect).abs() < 1e-12);
        assert_eq!(empirical_risk(&w, &s, spec, RiskMode::Averaged).unwrap(), summed / 7.0);
    }

    #[test]
    fn sensitivity_values() {
        assert_eq!(hinge_sensitivity(1.0, 0.5, Neighbor::AddRemove), 2.0);
        assert_eq!(hinge_sensitivity(1.0, 0.5, Neighbor::Replace), 4.0);
        assert_eq!(hinge_sensitivity(0.7, 0.7, Neighbor::AddRemove), 1.0);
        assert!(LossSpec::hinge(0.0).is_err());
    }

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-3.0f64..3.0, 3)
    }

    proptest! {
        #[test]
        fn hinge_dominates_zero_one(w in vec3(), x in vec3(), pos in any::<bool>(), c in 0.01f64..5.0) {
            let y = if pos { 1 } else { -1 };
            prop_assert!(zero_one_loss(&w, pt(&x, y)).unwrap() <= hinge_loss(&w, pt(&x, y), c).unwrap());
        }

        #[test]
        fn hinge_is_convex(w1 in vec3(), w2 in vec3(), x in vec3(), lam in 0.0f64..1.0, c in 0.05f64..2.0) {
            let mix: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
            let p = pt(&x, 1);
            let lhs = hinge_loss(&mix, p, c).unwrap();
            let rhs = lam * hinge_loss(&w1, p, c).unwrap() + (1.0 - lam) * hinge_loss(&w2, p, c).unwrap();
            prop_assert!(lhs <= rhs + 1e-9 * (1.0 + rhs.abs()));
        }

        #[test]
        fn subgrad_norm_bounded(w in vec3(), x in vec3(), c in 0.05f64..2.0) {
            let b = norm(&x);
            let g = hinge_subgrad(&w, pt(&x, -1), c).unwrap();
            prop_assert!(norm(&g) <= hinge_sensitivity(b, c, Neighbor::AddRemove) * (1.0 + 1e-12));
        }

        #[test]
        fn averaged_zero_one_in_unit_interval(w in vec3(), seed in 0u64..1000) {
            let mut rng = crate::rng::stream_rng(seed, 0);
            let pts: Vec<LabeledPoint> = (0..5)
                .map(|_| LabeledPoint {
                    features: (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    label: if rng.random::<bool>() { 1 } else { -1 },
                })
                .collect();
            let s = Dataset::new(pts).unwrap();
            let r = empirical_risk(&w, &s, LossSpec::ZeroOne, RiskMode::Averaged).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }
}
