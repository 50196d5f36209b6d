//! Exact margin computations used as test oracles and by the margin-curve tool.
//!
//! The geometric margin `max_{‖w‖≤1} min_i y_i⟨w, x_i⟩` equals the distance
//! from the origin to the convex hull of `{y_i x_i}` when that distance is
//! positive, and is zero otherwise. The hull distance is found with Wolfe's
//! minimum-norm-point active-set method, which also yields a certificate
//! bracket: the hull point `p` gives the upper bound `‖p‖` and the direction
//! `p/‖p‖` gives the lower bound `min_i y_i⟨p, x_i⟩/‖p‖`.

use rayon::prelude::*;

use super::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, solve};

pub const DEFAULT_ORACLE_TOL: f64 = 1e-6;

/// Largest dataset accepted by [`min_outliers_oracle`].
pub const EXHAUSTIVE_CAP: usize = 16;

/// Result of a hard-margin separator search.
#[derive(Debug, Clone)]
pub struct MarginSolution {
    /// Certified lower bound clamped at zero; within `tol` of the true margin.
    pub margin: f64,
    pub lower: f64,
    pub upper: f64,
    /// Unit-norm maximizer, or all zeros when no separator exists.
    pub direction: Vec<f64>,
}

/// Minimum number of points whose removal leaves margin at least `gamma`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutlierWitness {
    pub count: usize,
    pub removed: Vec<usize>,
}

/// The geometric margin of `s`, within additive `tol`.
pub fn geometric_margin_oracle(s: &Dataset, tol: f64) -> Result<f64> {
    Ok(max_margin_separator(s, tol)?.margin)
}

/// The maximum-margin unit direction for `s` and its margin bracket.
pub fn max_margin_separator(s: &Dataset, tol: f64) -> Result<MarginSolution> {
    let all: Vec<usize> = (0..s.len()).collect();
    subset_separator(s, &all, tol)
}

pub(crate) fn subset_separator(s: &Dataset, keep: &[usize], tol: f64) -> Result<MarginSolution> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("oracle tolerance must be positive, got {tol}")));
    }
    if keep.is_empty() {
        return Err(Error::Domain("margin of an empty set is undefined".into()));
    }
    let d = s.dim();
    let mut z = Vec::with_capacity(keep.len() * d);
    for &i in keep {
        let p = s.point(i);
        z.extend(p.x.iter().map(|v| p.y() * v));
    }
    min_norm_point(&z, keep.len(), d, tol)
}

/// `max{min_i y⟨w,x⟩ / (‖x‖‖w‖), 0}`; zero-norm points score 0.
pub fn normalized_margin(w: &[f64], s: &Dataset) -> Result<f64> {
    if w.len() != s.dim() {
        return Err(Error::Dimension { expected: s.dim(), found: w.len() });
    }
    let nw = norm(w);
    if nw == 0.0 {
        return Ok(0.0);
    }
    let worst = s
        .iter()
        .map(|p| {
            let nx = norm(p.x);
            if nx == 0.0 {
                0.0
            } else {
                p.y() * dot(w, p.x) / (nx * nw)
            }
        })
        .fold(f64::INFINITY, f64::min);
    Ok(worst.max(0.0))
}

/// Exhaustive search for the smallest removal set that leaves margin `≥ gamma - tol`.
///
/// Subsets are tried in increasing size and, within a size, in increasing
/// bitmask order, so the witness is deterministic. Removing every point is
/// always admissible because the empty set separates with any margin.
pub fn min_outliers_oracle(s: &Dataset, gamma: f64, tol: f64) -> Result<OutlierWitness> {
    let n = s.len();
    if n > EXHAUSTIVE_CAP {
        return Err(Error::Size { n, cap: EXHAUSTIVE_CAP });
    }
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    for r in 0..n {
        let masks = masks_with_popcount(n, r);
        let hit = masks
            .par_iter()
            .map(|&mask| -> Result<bool> {
                let keep: Vec<usize> = (0..n).filter(|i| mask & (1 << i) == 0).collect();
                Ok(subset_separator(s, &keep, tol)?.margin >= gamma - tol)
            })
            .enumerate()
            .find_first(|(_, r)| !matches!(r, Ok(false)));
        if let Some((pos, res)) = hit {
            res?;
            let mask = masks[pos];
            let removed = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            return Ok(OutlierWitness { count: r, removed });
        }
    }
    Ok(OutlierWitness { count: n, removed: (0..n).collect() })
}

/// All `n`-bit masks with `r` bits set, ascending.
pub(crate) fn masks_with_popcount(n: usize, r: usize) -> Vec<u32> {
    if r == 0 {
        return vec![0];
    }
    let mut out = Vec::new();
    let mut m: u32 = (1 << r) - 1;
    let limit: u32 = 1 << n;
    while m < limit {
        out.push(m);
        // Gosper's hack: next integer with the same popcount
        let c = m & m.wrapping_neg();
        let rr = m + c;
        m = (((rr ^ m) >> 2) / c) | rr;
    }
    out
}

/// One step of the margin-removal curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub removed: usize,
    /// Best normalized margin of the remaining points; 0 while they are not separable.
    pub margin: f64,
    /// Original index of the point removed after this step.
    pub next_removed: Option<usize>,
}

/// Repeatedly fits a separator to the remaining points (normalized to unit
/// norm), records its normalized margin, and removes the point on which it
/// scores lowest. While the points are not separable the separator is a
/// soft-margin fit.
pub fn margin_removal_curve(s: &Dataset, max_removals: usize, tol: f64) -> Result<Vec<CurvePoint>> {
    let d = s.dim();
    let mut unit = Vec::with_capacity(s.len() * d);
    for p in s.iter() {
        let nx = norm(p.x);
        unit.extend(p.x.iter().map(|v| if nx > 0.0 { v / nx } else { 0.0 }));
    }
    let u = Dataset::from_parts(unit, s.labels().to_vec(), d, Some(1.0))?;
    let mut keep: Vec<usize> = (0..u.len()).collect();
    let mut curve = Vec::new();
    for removed in 0..=max_removals.min(u.len() - 1) {
        let sol = subset_separator(&u, &keep, tol)?;
        let w = if sol.margin > 0.0 { sol.direction.clone() } else { soft_margin_direction(&u, &keep) };
        let worst = keep
            .iter()
            .enumerate()
            .map(|(pos, &i)| (pos, u.point(i).y() * dot(&w, u.point(i).x)))
            .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
        let last = removed == max_removals || keep.len() == 1;
        curve.push(CurvePoint {
            removed,
            margin: sol.margin,
            next_removed: if last { None } else { Some(keep[worst.0]) },
        });
        if last {
            break;
        }
        keep.remove(worst.0);
    }
    Ok(curve)
}

/// Deterministic full-batch Pegasos on the kept rows of `u`.
fn soft_margin_direction(u: &Dataset, keep: &[usize]) -> Vec<f64> {
    const LAMBDA: f64 = 0.01;
    const STEPS: usize = 1000;
    let d = u.dim();
    let m = keep.len() as f64;
    let radius = 1.0 / LAMBDA.sqrt();
    let mut w = vec![0.0; d];
    let mut avg = vec![0.0; d];
    let mut g = vec![0.0; d];
    for t in 1..=STEPS {
        g.iter_mut().zip(&w).for_each(|(gi, wi)| *gi = LAMBDA * wi);
        for &i in keep {
            let p = u.point(i);
            if p.y() * dot(&w, p.x) < 1.0 {
                for (gi, xi) in g.iter_mut().zip(p.x) {
                    *gi -= p.y() * xi / m;
                }
            }
        }
        let eta = 1.0 / (LAMBDA * t as f64);
        w.iter_mut().zip(&g).for_each(|(wi, gi)| *wi -= eta * gi);
        let nw = norm(&w);
        if nw > radius {
            w.iter_mut().for_each(|v| *v *= radius / nw);
        }
        if t > STEPS / 2 {
            avg.iter_mut().zip(&w).for_each(|(a, wi)| *a += wi);
        }
    }
    avg
}

/// Wolfe's minimum-norm point in the convex hull of the `n` rows of `z`.
fn min_norm_point(z: &[f64], n: usize, d: usize, tol: f64) -> Result<MarginSolution> {
    let row = |j: usize| &z[j * d..(j + 1) * d];
    let sq: Vec<f64> = (0..n).map(|j| dot(row(j), row(j))).collect();
    let start = (0..n).fold(0, |best, j| if sq[j] < sq[best] { j } else { best });

    let mut corral = vec![start];
    let mut weights = vec![1.0];
    // gram[a][b] = ⟨z_corral[a], z_corral[b]⟩
    let mut gram = vec![vec![sq[start]]];
    let mut x = row(start).to_vec();
    let max_major = 50 * (n + d) + 1000;
    let (mut lower, mut upper) = (f64::NEG_INFINITY, f64::INFINITY);

    for _ in 0..max_major {
        let xx = dot(&x, &x);
        upper = xx.sqrt();
        let (best, min_ip) = (0..n)
            .map(|j| (j, dot(&x, row(j))))
            .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
        lower = if upper > 0.0 { min_ip / upper } else { 0.0 };
        if upper - lower.max(0.0) <= tol || upper == 0.0 {
            return Ok(solution(&x, lower, upper));
        }
        // Wolfe's own optimality test, to machine precision
        if xx - min_ip <= 1e-13 * sq.iter().fold(0.0f64, |a, &b| a.max(b)) {
            return Ok(solution(&x, lower, upper));
        }
        if corral.contains(&best) {
            break;
        }
        let new_row: Vec<f64> = corral.iter().map(|&c| dot(row(c), row(best))).collect();
        for (g, v) in gram.iter_mut().zip(&new_row) {
            g.push(*v);
        }
        let mut last = new_row;
        last.push(sq[best]);
        gram.push(last);
        corral.push(best);
        weights.push(0.0);

        loop {
            let Some(alpha) = affine_min_norm(&gram) else {
                return Err(Error::Oracle { lower: lower.max(0.0), upper });
            };
            if alpha.iter().all(|&a| a > 1e-15) {
                weights = alpha;
                break;
            }
            let mut theta = 1.0f64;
            let mut hit = 0;
            for (i, (&a, &w)) in alpha.iter().zip(&weights).enumerate() {
                if a <= 1e-15 {
                    let t = if w - a > 0.0 { w / (w - a) } else { 0.0 };
                    if t < theta {
                        theta = t;
                        hit = i;
                    }
                }
            }
            for (w, a) in weights.iter_mut().zip(&alpha) {
                *w = theta * a + (1.0 - theta) * *w;
            }
            weights[hit] = 0.0;
            let keep: Vec<bool> = weights.iter().map(|&w| w > 1e-15).collect();
            retain_by(&mut corral, &keep);
            retain_by(&mut weights, &keep);
            for g in gram.iter_mut() {
                retain_by(g, &keep);
            }
            retain_by(&mut gram, &keep);
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            if corral.len() == 1 {
                weights[0] = 1.0;
                break;
            }
        }
        x.iter_mut().for_each(|v| *v = 0.0);
        for (&c, &w) in corral.iter().zip(&weights) {
            for (xi, zi) in x.iter_mut().zip(row(c)) {
                *xi += w * zi;
            }
        }
    }
    Err(Error::Oracle { lower: lower.max(0.0), upper })
}

fn retain_by<T>(v: &mut Vec<T>, keep: &[bool]) {
    let mut it = keep.iter();
    v.retain(|_| *it.next().unwrap());
}

/// Weights (summing to one) of the minimum-norm point in the affine hull of
/// the corral described by its Gram matrix.
fn affine_min_norm(gram: &[Vec<f64>]) -> Option<Vec<f64>> {
    let m = gram.len();
    let size = m + 1;
    let mut a = vec![0.0; size * size];
    for i in 0..m {
        for j in 0..m {
            a[i * size + j] = gram[i][j];
        }
        a[i * size + m] = 1.0;
        a[m * size + i] = 1.0;
    }
    let mut b = vec![0.0; size];
    b[m] = 1.0;
    solve(&mut a, &mut b, size, 1e-14)?;
    b.truncate(m);
    Some(b)
}

fn solution(x: &[f64], lower: f64, upper: f64) -> MarginSolution {
    let margin = lower.max(0.0);
    let direction = if margin > 0.0 {
        x.iter().map(|v| v / upper).collect()
    } else {
        vec![0.0; x.len()]
    };
    MarginSolution { margin, lower, upper, direction }
}
