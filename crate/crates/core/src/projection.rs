//! Rademacher Johnson-Lindenstrauss projections.
//!
//! A [`JlMatrix`] has entries `±1/√k`. Three storage regimes share one API:
//!
//! * dense: the sign bits of a row-major SplitMix64 stream are cached;
//! * streamed: the same stream is regenerated on demand, for matrices above
//!   [`DENSE_LIMIT`] entries;
//! * grouped: for very tall matrices with few columns, rows are stored as a
//!   multiset of sign patterns. Row counts per pattern are drawn from the exact
//!   multinomial law, and rows are ordered by pattern.
//!
//! Only the grouped regime changes row order relative to an i.i.d. draw, and
//! nothing downstream depends on row order.
//!
//! When `k > d` the projected data live in the `d`-dimensional column space of
//! `Φ`. [`SubspaceEmbedding`] gives isometric coordinates for that space via
//! the Cholesky factor of `ΦᵀΦ`, so training never materialises `k`-vectors.

use rand_distr::{Binomial, Distribution};

use crate::data::{clip_in_place, Dataset};
use crate::error::{Error, Result};
use crate::linalg::{axpy, cholesky_upper, dot, norm};
use crate::rng::splitmix_word;

/// Constant in front of `(b/γ)² ln(·)` in [`projection_dim`].
pub const C_JL: f64 = 8.0;

/// Matrices with at most this many entries keep their sign bits in memory.
pub const DENSE_LIMIT: u64 = 100_000_000;

/// Widest matrix stored as a pattern multiset.
pub const GROUPED_MAX_D: usize = 20;

/// Entry visits allowed for one pass over a streamed matrix.
pub const STREAM_WORK_LIMIT: u64 = 20_000_000_000;

/// Largest `k` accepted at all.
pub const MAX_K: u64 = 1 << 52;

/// `⌈C_JL (b/γ)² ln(grid·(n+2)(n+1)/β)⌉`.
pub fn projection_dim(gamma: f64, n: usize, grid_size: usize, beta: f64, b: f64) -> Result<usize> {
    projection_dim_with(C_JL, gamma, n, grid_size, beta, b)
}

pub fn projection_dim_with(
    c_jl: f64,
    gamma: f64,
    n: usize,
    grid_size: usize,
    beta: f64,
    b: f64,
) -> Result<usize> {
    if !(gamma > 0.0) || !(b > 0.0) || gamma > b {
        return Err(Error::Domain(format!("need 0 < gamma <= b, got gamma={gamma}, b={b}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("beta must lie in (0,1), got {beta}")));
    }
    if n == 0 || grid_size == 0 || !(c_jl > 0.0) {
        return Err(Error::Domain("n, grid size and C_jl must be positive".into()));
    }
    let (n, g) = (n as f64, grid_size as f64);
    let ratio = b / gamma;
    let k = (c_jl * ratio * ratio * (g.ln() + (n + 2.0).ln() + (n + 1.0).ln() - beta.ln())).ceil();
    if !(k <= MAX_K as f64) {
        return Err(Error::Resource(format!("projection dimension {k:e} is too large")));
    }
    Ok((k as usize).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JlRegime {
    Dense,
    Streamed,
    Grouped,
}

#[derive(Debug, Clone)]
enum Repr {
    Dense(Vec<u64>),
    Streamed,
    Grouped { patterns: Vec<u32>, ends: Vec<u64> },
}

#[derive(Debug, Clone)]
pub struct JlMatrix {
    k: usize,
    d: usize,
    seed: u64,
    repr: Repr,
}

/// Samples a `k × d` Rademacher matrix scaled by `1/√k`.
pub fn sample_jl(k: usize, d: usize, seed: u64) -> Result<JlMatrix> {
    let entries = (k as u64).saturating_mul(d as u64);
    let regime = if entries <= DENSE_LIMIT {
        JlRegime::Dense
    } else if d <= GROUPED_MAX_D {
        JlRegime::Grouped
    } else {
        JlRegime::Streamed
    };
    sample_jl_in(k, d, seed, regime)
}

pub(crate) fn sample_jl_in(k: usize, d: usize, seed: u64, regime: JlRegime) -> Result<JlMatrix> {
    if k == 0 || d == 0 {
        return Err(Error::Domain(format!("JL matrix needs k, d >= 1, got k={k}, d={d}")));
    }
    if k as u64 > MAX_K {
        return Err(Error::Resource(format!("projection dimension {k} is too large")));
    }
    let repr = match regime {
        JlRegime::Dense => {
            let words = (k as u64 * d as u64).div_ceil(64);
            Repr::Dense((0..words).map(|i| splitmix_word(seed, i)).collect())
        }
        JlRegime::Streamed => Repr::Streamed,
        JlRegime::Grouped => {
            if d > GROUPED_MAX_D {
                return Err(Error::Unsupported(format!(
                    "grouped storage needs d <= {GROUPED_MAX_D}, got {d}"
                )));
            }
            let counts = multinomial_patterns(k as u64, d, seed)?;
            let mut patterns = Vec::new();
            let mut ends = Vec::new();
            let mut total = 0u64;
            for (p, &c) in counts.iter().enumerate() {
                if c > 0 {
                    total += c;
                    patterns.push(p as u32);
                    ends.push(total);
                }
            }
            Repr::Grouped { patterns, ends }
        }
    };
    Ok(JlMatrix { k, d, seed, repr })
}

/// Counts of each of the `2^d` sign patterns among `k` uniform rows,
/// by recursive fair binomial splits.
fn multinomial_patterns(k: u64, d: usize, seed: u64) -> Result<Vec<u64>> {
    let mut rng = crate::rng::stream_rng(seed, 0x4a4c);
    let mut level = vec![k];
    for _ in 0..d {
        let mut next = Vec::with_capacity(level.len() * 2);
        for &c in &level {
            let left = if c == 0 {
                0
            } else {
                Binomial::new(c, 0.5)
                    .map_err(|e| Error::Generation(e.to_string()))?
                    .sample(&mut rng)
            };
            next.push(left);
            next.push(c - left);
        }
        level = next;
    }
    Ok(level)
}

impl JlMatrix {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn regime(&self) -> JlRegime {
        match self.repr {
            Repr::Dense(_) => JlRegime::Dense,
            Repr::Streamed => JlRegime::Streamed,
            Repr::Grouped { .. } => JlRegime::Grouped,
        }
    }

    fn scale(&self) -> f64 {
        1.0 / (self.k as f64).sqrt()
    }

    #[inline]
    fn word(&self, i: u64) -> u64 {
        match &self.repr {
            Repr::Dense(w) => w[i as usize],
            _ => splitmix_word(self.seed, i),
        }
    }

    fn pattern_of_row(&self, r: usize) -> u32 {
        match &self.repr {
            Repr::Grouped { patterns, ends } => patterns[ends.partition_point(|&e| e <= r as u64)],
            _ => unreachable!(),
        }
    }

    /// Entry `(r, j)`, exactly `±1/√k`.
    pub fn entry(&self, r: usize, j: usize) -> f64 {
        assert!(r < self.k && j < self.d, "entry ({r},{j}) out of range");
        let positive = match self.repr {
            Repr::Grouped { .. } => self.pattern_of_row(r) >> j & 1 == 1,
            _ => {
                let bit = r as u64 * self.d as u64 + j as u64;
                self.word(bit / 64) >> (bit % 64) & 1 == 1
            }
        };
        if positive {
            self.scale()
        } else {
            -self.scale()
        }
    }

    /// Visits rows `0..k` in order as unscaled `±1` vectors.
    fn for_each_sign_row(&self, mut f: impl FnMut(usize, &[f64])) {
        let mut row = vec![0.0; self.d];
        match &self.repr {
            Repr::Grouped { patterns, ends } => {
                let mut start = 0u64;
                for (&p, &end) in patterns.iter().zip(ends) {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = if p >> j & 1 == 1 { 1.0 } else { -1.0 };
                    }
                    for r in start..end {
                        f(r as usize, &row);
                    }
                    start = end;
                }
            }
            _ => {
                let mut bit = 0u64;
                let mut wi = 0u64;
                let mut word = self.word(0);
                for r in 0..self.k {
                    for v in row.iter_mut() {
                        if bit / 64 != wi {
                            wi = bit / 64;
                            word = self.word(wi);
                        }
                        *v = if word >> (bit % 64) & 1 == 1 { 1.0 } else { -1.0 };
                        bit += 1;
                    }
                    f(r, &row);
                }
            }
        }
    }

    fn check_work(&self, what: &str, cols: u64) -> Result<()> {
        let work = (self.k as u64).saturating_mul(cols);
        if work > STREAM_WORK_LIMIT {
            return Err(Error::Resource(format!(
                "{what} would touch {work} matrix entries (limit {STREAM_WORK_LIMIT})"
            )));
        }
        Ok(())
    }

    /// `Φx` for a batch of row-major inputs of width `d`.
    fn apply_rows(&self, xs: &[f64]) -> Result<Vec<Vec<f64>>> {
        let m = xs.len() / self.d;
        if (self.k as u64).saturating_mul(m as u64) > DENSE_LIMIT {
            return Err(Error::Resource(format!(
                "materialising {m} projected vectors of dimension {} exceeds {DENSE_LIMIT} values",
                self.k
            )));
        }
        self.check_work("projection", (self.d * m.max(1)) as u64)?;
        let mut out = vec![vec![0.0; self.k]; m];
        let s = self.scale();
        self.for_each_sign_row(|r, row| {
            for (i, o) in out.iter_mut().enumerate() {
                o[r] = s * dot(row, &xs[i * self.d..(i + 1) * self.d]);
            }
        });
        Ok(out)
    }

    /// `Φx`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(Error::Dimension { expected: self.d, found: x.len() });
        }
        Ok(self.apply_rows(x)?.pop().unwrap())
    }

    /// `Φᵀw`.
    pub fn apply_transpose(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.k {
            return Err(Error::Dimension { expected: self.k, found: w.len() });
        }
        self.check_work("transpose product", self.d as u64)?;
        let mut out = vec![0.0; self.d];
        self.for_each_sign_row(|r, row| {
            let wr = w[r];
            if wr != 0.0 {
                for (o, s) in out.iter_mut().zip(row) {
                    *o += wr * s;
                }
            }
        });
        let s = self.scale();
        out.iter_mut().for_each(|v| *v *= s);
        Ok(out)
    }

    /// `ΦᵀΦ`, row-major `d × d`. Entries are exact multiples of `1/k`.
    pub fn gram(&self) -> Result<Vec<f64>> {
        let d = self.d;
        let k = self.k as f64;
        let mut agree = vec![0i64; d * d];
        match &self.repr {
            Repr::Grouped { patterns, ends } => {
                // Walsh-Hadamard transform of the pattern counts: coefficient at
                // mask {j,l} is the signed agreement of columns j and l.
                let mut c = vec![0i64; 1 << d];
                let mut start = 0u64;
                for (&p, &end) in patterns.iter().zip(ends) {
                    c[p as usize] = (end - start) as i64;
                    start = end;
                }
                let mut h = 1;
                while h < c.len() {
                    for block in (0..c.len()).step_by(2 * h) {
                        for i in block..block + h {
                            let (a, b) = (c[i], c[i + h]);
                            c[i] = a + b;
                            c[i + h] = a - b;
                        }
                    }
                    h *= 2;
                }
                for j in 0..d {
                    for l in 0..d {
                        agree[j * d + l] = if j == l { self.k as i64 } else { c[(1 << j) | (1 << l)] };
                    }
                }
            }
            _ => {
                self.check_work("Gram matrix", d as u64)?;
                // columns of a block of rows as bitsets; disagreements by popcount
                const BLOCK: usize = 4096;
                let words = BLOCK / 64;
                let mut cols = vec![0u64; d * words];
                let flush = |cols: &mut [u64], rows: usize, agree: &mut [i64]| {
                    for j in 0..d {
                        for l in j + 1..d {
                            let diff: u32 = (0..words)
                                .map(|w| (cols[j * words + w] ^ cols[l * words + w]).count_ones())
                                .sum();
                            let a = rows as i64 - 2 * i64::from(diff);
                            agree[j * d + l] += a;
                            agree[l * d + j] += a;
                        }
                        agree[j * d + j] += rows as i64;
                    }
                    cols.iter_mut().for_each(|c| *c = 0);
                };
                let mut in_block = 0;
                self.for_each_sign_row(|_, row| {
                    let (w, b) = (in_block / 64, in_block % 64);
                    for (j, &s) in row.iter().enumerate() {
                        if s > 0.0 {
                            cols[j * words + w] |= 1 << b;
                        }
                    }
                    in_block += 1;
                    if in_block == BLOCK {
                        flush(&mut cols, BLOCK, &mut agree);
                        in_block = 0;
                    }
                });
                if in_block > 0 {
                    flush(&mut cols, in_block, &mut agree);
                }
            }
        }
        Ok(agree.iter().map(|&a| a as f64 / k).collect())
    }
}

/// Projects every point with `Φ` and clips it radially to norm `2v`.
pub fn project_and_clip(phi: &JlMatrix, s: &Dataset, v: f64) -> Result<Dataset> {
    if s.dim() != phi.d {
        return Err(Error::Dimension { expected: phi.d, found: s.dim() });
    }
    if !(v > 0.0) {
        return Err(Error::Domain(format!("clip radius base v must be positive, got {v}")));
    }
    let rows = phi.apply_rows(s.features())?;
    let mut features = Vec::with_capacity(rows.len() * phi.k);
    for mut z in rows {
        clip_in_place(&mut z, 2.0 * v);
        features.extend(z);
    }
    Dataset::from_parts(features, s.labels().to_vec(), phi.k, Some(2.0 * v))
}

/// `Φᵀw`.
pub fn lift(phi: &JlMatrix, w_k: &[f64]) -> Result<Vec<f64>> {
    phi.apply_transpose(w_k)
}

/// Isometric coordinates for the column space of `Φ` when `k > d`.
///
/// With `ΦᵀΦ = RᵀR`, the map `Φx ↦ Rx` preserves inner products, and a
/// `k`-vector `Φ`-space point with coordinates `a` lifts to `Rᵀa`.
#[derive(Debug, Clone)]
pub struct SubspaceEmbedding {
    r: Vec<f64>,
    d: usize,
}

impl SubspaceEmbedding {
    /// `None` when `k <= d` or `ΦᵀΦ` is numerically singular.
    pub fn new(phi: &JlMatrix) -> Result<Option<Self>> {
        if phi.k <= phi.d {
            return Ok(None);
        }
        let g = phi.gram()?;
        Ok(cholesky_upper(&g, phi.d).map(|r| SubspaceEmbedding { r, d: phi.d }))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `Rx`.
    pub fn coords(&self, x: &[f64]) -> Vec<f64> {
        let d = self.d;
        (0..d).map(|i| dot(&self.r[i * d + i..(i + 1) * d], &x[i..])).collect()
    }

    /// `Rᵀa`.
    pub fn lift(&self, a: &[f64]) -> Vec<f64> {
        let d = self.d;
        let mut out = vec![0.0; d];
        for (i, &ai) in a.iter().enumerate() {
            axpy(ai, &self.r[i * d + i..(i + 1) * d], &mut out[i..]);
        }
        out
    }

    /// The projected-and-clipped dataset in subspace coordinates.
    pub fn embed_and_clip(&self, s: &Dataset, v: f64) -> Result<Dataset> {
        if s.dim() != self.d {
            return Err(Error::Dimension { expected: self.d, found: s.dim() });
        }
        let mut features = Vec::with_capacity(s.len() * self.d);
        for p in s.iter() {
            let mut z = self.coords(p.x);
            clip_in_place(&mut z, 2.0 * v);
            features.extend(z);
        }
        Dataset::from_parts(features, s.labels().to_vec(), self.d, Some(2.0 * v))
    }
}

/// Norm of `Φx`, computed without forming it.
pub fn projected_norm(emb: &SubspaceEmbedding, x: &[f64]) -> f64 {
    norm(&emb.coords(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabeledPoint;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn dimension_examples() {
        let one = projection_dim(1.0, 100, 8, 0.01, 1.0).unwrap();
        assert_eq!(one, (8.0 * (8.0f64 * 102.0 * 101.0 / 0.01).ln()).ceil() as usize);
        // 200·ln(8,242,400) = 3184.94...
        assert_eq!(projection_dim(0.2, 100, 8, 0.01, 1.0).unwrap(), 3185);
        let a = projection_dim_with(1.0, 0.2, 10, 2, 0.5, 1.0).unwrap() as f64;
        let b = projection_dim_with(1.0, 0.4, 10, 2, 0.5, 1.0).unwrap() as f64;
        assert!((a / 4.0).ceil() - 1.0 <= b && b <= (a / 4.0).ceil() + 1.0);
        assert!(projection_dim(0.0, 10, 2, 0.1, 1.0).is_err());
        assert!(projection_dim(1.5, 10, 2, 0.1, 1.0).is_err());
    }

    #[test]
    fn entries_are_scaled_signs_and_reproducible() {
        let a = sample_jl(7, 5, 42).unwrap();
        let b = sample_jl(7, 5, 42).unwrap();
        let s = 1.0 / 7f64.sqrt();
        for r in 0..7 {
            let mut sq = 0.0;
            for j in 0..5 {
                let e = a.entry(r, j);
                assert!(e == s || e == -s);
                assert_eq!(e, b.entry(r, j));
                sq += e * e;
            }
            assert!((sq - 5.0 / 7.0).abs() < 1e-15);
        }
        assert_ne!(
            (0..35).map(|i| a.entry(i / 5, i % 5)).collect::<Vec<_>>(),
            (0..35).map(|i| sample_jl(7, 5, 43).unwrap().entry(i / 5, i % 5)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn entry_mean_is_centred() {
        let phi = sample_jl(500, 200, 3).unwrap();
        let s = 1.0 / (500f64).sqrt();
        let plus: usize =
            (0..500).flat_map(|r| (0..200).map(move |j| (r, j))).filter(|&(r, j)| phi.entry(r, j) == s).count();
        // Binomial(1e5, 1/2): sd = 158
        assert!((plus as f64 - 50_000.0).abs() < 3.0 * 158.2);
    }

    #[test]
    fn streamed_matches_dense() {
        let dense = sample_jl_in(33, 9, 5, JlRegime::Dense).unwrap();
        let streamed = sample_jl_in(33, 9, 5, JlRegime::Streamed).unwrap();
        for r in 0..33 {
            for j in 0..9 {
                assert_eq!(dense.entry(r, j), streamed.entry(r, j));
            }
        }
        assert_eq!(dense.gram().unwrap(), streamed.gram().unwrap());
    }

    fn naive_gram(phi: &JlMatrix) -> Vec<f64> {
        let d = phi.d();
        let mut g = vec![0.0; d * d];
        for r in 0..phi.k() {
            for j in 0..d {
                for l in 0..d {
                    g[j * d + l] += phi.entry(r, j) * phi.entry(r, l);
                }
            }
        }
        g
    }

    #[test]
    fn gram_matches_naive_in_every_regime() {
        for regime in [JlRegime::Dense, JlRegime::Streamed, JlRegime::Grouped] {
            // 5000 rows crosses a bitset block boundary
            let phi = sample_jl_in(5000, 6, 11, regime).unwrap();
            let fast = phi.gram().unwrap();
            let slow = naive_gram(&phi);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-9, "{regime:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn grouped_rows_are_uniform_patterns() {
        let phi = sample_jl_in(64_000, 3, 9, JlRegime::Grouped).unwrap();
        let mut counts = [0usize; 8];
        for r in 0..64_000 {
            let p = (0..3).fold(0, |acc, j| acc | (usize::from(phi.entry(r, j) > 0.0) << j));
            counts[p] += 1;
        }
        // each count ~ Binomial(64000, 1/8): mean 8000, sd 83.7
        for c in counts {
            assert!((c as f64 - 8000.0).abs() < 4.0 * 83.7, "{counts:?}");
        }
    }

    #[test]
    fn transpose_matches_independent_multiply() {
        let phi = sample_jl(3, 5, 17).unwrap();
        let w = [0.3, -1.2, 2.0];
        let mut expect = [0.0; 5];
        for (j, e) in expect.iter_mut().enumerate() {
            for (r, wr) in w.iter().enumerate() {
                *e += phi.entry(r, j) * wr;
            }
        }
        let got = lift(&phi, &w).unwrap();
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(lift(&phi, &[0.0; 3]).unwrap(), vec![0.0; 5]);
        assert!(lift(&phi, &[0.0; 4]).is_err());
    }

    #[test]
    fn clip_only_touches_long_projections() {
        let phi = sample_jl(4, 4, 1).unwrap();
        let s = Dataset::new(vec![
            LabeledPoint { features: vec![0.1, 0.0, 0.0, 0.0], label: 1 },
            LabeledPoint { features: vec![3.0, 3.0, -3.0, 3.0], label: -1 },
        ])
        .unwrap();
        let v = 0.5;
        let out = project_and_clip(&phi, &s, v).unwrap();
        assert_eq!(out.labels(), s.labels());
        assert_eq!(out.norm_bound(), 1.0);
        let z0 = phi.apply(s.point(0).x).unwrap();
        assert_eq!(out.point(0).x, &z0[..]);
        let z1 = phi.apply(s.point(1).x).unwrap();
        assert!(norm(&z1) > 1.0);
        assert!((norm(out.point(1).x) - 1.0).abs() < 1e-12);
        let cos = dot(out.point(1).x, &z1) / norm(&z1);
        assert!((cos - 1.0).abs() < 1e-12);
    }

    #[test]
    fn subspace_coordinates_are_isometric() {
        let phi = sample_jl(40, 6, 8).unwrap();
        let emb = SubspaceEmbedding::new(&phi).unwrap().unwrap();
        let mut rng = crate::rng::stream_rng(1, 0);
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (px, py) = (phi.apply(&x).unwrap(), phi.apply(&y).unwrap());
        let (cx, cy) = (emb.coords(&x), emb.coords(&y));
        assert!((dot(&px, &py) - dot(&cx, &cy)).abs() < 1e-12);
        assert!((norm(&px) - projected_norm(&emb, &x)).abs() < 1e-12);
        // lift of coordinates agrees with lift of the corresponding k-vector
        let a: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lifted = emb.lift(&a);
        assert!((dot(&lifted, &x) - dot(&a, &cx)).abs() < 1e-12);
        assert!(SubspaceEmbedding::new(&sample_jl(4, 6, 1).unwrap()).unwrap().is_none());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn adjoint_identity(seed in any::<u64>(), k in 1usize..30, d in 1usize..12) {
            let phi = sample_jl(k, d, seed).unwrap();
            let mut rng = crate::rng::stream_rng(seed, 1);
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lhs = dot(&w, &phi.apply(&x).unwrap());
            let rhs = dot(&lift(&phi, &w).unwrap(), &x);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
