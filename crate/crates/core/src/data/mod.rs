//! Labeled datasets, file ingestion, synthetic generation and brute-force
//! margin oracles.

mod io;
mod oracle;
mod synth;

pub use io::{load_dataset, parse_dataset, write_csv, DataFormat};
pub use oracle::{
    geometric_margin_oracle, margin_removal_curve, max_margin_separator, min_outliers_oracle, normalized_margin,
    CurvePoint, MarginSolution, OutlierWitness, DEFAULT_ORACLE_TOL, EXHAUSTIVE_CAP,
};
pub(crate) use oracle::{masks_with_popcount, subset_separator};
pub use synth::{synth_margin_dataset, SynthDataset, SYNTH_DRAW_CAP};

use crate::error::{Error, Result};
use crate::linalg::norm;

/// A single example with a ±1 label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub features: Vec<f64>,
    pub label: i8,
}

impl LabeledPoint {
    pub fn new(features: Vec<f64>, label: i8) -> Result<Self> {
        if label != 1 && label != -1 {
            return Err(Error::Domain(format!("label must be -1 or +1, got {label}")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("features must be finite".into()));
        }
        Ok(LabeledPoint { features, label })
    }
}

/// Borrowed view of one row of a [`Dataset`].
#[derive(Debug, Clone, Copy)]
pub struct PointRef<'a> {
    pub x: &'a [f64],
    pub y: i8,
}

impl PointRef<'_> {
    pub fn y(&self) -> f64 {
        f64::from(self.y)
    }
}

/// An immutable set of labeled points stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<i8>,
    dim: usize,
    norm_bound: f64,
}

impl Dataset {
    /// Builds a dataset whose norm bound is the largest observed norm.
    pub fn new(points: Vec<LabeledPoint>) -> Result<Self> {
        let dim = points.first().map_or(0, |p| p.features.len());
        let mut features = Vec::with_capacity(points.len() * dim);
        let mut labels = Vec::with_capacity(points.len());
        for p in points {
            if p.features.len() != dim {
                return Err(Error::Dimension { expected: dim, found: p.features.len() });
            }
            let p = LabeledPoint::new(p.features, p.label)?;
            features.extend_from_slice(&p.features);
            labels.push(p.label);
        }
        Self::from_parts(features, labels, dim, None)
    }

    /// Builds a dataset from a flat row-major feature buffer.
    ///
    /// When `norm_bound` is `None` the largest observed norm is used; an
    /// explicit bound must dominate every row.
    pub fn from_parts(
        features: Vec<f64>,
        labels: Vec<i8>,
        dim: usize,
        norm_bound: Option<f64>,
    ) -> Result<Self> {
        let n = labels.len();
        if n < 2 {
            return Err(Error::Domain(format!("a dataset needs at least 2 points, got {n}")));
        }
        if dim == 0 {
            return Err(Error::Domain("feature dimension must be positive".into()));
        }
        if features.len() != n * dim {
            return Err(Error::Dimension { expected: n * dim, found: features.len() });
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
            return Err(Error::Domain(format!("label must be -1 or +1, got {bad}")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("features must be finite".into()));
        }
        let max_norm = features.chunks_exact(dim).map(norm).fold(0.0, f64::max);
        let norm_bound = match norm_bound {
            Some(b) => {
                if !(b > 0.0 && b.is_finite()) {
                    return Err(Error::Domain(format!("norm bound must be positive, got {b}")));
                }
                if max_norm > b * (1.0 + 1e-12) {
                    return Err(Error::Domain(format!(
                        "point norm {max_norm} exceeds the declared bound {b}"
                    )));
                }
                b
            }
            // an all-zero dataset still needs a positive radius
            None if max_norm > 0.0 => max_norm,
            None => 1.0,
        };
        Ok(Dataset { features, labels, dim, norm_bound })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn point(&self, i: usize) -> PointRef<'_> {
        PointRef { x: &self.features[i * self.dim..(i + 1) * self.dim], y: self.labels[i] }
    }

    pub fn iter(&self) -> impl Iterator<Item = PointRef<'_>> + '_ {
        self.features
            .chunks_exact(self.dim)
            .zip(self.labels.iter())
            .map(|(x, &y)| PointRef { x, y })
    }

    pub fn to_points(&self) -> Vec<LabeledPoint> {
        self.iter().map(|p| LabeledPoint { features: p.x.to_vec(), label: p.y }).collect()
    }

    /// The points at `indices`, in that order, with the same norm bound.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Domain(format!("index {i} out of range")));
            }
            features.extend_from_slice(self.point(i).x);
            labels.push(self.labels[i]);
        }
        Dataset::from_parts(features, labels, self.dim, Some(self.norm_bound))
    }

    /// Every point except those at `removed`.
    pub fn without(&self, removed: &[usize]) -> Result<Dataset> {
        let keep: Vec<usize> = (0..self.len()).filter(|i| !removed.contains(i)).collect();
        self.subset(&keep)
    }
}

/// Radially projects every feature vector into the ball of radius `b`.
pub fn clip_norms(s: &Dataset, b: f64) -> Result<Dataset> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::Domain(format!("clip radius must be positive, got {b}")));
    }
    let mut features = s.features.clone();
    for x in features.chunks_exact_mut(s.dim) {
        clip_in_place(x, b);
    }
    Dataset::from_parts(features, s.labels.clone(), s.dim, Some(b))
}

/// Scales `x` by `min(1, radius/‖x‖)`.
pub(crate) fn clip_in_place(x: &mut [f64], radius: f64) {
    let nx = norm(x);
    if nx > radius {
        let scale = radius / nx;
        x.iter_mut().for_each(|v| *v *= scale);
    }
}
