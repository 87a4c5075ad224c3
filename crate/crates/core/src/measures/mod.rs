//! Discrete probability measures on R^d.
//!
//! A [`DiscreteMeasure`] is a weighted point cloud `sum_i w_i delta_{x_i}` with
//! strictly positive weights summing to one. Construction validates; all
//! transformations return new values.

mod io;
mod raster;

pub use io::{load_measure, parse_csv, parse_json, save_json, MeasureFile};
pub use raster::{rotate_grid, Raster};

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{EgwError, Result};

/// Tolerance on `|sum(w) - 1|` for weights read from text.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// How weights that do not already form a probability vector are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WeightPolicy {
    /// Rescale positive raw intensities to sum to one.
    pub renormalize: bool,
    /// Drop zero-mass atoms instead of rejecting them.
    pub drop_zero_mass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Array2<f64>,
    weights: Array1<f64>,
}

/// Second and fourth moments `sum_i w_i |x_i|^2` and `sum_i w_i |x_i|^4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub m2: f64,
    pub m4: f64,
}

impl DiscreteMeasure {
    /// Strict constructor: weights must already sum to one within [`WEIGHT_SUM_TOL`].
    pub fn new(points: Array2<f64>, weights: Array1<f64>) -> Result<Self> {
        Self::with_policy(points, weights, WeightPolicy::default())
    }

    pub fn with_policy(
        points: Array2<f64>,
        weights: Array1<f64>,
        policy: WeightPolicy,
    ) -> Result<Self> {
        let (n, d) = points.dim();
        if n == 0 || d == 0 {
            return Err(EgwError::InvalidMeasure(format!(
                "need at least one atom in dimension >= 1, got {n} atoms in dimension {d}"
            )));
        }
        if weights.len() != n {
            return Err(EgwError::InvalidMeasure(format!(
                "{} weights for {} atoms",
                weights.len(),
                n
            )));
        }
        if let Some(pos) = points.iter().position(|x| !x.is_finite()) {
            return Err(EgwError::InvalidMeasure(format!(
                "non-finite coordinate at atom {}",
                pos / d
            )));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(EgwError::InvalidMeasure(format!(
                "weight {} at atom {i} is negative or non-finite",
                weights[i]
            )));
        }

        let (points, mut weights) = if weights.iter().any(|&w| w == 0.0) {
            if !policy.drop_zero_mass {
                let i = weights.iter().position(|&w| w == 0.0).unwrap();
                return Err(EgwError::InvalidMeasure(format!(
                    "zero weight at atom {i} (use drop-zero-mass to discard such atoms)"
                )));
            }
            let keep: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
            if keep.is_empty() {
                return Err(EgwError::InvalidMeasure("all weights are zero".into()));
            }
            (
                points.select(Axis(0), &keep),
                weights.select(Axis(0), &keep),
            )
        } else {
            (points, weights)
        };

        let sum = weights.sum();
        if policy.renormalize {
            weights /= sum;
        } else if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(EgwError::WeightsNotNormalized {
                sum,
                tol: WEIGHT_SUM_TOL,
            });
        }
        Ok(Self { points, weights })
    }

    /// Measure with equal weights on the given points.
    pub fn uniform(points: Array2<f64>) -> Result<Self> {
        let n = points.nrows();
        Self::new(points, Array1::from_elem(n, 1.0 / n.max(1) as f64))
    }

    /// Single atom at `x`.
    pub fn dirac(x: &[f64]) -> Result<Self> {
        let points = Array2::from_shape_vec((1, x.len()), x.to_vec())
            .map_err(|e| EgwError::InvalidMeasure(e.to_string()))?;
        Self::new(points, Array1::from_elem(1, 1.0))
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    /// Squared Euclidean norms of the atoms.
    pub fn sq_norms(&self) -> Array1<f64> {
        self.points.map_axis(Axis(1), |x| x.dot(&x))
    }

    pub fn mean(&self) -> Array1<f64> {
        self.weights.dot(&self.points)
    }

    /// Largest absolute coordinate of the mean.
    pub fn mean_offset(&self) -> f64 {
        self.mean().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// True when every mean coordinate is within `tol` of zero.
    pub fn is_centered(&self, tol: f64) -> bool {
        self.mean_offset() <= tol
    }

    /// Translate so that the weighted mean is the origin.
    pub fn center(&self) -> Self {
        let mean = self.mean();
        let mut points = &self.points - &mean;
        // A second pass removes the rounding left by the first subtraction.
        let residual = self.weights.dot(&points);
        points -= &residual;
        Self {
            points,
            weights: self.weights.clone(),
        }
    }

    pub fn moments(&self) -> Moments {
        let mut m2 = 0.0;
        let mut m4 = 0.0;
        for (x, &w) in self.points.outer_iter().zip(self.weights.iter()) {
            let r2 = x.dot(&x);
            m2 += w * r2;
            m4 += w * r2 * r2;
        }
        Moments { m2, m4 }
    }

    /// Apply `x -> scale * Q x + translation`.
    pub fn transform(&self, map: &AffineMap) -> Result<Self> {
        let d = self.dim();
        let mut points = self.points.clone();
        if let Some(q) = &map.orthogonal {
            if q.dim() != (d, d) {
                return Err(EgwError::DimensionMismatch(format!(
                    "map is {}x{}, measure lives in R^{d}",
                    q.nrows(),
                    q.ncols()
                )));
            }
            let dev = orthogonality_defect(q);
            if dev > ORTHO_TOL {
                return Err(EgwError::NotOrthogonal(dev));
            }
            points = points.dot(&q.t());
        }
        if map.scale != 1.0 {
            if !(map.scale > 0.0 && map.scale.is_finite()) {
                return Err(EgwError::InvalidArgument(format!(
                    "scale must be positive, got {}",
                    map.scale
                )));
            }
            points *= map.scale;
        }
        if let Some(t) = &map.translation {
            if t.len() != d {
                return Err(EgwError::DimensionMismatch(format!(
                    "translation has length {}, measure lives in R^{d}",
                    t.len()
                )));
            }
            points += t;
        }
        Ok(Self {
            points,
            weights: self.weights.clone(),
        })
    }

    /// Scale every atom by `eps^{-1/4}`, the change of variables that maps
    /// regularization `eps` onto regularization one.
    pub fn eps_rescaled(&self, eps: f64) -> Self {
        Self {
            points: &self.points * eps.powf(-0.25),
            weights: self.weights.clone(),
        }
    }
}

const ORTHO_TOL: f64 = 1e-10;

/// `max |Q^T Q - I|` entrywise.
fn orthogonality_defect(q: &Array2<f64>) -> f64 {
    let qtq = q.t().dot(q);
    let mut dev = 0.0_f64;
    for ((i, j), v) in qtq.indexed_iter() {
        let target = if i == j { 1.0 } else { 0.0 };
        dev = dev.max((v - target).abs());
    }
    dev
}

/// `x -> scale * Q x + translation` with `Q` orthogonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub orthogonal: Option<Array2<f64>>,
    pub translation: Option<Array1<f64>>,
    pub scale: f64,
}

impl Default for AffineMap {
    fn default() -> Self {
        Self {
            orthogonal: None,
            translation: None,
            scale: 1.0,
        }
    }
}

impl AffineMap {
    pub fn rotation(q: Array2<f64>) -> Self {
        Self {
            orthogonal: Some(q),
            ..Self::default()
        }
    }

    /// Planar rotation by `degrees`, counterclockwise.
    pub fn rotation_2d(degrees: f64) -> Self {
        let (s, c) = degrees.to_radians().sin_cos();
        Self::rotation(ndarray::array![[c, -s], [s, c]])
    }

    pub fn translation(t: Array1<f64>) -> Self {
        Self {
            translation: Some(t),
            ..Self::default()
        }
    }

    pub fn scaling(scale: f64) -> Self {
        Self {
            scale,
            ..Self::default()
        }
    }
}
