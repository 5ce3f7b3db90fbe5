//! Grids over the misclassification rates `(α₁, α₂)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MisclassParams, DEFAULT_DELTA};

/// Inclusive arithmetic progression `lo, lo + step, …, hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl GridAxis {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && (0.0..=1.0).contains(&lo) && hi <= 1.0) {
            return Err(Error::InvalidParameter(format!("grid axis [{lo}, {hi}] must lie in [0, 1]")));
        }
        if !(step > 0.0) && hi > lo {
            return Err(Error::InvalidParameter(format!("grid step {step} must be positive")));
        }
        Ok(Self { lo, hi, step })
    }

    pub fn single(v: f64) -> Result<Self> {
        Self::new(v, v, 1.0)
    }

    pub fn values(&self) -> Vec<f64> {
        if self.hi <= self.lo {
            return vec![self.lo];
        }
        let k = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        // Indexed rather than accumulated so 0.7 + 30·0.01 lands on 1.0.
        (0..=k)
            .map(|i| {
                let v = self.lo + i as f64 * self.step;
                let r = (v * 1e10).round() / 1e10;
                r.min(self.hi)
            })
            .collect()
    }
}

/// A set of `(α₁, α₂)` points inside the parameter space, ordered by
/// `(α₁, α₂)`. Points sharing `α₁` form a row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaGrid {
    points: Vec<MisclassParams>,
    delta: f64,
}

impl AlphaGrid {
    /// Cartesian product of two axes, dropping points with `α₁ + α₂ < 1 + delta`.
    pub fn rect(alpha1: GridAxis, alpha2: GridAxis, delta: f64) -> Result<Self> {
        let mut pts = Vec::new();
        for a1 in alpha1.values() {
            for a2 in alpha2.values() {
                if let Ok(m) = MisclassParams::with_delta(a1, a2, delta) {
                    pts.push(m);
                }
            }
        }
        Self::from_points(pts, delta)
    }

    pub fn from_points(mut points: Vec<MisclassParams>, delta: f64) -> Result<Self> {
        for m in &points {
            MisclassParams::with_delta(m.alpha1(), m.alpha2(), delta)?;
        }
        points.sort_by(|x, y| {
            x.alpha1().partial_cmp(&y.alpha1()).unwrap().then(x.alpha2().partial_cmp(&y.alpha2()).unwrap())
        });
        points.dedup();
        if points.is_empty() {
            return Err(Error::InvalidParameter("alpha grid has no admissible points".into()));
        }
        Ok(Self { points, delta })
    }

    pub fn single(alpha: MisclassParams) -> Self {
        Self { points: vec![alpha], delta: DEFAULT_DELTA }
    }

    pub fn union(&self, other: &AlphaGrid) -> Result<Self> {
        let pts = self.points.iter().chain(&other.points).copied().collect();
        Self::from_points(pts, self.delta.min(other.delta))
    }

    pub fn points(&self) -> &[MisclassParams] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Index ranges of the rows (runs of equal `α₁`).
    pub fn rows(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.points.len() {
            if i == self.points.len() || self.points[i].alpha1() != self.points[start].alpha1() {
                out.push(start..i);
                start = i;
            }
        }
        out
    }

    /// Index lists of the columns (equal `α₂`), each ordered by `α₁`.
    pub fn columns(&self) -> Vec<Vec<usize>> {
        let mut a2: Vec<f64> = self.points.iter().map(|m| m.alpha2()).collect();
        a2.sort_by(|x, y| x.partial_cmp(y).unwrap());
        a2.dedup();
        a2.iter()
            .map(|&v| (0..self.points.len()).filter(|&i| self.points[i].alpha2() == v).collect())
            .collect()
    }

    /// Bounding box `((lo₁, hi₁), (lo₂, hi₂))`.
    pub fn bounds(&self) -> ((f64, f64), (f64, f64)) {
        let mut b = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
        for m in &self.points {
            b.0 .0 = b.0 .0.min(m.alpha1());
            b.0 .1 = b.0 .1.max(m.alpha1());
            b.1 .0 = b.1 .0.min(m.alpha2());
            b.1 .1 = b.1 .1.max(m.alpha2());
        }
        b
    }
}

impl Default for AlphaGrid {
    /// Each rate from 0.70 to 1.00 in steps of 0.01.
    fn default() -> Self {
        let axis = GridAxis { lo: 0.7, hi: 1.0, step: 0.01 };
        Self::rect(axis, axis, DEFAULT_DELTA).expect("default grid is admissible")
    }
}
