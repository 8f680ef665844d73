use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `(lo_1,hi_1) x ... x (lo_n,hi_n)`.
///
/// Serialized as `[[lo, hi], ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct BoxDomain {
    bounds: Vec<[f64; 2]>,
}

impl BoxDomain {
    pub fn new(bounds: Vec<[f64; 2]>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidParam("box must have at least one axis".into()));
        }
        for (i, [lo, hi]) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidParam(format!(
                    "axis {} of box has invalid bounds [{lo}, {hi}]",
                    i + 1
                )));
            }
        }
        Ok(BoxDomain { bounds })
    }

    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        BoxDomain::new(vec![[lo, hi]; n]).expect("valid cube bounds")
    }

    pub fn unit(n: usize) -> Self {
        Self::cube(n, 0.0, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.bounds[axis][0]
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.bounds[axis][1]
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|[lo, hi]| hi - lo).product()
    }

    /// Membership in the closed box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && self
                .bounds
                .iter()
                .zip(x)
                .all(|([lo, hi], v)| *lo <= *v && *v <= *hi)
    }

    pub fn contains_box(&self, other: &BoxDomain) -> bool {
        other.dim() == self.dim()
            && self
                .bounds
                .iter()
                .zip(&other.bounds)
                .all(|(a, b)| a[0] <= b[0] && b[1] <= a[1])
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect()
    }

    /// Uniform sample from the box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|[lo, hi]| lo + (hi - lo) * rng.gen::<f64>())
            .collect()
    }

    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|i| self.bounds[i][(mask >> i) & 1])
                    .collect()
            })
            .collect()
    }
}

impl TryFrom<Vec<[f64; 2]>> for BoxDomain {
    type Error = Error;
    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        BoxDomain::new(v)
    }
}

impl From<BoxDomain> for Vec<[f64; 2]> {
    fn from(b: BoxDomain) -> Self {
        b.bounds
    }
}
