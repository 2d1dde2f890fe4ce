//! Compactly supported smooth test fields.

use crate::error::{Error, Result};
use crate::shapes::{bump, dist2};

/// `height * bump(|x - center| / width)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldBump {
    pub center: Vec<f64>,
    pub width: f64,
    pub height: f64,
}

/// A finite sum of smooth bumps in `R^d`; the empty sum is the zero field.
#[derive(Debug, Clone, PartialEq)]
pub struct TestField {
    dimension: usize,
    bumps: Vec<FieldBump>,
}

impl TestField {
    pub fn zero(dimension: usize) -> Self {
        TestField {
            dimension,
            bumps: Vec::new(),
        }
    }

    pub fn new(dimension: usize, bumps: Vec<FieldBump>) -> Result<Self> {
        for (i, b) in bumps.iter().enumerate() {
            if b.center.len() != dimension {
                return Err(Error::invalid(format!(
                    "field bump {i} has a {}-dimensional center in dimension {dimension}",
                    b.center.len()
                )));
            }
            if !(b.width > 0.0) || !b.width.is_finite() || !b.height.is_finite() {
                return Err(Error::invalid(format!("field bump {i} needs a positive width and finite height")));
            }
        }
        Ok(TestField { dimension, bumps })
    }

    /// A single bump in one dimension.
    pub fn bump_1d(center: f64, width: f64, height: f64) -> Self {
        TestField::new(
            1,
            vec![FieldBump {
                center: vec![center],
                width,
                height,
            }],
        )
        .expect("valid bump")
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn bumps(&self) -> &[FieldBump] {
        &self.bumps
    }

    pub fn is_zero(&self) -> bool {
        self.bumps.iter().all(|b| b.height == 0.0)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.bumps
            .iter()
            .map(|b| b.height * bump(dist2(x, &b.center) / (b.width * b.width)))
            .sum()
    }

    /// The same field with every height multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        TestField {
            dimension: self.dimension,
            bumps: self
                .bumps
                .iter()
                .map(|b| FieldBump {
                    height: b.height * factor,
                    ..b.clone()
                })
                .collect(),
        }
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    /// Pointwise sum of two fields.
    pub fn plus(&self, other: &TestField) -> Result<Self> {
        if other.dimension != self.dimension {
            return Err(Error::invalid("cannot add fields of different dimension"));
        }
        let mut bumps = self.bumps.clone();
        bumps.extend(other.bumps.iter().cloned());
        Ok(TestField {
            dimension: self.dimension,
            bumps,
        })
    }

    /// Smallest axis-aligned box containing the support; `None` for the zero
    /// field.
    pub fn support_box(&self) -> Option<Vec<(f64, f64)>> {
        let live: Vec<&FieldBump> = self.bumps.iter().filter(|b| b.height != 0.0).collect();
        if live.is_empty() {
            return None;
        }
        Some(
            (0..self.dimension)
                .map(|k| {
                    let lo = live.iter().map(|b| b.center[k] - b.width).fold(f64::INFINITY, f64::min);
                    let hi = live.iter().map(|b| b.center[k] + b.width).fold(f64::NEG_INFINITY, f64::max);
                    (lo, hi)
                })
                .collect(),
        )
    }

    /// Largest distance from the origin to a point of the support.
    pub fn support_radius(&self) -> f64 {
        self.bumps
            .iter()
            .filter(|b| b.height != 0.0)
            .map(|b| crate::shapes::norm2(&b.center).sqrt() + b.width)
            .fold(0.0, f64::max)
    }
}
