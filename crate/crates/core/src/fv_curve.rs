//! Piecewise-linear initial forward-variance curve.
//!
//! The curve interpolates linearly through `(0, left_value)` and the knot
//! points `(t_i, level_i)`, and is flat beyond the last knot. Knots are placed
//! at the option maturities of a calibration set, so that each level can be
//! fitted on its own while earlier levels stay fixed.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::real::Real;

/// How the value at `t = 0` is tied to the knot levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeftAnchor {
    /// `left_value` always equals the first level (flat start).
    Flat,
    /// `left_value` is a free constant.
    #[default]
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardVarianceCurve<T: Real> {
    left_value: T,
    knots: Vec<T>,
    levels: Vec<T>,
    #[serde(default)]
    left_anchor: LeftAnchor,
}

impl<T: Real> ForwardVarianceCurve<T> {
    /// Curve with an explicit value at `t = 0`.
    pub fn new(left_value: T, knots: Vec<T>, levels: Vec<T>) -> Result<Self> {
        let curve = Self {
            left_value,
            knots,
            levels,
            left_anchor: LeftAnchor::Fixed,
        };
        curve.validate()?;
        Ok(curve)
    }

    /// Curve that is flat before the first knot.
    pub fn flat_start(knots: Vec<T>, levels: Vec<T>) -> Result<Self> {
        let left_value = levels.first().copied().ok_or_else(|| {
            invalid("flat-start curve needs at least one knot")
        })?;
        let curve = Self {
            left_value,
            knots,
            levels,
            left_anchor: LeftAnchor::Flat,
        };
        curve.validate()?;
        Ok(curve)
    }

    pub fn constant(value: T) -> Result<Self> {
        Self::new(value, Vec::new(), Vec::new())
    }

    pub fn validate(&self) -> Result<()> {
        if self.knots.len() != self.levels.len() {
            return Err(invalid(format!(
                "{} knots but {} levels",
                self.knots.len(),
                self.levels.len()
            )));
        }
        if !(self.left_value >= T::zero()) {
            return Err(invalid("left_value must be nonnegative"));
        }
        if self.levels.iter().any(|l| !(*l >= T::zero())) {
            return Err(invalid("levels must be nonnegative"));
        }
        if self.knots.first().is_some_and(|t| !(*t > T::zero())) {
            return Err(invalid("knots must be positive"));
        }
        if self.knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("knots must be strictly increasing"));
        }
        if self.left_anchor == LeftAnchor::Flat
            && self.levels.first().is_some_and(|l| *l != self.left_value)
        {
            return Err(invalid("flat-start curve must have left_value == level 0"));
        }
        Ok(())
    }

    pub fn left_value(&self) -> T {
        self.left_value
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn levels(&self) -> &[T] {
        &self.levels
    }

    pub fn left_anchor(&self) -> LeftAnchor {
        self.left_anchor
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// Value of the curve at `t`; times before zero read the left value.
    pub fn eval(&self, t: T) -> T {
        if t <= T::zero() || self.knots.is_empty() {
            return self.left_value;
        }
        // first knot strictly greater than or equal to t
        let idx = self.knots.partition_point(|k| *k < t);
        if idx == self.knots.len() {
            return self.levels[idx - 1];
        }
        let (t0, v0) = if idx == 0 {
            (T::zero(), self.left_value)
        } else {
            (self.knots[idx - 1], self.levels[idx - 1])
        };
        let (t1, v1) = (self.knots[idx], self.levels[idx]);
        if t == t1 {
            return v1;
        }
        let w = (t - t0) / (t1 - t0);
        v0 + w * (v1 - v0)
    }

    /// Copy of the curve with level `i` replaced.
    pub fn with_level(&self, i: usize, new_level: T) -> Result<Self> {
        if i >= self.levels.len() {
            return Err(Error::Index {
                index: i,
                len: self.levels.len(),
            });
        }
        if !(new_level >= T::zero()) {
            return Err(invalid(format!("level must be nonnegative, got {new_level}")));
        }
        let mut out = self.clone();
        out.levels[i] = new_level;
        if i == 0 && self.left_anchor == LeftAnchor::Flat {
            out.left_value = new_level;
        }
        Ok(out)
    }

    /// Evaluates the curve on every time in `times`.
    pub fn sample(&self, times: &[T]) -> Vec<T> {
        times.iter().map(|t| self.eval(*t)).collect()
    }

    pub fn cast<U: Real>(&self) -> ForwardVarianceCurve<U> {
        let c = |x: T| U::lit(x.f64());
        ForwardVarianceCurve {
            left_value: c(self.left_value),
            knots: self.knots.iter().map(|x| c(*x)).collect(),
            levels: self.levels.iter().map(|x| c(*x)).collect(),
            left_anchor: self.left_anchor,
        }
    }
}
