//! Tensor-product bin grids over statistic space.
//!
//! Each axis splits `[min, max]` into `n_intervals` left-closed right-open
//! intervals; the top boundary is assigned to the last bin so the grid
//! partitions the closed box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub n_intervals: usize,
}

impl GridAxis {
    pub fn new(min: f64, max: f64, n_intervals: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::invalid(
                "grid axis",
                format!("need finite min < max, got [{min}, {max}]"),
            ));
        }
        if n_intervals == 0 {
            return Err(Error::invalid("grid axis", "n_intervals must be >= 1"));
        }
        Ok(GridAxis {
            min,
            max,
            n_intervals,
        })
    }

    /// Axis covering at least `needed_max` whose bin edges hit `boundary`
    /// exactly. The width is chosen as `(boundary - min) / k` for the largest
    /// integer `k` such that `n_intervals` bins still reach `needed_max`.
    ///
    /// Useful when a target is piecewise constant with a jump at `boundary`:
    /// aligning an edge keeps every bin on one side of the jump.
    pub fn aligned(min: f64, needed_max: f64, n_intervals: usize, boundary: f64) -> Result<Self> {
        if !(boundary > min && needed_max > boundary) {
            return Err(Error::invalid(
                "grid axis",
                format!("need min < boundary < needed_max, got {min}, {boundary}, {needed_max}"),
            ));
        }
        let k = (n_intervals as f64 * (boundary - min) / (needed_max - min)).floor();
        if k < 1.0 {
            return Err(Error::invalid(
                "grid axis",
                "too few intervals to align the boundary",
            ));
        }
        let width = (boundary - min) / k;
        GridAxis::new(min, min + width * n_intervals as f64, n_intervals)
    }

    pub fn width(&self) -> f64 {
        (self.max - self.min) / self.n_intervals as f64
    }

    fn index_of(&self, s: f64, clamp: bool, dim: usize) -> Result<usize> {
        if !s.is_finite() || s < self.min || s > self.max {
            if clamp && s.is_finite() {
                return Ok(if s < self.min {
                    0
                } else {
                    self.n_intervals - 1
                });
            }
            return Err(Error::OutOfRange {
                dim,
                value: s,
                min: self.min,
                max: self.max,
            });
        }
        let frac = (s - self.min) / (self.max - self.min);
        let idx = (frac * self.n_intervals as f64).floor() as usize;
        Ok(idx.min(self.n_intervals - 1))
    }

    pub fn center(&self, idx: usize) -> f64 {
        self.min + (idx as f64 + 0.5) * self.width()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinGrid {
    axes: Vec<GridAxis>,
}

impl BinGrid {
    pub fn new(axes: Vec<GridAxis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::invalid("bin grid", "need at least one axis"));
        }
        Ok(BinGrid { axes })
    }

    pub fn uniform_1d(min: f64, max: f64, n_intervals: usize) -> Result<Self> {
        Ok(BinGrid {
            axes: vec![GridAxis::new(min, max, n_intervals)?],
        })
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    pub fn n_bins(&self) -> usize {
        self.axes.iter().map(|a| a.n_intervals).product()
    }

    /// Multi-index of the bin containing `s`. With `clamp` set, components
    /// outside the range snap to the boundary bins; otherwise they error.
    pub fn bin_of(&self, s: &[f64], clamp: bool) -> Result<Vec<usize>> {
        if s.len() != self.axes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.axes.len(),
                actual: s.len(),
            });
        }
        s.iter()
            .zip(&self.axes)
            .enumerate()
            .map(|(dim, (&v, axis))| axis.index_of(v, clamp, dim))
            .collect()
    }

    /// Row-major flattening of a multi-index.
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.axes.len());
        let mut flat = 0;
        for (idx, axis) in multi.iter().zip(&self.axes) {
            debug_assert!(*idx < axis.n_intervals);
            flat = flat * axis.n_intervals + idx;
        }
        flat
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut rem = flat;
        let mut multi = vec![0; self.axes.len()];
        for (slot, axis) in multi.iter_mut().zip(&self.axes).rev() {
            *slot = rem % axis.n_intervals;
            rem /= axis.n_intervals;
        }
        multi
    }

    pub fn bin_center(&self, multi: &[usize]) -> Vec<f64> {
        multi
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.center(i))
            .collect()
    }
}
