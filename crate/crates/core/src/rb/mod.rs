//! Conditional-average improvement of deterministic estimators.
//!
//! An initial estimator `theta0` is replaced by its average over the level
//! sets of a statistic `S`: all states with the same `S` value receive the
//! same prediction. When the true target is itself constant on those level
//! sets, the averaged estimator is never worse in mean squared error, and
//! re-applying the scheme changes nothing.
//!
//! The continuous level sets are discretized by a [`BinGrid`]; the average
//! within each bin is taken over a finite sample set with uniform weights,
//! which matches the continuous (volume-normalized) average only when the
//! samples are drawn uniformly over the domain. Empty bins are filled by
//! interpolation (linear between nearest occupied neighbors in 1D, nearest
//! occupied bin in higher dimensions), so the estimator is total on the
//! grid box.

pub mod grid;
pub mod quadrature;

pub use grid::{BinGrid, GridAxis};
pub use quadrature::{
    gauss_legendre, microsphere_orbit_average, rao_blackwellize_quadrature, SphereRule,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Map from a physical state to a sufficient-information vector.
pub struct StatisticFn<W: ?Sized> {
    dimension: usize,
    eval: Box<dyn Fn(&W) -> Vec<f64> + Send + Sync>,
}

impl<W: ?Sized> StatisticFn<W> {
    pub fn new(dimension: usize, eval: impl Fn(&W) -> Vec<f64> + Send + Sync + 'static) -> Self {
        assert!(dimension >= 1);
        StatisticFn {
            dimension,
            eval: Box::new(eval),
        }
    }

    /// One-dimensional statistic from a scalar map.
    pub fn scalar(eval: impl Fn(&W) -> f64 + Send + Sync + 'static) -> Self {
        StatisticFn {
            dimension: 1,
            eval: Box::new(move |w| vec![eval(w)]),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn eval(&self, state: &W) -> Vec<f64> {
        let s = (self.eval)(state);
        debug_assert_eq!(s.len(), self.dimension);
        s
    }
}

/// Serializable payload of a binned estimator: grid geometry, one value per
/// bin (row-major over the multi-index), and per-bin sample counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbTable {
    pub grid: BinGrid,
    pub values: Vec<f64>,
    pub occupancy: Vec<usize>,
}

impl RbTable {
    pub fn n_empty_bins(&self) -> usize {
        self.occupancy.iter().filter(|&&c| c == 0).count()
    }

    pub fn save_json<Wr: std::io::Write>(&self, writer: Wr) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn load_json<R: std::io::Read>(reader: R) -> Result<RbTable> {
        let table: RbTable = serde_json::from_reader(reader)?;
        if table.values.len() != table.grid.n_bins() || table.occupancy.len() != table.grid.n_bins()
        {
            return Err(Error::invalid("estimator file", "array length mismatch"));
        }
        Ok(table)
    }
}

/// Binned conditional-average estimator over a grid in statistic space.
pub struct RbEstimator<W: ?Sized> {
    table: RbTable,
    statistic: StatisticFn<W>,
}

impl<W: ?Sized> RbEstimator<W> {
    /// Reattaches a statistic to a stored table (the statistic itself is not
    /// serialized).
    pub fn from_table(table: RbTable, statistic: StatisticFn<W>) -> Result<Self> {
        if table.grid.dimension() != statistic.dimension() {
            return Err(Error::DimensionMismatch {
                expected: table.grid.dimension(),
                actual: statistic.dimension(),
            });
        }
        Ok(RbEstimator { table, statistic })
    }

    pub fn table(&self) -> &RbTable {
        &self.table
    }

    pub fn grid(&self) -> &BinGrid {
        &self.table.grid
    }

    pub fn statistic(&self) -> &StatisticFn<W> {
        &self.statistic
    }

    /// Bin value at the statistic of `state`; out-of-range statistics snap to
    /// the boundary bins.
    pub fn evaluate(&self, state: &W) -> f64 {
        let s = self.statistic.eval(state);
        let multi = self
            .table
            .grid
            .bin_of(&s, true)
            .expect("finite statistic value");
        self.table.values[self.table.grid.flat_index(&multi)]
    }

    /// Bin value at the statistic of `state`; errors when the statistic falls
    /// outside the grid.
    pub fn try_evaluate(&self, state: &W) -> Result<f64> {
        let s = self.statistic.eval(state);
        let multi = self.table.grid.bin_of(&s, false)?;
        Ok(self.table.values[self.table.grid.flat_index(&multi)])
    }
}

/// Builds the binned conditional average of `theta0` over `samples`.
///
/// Each occupied bin holds the arithmetic mean of `theta0` over the samples
/// whose statistic lands in it; empty bins are filled by interpolation.
/// Statistics outside the grid box snap to the boundary bins.
pub fn rao_blackwellize_empirical<W>(
    theta0: impl Fn(&W) -> f64,
    statistic: StatisticFn<W>,
    samples: &[W],
    grid: BinGrid,
) -> Result<RbEstimator<W>> {
    if samples.is_empty() {
        return Err(Error::AllBinsEmpty);
    }
    let n_bins = grid.n_bins();
    let mut sums = vec![0.0; n_bins];
    let mut occupancy = vec![0usize; n_bins];
    for w in samples {
        let s = statistic.eval(w);
        let flat = grid.flat_index(&grid.bin_of(&s, true)?);
        sums[flat] += theta0(w);
        occupancy[flat] += 1;
    }
    if occupancy.iter().all(|&c| c == 0) {
        return Err(Error::AllBinsEmpty);
    }
    let mut values: Vec<f64> = sums
        .iter()
        .zip(&occupancy)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
        .collect();
    fill_empty_bins(&grid, &mut values, &occupancy);
    RbEstimator::from_table(
        RbTable {
            grid,
            values,
            occupancy,
        },
        statistic,
    )
}

/// Gives every empty bin a finite value. 1D: linear interpolation between
/// the nearest occupied bins, constant extrapolation beyond the outermost
/// occupied bins. Multi-D: value of the nearest occupied bin by Euclidean
/// index distance, ties broken by the lowest multi-index.
fn fill_empty_bins(grid: &BinGrid, values: &mut [f64], occupancy: &[usize]) {
    if grid.dimension() == 1 {
        let occupied: Vec<usize> = occupancy
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| (c > 0).then_some(i))
            .collect();
        for i in 0..values.len() {
            if occupancy[i] > 0 {
                continue;
            }
            let next = occupied.partition_point(|&o| o < i);
            values[i] = match (next.checked_sub(1).map(|p| occupied[p]), occupied.get(next)) {
                (Some(lo), Some(&hi)) => {
                    let t = (i - lo) as f64 / (hi - lo) as f64;
                    values[lo] * (1.0 - t) + values[hi] * t
                }
                (Some(lo), None) => values[lo],
                (None, Some(&hi)) => values[hi],
                (None, None) => unreachable!("at least one occupied bin"),
            };
        }
    } else {
        let occupied: Vec<(usize, Vec<usize>)> = occupancy
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| (c > 0).then(|| (i, grid.multi_index(i))))
            .collect();
        for i in 0..values.len() {
            if occupancy[i] > 0 {
                continue;
            }
            let multi = grid.multi_index(i);
            let mut best = usize::MAX;
            let mut best_flat = 0;
            // flat order is lexicographic in the multi-index, so the first
            // strict improvement is the lowest-index tie winner
            for (flat, omulti) in &occupied {
                let d: usize = multi
                    .iter()
                    .zip(omulti)
                    .map(|(&a, &b)| {
                        let d = a.abs_diff(b);
                        d * d
                    })
                    .sum();
                if d < best {
                    best = d;
                    best_flat = *flat;
                }
            }
            values[i] = values[best_flat];
        }
    }
}

/// Mean squared deviation of an estimator from the truth over a sample set.
pub fn mse_over_domain<W>(
    estimator: impl Fn(&W) -> f64,
    truth: impl Fn(&W) -> f64,
    samples: &[W],
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let sum: f64 = samples
        .iter()
        .map(|w| {
            let d = estimator(w) - truth(w);
            d * d
        })
        .sum();
    Ok(sum / samples.len() as f64)
}

/// Sum over samples of `(theta0 - theta1) * (theta1 - truth)`. Vanishes when
/// the truth is constant on every occupied bin, because the per-bin mean
/// removes exactly the within-bin fluctuation of `theta0`.
pub fn cross_term_sum<W>(
    theta0: impl Fn(&W) -> f64,
    rb: &RbEstimator<W>,
    truth: impl Fn(&W) -> f64,
    samples: &[W],
) -> f64 {
    samples
        .iter()
        .map(|w| {
            let t1 = rb.evaluate(w);
            (theta0(w) - t1) * (t1 - truth(w))
        })
        .sum()
}

/// Paired before/after error measurement for one conditional-averaging pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImprovementReport {
    pub mse_before: f64,
    pub mse_after: f64,
    /// `mse_before / mse_after`, guarded against division by zero; exactly 1
    /// when both errors vanish.
    pub factor: f64,
    pub n_bins: usize,
    pub n_empty_bins: usize,
    pub n_samples: usize,
    /// True when the truth was constant on every occupied bin, i.e. the
    /// never-worse guarantee applies and has been enforced.
    pub guarantee_applicable: bool,
}

fn improvement_factor(before: f64, after: f64) -> f64 {
    if after <= 1e-300 {
        if before <= 1e-300 {
            1.0
        } else {
            before / 1e-300
        }
    } else {
        before / after
    }
}

/// Builds the conditional average of `theta0` on `samples`, measures both
/// estimators against `truth` on the same samples, and checks the
/// never-worse inequality.
///
/// The inequality is enforced (as an internal error if ever violated) only
/// when `truth` is constant on every occupied bin; otherwise the report is
/// informational with `guarantee_applicable = false`.
pub fn verify_inequality<W>(
    theta0: impl Fn(&W) -> f64,
    statistic: StatisticFn<W>,
    samples: &[W],
    grid: BinGrid,
    truth: impl Fn(&W) -> f64,
) -> Result<ImprovementReport> {
    let rb = rao_blackwellize_empirical(&theta0, statistic, samples, grid)?;

    // precondition: truth must factor through the statistic at bin resolution
    let n_bins = rb.grid().n_bins();
    let mut lo = vec![f64::INFINITY; n_bins];
    let mut hi = vec![f64::NEG_INFINITY; n_bins];
    for w in samples {
        let s = rb.statistic().eval(w);
        let flat = rb.grid().flat_index(&rb.grid().bin_of(&s, true)?);
        let t = truth(w);
        lo[flat] = lo[flat].min(t);
        hi[flat] = hi[flat].max(t);
    }
    let scale = hi
        .iter()
        .filter(|v| v.is_finite())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let guarantee_applicable = lo
        .iter()
        .zip(&hi)
        .all(|(&l, &h)| h == f64::NEG_INFINITY || (h - l) <= 1e-9 * scale);

    let mse_before = mse_over_domain(&theta0, &truth, samples)?;
    let mse_after = mse_over_domain(|w| rb.evaluate(w), &truth, samples)?;
    if guarantee_applicable && mse_after > mse_before + 1e-12 {
        return Err(Error::NeverWorseViolated {
            before: mse_before,
            after: mse_after,
        });
    }

    Ok(ImprovementReport {
        mse_before,
        mse_after,
        factor: improvement_factor(mse_before, mse_after),
        n_bins,
        n_empty_bins: rb.table().n_empty_bins(),
        n_samples: samples.len(),
        guarantee_applicable,
    })
}

/// Rounds a real-valued prediction to a class label: 0 below `threshold`,
/// 1 at or above it.
pub fn round_to_class(value: f64, threshold: f64) -> u8 {
    debug_assert!(value.is_finite());
    if value < threshold {
        0
    } else {
        1
    }
}
