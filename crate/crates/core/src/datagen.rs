//! Synthetic dataset builders: noisy yield labels, exact test lattices,
//! rotation augmentation, per-step homogenization, compression extension of
//! tension data, and noisy strain clouds with the truncation filter that
//! demonstrates how discarding "unphysical" points biases a regression.
//!
//! All generators draw from ChaCha8 streams seeded explicitly, so every
//! dataset is reproducible bit-for-bit across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanics::{von_mises_phi, PrincipalStress2, Rotation2, SymTensor2};
use crate::oracles::{yield_truth, YIELD_STRESS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Train,
    Validation,
    Test,
}

/// Labeled input/target rows with a provenance tag and the seed that
/// produced them (0 for deterministic lattices).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledGrid {
    pub points: Vec<(Vec<f64>, Vec<f64>)>,
    pub provenance: Provenance,
    pub seed: u64,
}

impl LabeledGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn retag(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn to_dataset(&self) -> Result<crate::nnet::Dataset> {
        crate::nnet::Dataset::new(
            self.points.iter().map(|(x, _)| x.clone()).collect(),
            self.points.iter().map(|(_, y)| y.clone()).collect(),
        )
    }

    /// CSV with columns `in0..in{m-1}, out0..out{k-1}`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let (x0, y0) = self
            .points
            .first()
            .ok_or(Error::EmptyDataset)?;
        let header: Vec<String> = (0..x0.len())
            .map(|i| format!("in{i}"))
            .chain((0..y0.len()).map(|i| format!("out{i}")))
            .collect();
        w.write_record(&header)?;
        for (x, y) in &self.points {
            let row: Vec<String> = x.iter().chain(y.iter()).map(|v| v.to_string()).collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`write_csv`]; the input/output split is
    /// recovered from the header names.
    pub fn read_csv<R: std::io::Read>(reader: R, provenance: Provenance, seed: u64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let n_in = header.iter().filter(|h| h.starts_with("in")).count();
        let n_out = header.len() - n_in;
        if n_in == 0 || n_out == 0 {
            return Err(Error::invalid("csv header", "expected in*/out* columns"));
        }
        let mut points = Vec::new();
        for record in r.records() {
            let record = record?;
            let vals: Vec<f64> = record
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::invalid("csv field", e.to_string()))
                })
                .collect::<Result<_>>()?;
            points.push((vals[..n_in].to_vec(), vals[n_in..].to_vec()));
        }
        Ok(LabeledGrid {
            points,
            provenance,
            seed,
        })
    }
}

/// Matched stress/strain tensors recorded at one load step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StressStrainPair {
    pub sigma: SymTensor2,
    pub eps: SymTensor2,
    pub step: usize,
}

/// Uniform random stress pairs labeled by the exact yield classifier, except
/// that states within `noise_band` of the yield surface get an independent
/// fair-coin label. A zero band disables flipping entirely.
pub fn yield_training_set(
    half_width: f64,
    n_points: usize,
    noise_band: f64,
    seed: u64,
) -> LabeledGrid {
    assert!(half_width > 0.0 && noise_band >= 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let s1 = rng.random_range(-half_width..half_width);
        let s2 = rng.random_range(-half_width..half_width);
        let stress = PrincipalStress2::new(s1, s2);
        let phi = von_mises_phi(stress, YIELD_STRESS).expect("positive yield stress");
        let label = if noise_band > 0.0 && phi.abs() <= noise_band {
            u8::from(rng.random_bool(0.5))
        } else {
            yield_truth(stress)
        };
        points.push((vec![s1, s2], vec![label as f64]));
    }
    LabeledGrid {
        points,
        provenance: Provenance::Train,
        seed,
    }
}

/// Full stress lattice (both endpoints included) with exact labels.
pub fn yield_test_grid(half_width: f64, step: f64) -> LabeledGrid {
    assert!(half_width > 0.0 && step > 0.0);
    let n_axis = (2.0 * half_width / step).round() as usize + 1;
    let mut points = Vec::with_capacity(n_axis * n_axis);
    for i in 0..n_axis {
        let s1 = -half_width + i as f64 * step;
        for j in 0..n_axis {
            let s2 = -half_width + j as f64 * step;
            let label = yield_truth(PrincipalStress2::new(s1, s2));
            points.push((vec![s1, s2], vec![label as f64]));
        }
    }
    LabeledGrid {
        points,
        provenance: Provenance::Test,
        seed: 0,
    }
}

/// Rotated copies of each pair (both tensors rotated by the same angle) at
/// angles `0, step, ..., 2*pi - step`. `step` must divide the full turn.
pub fn rotate_augment(
    pairs: &[StressStrainPair],
    step: f64,
) -> Result<Vec<StressStrainPair>> {
    let turns = std::f64::consts::TAU / step;
    let k = turns.round();
    if !k.is_finite() || k < 1.0 || (turns - k).abs() > 1e-9 {
        return Err(Error::invalid(
            "rotation step",
            format!("step {step} does not divide a full turn"),
        ));
    }
    let k = k as usize;
    let mut out = Vec::with_capacity(pairs.len() * k);
    for pair in pairs {
        for i in 0..k {
            let rot = Rotation2::new(i as f64 * step);
            out.push(StressStrainPair {
                sigma: pair.sigma.rotate(&rot),
                eps: pair.eps.rotate(&rot),
                step: pair.step,
            });
        }
    }
    Ok(out)
}

fn stresses_consistent(a: &SymTensor2, b: &SymTensor2) -> bool {
    let tol = |x: f64, y: f64| (x - y).abs() <= 1e-12 * (1.0 + x.abs().max(y.abs()));
    tol(a.xx, b.xx) && tol(a.yy, b.yy) && tol(a.xy, b.xy)
}

/// One pair per group: the shared stress paired with the componentwise mean
/// strain. Groups must be non-empty with identical stresses.
pub fn homogenize(groups: &[Vec<StressStrainPair>]) -> Result<Vec<StressStrainPair>> {
    let mut out = Vec::with_capacity(groups.len());
    for group in groups {
        let first = group.first().ok_or(Error::EmptyDataset)?;
        let mut mean = SymTensor2::zero();
        for pair in group {
            if !stresses_consistent(&pair.sigma, &first.sigma) {
                return Err(Error::InconsistentGroup { step: first.step });
            }
            mean = mean.add(&pair.eps);
        }
        out.push(StressStrainPair {
            sigma: first.sigma,
            eps: mean.scale(1.0 / group.len() as f64),
            step: first.step,
        });
    }
    Ok(out)
}

/// Tension states with axial strain at or below this value are treated as
/// the linear regime for the compression extension fit.
pub const LINEAR_REGIME_CUTOFF: f64 = 0.02;

/// Mirrors small tension states into compression along a through-origin
/// regression line.
///
/// The line `sigma_xx = slope * eps_xx` is fitted over tension pairs with
/// `0 < eps_xx <= 0.02`; every tension pair with `eps_xx <= max_compression`
/// is then flipped (strain negated, axial stress taken from the line), so
/// generated axial strains lie in `[-max_compression, 0)`.
pub fn compression_extend(
    pairs: &[StressStrainPair],
    max_compression: f64,
) -> Result<Vec<StressStrainPair>> {
    assert!(max_compression > 0.0);
    // the cutoff comparisons carry a relative slack so lattice-generated
    // strain levels sitting on the threshold are not lost to rounding
    let below = |x: f64, limit: f64| x <= limit * (1.0 + 1e-9);
    let regime: Vec<&StressStrainPair> = pairs
        .iter()
        .filter(|p| p.eps.xx > 0.0 && below(p.eps.xx, LINEAR_REGIME_CUTOFF))
        .collect();
    if regime.len() < 2 {
        return Err(Error::DegenerateRegression {
            reason: format!(
                "need at least 2 tension pairs in the linear regime, found {}",
                regime.len()
            ),
        });
    }
    let sxe: f64 = regime.iter().map(|p| p.sigma.xx * p.eps.xx).sum();
    let see: f64 = regime.iter().map(|p| p.eps.xx * p.eps.xx).sum();
    if see <= 0.0 {
        return Err(Error::DegenerateRegression {
            reason: "zero axial strain variance".into(),
        });
    }
    let slope = sxe / see;
    let next_step = pairs.iter().map(|p| p.step + 1).max().unwrap_or(0);
    let mut out = Vec::new();
    for (i, p) in pairs
        .iter()
        .filter(|p| p.eps.xx > 0.0 && below(p.eps.xx, max_compression))
        .enumerate()
    {
        let eps = p.eps.scale(-1.0);
        out.push(StressStrainPair {
            sigma: SymTensor2::new(slope * eps.xx, 0.0, 0.0),
            eps,
            step: next_step + i,
        });
    }
    Ok(out)
}

/// Axial strain of the largest cloud load step.
pub const DIC_MAX_STRAIN: f64 = 0.1;

/// Noisy lateral-strain cloud: for each of `n_steps` axial strain levels
/// (evenly spaced up to [`DIC_MAX_STRAIN`]), `n_regions` lateral readings
/// `eps_yy = -nu * eps_xx + N(0, noise_sd^2)`.
pub fn dic_cloud(
    nu_true: f64,
    n_steps: usize,
    n_regions: usize,
    noise_sd: f64,
    seed: u64,
) -> Vec<(f64, f64)> {
    assert!(nu_true > 0.0 && nu_true < 0.5, "expect 0 < nu < 0.5");
    assert!(noise_sd >= 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = (noise_sd > 0.0).then(|| Normal::new(0.0, noise_sd).expect("valid sigma"));
    let mut cloud = Vec::with_capacity(n_steps * n_regions);
    for i in 1..=n_steps {
        let eps_xx = DIC_MAX_STRAIN * i as f64 / n_steps as f64;
        for _ in 0..n_regions {
            let noise = normal.as_ref().map_or(0.0, |n| n.sample(&mut rng));
            cloud.push((eps_xx, -nu_true * eps_xx + noise));
        }
    }
    cloud
}

/// Keeps only points between the incompressible and auxetic limits,
/// `-0.5 * eps_xx <= eps_yy <= 0`.
pub fn truncation_filter(cloud: &[(f64, f64)]) -> Vec<(f64, f64)> {
    cloud
        .iter()
        .copied()
        .filter(|&(x, y)| y >= -0.5 * x && y <= 0.0)
        .collect()
}

/// Through-origin least squares of `eps_yy` on `eps_xx`, negated.
pub fn fit_poisson(cloud: &[(f64, f64)]) -> Result<f64> {
    if cloud.len() < 2 {
        return Err(Error::DegenerateRegression {
            reason: format!("need at least 2 points, got {}", cloud.len()),
        });
    }
    let sxx: f64 = cloud.iter().map(|&(x, _)| x * x).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateRegression {
            reason: "zero axial strain variance".into(),
        });
    }
    let sxy: f64 = cloud.iter().map(|&(x, y)| x * y).sum();
    Ok(-sxy / sxx)
}

/// CSV for stress/strain pairs: columns
/// `step, sigma_xx, sigma_yy, sigma_xy, eps_xx, eps_yy, eps_xy`.
pub fn pairs_to_csv<W: std::io::Write>(pairs: &[StressStrainPair], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["step", "sigma_xx", "sigma_yy", "sigma_xy", "eps_xx", "eps_yy", "eps_xy"])?;
    for p in pairs {
        w.write_record(&[
            p.step.to_string(),
            p.sigma.xx.to_string(),
            p.sigma.yy.to_string(),
            p.sigma.xy.to_string(),
            p.eps.xx.to_string(),
            p.eps.yy.to_string(),
            p.eps.xy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn pairs_from_csv<R: std::io::Read>(reader: R) -> Result<Vec<StressStrainPair>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for record in r.records() {
        let record = record?;
        if record.len() != 7 {
            return Err(Error::invalid("pairs csv", "expected 7 columns"));
        }
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .map_err(|e: std::num::ParseFloatError| Error::invalid("csv field", e.to_string()))
        };
        out.push(StressStrainPair {
            step: record[0]
                .parse()
                .map_err(|e: std::num::ParseIntError| Error::invalid("csv field", e.to_string()))?,
            sigma: SymTensor2::new(num(1)?, num(2)?, num(3)?),
            eps: SymTensor2::new(num(4)?, num(5)?, num(6)?),
        });
    }
    Ok(out)
}
