//! Yield-surface classification: small networks trained on noisy labels,
//! then filtered by conditional averaging over the effective-stress
//! statistic and rounded back to class labels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{worker_pool, CurveTable, RunAssembler, RunOutput, SeedReport};
use crate::datagen::{yield_test_grid, yield_training_set, Provenance};
use crate::error::Result;
use crate::mechanics::{dev_stress_norm, PrincipalStress2};
use crate::nnet::{
    train_with_validation, HiddenActivation, Network, NetworkSpec, OutputActivation, TrainConfig,
};
use crate::oracles::{yield_truth, YIELD_STRESS};
use crate::rb::{
    rao_blackwellize_empirical, round_to_class, verify_inequality, BinGrid, GridAxis,
    ImprovementReport, RbEstimator, StatisticFn,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct YieldConfig {
    /// Half-width of the stress domain used for data generation (MPa).
    pub domain_half_width: f64,
    /// Labels within this band of the yield surface are assigned by a fair
    /// coin (MPa).
    pub noise_band: f64,
    pub n_train: usize,
    pub n_validation: usize,
    pub data_seed: u64,
    /// Layer sizes including input and output, one entry per network.
    pub net_layer_sizes: Vec<Vec<usize>>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub plateau_patience: usize,
    /// Interval count of the statistic grid (upper limit of the averaging
    /// resolution).
    pub bins: usize,
    /// Half-width of the box over which the conditional average is built.
    pub rb_half_width: f64,
    /// Number of uniform construction samples for the binned average.
    pub rb_samples: usize,
    pub rb_sample_seed: u64,
    /// Test lattice spacing (MPa).
    pub test_step: f64,
    /// Network-initialization seeds (shuffle seeds derive from them).
    pub seeds: Vec<u64>,
}

impl Default for YieldConfig {
    fn default() -> Self {
        YieldConfig {
            domain_half_width: 1.75,
            noise_band: 0.03,
            n_train: 1000,
            n_validation: 200,
            data_seed: 2001,
            net_layer_sizes: vec![vec![2, 5, 1], vec![2, 10, 5, 1]],
            epochs: 400,
            learning_rate: 0.1,
            batch_size: 16,
            plateau_patience: 50,
            bins: 1750,
            rb_half_width: 1.5,
            rb_samples: 200_000,
            rb_sample_seed: 9001,
            test_step: 0.01,
            seeds: vec![11, 23, 37],
        }
    }
}

/// Largest statistic value over the square `[-hw, +hw]^2` (attained at the
/// opposite-sign corners).
fn statistic_range(half_width: f64) -> f64 {
    dev_stress_norm(PrincipalStress2::new(half_width, -half_width))
}

/// Statistic grid whose bin edges hit the yield stress exactly, so the exact
/// labels are constant on every bin.
pub fn yield_statistic_grid(bins: usize, half_width: f64) -> Result<BinGrid> {
    BinGrid::new(vec![GridAxis::aligned(
        0.0,
        statistic_range(half_width),
        bins,
        YIELD_STRESS,
    )?])
}

struct NetOutcome {
    improvement: ImprovementReport,
    test_mse_initial: f64,
    test_mse_filtered: f64,
    train_mse: f64,
    validation_mse: f64,
    rb: RbEstimator<PrincipalStress2>,
}

fn evaluate_one(
    cfg: &YieldConfig,
    layer_sizes: &[usize],
    seed: u64,
    construction: &[PrincipalStress2],
    test: &[(PrincipalStress2, u8)],
) -> Result<NetOutcome> {
    let train_grid = yield_training_set(
        cfg.domain_half_width,
        cfg.n_train,
        cfg.noise_band,
        cfg.data_seed,
    );
    let validation = yield_training_set(
        cfg.domain_half_width,
        cfg.n_validation,
        cfg.noise_band,
        cfg.data_seed.wrapping_add(1),
    )
    .retag(Provenance::Validation);

    let spec = NetworkSpec::new(
        layer_sizes.to_vec(),
        HiddenActivation::Tanh,
        OutputActivation::Tanh,
        seed,
    )?;
    let train_cfg = TrainConfig {
        optimizer: crate::nnet::Optimizer::Sgd,
        learning_rate: cfg.learning_rate,
        batch_size: cfg.batch_size,
        epochs: cfg.epochs,
        shuffle: true,
        shuffle_seed: seed.wrapping_add(0x5eed),
        schedule: crate::nnet::LrSchedule::HalveOnPlateau {
            patience: cfg.plateau_patience,
        },
    };
    let run = train_with_validation(
        Network::init(spec),
        &train_grid.to_dataset()?,
        Some(&validation.to_dataset()?),
        &train_cfg,
    )?;
    let net = run.network;

    let theta0 = |s: &PrincipalStress2| net.forward(&[s.s1, s.s2]).expect("2-input net")[0];
    let truth = |s: &PrincipalStress2| yield_truth(*s) as f64;

    // the raw (unrounded) averaging obeys the never-worse inequality on the
    // construction samples because the exact labels factor through the
    // aligned grid
    let grid = yield_statistic_grid(cfg.bins, cfg.rb_half_width)?;
    let improvement = verify_inequality(
        theta0,
        StatisticFn::scalar(|s: &PrincipalStress2| dev_stress_norm(*s)),
        construction,
        grid.clone(),
        truth,
    )?;
    let rb = rao_blackwellize_empirical(
        theta0,
        StatisticFn::scalar(|s: &PrincipalStress2| dev_stress_norm(*s)),
        construction,
        grid,
    )?;

    let mut err_initial = 0usize;
    let mut err_filtered = 0usize;
    for &(s, label) in test {
        if round_to_class(theta0(&s), 0.5) != label {
            err_initial += 1;
        }
        if round_to_class(rb.evaluate(&s), 0.5) != label {
            err_filtered += 1;
        }
    }
    let n = test.len() as f64;

    let last = run.history.last().expect("training history");
    Ok(NetOutcome {
        improvement,
        test_mse_initial: err_initial as f64 / n,
        test_mse_filtered: err_filtered as f64 / n,
        train_mse: last.train_mse,
        validation_mse: last.validation_mse.unwrap_or(f64::NAN),
        rb,
    })
}

pub fn run_yield(cfg: &YieldConfig) -> Result<RunOutput> {
    let mut run = RunAssembler::new("yield", cfg, cfg.seeds.clone());

    // uniform construction samples over the averaging box
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rb_sample_seed);
    let hw = cfg.rb_half_width;
    let construction: Vec<PrincipalStress2> = (0..cfg.rb_samples)
        .map(|_| PrincipalStress2::new(rng.random_range(-hw..hw), rng.random_range(-hw..hw)))
        .collect();

    let test: Vec<(PrincipalStress2, u8)> = yield_test_grid(cfg.domain_half_width, cfg.test_step)
        .points
        .iter()
        .map(|(x, y)| (PrincipalStress2::new(x[0], x[1]), y[0] as u8))
        .collect();

    let jobs: Vec<(usize, u64)> = cfg
        .net_layer_sizes
        .iter()
        .enumerate()
        .flat_map(|(i, _)| cfg.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let outcomes: Vec<(usize, u64, Result<NetOutcome>)> = worker_pool().install(|| {
        jobs.par_iter()
            .map(|&(net_idx, seed)| {
                (
                    net_idx,
                    seed,
                    evaluate_one(cfg, &cfg.net_layer_sizes[net_idx], seed, &construction, &test),
                )
            })
            .collect()
    });

    let mut curves = CurveTable::new(&["net", "seed", "statistic", "filtered_value", "occupancy"]);
    let mut per_seed: Vec<SeedReport> = cfg.seeds.iter().map(|&s| SeedReport::new(s)).collect();
    for (net_idx, seed, outcome) in outcomes {
        let outcome = outcome?;
        let name = |metric: &str| format!("net{net_idx}_{metric}");
        let slot = per_seed
            .iter_mut()
            .find(|r| r.seed == seed)
            .expect("seed slot");
        slot.metric(&name("test_mse_initial"), outcome.test_mse_initial);
        slot.metric(&name("test_mse_filtered"), outcome.test_mse_filtered);
        slot.metric(&name("train_mse"), outcome.train_mse);
        slot.metric(&name("validation_mse"), outcome.validation_mse);
        slot.improvements.push(outcome.improvement.clone());

        run.check(
            &format!("net{net_idx}_seed{seed}_construction_inequality"),
            outcome.improvement.guarantee_applicable
                && outcome.improvement.mse_after <= outcome.improvement.mse_before + 1e-12,
            format!(
                "raw mse {} -> {} (factor {:.2})",
                outcome.improvement.mse_before,
                outcome.improvement.mse_after,
                outcome.improvement.factor
            ),
        );
        run.check(
            &format!("net{net_idx}_seed{seed}_test_grid_not_worse"),
            outcome.test_mse_filtered <= outcome.test_mse_initial,
            format!(
                "test mse {} -> {}",
                outcome.test_mse_initial, outcome.test_mse_filtered
            ),
        );

        // flow-curve table for the first seed of each net
        if seed == cfg.seeds[0] {
            let table = outcome.rb.table();
            for (i, (&v, &occ)) in table.values.iter().zip(&table.occupancy).enumerate() {
                curves.push(vec![
                    net_idx as f64,
                    seed as f64,
                    table.grid.bin_center(&[i])[0],
                    v,
                    occ as f64,
                ]);
            }
        }
    }

    for (net_idx, _) in cfg.net_layer_sizes.iter().enumerate() {
        let best_initial = per_seed
            .iter()
            .map(|r| r.metrics[&format!("net{net_idx}_test_mse_initial")])
            .fold(f64::INFINITY, f64::min);
        let best_filtered = per_seed
            .iter()
            .map(|r| r.metrics[&format!("net{net_idx}_test_mse_filtered")])
            .fold(f64::INFINITY, f64::min);
        run.aggregate(&format!("net{net_idx}_best_test_mse_initial"), best_initial);
        run.aggregate(&format!("net{net_idx}_best_test_mse_filtered"), best_filtered);
    }
    for report in per_seed {
        run.push_seed(report);
    }

    Ok(run.finish(curves))
}
