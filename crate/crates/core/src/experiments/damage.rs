//! Damage-energy prediction: compares three ways of exploiting the
//! sufficient pair (deviator norm, trace) — filtering the trained network's
//! output by conditional averaging, augmenting the training data along the
//! statistic's level sets, and feeding the statistic itself as the network
//! input — plus deliberately insufficient and redundant input sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean, std_dev, worker_pool, CurveTable, RunAssembler, RunOutput, SeedReport};
use crate::error::{Error, Result};
use crate::mechanics::{Embedding, SymTensor2};
use crate::nnet::{
    train, Dataset, HiddenActivation, LrSchedule, Network, NetworkSpec, Optimizer,
    OutputActivation, TrainConfig,
};
use crate::oracles::{damage_split_closed, damage_sufficiency_witness, ElasticConstants};
use crate::rb::{
    rao_blackwellize_empirical, verify_inequality, BinGrid, GridAxis, RbEstimator, StatisticFn,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DamageConfig {
    pub kappa: f64,
    pub mu: f64,
    pub gamma: f64,
    /// One training lattice per entry: half-range and points per axis.
    pub train_half_ranges: Vec<f64>,
    pub train_points_per_axis: Vec<usize>,
    pub test_half_range: f64,
    /// Test lattice spacing; desk-scale default. `full_resolution` drops it
    /// to 0.001 (about 8.1e6 points).
    pub test_step: f64,
    pub full_resolution: bool,
    pub hidden_layers: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seeds: Vec<u64>,
    /// 2D statistic grid (deviator norm x trace) for the output filter.
    pub filter_bins: (usize, usize),
    pub filter_samples: usize,
    pub filter_seed: u64,
    /// Extra equal-statistic copies per training point for the augmentation
    /// variant.
    pub augment_copies: usize,
    pub augment_seed: u64,
}

impl Default for DamageConfig {
    fn default() -> Self {
        DamageConfig {
            kappa: 3.0,
            mu: 2.0,
            gamma: 1.0,
            train_half_ranges: vec![0.025, 0.05, 0.1],
            train_points_per_axis: vec![3, 5, 7],
            test_half_range: 0.1,
            test_step: 0.005,
            full_resolution: false,
            hidden_layers: vec![50, 50, 50, 20],
            epochs: 150,
            learning_rate: 0.01,
            batch_size: 1,
            seeds: vec![5, 6, 7, 8, 9],
            filter_bins: (64, 64),
            filter_samples: 60_000,
            filter_seed: 606,
            augment_copies: 3,
            augment_seed: 707,
        }
    }
}

pub const VARIANT_NAMES: [&str; 6] = [
    "initial",
    "output_filter",
    "data_augment",
    "structure_s1",
    "structure_s2",
    "structure_s3",
];

/// Statistic pair of a strain state: (deviator norm, trace).
pub fn damage_statistic(eps: &SymTensor2) -> (f64, f64) {
    (eps.dev_norm(Embedding::PlaneStrain), eps.trace())
}

fn variant_inputs(variant: usize, eps: &SymTensor2) -> Vec<f64> {
    let (d, t) = damage_statistic(eps);
    match variant {
        0 | 2 => vec![eps.xx, eps.yy, eps.xy],
        3 => vec![d],
        4 => vec![d, t],
        5 => vec![d, t, eps.xx],
        _ => unreachable!("no trained network for the filter variant"),
    }
}

fn targets(eps: &SymTensor2, k: &ElasticConstants) -> Vec<f64> {
    let split = damage_split_closed(eps, k);
    vec![split.psi_d, split.psi_r]
}

fn lattice(half_range: f64, points_per_axis: usize) -> Vec<SymTensor2> {
    let coord = |i: usize| {
        if points_per_axis == 1 {
            0.0
        } else {
            -half_range + 2.0 * half_range * i as f64 / (points_per_axis - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(points_per_axis.pow(3));
    for i in 0..points_per_axis {
        for j in 0..points_per_axis {
            for l in 0..points_per_axis {
                out.push(SymTensor2::new(coord(i), coord(j), coord(l)));
            }
        }
    }
    out
}

/// Equal-statistic resampling: the level set of (deviator norm, trace)
/// within plane 2D strain tensors is a circle in the
/// `((xx - yy) / 2, xy)` plane; new points are drawn at random angles.
/// Targets are copied from the source point. Returns the augmented points
/// and the largest deviation of the closed-form target at an augmented point
/// from its source target.
pub fn augment_equal_statistic(
    points: &[SymTensor2],
    copies: usize,
    k: &ElasticConstants,
    seed: u64,
) -> (Vec<(SymTensor2, Vec<f64>)>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(points.len() * (copies + 1));
    let mut max_dev = 0.0f64;
    for eps in points {
        let source_targets = targets(eps, k);
        out.push((*eps, source_targets.clone()));
        let t = eps.trace();
        let a = 0.5 * (eps.xx - eps.yy);
        let radius = (a * a + eps.xy * eps.xy).sqrt();
        for _ in 0..copies {
            let alpha = rng.random_range(0.0..std::f64::consts::TAU);
            let new = SymTensor2::new(
                0.5 * t + radius * alpha.cos(),
                0.5 * t - radius * alpha.cos(),
                radius * alpha.sin(),
            );
            let exact = targets(&new, k);
            for (e, s) in exact.iter().zip(&source_targets) {
                max_dev = max_dev.max((e - s).abs());
            }
            out.push((new, source_targets.clone()));
        }
    }
    (out, max_dev)
}

fn train_cfg(cfg: &DamageConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        optimizer: Optimizer::Sgd,
        learning_rate: cfg.learning_rate,
        batch_size: cfg.batch_size,
        epochs: cfg.epochs,
        shuffle: true,
        shuffle_seed: seed.wrapping_add(0xda),
        schedule: LrSchedule::Constant,
    }
}

fn fit(
    cfg: &DamageConfig,
    inputs: Vec<Vec<f64>>,
    target_rows: Vec<Vec<f64>>,
    seed: u64,
) -> Result<Network> {
    let in_dim = inputs[0].len();
    let mut layers = vec![in_dim];
    layers.extend_from_slice(&cfg.hidden_layers);
    layers.push(2);
    let spec = NetworkSpec::new(layers, HiddenActivation::Relu, OutputActivation::Linear, seed)?;
    let data = Dataset::new(inputs, target_rows)?;
    Ok(train(Network::init(spec), &data, &train_cfg(cfg, seed))?.network)
}

fn test_mse(predict: impl Fn(&SymTensor2) -> [f64; 2], test: &[(SymTensor2, [f64; 2])]) -> f64 {
    let sum: f64 = test
        .iter()
        .map(|(eps, truth)| {
            let p = predict(eps);
            (p[0] - truth[0]).powi(2) + (p[1] - truth[1]).powi(2)
        })
        .sum();
    sum / test.len() as f64
}

struct SetSeedOutcome {
    /// Test MSE per variant, in `VARIANT_NAMES` order.
    mse: [f64; 6],
    /// Construction-sample MSE of the raw initial net vs the filtered one
    /// (summed over the two outputs).
    filter_before: f64,
    filter_after: f64,
    augment_target_dev: f64,
}

fn filter_grid(cfg: &DamageConfig) -> Result<BinGrid> {
    let r = cfg.test_half_range;
    BinGrid::new(vec![
        GridAxis::new(0.0, 2.0 * r, cfg.filter_bins.0)?,
        GridAxis::new(-2.0 * r, 2.0 * r, cfg.filter_bins.1)?,
    ])
}

fn run_set_seed(
    cfg: &DamageConfig,
    k: &ElasticConstants,
    train_points: &[SymTensor2],
    test: &[(SymTensor2, [f64; 2])],
    construction: &[SymTensor2],
    seed: u64,
) -> Result<SetSeedOutcome> {
    let mut mse = [0.0f64; 6];

    // initial network on raw strain components
    let initial = fit(
        cfg,
        train_points.iter().map(|e| variant_inputs(0, e)).collect(),
        train_points.iter().map(|e| targets(e, k)).collect(),
        seed,
    )?;
    let initial_predict = |eps: &SymTensor2| -> [f64; 2] {
        let out = initial.forward(&variant_inputs(0, eps)).expect("3-input net");
        [out[0], out[1]]
    };
    mse[0] = test_mse(initial_predict, test);

    // output filter: conditionally average each output over the statistic.
    // net outputs are cached per construction sample so the (dominant)
    // forward cost is paid once.
    let cached: Vec<(SymTensor2, [f64; 2])> = construction
        .iter()
        .map(|eps| (*eps, initial_predict(eps)))
        .collect();
    let statistic = || {
        StatisticFn::new(2, |w: &(SymTensor2, [f64; 2])| {
            let (d, t) = damage_statistic(&w.0);
            vec![d, t]
        })
    };
    let mut filtered: Vec<RbEstimator<(SymTensor2, [f64; 2])>> = Vec::new();
    let mut filter_before = 0.0;
    let mut filter_after = 0.0;
    for out_idx in 0..2 {
        let theta0 = move |w: &(SymTensor2, [f64; 2])| w.1[out_idx];
        let truth = move |w: &(SymTensor2, [f64; 2])| targets(&w.0, k)[out_idx];
        let report = verify_inequality(theta0, statistic(), &cached, filter_grid(cfg)?, truth)?;
        filter_before += report.mse_before;
        filter_after += report.mse_after;
        filtered.push(rao_blackwellize_empirical(
            theta0,
            statistic(),
            &cached,
            filter_grid(cfg)?,
        )?);
    }
    mse[1] = test_mse(
        |eps| {
            let probe = (*eps, [0.0, 0.0]);
            [filtered[0].evaluate(&probe), filtered[1].evaluate(&probe)]
        },
        test,
    );

    // data augmentation along the statistic's level sets
    let (augmented, augment_target_dev) =
        augment_equal_statistic(train_points, cfg.augment_copies, k, cfg.augment_seed);
    let augmented_net = fit(
        cfg,
        augmented.iter().map(|(e, _)| variant_inputs(2, e)).collect(),
        augmented.iter().map(|(_, t)| t.clone()).collect(),
        seed,
    )?;
    mse[2] = test_mse(
        |eps| {
            let out = augmented_net.forward(&variant_inputs(2, eps)).expect("3-input net");
            [out[0], out[1]]
        },
        test,
    );

    // structure variants: statistic-derived inputs
    for variant in 3..6 {
        let net = fit(
            cfg,
            train_points.iter().map(|e| variant_inputs(variant, e)).collect(),
            train_points.iter().map(|e| targets(e, k)).collect(),
            seed,
        )?;
        mse[variant] = test_mse(
            |eps| {
                let out = net.forward(&variant_inputs(variant, eps)).expect("statistic inputs");
                [out[0], out[1]]
            },
            test,
        );
    }

    Ok(SetSeedOutcome {
        mse,
        filter_before,
        filter_after,
        augment_target_dev,
    })
}

pub fn run_damage(cfg: &DamageConfig) -> Result<RunOutput> {
    if cfg.train_half_ranges.len() != cfg.train_points_per_axis.len()
        || cfg.train_half_ranges.is_empty()
    {
        return Err(Error::invalid(
            "damage config",
            "train_half_ranges and train_points_per_axis must be non-empty and match",
        ));
    }
    let k = ElasticConstants::new(cfg.kappa, cfg.mu, cfg.gamma)?;
    let mut run = RunAssembler::new("damage", cfg, cfg.seeds.clone());

    let test_step = if cfg.full_resolution { 0.001 } else { cfg.test_step };
    let n_axis = (2.0 * cfg.test_half_range / test_step).round() as usize + 1;
    let test: Vec<(SymTensor2, [f64; 2])> = lattice(cfg.test_half_range, n_axis)
        .into_iter()
        .map(|eps| {
            let t = targets(&eps, &k);
            (eps, [t[0], t[1]])
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.filter_seed);
    let r = cfg.test_half_range;
    let construction: Vec<SymTensor2> = (0..cfg.filter_samples)
        .map(|_| {
            SymTensor2::new(
                rng.random_range(-r..r),
                rng.random_range(-r..r),
                rng.random_range(-r..r),
            )
        })
        .collect();

    let train_sets: Vec<Vec<SymTensor2>> = cfg
        .train_half_ranges
        .iter()
        .zip(&cfg.train_points_per_axis)
        .map(|(&hr, &n)| lattice(hr, n))
        .collect();

    let jobs: Vec<(usize, u64)> = (0..train_sets.len())
        .flat_map(|s| cfg.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let outcomes: Vec<(usize, u64, Result<SetSeedOutcome>)> = worker_pool().install(|| {
        jobs.par_iter()
            .map(|&(set_idx, seed)| {
                (
                    set_idx,
                    seed,
                    run_set_seed(cfg, &k, &train_sets[set_idx], &test, &construction, seed),
                )
            })
            .collect()
    });

    let mut per_seed: Vec<SeedReport> = cfg.seeds.iter().map(|&s| SeedReport::new(s)).collect();
    let n_sets = train_sets.len();
    let mut mse_by_set_variant: Vec<[Vec<f64>; 6]> = (0..n_sets)
        .map(|_| std::array::from_fn(|_| Vec::new()))
        .collect();
    for (set_idx, seed, outcome) in outcomes {
        let outcome = outcome?;
        let slot = per_seed
            .iter_mut()
            .find(|r| r.seed == seed)
            .expect("seed slot");
        for (v, name) in VARIANT_NAMES.iter().enumerate() {
            slot.metric(&format!("set{set_idx}_{name}_test_mse"), outcome.mse[v]);
            mse_by_set_variant[set_idx][v].push(outcome.mse[v]);
        }
        slot.metric(&format!("set{set_idx}_filter_mse_before"), outcome.filter_before);
        slot.metric(&format!("set{set_idx}_filter_mse_after"), outcome.filter_after);
        run.check(
            &format!("set{set_idx}_seed{seed}_filter_inequality_on_construction_samples"),
            outcome.filter_after <= outcome.filter_before + 1e-12,
            format!("{} -> {}", outcome.filter_before, outcome.filter_after),
        );
        run.check(
            &format!("set{set_idx}_seed{seed}_augmented_targets_match_closed_form"),
            outcome.augment_target_dev <= 1e-10,
            format!("max target deviation {}", outcome.augment_target_dev),
        );
    }

    let mut curves = CurveTable::new(&["set", "variant", "mean_test_mse", "std_test_mse"]);
    for set_idx in 0..n_sets {
        for (v, name) in VARIANT_NAMES.iter().enumerate() {
            let vals = &mse_by_set_variant[set_idx][v];
            let m = mean(vals);
            let s = std_dev(vals);
            run.aggregate(&format!("set{set_idx}_{name}_mean_test_mse"), m);
            run.aggregate(&format!("set{set_idx}_{name}_std_test_mse"), s);
            curves.push(vec![set_idx as f64, v as f64, m, s]);
        }
    }
    for report in per_seed {
        run.push_seed(report);
    }

    // sufficiency witnesses: equal statistic pairs agree, the deviator norm
    // alone does not determine the split
    let mut witness_rng = ChaCha8Rng::seed_from_u64(1234);
    let mut witness_ok = true;
    for _ in 0..500 {
        let eps = SymTensor2::new(
            witness_rng.random_range(-0.1..0.1),
            witness_rng.random_range(-0.1..0.1),
            witness_rng.random_range(-0.1..0.1),
        );
        let (aug, _) = augment_equal_statistic(&[eps], 1, &k, witness_rng.random());
        witness_ok &= damage_sufficiency_witness(&eps, &aug[1].0, &k);
    }
    run.check(
        "equal_statistic_pairs_share_the_split",
        witness_ok,
        "500 random equal-statistic pairs",
    );
    let plus = SymTensor2::new(0.03, 0.01, 0.02);
    let minus = SymTensor2::new(-0.03, -0.01, 0.02);
    let sp = damage_split_closed(&plus, &k);
    let sm = damage_split_closed(&minus, &k);
    run.check(
        "deviator_norm_alone_is_insufficient",
        (damage_statistic(&plus).0 - damage_statistic(&minus).0).abs() < 1e-15
            && (sp.psi_r - sm.psi_r).abs() > 1e-9,
        format!("psi_r {} vs {}", sp.psi_r, sm.psi_r),
    );

    Ok(run.finish(curves))
}
