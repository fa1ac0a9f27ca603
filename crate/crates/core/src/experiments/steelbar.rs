//! Drilled-bar force prediction: a dimensional network taking `(w, d)`
//! against a dimensionless network taking `d / w`, trained on the same
//! 10-point sets against the analytic surrogate. The dimensionless targets
//! are formed by conditional averaging of the reduced force over pairs with
//! equal ratio.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{worker_pool, CurveTable, RunAssembler, RunOutput, SeedReport};
use crate::error::{Error, Result};
use crate::nnet::{
    train, HiddenActivation, LrSchedule, Network, NetworkSpec, Optimizer, OutputActivation,
    TrainConfig,
};
use crate::oracles::{steelbar_surrogate_with, BarGeometry, SurrogateCurve};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteelbarConfig {
    /// Young's modulus used for the dimensional scaling (N/mm^2).
    pub e_modulus: f64,
    pub curve: SurrogateCurve,
    /// Constant-drill set: fixed diameter, widths equally spaced.
    pub const_drill_d: f64,
    pub const_drill_w_range: (f64, f64),
    /// Constant-width set: fixed width, diameters equally spaced.
    pub const_width_w: f64,
    pub const_width_d_range: (f64, f64),
    pub n_train: usize,
    pub random_seed: u64,
    pub n_test: usize,
    /// Hidden layer sizes (input/output sizes are set per variant).
    pub hidden_layers: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub plateau_patience: usize,
    pub seeds: Vec<u64>,
}

impl Default for SteelbarConfig {
    fn default() -> Self {
        SteelbarConfig {
            e_modulus: 210_000.0,
            curve: SurrogateCurve::default(),
            const_drill_d: 4.0,
            const_drill_w_range: (4.76, 8.0),
            const_width_w: 4.0,
            const_width_d_range: (0.364, 3.64),
            n_train: 10,
            random_seed: 777,
            n_test: 21,
            hidden_layers: vec![13, 13, 13],
            epochs: 2000,
            learning_rate: 0.01,
            batch_size: 1,
            plateau_patience: 100,
            seeds: (100..120).collect(),
        }
    }
}

pub const SET_NAMES: [&str; 3] = ["const_drill", "const_width", "random"];

fn training_sets(cfg: &SteelbarConfig) -> Result<[Vec<BarGeometry>; 3]> {
    let n = cfg.n_train;
    let lin = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    let const_drill: Vec<BarGeometry> = (0..n)
        .map(|i| {
            BarGeometry::new(
                lin(cfg.const_drill_w_range.0, cfg.const_drill_w_range.1, i),
                cfg.const_drill_d,
            )
        })
        .collect::<Result<_>>()?;
    let const_width: Vec<BarGeometry> = (0..n)
        .map(|i| {
            BarGeometry::new(
                cfg.const_width_w,
                lin(cfg.const_width_d_range.0, cfg.const_width_d_range.1, i),
            )
        })
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.random_seed);
    let random: Vec<BarGeometry> = (0..n)
        .map(|_| {
            let w = rng.random_range(2.2..8.0);
            let ratio = rng.random_range(0.08..0.9);
            BarGeometry::new(w, ratio * w)
        })
        .collect::<Result<_>>()?;
    Ok([const_drill, const_width, random])
}

fn test_set(cfg: &SteelbarConfig) -> Result<Vec<BarGeometry>> {
    (0..cfg.n_test)
        .map(|i| {
            let t = i as f64 / (cfg.n_test - 1) as f64;
            let w = 2.6 + (7.8 - 2.6) * t;
            let ratio = 0.1 + (0.88 - 0.1) * t;
            BarGeometry::new(w, ratio * w)
        })
        .collect()
}

/// Conditional average of the reduced force over pairs with equal ratio:
/// one `(ratio, mean F / (E w^2))` row per distinct ratio. Also returns the
/// largest within-ratio variance (zero for an exact dimensionless collapse).
pub fn dimensionless_targets(
    geometries: &[BarGeometry],
    e_modulus: f64,
    curve: &SurrogateCurve,
) -> (Vec<(f64, f64)>, f64) {
    let mut rows: Vec<(f64, f64)> = geometries
        .iter()
        .map(|g| {
            let f = steelbar_surrogate_with(g, e_modulus, curve);
            (g.ratio(), f / (e_modulus * g.width * g.width))
        })
        .collect();
    rows.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
    let mut grouped = Vec::new();
    let mut max_var = 0.0f64;
    let mut i = 0;
    while i < rows.len() {
        let mut j = i + 1;
        while j < rows.len() && (rows[j].0 - rows[i].0).abs() <= 1e-12 * (1.0 + rows[i].0.abs()) {
            j += 1;
        }
        let group = &rows[i..j];
        let mean = group.iter().map(|r| r.1).sum::<f64>() / group.len() as f64;
        let var = group.iter().map(|r| (r.1 - mean) * (r.1 - mean)).sum::<f64>()
            / group.len() as f64;
        max_var = max_var.max(var);
        grouped.push((rows[i].0, mean));
        i = j;
    }
    (grouped, max_var)
}

#[derive(Clone)]
struct VariantOutcome {
    train_mse: f64,
    test_rel_err: f64,
    test_forces: Vec<f64>,
}

fn train_variant(
    cfg: &SteelbarConfig,
    inputs: Vec<Vec<f64>>,
    targets_raw: Vec<f64>,
    seed: u64,
    test_inputs: &[Vec<f64>],
    rescale: impl Fn(usize, f64) -> f64,
    test_truth: &[f64],
) -> Result<VariantOutcome> {
    let scale = targets_raw
        .iter()
        .fold(0.0f64, |m, t| m.max(t.abs()))
        .max(1e-300);
    let targets: Vec<Vec<f64>> = targets_raw.iter().map(|t| vec![t / scale]).collect();
    let in_dim = inputs[0].len();
    let mut layers = vec![in_dim];
    layers.extend_from_slice(&cfg.hidden_layers);
    layers.push(1);
    let spec = NetworkSpec::new(layers, HiddenActivation::Relu, OutputActivation::Linear, seed)?;
    let train_cfg = TrainConfig {
        optimizer: Optimizer::Adam,
        learning_rate: cfg.learning_rate,
        batch_size: cfg.batch_size,
        epochs: cfg.epochs,
        shuffle: true,
        shuffle_seed: seed.wrapping_add(0xbaa),
        schedule: LrSchedule::HalveOnPlateau {
            patience: cfg.plateau_patience,
        },
    };
    let data = crate::nnet::Dataset::new(inputs, targets)?;
    let run = train(Network::init(spec), &data, &train_cfg)?;

    let mut rel_sum = 0.0;
    let mut forces = Vec::with_capacity(test_inputs.len());
    for (i, x) in test_inputs.iter().enumerate() {
        let raw = run.network.forward(x)?[0] * scale;
        let force = rescale(i, raw);
        rel_sum += (force - test_truth[i]).abs() / test_truth[i].abs();
        forces.push(force);
    }
    Ok(VariantOutcome {
        train_mse: run.final_train_mse(),
        test_rel_err: rel_sum / test_inputs.len() as f64,
        test_forces: forces,
    })
}

pub fn run_steelbar(cfg: &SteelbarConfig) -> Result<RunOutput> {
    if cfg.n_train < 2 || cfg.n_test < 2 {
        return Err(Error::invalid("steelbar config", "need n_train, n_test >= 2"));
    }
    let mut run = RunAssembler::new("steelbar", cfg, cfg.seeds.clone());
    let sets = training_sets(cfg)?;
    let test = test_set(cfg)?;
    let test_truth: Vec<f64> = test
        .iter()
        .map(|g| steelbar_surrogate_with(g, cfg.e_modulus, &cfg.curve))
        .collect();

    // the conditional average collapses exactly for every training set
    let mut worst_var = 0.0f64;
    for set in &sets {
        let (_, var) = dimensionless_targets(set, cfg.e_modulus, &cfg.curve);
        worst_var = worst_var.max(var);
    }
    run.check(
        "dimensionless_targets_have_zero_within_ratio_variance",
        worst_var <= 1e-28,
        format!("max within-ratio variance {worst_var}"),
    );

    let dim_test_inputs: Vec<Vec<f64>> = test.iter().map(|g| vec![g.width, g.drill]).collect();
    let ratio_test_inputs: Vec<Vec<f64>> = test.iter().map(|g| vec![g.ratio()]).collect();

    // jobs: (set, seed) -> both variants
    let jobs: Vec<(usize, u64)> = (0..3)
        .flat_map(|s| cfg.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    type JobResult = (usize, u64, Result<(VariantOutcome, VariantOutcome)>);
    let outcomes: Vec<JobResult> = worker_pool().install(|| {
        jobs.par_iter()
            .map(|&(set_idx, seed)| {
                let set = &sets[set_idx];
                let res = (|| {
                    let dim_inputs: Vec<Vec<f64>> =
                        set.iter().map(|g| vec![g.width, g.drill]).collect();
                    let dim_targets: Vec<f64> = set
                        .iter()
                        .map(|g| steelbar_surrogate_with(g, cfg.e_modulus, &cfg.curve))
                        .collect();
                    let dim = train_variant(
                        cfg,
                        dim_inputs,
                        dim_targets,
                        seed,
                        &dim_test_inputs,
                        |_, raw| raw,
                        &test_truth,
                    )?;

                    let (rows, _) = dimensionless_targets(set, cfg.e_modulus, &cfg.curve);
                    let ratio_inputs: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.0]).collect();
                    let fstar_targets: Vec<f64> = rows.iter().map(|r| r.1).collect();
                    let e = cfg.e_modulus;
                    let widths: Vec<f64> = test.iter().map(|g| g.width).collect();
                    let dimless = train_variant(
                        cfg,
                        ratio_inputs,
                        fstar_targets,
                        seed,
                        &ratio_test_inputs,
                        |i, raw| raw * e * widths[i] * widths[i],
                        &test_truth,
                    )?;
                    Ok((dim, dimless))
                })();
                (set_idx, seed, res)
            })
            .collect()
    });

    let mut per_seed: Vec<SeedReport> = cfg.seeds.iter().map(|&s| SeedReport::new(s)).collect();
    let mut best: Vec<Vec<Option<VariantOutcome>>> = vec![vec![None, None]; 3];
    for (set_idx, seed, outcome) in outcomes {
        let (dim, dimless) = outcome?;
        let slot = per_seed
            .iter_mut()
            .find(|r| r.seed == seed)
            .expect("seed slot");
        let set = SET_NAMES[set_idx];
        slot.metric(&format!("{set}_dim_train_mse"), dim.train_mse);
        slot.metric(&format!("{set}_dim_test_rel_err"), dim.test_rel_err);
        slot.metric(&format!("{set}_dimless_train_mse"), dimless.train_mse);
        slot.metric(&format!("{set}_dimless_test_rel_err"), dimless.test_rel_err);
        // best-of-N selection by training performance
        for (k, v) in [(0usize, dim), (1, dimless)] {
            let keep = best[set_idx][k]
                .as_ref()
                .is_none_or(|prev| v.train_mse < prev.train_mse);
            if keep {
                best[set_idx][k] = Some(v);
            }
        }
    }

    let mut curves = CurveTable::new(&[
        "set",
        "width",
        "drill",
        "force_truth",
        "force_dimensional_best",
        "force_dimensionless_best",
    ]);
    for (set_idx, set_name) in SET_NAMES.iter().enumerate() {
        let dim = best[set_idx][0].as_ref().expect("at least one seed");
        let dimless = best[set_idx][1].as_ref().expect("at least one seed");
        run.aggregate(&format!("{set_name}_dim_best_rel_err"), dim.test_rel_err);
        run.aggregate(&format!("{set_name}_dimless_best_rel_err"), dimless.test_rel_err);
        run.aggregate(
            &format!("{set_name}_improvement_ratio"),
            dim.test_rel_err / dimless.test_rel_err.max(1e-300),
        );
        for (i, g) in test.iter().enumerate() {
            curves.push(vec![
                set_idx as f64,
                g.width,
                g.drill,
                test_truth[i],
                dim.test_forces[i],
                dimless.test_forces[i],
            ]);
        }
    }
    for report in per_seed {
        run.push_seed(report);
    }

    let dim_best = best[1][0].as_ref().expect("seeds").test_rel_err;
    let dimless_best = best[1][1].as_ref().expect("seeds").test_rel_err;
    run.check(
        "const_width_dimensionless_not_worse_than_dimensional",
        dimless_best <= dim_best,
        format!("dimensionless {dimless_best} vs dimensional {dim_best}"),
    );

    Ok(run.finish(curves))
}
