//! Truncation-bias demonstration: fitting a lateral-contraction ratio from a
//! noisy strain cloud, with and without discarding points outside the
//! incompressible/auxetic band.

use serde::{Deserialize, Serialize};

use super::{mean, CurveTable, RunAssembler, RunOutput, SeedReport};
use crate::datagen::{dic_cloud, fit_poisson, truncation_filter};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoissonConfig {
    pub nu_true: f64,
    pub noise_sd: f64,
    pub n_steps: usize,
    pub n_regions: usize,
    pub seeds: Vec<u64>,
}

impl Default for PoissonConfig {
    fn default() -> Self {
        PoissonConfig {
            nu_true: 0.45,
            noise_sd: 0.03,
            n_steps: 20,
            n_regions: 275,
            seeds: (0..100).collect(),
        }
    }
}

/// Per seed: fit the ratio on the full cloud and on the truncated cloud.
/// The full-data regression must win in at least 90% of seeds and the
/// truncated mean estimate must sit strictly below the full one (the
/// truncation cuts the far tail of the noise, dragging the slope down).
pub fn run_poisson(cfg: &PoissonConfig) -> Result<RunOutput> {
    let mut run = RunAssembler::new("poisson", cfg, cfg.seeds.clone());
    let mut curves = CurveTable::new(&["seed", "nu_full", "nu_truncated", "kept_fraction"]);

    let mut fulls = Vec::new();
    let mut truncs = Vec::new();
    let mut full_wins = 0usize;
    for &seed in &cfg.seeds {
        let cloud = dic_cloud(cfg.nu_true, cfg.n_steps, cfg.n_regions, cfg.noise_sd, seed);
        let kept = truncation_filter(&cloud);
        let nu_full = fit_poisson(&cloud)?;
        let nu_trunc = fit_poisson(&kept)?;
        if (nu_full - cfg.nu_true).abs() < (nu_trunc - cfg.nu_true).abs() {
            full_wins += 1;
        }
        let mut report = SeedReport::new(seed);
        report.metric("nu_full", nu_full);
        report.metric("nu_truncated", nu_trunc);
        report.metric("kept_fraction", kept.len() as f64 / cloud.len() as f64);
        curves.push(vec![
            seed as f64,
            nu_full,
            nu_trunc,
            kept.len() as f64 / cloud.len() as f64,
        ]);
        run.push_seed(report);
        fulls.push(nu_full);
        truncs.push(nu_trunc);
    }

    let mean_full = mean(&fulls);
    let mean_trunc = mean(&truncs);
    run.aggregate("mean_nu_full", mean_full);
    run.aggregate("mean_nu_truncated", mean_trunc);
    run.aggregate("full_wins", full_wins as f64);
    run.aggregate("n_seeds", cfg.seeds.len() as f64);

    if cfg.noise_sd > 0.0 {
        let needed = (0.9 * cfg.seeds.len() as f64).ceil() as usize;
        run.check(
            "full_data_beats_truncated_in_90pct_of_seeds",
            full_wins >= needed,
            format!("{full_wins}/{} wins, needed {needed}", cfg.seeds.len()),
        );
        run.check(
            "truncated_mean_estimate_strictly_smaller",
            mean_trunc < mean_full,
            format!("truncated {mean_trunc} vs full {mean_full}"),
        );
    } else {
        run.check(
            "noiseless_estimates_exact",
            fulls
                .iter()
                .chain(truncs.iter())
                .all(|nu| (nu - cfg.nu_true).abs() < 1e-12),
            "zero noise: both fits must recover the exact ratio",
        );
    }

    Ok(run.finish(curves))
}
