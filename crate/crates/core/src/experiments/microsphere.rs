//! Orbit-average example: quadrature over the rotation orbit of a stretch
//! tensor against the closed form (a third of the first invariant).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CurveTable, RunAssembler, RunOutput, SeedReport};
use crate::error::Result;
use crate::mechanics::SymTensor3;
use crate::oracles::microsphere_truth;
use crate::rb::{microsphere_orbit_average, SphereRule};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MicrosphereConfig {
    pub n_tensors: usize,
    pub seed: u64,
    pub n_polar: usize,
    pub n_azimuth: usize,
}

impl Default for MicrosphereConfig {
    fn default() -> Self {
        MicrosphereConfig {
            n_tensors: 10,
            seed: 4242,
            n_polar: 8,
            n_azimuth: 16,
        }
    }
}

pub(crate) fn random_spd(rng: &mut ChaCha8Rng) -> SymTensor3 {
    let b: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| b[3 * i + k] * b[3 * j + k]).sum::<f64>();
        }
        c[i][i] += 0.1;
    }
    SymTensor3::new(c[0][0], c[1][1], c[2][2], c[0][1], c[1][2], c[0][2])
}

pub fn run_microsphere(cfg: &MicrosphereConfig) -> Result<RunOutput> {
    let mut run = RunAssembler::new("microsphere", cfg, vec![cfg.seed]);
    let mut curves = CurveTable::new(&["tensor", "third_of_trace", "orbit_average", "deviation"]);
    let rule = SphereRule::product(cfg.n_polar, cfg.n_azimuth);
    // the integrand is quadratic in the direction, so any product rule of
    // modest order is already exact; the convergence check therefore anchors
    // at a deliberately under-resolved rule and its doubled version
    let coarse = SphereRule::product(1, 2);
    let doubled = SphereRule::product(2, 4);

    let identity_dev =
        (microsphere_orbit_average(&SymTensor3::identity(), &rule)? - 1.0).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut max_dev = 0.0f64;
    let mut max_dev_coarse = 0.0f64;
    let mut max_dev_doubled = 0.0f64;
    let mut seed_report = SeedReport::new(cfg.seed);
    for i in 0..cfg.n_tensors {
        let c = random_spd(&mut rng);
        let truth = microsphere_truth(&c);
        let avg = microsphere_orbit_average(&c, &rule)?;
        let dev = (avg - truth).abs();
        max_dev = max_dev.max(dev);
        max_dev_coarse = max_dev_coarse.max((microsphere_orbit_average(&c, &coarse)? - truth).abs());
        max_dev_doubled =
            max_dev_doubled.max((microsphere_orbit_average(&c, &doubled)? - truth).abs());
        curves.push(vec![i as f64, truth, avg, dev]);
    }
    seed_report.metric("identity_deviation", identity_dev);
    seed_report.metric("max_deviation", max_dev);
    seed_report.metric("max_deviation_coarse_rule", max_dev_coarse);
    seed_report.metric("max_deviation_doubled_rule", max_dev_doubled);
    run.push_seed(seed_report);
    run.aggregate("max_deviation", max_dev);

    run.check(
        "identity_tensor_deviation_zero",
        identity_dev < 1e-12,
        format!("deviation {identity_dev}"),
    );
    run.check(
        "orbit_average_matches_closed_form",
        max_dev < 1e-8,
        format!("max deviation {max_dev}"),
    );
    run.check(
        "doubling_nodes_shrinks_the_error",
        max_dev_doubled < max_dev_coarse && max_dev <= max_dev_doubled + 1e-12,
        format!("{max_dev_coarse} -> {max_dev_doubled} -> {max_dev}"),
    );

    Ok(run.finish(curves))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_run_passes() {
        let out = run_microsphere(&MicrosphereConfig::default()).unwrap();
        assert!(out.report.passed, "checks: {:?}", out.report.failed_checks());
        assert!(out.report.aggregate["max_deviation"] < 1e-8);
    }
}
