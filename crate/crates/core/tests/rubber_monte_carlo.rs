//! Monte Carlo comparison of the two stretch-test pipelines: the pure
//! homogenize/rotate/extend set against the additionally band-truncated set,
//! over 100 data seeds. The truncation must hurt in at least 90 of them.
//!
//! Runs at a trimmed desk scale (fewer regions, shorter training) so the
//! whole sweep stays around a minute; the margin is large enough that the
//! trim does not matter.

use rbx_core::experiments::{run_rubber, RubberConfig};

#[test]
fn truncated_pipeline_loses_in_at_least_90_of_100_seeds() {
    let cfg = RubberConfig {
        n_regions: 80,
        epochs: 150,
        seeds: (0..100).collect(),
        ..RubberConfig::default()
    };
    let out = run_rubber(&cfg).expect("rubber sweep");
    assert!(
        out.report.passed,
        "failed checks: {:?}",
        out.report.failed_checks()
    );
    let wins = out.report.aggregate["rb_wins"];
    assert!(wins >= 90.0, "clean pipeline won only {wins}/100");
    let dev_rb = out.report.aggregate["mean_deviation_rb"];
    let dev_trunc = out.report.aggregate["mean_deviation_truncated"];
    assert!(dev_rb < dev_trunc);
    println!(
        "rubber Monte Carlo: clean pipeline wins {wins}/100 \
         (mean lateral-ratio deviation {dev_rb:.3} vs {dev_trunc:.3})"
    );
}
