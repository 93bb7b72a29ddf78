//! End-to-end use of the public API: streams, samplers, experiments and
//! their on-disk output.

use eulerdisc::analysis::ks_two_sample;
use eulerdisc::correction::{joint_cross_terminal_prob, BarrierQuery};
use eulerdisc::events::{error_triplet_min, hit_constant_exact, BmParams};
use eulerdisc::experiment::{emit, read_columns_csv, run_experiment, ExperimentConfig, ExperimentKind, OutputFormat};
use eulerdisc::limits::sample_min_limit;
use eulerdisc::{beta_constant, create_stream};

const STD: BmParams = BmParams { mu: 0.0, sigma: 1.0 };

#[test]
fn every_kind_runs_small() {
    for kind in ExperimentKind::ALL {
        let cfg = ExperimentConfig {
            kind,
            samples: 200,
            n: 64,
            mu: 1.0,
            ..ExperimentConfig::default()
        };
        let r = run_experiment(&cfg).unwrap_or_else(|e| panic!("{}: {e}", kind.name()));
        assert_eq!(r.attempted, 200, "{}", kind.name());
        if kind != ExperimentKind::Correction {
            assert_eq!(r.columns.len(), kind.columns().len());
            assert!(r.columns.iter().all(|c| c.len() as u64 == 200 - r.discarded));
        }
    }
}

#[test]
fn shard_count_does_not_change_samples() {
    let base = ExperimentConfig::from_kv_str("kind = hit\nn = 128\nsamples = 999\nseed = 4").unwrap();
    let one = run_experiment(&base).unwrap();
    let seven = run_experiment(&ExperimentConfig { shards: 7, ..base.clone() }).unwrap();
    assert_eq!(one.columns, seven.columns);
}

#[test]
fn csv_output_reads_back_bit_exact() {
    let dir = std::env::temp_dir().join(format!("eulerdisc-pipeline-{}", std::process::id()));
    let r = run_experiment(&ExperimentConfig::from_kv_str("kind = overshoot\nm = 8\nsamples = 400").unwrap()).unwrap();
    let out = emit(&r, &dir, OutputFormat::Csv).unwrap();
    let (names, cols) = read_columns_csv(&out.data.unwrap()).unwrap();
    assert_eq!(names, ["first", "second"]);
    assert_eq!(cols, r.columns);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn finite_minimum_error_approaches_limit() {
    let mut s = create_stream(77, 0);
    let n = 20_000;
    let pos: Vec<f64> = (0..n).map(|_| error_triplet_min(1.0, 1024, STD, &mut s).unwrap().pos_err).collect();
    let lim: Vec<f64> = (0..n).map(|_| sample_min_limit(1.0, 1e-6, &mut s).unwrap().pos_comp).collect();
    assert!(ks_two_sample(&pos, &lim).unwrap() < 0.03);
    let mean = pos.iter().sum::<f64>() / n as f64;
    assert!((mean - beta_constant()).abs() < 0.03, "{mean}");
}

#[test]
fn discrete_hit_is_never_earlier() {
    let mut s = create_stream(78, 0);
    for _ in 0..5_000 {
        let (rec, t) = hit_constant_exact(32, 1.0, BmParams { mu: 0.3, sigma: 1.2 }, &mut s).unwrap();
        assert!(rec.tau_n >= rec.tau_cont);
        assert!(t.time_err >= 0.0 && t.pos_err >= 0.0);
    }
}

#[test]
fn corrected_probability_sits_below_continuous() {
    let q = BarrierQuery { b: 1.0, y: 0.5, t: 1.0, n: 16, mu: 0.2, sigma: 1.0 };
    let cont = joint_cross_terminal_prob(&q, true).unwrap();
    let corr = joint_cross_terminal_prob(&q, false).unwrap();
    assert!(corr < cont);
}
