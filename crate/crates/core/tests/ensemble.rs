// SPDX-License-Identifier: Apache-2.0

//! Reproducibility of disorder sweeps: seeds, thread counts, checkpoints.

use std::path::PathBuf;

use lrchain::ensemble::{
    realization_seed, run_sweep, summarize, Checkpoint, EnsembleSummary, Observable, OpenRates,
    Realizations, RunOptions, SweepConfig, CHECKPOINT_FILE,
};
use lrchain::model::ChainSpec;
use lrchain::Error;
use proptest::prelude::*;

fn config(seed: u64) -> SweepConfig<f64> {
    SweepConfig {
        models: vec![
            ChainSpec::long_range(24, 1.0, 1.0),
            ChainSpec::anderson(24, 1.0),
        ],
        w_grid: vec![0.5, 5.0, 50.0],
        realizations: Realizations::Fixed(6),
        open: OpenRates {
            gamma_p: 1.0,
            gamma_d: 1.0,
            nu: 1.0,
        },
        observables: vec![
            Observable::Current,
            Observable::TInt,
            Observable::Variance,
            Observable::Gap,
        ],
        seed,
        keep_raw: true,
        window_fraction: 0.2,
        times: vec![],
        stationary_window: (500.0, 1e4),
    }
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lrchain-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn strip_timing(
    mut v: Vec<lrchain::ensemble::PointResult<f64>>,
) -> Vec<lrchain::ensemble::PointResult<f64>> {
    for p in &mut v {
        p.seconds = 0.0;
    }
    v
}

#[test]
fn seeds_are_distinct_and_stable() {
    let a = realization_seed(7, 0, 0, 0);
    assert_eq!(a, realization_seed(7, 0, 0, 0));
    let mut all = vec![
        a,
        realization_seed(7, 1, 0, 0),
        realization_seed(7, 0, 1, 0),
        realization_seed(7, 0, 0, 1),
        realization_seed(8, 0, 0, 0),
    ];
    all.sort_unstable();
    all.dedup();
    assert_eq!(all.len(), 5);
}

#[test]
fn same_seed_same_numbers() {
    let cfg = config(11);
    let a = strip_timing(run_sweep(&cfg, &RunOptions::default(), |_| {}).unwrap());
    let b = strip_timing(run_sweep(&cfg, &RunOptions::default(), |_| {}).unwrap());
    assert_eq!(a, b);
    let c = strip_timing(run_sweep(&config(12), &RunOptions::default(), |_| {}).unwrap());
    assert_ne!(
        a[0].summaries["current"].mean,
        c[0].summaries["current"].mean
    );
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = config(3);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        strip_timing(pool.install(|| run_sweep(&cfg, &RunOptions::default(), |_| {}).unwrap()))
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn resume_reproduces_a_full_run() {
    let cfg = config(5);
    let full = strip_timing(run_sweep(&cfg, &RunOptions::default(), |_| {}).unwrap());

    let dir = scratch("resume");
    let opts = RunOptions {
        out_dir: Some(dir.clone()),
        resume: false,
    };
    // interrupted while reporting the third point, before it is saved
    let mut seen = 0;
    let stopped = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        run_sweep(&cfg, &opts, |_| {
            seen += 1;
            if seen == 3 {
                panic!("interrupted");
            }
        })
    }));
    assert!(stopped.is_err());
    let cp: Checkpoint<f64> =
        serde_json::from_slice(&std::fs::read(dir.join(CHECKPOINT_FILE)).unwrap()).unwrap();
    assert_eq!(cp.points.len(), 2);
    assert_eq!(cp.config_hash, cfg.hash());

    let resumed = run_sweep(
        &cfg,
        &RunOptions {
            out_dir: Some(dir.clone()),
            resume: true,
        },
        |_| {},
    )
    .unwrap();
    assert_eq!(strip_timing(resumed), full);

    let other = config(6);
    let err = run_sweep(
        &other,
        &RunOptions {
            out_dir: Some(dir.clone()),
            resume: true,
        },
        |_| {},
    )
    .unwrap_err();
    assert!(matches!(err, Error::Checkpoint(_)));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn config_hash_tracks_content() {
    let a = config(1);
    let mut b = config(1);
    assert_eq!(a.hash(), b.hash());
    b.w_grid[1] = 5.000000000000001;
    assert_ne!(a.hash(), b.hash());
    let json = serde_json::to_string(&a).unwrap();
    let back: SweepConfig<f64> = serde_json::from_str(&json).unwrap();
    assert_eq!(back.hash(), a.hash());
}

#[test]
fn budget_sets_realizations_per_size() {
    assert_eq!(Realizations::Budget(1_000_000).count(10_000), 100);
    assert_eq!(Realizations::Budget(1_000_000).count(3_000), 333);
    assert_eq!(Realizations::Budget(10).count(10_000), 1);
    assert_eq!(Realizations::Fixed(7).count(10_000), 7);
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

fn same(a: &EnsembleSummary<f64>, b: &EnsembleSummary<f64>) -> bool {
    a.count == b.count
        && a.log_count == b.log_count
        && a.excluded == b.excluded
        && a.min == b.min
        && a.max == b.max
        && close(a.mean, b.mean)
        && close(a.rms(), b.rms())
        && (a.log_count == 0 || (close(a.mean_log, b.mean_log) && close(a.rms_log(), b.rms_log())))
}

proptest! {
    #[test]
    fn merge_matches_single_pass(xs in prop::collection::vec(-1e3f64..1e3, 1..60), cut in 0usize..60) {
        let cut = cut.min(xs.len());
        let whole = summarize(&xs).unwrap();
        let mut left = EnsembleSummary::<f64>::default();
        let mut right = EnsembleSummary::<f64>::default();
        xs[..cut].iter().for_each(|&x| left.push(x));
        xs[cut..].iter().for_each(|&x| right.push(x));
        left.merge(&right);
        prop_assert!(same(&left, &whole));
    }

    #[test]
    fn merge_is_associative(
        a in prop::collection::vec(1e-9f64..1e3, 0..20),
        b in prop::collection::vec(1e-9f64..1e3, 0..20),
        c in prop::collection::vec(1e-9f64..1e3, 0..20),
    ) {
        let s = |v: &[f64]| {
            let mut e = EnsembleSummary::<f64>::default();
            v.iter().for_each(|&x| e.push(x));
            e
        };
        let (sa, sb, sc) = (s(&a), s(&b), s(&c));
        let mut l = sa;
        l.merge(&sb);
        l.merge(&sc);
        let mut r = sb;
        r.merge(&sc);
        let mut r2 = sa;
        r2.merge(&r);
        prop_assert!(same(&l, &r2));
    }

    #[test]
    fn typical_is_geometric_mean(xs in prop::collection::vec(1e-6f64..1e6, 1..40)) {
        let s = summarize(&xs).unwrap();
        let g = (xs.iter().map(|x| x.ln()).sum::<f64>() / xs.len() as f64).exp();
        prop_assert!(close(s.typical(), g));
        prop_assert!(s.typical() <= s.mean * (1.0 + 1e-12));
    }
}
