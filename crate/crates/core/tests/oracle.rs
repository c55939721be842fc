mod common;

use common::{run_battery, single_stage, two_stage, TwoStageCase, POLICY_VARIANTS};
use dispatch_sim::{run, validate_run, MigrationMode, PolicyKind, SystemConfig, Task, Workload};
use proptest::prelude::*;

#[test]
fn exhaustive_tiny_instances_match_direct_replay() {
    let report = run_battery(5);
    assert!(report.instances > 6000);
    assert!(
        report.mismatches.is_empty(),
        "{} of {} runs disagree:\n{}",
        report.mismatches.len(),
        report.runs,
        report.mismatches.join("\n")
    );
}

fn workload(arrivals: &[f64], demands: &[f64]) -> Workload {
    let tasks = arrivals
        .iter()
        .zip(demands)
        .enumerate()
        .map(|(i, (&a, &d))| Task::new(format!("j{}", i / 3), format!("t{i}"), a, d))
        .collect();
    Workload::new(tasks).unwrap()
}

/// Arrivals (sorted) and demands on a millisecond grid.
fn instance(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_len).prop_flat_map(|k| {
        (
            proptest::collection::vec(0u32..5_000, k),
            proptest::collection::vec(1u32..4_000, k),
        )
            .prop_map(|(mut a, d)| {
                a.sort_unstable();
                (
                    a.into_iter().map(|x| x as f64 / 1000.0).collect(),
                    d.into_iter().map(|x| x as f64 / 1000.0).collect(),
                )
            })
    })
}

fn completions(w: &Workload, cfg: &SystemConfig, seed: u64) -> Vec<(u64, usize, Option<usize>)> {
    let out = run(w, cfg, seed).unwrap();
    assert!(validate_run(&out, w).is_clean());
    let mut v = vec![(0, 0, None); w.len()];
    for r in &out.records {
        v[r.task] = (r.completion.0, r.stage1_server.unwrap(), r.stage2_server);
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn single_stage_matches_replay(
        (arr, dem) in instance(40),
        n in 1usize..6,
        variant in 0usize..4,
        speed in prop_oneof![Just(1.0), Just(0.25), Just(4.0)],
        seed in any::<u64>(),
    ) {
        let (p, fb) = POLICY_VARIANTS[variant];
        let w = workload(&arr, &dem);
        let cfg = SystemConfig::single_stage(n, speed, p).with_jiq_fallback(fb);
        let got = completions(&w, &cfg, seed);
        let exp = single_stage(&arr, &dem, n, speed, p, fb, seed);
        for (g, e) in got.iter().zip(&exp) {
            prop_assert_eq!(g.0, e.completion);
            prop_assert_eq!(g.1, e.stage1_server);
        }
    }

    #[test]
    fn two_stage_matches_replay(
        (arr, dem) in instance(40),
        n1 in 1usize..4,
        n2 in 1usize..4,
        v1 in 0usize..4,
        v2 in 0usize..4,
        theta_ms in 1u32..3_000,
        restart in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let (p1, fb) = POLICY_VARIANTS[v1];
        let (p2, fb2) = POLICY_VARIANTS[v2];
        let fb = if p1 == PolicyKind::Jiq { fb } else { fb2 };
        let mode = if restart { MigrationMode::Restart } else { MigrationMode::Resume };
        let theta_s = theta_ms as f64 / 1000.0;
        let w = workload(&arr, &dem);
        let mut cfg = SystemConfig::two_stage(n1 + n2, 1.0, theta_s).with_jiq_fallback(fb);
        cfg.n_stage1 = Some(n1);
        cfg.n_stage2 = Some(n2);
        cfg.stage1_policy = p1;
        cfg.stage2_policy = p2;
        cfg.migration = mode;
        let got = completions(&w, &cfg, seed);
        let exp = two_stage(&TwoStageCase {
            arrivals: &arr,
            demands: &dem,
            n1,
            n2,
            speed: 1.0,
            theta_s,
            p1,
            p2,
            fallback: fb,
            mode,
            seed,
        });
        for (g, e) in got.iter().zip(&exp) {
            prop_assert_eq!(g.0, e.completion);
            prop_assert_eq!(g.1, e.stage1_server);
            prop_assert_eq!(g.2, e.stage2_server);
        }
    }
}
