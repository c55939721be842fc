use std::ffi::{CStr, CString};
use std::ptr;

use dispatch_sim_ffi::*;

const SPEC: &str = "total_tasks = 2000\nseed = 5\n\
    [arrival]\nkind = \"poisson\"\nrate = 5.0\n\
    [size]\nkind = \"bounded_pareto\"\nalpha = 1.5\nlower = 1.0\nupper = 10000.0\n\
    [tasks_per_job]\nkind = \"geometric\"\nmean = 5.0\n";

fn last_error() -> String {
    let p = ds_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn generate() -> *mut DsWorkload {
    let spec = CString::new(SPEC).unwrap();
    let mut w = ptr::null_mut();
    assert_eq!(unsafe { ds_workload_generate(spec.as_ptr(), &mut w) }, DsStatus::Ok);
    assert!(!w.is_null());
    w
}

fn speed_for(w: *const DsWorkload, n: usize, rho0: f64) -> f64 {
    let mut stats = DsWorkloadStats::default();
    let mut speed = 0.0;
    unsafe {
        assert_eq!(ds_workload_stats(w, &mut stats), DsStatus::Ok);
        assert_eq!(ds_derive_service_rate(&stats, n, rho0, &mut speed), DsStatus::Ok);
    }
    speed
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(ds_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn single_stage_round_trip_matches_core() {
    let w = generate();
    unsafe {
        assert_eq!(ds_workload_task_count(w), 2000);
        let mut stats = DsWorkloadStats::default();
        assert_eq!(ds_workload_stats(w, &mut stats), DsStatus::Ok);
        assert_eq!(stats.task_count, 2000);
        assert_eq!(ds_workload_job_count(w), stats.job_count);

        let speed = speed_for(w, 8, 0.7);
        let mut cfg = std::mem::zeroed::<DsSystemConfig>();
        assert_eq!(ds_system_config_single(8, speed, DS_POLICY_LWL, &mut cfg), DsStatus::Ok);
        let mut run = ptr::null_mut();
        assert_eq!(ds_run(w, &cfg, 3, &mut run), DsStatus::Ok);
        assert_eq!(ds_run_violation_count(run), 0);
        assert_eq!(ds_run_record_count(run), 2000);

        let mut m = DsMetricsSummary::default();
        assert_eq!(ds_run_summary(run, &mut m), DsStatus::Ok);

        // same run through the Rust API
        let core_w = dispatch_sim::generate_synthetic(&dispatch_sim::SyntheticSpec::from_toml(SPEC).unwrap()).unwrap();
        let core_cfg = dispatch_sim::SystemConfig::single_stage(8, speed, dispatch_sim::PolicyKind::Lwl);
        let out = dispatch_sim::run(&core_w, &core_cfg, 3).unwrap();
        let expect = dispatch_sim::aggregate(&out.records, &core_w, speed).unwrap();
        assert_eq!(m.mrt_s.to_bits(), expect.mrt.to_bits());
        assert_eq!(m.mjs.to_bits(), expect.mjs.to_bits());
        assert_eq!(m.job_count, expect.job_count);
        assert!(m.min_s >= 1.0);

        let mut rec = DsCompletionRecord::default();
        assert_eq!(ds_run_record(run, 0, &mut rec), DsStatus::Ok);
        assert_eq!(rec.completion_ns, out.records[0].completion.0);
        assert_eq!(rec.stage1_server, out.records[0].stage1_server.unwrap() as i64);
        assert_eq!(rec.stage2_server, -1);
        assert!(!rec.migrated);

        assert_eq!(ds_run_record(run, 2000, &mut rec), DsStatus::InvalidArgument);
        assert!(last_error().contains("out of range"));

        // the run outlives the workload handle
        ds_workload_free(w);
        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("r.csv").to_str().unwrap()).unwrap();
        assert_eq!(ds_run_write_records(run, path.as_ptr()), DsStatus::Ok);
        let text = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
        assert_eq!(text.lines().count(), 2001);
        ds_run_free(run);
    }
}

#[test]
fn two_stage_run_migrates_and_conserves_work() {
    let w = generate();
    unsafe {
        let speed = speed_for(w, 10, 0.6);
        let mut cfg = std::mem::zeroed::<DsSystemConfig>();
        assert_eq!(ds_system_config_two_stage(10, speed, 2.0, &mut cfg), DsStatus::Ok);
        assert_eq!(cfg.shape, DS_SHAPE_TWO_STAGE);
        assert_eq!(cfg.migration, DS_MIGRATION_RESUME);
        let theta_ns = 2_000_000_000u64;
        for migration in [DS_MIGRATION_RESUME, DS_MIGRATION_RESTART] {
            cfg.migration = migration;
            let mut run = ptr::null_mut();
            assert_eq!(ds_run(w, &cfg, 1, &mut run), DsStatus::Ok);
            assert_eq!(ds_run_violation_count(run), 0);
            let mut migrated = 0;
            for i in 0..ds_run_record_count(run) {
                let mut r = DsCompletionRecord::default();
                assert_eq!(ds_run_record(run, i, &mut r), DsStatus::Ok);
                if r.migrated {
                    migrated += 1;
                    assert_eq!(r.stage1_service_ns, theta_ns);
                    assert!(r.stage2_server >= 0);
                    assert!(r.completion_ns - r.arrival_ns >= r.service_received_ns);
                }
            }
            assert!(migrated > 0);
            ds_run_free(run);
        }
        ds_workload_free(w);
    }
}

#[test]
fn trace_loading_and_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("t.csv");
    std::fs::write(
        &good,
        "job_id,task_id,arrival_s,cpu_gncu_s\nj1,t1,0.0,1.0\nj1,t2,2.0,3.0\nj2,t1,1.0,2.0\n",
    )
    .unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "job_id,task_id,arrival_s,cpu_gncu_s\nj1,t1,0.0,-1\n").unwrap();
    let c = |p: &std::path::Path| CString::new(p.to_str().unwrap()).unwrap();
    unsafe {
        let mut w = ptr::null_mut();
        assert_eq!(ds_workload_load_trace(c(&good).as_ptr(), 1.0, &mut w), DsStatus::Ok);
        assert_eq!(ds_workload_task_count(w), 3);
        assert_eq!(ds_workload_job_count(w), 2);

        let mut cfg = std::mem::zeroed::<DsSystemConfig>();
        assert_eq!(ds_system_config_single(1, 1.0, DS_POLICY_RR, &mut cfg), DsStatus::Ok);
        let mut run = ptr::null_mut();
        assert_eq!(ds_run(w, &cfg, 0, &mut run), DsStatus::Ok);
        let done: Vec<u64> = (0..3)
            .map(|i| {
                let mut r = DsCompletionRecord::default();
                ds_run_record(run, i, &mut r);
                r.completion_ns
            })
            .collect();
        assert_eq!(done, vec![1_000_000_000, 3_000_000_000, 6_000_000_000]);
        ds_run_free(run);

        // bad enum values and shapes
        cfg.single_policy = 9;
        assert_eq!(ds_run(w, &cfg, 0, &mut run), DsStatus::InvalidArgument);
        assert!(run.is_null());
        assert!(last_error().contains("unknown policy 9"));
        assert_eq!(ds_system_config_two_stage(3, 1.0, 1.0, &mut cfg), DsStatus::Ok);
        assert_eq!(ds_run(w, &cfg, 0, &mut run), DsStatus::Config);
        ds_workload_free(w);

        let mut w = ptr::null_mut();
        let missing = c(&dir.path().join("nope.csv"));
        assert_eq!(ds_workload_load_trace(missing.as_ptr(), 1.0, &mut w), DsStatus::Io);
        assert!(w.is_null());
        assert_eq!(ds_workload_load_trace(c(&bad).as_ptr(), 1.0, &mut w), DsStatus::Parse);
        assert!(last_error().contains("non-positive demand at row 2"));

        let bad_spec = CString::new("total_tasks = 0").unwrap();
        assert_eq!(ds_workload_generate(bad_spec.as_ptr(), &mut w), DsStatus::Parse);

        let mut stats = DsWorkloadStats {
            task_count: 10,
            job_count: 5,
            span_s: 1.0,
            lambda: 10.0,
            mean_cpu_demand: 1.0,
        };
        let mut speed = 0.0;
        assert_eq!(ds_derive_service_rate(&stats, 4, 1.5, &mut speed), DsStatus::Config);
        stats.lambda = 0.0;
        assert_ne!(ds_derive_service_rate(&stats, 4, 0.5, &mut speed), DsStatus::Ok);
    }
}

#[test]
fn null_pointers_are_rejected() {
    unsafe {
        let mut w = ptr::null_mut();
        assert_eq!(ds_workload_load_trace(ptr::null(), 1.0, &mut w), DsStatus::NullPointer);
        assert!(last_error().contains("path is null"));
        assert_eq!(ds_workload_generate(ptr::null(), &mut w), DsStatus::NullPointer);
        let spec = CString::new(SPEC).unwrap();
        assert_eq!(
            ds_workload_generate(spec.as_ptr(), ptr::null_mut()),
            DsStatus::NullPointer
        );
        assert_eq!(ds_workload_task_count(ptr::null()), 0);
        assert_eq!(ds_run_record_count(ptr::null()), 0);
        let mut run = ptr::null_mut();
        let mut cfg = std::mem::zeroed::<DsSystemConfig>();
        ds_system_config_single(2, 1.0, DS_POLICY_JIQ, &mut cfg);
        assert_eq!(ds_run(ptr::null(), &cfg, 0, &mut run), DsStatus::NullPointer);
        let mut m = DsMetricsSummary::default();
        assert_eq!(ds_run_summary(ptr::null(), &mut m), DsStatus::NullPointer);
        assert_eq!(
            ds_system_config_single(2, 1.0, DS_POLICY_JIQ, ptr::null_mut()),
            DsStatus::NullPointer
        );
        ds_workload_free(ptr::null_mut());
        ds_run_free(ptr::null_mut());
    }
}

#[test]
fn errors_are_per_thread() {
    unsafe {
        let mut w = ptr::null_mut();
        assert_eq!(ds_workload_generate(ptr::null(), &mut w), DsStatus::NullPointer);
    }
    std::thread::spawn(|| assert!(ds_last_error().is_null()))
        .join()
        .unwrap();
    assert!(!ds_last_error().is_null());
}
