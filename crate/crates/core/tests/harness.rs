use std::time::Instant;

use sboxlab::harness::*;
use sboxlab::sa::Temperature;
use sboxlab::SBox;

fn quick(engine: Engine) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(engine);
    cfg.n = 4;
    cfg.runs = 3;
    cfg.base_seed = 40;
    cfg.sa.t0 = Temperature::Fixed(20.0);
    cfg.sa.max_inner_loops = 200;
    cfg.sa.max_outer_loops = 10;
    cfg.sa.max_frozen_outer_loops = 5;
    cfg.memetic.popsize = 12;
    cfg.memetic.generations = 3;
    cfg.aco.ants = 6;
    cfg.aco.iterations = 4;
    cfg
}

#[test]
fn single_run_summary_matches_record() {
    for engine in [Engine::Sa, Engine::Memetic, Engine::Aco] {
        let mut cfg = quick(engine);
        cfg.runs = 1;
        let out = run_batch(&cfg).unwrap();
        let r = &out.records[0];
        assert!(r.profile_matches());
        assert_eq!(out.summary.cells.len(), 1);
        assert_eq!(out.summary.cells[0].percent, 100.0);
        assert_eq!((out.summary.best_du, out.summary.best_nl), (r.profile.du, r.profile.nl));
        assert_eq!(out.summary.avg_df_best_du, r.profile.df as f64);
        assert_eq!(out.summary.avg_nf_best_nl, r.profile.nf as f64);
    }
}

#[test]
fn batches_are_deterministic() {
    for engine in [Engine::Sa, Engine::Memetic, Engine::Aco] {
        let cfg = quick(engine);
        let a = run_batch(&cfg).unwrap();
        let mut cfg2 = cfg.clone();
        cfg2.jobs = 1;
        let b = run_batch(&cfg2).unwrap();
        assert_eq!(a.summary, b.summary);
        let boxes = |o: &BatchOutcome| o.records.iter().map(|r| (r.seed, r.final_box.clone())).collect::<Vec<_>>();
        assert_eq!(boxes(&a), boxes(&b));
        assert_eq!(a.records.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![40, 41, 42]);
    }
}

#[test]
fn persisted_records_reaggregate() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick(Engine::Memetic);
    cfg.output = Some(dir.path().to_path_buf());
    let out = run_batch(&cfg).unwrap();
    let loaded = load_records(dir.path()).unwrap();
    assert_eq!(loaded.len(), 3);
    for (a, b) in loaded.iter().zip(&out.records) {
        assert_eq!(a.final_box, b.final_box);
        assert!(a.profile_matches());
        assert_eq!(SBox::parse(&a.final_box.to_text()).unwrap(), a.final_box);
    }
    let again = BatchSummary::from_records(cfg.engine, cfg.n, &loaded).unwrap();
    assert_eq!(again, out.summary);
    let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(csv, out.summary.to_csv());
}

#[test]
fn constrained_runs_respect_filter() {
    for engine in [Engine::Sa, Engine::Memetic, Engine::Aco] {
        let mut cfg = quick(engine);
        cfg.constrain_powers = true;
        let f = cfg.filter().unwrap();
        for r in run_batch(&cfg).unwrap().records {
            assert!(f.admits(&r.final_box), "{engine}: {:?}", r.final_box);
        }
    }
}

#[test]
fn io_failure_is_reported() {
    let file = tempfile::NamedTempFile::new().unwrap();
    let mut cfg = quick(Engine::Aco);
    cfg.output = Some(file.path().join("sub"));
    assert!(run_batch(&cfg).is_err());
}

#[test]
fn verify_suite_passes_and_detects_corruption() {
    let t = Instant::now();
    let good = verify_suite(VerifyOptions::default());
    assert!(good.all_passed(), "{:?}", good.checks);
    assert!(t.elapsed().as_secs() < 300);
    let bad = verify_suite(VerifyOptions { corrupt_ddt_cache: true });
    let inc = bad.checks.iter().find(|c| c.name == "incremental-delta").unwrap();
    assert!(!inc.passed);
    assert!(!bad.all_passed());
}
