mod common;

use std::path::Path;

use common::{config, stub};
use subtask_core::prompt::{Modality, ShotKind};
use subtask_core::{BagEncoder, ParseOutcome, SimilarityReport};
use subtask_fmclient::{CassetteMode, FmResponse, NoiseMode, NoiseSchedule, NoiseTarget, ProviderConfig};
use subtask_runner::batch::seed_dir;
use subtask_runner::stats::StatsRow;
use subtask_runner::{
    aggregate_stats, emit_report, evaluate_external, run_batch, CassetteSettings, CellStatus, EvalError, Manifest,
    ReportFormat,
};

fn read<T: serde::de::DeserializeOwned>(p: &Path) -> T {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn lift_stub(noise: NoiseMode, schedule: NoiseSchedule) -> ProviderConfig {
    stub("stub", &["Lift"], noise, schedule)
}

#[test]
fn stub_lift_five_seeds_all_valid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &["Lift"], 5, vec![lift_stub(NoiseMode::None, NoiseSchedule::All)], vec![ShotKind::OneShot], vec![Modality::TextOnly]);
    let summary = run_batch(&cfg).unwrap();
    assert!(!summary.any_cell_failed());
    let cell = &summary.manifest.cells[0];
    assert_eq!(cell.id, "Lift__stub__one_shot__text_only");
    assert_eq!(cell.completed, vec![100, 101, 102, 103, 104]);
    for s in 100..105 {
        let d = seed_dir(dir.path(), &cell.id, s);
        for f in ["prompt.json", "response.json", "outcome.json", "report.json"] {
            assert!(d.join(f).exists(), "{f}");
        }
        let r: SimilarityReport = read(&d.join("report.json"));
        assert!(r.tau_k > 0.5 && r.tau_k <= 1.0);
        assert!(dir.path().join(format!("trajectories/Lift/seed_{s}/ground_truth.json")).exists());
    }
    assert!(dir.path().join("trajectories/Lift/seed_105/trajectory.json").exists());
    let rows = aggregate_stats(dir.path()).unwrap();
    assert_eq!((rows[0].valid_n, rows[0].total_n), (5, 5));
}

#[test]
fn malformed_noise_on_two_of_five() {
    let dir = tempfile::tempdir().unwrap();
    let schedule = NoiseSchedule::Only(vec![
        NoiseTarget { env: None, seed: 101 },
        NoiseTarget { env: Some("Lift".into()), seed: 104 },
    ]);
    let cfg = config(dir.path(), &["Lift"], 5, vec![lift_stub(NoiseMode::Malformed, schedule)], vec![ShotKind::ZeroShot], vec![Modality::TextOnly]);
    run_batch(&cfg).unwrap();
    let row = &aggregate_stats(dir.path()).unwrap()[0];
    assert_eq!((row.valid_n, row.unparseable_n, row.invalid_n, row.total_n), (3, 2, 0, 5));
    let cell = "Lift__stub__zero_shot__text_only";
    let o: ParseOutcome = read(&seed_dir(dir.path(), cell, 101).join("outcome.json"));
    assert_eq!(o.label(), "unparseable");
    assert!(!seed_dir(dir.path(), cell, 101).join("report.json").exists());
}

#[test]
fn swap_order_noise_counts_as_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &["Lift"], 3, vec![lift_stub(NoiseMode::SwapOrder, NoiseSchedule::All)], vec![ShotKind::ZeroShot], vec![Modality::TextOnly]);
    run_batch(&cfg).unwrap();
    let row = &aggregate_stats(dir.path()).unwrap()[0];
    assert_eq!((row.valid_n, row.invalid_n, row.total_n), (0, 3, 3));
    assert_eq!(row.mean_tau_k, None);
}

#[test]
fn resume_runs_only_missing_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &["Lift"], 5, vec![lift_stub(NoiseMode::None, NoiseSchedule::All)], vec![ShotKind::OneShot], vec![Modality::TextOnly]);
    run_batch(&cfg).unwrap();

    // pretend the run stopped after three seeds
    let mut manifest = Manifest::load(dir.path()).unwrap();
    manifest.cells[0].completed.truncate(3);
    std::fs::write(dir.path().join("manifest.json"), serde_json::to_string(&manifest).unwrap()).unwrap();
    let cell = manifest.cells[0].id.clone();
    for s in [100, 104] {
        let p = seed_dir(dir.path(), &cell, s).join("response.json");
        let mut r: FmResponse = read(&p);
        r.raw_text = "MARKER".into();
        std::fs::write(&p, serde_json::to_string(&r).unwrap()).unwrap();
    }

    let summary = run_batch(&cfg).unwrap();
    assert_eq!(summary.manifest.cells[0].completed, vec![100, 101, 102, 103, 104]);
    let kept: FmResponse = read(&seed_dir(dir.path(), &cell, 100).join("response.json"));
    assert_eq!(kept.raw_text, "MARKER");
    let redone: FmResponse = read(&seed_dir(dir.path(), &cell, 104).join("response.json"));
    assert_ne!(redone.raw_text, "MARKER");
}

#[test]
fn changed_config_refuses_to_resume() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), &["Lift"], 2, vec![lift_stub(NoiseMode::None, NoiseSchedule::All)], vec![ShotKind::OneShot], vec![Modality::TextOnly]);
    run_batch(&cfg).unwrap();
    cfg.trajectories_per_env = 3;
    assert!(run_batch(&cfg).is_err());
}

#[test]
fn vision_on_text_only_provider_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let mut text_only = stub("text", &["Lift"], NoiseMode::None, NoiseSchedule::All);
    text_only.supports_images = false;
    let cfg = config(
        dir.path(),
        &["Lift"],
        2,
        vec![text_only, stub("vision", &["Lift"], NoiseMode::None, NoiseSchedule::All)],
        vec![ShotKind::ZeroShot],
        vec![Modality::TextOnly, Modality::VisionOnly],
    );
    let summary = run_batch(&cfg).unwrap();
    let status: Vec<_> = summary.manifest.cells.iter().map(|c| (c.id.as_str(), summary.manifest.status(c))).collect();
    assert_eq!(
        status,
        vec![
            ("Lift__text__zero_shot__text_only", CellStatus::Complete),
            ("Lift__text__zero_shot__vision_only", CellStatus::Skipped),
            ("Lift__vision__zero_shot__text_only", CellStatus::Complete),
            ("Lift__vision__zero_shot__vision_only", CellStatus::Complete),
        ]
    );
    assert!(!summary.any_cell_failed());
    assert!(!dir.path().join("cells/Lift__text__zero_shot__vision_only").exists());
    assert!(dir.path().join("trajectories/Lift/seed_100/frame_00000.png").exists());
    let rows = aggregate_stats(dir.path()).unwrap();
    assert_eq!(rows[1].total_n, 0);
    assert_eq!(rows[3].valid_n, 2);
}

#[test]
fn unreachable_provider_fails_its_cells_only() {
    let dir = tempfile::tempdir().unwrap();
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let dead = ProviderConfig::from_json(&format!(
        r#"{{"name":"dead","endpoint":"http://{addr}/","model":"m","supports_images":true,"max_prompt_tokens":1000000,
            "retry":{{"max_attempts":2,"base_backoff_secs":0}}}}"#
    ))
    .unwrap();
    let cfg = config(dir.path(), &["Lift"], 2, vec![dead, lift_stub(NoiseMode::None, NoiseSchedule::All)], vec![ShotKind::ZeroShot], vec![Modality::TextOnly]);
    let summary = run_batch(&cfg).unwrap();
    assert!(summary.any_cell_failed());
    let dead_cell = &summary.manifest.cells[0];
    assert_eq!(summary.manifest.status(dead_cell), CellStatus::Failed);
    assert_eq!(dead_cell.failed, vec![100, 101]);
    assert!(seed_dir(dir.path(), &dead_cell.id, 100).join("error.json").exists());
    assert_eq!(summary.manifest.status(&summary.manifest.cells[1]), CellStatus::Complete);
    let rows = aggregate_stats(dir.path()).unwrap();
    assert_eq!((rows[0].total_n, rows[1].total_n), (0, 2));
}

#[test]
fn stats_recompute_from_persisted_reports() {
    let dir = tempfile::tempdir().unwrap();
    let envs = ["Door", "Stack"];
    let cfg = config(
        dir.path(),
        &envs,
        4,
        vec![stub("stub", &envs, NoiseMode::ShiftBoundaries(1), NoiseSchedule::Only(vec![NoiseTarget { env: None, seed: 102 }]))],
        vec![ShotKind::OneShot, ShotKind::ZeroShot],
        vec![Modality::TextOnly],
    );
    let summary = run_batch(&cfg).unwrap();
    let rows = aggregate_stats(dir.path()).unwrap();
    assert_eq!(rows.len(), summary.manifest.cells.len());
    for (row, cell) in rows.iter().zip(&summary.manifest.cells) {
        let cell_dir = dir.path().join("cells").join(&cell.id);
        let responses = std::fs::read_dir(&cell_dir)
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().join("response.json").exists())
            .count();
        assert_eq!(responses, row.total_n);
        let mut tk = Vec::new();
        for s in &cell.completed {
            let p = seed_dir(dir.path(), &cell.id, *s).join("report.json");
            if p.exists() {
                tk.push(read::<SimilarityReport>(&p).tau_k);
            }
        }
        let n = tk.len() as f64;
        let mean = tk.iter().sum::<f64>() / n;
        let std = (tk.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        assert_eq!(row.mean_tau_k, Some(mean));
        assert_eq!(row.std_tau_k, Some(std));
        assert_eq!(row.valid_n, tk.len());
    }
}

#[test]
fn cassette_record_then_replay_gives_same_report() {
    let rec = tempfile::tempdir().unwrap();
    let cassettes = rec.path().join("cassettes");
    let mut cfg = config(&rec.path().join("run1"), &["Lift"], 3, vec![lift_stub(NoiseMode::None, NoiseSchedule::All)], vec![ShotKind::OneShot], vec![Modality::TextOnly]);
    cfg.cassette = Some(CassetteSettings { mode: CassetteMode::Record, dir: cassettes.clone() });
    run_batch(&cfg).unwrap();
    assert!(cassettes.join("stub.json").exists());

    // replay against a provider that would fail if it were ever called
    let mut replay = cfg.clone();
    replay.output_dir = rec.path().join("run2");
    replay.cassette = Some(CassetteSettings { mode: CassetteMode::Replay, dir: cassettes });
    replay.providers = vec![subtask_runner::ProviderRef::Inline(Box::new(
        ProviderConfig::from_json(r#"{"name":"stub","endpoint":"http://127.0.0.1:9/","model":"m","supports_images":true,"max_prompt_tokens":1000000}"#).unwrap(),
    ))];
    let summary = run_batch(&replay).unwrap();
    assert!(!summary.any_cell_failed());
    let a = emit_report(&aggregate_stats(&rec.path().join("run1")).unwrap(), ReportFormat::Csv);
    let b = emit_report(&aggregate_stats(&rec.path().join("run2")).unwrap(), ReportFormat::Csv);
    assert_eq!(a, b);
}

#[test]
fn evaluate_external_cases() {
    let enc = BagEncoder::default();
    let gt = common::fixture("stack_ground_truth.json");
    let r = evaluate_external(&gt, &gt, &enc).unwrap();
    assert!((r.tau_k - 1.0).abs() < 1e-9 && (r.tau_zeta - 1.0).abs() < 1e-9);

    let dir = tempfile::tempdir().unwrap();
    let far = dir.path().join("far.json");
    std::fs::write(&far, r#"[{"start":100,"end":120,"description":"Return Home"}]"#).unwrap();
    let r = evaluate_external(&gt, &far, &enc).unwrap();
    assert_eq!((r.tau_k, r.tau_zeta), (0.0, 0.0));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"[{"start":9,"end":3,"description":"x"}]"#).unwrap();
    match evaluate_external(&gt, &bad, &enc) {
        Err(EvalError::Invalid { violations, .. }) => assert_eq!(violations.len(), 1),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        evaluate_external(&gt, &dir.path().join("missing.json"), &enc),
        Err(EvalError::Load { .. })
    ));
}

#[test]
fn human_annotation_temporal_score() {
    // weights over K = 62 for each intersecting pair, IOU by interval length
    let pairs: [(f64, f64); 9] = [
        (10.0 / 24.0, 11.0),
        (12.0 / 24.0, 13.0),
        (1.0 / 14.0, 2.0),
        (11.0 / 14.0, 12.0),
        (7.0 / 16.0, 8.0),
        (5.0 / 15.0, 6.0),
        (1.0 / 17.0, 2.0),
        (1.0 / 4.0, 2.0),
        (2.0 / 3.0, 3.0),
    ];
    let num: f64 = pairs.iter().map(|(i, w)| i * w).sum();
    let den: f64 = pairs.iter().map(|(_, w)| w).sum();
    let r = evaluate_external(
        &common::fixture("stack_ground_truth.json"),
        &common::fixture("stack_human.json"),
        &BagEncoder::default(),
    )
    .unwrap();
    assert!((r.tau_k - num / den).abs() < 1e-12, "{} vs {}", r.tau_k, num / den);
}

#[test]
fn empty_cell_row() {
    let row = StatsRow::from_samples("Door", "p", ShotKind::ZeroShot, Modality::TextOnly, &[], &[], &[]);
    assert_eq!((row.valid_n, row.total_n, row.mean_tau_k, row.std_tau_k), (0, 0, None, None));
}
