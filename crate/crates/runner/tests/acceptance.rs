//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

#[path = "../../core/tests/support/naive.rs"]
mod naive;
mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subtask_core::decomposition::DecompositionFile;
use subtask_core::prompt::{build_prompt, Modality, PromptTemplate, Shot, ShotKind};
use subtask_core::similarity::{interval_weight, iou};
use subtask_core::simgen::{builtin_env, generate_trajectory, BUILTIN_ENV_NAMES};
use subtask_core::{
    extract_decomposition, similarity, BagEncoder, ParseOutcome, SubTask, SubTaskDecomposition, ViolationKind,
};
use subtask_fmclient::{stub_provider, Completer, FailingTransport, FmClient, NoiseMode, NoiseSchedule, NoiseTarget, Price, StubScript};
use subtask_runner::{aggregate_stats, emit_report, run_batch, ReportFormat};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn dec(items: &[(u64, u64, &str)]) -> SubTaskDecomposition {
    SubTaskDecomposition::ground_truth(items.iter().map(|&(s, e, z)| SubTask::new(s, e, z)).collect())
}

fn items(d: &SubTaskDecomposition) -> Vec<naive::Item> {
    d.iter().map(|s| (s.start, s.end, s.description.clone())).collect()
}

const WORDS: [&str; 6] = ["move", "grasp", "cube", "a", "b", "home"];

fn random_description(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..=3);
    (0..n).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

/// Valid but otherwise arbitrary: overlaps and gaps allowed.
fn random_decomposition(rng: &mut ChaCha8Rng) -> SubTaskDecomposition {
    let n = rng.random_range(1..=8);
    let mut starts: Vec<u64> = (0..n).map(|_| rng.random_range(0..120)).collect();
    starts.sort();
    dec_owned(starts.into_iter().map(|s| (s, s + rng.random_range(0..40), random_description(rng))).collect())
}

/// Non-overlapping sub-tasks in order, gaps allowed.
fn random_partition(rng: &mut ChaCha8Rng) -> SubTaskDecomposition {
    let n = rng.random_range(1..=8);
    let mut at = rng.random_range(0..5);
    let mut out = Vec::new();
    for _ in 0..n {
        let len = rng.random_range(0..20);
        out.push((at, at + len, random_description(rng)));
        at += len + 1 + rng.random_range(0..3);
    }
    dec_owned(out)
}

fn dec_owned(items: Vec<(u64, u64, String)>) -> SubTaskDecomposition {
    SubTaskDecomposition::ground_truth(items.into_iter().map(|(s, e, z)| SubTask::new(s, e, z)).collect())
}

fn ac1() -> Outcome {
    let a = SubTask::new(40, 48, "Align Cube A with Cube B");
    let b = SubTask::new(40, 54, "robot arm lifting cube A");
    let i = iou(&a, &b).map_err(|e| e.to_string())?;
    let w = interval_weight(&a, &b, 62, 62).map_err(|e| e.to_string())?;
    check((i - 0.5714).abs() <= 0.0005, format!("iou {i}"))?;
    check((w - 0.1452).abs() <= 0.0005, format!("weight {w}"))?;
    Ok(format!("iou = {i:.4}, interval_weight = {w:.4}"))
}

fn ac2() -> Outcome {
    let enc = BagEncoder::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = random_partition(&mut rng);
        d.validate().map_err(|v| format!("{v:?}"))?;
        let r = similarity(&d, &d, &enc).map_err(|e| e.to_string())?;
        worst = worst.max((r.tau_k - 1.0).abs()).max((r.tau_zeta - 1.0).abs());
    }
    check(worst <= 1e-9, format!("max deviation {worst:e}"))?;
    Ok(format!("100 decompositions, max |tau - 1| = {worst:.1e}"))
}

fn random_pairs() -> Vec<(SubTaskDecomposition, SubTaskDecomposition)> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    (0..1000)
        .map(|_| (random_decomposition(&mut rng), random_decomposition(&mut rng)))
        .collect()
}

fn ac3() -> Outcome {
    let enc = BagEncoder::default();
    let mut worst = 0.0f64;
    for (a, b) in random_pairs() {
        let ab = similarity(&a, &b, &enc).map_err(|e| e.to_string())?;
        let ba = similarity(&b, &a, &enc).map_err(|e| e.to_string())?;
        worst = worst.max((ab.tau_k - ba.tau_k).abs()).max((ab.tau_zeta - ba.tau_zeta).abs());
    }
    check(worst < 1e-12, format!("max asymmetry {worst:e}"))?;
    Ok(format!("1000 pairs, max asymmetry = {worst:.1e}"))
}

fn ac4() -> Outcome {
    let enc = BagEncoder::default();
    let (mut diff_n, mut diff_k) = (0, 0);
    for (a, b) in random_pairs() {
        let r = similarity(&a, &b, &enc).map_err(|e| e.to_string())?;
        check((0.0..=1.0).contains(&r.tau_k), format!("tau_k {}", r.tau_k))?;
        check((-1.0..=1.0).contains(&r.tau_zeta), format!("tau_zeta {}", r.tau_zeta))?;
        diff_n += usize::from(a.len() != b.len());
        diff_k += usize::from(a.steps() != b.steps());
    }
    check(diff_n > 0 && diff_k > 0, "sample lacks mismatched N or K")?;
    Ok(format!("1000 pairs in range ({diff_n} with N differing, {diff_k} with K differing)"))
}

/// Every tiling of [0, k] into at most three sub-tasks, boundaries as in
/// consecutive inclusive intervals.
fn tilings(k: u64) -> Vec<Vec<(u64, u64)>> {
    let mut out = vec![vec![(0, k)]];
    for e1 in 0..k {
        out.push(vec![(0, e1), (e1 + 1, k)]);
        for e2 in e1 + 1..k {
            out.push(vec![(0, e1), (e1 + 1, e2), (e2 + 1, k)]);
        }
    }
    out
}

fn labelled(shape: &[(u64, u64)], labels: &[&str]) -> SubTaskDecomposition {
    dec_owned(shape.iter().zip(labels).map(|(&(s, e), z)| (s, e, z.to_string())).collect())
}

fn ac5() -> Outcome {
    let enc = BagEncoder::default();
    check(enc.bucket("a") != enc.bucket("b"), "tokens collide")?;
    let descs = ["a", "b", "a b", "a a", "b b"];
    let mut worst = 0.0f64;
    let mut count = 0u64;
    let mut compare = |s: &SubTaskDecomposition, p: &SubTaskDecomposition| -> Result<(), String> {
        let r = similarity(s, p, &enc).map_err(|e| e.to_string())?;
        let (tk, tz) = naive::naive_similarity(&items(s), &items(p));
        worst = worst.max((r.tau_k - tk).abs()).max((r.tau_zeta - tz).abs());
        count += 1;
        Ok(())
    };
    let shapes: Vec<Vec<(u64, u64)>> = (1..=12).flat_map(tilings).collect();
    // every pair of shapes up to K = 12, with descriptions cycling
    for (i, s) in shapes.iter().enumerate() {
        for (j, p) in shapes.iter().enumerate() {
            let ls: Vec<&str> = (0..3).map(|t| descs[(i + t) % descs.len()]).collect();
            let lp: Vec<&str> = (0..3).map(|t| descs[(j * 2 + t) % descs.len()]).collect();
            compare(&labelled(s, &ls), &labelled(p, &lp))?;
        }
    }
    // every labelling for K <= 3
    let small: Vec<SubTaskDecomposition> = (1..=3)
        .flat_map(tilings)
        .flat_map(|shape| {
            let n = shape.len();
            (0..descs.len().pow(n as u32)).map(move |code| {
                let ls: Vec<&str> = (0..n).map(|t| descs[code / descs.len().pow(t as u32) % descs.len()]).collect();
                labelled(&shape, &ls)
            }).collect::<Vec<_>>()
        })
        .collect();
    for s in &small {
        for p in &small {
            compare(s, p)?;
        }
    }
    // overlapping and gapped decompositions, K <= 6, N <= 2
    let intervals: Vec<(u64, u64)> = (0..=6).flat_map(|s| (s..=6).map(move |e| (s, e))).collect();
    let mut loose = Vec::new();
    for (i, &a) in intervals.iter().enumerate() {
        loose.push(labelled(&[a], &[descs[i % 5]]));
        for &b in intervals.iter().filter(|b| b.0 >= a.0) {
            loose.push(labelled(&[a, b], &[descs[i % 5], descs[(i + 1) % 5]]));
        }
    }
    for s in &loose {
        for p in loose.iter().step_by(7) {
            compare(s, p)?;
        }
    }
    check(worst < 1e-12, format!("max diff {worst:e}"))?;
    Ok(format!("{count} pairs, max |engine - naive| = {worst:.1e}"))
}

fn ac6() -> Outcome {
    let s = dec(&[(0, 10, "a"), (10, 20, "b")]);
    let p = dec(&[(0, 20, "a")]);
    // pairs: iou 10/20 each, weights 11/20 each; cosines 1 and 0
    let (tk, tz) = ((0.5 * 0.55 + 0.5 * 0.55) / 1.1, (1.0 * 0.55 + 0.0 * 0.55) / 1.1);
    let r = similarity(&s, &p, &BagEncoder::default()).map_err(|e| e.to_string())?;
    check((r.tau_k - tk).abs() <= 1e-9 && (r.tau_k - 0.5).abs() <= 1e-9, format!("tau_k {}", r.tau_k))?;
    check((r.tau_zeta - tz).abs() <= 1e-9 && (r.tau_zeta - 0.5).abs() <= 1e-9, format!("tau_zeta {}", r.tau_zeta))?;
    Ok(format!("tau_k = {:.9}, tau_zeta = {:.9}", r.tau_k, r.tau_zeta))
}

fn ac7() -> Outcome {
    let started = Instant::now();
    let mut total = 0;
    for name in BUILTIN_ENV_NAMES {
        let env = builtin_env(name).ok_or("missing env")?;
        for seed in 0..50 {
            let (data, gt) = generate_trajectory(&env, seed, false).map_err(|e| e.to_string())?;
            gt.validate().map_err(|v| format!("{name}/{seed}: {v:?}"))?;
            check(gt.tiles_range(), format!("{name}/{seed}: does not tile"))?;
            check(gt.steps() == data.last_step(), format!("{name}/{seed}: K mismatch"))?;
            if name == "Lift" {
                let d: Vec<&str> = gt.iter().map(|s| s.description.as_str()).collect();
                check(d == ["Move to cube", "Grasp Cube", "Lift Cube"], format!("Lift descriptors {d:?}"))?;
            }
            total += 1;
        }
    }
    let elapsed = started.elapsed();
    check(elapsed < Duration::from_secs(10), format!("took {elapsed:?}"))?;
    Ok(format!("{total} trajectories tile [0, K] in {:.2}s", elapsed.as_secs_f64()))
}

fn has_violation(o: &ParseOutcome, kind: ViolationKind) -> bool {
    matches!(o, ParseOutcome::Invalid { violations } if violations.iter().any(|v| v.kind == kind))
}

fn ac8() -> Outcome {
    let start_after_end = "Here you go:\n```json\n[{\"start\": 0, \"end\": 12, \"description\": \"Move to cube\"}, {\"start\": 20, \"end\": 13, \"description\": \"Grasp Cube\"}]\n```";
    let out_of_order = "```json\n[{\"start\": 14, \"end\": 30, \"description\": \"Lift Cube\"}, {\"start\": 0, \"end\": 13, \"description\": \"Move to cube\"}]\n```";
    let none = "I am unable to determine the sub-tasks from the provided data.";
    check(has_violation(&extract_decomposition(start_after_end), ViolationKind::StartAfterEnd), "start-after-end")?;
    check(has_violation(&extract_decomposition(out_of_order), ViolationKind::OutOfOrder), "out-of-order")?;
    check(matches!(extract_decomposition(none), ParseOutcome::Unparseable { .. }), "no decomposition")?;
    const JSONISH: &[u8] = b"[]{}\",:0123456789-.e ";
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut crashed = 0;
    for _ in 0..10_000 {
        let len = rng.random_range(0..512);
        let bytes: Vec<u8> = (0..len)
            .map(|_| {
                // bias toward JSON punctuation so the array paths get exercised
                if rng.random_bool(0.5) {
                    JSONISH[rng.random_range(0..JSONISH.len())]
                } else {
                    rng.random()
                }
            })
            .collect();
        let text = String::from_utf8_lossy(&bytes).into_owned();
        crashed += usize::from(std::panic::catch_unwind(|| extract_decomposition(&text)).is_err());
    }
    let fuzz: Result<(), ()> = if crashed == 0 { Ok(()) } else { Err(()) };
    check(fuzz.is_ok(), "parser panicked while fuzzing")?;
    Ok("3 invalidity fixtures classified; 10000 fuzz inputs without a crash".into())
}

fn ac9() -> Outcome {
    let started = Instant::now();
    let envs = BUILTIN_ENV_NAMES;
    // 2 (env, seed) targets x 2 contexts = 4 of 40 responses
    let schedule = NoiseSchedule::Only(vec![
        NoiseTarget { env: Some("Door".into()), seed: 100 },
        NoiseTarget { env: Some("Stack".into()), seed: 103 },
    ]);
    let provider = common::stub("stub", &envs, NoiseMode::Malformed, schedule);
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut csvs = Vec::new();
    let mut rows = Vec::new();
    for run in ["first", "second"] {
        let cfg = common::config(
            &root.path().join(run),
            &envs,
            5,
            vec![provider.clone()],
            vec![ShotKind::OneShot, ShotKind::ZeroShot],
            vec![Modality::TextOnly],
        );
        run_batch(&cfg).map_err(|e| e.to_string())?;
        rows = aggregate_stats(&cfg.output_dir).map_err(|e| e.to_string())?;
        csvs.push(emit_report(&rows, ReportFormat::Csv));
    }
    check(csvs[0] == csvs[1], "CSV reports differ between runs")?;
    for r in &rows {
        let injected = match (r.env.as_str(), r.context) {
            ("Door" | "Stack", _) => 1,
            _ => 0,
        };
        check(
            r.total_n == 5 && r.unparseable_n == injected && r.valid_n == 5 - injected,
            format!("{} {:?}: valid {} of {}", r.env, r.context, r.valid_n, r.total_n),
        )?;
    }
    let valid: usize = rows.iter().map(|r| r.valid_n).sum();
    let total: usize = rows.iter().map(|r| r.total_n).sum();
    check((valid, total) == (36, 40), format!("valid {valid} of {total}"))?;
    let elapsed = started.elapsed();
    check(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!(
        "identical CSV ({} bytes) on two runs; valid {valid}/{total} with 4 malformed injected; {:.2}s",
        csvs[0].len(),
        elapsed.as_secs_f64()
    ))
}

fn table_fixture(name: &str) -> Result<SubTaskDecomposition, String> {
    DecompositionFile::load(&common::fixture(name))
        .map(DecompositionFile::into_decomposition)
        .map_err(|e| e.to_string())
}

fn ac10() -> Outcome {
    let gt = table_fixture("stack_ground_truth.json")?;
    let one_shot = std::fs::read_to_string(common::fixture("stack_one_shot.json")).map_err(|e| e.to_string())?;
    let script = StubScript {
        responses: [("Stack".to_string(), one_shot)].into(),
        ..Default::default()
    };
    let client = FmClient::new(stub_provider("table-one", script), std::sync::Arc::new(FailingTransport::default()), Price::default())
        .map_err(|e| e.to_string())?;
    let (data, _) = generate_trajectory(&builtin_env("Stack").ok_or("Stack")?, 0, false).map_err(|e| e.to_string())?;
    let prompt = build_prompt(&PromptTemplate::builtin().context(Shot::ZeroShot), &data, Modality::TextOnly)
        .map_err(|e| e.to_string())?;
    let response = client.complete(&prompt).map_err(|e| e.to_string())?;
    let outcome = extract_decomposition(&response.raw_text);
    let pred = outcome.decomposition().ok_or("stub answer did not parse")?;
    let enc = BagEncoder::default();
    let r = similarity(&gt, pred, &enc).map_err(|e| e.to_string())?;
    check((r.tau_k - 0.87).abs() <= 0.01, format!("tau_k {}", r.tau_k))?;
    let mut note = format!("one-shot tau_k = {:.4} (tau_zeta under bag encoder = {:.4}, not gated)", r.tau_k, r.tau_zeta);
    for (label, file) in [("zero-shot", "stack_zero_shot.json"), ("human", "stack_human.json")] {
        let other = similarity(&gt, &table_fixture(file)?, &enc).map_err(|e| e.to_string())?;
        note.push_str(&format!("; {label} tau_k = {:.4}", other.tau_k));
    }
    Ok(note)
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("worked example", ac1),
        ("identity", ac2),
        ("symmetry", ac3),
        ("ranges", ac4),
        ("naive oracle", ac5),
        ("derived fixture", ac6),
        ("generator validity", ac7),
        ("parser rules", ac8),
        ("end-to-end determinism", ac9),
        ("table one-shot column", ac10),
    ];
    let mut stderr = std::io::stderr();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        let line = match &result {
            Ok(detail) => format!("AC{:<2} PASS  {name}: {detail} [{secs:.2}s]", i + 1),
            Err(why) => {
                failed += 1;
                format!("AC{:<2} FAIL  {name}: {why} [{secs:.2}s]", i + 1)
            }
        };
        let _ = writeln!(stderr, "{line}");
    }
    let _ = writeln!(stderr, "acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
