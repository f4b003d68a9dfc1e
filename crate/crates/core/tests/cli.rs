use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use tempfile::TempDir;

use locomotion::cli::{
    cmd_gen_dataset, cmd_report, cmd_run, cmd_train, execute, load_dataset, load_input_log, save_model, Cli, CliError,
};
use locomotion::config::ScenarioConfig;
use locomotion::gestures::InterfaceId;
use locomotion::sim::record::TrialRecord;
use locomotion::sim::{replay, run_trial, SimError, TrialSpec};

fn short_pursuit() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::pursuit();
    cfg.pursuit.keyframe_count = 3;
    cfg.pursuit.keyframe_interval_s = 2.0;
    cfg.pursuit.duration_s = 5.0;
    cfg
}

fn short_course() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::waypoints();
    cfg.waypoints.gate_count = 3;
    cfg
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

/// Scenario files, a trained model and a manifest covering every interface
/// with three seeds each.
fn batch_fixture(dir: &Path) -> PathBuf {
    write(&dir.join("chase.toml"), &short_pursuit().to_toml());
    write(&dir.join("gates.toml"), &short_course().to_toml());
    let cfg = ScenarioConfig::default();
    let ds = cmd_gen_dataset(&cfg, 20, 0.005, 1, &dir.join("data")).unwrap();
    let data = load_dataset(&ds.log, &ds.labels).unwrap();
    save_model(&cmd_train(&cfg, &data, 1.0, 1).unwrap().model, &dir.join("model.svm")).unwrap();
    let mut manifest = String::from("model = \"model.svm\"\n");
    for (i, iface) in ["finger-distance", "finger-number", "finger-tapping", "gamepad"].iter().enumerate() {
        let scen = if i % 2 == 0 { "chase.toml" } else { "gates.toml" };
        manifest.push_str(&format!(
            "\n[[run]]\nscenario = \"{scen}\"\ninterface = \"{iface}\"\npilot = \"default\"\nseed = 10\nrepeat = 3\n"
        ));
    }
    let path = dir.join("batch.toml");
    write(&path, &manifest);
    path
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn gen_dataset_is_balanced_and_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = ScenarioConfig::default();
    let a = cmd_gen_dataset(&cfg, 7, 0.005, 3, &tmp.path().join("a")).unwrap();
    assert_eq!(a.class_counts, [7; 6]);
    assert_eq!(fs::read_to_string(&a.log).unwrap().lines().count(), 42);
    assert_eq!(fs::read_to_string(&a.labels).unwrap().lines().count(), 43);
    let b = cmd_gen_dataset(&cfg, 7, 0.005, 3, &tmp.path().join("b")).unwrap();
    assert_eq!(fs::read(&a.log).unwrap(), fs::read(&b.log).unwrap());
    assert_eq!(fs::read(&a.labels).unwrap(), fs::read(&b.labels).unwrap());

    let err = cmd_gen_dataset(&cfg, 0, 0.005, 3, &tmp.path().join("c")).unwrap_err();
    assert!(matches!(err, CliError::Validation(_)));
    assert_eq!(err.exit_code(), 1);
    assert!(!tmp.path().join("c").exists());
}

#[test]
fn train_split_edges() {
    let tmp = TempDir::new().unwrap();
    let cfg = ScenarioConfig::default();
    let ds = cmd_gen_dataset(&cfg, 40, 0.005, 2, tmp.path()).unwrap();
    let data = load_dataset(&ds.log, &ds.labels).unwrap();
    let all = cmd_train(&cfg, &data, 1.0, 0).unwrap();
    assert_eq!((all.n_train, all.n_test, all.accuracy), (240, 0, None));
    let half = cmd_train(&cfg, &data, 0.5, 0).unwrap();
    assert_eq!(half.n_train + half.n_test, 240);
    assert!(half.n_train > 80 && half.n_test > 80);
    assert!(half.accuracy.unwrap() >= 0.95, "{:?}", half.accuracy);
    for bad in [0.0, -0.5, 1.5, f64::NAN] {
        assert!(matches!(cmd_train(&cfg, &data, bad, 0), Err(CliError::Validation(_))));
    }
}

#[test]
fn corrupt_dataset_line_is_reported_by_number() {
    let tmp = TempDir::new().unwrap();
    let ds = cmd_gen_dataset(&ScenarioConfig::default(), 2, 0.005, 2, tmp.path()).unwrap();
    let text = fs::read_to_string(&ds.log).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[4] = "{\"timestamp\": 0.04, \"left\": ".into();
    write(&ds.log, &(lines.join("\n") + "\n"));
    let err = load_dataset(&ds.log, &ds.labels).unwrap_err();
    assert!(err.to_string().contains("line 5"), "{err}");
    assert_eq!(err.exit_code(), 2);

    let ds = cmd_gen_dataset(&ScenarioConfig::default(), 2, 0.005, 2, tmp.path()).unwrap();
    write(&ds.labels, "record,label\n0,1\n1,9\n");
    let err = load_dataset(&ds.log, &ds.labels).unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
}

#[test]
fn batch_runs_every_trial_and_reruns_identically() {
    let tmp = TempDir::new().unwrap();
    let manifest = batch_fixture(tmp.path());
    let first = cmd_run(&manifest, Some(&tmp.path().join("out1")), 0, None, false).unwrap();
    assert_eq!(first.rows.len(), 12);
    assert_eq!(fs::read_dir(first.dir.join("records")).unwrap().count(), 12);
    let metrics = fs::read_to_string(first.dir.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 13);
    // 2 scenario kinds x 2 interfaces each, five metrics per group
    assert_eq!(fs::read_to_string(first.dir.join("aggregate.csv")).unwrap().lines().count(), 21);

    let second = cmd_run(&manifest, Some(&tmp.path().join("out2")), 0, Some(2), false).unwrap();
    assert_eq!(tree(&first.dir), tree(&second.dir));

    let shifted = cmd_run(&manifest, Some(&tmp.path().join("out3")), 1, None, false).unwrap();
    assert!(shifted.rows.iter().all(|r| r.seed >= 11));
    assert_ne!(tree(&first.dir), tree(&shifted.dir));

    let reported = cmd_report(&[first.dir.join("records")]).unwrap();
    assert_eq!(reported, first.rows);
}

#[test]
fn bad_manifest_fails_before_running_anything() {
    let tmp = TempDir::new().unwrap();
    write(&tmp.path().join("chase.toml"), &short_pursuit().to_toml());
    let manifest = tmp.path().join("broken.toml");
    write(
        &manifest,
        "model = \"missing.svm\"\n\n[[run]]\nscenario = \"chase.toml\"\ninterface = \"finger-distance\"\nseed = 1\n\n\
         [[run]]\nscenario = \"chase.toml\"\ninterface = \"finger-number\"\nseed = 1\n\n\
         [[run]]\nscenario = \"nowhere.toml\"\ninterface = \"gamepad\"\nseed = 1\n",
    );
    let out = tmp.path().join("out");
    let err = cmd_run(&manifest, Some(&out), 0, None, false).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, CliError::Validation(_)), "{msg}");
    assert!(msg.contains("run[1]") && msg.contains("missing.svm"), "{msg}");
    assert!(msg.contains("run[2]"), "{msg}");
    assert!(!out.exists());
}

#[test]
fn saved_inputs_replay_to_the_same_record() {
    let tmp = TempDir::new().unwrap();
    let manifest = batch_fixture(tmp.path());
    let run = cmd_run(&manifest, Some(&tmp.path().join("out")), 0, None, true).unwrap();
    let cfg = short_pursuit();
    for (stem, iface) in [
        ("0000-chase-finger-distance-default-s10", InterfaceId::FingerDistance),
        ("0009-gates-gamepad-default-s10", InterfaceId::Gamepad),
    ] {
        let cfg = if iface == InterfaceId::Gamepad { short_course() } else { cfg.clone() };
        let frames = load_input_log(&run.dir.join("inputs").join(format!("{stem}.jsonl")), iface).unwrap();
        let original = fs::read_to_string(run.dir.join("records").join(format!("{stem}.csv"))).unwrap();
        let original = TrialRecord::parse_csv(original.as_bytes()).unwrap();
        let spec = TrialSpec::new(&cfg, iface, "default", 10).unwrap().named(&original.scenario);
        let r = replay(&cfg, &spec, None, &frames).unwrap();
        assert!(!r.truncated);
        assert_eq!(r.record.to_csv(), original.to_csv());

        let short = replay(&cfg, &spec, None, &frames[..50]).unwrap();
        assert!(short.truncated);
        assert_eq!(short.record.rows.len(), 51);
        assert!(matches!(replay(&cfg, &spec, None, &[]), Err(SimError::EmptyLog)));
    }
}

#[test]
fn subcommands_drive_the_same_functions() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let cli = |args: &[&str]| Cli::try_parse_from(std::iter::once("locomotion").chain(args.iter().copied())).unwrap();

    execute(&cli(&["gen-dataset", "--per-class", "4", "--seed", "5", "--out", dir])).unwrap();
    let log = tmp.path().join("dataset.jsonl");
    assert_eq!(fs::read_to_string(&log).unwrap().lines().count(), 24);
    execute(&cli(&["train", log.to_str().unwrap(), "--split", "1.0", "--out", dir])).unwrap();
    assert!(tmp.path().join("model.svm").is_file());

    let scen = tmp.path().join("chase.toml");
    write(&scen, &short_pursuit().to_toml());
    let spec = TrialSpec::new(&short_pursuit(), InterfaceId::Gamepad, "default", 0).unwrap().named("chase");
    let run = run_trial(&short_pursuit(), &spec, None, true).unwrap();
    let frames: Vec<_> = run
        .inputs
        .iter()
        .map(|f| match f {
            locomotion::gestures::InputFrame::Gamepad(g) => *g,
            _ => unreachable!(),
        })
        .collect();
    let pad_log = tmp.path().join("pad.jsonl");
    let mut buf = Vec::new();
    locomotion::handmodel::write_gamepad_log(&frames, &mut buf).unwrap();
    fs::write(&pad_log, buf).unwrap();
    execute(&cli(&[
        "replay",
        pad_log.to_str().unwrap(),
        "--interface",
        "gamepad",
        "--config",
        scen.to_str().unwrap(),
        "--out",
        dir,
    ]))
    .unwrap();
    let replayed = fs::read_to_string(tmp.path().join("pad-replay.csv")).unwrap();
    assert_eq!(replayed, run.record.to_csv());

    let report_dir = tmp.path().join("report");
    execute(&cli(&[
        "report",
        tmp.path().join("pad-replay.csv").to_str().unwrap(),
        "--out",
        report_dir.to_str().unwrap(),
    ]))
    .unwrap();
    assert!(report_dir.join("aggregate.csv").is_file());

    let empty = tmp.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let err = execute(&cli(&["replay", empty.to_str().unwrap(), "--interface", "gamepad"])).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(Cli::try_parse_from(["locomotion", "fly"]).is_err());
}
