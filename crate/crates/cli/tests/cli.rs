use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use actinr::video::load_frames;

const TINY: &str = r#"{"train.iterations": 15, "model.hidden": 10, "hyper.width": 12, "rff.size": 8}"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_actinr"));
    c.env_remove("ACTINR_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str]) {
    let o = run(args);
    assert!(o.status.success(), "{args:?} failed: {}", stderr(&o));
}

struct Scratch {
    dir: tempfile::TempDir,
}

impl Scratch {
    fn new(toy: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("cfg.json"), TINY).unwrap();
        let s = Self { dir };
        ok(&["toy", "--kind", toy, "--out", &s.p("toy")]);
        s
    }

    fn p(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn task(&self, cmd: &str, out: &str, extra: &[&str]) -> Output {
        let (input, cfg, out) = (self.p("toy"), self.p("cfg.json"), self.p(out));
        let mut args = vec![
            cmd, "--input", &input, "--config", &cfg, "--preset", "desk", "--out", &out,
        ];
        args.extend_from_slice(extra);
        run(&args)
    }
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn fit_writes_run_directory_and_reruns_identically() {
    let s = Scratch::new("blob");
    let o = s.task("fit", "run", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [
        "manifest.json",
        "model.actinr",
        "frames",
        "metrics.csv",
        "loss_curve.csv",
        "bias_traj.csv",
    ] {
        assert!(s.path("run").join(f).exists(), "missing {f}");
    }
    assert_eq!(csv_rows(&s.path("run/metrics.csv")).len(), 16);
    assert_eq!(fs::read_dir(s.path("run/frames")).unwrap().count(), 16);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(s.path("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["task"]["name"], "fit");
    assert_eq!(manifest["input"]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["config"]["train.iterations"], 15);
    assert_eq!(manifest["config"]["grid.patch"], 32);

    ok(&["rerun", "--manifest", &s.p("run/manifest.json"), "--out", &s.p("again")]);
    assert_eq!(
        fs::read(s.path("run/metrics.csv")).unwrap(),
        fs::read(s.path("again/metrics.csv")).unwrap()
    );
    assert_eq!(
        fs::read(s.path("run/model.actinr")).unwrap(),
        fs::read(s.path("again/model.actinr")).unwrap()
    );
}

#[test]
fn thread_count_does_not_change_results() {
    let s = Scratch::new("blob");
    let one = s.task("fit", "one", &["--threads", "1"]);
    assert!(one.status.success(), "{}", stderr(&one));
    let two = bin()
        .args([
            "fit",
            "--input",
            &s.p("toy"),
            "--config",
            &s.p("cfg.json"),
            "--preset",
            "desk",
        ])
        .args(["--out", &s.p("two")])
        .env("ACTINR_THREADS", "3")
        .output()
        .unwrap();
    assert!(two.status.success(), "{}", stderr(&two));
    assert_eq!(
        fs::read(s.path("one/metrics.csv")).unwrap(),
        fs::read(s.path("two/metrics.csv")).unwrap()
    );
}

#[test]
fn input_directory_is_left_untouched() {
    let s = Scratch::new("blob");
    let before: Vec<_> = fs::read_dir(s.path("toy"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    let bytes: Vec<_> = before.iter().map(|p| fs::read(p).unwrap()).collect();
    assert!(s.task("fit", "run", &[]).status.success());
    let after: Vec<_> = fs::read_dir(s.path("toy"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(before, after);
    assert_eq!(bytes, before.iter().map(|p| fs::read(p).unwrap()).collect::<Vec<_>>());

    let inside = s.p("toy/out");
    let o = run(&["fit", "--input", &s.p("toy"), "--out", &inside]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one_and_name_the_problem() {
    let s = Scratch::new("blob");
    let missing = s.p("no_such_dir");
    let o = run(&["fit", "--input", &missing, "--out", &s.p("x")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no_such_dir"), "{}", stderr(&o));
    assert_eq!(stderr(&o).trim().lines().count(), 1);

    fs::write(s.path("bad.json"), r#"{"train.iterations": 3, "model.widht": 4}"#).unwrap();
    let o = run(&[
        "fit",
        "--input",
        &s.p("toy"),
        "--config",
        &s.p("bad.json"),
        "--out",
        &s.p("x"),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("model.widht"));

    let o = run(&["ablate", "--study", "colour", "--out", &s.p("x")]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(run(&["fit"]).status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_two() {
    let s = Scratch::new("blob");
    assert!(s.task("fit", "run", &[]).status.success());
    fs::write(s.path("toy/00000.png"), b"not a png").unwrap();
    let o = run(&["rerun", "--manifest", &s.p("run/manifest.json"), "--out", &s.p("again")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("changed"));
}

#[test]
fn manifest_precedes_training() {
    let s = Scratch::new("blob");
    // Stride 8 with 8-frame groups leaves one training frame per group.
    let o = s.task("interp", "run", &["--stride", "8"]);
    assert!(!o.status.success());
    assert!(s.path("run/manifest.json").exists());
    assert!(!s.path("run/metrics.csv").exists());
}

#[test]
fn interp_splits_metrics() {
    let s = Scratch::new("blob");
    let o = s.task("interp", "run", &["--stride", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&s.path("run/metrics.csv"));
    let train: Vec<usize> = rows
        .iter()
        .filter(|r| r[1] == "train")
        .map(|r| r[0].parse().unwrap())
        .collect();
    let test: Vec<usize> = rows
        .iter()
        .filter(|r| r[1] == "test")
        .map(|r| r[0].parse().unwrap())
        .collect();
    assert_eq!(train, (0..16).step_by(2).collect::<Vec<_>>());
    assert_eq!(test, (1..16).step_by(2).collect::<Vec<_>>());
}

#[test]
fn superres_writes_low_resolution_input() {
    let s = Scratch::new("blob");
    let o = s.task("superres", "run", &["--spatial", "2", "--temporal", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let low = load_frames(&s.path("run/input"), 1).unwrap();
    assert_eq!(low.dims(), (8, 32, 32, 1));
    let out = load_frames(&s.path("run/frames"), 1).unwrap();
    assert_eq!(out.dims(), (16, 64, 64, 1));
}

#[test]
fn denoise_records_noisy_input_quality() {
    let s = Scratch::new("blob");
    let o = s.task("denoise", "run", &["--alpha", "30", "--read", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_dir(s.path("run/noisy")).unwrap().count(), 16);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(s.path("run/summary.json")).unwrap()).unwrap();
    let input = summary["input_psnr_db"].as_f64().unwrap();
    assert!((13.0..=20.0).contains(&input), "{input}");
}

#[test]
fn inpaint_masks_have_five_boxes() {
    let s = Scratch::new("texture");
    let o = s.task("inpaint", "run", &["--box", "12"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let masks = load_frames(&s.path("run/masks"), 1).unwrap();
    assert_eq!(masks.frames(), 16);
    let frame = masks.frame(0);
    assert_eq!(frame.iter().filter(|&&v| v == 0.0).count(), 5 * 144);
    for (cy, cx) in [(32, 32), (16, 16), (16, 48), (48, 16), (48, 48)] {
        for y in cy - 6..cy + 6 {
            for x in cx - 6..cx + 6 {
                assert_eq!(frame[y * 64 + x], 0.0);
            }
        }
        assert_eq!(frame[(cy - 7) * 64 + cx], 1.0);
        assert_eq!(frame[(cy + 6) * 64 + cx], 1.0);
    }
    let manifest = fs::read_to_string(s.path("run/manifest.json")).unwrap();
    assert!(manifest.contains("\"activation.omega\": 50.0"));
}

#[test]
fn ablation_tables() {
    let s = Scratch::new("blob");
    let cfg = s.p("cfg.json");
    for (study, settings) in [
        ("activation", vec!["wire", "gauss", "sine"]),
        ("interp-strategy", vec!["oracle", "linear", "bias-inr"]),
        ("params", vec!["20", "30", "40", "50", "60"]),
    ] {
        let out = s.p(study);
        let o = run(&[
            "ablate", "--study", study, "--config", &cfg, "--preset", "desk", "--out", &out,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let text = fs::read_to_string(s.path(study).join("metrics.csv")).unwrap();
        assert!(text.starts_with("setting,train_psnr_db,test_psnr_db,parameters\n"));
        let rows = csv_rows(&s.path(study).join("metrics.csv"));
        assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), settings);
        let held_out = study != "params";
        assert!(rows.iter().all(|r| r[2].is_empty() != held_out), "{study}: {rows:?}");
    }
}

#[test]
fn filter_bias_window_rules() {
    let s = Scratch::new("bar");
    assert!(s.task("fit", "run", &[]).status.success());
    let bundle = s.p("run/model.actinr");
    let o = run(&["filter-bias", "--bundle", &bundle, "--window", "4", "--out", &s.p("f4")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("odd"));

    ok(&["filter-bias", "--bundle", &bundle, "--window", "1", "--out", &s.p("f1")]);
    for t in 0..16 {
        let name = format!("{t:05}.png");
        assert_eq!(
            fs::read(s.path("f1/frames").join(&name)).unwrap(),
            fs::read(s.path("f1/frames_before").join(&name)).unwrap()
        );
    }
    let rows = csv_rows(&s.path("f1/metrics.csv"));
    assert_eq!(rows[0][2..], rows[1][2..]);

    ok(&["filter-bias", "--bundle", &bundle, "--window", "3", "--out", &s.p("f3")]);
    ok(&["rerun", "--manifest", &s.p("f3/manifest.json"), "--out", &s.p("f3b")]);
    assert_eq!(
        fs::read(s.path("f3/metrics.csv")).unwrap(),
        fs::read(s.path("f3b/metrics.csv")).unwrap()
    );
}
