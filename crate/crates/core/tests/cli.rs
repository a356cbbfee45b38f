use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nese(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nese"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const APPEAR_SCENE: &str = r#"
width = 60
height = 60
length = 16
background_level = 64
noise_amplitude = 0

[[event]]
kind = "object_enter"
rect = { x = 12, y = 15, w = 30, h = 27 }
level_delta = 128
frames = [5, 16]
"#;

const STATIC_SCENE: &str = r#"
width = 30
height = 30
length = 10
background_level = 100
noise_amplitude = 0
"#;

fn run_config(scene: &str, extra: &str) -> String {
    format!(
        "seed = 0\noutput_dir = \"out\"\n{extra}\n[engine]\nbox_size = 3\nprecision = 2\nthreshold_pixels = 1\ntime_tau = 4\n\n[input]\nscene = \"{scene}\"\n"
    )
}

fn setup(files: &[(&str, &str)]) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in files {
        fs::write(dir.path().join(name), text).unwrap();
    }
    dir
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/summary.json")).unwrap()).unwrap()
}

#[test]
fn static_scene_has_no_events() {
    let dir = setup(&[
        ("scene.toml", STATIC_SCENE),
        ("run.toml", &run_config("scene.toml", "")),
    ]);
    let o = nese(&["run", "run.toml"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(dir.path());
    assert_eq!(s["event_frames"], Value::Array(vec![]));
    assert_eq!(s["sensor_mode_entries"], 0);
    assert_eq!(s["frames"], 10);
    assert_eq!(
        fs::read_dir(dir.path().join("out/masks")).unwrap().count(),
        10
    );
    let csv = fs::read_to_string(dir.path().join("out/energy.csv")).unwrap();
    assert!(csv.starts_with("frame_index,category,joules\n"));
    assert_eq!(csv.lines().count(), 1 + 10 * 6);
}

#[test]
fn appearing_object_triggers_one_update() {
    let dir = setup(&[
        ("scene.toml", APPEAR_SCENE),
        ("run.toml", &run_config("scene.toml", "")),
    ]);
    let o = nese(&["run", "run.toml"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(dir.path());
    assert_eq!(s["event_frames"], serde_json::json!([5, 6, 7, 8]));
    assert_eq!(s["background_updates"], serde_json::json!([9]));
    assert_eq!(s["energy"]["detection_power_extrapolated"], false);
    assert!(s["score"]["true_pos"].as_u64().unwrap() > 0);
    assert!(dir.path().join("out/background.nvm").is_file());
}

#[test]
fn harvester_section_reports_cycles() {
    let extra = "[harvester]\ncapacity = 0.03\npower_on_threshold = 0.029\n\n[harvester.periodic]\njoules = 0.03\nperiod = 2\non_steps = 1\n";
    let dir = setup(&[
        ("scene.toml", APPEAR_SCENE),
        ("run.toml", &run_config("scene.toml", extra)),
    ]);
    let o = nese(&["run", "run.toml"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(dir.path());
    assert_eq!(s["intermittent"]["power_cycles"], 8);
    assert_eq!(s["frames_processed"], 8);
}

#[test]
fn missing_input_dir_exits_2_naming_the_path() {
    let cfg = "output_dir = \"out\"\n[input]\nframes_dir = \"no_such_frames\"\n";
    let dir = setup(&[("run.toml", cfg)]);
    let o = nese(&["run", "run.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no_such_frames"));
}

#[test]
fn bad_config_and_usage_exit_2() {
    let dir = setup(&[
        ("scene.toml", STATIC_SCENE),
        (
            "strict.toml",
            &run_config("scene.toml", "strict_mode = true"),
        ),
        (
            "even.toml",
            &run_config("scene.toml", "").replace("box_size = 3", "box_size = 4"),
        ),
    ]);
    let strict = nese(&["run", "strict.toml"], dir.path());
    assert_eq!(strict.status.code(), Some(2));
    assert!(stderr(&strict).contains("600x600"));
    assert_eq!(
        nese(&["run", "even.toml"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(nese(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(nese(&["run"], dir.path()).status.code(), Some(2));
}

#[test]
fn frames_dir_input_with_truth() {
    let dir = setup(&[("scene.toml", APPEAR_SCENE)]);
    assert!(nese(&["gen", "scene.toml", "data"], dir.path())
        .status
        .success());
    let cfg = "output_dir = \"out\"\n[engine]\ntime_tau = 100\n[input]\nframes_dir = \"data/frames\"\ntruth_dir = \"data/truth\"\n";
    fs::write(dir.path().join("run.toml"), cfg).unwrap();
    let o = nese(&["run", "run.toml"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(dir.path());
    assert_eq!(s["frames"], 16);
    assert!(s["score"]["f1"].as_f64().unwrap() > 0.9);
}

#[test]
fn sweep_reports_are_complete_and_reproducible() {
    let dir = setup(&[
        ("scene.toml", APPEAR_SCENE),
        ("all.toml", &run_config("scene.toml", "")),
        (
            "box3.toml",
            &format!(
                "{}\n[sweep]\nbox_sizes = [3]\n",
                run_config("scene.toml", "")
            ),
        ),
    ]);
    let o = nese(&["sweep", "all.toml"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read(dir.path().join("out/sweep.csv")).unwrap();
    let json = fs::read(dir.path().join("out/sweep.json")).unwrap();
    assert_eq!(String::from_utf8_lossy(&csv).lines().count(), 13);

    let single = Command::new(env!("CARGO_BIN_EXE_nese"))
        .args(["sweep", "all.toml"])
        .env("NESE_THREADS", "1")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(single.status.success());
    assert_eq!(fs::read(dir.path().join("out/sweep.csv")).unwrap(), csv);
    assert_eq!(fs::read(dir.path().join("out/sweep.json")).unwrap(), json);

    assert!(nese(&["sweep", "box3.toml"], dir.path()).status.success());
    let rows: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/sweep.json")).unwrap())
            .unwrap();
    let rows = rows["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r["box_size"] == 3));
    assert_eq!(rows[0]["extrapolated"], true);
    assert_eq!(rows[1]["extrapolated"], false);
}

#[test]
fn gen_writes_identical_sequences() {
    let spec = APPEAR_SCENE
        .replace("length = 16", "length = 20")
        .replace("noise_amplitude = 0", "noise_amplitude = 2");
    let dir = setup(&[("scene.toml", &spec)]);
    for out in ["a", "b"] {
        let o = nese(&["gen", "scene.toml", out, "--seed", "42"], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for sub in ["frames", "truth"] {
        let mut names: Vec<_> = fs::read_dir(dir.path().join("a").join(sub))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert_eq!(names.len(), 20);
        for n in names {
            let a = fs::read(dir.path().join("a").join(sub).join(&n)).unwrap();
            let b = fs::read(dir.path().join("b").join(sub).join(&n)).unwrap();
            assert_eq!(a, b);
        }
    }
    assert!(
        nese(&["gen", "scene.toml", "c", "--seed", "43"], dir.path())
            .status
            .success()
    );
    assert_ne!(
        fs::read(dir.path().join("a/frames/frame_0003.pgm")).unwrap(),
        fs::read(dir.path().join("c/frames/frame_0003.pgm")).unwrap()
    );
}

#[test]
fn gen_rejects_bad_rect() {
    let bad = APPEAR_SCENE.replace("x = 12", "x = 50");
    let dir = setup(&[("scene.toml", &bad)]);
    let o = nese(&["gen", "scene.toml", "out"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("rect"), "{}", stderr(&o));
}

#[test]
fn tables_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = nese(&["tables"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("7396"));
    assert!(text.contains("80000"));
    assert!(text.contains("842.0"));
    assert!(text.contains("1852.4"));
    let extrapolated = text.lines().filter(|l| l.contains("extrapolated")).count();
    assert_eq!(extrapolated, 6);
}
