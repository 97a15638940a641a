use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use meaning_core::render::parse_pgm;
use meaning_core::seed::seed_lexicon;
use meaning_core::{Axis, AxisId, Context, Factor, MembershipGrid, Region};

fn meaning(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_meaning"));
    c.args(args).env_remove("MEANING_LEXICON");
    c
}

fn run(args: &[&str]) -> Output {
    meaning(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn figures() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/figures.scn").display().to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn figure_scenario_passes_and_is_deterministic() {
    let a = run(&["run", &figures()]);
    let b = run(&["run", &figures()]);
    assert!(a.status.success(), "{}{}", stdout(&a), stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).ends_with("19 expectation(s) met, 0 failed\n"), "{}", stdout(&a));
}

#[test]
fn scenario_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = run(&["run", &write(dir.path(), "empty.scn", "")]);
    assert!(empty.status.success());
    assert_eq!(stdout(&empty), "0 expectation(s) met, 0 failed\n");

    let wrong = run(&["run", &write(dir.path(), "wrong.scn", "> walk fast\nexpect action clarification_requested\n")]);
    assert_eq!(wrong.status.code(), Some(1));
    assert!(stdout(&wrong).contains("FAIL"), "{}", stdout(&wrong));

    let broken = run(&["run", &write(dir.path(), "broken.scn", "> walk\nexpect colour blue\n")]);
    assert_eq!(broken.status.code(), Some(2));
    assert!(stderr(&broken).contains("line 2"), "{}", stderr(&broken));

    let missing = run(&["run", &dir.path().join("nope.scn").display().to_string()]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn exports_have_the_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    let two = dir.path().join("fast.pgm");
    assert!(run(&["export", "fast", &two.display().to_string()]).status.success());
    let (w, h, values) = parse_pgm(&std::fs::read_to_string(&two).unwrap()).unwrap();
    assert_eq!((w, h), (64, 64));
    // More ground in less time is faster: bottom right is brightest.
    assert_eq!(values[63 * 64 + 63], 1.0);
    assert!((values[63] - 0.5).abs() <= 0.5 / 255.0);
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(two.with_extension("json")).unwrap()).unwrap();
    assert_eq!(sidecar["axes"], serde_json::json!(["s", "t"]));
    assert_eq!(sidecar["width"], 64);

    let one = dir.path().join("very-fast.pgm");
    let o = run(&["export", "very fast", &one.display().to_string()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (w, h, values) = parse_pgm(&std::fs::read_to_string(&one).unwrap()).unwrap();
    assert_eq!((w, h), (64, 1));
    // very fast is x² over quickness.
    for (i, v) in values.iter().enumerate() {
        let x = i as f64 / 63.0;
        assert!((v - x * x).abs() <= 0.5 / 255.0 + 1e-3, "{i}: {v}");
    }

    let small = dir.path().join("small.pgm");
    assert!(run(&["--grid-resolution", "16", "export", "fast", &small.display().to_string()]).status.success());
    assert_eq!(parse_pgm(&std::fs::read_to_string(&small).unwrap()).unwrap().0, 16);
}

#[test]
fn three_axis_export_is_refused() {
    let mut lex = seed_lexicon(16).unwrap();
    lex.add_axis(Axis::basic("height", "height", "0 ground, 1 ceiling")).unwrap();
    let axes: Vec<AxisId> = ["east", "north", "height"].into_iter().map(AxisId::new).collect();
    let cube = Context::new("cube", axes.clone()).unwrap();
    lex.add_context(cube.clone()).unwrap();
    let factors = axes
        .iter()
        .map(|a| Factor::new(MembershipGrid::from_fn(vec![a.clone()], 16, |v| v[0]).unwrap(), 1.0))
        .collect();
    lex.add_region("cube", Region::new(cube, factors).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cube.json");
    lex.save(&path).unwrap();
    let out = dir.path().join("cube.pgm");
    let o = meaning(&["export", "cube", &out.display().to_string()]).env("MEANING_LEXICON", &path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("target has 3 axes"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn bad_comprehension_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", r#"{"threshold": "high"}"#);
    let o = run(&["--comprehension-config", &cfg, "run", &figures()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("threshold"), "{}", stderr(&o));
    let cfg = write(dir.path(), "cfg.json", r#"{"threshold": 0.5}"#);
    assert!(run(&["--comprehension-config", &cfg, "run", &figures()]).status.success());
}

#[test]
fn repl_session() {
    let dir = tempfile::tempdir().unwrap();
    let saved = dir.path().join("s.json");
    let script = format!(
        "walk very fast\nstand still faster\n:show quickness\n:spare\n:replay x\n:nonsense\n:save {}\n:quit\nwalk\n",
        saved.display()
    );
    let mut child = meaning(&["repl"]).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(script.as_bytes()).unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[1].starts_with("accepted walk[very(fast)]"), "{text}");
    assert!(lines[2].contains("walk quickness = "), "{text}");
    assert!(lines[3].starts_with("clarification_requested") && lines[3].contains("no_change"), "{text}");
    assert!(lines[4].starts_with("quickness"), "{text}");
    assert_eq!(lines[5].chars().count(), 64);
    assert_eq!(lines[6], "no spare contexts");
    assert!(lines[7].starts_with("error:") && lines[8].starts_with("error:"), "{text}");
    assert!(lines[9].starts_with("saved"));
    assert_eq!(lines.len(), 10, "input after :quit is ignored: {text}");
    assert!(std::fs::read_to_string(&saved).unwrap().contains("walk very fast"));
}
