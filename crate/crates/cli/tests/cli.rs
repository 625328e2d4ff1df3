//! End-to-end tests driving the `navmetrics` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_navmetrics"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary spawns")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().expect("utf-8 path").to_string()
}

fn make_world(dir: &TempDir, extra: &[&str]) -> String {
    let world = path_str(dir, "world.json");
    let mut args = vec!["gen", "world", "--seed", "0", "--out", &world];
    args.extend_from_slice(extra);
    run_ok(&args);
    world
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["score", "--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["score"]).status.code(), Some(1));
    assert_eq!(run(&["--no-such-flag"]).status.code(), Some(1));
    assert_eq!(run(&["gen", "world", "--out", "/tmp/x.json"]).status.code(), Some(1));
}

#[test]
fn missing_world_file_exits_one_with_path() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "score",
        "--world",
        "/nonexistent/world.json",
        "--episodes",
        "/nonexistent/eps.jsonl",
        "--out",
        &path_str(&dir, "r.csv"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("/nonexistent/world.json"));
}

#[test]
fn malformed_jsonl_names_the_line() {
    let dir = TempDir::new().unwrap();
    let world = make_world(&dir, &[]);
    let eps = dir.path().join("eps.jsonl");
    let mut lines: Vec<String> = (0..6)
        .map(|_| r#"{"reference":[0,1],"query":[0,1]}"#.to_string())
        .collect();
    lines.push("{broken".to_string());
    std::fs::write(&eps, lines.join("\n")).unwrap();

    let out = run(&[
        "score",
        "--world",
        &world,
        "--episodes",
        eps.to_str().unwrap(),
        "--out",
        &path_str(&dir, "r.csv"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 7"), "stderr: {}", stderr(&out));
}

#[test]
fn identity_episodes_score_perfect_fidelity() {
    let dir = TempDir::new().unwrap();
    let world = make_world(&dir, &[]);
    let eps = dir.path().join("eps.jsonl");
    std::fs::write(
        &eps,
        concat!(
            "{\"reference\":[0,1,2,3],\"query\":[0,1,2,3]}\n",
            "{\"reference\":[10,25,40],\"query\":[10,25,40]}\n"
        ),
    )
    .unwrap();
    let report = path_str(&dir, "r.json");
    run_ok(&["score", "--world", &world, "--episodes", eps.to_str().unwrap(), "--out", &report]);

    let body: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    for row in body["episodes"].as_array().unwrap() {
        assert_eq!(row["status"], "ok");
        for metric in ["sr", "sed", "ndtw", "sdtw"] {
            assert_eq!(row["metrics"][metric], 1.0, "{metric} in {row}");
        }
        assert_eq!(row["metrics"]["ne"], 0.0);
        assert_eq!(row["metrics"]["md"], 0.0);
    }
}

#[test]
fn invalid_episode_marks_row_and_run_continues() {
    let dir = TempDir::new().unwrap();
    let world = make_world(&dir, &[]);
    let eps = dir.path().join("eps.jsonl");
    std::fs::write(
        &eps,
        concat!(
            "{\"reference\":[0,1],\"query\":[0,1]}\n",
            "{\"reference\":[0,999999],\"query\":[0,1]}\n",
            "{\"reference\":[2,3],\"query\":[2,3]}\n"
        ),
    )
    .unwrap();
    let report = path_str(&dir, "r.csv");
    let out = run_ok(&[
        "score", "--world", &world, "--episodes", eps.to_str().unwrap(), "--out", &report,
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("1 invalid"));

    let text = std::fs::read_to_string(&report).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("0,ok,"));
    assert!(rows[2].starts_with("1,invalid:"));
    assert!(rows[2].contains("999999"));
    assert!(rows[3].starts_with("2,ok,"));
}

#[test]
fn csv_and_json_reports_hold_identical_values() {
    let dir = TempDir::new().unwrap();
    let world = make_world(&dir, &[]);
    let eps = path_str(&dir, "eps.jsonl");
    run_ok(&[
        "gen", "paths", "--world", &world, "--seed", "5", "--count", "6", "--out", &eps,
    ]);
    let csv = path_str(&dir, "r.csv");
    let json = path_str(&dir, "r.json");
    run_ok(&["score", "--world", &world, "--episodes", &eps, "--out", &csv]);
    run_ok(&["score", "--world", &world, "--episodes", &eps, "--out", &json]);

    let csv_text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = csv_text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let body: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let episodes = body["episodes"].as_array().unwrap();

    let mut compared = 0;
    for (line, row) in lines.zip(episodes) {
        let fields: Vec<&str> = line.split(',').collect();
        for (name, field) in header.iter().zip(&fields).skip(2) {
            if *name == "flags" {
                continue;
            }
            let from_json = row["metrics"][*name].as_f64().unwrap();
            // The CSV prints the same shortest round-trip form the JSON
            // uses, so the texts agree, not just the parsed values.
            assert_eq!(*field, serde_json::to_string(&from_json).unwrap(), "{name}");
            compared += 1;
        }
    }
    assert!(compared >= 6 * 14, "compared only {compared} cells");
}

#[test]
fn zeta_zero_world_is_the_exact_lattice() {
    let dir = TempDir::new().unwrap();
    let world = make_world(&dir, &["--zeta", "0"]);
    let text = std::fs::read_to_string(&world).unwrap();
    let body: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(body["nodes"].as_array().unwrap().len(), 225);
    assert_eq!(body["edges"].as_array().unwrap().len(), 420);
}

#[test]
fn generation_reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let w1 = path_str(&dir, "w1.json");
    let w2 = path_str(&dir, "w2.json");
    run_ok(&["gen", "world", "--seed", "42", "--out", &w1]);
    run_ok(&["gen", "world", "--seed", "42", "--out", &w2]);
    assert_eq!(std::fs::read(&w1).unwrap(), std::fs::read(&w2).unwrap());

    let e1 = path_str(&dir, "e1.jsonl");
    let e2 = path_str(&dir, "e2.jsonl");
    for out in [&e1, &e2] {
        run_ok(&["gen", "paths", "--world", &w1, "--seed", "9", "--count", "8", "--out", out]);
    }
    assert_eq!(std::fs::read(&e1).unwrap(), std::fs::read(&e2).unwrap());
}

#[test]
fn success_constrained_queries_stop_near_the_goal() {
    let dir = TempDir::new().unwrap();
    let world = make_world(&dir, &[]);
    let eps = path_str(&dir, "eps.jsonl");
    run_ok(&[
        "gen",
        "paths",
        "--world",
        &world,
        "--seed",
        "3",
        "--count",
        "12",
        "--success-constrained",
        "--out",
        &eps,
    ]);

    let report = path_str(&dir, "r.json");
    run_ok(&["score", "--world", &world, "--episodes", &eps, "--out", &report]);
    let body: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    for row in body["episodes"].as_array().unwrap() {
        assert_eq!(row["metrics"]["sr"], 1.0, "query missed the goal: {row}");
    }
}

#[test]
fn study_replay_reproduces_recorded_counts() {
    let dir = TempDir::new().unwrap();
    let counts = dir.path().join("counts.json");
    std::fs::write(
        &counts,
        r#"[{"rival":"pl","positives":242,"negatives":17},
            {"rival":"cls","positives":162,"negatives":46}]"#,
    )
    .unwrap();
    let one = path_str(&dir, "one.csv");
    let two = path_str(&dir, "two.csv");
    run_ok(&["study", "--replay", counts.to_str().unwrap(), "--out", &one]);
    run_ok(&["study", "--replay", counts.to_str().unwrap(), "--sided", "two", "--out", &two]);

    let one_text = std::fs::read_to_string(&one).unwrap();
    let two_text = std::fs::read_to_string(&two).unwrap();
    assert_eq!(one_text.lines().next().unwrap(), ",pl,cls");
    assert!(one_text.lines().nth(1).unwrap().starts_with("+/-,242/17,162/46"));
    // One-sided p halves the two-sided one: 2.0e-52 -> 4.1e-52 and
    // 1.2e-16 -> 2.4e-16 at two significant digits.
    assert_eq!(one_text.lines().nth(2).unwrap(), "sign test,2.0e-52,1.2e-16");
    assert_eq!(two_text.lines().nth(2).unwrap(), "sign test,4.1e-52,2.4e-16");
}

#[test]
fn study_live_favours_the_gold_metric() {
    let dir = TempDir::new().unwrap();
    let world = make_world(&dir, &[]);
    let sets = path_str(&dir, "sets.json");
    run_ok(&[
        "gen", "paths", "--world", &world, "--seed", "7", "--count", "30", "--queries", "5",
        "--ranking-sets", "--out", &sets,
    ]);
    let out = path_str(&dir, "study.json");
    run_ok(&[
        "study", "--world", &world, "--sets", &sets, "--champion", "ndtw", "--rivals",
        "pl,ne,sr", "--out", &out,
    ]);
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for row in rows.as_array().unwrap() {
        // Gold was built from ndtw, so no rival may out-rank the champion.
        let pos = row["positives"].as_u64().unwrap();
        let neg = row["negatives"].as_u64().unwrap();
        assert!(neg == 0 && pos > 0, "unexpected counts in {row}");
    }
}

#[test]
fn policy_runs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let world = make_world(&dir, &[]);
    let s1 = path_str(&dir, "s1.json");
    let s2 = path_str(&dir, "s2.json");
    for out in [&s1, &s2] {
        run_ok(&[
            "policy", "--world", &world, "--episodes", "10", "--seed", "4", "--reward",
            "random", "--out", out,
        ]);
    }
    assert_eq!(std::fs::read(&s1).unwrap(), std::fs::read(&s2).unwrap());
}

#[test]
fn render_writes_sorted_gallery_with_captions() {
    let dir = TempDir::new().unwrap();
    let world = make_world(&dir, &[]);
    let eps = dir.path().join("eps.jsonl");
    // One identity episode and one sloppy one.
    std::fs::write(
        &eps,
        concat!(
            "{\"reference\":[0,1,2],\"query\":[0,16,2]}\n",
            "{\"reference\":[0,1,2],\"query\":[0,1,2]}\n"
        ),
    )
    .unwrap();
    let gallery = dir.path().join("gallery");
    run_ok(&[
        "render",
        "--world",
        &world,
        "--episodes",
        eps.to_str().unwrap(),
        "--out",
        gallery.to_str().unwrap(),
    ]);

    let svg1 = std::fs::read_to_string(gallery.join("episode_0001.svg")).unwrap();
    assert!(svg1.contains("nDTW = 1.000"), "identity caption missing");
    assert!(svg1.contains("#1f77b4") && svg1.contains("#ff7f0e"));

    let index: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(gallery.join("index.json")).unwrap())
            .unwrap();
    let order: Vec<u64> =
        index.as_array().unwrap().iter().map(|e| e["episode"].as_u64().unwrap()).collect();
    assert_eq!(order, vec![1, 0], "identity episode must rank first");
    assert!(gallery.join("index.html").exists());
    assert!(gallery.join("manifest.json").exists());
}

#[test]
fn render_reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let world = make_world(&dir, &[]);
    let eps = path_str(&dir, "eps.jsonl");
    run_ok(&["gen", "paths", "--world", &world, "--seed", "2", "--count", "3", "--out", &eps]);
    let g1 = dir.path().join("g1");
    let g2 = dir.path().join("g2");
    for g in [&g1, &g2] {
        run_ok(&[
            "render", "--world", &world, "--episodes", &eps, "--out", g.to_str().unwrap(),
        ]);
    }
    for name in ["episode_0000.svg", "episode_0001.svg", "episode_0002.svg", "index.json", "index.html"] {
        assert_eq!(
            std::fs::read(g1.join(name)).unwrap(),
            std::fs::read(g2.join(name)).unwrap(),
            "{name} differs between reruns"
        );
    }
}

#[test]
fn manifests_digest_their_inputs() {
    let dir = TempDir::new().unwrap();
    let world = make_world(&dir, &[]);
    let eps = path_str(&dir, "eps.jsonl");
    run_ok(&["gen", "paths", "--world", &world, "--seed", "1", "--count", "2", "--out", &eps]);
    let report = path_str(&dir, "r.csv");
    run_ok(&["score", "--world", &world, "--episodes", &eps, "--out", &report]);

    let manifest_path = PathBuf::from(format!("{report}.manifest.json"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
    assert_eq!(manifest["tool"], "navmetrics");
    assert_eq!(manifest["command"], "score");
    let inputs = manifest["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 2);
    for input in inputs {
        let path = Path::new(input["path"].as_str().unwrap());
        let digest = input["sha256"].as_str().unwrap();
        assert_eq!(digest.len(), 64);
        assert!(path.exists());
    }
    // The config snapshot pins the resolved threshold, not the flag default.
    assert!(manifest["config"]["dth"].as_f64().unwrap() > 0.0);
}
