//! Drives the `ifb` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ifb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ifb"))
        .args(args)
        .env_remove("IFB_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_solve_rates_flow() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("lasso.json");
    let o = ifb(&["gen", "--problem", "lasso", "--m", "60", "--n", "120", "--s", "6", "--seed", "3", "-o", p(&inst)]);
    assert_eq!(code(&o), 0, "{o:?}");

    let trace = dir.path().join("t.csv");
    let o = ifb(&[
        "solve", "--instance", p(&inst), "--schedule", "fista_cd:4", "--tol", "1e-8", "--reference", "--monitor", "-o", p(&trace),
    ]);
    assert_eq!(code(&o), 0, "{o:?}");
    let out = stdout(&o);
    assert!(out.contains("f* = ") && out.contains("status converged"), "{out}");
    assert!(out.contains("0 above slack"), "{out}");
    let text = fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("k,"));
    assert!(text.lines().count() > 10);

    let o = ifb(&["rates", p(&trace)]);
    assert_eq!(code(&o), 0, "{o:?}");
    assert!(stdout(&o).contains("t.csv"), "{}", stdout(&o));

    // The same instance generated again is byte-identical.
    let again = dir.path().join("again.json");
    ifb(&["gen", "--problem", "lasso", "--m", "60", "--n", "120", "--s", "6", "--seed", "3", "-o", p(&again)]);
    assert_eq!(fs::read(&inst).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn fb_alias_matches_no_inertia() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let base = ["solve", "--problem", "qp", "--m", "20", "--seed", "2", "--tol", "1e-6"];
    let o1 = ifb(&[&base[..], &["--algo", "fb", "-o", p(&a)]].concat());
    let o2 = ifb(&[&base[..], &["--schedule", "none", "-o", p(&b)]].concat());
    assert_eq!(code(&o1), 0, "{o1:?}");
    assert_eq!(code(&o2), 0, "{o2:?}");
    let strip = |path: &Path| -> Vec<String> {
        // Drop the wall-clock column before comparing.
        fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn bench_tables_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, jobs: &str| {
        let csv = dir.path().join(name);
        let o = ifb(&[
            "bench", "--problem", "lasso", "--m", "40", "--n", "80", "--s", "5", "--seeds", "1..3", "--tol", "1e-6", "-j", jobs,
            "--csv", p(&csv),
        ]);
        assert_eq!(code(&o), 0, "{o:?}");
        (stdout(&o), fs::read_to_string(csv).unwrap())
    };
    let first = run("a.csv", "1");
    assert_eq!(first, run("b.csv", "1"));
    assert_eq!(first, run("c.csv", "2"));
    for m in ["fista", "fista_cd:4", "pow:8:4", "pow:0.5:0.5", "exp:0.5"] {
        assert!(first.0.contains(m), "{}", first.0);
    }
}

#[test]
fn config_file_drives_solve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let trace = dir.path().join("t.jsonl");
    fs::write(
        &cfg,
        format!(
            "schedule = \"exp:0.5\"\nalgorithm = \"adapm\"\n[problem]\nkind = \"qp\"\nm = 20\n[solver]\ntol = 1e-7\n[output]\ntrace = {:?}\nformat = \"json-lines\"\n",
            p(&trace)
        ),
    )
    .unwrap();
    let o = ifb(&["solve", "--config", p(&cfg)]);
    assert_eq!(code(&o), 0, "{o:?}");
    assert!(stdout(&o).starts_with("adapm exp:0.5 status converged"), "{}", stdout(&o));
    let first = fs::read_to_string(&trace).unwrap();
    assert!(first.lines().next().unwrap().starts_with("{\"k\":0"), "{first}");
}

#[test]
fn data_dir_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny"), "+1 1:0.5 2:1\n-1 1:-1\n+1 2:0.25\n-1 1:0.1 2:-2\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_ifb"))
        .args(["solve", "--libsvm", "tiny", "--tol", "1e-6"])
        .env("IFB_DATA_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{o:?}");
    let o = ifb(&["--data-dir", p(dir.path()), "solve", "--libsvm", "tiny", "--tol", "1e-6"]);
    assert_eq!(code(&o), 0, "{o:?}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&ifb(&["solve", "--bogus"])), 2);
    assert_eq!(code(&ifb(&["solve", "--problem", "qp", "--m", "20", "--mu", "1.5"])), 2);
    assert_eq!(code(&ifb(&["solve", "--problem", "qp", "--m", "20", "--schedule", "exp:3"])), 2);
    let missing = dir.path().join("nope.json");
    assert_eq!(code(&ifb(&["solve", "--instance", p(&missing)])), 5);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    let o = ifb(&["solve", "--instance", p(&bad)]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"), "{o:?}");
}

#[test]
fn check_prints_one_line_per_check() {
    let o = ifb(&["check", "--k-probe", "100000", "--k-scan", "100000", "--samples", "200"]);
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    let (body, summary) = lines.split_at(lines.len() - 1);
    assert!(body.iter().all(|l| l.starts_with("PASS ") || l.starts_with("FAIL ")), "{out}");
    // The Exp(0.5) comparison sequence grows too fast at 10⁵; every other check holds.
    let failed: Vec<&&str> = body.iter().filter(|l| l.starts_with("FAIL")).collect();
    assert_eq!(failed.len(), 1, "{out}");
    assert!(failed[0].starts_with("FAIL growth exp:0.5"));
    assert!(summary[0].ends_with("1 failed"));
    assert_eq!(code(&o), 1);
}
