//! End-to-end runs of the binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cache_regret::output::read_results_csv;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cache-regret"))
        .args(args)
        .env("CACHE_REGRET_JOBS", "1")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&cli(&["simulate", "--reward", "single", "--sequence", "uniform2c", "--C", "1"])), 2);
    assert_eq!(code(&cli(&["ballsbins", "--T", "10", "--C", "1", "--trials", "0"])), 2);
    assert_eq!(code(&cli(&["bounds", "--setting", "ftpl-inelastic", "--T", "100"])), 2);
    assert_eq!(
        code(&cli(&[
            "simulate", "--reward", "inelastic", "--topology", "paper", "--sequence", "identical", "--T", "10",
            "--C", "1", "--policies", "ftpl",
        ])),
        2
    );
    assert_eq!(
        code(&cli(&["simulate", "--reward", "single", "--sequence", "uniform2c", "--T", "10", "--C", "1", "--alpha", "0.1"])),
        2
    );
}

#[test]
fn malformed_trace_exits_1_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ratings.dat");
    fs::write(&path, "1::10::5::100\n1::20::5\n").unwrap();
    let out = cli(&["trace-convert", "--in", path.to_str().unwrap(), "--in-format", "movielens_dat", "--users", "1"]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn missing_file_exits_1() {
    let out = cli(&[
        "simulate", "--reward", "single", "--sequence", "trace:/nonexistent/trace.csv", "--T", "auto", "--C", "1",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn simulate_writes_one_row_per_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let out = cli(&[
        "--out", path.to_str().unwrap(), "simulate", "--reward", "single", "--sequence", "uniform2c", "--T", "200",
        "--C", "2", "--policies", "lru,ftpl,oga", "--reps", "3", "--checkpoints", "all",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_results_csv(fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(rows.len(), 3 * 3 * 200);
    let last = rows.iter().find(|r| r.policy == "lru" && r.t == 200).unwrap();
    assert!((last.hindsight_reward - last.cum_reward - last.regret).abs() < 1e-6);
}

fn simulate_bytes(dir: &Path, name: &str, jobs: &str) -> Vec<u8> {
    let path = dir.join(name);
    let out = cli(&[
        "--no-header-meta", "--seed", "7", "--jobs", jobs, "--out", path.to_str().unwrap(), "simulate", "--reward",
        "elastic", "--topology", "paper", "--sequence", "zipf:0.8", "--N", "50", "--T", "300", "--C", "3", "--reps",
        "4", "--policies", "lfu,oga,ftpl",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    fs::read(path).unwrap()
}

#[test]
fn output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate_bytes(dir.path(), "a.csv", "1");
    let b = simulate_bytes(dir.path(), "b.csv", "3");
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn trace_convert_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.csv");
    fs::write(&raw, "user,item,timestamp\n1,10,3\n2,20,1\n1,30,2\n2,10,4\n").unwrap();
    let first = dir.path().join("first.csv");
    let second = dir.path().join("second.csv");
    for (input, output) in [(&raw, &first), (&first, &second)] {
        let out = cli(&[
            "--no-header-meta", "--out", output.to_str().unwrap(), "trace-convert", "--in", input.to_str().unwrap(),
            "--users", "1",
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let canonical = fs::read_to_string(&first).unwrap();
    assert!(canonical.starts_with("# N=3 T=4"), "{canonical}");
    assert_eq!(canonical, fs::read_to_string(&second).unwrap());

    let out = cli(&[
        "simulate", "--reward", "single", "--sequence", &format!("trace:{}", first.display()), "--T", "auto", "--C",
        "1", "--policies", "lru",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn mad_table() {
    let out = cli(&["--no-header-meta", "mad", "--Tmax", "4"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "T,mad_exact,mad_lower_bound,margin");
    assert_eq!(lines.len(), 5);
    assert!(lines[4].starts_with("4,0.75,"), "{}", lines[4]);
}

#[test]
fn bounds_table() {
    let out = cli(&["--no-header-meta", "bounds", "--setting", "single", "--T", "100", "--C", "1"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.starts_with("name,setting,T,C,N,d,J,r,value,side\n"));
    assert!(text.lines().count() > 2);
}

#[test]
fn json_output_parses() {
    let out = cli(&[
        "--format", "json", "simulate", "--reward", "single", "--sequence", "alternating", "--T", "10", "--C", "1",
        "--policies", "lru", "--checkpoints", "all",
    ]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 10);
    assert_eq!(v["rows"][9]["regret"], 5.0);
}
