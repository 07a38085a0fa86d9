use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn geobench(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_geobench"));
    cmd.args(args).env_remove("GEOBENCH_OUT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_file(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const BASE: &str = "dataset: {scenario: aviation, scale_factor: 3000, seed: 4}\n\
workload: {param_sets_per_query: 4, run_repetitions: 1, seed: 4}\n";

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_outputs_and_honours_env_out() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_file(dir.path(), "exp.yaml", BASE);
    let env_out = dir.path().join("from-env");
    let out = geobench(&["-q", "run", "-c", s(&cfg)], &[("GEOBENCH_OUT", &env_out)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["results.csv", "resources.csv", "plan.json", "summary.json"] {
        assert!(env_out.join(f).exists(), "{f}");
    }
    let results = std::fs::read_to_string(env_out.join("results.csv")).unwrap();
    // header + 6 templates x 4 sets
    assert_eq!(results.lines().count(), 25);

    // --out wins over the environment
    let flag_out = dir.path().join("from-flag");
    let out = geobench(&["-q", "--out", s(&flag_out), "run", "-c", s(&cfg)], &[("GEOBENCH_OUT", &env_out)]);
    assert_eq!(code(&out), 0);
    assert!(flag_out.join("results.csv").exists());
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_file(dir.path(), "exp.yaml", BASE);
    let out_dir = dir.path().join("v");
    let run = |extra: &[&str]| {
        let mut args = vec!["-q", "--out", s(&out_dir), "verify", "-c", s(&cfg)];
        args.extend_from_slice(extra);
        code(&geobench(&args, &[]))
    };
    assert_eq!(run(&["--against-profile", "rtree/space(4)"]), 0);
    assert!(out_dir.join("mismatches.json").exists());
    assert_eq!(run(&["--against-adapter", "faulty", "--against-connection", "every=2"]), 1);
    assert_eq!(run(&["--against-adapter", "mock"]), 2);
    assert_eq!(run(&[]), 2);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.yaml");
    assert_eq!(code(&geobench(&["-q", "run", "-c", s(&missing)], &[])), 2);
    let bad_scale = write_file(dir.path(), "small.yaml", "dataset: {scenario: cycling, scale_factor: 1}\n");
    assert_eq!(code(&geobench(&["-q", "generate", "-c", s(&bad_scale)], &[])), 2);
    let unknown = write_file(dir.path(), "unknown.yaml", "dataset: {scenario: ais}\nsut: {adapter: oracle9}\n");
    assert_eq!(code(&geobench(&["-q", "run", "-c", s(&unknown)], &[])), 2);
    let typo = write_file(dir.path(), "typo.yaml", "dataset: {scenario: ais}\nworkload: {client: 4}\n");
    assert_eq!(code(&geobench(&["-q", "run", "-c", s(&typo)], &[])), 2);
    assert_eq!(code(&geobench(&["-q", "bogus"], &[])), 2);
}

#[test]
fn unreachable_backend_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{BASE}sut: {{adapter: sqlwire, connection: '127.0.0.1:1'}}\n");
    let cfg = write_file(dir.path(), "exp.yaml", &body);
    let out = geobench(&["-q", "--out", s(&dir.path().join("o")), "run", "-c", s(&cfg)], &[]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bench_then_report_compares_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_file(dir.path(), "a.yaml", BASE);
    let b = write_file(dir.path(), "b.yaml", &format!("{BASE}sut: {{profile: grid/time(4)}}\n"));
    let (out_a, out_b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&geobench(&["-q", "--out", s(&out_a), "bench", "-c", s(&a)], &[])), 0);
    assert!(out_a.join("data/instants.csv").exists());
    assert!(out_a.join("ecdf.csv").exists());
    assert_eq!(code(&geobench(&["-q", "--out", s(&out_b), "run", "-c", s(&b)], &[])), 0);

    let rep = dir.path().join("report");
    let out = geobench(
        &["-q", "report", s(&out_a.join("results.csv")), s(&out_b.join("results.csv"))],
        &[("GEOBENCH_OUT", &rep)],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["summary.json", "summary_2.json", "comparison.json", "ecdf.csv", "ecdf.json", "bars.csv"] {
        assert!(rep.join(f).exists(), "{f}");
    }
    let cmp: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(rep.join("comparison.json")).unwrap()).unwrap();
    assert_eq!(cmp["queries"].as_array().unwrap().len(), 6);
    assert_eq!(cmp["baseline"], "refstore:none/none");
    assert_eq!(cmp["candidate"], "refstore:grid/time(4)");
}

#[test]
fn report_rejects_bad_inputs_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let header = "run_id,repetition,query,param_set,client,issue_ts,latency_us,rows,success,error\n";
    let row = |q: &str| format!("r,1,{q},0,0,2024-01-01T00:00:00.000000Z,100,1,true,\n");
    let bad = write_file(dir.path(), "bad.csv", &format!("{header}{}r,1,q,0,0,2024-01-01T00:00:00Z,fast,1,true,\n", row("q")));
    let out = geobench(&["-q", "--out", s(&dir.path().join("o")), "report", s(&bad)], &[]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"), "{}", String::from_utf8_lossy(&out.stderr));

    let a = write_file(dir.path(), "a.csv", &format!("{header}{}", row("q")));
    let b = write_file(dir.path(), "b.csv", &format!("{header}{}", row("p").replace("r,", "s,")));
    assert_eq!(code(&geobench(&["-q", "--out", s(&dir.path().join("o")), "report", s(&a)], &[])), 0);
    assert_eq!(code(&geobench(&["-q", "--out", s(&dir.path().join("o")), "report", s(&a), s(&b)], &[])), 2);
}
