use std::fs;
use std::process::Command;

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bench"))
}

#[test]
fn runs_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[sigrec]\nn = 10\nm = 50\nrepetitions = 2\n").unwrap();
    let out = dir.path().join("out");
    let status = bench()
        .args(["sigrec", "--config"])
        .arg(&cfg)
        .args(["--variant", "ibpalm", "--seed", "4", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("trace_ibpalm_seed4.csv").exists());
    assert!(out.join("trace_ibpalm_seed5.csv").exists());
    assert!(out.join("summary.csv").exists());

    let series = dir.path().join("series.csv");
    let status = bench().args(["series", "--out"]).arg(&series).arg(out.join("trace_ibpalm_seed4.csv")).status().unwrap();
    assert!(status.success());
    assert!(fs::read_to_string(&series).unwrap().starts_with("algorithm,k,metric,value\nibpalm,0,objective,"));
}

#[test]
fn print_config_round_trips() {
    let first = bench().args(["qfp", "--print-config", "--seed", "3"]).output().unwrap();
    assert!(first.status.success());
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, &first.stdout).unwrap();
    let second = bench().args(["qfp", "--print-config", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn bad_configs_exit_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[sigrec]\ngama = 0.3\n").unwrap();
    let out = bench().args(["sigrec", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gama"));

    let out = bench().args(["sigrec", "--print-config", "--variant", "palm"]).output().unwrap();
    assert!(out.status.success(), "palm falls back to the Euclidean geometry");
    fs::write(&cfg, "[sigrec]\nalpha1 = 0.4\n").unwrap();
    let out = bench().args(["sigrec", "--print-config", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bench().args(["sigrec", "--print-config", "--override-theory", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());
}
