use std::fs;
use std::path::Path;

use tibpalm_bench::{emit_figure_series, label_from_path, parse_config, run_suite, run_suite_with, ProblemKind, SeriesError};
use tibpalm_core::linalg::Execution;

fn config(kind: ProblemKind, body: &str, out: &Path) -> tibpalm_bench::RunConfig {
    let text = format!("[{kind}]\nout = {:?}\ntiming = false\n{body}", out.display().to_string());
    parse_config(&text, kind).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

fn traces(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with("trace_"))
        .collect();
    v.sort();
    v
}

const SMALL_SIGREC: &str = "n = 12\nm = 60\n";

#[test]
fn sigrec_suite_counts() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_suite(&config(ProblemKind::Sigrec, SMALL_SIGREC, dir.path())).unwrap();
    assert_eq!(traces(dir.path()).len(), 40);
    let rows = csv_rows(&report.summary);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["TiBPALM", "TiBAM", "iBPALM", "BPALM"]);
    assert_eq!(report.exit_code(), 0);
    let header = fs::read_to_string(&traces(dir.path())[0]).unwrap();
    assert_eq!(header.lines().next(), Some("k,L,H,delta,Ek,inner_x,inner_y,elapsed_ms"));

    // Median and mean recomputed from the per-run table.
    let runs = csv_rows(&dir.path().join("runs.csv"));
    let mut tib: Vec<f64> = runs.iter().filter(|r| r[0] == "TiBPALM").map(|r| r[3].parse().unwrap()).collect();
    tib.sort_by(f64::total_cmp);
    assert_eq!(rows[0][3].parse::<f64>().unwrap(), 0.5 * (tib[4] + tib[5]));
    assert_eq!(rows[0][4].parse::<f64>().unwrap(), tib.iter().sum::<f64>() / 10.0);
    assert!(rows.iter().all(|r| r[6].parse::<f64>().unwrap().is_finite()));
}

#[test]
fn qfp_suite_groups_by_pair_and_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_suite(&config(ProblemKind::Qfp, "repetitions = 3\n", dir.path())).unwrap();
    let rows = csv_rows(&report.summary);
    assert_eq!(rows.len(), 18);
    assert_eq!(rows[0][..4], ["TiBPALM(KL,KL) one-step", "kl", "kl", "one-step"]);
    assert_eq!(rows[3][..4], ["TiBPALM(KL,IS) two-step", "kl", "is", "two-step"]);
    for r in &rows {
        let (iters, inner_x, inner_y): (f64, f64, f64) = (r[7].parse().unwrap(), r[8].parse().unwrap(), r[9].parse().unwrap());
        assert!(inner_x >= iters && inner_y == iters, "{r:?}");
    }
    assert_eq!(traces(dir.path()).len(), 54);
    assert_eq!(report.exit_code(), 0);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let body = format!("{SMALL_SIGREC}repetitions = 3\n");
    run_suite_with(&config(ProblemKind::Sigrec, &body, a.path()), Execution::Sequential).unwrap();
    run_suite_with(&config(ProblemKind::Sigrec, &body, b.path()), Execution::Parallel).unwrap();
    let names = |d: &Path| {
        let mut v: Vec<_> = fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
        v.sort();
        v
    };
    assert_eq!(names(a.path()), names(b.path()));
    for n in names(a.path()) {
        let out = |d: &Path| fs::read_to_string(d.join(&n)).unwrap().replace(&d.display().to_string(), "");
        assert_eq!(out(a.path()), out(b.path()), "{n:?}");
    }
}

#[test]
fn unconverged_runs_set_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_suite(&config(ProblemKind::Sigrec, &format!("{SMALL_SIGREC}repetitions = 2\nmax_iter = 5\n"), dir.path())).unwrap();
    assert_eq!(report.exit_code(), 1);
    assert!(report.runs.iter().all(|r| r.termination == "max-iter"));
    // Partial outputs stay on disk.
    assert_eq!(traces(dir.path()).len(), 8);
    assert!(csv_rows(&report.summary).iter().all(|r| r[2] == "0"));
}

#[test]
fn nmf_fixed_budget_completes() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_suite(&config(ProblemKind::Nmf, "rows = 20\ncols = 15\nrank = 4\nmax_iter = 40\n", dir.path())).unwrap();
    assert_eq!(report.exit_code(), 0);
    let rows = csv_rows(&report.summary);
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r[3], "40");
        assert!(dir.path().join(&r[6]).exists());
    }
}

#[test]
fn series_reshapes_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(ProblemKind::Sigrec, &format!("{SMALL_SIGREC}repetitions = 1\nvariants = [\"tibpalm\", \"bpalm\"]\n"), dir.path());
    run_suite(&cfg).unwrap();
    let files = traces(dir.path());
    let labelled: Vec<_> = files.iter().map(|p| (label_from_path(p), p.clone())).collect();
    assert_eq!(labelled.iter().map(|l| l.0.as_str()).collect::<Vec<_>>(), ["bpalm", "tibpalm"]);

    let out = dir.path().join("series.csv");
    let n = emit_figure_series(&labelled[1..], &out).unwrap();
    let trace_rows = csv_rows(&files[1]);
    assert_eq!(n, trace_rows.len() * 4);
    let series = csv_rows(&out);
    assert_eq!(series.len(), n);
    let last_ek = series.iter().rev().find(|r| r[2] == "E_k").unwrap();
    assert!(last_ek[3].parse::<f64>().unwrap() < 1e-4);
    let metrics: Vec<_> = series[..4].iter().map(|r| r[2].as_str()).collect();
    assert_eq!(metrics, ["objective", "H", "E_k", "delta"]);

    emit_figure_series(&labelled, &out).unwrap();
    let series = csv_rows(&out);
    assert!(series.iter().any(|r| r[0] == "bpalm") && series.iter().any(|r| r[0] == "tibpalm"));
}

#[test]
fn series_requires_every_metric() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("trace_x_seed0.csv");
    fs::write(&bad, "k,L,H,delta\n0,1,1,0\n").unwrap();
    let err = emit_figure_series(&[("x".into(), bad)], &dir.path().join("s.csv")).unwrap_err();
    assert!(matches!(err, SeriesError::MissingColumn { ref column, .. } if column == "Ek"), "{err}");
    assert_eq!(label_from_path(Path::new("trace_tibpalm_kl-is_two-step_seed12.csv")), "tibpalm_kl-is_two-step");
    assert_eq!(label_from_path(Path::new("custom.csv")), "custom");
}

#[test]
fn zero_second_step_reproduces_one_step_variant() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let common = format!("{SMALL_SIGREC}repetitions = 2\nalpha1 = 0.15\n");
    run_suite(&config(ProblemKind::Sigrec, &format!("{common}variant = \"tibpalm\"\nalpha2 = 0\n"), a.path())).unwrap();
    run_suite(&config(ProblemKind::Sigrec, &format!("{common}variant = \"ibpalm\"\n"), b.path())).unwrap();
    for seed in [0, 1] {
        let x = fs::read_to_string(a.path().join(format!("trace_tibpalm_seed{seed}.csv"))).unwrap();
        let y = fs::read_to_string(b.path().join(format!("trace_ibpalm_seed{seed}.csv"))).unwrap();
        assert_eq!(x, y);
    }
}
