//! Runs every (variant, setting, seed) job of a config, writes one trace CSV
//! per job, then aggregates a summary table after all jobs finish.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use tibpalm_core::bregman::{BregmanGeometry, GeometryKind};
use tibpalm_core::engine::{
    compute_rho, run, EngineError, Geometries, InertialSchedule, RunOptions, RunTrace, StoppingRule, Termination,
    Variant,
};
use tibpalm_core::linalg::Execution;
use tibpalm_core::problems::SparseNmf;

use crate::config::{ConfigError, QfpConfig, RunConfig};

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("writing {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// Display label used in traces and summaries.
pub fn variant_label(v: Variant) -> &'static str {
    match v {
        Variant::Tibpalm => "TiBPALM",
        Variant::Ibpalm => "iBPALM",
        Variant::Bpalm => "BPALM",
        Variant::Palm => "PALM",
        Variant::Ipalm => "iPALM",
        Variant::Gipalm => "GiPALM",
        Variant::Tibam => "TiBAM",
    }
}

fn geometry_label(k: GeometryKind) -> &'static str {
    match k {
        GeometryKind::KullbackLeibler => "KL",
        GeometryKind::ItakuraSaito => "IS",
        GeometryKind::Euclidean => "Euclid",
        GeometryKind::Mahalanobis => "Mahalanobis",
    }
}

#[derive(Clone, Debug)]
enum Setting {
    Plain,
    Qfp { gx: GeometryKind, gy: GeometryKind, schedule: [f64; 2] },
}

/// One summary row's worth of jobs.
#[derive(Clone, Debug)]
struct Group {
    algorithm: String,
    slug: String,
    variant: Variant,
    setting: Setting,
}

#[derive(Clone, Debug)]
struct Job {
    group: usize,
    seed: u64,
}

/// Outcome of a single run.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub algorithm: String,
    pub seed: u64,
    pub termination: String,
    /// Converged, or used up a fixed budget (`tol = 0`).
    pub completed: bool,
    pub iterations: usize,
    pub elapsed_ms: f64,
    pub inner_x: usize,
    pub inner_y: usize,
    pub terminal_gap: Option<f64>,
    pub final_objective: f64,
    /// File name of the trace, relative to the output directory.
    pub trace: Option<String>,
    group: usize,
}

#[derive(Debug)]
pub struct SuiteReport {
    pub runs: Vec<RunResult>,
    pub summary: PathBuf,
    pub all_completed: bool,
}

impl SuiteReport {
    pub fn exit_code(&self) -> i32 {
        if self.all_completed {
            0
        } else {
            1
        }
    }
}

#[derive(Serialize)]
struct TraceRow {
    k: usize,
    #[serde(rename = "L")]
    l: f64,
    #[serde(rename = "H")]
    h: f64,
    delta: f64,
    #[serde(rename = "Ek")]
    ek: f64,
    inner_x: usize,
    inner_y: usize,
    elapsed_ms: f64,
}

fn groups(cfg: &RunConfig) -> Result<Vec<Group>, ConfigError> {
    let variants = cfg.variants()?;
    let mut out = Vec::new();
    for v in variants {
        let name = variant_label(v);
        match cfg {
            RunConfig::Qfp(c) => {
                for (gx, gy) in c.parsed_pairs()? {
                    for &s in &c.schedules {
                        let sched = QfpConfig::schedule_label(s);
                        out.push(Group {
                            algorithm: format!("{name}({},{}) {sched}", geometry_label(gx), geometry_label(gy)),
                            slug: format!("{}_{}-{}_{sched}", v.name(), gx.name(), gy.name()),
                            variant: v,
                            setting: Setting::Qfp { gx, gy, schedule: s },
                        });
                    }
                }
            }
            _ => out.push(Group { algorithm: name.into(), slug: v.name().into(), variant: v, setting: Setting::Plain }),
        }
    }
    Ok(out)
}

fn options(cfg: &RunConfig, v: Variant, s: InertialSchedule) -> RunOptions {
    let mut stop = StoppingRule::new(cfg.tol(), cfg.max_iter());
    if cfg.timing() {
        stop = stop.timed();
    }
    RunOptions::new(v, s, stop).with_override(cfg.override_theory())
}

fn execute(cfg: &RunConfig, g: &Group, seed: u64) -> Result<RunTrace, String> {
    let err = |e: &dyn std::fmt::Display| e.to_string();
    match (cfg, &g.setting) {
        (RunConfig::Sigrec(c), _) => {
            let p = c.instance(seed).map_err(|e| err(&e))?;
            let geoms = if c.euclidean_x(g.variant) { p.euclidean_geometries() } else { p.geometries() };
            let (x0, y0) = p.zero_start();
            run(&p, &geoms, &options(cfg, g.variant, c.schedule(&p, g.variant)), x0, y0).map_err(|e| err(&e))
        }
        (RunConfig::Qfp(c), Setting::Qfp { gx, gy, schedule }) => {
            let q = c.instance(seed).map_err(|e| err(&e))?;
            let geoms = q.geometries(*gx, *gy).map_err(|e| err(&e))?;
            let rho = compute_rho(&q, &geoms).unwrap_or(0.0);
            let sched = InertialSchedule::symmetric(schedule[0], schedule[1], rho);
            let z = q.random_start(seed);
            run(&q, &geoms, &options(cfg, g.variant, sched), z.clone(), z).map_err(|e| err(&e))
        }
        (RunConfig::Nmf(c), _) => {
            let budget = c.budget().map_err(|e| err(&e))?;
            let p = SparseNmf::synthetic(c.rows, c.cols, c.rank, budget, c.lambda, seed).map_err(|e| err(&e))?;
            // Step sizes come from the problem each iteration; these are placeholders.
            let e = BregmanGeometry::Euclidean { mu: 1.0 };
            let (x0, y0) = p.random_start(seed);
            run(&p, &Geometries::new(e.clone(), e), &options(cfg, g.variant, c.schedule(g.variant)), x0, y0)
                .map_err(|e: EngineError| err(&e))
        }
        (RunConfig::Qfp(_), Setting::Plain) => unreachable!("qfp groups carry a setting"),
    }
}

fn write_trace(path: &Path, t: &RunTrace) -> Result<(), SuiteError> {
    let mut w = csv::Writer::from_path(path).map_err(|source| SuiteError::Csv { path: path.into(), source })?;
    for r in &t.records {
        let row = TraceRow {
            k: r.k,
            l: r.objective,
            h: r.benefit,
            delta: r.delta,
            ek: r.ek,
            inner_x: r.inner_x,
            inner_y: r.inner_y,
            elapsed_ms: r.elapsed_ms,
        };
        w.serialize(row).map_err(|source| SuiteError::Csv { path: path.into(), source })?;
    }
    w.flush().map_err(|source| SuiteError::Io { path: path.into(), source })
}

fn run_job(cfg: &RunConfig, groups: &[Group], job: &Job, dir: &Path) -> Result<RunResult, SuiteError> {
    let g = &groups[job.group];
    let mut res = RunResult {
        algorithm: g.algorithm.clone(),
        seed: job.seed,
        termination: String::new(),
        completed: false,
        iterations: 0,
        elapsed_ms: 0.0,
        inner_x: 0,
        inner_y: 0,
        terminal_gap: None,
        final_objective: f64::NAN,
        trace: None,
        group: job.group,
    };
    match execute(cfg, g, job.seed) {
        Ok(t) => {
            let name = format!("trace_{}_seed{}.csv", g.slug, job.seed);
            write_trace(&dir.join(&name), &t)?;
            let s = &t.summary;
            res.termination = match &s.termination {
                Termination::Fault(m) => format!("fault: {m}"),
                other => other.label().to_string(),
            };
            res.completed = s.converged() || (cfg.tol() == 0.0 && s.termination == Termination::MaxIter);
            res.iterations = s.iterations;
            res.elapsed_ms = s.elapsed_ms;
            res.inner_x = s.total_inner_x;
            res.inner_y = s.total_inner_y;
            res.terminal_gap = s.terminal_gap;
            res.final_objective = t.records.last().map_or(f64::NAN, |r| r.objective);
            res.trace = Some(name);
        }
        Err(msg) => res.termination = format!("error: {msg}"),
    }
    Ok(res)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn write_summary(cfg: &RunConfig, groups: &[Group], runs: &[RunResult], path: &Path) -> Result<(), SuiteError> {
    let csv_err = |source| SuiteError::Csv { path: path.into(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let header: &[&str] = match cfg {
        RunConfig::Sigrec(_) => &["algorithm", "runs", "completed", "median_iter", "mean_iter", "mean_time_s", "mean_gap"],
        RunConfig::Qfp(_) => &[
            "algorithm",
            "geometry_x",
            "geometry_y",
            "schedule",
            "runs",
            "completed",
            "median_iter",
            "mean_iter",
            "mean_inner_x",
            "mean_inner_y",
            "mean_time_s",
        ],
        RunConfig::Nmf(_) => {
            &["algorithm", "runs", "completed", "median_iter", "mean_final_objective", "mean_time_s", "trace"]
        }
    };
    w.write_record(header).map_err(csv_err)?;
    for (i, g) in groups.iter().enumerate() {
        let rs: Vec<&RunResult> = runs.iter().filter(|r| r.group == i).collect();
        let runs_n = rs.len().to_string();
        let conv = rs.iter().filter(|r| r.completed).count().to_string();
        let med = median(&mut rs.iter().map(|r| r.iterations as f64).collect::<Vec<_>>()).to_string();
        let it = mean(rs.iter().map(|r| r.iterations as f64)).to_string();
        let time = mean(rs.iter().map(|r| r.elapsed_ms / 1e3)).to_string();
        let mut row = vec![g.algorithm.clone(), runs_n, conv, med];
        match (cfg, &g.setting) {
            (RunConfig::Sigrec(_), _) => {
                let gap = mean(rs.iter().filter_map(|r| r.terminal_gap));
                row.extend([it, time, gap.to_string()]);
            }
            (RunConfig::Qfp(_), Setting::Qfp { gx, gy, schedule }) => {
                row.splice(
                    1..1,
                    [gx.name().to_string(), gy.name().to_string(), QfpConfig::schedule_label(*schedule).to_string()],
                );
                let ix = mean(rs.iter().map(|r| r.inner_x as f64)).to_string();
                let iy = mean(rs.iter().map(|r| r.inner_y as f64)).to_string();
                row.extend([it, ix, iy, time]);
            }
            (RunConfig::Nmf(_), _) => {
                let obj = mean(rs.iter().map(|r| r.final_objective)).to_string();
                let trace = rs.iter().find_map(|r| r.trace.clone()).unwrap_or_default();
                row.extend([obj, time, trace]);
            }
            (RunConfig::Qfp(_), Setting::Plain) => unreachable!("qfp groups carry a setting"),
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| SuiteError::Io { path: path.into(), source })
}

fn write_runs(runs: &[RunResult], path: &Path) -> Result<(), SuiteError> {
    let csv_err = |source| SuiteError::Csv { path: path.into(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["algorithm", "seed", "termination", "iterations", "inner_x", "inner_y", "elapsed_ms", "trace"])
        .map_err(csv_err)?;
    for r in runs {
        w.write_record([
            r.algorithm.clone(),
            r.seed.to_string(),
            r.termination.clone(),
            r.iterations.to_string(),
            r.inner_x.to_string(),
            r.inner_y.to_string(),
            r.elapsed_ms.to_string(),
            r.trace.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|source| SuiteError::Io { path: path.into(), source })
}

/// Runs the suite with the default execution strategy.
pub fn run_suite(cfg: &RunConfig) -> Result<SuiteReport, SuiteError> {
    run_suite_with(cfg, Execution::default())
}

/// Runs the suite; `Parallel` spreads jobs over the rayon pool when the
/// `parallel` feature is on. Outputs do not depend on the choice.
pub fn run_suite_with(cfg: &RunConfig, exec: Execution) -> Result<SuiteReport, SuiteError> {
    cfg.validate()?;
    let dir = cfg.out().clone();
    fs::create_dir_all(&dir).map_err(|source| SuiteError::Io { path: dir.clone(), source })?;
    let groups = groups(cfg)?;
    let jobs: Vec<Job> = (0..groups.len())
        .flat_map(|group| cfg.seeds().into_iter().map(move |seed| Job { group, seed }))
        .collect();

    let results: Vec<Result<RunResult, SuiteError>> = match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            jobs.par_iter().map(|j| run_job(cfg, &groups, j, &dir)).collect()
        }
        _ => jobs.iter().map(|j| run_job(cfg, &groups, j, &dir)).collect(),
    };
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let summary = dir.join("summary.csv");
    write_summary(cfg, &groups, &runs, &summary)?;
    write_runs(&runs, &dir.join("runs.csv"))?;
    let all_completed = runs.iter().all(|r| r.completed);
    Ok(SuiteReport { runs, summary, all_completed })
}
