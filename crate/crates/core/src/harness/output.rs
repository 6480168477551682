use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{io_err, ExperimentConfig, HarnessError, LearningCurve, RunResult, Setup};

/// Per-episode mean and population variance across runs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Aggregate {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

pub fn aggregate_curves(runs: &[Vec<f64>]) -> Result<Aggregate, HarnessError> {
    let Some(first) = runs.first() else {
        return Ok(Aggregate::default());
    };
    let len = first.len();
    if let Some(other) = runs.iter().find(|r| r.len() != len) {
        return Err(HarnessError::Ragged(len, other.len()));
    }
    let n = runs.len() as f64;
    let mut agg = Aggregate {
        mean: Vec::with_capacity(len),
        variance: Vec::with_capacity(len),
    };
    for e in 0..len {
        let mean = runs.iter().map(|r| r[e]).sum::<f64>() / n;
        let var = runs.iter().map(|r| (r[e] - mean).powi(2)).sum::<f64>() / n;
        agg.mean.push(mean);
        agg.variance.push(var);
    }
    Ok(agg)
}

pub fn format_run(returns: &[f64]) -> String {
    let mut out = String::from("episode,return\n");
    for (i, r) in returns.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, r).unwrap();
    }
    out
}

pub fn format_aggregate(agg: &Aggregate) -> String {
    let mut out = String::from("episode,mean,variance\n");
    for (i, (m, v)) in agg.mean.iter().zip(&agg.variance).enumerate() {
        writeln!(out, "{},{},{}", i + 1, m, v).unwrap();
    }
    out
}

pub fn format_audit(run: &RunResult) -> String {
    let mut out = String::from("episode,step,state,action,reward,next,terminal,feedback,source\n");
    for (episode, log) in &run.audit {
        let s = &log.sample;
        let f = log.feedback.map(|f| f.to_string()).unwrap_or_default();
        let source = log.source.as_str();
        writeln!(
            out,
            "{episode},{},{},{},{},{},{},{f},{source}",
            log.step, s.s, s.a, s.r, s.s_next, s.terminal
        )
        .unwrap();
    }
    out
}

fn format_log(config: &ExperimentConfig, setup: &Setup, curve: &LearningCurve) -> String {
    let mut out = String::new();
    let label = if config.algorithm.is_reconstruction() {
        " (reconstruction)"
    } else {
        ""
    };
    writeln!(out, "algorithm {}{label}", config.algorithm.as_str()).unwrap();
    writeln!(out, "env {}", setup.env.name()).unwrap();
    match &setup.scenario {
        Some(sc) => writeln!(
            out,
            "scenario {} p_give={} p_flip={}",
            sc.intent.as_str(),
            sc.params.p_give,
            sc.params.p_flip
        )
        .unwrap(),
        None => writeln!(out, "scenario none").unwrap(),
    }
    writeln!(out, "maxepisode {}", config.maxepisode()).unwrap();
    if config.algorithm == crate::harness::Algorithm::Pacman {
        writeln!(out, "maxstamp {}", setup.maxstamp).unwrap();
    }
    for (i, run) in curve.runs.iter().enumerate() {
        let frac = if run.updates == 0 {
            0.0
        } else {
            run.feedback_updates as f64 / run.updates as f64
        };
        writeln!(
            out,
            "run {i} seed {} updates {} feedback_updates {} feedback_fraction {:.4} plan_failures {} final_return {}",
            run.seed,
            run.updates,
            run.feedback_updates,
            frac,
            run.plan_failures.len(),
            run.returns.last().copied().unwrap_or(0.0)
        )
        .unwrap();
    }
    out
}

/// Writes the config echo, per-run and aggregate CSVs, the run log and,
/// when auditing, per-step audit files into `dir`.
pub fn write_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    setup: &Setup,
    curve: &LearningCurve,
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let write = |name: &str, text: &str| {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(io_err(path))
    };
    write("config.toml", &config.to_toml())?;
    for (i, run) in curve.runs.iter().enumerate() {
        write(&format!("run_{i}.csv"), &format_run(&run.returns))?;
        if config.audit {
            write(&format!("audit_{i}.csv"), &format_audit(run))?;
        }
    }
    write("aggregate.csv", &format_aggregate(&curve.aggregate))?;
    write("run.log", &format_log(config, setup, curve))?;
    Ok(())
}

pub fn parse_run_csv(path: &Path, text: &str) -> Result<Vec<f64>, HarnessError> {
    let err = |line: usize, message: String| HarnessError::Csv {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "episode,return")) => {}
        _ => return Err(err(1, "expected header `episode,return`".into())),
    }
    let mut returns = Vec::new();
    for (i, line) in lines {
        let (episode, value) = line
            .split_once(',')
            .ok_or_else(|| err(i + 1, "expected two fields".into()))?;
        if episode.parse::<usize>().ok() != Some(returns.len() + 1) {
            return Err(err(i + 1, format!("episode `{episode}` out of sequence")));
        }
        let value: f64 = value
            .parse()
            .map_err(|_| err(i + 1, format!("bad return `{value}`")))?;
        returns.push(value);
    }
    Ok(returns)
}

fn run_files(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut files = Vec::new();
    for i in 0.. {
        let path = dir.join(format!("run_{i}.csv"));
        if !path.exists() {
            break;
        }
        files.push(path);
    }
    if files.is_empty() {
        return Err(HarnessError::Io {
            path: dir.join("run_0.csv"),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no run files"),
        });
    }
    Ok(files)
}

/// Plot-ready table from an output directory: one row per episode with
/// mean, variance, standard deviation and every run's return.
pub fn curves_from_dir(dir: &Path) -> Result<String, HarnessError> {
    let mut runs = Vec::new();
    for path in run_files(dir)? {
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        runs.push(parse_run_csv(&path, &text)?);
    }
    let agg = aggregate_curves(&runs)?;
    let mut out = String::from("episode,mean,variance,std");
    for i in 0..runs.len() {
        write!(out, ",run_{i}").unwrap();
    }
    out.push('\n');
    for e in 0..agg.mean.len() {
        write!(
            out,
            "{},{},{},{}",
            e + 1,
            agg.mean[e],
            agg.variance[e],
            agg.variance[e].sqrt()
        )
        .unwrap();
        for r in &runs {
            write!(out, ",{}", r[e]).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}
