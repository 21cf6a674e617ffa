//! Runs sweep points on a worker pool with checkpointing.
//!
//! Each point gets its own directory:
//!
//! ```text
//! <out>/manifest
//! <out>/n100_gamma1e0/metadata
//! <out>/n100_gamma1e0/survival_avg.csv
//! <out>/n100_gamma1e0/gamma_avg.csv
//! <out>/n100_gamma1e0/checkpoints/real_<r>.csv
//! ```
//!
//! Workers take realization indices from a shared counter in increasing
//! order; the calling thread writes each checkpoint as it arrives and feeds
//! the in-order accumulator, so the reduced result does not depend on the
//! number of workers.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use exciton_core::dynamics::{CurveKind, Provenance, SurvivalCurve};
use exciton_core::ensemble::{realization_system, run_realization, trapped_spectrum, EnsembleAccumulator, EnsembleConfig, EnsembleResult, RealizationOutput};
use exciton_core::Error;

use crate::config::{RunConfig, SweepPoint};
use crate::csvio::{self, write_atomic};
use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
const CONFIG_MARKER: &str = "[config]";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub workers: usize,
    pub resume: bool,
    /// Forces exact mode on every point.
    pub exact: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { workers: default_workers(), resume: false, exact: false }
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PointStatus {
    /// Outputs were already complete; nothing was touched.
    UpToDate,
    /// Computed, `resumed` realizations came from checkpoints.
    Computed { resumed: usize },
}

#[derive(Debug, Clone)]
pub struct PointOutcome {
    pub dir: PathBuf,
    pub point: SweepPoint,
    pub status: PointStatus,
    pub result: Option<EnsembleResult>,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn stage_of(e: &Error) -> &'static str {
    match e {
        Error::GeometryInfeasible { .. } | Error::InvalidGeometry { .. } => "geometry",
        Error::DegenerateGeometry(..) => "coupling matrix",
        Error::ConvergenceFailure(_) | Error::NonPositiveDecayRate { .. } => "decomposition",
        Error::Realization { source, .. } => stage_of(source),
        _ => "realization",
    }
}

fn realization_error(config: &EnsembleConfig, index: usize, e: Error) -> CliError {
    let stage = stage_of(&e);
    let source = match e {
        Error::Realization { source, .. } => *source,
        other => other,
    };
    CliError::Realization { n: config.n_nodes, gamma: config.gamma, index, stage, source }
}

/// Runs every point of the configuration file.
pub fn run_config_file(config_path: &Path, out: &Path, opts: RunOptions) -> CliResult<Vec<PointOutcome>> {
    let config = RunConfig::from_file(config_path)?;
    run_config(&config, &config_path.display().to_string(), out, opts)
}

pub fn run_config(config: &RunConfig, origin: &str, out: &Path, opts: RunOptions) -> CliResult<Vec<PointOutcome>> {
    if opts.workers == 0 {
        return Err(CliError::Validation("--workers must be at least 1".into()));
    }
    let mut points = config.points();
    if opts.exact {
        for p in &mut points {
            p.ensemble.exact_mode = true;
        }
    }
    let mut seen = std::collections::HashSet::new();
    for p in &points {
        if !seen.insert(p.dir_name()) {
            return Err(CliError::Validation(format!("sweep point {} appears twice", p.dir_name())));
        }
    }
    // Validate every existing directory before touching anything.
    let mut states = Vec::with_capacity(points.len());
    for p in &points {
        states.push(inspect(&out.join(p.dir_name()), p, opts.resume)?);
    }
    if states.iter().all(|s| *s == DirState::Complete) {
        return Ok(points
            .into_iter()
            .map(|p| PointOutcome { dir: out.join(p.dir_name()), point: p, status: PointStatus::UpToDate, result: None })
            .collect());
    }
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let started = unix_now();
    let manifest = |finished: Option<u64>| {
        let mut s = format!("tool_version = {VERSION}\nconfig = {origin}\noutput = {}\nstarted_unix = {started}\n", out.display());
        if let Some(f) = finished {
            s.push_str(&format!("finished_unix = {f}\n"));
        }
        for p in &points {
            s.push_str(&format!("point = {}\n", p.dir_name()));
        }
        s
    };
    write_atomic(&out.join("manifest"), &manifest(None))?;
    let mut outcomes = Vec::with_capacity(points.len());
    for (p, state) in points.iter().zip(states) {
        let dir = out.join(p.dir_name());
        if state == DirState::Complete {
            outcomes.push(PointOutcome { dir, point: p.clone(), status: PointStatus::UpToDate, result: None });
            continue;
        }
        let (result, resumed) = run_point(p, &dir, opts.workers)?;
        outcomes.push(PointOutcome { dir, point: p.clone(), status: PointStatus::Computed { resumed }, result: Some(result) });
    }
    write_atomic(&out.join("manifest"), &manifest(Some(unix_now())))?;
    Ok(outcomes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DirState {
    Fresh,
    Partial,
    Complete,
}

fn metadata_echo(text: &str) -> Option<&str> {
    text.split_once(&format!("{CONFIG_MARKER}\n")).map(|(_, echo)| echo)
}

fn inspect(dir: &Path, point: &SweepPoint, resume: bool) -> CliResult<DirState> {
    if !dir.exists() {
        return Ok(DirState::Fresh);
    }
    let meta_path = dir.join("metadata");
    let Ok(meta) = fs::read_to_string(&meta_path) else {
        if fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?.next().is_none() {
            return Ok(DirState::Fresh);
        }
        return Err(CliError::Validation(format!("{} exists but holds no metadata", dir.display())));
    };
    if metadata_echo(&meta) != Some(point.echo().as_str()) {
        return Err(CliError::Validation(format!("{} was produced by a different configuration", dir.display())));
    }
    let complete = meta.lines().any(|l| l == "status = complete")
        && required_outputs(point).iter().all(|f| dir.join(f).exists());
    if complete {
        return Ok(DirState::Complete);
    }
    if !resume {
        return Err(CliError::Validation(format!("{} holds an unfinished run; pass --resume to continue it", dir.display())));
    }
    Ok(DirState::Partial)
}

fn required_outputs(point: &SweepPoint) -> Vec<&'static str> {
    let mut v = vec!["survival_avg.csv", "gamma_avg.csv"];
    if point.ensemble.exact_mode {
        v.push("survival_exact_avg.csv");
    }
    if point.ensemble.realizations == 1 {
        v.extend(["nodes.csv", "spectrum.csv", "survival.csv"]);
    }
    v
}

fn checkpoint_path(dir: &Path, r: usize) -> PathBuf {
    dir.join("checkpoints").join(format!("real_{r}.csv"))
}

fn exact_checkpoint_path(dir: &Path, r: usize) -> PathBuf {
    dir.join("checkpoints").join(format!("real_{r}_exact.csv"))
}

fn load_checkpoint(config: &EnsembleConfig, dir: &Path, r: usize) -> CliResult<Option<RealizationOutput>> {
    let path = checkpoint_path(dir, r);
    if !path.exists() {
        return Ok(None);
    }
    let exact_path = exact_checkpoint_path(dir, r);
    if config.exact_mode && !exact_path.exists() {
        return Ok(None);
    }
    let (gamma_r, seed, resample, rates) = csvio::read_checkpoint(&path)?;
    if seed != config.seed_of(r) {
        return Err(CliError::Malformed { path, message: format!("seed {seed} does not belong to realization {r}") });
    }
    let mut out = RealizationOutput::from_rates(config, r, gamma_r, rates, resample)
        .map_err(|e| CliError::Malformed { path: path.clone(), message: e.to_string() })?;
    if config.exact_mode {
        let t = csvio::read_table(&exact_path, csvio::SURVIVAL_HEADER)?;
        let grid = config.time_grid()?;
        if t.columns[2].len() != grid.len() {
            return Err(CliError::Malformed { path: exact_path, message: "grid length differs from the configuration".into() });
        }
        let provenance = Provenance { n_nodes: config.n_nodes, gamma: config.gamma, seed: Some(seed), realizations: 1 };
        out.exact = Some(SurvivalCurve { grid, values: t.columns[2].clone(), kind: CurveKind::Exact, provenance: Some(provenance) });
    }
    Ok(Some(out))
}

fn save_checkpoint(dir: &Path, out: &RealizationOutput) -> CliResult<()> {
    write_atomic(&checkpoint_path(dir, out.index), &csvio::checkpoint_csv(out))?;
    if let Some(exact) = &out.exact {
        write_atomic(&exact_checkpoint_path(dir, out.index), &csvio::survival_csv(exact))?;
    }
    Ok(())
}

fn metadata_text(point: &SweepPoint, status: &str, extra: &[(String, String)]) -> String {
    let mut s = format!("tool_version = {VERSION}\nstatus = {status}\n");
    for (k, v) in extra {
        s.push_str(&format!("{k} = {v}\n"));
    }
    s.push_str(CONFIG_MARKER);
    s.push('\n');
    s.push_str(&point.echo());
    s
}

/// Computes one point into `dir`, resuming from any checkpoints there.
pub fn run_point(point: &SweepPoint, dir: &Path, workers: usize) -> CliResult<(EnsembleResult, usize)> {
    let config = &point.ensemble;
    config.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    let ckpt_dir = dir.join("checkpoints");
    fs::create_dir_all(&ckpt_dir).map_err(|e| CliError::io(&ckpt_dir, e))?;
    let started = unix_now();
    let clock = Instant::now();
    write_atomic(&dir.join("metadata"), &metadata_text(point, "running", &[("started_unix".into(), started.to_string())]))?;

    let mut loaded = BTreeMap::new();
    for r in 1..=config.realizations {
        if let Some(out) = load_checkpoint(config, dir, r)? {
            loaded.insert(r, out);
        }
    }
    let resumed = loaded.len();
    let todo: Vec<usize> = (1..=config.realizations).filter(|r| !loaded.contains_key(r)).collect();

    let mut acc = EnsembleAccumulator::new(config)?;
    let mut pending = loaded;
    let drain = |pending: &mut BTreeMap<usize, RealizationOutput>, acc: &mut EnsembleAccumulator| -> CliResult<()> {
        while let Some(out) = pending.remove(&acc.next_index()) {
            acc.push(out)?;
        }
        Ok(())
    };
    drain(&mut pending, &mut acc)?;

    if !todo.is_empty() {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CliError::Validation(format!("cannot start {workers} workers: {e}")))?;
        let next = AtomicUsize::new(0);
        let cancel = AtomicBool::new(false);
        let (tx, rx) = mpsc::sync_channel::<(usize, exciton_core::Result<RealizationOutput>)>(workers);
        let mut failure: Option<CliError> = None;
        std::thread::scope(|s| {
            let (todo, next, cancel) = (&todo, &next, &cancel);
            s.spawn(move || {
                pool.scope(|ps| {
                    for _ in 0..workers {
                        let tx = tx.clone();
                        ps.spawn(move |_| loop {
                            if cancel.load(Ordering::Relaxed) {
                                break;
                            }
                            let i = next.fetch_add(1, Ordering::Relaxed);
                            let Some(&r) = todo.get(i) else { break };
                            if tx.send((r, run_realization(config, r))).is_err() {
                                break;
                            }
                        });
                    }
                    drop(tx);
                });
            });
            for (r, res) in rx.iter() {
                if failure.is_some() {
                    continue;
                }
                let step = match res {
                    Ok(out) => save_checkpoint(dir, &out).and_then(|_| {
                        pending.insert(r, out);
                        drain(&mut pending, &mut acc)
                    }),
                    Err(e) => Err(realization_error(config, r, e)),
                };
                if let Err(e) = step {
                    cancel.store(true, Ordering::Relaxed);
                    failure = Some(e);
                }
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
    }
    let result = acc.finish()?;
    write_outputs(point, dir, &result)?;
    let extra = [
        ("started_unix".to_string(), started.to_string()),
        ("finished_unix".to_string(), unix_now().to_string()),
        ("wall_time_s".to_string(), format!("{:.3}", clock.elapsed().as_secs_f64())),
        ("workers".to_string(), workers.to_string()),
        ("realizations_resumed".to_string(), resumed.to_string()),
        ("mean_gamma_r".to_string(), csvio::fmt(result.mean_gamma_r)),
        ("resample_total".to_string(), result.resample_counts.iter().sum::<usize>().to_string()),
        ("resample_max".to_string(), result.resample_counts.iter().max().copied().unwrap_or(0).to_string()),
    ];
    write_atomic(&dir.join("metadata"), &metadata_text(point, "complete", &extra))?;
    Ok((result, resumed))
}

fn write_outputs(point: &SweepPoint, dir: &Path, result: &EnsembleResult) -> CliResult<()> {
    let config = &point.ensemble;
    write_atomic(&dir.join("survival_avg.csv"), &csvio::survival_avg_csv(result))?;
    write_atomic(&dir.join("gamma_avg.csv"), &csvio::gamma_avg_csv(&result.avg_sorted_rates))?;
    if let Some(exact) = &result.avg_exact {
        write_atomic(&dir.join("survival_exact_avg.csv"), &csvio::survival_csv(exact))?;
    }
    if config.realizations == 1 {
        let (geometry, h0, spec0, trap) = realization_system(config, 1).map_err(|e| realization_error(config, 1, e))?;
        let spectrum = trapped_spectrum(&h0, &spec0, &trap).map_err(|e| realization_error(config, 1, e))?;
        // Spectrum rows ordered by decay rate, matching the sorted rate lists.
        write_atomic(&dir.join("nodes.csv"), &csvio::nodes_csv(&geometry))?;
        write_atomic(&dir.join("spectrum.csv"), &csvio::spectrum_csv(spectrum.real_parts(), spectrum.decay_rates()))?;
        write_atomic(&dir.join("survival.csv"), &csvio::survival_csv(&result.avg_survival))?;
    }
    Ok(())
}
