//! Post-processing of finished run directories.

use std::fs;
use std::path::{Path, PathBuf};

use exciton_core::analysis::{
    density_slope, estimate_rate_density, fit_with, laplace_consistency, size_scaling, DensityEstimate, FitWindow, LineFit, PowerLawFit,
    ScalingReport,
};
use exciton_core::dynamics::{CurveKind, SurvivalCurve, TimeGrid};

use crate::config::parse_window;
use crate::csvio::{self, write_atomic};
use crate::error::{CliError, CliResult};

/// Ensemble outputs of one sweep point read back from disk.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub n: usize,
    pub gamma: f64,
    pub realizations: usize,
    pub fit_window: FitWindow,
    pub survival: SurvivalCurve,
    pub jensen: SurvivalCurve,
    pub rates: Vec<f64>,
}

impl RunArtifacts {
    pub fn label(&self) -> String {
        format!("n{}_gamma{:e}", self.n, self.gamma)
    }
}

fn metadata_value<'a>(meta: &'a str, key: &str) -> Option<&'a str> {
    let (_, echo) = meta.split_once("[config]\n")?;
    echo.lines().find_map(|l| l.split_once('=').filter(|(k, _)| k.trim() == key).map(|(_, v)| v.trim()))
}

pub fn load_run(dir: &Path) -> CliResult<RunArtifacts> {
    let meta_path = dir.join("metadata");
    let meta = fs::read_to_string(&meta_path).map_err(|_| CliError::MissingArtifacts(meta_path.clone()))?;
    let bad = |m: String| CliError::Malformed { path: meta_path.clone(), message: m };
    let get = |k: &str| metadata_value(&meta, k).ok_or_else(|| bad(format!("missing `{k}`")));
    let n: usize = get("n")?.parse().map_err(|_| bad("bad n".into()))?;
    let gamma: f64 = get("gamma")?.parse().map_err(|_| bad("bad gamma".into()))?;
    let realizations: usize = get("r")?.parse().map_err(|_| bad("bad r".into()))?;
    let fit_window = parse_window(get("fit_window")?).map_err(bad)?;

    let surv_path = dir.join("survival_avg.csv");
    let t = csvio::read_table(&surv_path, csvio::SURVIVAL_AVG_HEADER)?;
    let grid = TimeGrid::from_parts(t.columns[0].clone(), t.columns[1].clone())
        .map_err(|e| CliError::Malformed { path: surv_path.clone(), message: e.to_string() })?;
    let survival = SurvivalCurve { grid: grid.clone(), values: t.columns[2].clone(), kind: CurveKind::Spectral, provenance: None };
    let jensen = SurvivalCurve { grid, values: t.columns[5].clone(), kind: CurveKind::JensenBound, provenance: None };
    let rates_path = dir.join("gamma_avg.csv");
    let rates = csvio::read_table(&rates_path, csvio::GAMMA_AVG_HEADER)?.columns[2].clone();
    if rates.len() != n {
        return Err(CliError::Malformed { path: rates_path, message: format!("{} rates for n = {n}", rates.len()) });
    }
    Ok(RunArtifacts { dir: dir.to_path_buf(), n, gamma, realizations, fit_window, survival, jensen, rates })
}

/// Point directories under each path: the path itself if it holds
/// `survival_avg.csv`, otherwise its immediate subdirectories that do.
pub fn discover(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.join("survival_avg.csv").exists() {
            out.push(p.clone());
            continue;
        }
        let entries = fs::read_dir(p).map_err(|_| CliError::MissingArtifacts(p.join("survival_avg.csv")))?;
        let mut found: Vec<PathBuf> =
            entries.filter_map(|e| e.ok()).map(|e| e.path()).filter(|d| d.join("survival_avg.csv").exists()).collect();
        if found.is_empty() {
            return Err(CliError::MissingArtifacts(p.join("survival_avg.csv")));
        }
        found.sort();
        out.extend(found);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct FitRow {
    pub label: String,
    pub n: usize,
    pub gamma: f64,
    pub requested: FitWindow,
    pub fit: PowerLawFit,
}

#[derive(Debug, Clone)]
pub struct DensityRow {
    pub label: String,
    pub n: usize,
    pub gamma: f64,
    pub density: DensityEstimate,
    pub slope: LineFit,
    /// Exponent of the primary fit of the same run.
    pub eta: f64,
    /// Laplace transform of the density against the Jensen curve.
    pub laplace_deviation: f64,
    pub laplace_window: (f64, f64),
}

#[derive(Debug, Clone, Default)]
pub struct AnalysisReport {
    pub fits: Vec<FitRow>,
    pub scaling: Vec<ScalingReport>,
    pub densities: Vec<DensityRow>,
    pub notices: Vec<String>,
}

/// Fits each run on every window (the run's own `fit_window` when `windows`
/// is empty). The first window feeds the size scaling and the density link.
pub fn analyze_runs(runs: &[RunArtifacts], windows: &[FitWindow]) -> CliResult<AnalysisReport> {
    let mut report = AnalysisReport::default();
    let mut primary: Vec<(usize, f64, f64)> = Vec::new();
    for run in runs {
        let list: Vec<FitWindow> = if windows.is_empty() { vec![run.fit_window] } else { windows.to_vec() };
        for (i, &w) in list.iter().enumerate() {
            let fit = fit_with(&run.survival, w).map_err(|e| CliError::Validation(format!("{}: fit failed: {e}", run.label())))?;
            if i == 0 {
                primary.push((run.n, run.gamma, fit.exponent));
                let density = estimate_rate_density(&run.rates)?;
                let slope = density_slope(&density, None)?;
                let laplace_deviation = laplace_consistency(&density, &run.jensen, fit.window)?;
                report.densities.push(DensityRow {
                    label: run.label(),
                    n: run.n,
                    gamma: run.gamma,
                    density,
                    slope,
                    eta: fit.exponent,
                    laplace_deviation,
                    laplace_window: fit.window,
                });
            }
            report.fits.push(FitRow { label: run.label(), n: run.n, gamma: run.gamma, requested: w, fit });
        }
    }
    let mut gammas: Vec<f64> = primary.iter().map(|p| p.1).collect();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    for g in gammas {
        let pts: Vec<(usize, f64)> = primary.iter().filter(|p| p.1 == g).map(|p| (p.0, p.2)).collect();
        match size_scaling(g, &pts) {
            Ok(r) => report.scaling.push(r),
            Err(_) => report.notices.push(format!("gamma = {g:e}: fewer than two system sizes, scaling skipped")),
        }
    }
    Ok(report)
}

/// Writes `fits.csv`, `scaling.csv` (when any), `density_fits.csv`,
/// `laplace.csv` and one `<run>/density.csv` per run.
pub fn write_report(report: &AnalysisReport, out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let rows: Vec<(usize, f64, PowerLawFit)> = report.fits.iter().map(|r| (r.n, r.gamma, r.fit)).collect();
    write_atomic(&out.join("fits.csv"), &csvio::fits_csv(&rows))?;
    if !report.scaling.is_empty() {
        write_atomic(&out.join("scaling.csv"), &csvio::scaling_csv(&report.scaling))?;
    }
    let mut dens = String::from("n,gamma,eta,slope,slope_err,eta_minus_one,n_bins\n");
    let mut lap = String::from("n,gamma,window_lo,window_hi,max_rel_dev\n");
    for d in &report.densities {
        let sub = out.join(&d.label);
        fs::create_dir_all(&sub).map_err(|e| CliError::io(&sub, e))?;
        write_atomic(&sub.join("density.csv"), &csvio::density_csv(&d.density))?;
        dens.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            d.n,
            csvio::fmt(d.gamma),
            csvio::fmt(d.eta),
            csvio::fmt(d.slope.slope),
            csvio::fmt(d.slope.slope_err),
            csvio::fmt(d.eta - 1.0),
            d.density.n_bins()
        ));
        lap.push_str(&format!(
            "{},{},{},{},{}\n",
            d.n,
            csvio::fmt(d.gamma),
            csvio::fmt(d.laplace_window.0),
            csvio::fmt(d.laplace_window.1),
            csvio::fmt(d.laplace_deviation)
        ));
    }
    write_atomic(&out.join("density_fits.csv"), &dens)?;
    write_atomic(&out.join("laplace.csv"), &lap)?;
    Ok(())
}

pub fn analyze_dirs(paths: &[PathBuf], windows: &[FitWindow], out: &Path) -> CliResult<AnalysisReport> {
    let runs = discover(paths)?.iter().map(|d| load_run(d)).collect::<CliResult<Vec<_>>>()?;
    let report = analyze_runs(&runs, windows)?;
    write_report(&report, out)?;
    Ok(report)
}
