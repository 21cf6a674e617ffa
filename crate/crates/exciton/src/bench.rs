//! The chain control as a command.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use exciton_core::chain::{chain_benchmark, Check, ChainReport, CHAIN_GRID};
use exciton_core::dynamics::{mean_survival_spectral, TimeGrid};

use crate::csvio::{self, write_atomic};
use crate::error::{CliError, CliResult};

fn line(name: &str, c: &Check) -> String {
    format!(
        "{name:<16} {:>9.4}  target {:>5.2} ± {:<5.2} {}\n",
        c.value,
        c.target,
        c.tolerance,
        if c.passed() { "PASS" } else { "FAIL" }
    )
}

/// Text report of a chain benchmark.
pub fn render(report: &ChainReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "chain control: n = {}, gamma = {:e}", report.n, report.gamma);
    if report.small_n {
        let _ = writeln!(s, "note: small n, tolerances doubled");
    }
    let _ = writeln!(
        s,
        "fit window (tau): {:.3e} .. {:.3e}, {} points, residual {:.2e}",
        report.fit.window.0, report.fit.window.1, report.fit.n_points, report.fit.residual
    );
    s.push_str(&line("eta", &report.eta));
    s.push_str(&line("gamma ~ l^p", &report.rate_exponent));
    s.push_str(&line("density slope", &report.density_slope));
    let _ = writeln!(s, "overall: {}", if report.passed() { "PASS" } else { "FAIL" });
    s
}

/// Runs the benchmark; with `out`, also writes the sorted rates and the
/// survival curve there.
pub fn run_chain_bench(n: usize, gamma: f64, out: Option<&Path>) -> CliResult<ChainReport> {
    if n < exciton_core::chain::MIN_CHAIN_NODES {
        return Err(CliError::Validation(format!("chain-bench needs n >= {}, got {n}", exciton_core::chain::MIN_CHAIN_NODES)));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(CliError::Validation("gamma must be positive".into()));
    }
    let report = chain_benchmark(n, gamma)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        write_atomic(&dir.join("gamma_sorted.csv"), &csvio::gamma_avg_csv(&report.rates))?;
        let grid = TimeGrid::log_rescaled(&CHAIN_GRID, n, gamma)?;
        let curve = mean_survival_spectral(&report.rates, &grid)?;
        write_atomic(&dir.join("survival.csv"), &csvio::survival_csv(&curve))?;
        write_atomic(&dir.join("report.txt"), &render(&report))?;
    }
    Ok(report)
}
