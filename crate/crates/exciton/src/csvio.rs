//! CSV artifacts. Floats are written with 17 significant digits so that
//! reading a file back yields the same bits. Lines starting with `#` carry
//! metadata. Node and mode indices in files are 1-based.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use exciton_core::analysis::{DensityEstimate, PowerLawFit, ScalingReport};
use exciton_core::dynamics::SurvivalCurve;
use exciton_core::ensemble::{EnsembleResult, RealizationOutput};
use exciton_core::network::NodeConfiguration;

use crate::error::{CliError, CliResult};

pub const NODES_HEADER: &str = "node_index,x1,x2,x3,is_trap";
pub const SPECTRUM_HEADER: &str = "l,epsilon,gamma";
pub const SURVIVAL_HEADER: &str = "t,tau,pi";
pub const SURVIVAL_AVG_HEADER: &str = "t,tau,pi_mean,pi_min,pi_max,jensen_lb";
pub const GAMMA_AVG_HEADER: &str = "l,l_over_n,gamma_mean";
pub const CHECKPOINT_HEADER: &str = "l,gamma";
pub const FITS_HEADER: &str = "n,gamma,eta,eta_err,window_lo,window_hi,residual";
pub const SCALING_HEADER: &str = "gamma,eta0,mu";
pub const DENSITY_HEADER: &str = "gamma_bin,rho";

/// Float with 17 significant digits.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes through a temporary file so readers never see partial output.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let tmp = tmp_path(path);
    fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

fn table(header: &str, rows: impl Iterator<Item = String>) -> String {
    let mut s = String::with_capacity(4096);
    s.push_str(header);
    s.push('\n');
    for row in rows {
        s.push_str(&row);
        s.push('\n');
    }
    s
}

pub fn nodes_csv(config: &NodeConfiguration) -> String {
    table(
        NODES_HEADER,
        config.coords().iter().enumerate().map(|(j, c)| {
            format!("{},{},{},{},{}", j + 1, fmt(c[0]), fmt(c[1]), fmt(c[2]), u8::from(config.is_trap(j)))
        }),
    )
}

pub fn spectrum_csv(real_parts: &[f64], rates: &[f64]) -> String {
    table(SPECTRUM_HEADER, real_parts.iter().zip(rates).enumerate().map(|(l, (e, g))| format!("{},{},{}", l + 1, fmt(*e), fmt(*g))))
}

pub fn survival_csv(curve: &SurvivalCurve) -> String {
    let g = &curve.grid;
    table(
        SURVIVAL_HEADER,
        (0..g.len()).map(|i| format!("{},{},{}", fmt(g.times()[i]), fmt(g.rescaled()[i]), fmt(curve.values[i]))),
    )
}

pub fn survival_avg_csv(result: &EnsembleResult) -> String {
    let g = &result.avg_survival.grid;
    table(
        SURVIVAL_AVG_HEADER,
        (0..g.len()).map(|i| {
            format!(
                "{},{},{},{},{},{}",
                fmt(g.times()[i]),
                fmt(g.rescaled()[i]),
                fmt(result.avg_survival.values[i]),
                fmt(result.min_survival[i]),
                fmt(result.max_survival[i]),
                fmt(result.jensen_curve.values[i])
            )
        }),
    )
}

pub fn gamma_avg_csv(rates: &[f64]) -> String {
    let n = rates.len() as f64;
    table(GAMMA_AVG_HEADER, rates.iter().enumerate().map(|(l, g)| format!("{},{},{}", l + 1, fmt((l + 1) as f64 / n), fmt(*g))))
}

pub fn checkpoint_csv(out: &RealizationOutput) -> String {
    let mut s = format!("# gamma_r={} seed={}\n# resample_count={}\n", fmt(out.gamma_r), out.seed, out.resample_count);
    s.push_str(&table(CHECKPOINT_HEADER, out.rates.iter().enumerate().map(|(l, g)| format!("{},{}", l + 1, fmt(*g)))));
    s
}

pub fn fits_csv(rows: &[(usize, f64, PowerLawFit)]) -> String {
    table(
        FITS_HEADER,
        rows.iter().map(|(n, gamma, f)| {
            format!("{},{},{},{},{},{},{}", n, fmt(*gamma), fmt(f.exponent), fmt(f.eta_err), fmt(f.window.0), fmt(f.window.1), fmt(f.residual))
        }),
    )
}

pub fn scaling_csv(reports: &[ScalingReport]) -> String {
    table(SCALING_HEADER, reports.iter().map(|r| format!("{},{},{}", fmt(r.gamma), fmt(r.eta0), fmt(r.mu))))
}

pub fn density_csv(d: &DensityEstimate) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# bins={} mass={}", d.n_bins(), fmt(d.total_mass()));
    s.push_str(&table(DENSITY_HEADER, d.centers.iter().zip(&d.densities).map(|(c, r)| format!("{},{}", fmt(*c), fmt(*r)))));
    s
}

/// A numeric table with its `#` metadata lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub comments: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

/// Reads a numeric CSV whose header must equal `header`.
pub fn read_table(path: &Path, header: &str) -> CliResult<Table> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::MissingArtifacts(path.to_path_buf())
        } else {
            CliError::io(path, e)
        }
    })?;
    parse_table(&text, header).map_err(|message| CliError::Malformed { path: path.to_path_buf(), message })
}

pub fn parse_table(text: &str, header: &str) -> Result<Table, String> {
    let comments = text.lines().take_while(|l| l.starts_with('#')).map(|l| l.trim_start_matches('#').trim().to_string()).collect();
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let found = reader.headers().map_err(|e| e.to_string())?.iter().collect::<Vec<_>>().join(",");
    if found != header {
        return Err(format!("expected header `{header}`, found `{found}`"));
    }
    let width = header.split(',').count();
    let mut columns = vec![Vec::new(); width];
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| format!("row {}: `{field}` is not a number", i + 2))?;
            columns[c].push(v);
        }
    }
    Ok(Table { comments, columns })
}

/// Checkpoint contents: `(Γ_r, seed, resample count, rates)`.
pub fn read_checkpoint(path: &Path) -> CliResult<(f64, u64, usize, Vec<f64>)> {
    let t = read_table(path, CHECKPOINT_HEADER)?;
    let bad = |m: &str| CliError::Malformed { path: path.to_path_buf(), message: m.to_string() };
    let mut gamma_r = None;
    let mut seed = None;
    let mut resample = 0;
    for c in &t.comments {
        for token in c.split_whitespace() {
            match token.split_once('=') {
                Some(("gamma_r", v)) => gamma_r = v.parse::<f64>().ok(),
                Some(("seed", v)) => seed = v.parse::<u64>().ok(),
                Some(("resample_count", v)) => resample = v.parse::<usize>().map_err(|_| bad("bad resample_count"))?,
                _ => {}
            }
        }
    }
    let gamma_r = gamma_r.ok_or_else(|| bad("missing gamma_r"))?;
    let seed = seed.ok_or_else(|| bad("missing seed"))?;
    Ok((gamma_r, seed, resample, t.columns[1].clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5e-7, f64::MIN_POSITIVE, 0.0] {
            assert_eq!(fmt(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(fmt(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn tables_parse_back() {
        let text = gamma_avg_csv(&[1e-3, 2.5e-2]);
        let t = parse_table(&text, GAMMA_AVG_HEADER).unwrap();
        assert_eq!(t.columns[2], vec![1e-3, 2.5e-2]);
        assert_eq!(t.columns[1], vec![0.5, 1.0]);
        assert!(parse_table(&text, SURVIVAL_HEADER).is_err());
    }
}
