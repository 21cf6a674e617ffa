//! Line-oriented run configuration.
//!
//! ```text
//! # global defaults
//! geometry = disordered3d
//! seed = 7
//! fit_window = 1e-3:1e-2
//!
//! [small]
//! n = 100
//! gamma = 1, 1e-6
//! r = 500
//!
//! [large]
//! n = 1000
//! gamma = 1, 1e-6
//! r = 100
//! ```
//!
//! Keys before the first section are defaults. Every section is a sweep
//! block expanded over the cartesian product of its `n` and `gamma` lists;
//! a file without sections is one block. Unknown keys are errors.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use exciton_core::analysis::FitWindow;
use exciton_core::dynamics::GridSpec;
use exciton_core::ensemble::EnsembleConfig;
use exciton_core::hamiltonian::DEFAULT_SIGMA;
use exciton_core::network::{GeometryKind, DEFAULT_DELTA_MIN};

use crate::error::{CliError, CliResult};

pub const KEYS: [&str; 12] = [
    "geometry",
    "n",
    "r",
    "gamma",
    "sigma",
    "seed",
    "tau_min",
    "tau_max",
    "points_per_decade",
    "delta_min",
    "exact_mode",
    "fit_window",
];

/// Settings of one block after applying defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub label: String,
    pub geometry: GeometryKind,
    pub n: Vec<usize>,
    pub r: usize,
    pub gamma: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
    pub grid: GridSpec,
    pub delta_min: f64,
    pub exact_mode: bool,
    pub fit_window: FitWindow,
}

/// One `(N, Γ)` point of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub label: String,
    pub ensemble: EnsembleConfig,
    pub fit_window: FitWindow,
}

impl SweepPoint {
    /// Directory name of the point inside the run directory.
    pub fn dir_name(&self) -> String {
        format!("n{}_gamma{:e}", self.ensemble.n_nodes, self.ensemble.gamma)
    }

    /// `key = value` echo of every setting, stable across runs.
    pub fn echo(&self) -> String {
        let c = &self.ensemble;
        let mut s = String::new();
        let _ = writeln!(s, "label = {}", self.label);
        let _ = writeln!(s, "geometry = {}", c.geometry.as_str());
        let _ = writeln!(s, "n = {}", c.n_nodes);
        let _ = writeln!(s, "r = {}", c.realizations);
        let _ = writeln!(s, "gamma = {:e}", c.gamma);
        let _ = writeln!(s, "sigma = {:e}", c.sigma);
        let _ = writeln!(s, "seed = {}", c.master_seed);
        let _ = writeln!(s, "tau_min = {:e}", c.grid.tau_min);
        let _ = writeln!(s, "tau_max = {:e}", c.grid.tau_max);
        let _ = writeln!(s, "points_per_decade = {}", c.grid.points_per_decade);
        let _ = writeln!(s, "delta_min = {:e}", c.delta_min);
        let _ = writeln!(s, "exact_mode = {}", c.exact_mode);
        let _ = writeln!(s, "fit_window = {}", format_window(self.fit_window));
        s
    }
}

pub fn format_window(w: FitWindow) -> String {
    match w {
        FitWindow::Auto => "auto".to_string(),
        FitWindow::Fixed(lo, hi) => format!("{lo:e}:{hi:e}"),
    }
}

/// Parses `lo:hi` or `auto`.
pub fn parse_window(s: &str) -> Result<FitWindow, String> {
    let s = s.trim();
    if s == "auto" {
        return Ok(FitWindow::Auto);
    }
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected `lo:hi` or `auto`, got `{s}`"))?;
    let lo = parse_f64(lo)?;
    let hi = parse_f64(hi)?;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(format!("window `{s}` needs 0 < lo < hi"));
    }
    Ok(FitWindow::Fixed(lo, hi))
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = f64::from_str(s).map_err(|_| format!("`{s}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(v)
}

fn parse_int<T: FromStr>(s: &str) -> Result<T, String> {
    let s = s.trim();
    T::from_str(s).map_err(|_| format!("`{s}` is not a non-negative integer"))
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let parts: Vec<&str> = s.split(|c: char| c == ',' || c.is_whitespace()).filter(|p| !p.is_empty()).collect();
    if parts.is_empty() {
        return Err("empty list".to_string());
    }
    parts.into_iter().map(item).collect()
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("`{other}` is not a boolean")),
    }
}

#[derive(Debug, Clone, Default)]
struct RawBlock {
    label: String,
    header_line: usize,
    entries: Vec<(String, String, usize)>,
}

impl RawBlock {
    fn get(&self, key: &str) -> Option<&(String, String, usize)> {
        self.entries.iter().find(|e| e.0 == key)
    }
}

/// A parsed configuration: one or more blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub blocks: Vec<Block>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses configuration text; `origin` is used in messages.
    pub fn parse(text: &str, origin: &str) -> CliResult<Self> {
        let err = |line: usize, message: String| CliError::Config { path: origin.to_string(), line, message };
        let mut defaults = RawBlock::default();
        let mut sections: Vec<RawBlock> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let label = rest.strip_suffix(']').ok_or_else(|| err(line_no, "unterminated section header".into()))?.trim();
                if label.is_empty() {
                    return Err(err(line_no, "empty section name".into()));
                }
                if sections.iter().any(|s| s.label == label) {
                    return Err(err(line_no, format!("duplicate section `{label}`")));
                }
                sections.push(RawBlock { label: label.to_string(), header_line: line_no, entries: Vec::new() });
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| err(line_no, format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(CliError::UnknownKey { path: origin.to_string(), line: line_no, key: key.to_string() });
            }
            let target = sections.last_mut().unwrap_or(&mut defaults);
            if target.get(key).is_some() {
                return Err(err(line_no, format!("duplicate key `{key}`")));
            }
            target.entries.push((key.to_string(), value.trim().to_string(), line_no));
        }
        if sections.is_empty() {
            defaults.label = "default".to_string();
            sections.push(defaults.clone());
            defaults = RawBlock::default();
        }
        let mut blocks = Vec::with_capacity(sections.len());
        for sec in &sections {
            blocks.push(resolve(sec, &defaults).map_err(|(line, m)| err(line, m))?);
        }
        Ok(Self { blocks })
    }

    /// All sweep points in file order, `N` before `Γ`.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for b in &self.blocks {
            for &n in &b.n {
                for &gamma in &b.gamma {
                    let mut e = EnsembleConfig::new(n, b.r, gamma);
                    e.sigma = b.sigma;
                    e.geometry = b.geometry;
                    e.master_seed = b.seed;
                    e.grid = b.grid;
                    e.delta_min = b.delta_min;
                    e.exact_mode = b.exact_mode;
                    out.push(SweepPoint { label: b.label.clone(), ensemble: e, fit_window: b.fit_window });
                }
            }
        }
        out
    }
}

fn resolve(sec: &RawBlock, defaults: &RawBlock) -> Result<Block, (usize, String)> {
    let mut merged: Vec<(String, String, usize)> = sec.entries.clone();
    for e in &defaults.entries {
        if sec.get(&e.0).is_none() {
            merged.push(e.clone());
        }
    }
    fn field<T>(
        merged: &[(String, String, usize)],
        key: &str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, (usize, String)> {
        match merged.iter().find(|e| e.0 == key) {
            None => Ok(None),
            Some((_, v, line)) => parse(v).map(Some).map_err(|m| (*line, format!("{key}: {m}"))),
        }
    }
    let lk = merged.as_slice();
    let missing = |key: &str| (sec.header_line.max(1), format!("missing required key `{key}` in block `{}`", sec.label));

    let geometry = field(lk, "geometry", |v| GeometryKind::from_str(v.trim()).map_err(|_| format!("unknown geometry `{v}`")))?
        .unwrap_or(GeometryKind::Disordered3d);
    let n = field(lk, "n", |v| parse_list(v, parse_int::<usize>))?.ok_or_else(|| missing("n"))?;
    let r = field(lk, "r", parse_int::<usize>)?.ok_or_else(|| missing("r"))?;
    let gamma = field(lk, "gamma", |v| parse_list(v, parse_f64))?.ok_or_else(|| missing("gamma"))?;
    let sigma = field(lk, "sigma", parse_f64)?.unwrap_or(DEFAULT_SIGMA);
    let seed = field(lk, "seed", parse_int::<u64>)?.unwrap_or(0);
    let defaults_grid = GridSpec::default();
    let grid = GridSpec {
        tau_min: field(lk, "tau_min", parse_f64)?.unwrap_or(defaults_grid.tau_min),
        tau_max: field(lk, "tau_max", parse_f64)?.unwrap_or(defaults_grid.tau_max),
        points_per_decade: field(lk, "points_per_decade", parse_int::<usize>)?.unwrap_or(defaults_grid.points_per_decade),
    };
    let delta_min = field(lk, "delta_min", parse_f64)?.unwrap_or(DEFAULT_DELTA_MIN);
    let exact_mode = field(lk, "exact_mode", parse_bool)?.unwrap_or(false);
    let fit_window = field(lk, "fit_window", parse_window)?.unwrap_or_default();

    let line = sec.header_line.max(1);
    if n.iter().any(|&n| n < 2) {
        return Err((line, "n values must be at least 2".into()));
    }
    if r == 0 {
        return Err((line, "r must be at least 1".into()));
    }
    if gamma.iter().any(|&g| !(g > 0.0)) {
        return Err((line, "gamma values must be positive".into()));
    }
    let block = Block { label: sec.label.clone(), geometry, n, r, gamma, sigma, seed, grid, delta_min, exact_mode, fit_window };
    for &n in &block.n {
        let mut e = EnsembleConfig::new(n, r, block.gamma[0]);
        e.sigma = sigma;
        e.grid = grid;
        e.delta_min = delta_min;
        e.validate().map_err(|e| (line, e.to_string()))?;
    }
    Ok(block)
}
