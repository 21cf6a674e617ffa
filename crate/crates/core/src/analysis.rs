//! Power-law fits of survival curves, size scaling of the exponent, decay
//! rate densities and the forward Laplace check.
//!
//! Fit windows are given in rescaled time `τ = t Γ / N³`. The log-log slope
//! is the same in `t` and `τ`; amplitudes refer to `t`.

use alloc::vec::Vec;

use crate::dynamics::SurvivalCurve;
use crate::{Error, Result};

/// Smallest number of grid points a power-law fit accepts.
pub const MIN_FIT_POINTS: usize = 10;

/// Default fit window in rescaled time.
pub const DEFAULT_FIT_WINDOW: (f64, f64) = (1e-3, 1e-2);

/// Points in each local-slope fit of [`auto_window`].
pub const LOCAL_SLOPE_POINTS: usize = 5;

/// Largest max/min ratio of local slopes inside an automatic window.
pub const AUTO_WINDOW_SPREAD: f64 = 1.2;

/// Fraction of rates dropped at each end before binning.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.02;

/// Ordinary least squares `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the residuals.
    pub residual: f64,
    /// Standard error of the slope (zero for two points).
    pub slope_err: f64,
    pub n_points: usize,
}

/// Fits a line; needs at least two distinct `x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::InvalidArgument("x and y differ in length"));
    }
    if n < 2 {
        return Err(Error::InsufficientPoints);
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if !(sxx > 0.0) {
        return Err(Error::InsufficientPoints);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_err = if n > 2 { (ss / (n - 2) as f64 / sxx).sqrt() } else { 0.0 };
    Ok(LineFit { slope, intercept, residual: (ss / n as f64).sqrt(), slope_err, n_points: n })
}

/// `Π(t) ≈ amplitude · t^(-exponent)` over a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    /// `η`, positive for a decaying curve.
    pub exponent: f64,
    pub amplitude: f64,
    /// `[τ_lo, τ_hi]` actually covered by the fitted points.
    pub window: (f64, f64),
    /// RMS of the log-log residuals.
    pub residual: f64,
    pub n_points: usize,
    /// Standard error of the exponent.
    pub eta_err: f64,
}

/// Raw power-law fit of `y` against `x` on `lo ≤ w ≤ hi`, where `w` is the
/// window coordinate of each point.
fn fit_on(x: &[f64], w: &[f64], y: &[f64], lo: f64, hi: f64) -> Result<PowerLawFit> {
    if !(lo > 0.0) || !(hi > lo) {
        return Err(Error::InvalidArgument("fit window needs 0 < lo < hi"));
    }
    // Grid points land on window edges up to roundoff.
    let (lo_in, hi_in) = (lo * (1.0 - 1e-12), hi * (1.0 + 1e-12));
    let idx: Vec<usize> = (0..x.len()).filter(|&i| w[i] >= lo_in && w[i] <= hi_in).collect();
    if idx.len() < MIN_FIT_POINTS {
        return Err(Error::WindowTooNarrow { points: idx.len(), required: MIN_FIT_POINTS });
    }
    if idx.iter().any(|&i| !(y[i] > 0.0) || !(x[i] > 0.0)) {
        return Err(Error::NonPositiveValues);
    }
    let lx: Vec<f64> = idx.iter().map(|&i| x[i].ln()).collect();
    let ly: Vec<f64> = idx.iter().map(|&i| y[i].ln()).collect();
    let line = fit_line(&lx, &ly)?;
    Ok(PowerLawFit {
        exponent: -line.slope,
        amplitude: line.intercept.exp(),
        window: (w[idx[0]], w[*idx.last().unwrap()]),
        residual: line.residual,
        n_points: line.n_points,
        eta_err: line.slope_err,
    })
}

/// Least-squares fit of `ln Π` against `ln t` for grid points with rescaled
/// time in `window`.
pub fn fit_power_law(curve: &SurvivalCurve, window: (f64, f64)) -> Result<PowerLawFit> {
    fit_on(curve.grid.times(), curve.grid.rescaled(), &curve.values, window.0, window.1)
}

/// Power-law fit of arbitrary samples, window given in `x`.
pub fn fit_power_law_samples(x: &[f64], y: &[f64], window: (f64, f64)) -> Result<PowerLawFit> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument("x and y differ in length"));
    }
    fit_on(x, x, y, window.0, window.1)
}

/// Local log-log slopes from a moving least-squares fit, one per valid
/// window start: `(first index, slope)`.
pub fn local_slopes(curve: &SurvivalCurve, points: usize) -> Vec<(usize, f64)> {
    let t = curve.grid.times();
    let y = &curve.values;
    let valid: Vec<usize> = (0..t.len()).filter(|&i| t[i] > 0.0 && y[i] > 0.0).collect();
    let mut out = Vec::new();
    if points < 2 || valid.len() < points {
        return out;
    }
    for w in valid.windows(points) {
        if w[points - 1] - w[0] != points - 1 {
            continue;
        }
        let lx: Vec<f64> = w.iter().map(|&i| t[i].ln()).collect();
        let ly: Vec<f64> = w.iter().map(|&i| y[i].ln()).collect();
        if let Ok(line) = fit_line(&lx, &ly) {
            out.push((w[0], line.slope));
        }
    }
    out
}

/// The longest stretch of the grid on which the local slope keeps one sign
/// (decaying) and its max/min ratio stays below [`AUTO_WINDOW_SPREAD`].
/// Returns the window in rescaled time.
pub fn auto_window(curve: &SurvivalCurve) -> Result<(f64, f64)> {
    let k = LOCAL_SLOPE_POINTS;
    let slopes = local_slopes(curve, k);
    let tau = curve.grid.rescaled();
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < slopes.len() {
        if !(slopes[i].1 < 0.0) {
            i += 1;
            continue;
        }
        let (mut lo, mut hi) = (-slopes[i].1, -slopes[i].1);
        let mut j = i + 1;
        while j < slopes.len() && slopes[j].0 == slopes[j - 1].0 + 1 && slopes[j].1 < 0.0 {
            let s = -slopes[j].1;
            let (nlo, nhi) = (lo.min(s), hi.max(s));
            if nhi / nlo >= AUTO_WINDOW_SPREAD {
                break;
            }
            lo = nlo;
            hi = nhi;
            j += 1;
        }
        // Slopes i..j cover grid points slopes[i].0 ..= slopes[j-1].0 + k - 1.
        let span = (slopes[i].0, slopes[j - 1].0 + k - 1);
        if best.map_or(true, |b| span.1 - span.0 > b.1 - b.0) {
            best = Some(span);
        }
        i += 1;
    }
    match best {
        Some((a, b)) if b - a + 1 >= MIN_FIT_POINTS => Ok((tau[a], tau[b])),
        Some((a, b)) => Err(Error::WindowTooNarrow { points: b - a + 1, required: MIN_FIT_POINTS }),
        None => Err(Error::WindowTooNarrow { points: 0, required: MIN_FIT_POINTS }),
    }
}

/// Window choice for [`fit_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitWindow {
    /// Fixed `[τ_lo, τ_hi]`.
    Fixed(f64, f64),
    /// Chosen by [`auto_window`].
    Auto,
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow::Fixed(DEFAULT_FIT_WINDOW.0, DEFAULT_FIT_WINDOW.1)
    }
}

pub fn fit_with(curve: &SurvivalCurve, window: FitWindow) -> Result<PowerLawFit> {
    let w = match window {
        FitWindow::Fixed(lo, hi) => (lo, hi),
        FitWindow::Auto => auto_window(curve)?,
    };
    fit_power_law(curve, w)
}

/// `η(N) = η₀ N^μ` at one trap strength.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub gamma: f64,
    /// `(N, η)` pairs, sorted by `N`.
    pub points: Vec<(usize, f64)>,
    pub eta0: f64,
    pub mu: f64,
}

/// Two points use `μ = ln(η₂/η₁) / ln(N₂/N₁)` and `η₀ = η₁ N₁^(-μ)`; more
/// points use a regression of `ln η` on `ln N`.
pub fn size_scaling(gamma: f64, points: &[(usize, f64)]) -> Result<ScalingReport> {
    let mut pts = points.to_vec();
    pts.sort_by_key(|p| p.0);
    if pts.iter().any(|p| !(p.1 > 0.0) || p.0 == 0) {
        return Err(Error::NonPositiveValues);
    }
    let mut distinct = pts.iter().map(|p| p.0).collect::<Vec<_>>();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::InsufficientPoints);
    }
    let (eta0, mu) = if pts.len() == 2 {
        let (n1, e1) = (pts[0].0 as f64, pts[0].1);
        let (n2, e2) = (pts[1].0 as f64, pts[1].1);
        let mu = (e2.ln() - e1.ln()) / (n2.ln() - n1.ln());
        (e1 * n1.powf(-mu), mu)
    } else {
        let lx: Vec<f64> = pts.iter().map(|p| (p.0 as f64).ln()).collect();
        let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
        let line = fit_line(&lx, &ly)?;
        (line.intercept.exp(), line.slope)
    };
    Ok(ScalingReport { gamma, points: pts, eta0, mu })
}

/// Piecewise-constant density of the index fraction `x = l/N` over `γ`.
///
/// Bin `b` spans `[edges[b], edges[b+1]]` and holds probability `masses[b]`.
/// A bin of zero width is a point mass; its density is reported as infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
    /// Geometric bin centers.
    pub centers: Vec<f64>,
    pub densities: Vec<f64>,
}

impl DensityEstimate {
    fn from_edges_masses(edges: Vec<f64>, masses: Vec<f64>) -> Self {
        let mut centers = Vec::with_capacity(masses.len());
        let mut densities = Vec::with_capacity(masses.len());
        for b in 0..masses.len() {
            let (a, c) = (edges[b], edges[b + 1]);
            centers.push((a * c).sqrt());
            densities.push(if c > a { masses[b] / (c - a) } else { f64::INFINITY });
        }
        Self { edges, masses, centers, densities }
    }

    pub fn n_bins(&self) -> usize {
        self.masses.len()
    }

    /// `Σ_b ρ_b Δγ_b`.
    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// `∫ ρ(γ) e^(-2γt) dγ`, integrated exactly over each constant bin.
    pub fn laplace(&self, t: f64) -> f64 {
        let mut total = 0.0;
        for b in 0..self.masses.len() {
            let (a, c) = (self.edges[b], self.edges[b + 1]);
            let m = self.masses[b];
            if m == 0.0 {
                continue;
            }
            let x = 2.0 * t * (c - a);
            total += if x < 1e-8 {
                // Series form avoids cancellation for narrow bins.
                m * (-2.0 * a * t).exp() * (1.0 - x / 2.0)
            } else {
                m * ((-2.0 * a * t).exp() - (-2.0 * c * t).exp()) / x
            };
        }
        total
    }
}

/// Histogram options for [`estimate_rate_density_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityOptions {
    /// `None` selects `max(10, N/25)`.
    pub n_bins: Option<usize>,
    /// Fraction of sorted rates dropped at each end.
    pub tail_fraction: f64,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self { n_bins: None, tail_fraction: DEFAULT_TAIL_FRACTION }
    }
}

pub fn default_bin_count(n: usize) -> usize {
    (n / 25).max(10)
}

/// Rates retained after dropping non-positive values and the tails.
fn trimmed(sorted_rates: &[f64], tail_fraction: f64) -> Result<Vec<f64>> {
    if !(0.0..0.5).contains(&tail_fraction) {
        return Err(Error::InvalidArgument("tail fraction must lie in [0, 0.5)"));
    }
    if sorted_rates.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("rates must be sorted ascending"));
    }
    let n = sorted_rates.len();
    let lo = (tail_fraction * n as f64).floor() as usize;
    let hi = n - lo;
    let kept: Vec<f64> = sorted_rates[lo..hi].iter().copied().filter(|&g| g > 0.0 && g.is_finite()).collect();
    if kept.is_empty() {
        return Err(Error::InsufficientData);
    }
    Ok(kept)
}

/// Log-binned histogram of sorted rates with default options.
pub fn estimate_rate_density(sorted_rates: &[f64]) -> Result<DensityEstimate> {
    estimate_rate_density_with(sorted_rates, DensityOptions::default())
}

/// Log-binned histogram of sorted rates, normalized to unit integral over
/// the retained rates.
pub fn estimate_rate_density_with(sorted_rates: &[f64], options: DensityOptions) -> Result<DensityEstimate> {
    let kept = trimmed(sorted_rates, options.tail_fraction)?;
    let (lo, hi) = (kept[0], kept[kept.len() - 1]);
    if lo == hi {
        if sorted_rates.iter().all(|&g| g == lo) {
            return Ok(DensityEstimate::from_edges_masses(alloc::vec![lo, lo], alloc::vec![1.0]));
        }
        return Err(Error::InsufficientData);
    }
    let bins = options.n_bins.unwrap_or_else(|| default_bin_count(sorted_rates.len()));
    if bins == 0 {
        return Err(Error::InvalidArgument("need at least one bin"));
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut edges: Vec<f64> = (0..=bins).map(|b| (llo + (lhi - llo) * b as f64 / bins as f64).exp()).collect();
    edges[0] = lo;
    edges[bins] = hi;
    let mut counts = alloc::vec![0usize; bins];
    for &g in &kept {
        let pos = ((g.ln() - llo) / (lhi - llo) * bins as f64).floor();
        let b = if pos < 0.0 { 0 } else { (pos as usize).min(bins - 1) };
        counts[b] += 1;
    }
    let inv = 1.0 / kept.len() as f64;
    Ok(DensityEstimate::from_edges_masses(edges, counts.iter().map(|&c| c as f64 * inv).collect()))
}

/// Inverse-function estimate: between consecutive sorted rates the index
/// fraction grows by one step, so bin `[γ_l, γ_(l+1)]` carries an equal share.
pub fn finite_difference_density(sorted_rates: &[f64], tail_fraction: f64) -> Result<DensityEstimate> {
    let mut kept = trimmed(sorted_rates, tail_fraction)?;
    kept.dedup();
    if kept.len() < 2 {
        return Err(Error::InsufficientData);
    }
    let share = 1.0 / (kept.len() - 1) as f64;
    let masses = alloc::vec![share; kept.len() - 1];
    Ok(DensityEstimate::from_edges_masses(kept, masses))
}

/// Log-log slope of a density over bins with centers in `range` (all
/// populated finite bins when `None`). Needs three bins.
pub fn density_slope(density: &DensityEstimate, range: Option<(f64, f64)>) -> Result<LineFit> {
    let (lo, hi) = range.unwrap_or((0.0, f64::INFINITY));
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for b in 0..density.n_bins() {
        let (c, d) = (density.centers[b], density.densities[b]);
        if c >= lo && c <= hi && d > 0.0 && d.is_finite() {
            lx.push(c.ln());
            ly.push(d.ln());
        }
    }
    if lx.len() < 3 {
        return Err(Error::InsufficientData);
    }
    fit_line(&lx, &ly)
}

/// `max |L{ρ}(t) - Π(t)| / Π(t)` over grid points with rescaled time in
/// `window`.
pub fn laplace_consistency(density: &DensityEstimate, curve: &SurvivalCurve, window: (f64, f64)) -> Result<f64> {
    let mut worst = 0.0f64;
    let mut seen = 0;
    for ((&t, &tau), &p) in curve.grid.times().iter().zip(curve.grid.rescaled()).zip(&curve.values) {
        if tau < window.0 || tau > window.1 {
            continue;
        }
        if !(p > 0.0) {
            return Err(Error::NonPositiveValues);
        }
        worst = worst.max((density.laplace(t) - p).abs() / p);
        seen += 1;
    }
    if seen == 0 {
        return Err(Error::WindowTooNarrow { points: 0, required: 1 });
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{mean_survival_spectral, CurveKind, TimeGrid};

    fn power_curve(eta: f64) -> SurvivalCurve {
        let mut times = alloc::vec![0.0];
        times.extend((0..400).map(|i| 10f64.powf(-2.0 + i as f64 / 50.0)));
        let grid = TimeGrid::from_times(times, 1.0).unwrap();
        let values = grid.times().iter().map(|&t| if t == 0.0 { 1.0 } else { t.powf(-eta) }).collect();
        SurvivalCurve { grid, values, kind: CurveKind::Spectral, provenance: None }
    }

    #[test]
    fn exact_power_law_recovered() {
        let c = power_curve(0.5);
        for w in [(1e-2, 1.0), (0.3, 30.0), (10.0, 1e5)] {
            let f = fit_power_law(&c, w).unwrap();
            assert!((f.exponent - 0.5).abs() < 1e-10);
            assert!(f.residual < 1e-10);
            assert!((f.amplitude - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn narrow_window_rejected() {
        let c = power_curve(0.5);
        assert!(matches!(fit_power_law(&c, (1.0, 1.1)), Err(Error::WindowTooNarrow { .. })));
    }

    #[test]
    fn non_positive_rejected() {
        let mut c = power_curve(0.5);
        c.values[100] = 0.0;
        let t = c.grid.rescaled()[100];
        assert_eq!(fit_power_law(&c, (t / 10.0, t * 10.0)), Err(Error::NonPositiveValues));
    }

    #[test]
    fn auto_window_on_pure_power_law_covers_everything() {
        let c = power_curve(0.7);
        let (lo, hi) = auto_window(&c).unwrap();
        assert_eq!(lo, c.grid.rescaled()[1]);
        assert_eq!(hi, *c.grid.rescaled().last().unwrap());
    }

    #[test]
    fn auto_window_finds_the_plateau_in_slope() {
        // Exponential cutoff at late times.
        let mut c = power_curve(0.5);
        for (v, &t) in c.values.iter_mut().zip(c.grid.times()) {
            *v *= (-t / 1e4).exp();
        }
        let (lo, hi) = auto_window(&c).unwrap();
        assert!(lo < 1e-1 && hi > 1e2 && hi < 1e4, "{lo} {hi}");
        let f = fit_power_law(&c, (lo, hi)).unwrap();
        assert!((f.exponent - 0.5).abs() < 0.05);
    }

    #[test]
    fn scaling_two_points() {
        let r = size_scaling(1e-6, &[(100, 0.01625), (1000, 0.01109)]).unwrap();
        assert!((r.mu + 0.166).abs() < 1e-3);
        let r = size_scaling(1.0, &[(100, 0.02), (1000, 0.02)]).unwrap();
        assert_eq!(r.mu, 0.0);
        assert!(size_scaling(1.0, &[(100, 0.02)]).is_err());
        assert!(size_scaling(1.0, &[(100, 0.02), (100, 0.03)]).is_err());
    }

    #[test]
    fn scaling_regression() {
        let pts: Vec<(usize, f64)> = [100usize, 300, 1000].iter().map(|&n| (n, 0.03 * (n as f64).powf(-0.2))).collect();
        let r = size_scaling(1.0, &pts).unwrap();
        assert!((r.mu + 0.2).abs() < 1e-12 && (r.eta0 - 0.03).abs() < 1e-12);
    }

    #[test]
    fn quadratic_rates_give_inverse_sqrt_density() {
        let n = 1000;
        let rates: Vec<f64> = (1..=n).map(|l| (l as f64 / n as f64).powi(2)).collect();
        let d = estimate_rate_density(&rates).unwrap();
        assert_eq!(d.n_bins(), 40);
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
        let s = density_slope(&d, None).unwrap();
        assert!((s.slope + 0.5).abs() < 0.02, "{}", s.slope);
        let fd = finite_difference_density(&rates, 0.02).unwrap();
        assert!((density_slope(&fd, None).unwrap().slope + 0.5).abs() < 0.02);
    }

    #[test]
    fn single_rate_laplace_is_exact() {
        let d = estimate_rate_density(&[0.3; 7]).unwrap();
        for t in [0.0, 0.5, 3.0, 40.0] {
            assert!((d.laplace(t) - (-0.6 * t).exp()).abs() < 1e-15);
        }
        assert!(estimate_rate_density(&[0.3]).is_ok());
        assert_eq!(estimate_rate_density(&[]), Err(Error::InsufficientData));
    }

    #[test]
    fn delta_sum_limit_matches_spectral_curve() {
        let n = 100;
        let rates: Vec<f64> = (1..=n).map(|l| 1e-3 * (l as f64 / n as f64).powi(3)).collect();
        let grid = TimeGrid::log_rescaled(&Default::default(), n, 1.0).unwrap();
        let curve = mean_survival_spectral(&rates, &grid).unwrap();
        let d = finite_difference_density(&rates, 0.0).unwrap();
        let dev = laplace_consistency(&d, &curve, DEFAULT_FIT_WINDOW).unwrap();
        assert!(dev <= 0.02, "{dev}");
    }
}
