//! Control case: a linear chain with a trap at one end, where the survival
//! decays as `t^(-1/2)`, sorted rates grow as `l²` and the rate density goes
//! as `γ^(-1/2)`.

use alloc::vec::Vec;

use crate::analysis::{auto_window, density_slope, estimate_rate_density, fit_line, fit_power_law, PowerLawFit};
use crate::dynamics::{mean_survival_spectral, GridSpec, TimeGrid};
use crate::hamiltonian::{build_h0_chain, TrapSpec};
use crate::network::generate_chain;
use crate::spectra::{decompose_hermitian, sorted_decay_rates};
use crate::{Error, Result};

/// Chains shorter than this are rejected.
pub const MIN_CHAIN_NODES: usize = 10;

/// Below this length the tolerances are widened.
pub const SMALL_CHAIN_NODES: usize = 50;

/// Rescaled-time grid wide enough to resolve the `t^(-1/2)` regime.
pub const CHAIN_GRID: GridSpec = GridSpec { tau_min: 1e-6, tau_max: 1e1, points_per_decade: 200 };

/// One measured quantity against its target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Check {
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        (self.value - self.target).abs() <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainReport {
    pub n: usize,
    pub gamma: f64,
    /// Survival exponent `η`.
    pub eta: Check,
    pub fit: PowerLawFit,
    /// Exponent of sorted `γ_l` against `l`.
    pub rate_exponent: Check,
    /// Log-log slope of `ρ(γ)`.
    pub density_slope: Check,
    /// Tolerances were widened because the chain is short.
    pub small_n: bool,
    /// Sorted decay rates.
    pub rates: Vec<f64>,
}

impl ChainReport {
    pub fn passed(&self) -> bool {
        self.eta.passed() && self.rate_exponent.passed() && self.density_slope.passed()
    }
}

/// Index range `[N^(1/3), N^(2/3)]`: the middle third of `l` on a log scale.
pub fn middle_third(n: usize) -> (usize, usize) {
    let n = n as f64;
    (n.cbrt().ceil() as usize, (n.cbrt() * n.cbrt() + 1e-9).floor() as usize)
}

/// Exponent of `γ_l ∝ l^p` over the 1-based indices `lo..=hi`.
pub fn rate_exponent(sorted_rates: &[f64], lo: usize, hi: usize) -> Result<f64> {
    if lo == 0 || hi > sorted_rates.len() || hi <= lo {
        return Err(Error::InvalidArgument("bad index range"));
    }
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for l in lo..=hi {
        let g = sorted_rates[l - 1];
        if g > 0.0 {
            lx.push((l as f64).ln());
            ly.push(g.ln());
        }
    }
    Ok(fit_line(&lx, &ly)?.slope)
}

/// Runs the chain control once.
pub fn chain_benchmark(n: usize, gamma: f64) -> Result<ChainReport> {
    if n < MIN_CHAIN_NODES {
        return Err(Error::InvalidArgument("chain benchmark needs at least 10 nodes"));
    }
    let geometry = generate_chain(n, 1.0)?.with_traps(alloc::vec![0])?;
    let h0 = build_h0_chain(&geometry)?;
    let trap = TrapSpec::for_realization(&h0, gamma, geometry.trap_nodes())?;
    let spec0 = decompose_hermitian(&h0)?;
    let rates = sorted_decay_rates(&spec0, 0, trap.realization_strength())?;

    let grid = TimeGrid::log_rescaled(&CHAIN_GRID, n, gamma)?;
    let curve = mean_survival_spectral(&rates, &grid)?;
    let fit = fit_power_law(&curve, auto_window(&curve)?)?;

    let (lo, hi) = middle_third(n);
    let p = rate_exponent(&rates, lo, hi)?;
    // The band edge piles up rates at the top of the spectrum, so the density
    // slope is read where the sorted rates follow l².
    let density = estimate_rate_density(&rates)?;
    let slope = density_slope(&density, Some((rates[lo - 1], rates[hi - 1])))
        .or_else(|_| density_slope(&density, None))?
        .slope;

    let small_n = n < SMALL_CHAIN_NODES;
    let widen = if small_n { 2.0 } else { 1.0 };
    Ok(ChainReport {
        n,
        gamma,
        eta: Check { value: fit.exponent, target: 0.5, tolerance: 0.1 * widen },
        fit,
        rate_exponent: Check { value: p, target: 2.0, tolerance: 0.2 * widen },
        density_slope: Check { value: slope, target: -0.5, tolerance: 0.15 * widen },
        small_n,
        rates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_node_chain_passes() {
        let r = chain_benchmark(100, 1e-3).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(!r.small_n);
        let s: f64 = r.rates.iter().sum();
        assert!((s - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn short_chain_is_flagged() {
        let r = chain_benchmark(10, 1e-3).unwrap();
        assert!(r.small_n);
        assert_eq!(r.eta.tolerance, 0.2);
    }

    #[test]
    fn too_short_is_an_error() {
        assert!(chain_benchmark(9, 1e-3).is_err());
    }

    #[test]
    fn middle_third_bounds() {
        assert_eq!(middle_third(100), (5, 21));
        assert_eq!(middle_third(1000), (10, 100));
    }
}
