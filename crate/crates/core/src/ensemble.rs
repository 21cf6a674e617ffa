//! Averages over independent disorder realizations.
//!
//! Realization `r` (1-based) is a pure function of the configuration and
//! `r`: its geometry is drawn from a generator seeded with
//! [`realization_seed`]`(master_seed, r)`. Results are reduced in increasing
//! `r` through [`EnsembleAccumulator`], so any execution order gives the same
//! bits.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::dynamics::{jensen_lower_bound, mean_survival_exact, mean_survival_spectral, CurveKind, GridSpec, Provenance, SurvivalCurve, TimeGrid};
use crate::hamiltonian::{build_full_hamiltonian, build_h0, CouplingMatrix, TrapSpec, DEFAULT_SIGMA};
use crate::network::{generate_chain, generate_configuration, GeometryKind, NodeConfiguration, DEFAULT_DELTA_MIN};
use crate::rng::realization_seed;
use crate::spectra::{decompose_hermitian, decompose_trapped_dense, decompose_trapped_rank_one, sorted_decay_rates, RealSpectrum, TrappedSpectrum};
use crate::{Error, Result};

/// Index of the trap node in every realization.
pub const TRAP_NODE: usize = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n_nodes: usize,
    pub realizations: usize,
    pub gamma: f64,
    pub sigma: f64,
    pub geometry: GeometryKind,
    pub master_seed: u64,
    pub grid: GridSpec,
    pub delta_min: f64,
    /// Also compute the survival from the full propagator.
    pub exact_mode: bool,
    /// Keep every realization's curve in the result.
    pub keep_per_realization: bool,
}

impl EnsembleConfig {
    pub fn new(n_nodes: usize, realizations: usize, gamma: f64) -> Self {
        Self {
            n_nodes,
            realizations,
            gamma,
            sigma: DEFAULT_SIGMA,
            geometry: GeometryKind::Disordered3d,
            master_seed: 0,
            grid: GridSpec::default(),
            delta_min: DEFAULT_DELTA_MIN,
            exact_mode: false,
            keep_per_realization: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 2 {
            return Err(Error::InvalidArgument("n_nodes must be at least 2"));
        }
        if self.realizations == 0 {
            return Err(Error::InvalidArgument("realizations must be at least 1"));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument("gamma must be positive and finite"));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument("sigma must be positive and finite"));
        }
        if !(self.delta_min >= 0.0) {
            return Err(Error::InvalidArgument("delta_min must be non-negative"));
        }
        self.grid.validate()
    }

    /// The time grid shared by every realization.
    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::log_rescaled(&self.grid, self.n_nodes, self.gamma)
    }

    /// Geometry seed of realization `r`.
    pub fn seed_of(&self, r: usize) -> u64 {
        realization_seed(self.master_seed, r)
    }

    fn check_index(&self, r: usize) -> Result<()> {
        if r == 0 || r > self.realizations {
            return Err(Error::IndexOutOfRange { index: r, len: self.realizations });
        }
        Ok(())
    }
}

/// Everything one realization contributes to the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationOutput {
    /// 1-based realization index.
    pub index: usize,
    pub seed: u64,
    pub gamma_r: f64,
    /// Decay rates sorted ascending.
    pub rates: Vec<f64>,
    pub survival: SurvivalCurve,
    pub exact: Option<SurvivalCurve>,
    /// Rejected draws while placing nodes.
    pub resample_count: usize,
}

impl RealizationOutput {
    /// Rebuilds an output from stored rates (e.g. a checkpoint). The spectral
    /// curve is recomputed, so it matches a fresh run bit for bit.
    pub fn from_rates(config: &EnsembleConfig, r: usize, gamma_r: f64, mut rates: Vec<f64>, resample_count: usize) -> Result<Self> {
        config.check_index(r)?;
        if rates.len() != config.n_nodes {
            return Err(Error::InvalidArgument("stored rate count differs from n_nodes"));
        }
        rates.sort_by(f64::total_cmp);
        let seed = config.seed_of(r);
        let grid = config.time_grid()?;
        let survival = mean_survival_spectral(&rates, &grid)?.with_provenance(Provenance {
            n_nodes: config.n_nodes,
            gamma: config.gamma,
            seed: Some(seed),
            realizations: 1,
        });
        Ok(Self { index: r, seed, gamma_r, rates, survival, exact: None, resample_count })
    }
}

/// Geometry of realization `r`, trap on node [`TRAP_NODE`].
pub fn realization_geometry(config: &EnsembleConfig, r: usize) -> Result<NodeConfiguration> {
    config.validate()?;
    config.check_index(r)?;
    let geometry = match config.geometry {
        GeometryKind::Disordered3d => generate_configuration(config.n_nodes, config.seed_of(r), config.delta_min)?,
        GeometryKind::Chain1d => generate_chain(config.n_nodes, 1.0)?,
    };
    geometry.with_traps(alloc::vec![TRAP_NODE])
}

/// `H0`, its spectrum, and the trap for realization `r`.
pub fn realization_system(config: &EnsembleConfig, r: usize) -> Result<(NodeConfiguration, CouplingMatrix, RealSpectrum, TrapSpec)> {
    let geometry = realization_geometry(config, r)?;
    let h0 = build_h0(&geometry, config.sigma)?;
    let spec0 = decompose_hermitian(&h0)?;
    let trap = TrapSpec::for_realization(&h0, config.gamma, geometry.trap_nodes())?;
    Ok((geometry, h0, spec0, trap))
}

/// Full trapped spectrum, falling back to the dense solver when the
/// rank-one route fails.
pub fn trapped_spectrum(h0: &CouplingMatrix, spec0: &RealSpectrum, trap: &TrapSpec) -> Result<TrappedSpectrum> {
    let h = build_full_hamiltonian(h0, trap)?;
    decompose_trapped_rank_one(&h, spec0).or_else(|_| decompose_trapped_dense(&h))
}

/// Computes realization `r` (1-based) from scratch.
pub fn run_realization(config: &EnsembleConfig, r: usize) -> Result<RealizationOutput> {
    run_realization_inner(config, r).map_err(|e| match e {
        Error::Realization { .. } => e,
        other => Error::Realization { index: r, source: Box::new(other) },
    })
}

fn run_realization_inner(config: &EnsembleConfig, r: usize) -> Result<RealizationOutput> {
    let (geometry, h0, spec0, trap) = realization_system(config, r)?;
    let gamma_r = trap.realization_strength();
    let grid = config.time_grid()?;
    let (rates, exact) = if config.exact_mode {
        let full = trapped_spectrum(&h0, &spec0, &trap)?;
        let exact = mean_survival_exact(&full, trap.trap_nodes(), &grid)?;
        let mut rates = full.decay_rates().to_vec();
        rates.sort_by(f64::total_cmp);
        (rates, Some(exact))
    } else {
        let rates = match sorted_decay_rates(&spec0, TRAP_NODE, gamma_r) {
            Ok(rates) => rates,
            Err(_) => {
                let h = build_full_hamiltonian(&h0, &trap)?;
                let mut rates = decompose_trapped_dense(&h)?.decay_rates().to_vec();
                rates.sort_by(f64::total_cmp);
                rates
            }
        };
        (rates, None)
    };
    let provenance = Provenance { n_nodes: config.n_nodes, gamma: config.gamma, seed: Some(config.seed_of(r)), realizations: 1 };
    let survival = mean_survival_spectral(&rates, &grid)?.with_provenance(provenance);
    Ok(RealizationOutput {
        index: r,
        seed: config.seed_of(r),
        gamma_r,
        rates,
        survival,
        exact: exact.map(|c| c.with_provenance(provenance)),
        resample_count: geometry.resample_count(),
    })
}

/// Per-realization record kept when `keep_per_realization` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationSummary {
    pub index: usize,
    pub seed: u64,
    pub gamma_r: f64,
    pub survival: SurvivalCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub config: EnsembleConfig,
    /// `<Π(t)>_R`.
    pub avg_survival: SurvivalCurve,
    /// Point-wise minimum and maximum over realizations.
    pub min_survival: Vec<f64>,
    pub max_survival: Vec<f64>,
    /// `<γ_l>_R`, averaged index-wise over ascending-sorted rates.
    pub avg_sorted_rates: Vec<f64>,
    pub jensen_curve: SurvivalCurve,
    /// `<Γ_r>_R`.
    pub mean_gamma_r: f64,
    /// Average of the propagator-based curves in exact mode.
    pub avg_exact: Option<SurvivalCurve>,
    pub per_realization: Option<Vec<RealizationSummary>>,
    /// `(seed, Γ_r)` of every realization, in order.
    pub seeds: Vec<(u64, f64)>,
    pub resample_counts: Vec<usize>,
}

/// Streaming reduction that only accepts realizations in increasing order.
#[derive(Debug, Clone)]
pub struct EnsembleAccumulator {
    config: EnsembleConfig,
    grid: TimeGrid,
    next: usize,
    survival_sum: Vec<f64>,
    min: Vec<f64>,
    max: Vec<f64>,
    rate_sum: Vec<f64>,
    gamma_r_sum: f64,
    exact_sum: Option<Vec<f64>>,
    per_realization: Option<Vec<RealizationSummary>>,
    seeds: Vec<(u64, f64)>,
    resample_counts: Vec<usize>,
}

impl EnsembleAccumulator {
    pub fn new(config: &EnsembleConfig) -> Result<Self> {
        config.validate()?;
        let grid = config.time_grid()?;
        let m = grid.len();
        Ok(Self {
            config: config.clone(),
            grid,
            next: 1,
            survival_sum: alloc::vec![0.0; m],
            min: alloc::vec![f64::INFINITY; m],
            max: alloc::vec![f64::NEG_INFINITY; m],
            rate_sum: alloc::vec![0.0; config.n_nodes],
            gamma_r_sum: 0.0,
            exact_sum: config.exact_mode.then(|| alloc::vec![0.0; m]),
            per_realization: config.keep_per_realization.then(Vec::new),
            seeds: Vec::new(),
            resample_counts: Vec::new(),
        })
    }

    /// Index the accumulator expects next.
    pub fn next_index(&self) -> usize {
        self.next
    }

    pub fn is_complete(&self) -> bool {
        self.next > self.config.realizations
    }

    pub fn push(&mut self, out: RealizationOutput) -> Result<()> {
        if out.index != self.next || self.is_complete() {
            return Err(Error::InvalidArgument("realizations must be reduced in increasing order"));
        }
        if out.rates.len() != self.config.n_nodes || out.survival.values.len() != self.grid.len() {
            return Err(Error::InvalidArgument("realization output does not match the configuration"));
        }
        for (i, &v) in out.survival.values.iter().enumerate() {
            self.survival_sum[i] += v;
            self.min[i] = self.min[i].min(v);
            self.max[i] = self.max[i].max(v);
        }
        for (s, g) in self.rate_sum.iter_mut().zip(&out.rates) {
            *s += g;
        }
        self.gamma_r_sum += out.gamma_r;
        if let Some(sum) = self.exact_sum.as_mut() {
            let exact = out.exact.as_ref().ok_or(Error::InvalidArgument("exact mode needs exact curves"))?;
            for (s, v) in sum.iter_mut().zip(&exact.values) {
                *s += v;
            }
        }
        if let Some(list) = self.per_realization.as_mut() {
            list.push(RealizationSummary { index: out.index, seed: out.seed, gamma_r: out.gamma_r, survival: out.survival });
        }
        self.seeds.push((out.seed, out.gamma_r));
        self.resample_counts.push(out.resample_count);
        self.next += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<EnsembleResult> {
        if !self.is_complete() {
            return Err(Error::InvalidArgument("ensemble is missing realizations"));
        }
        let inv = 1.0 / self.config.realizations as f64;
        let provenance = Provenance {
            n_nodes: self.config.n_nodes,
            gamma: self.config.gamma,
            seed: None,
            realizations: self.config.realizations,
        };
        let curve = |sum: Vec<f64>, kind| SurvivalCurve {
            grid: self.grid.clone(),
            values: sum.into_iter().map(|s| s * inv).collect(),
            kind,
            provenance: Some(provenance),
        };
        let mut avg_sorted_rates: Vec<f64> = self.rate_sum.iter().map(|s| s * inv).collect();
        // The sum of sorted lists is sorted up to roundoff.
        for l in 1..avg_sorted_rates.len() {
            if avg_sorted_rates[l] < avg_sorted_rates[l - 1] {
                avg_sorted_rates[l] = avg_sorted_rates[l - 1];
            }
        }
        let jensen_curve = jensen_lower_bound(&avg_sorted_rates, &self.grid)?.with_provenance(provenance);
        let avg_exact = self.exact_sum.clone().map(|s| curve(s, CurveKind::Exact));
        Ok(EnsembleResult {
            avg_survival: curve(self.survival_sum.clone(), CurveKind::Spectral),
            min_survival: self.min,
            max_survival: self.max,
            avg_sorted_rates,
            jensen_curve,
            mean_gamma_r: self.gamma_r_sum * inv,
            avg_exact,
            per_realization: self.per_realization,
            seeds: self.seeds,
            resample_counts: self.resample_counts,
            config: self.config,
        })
    }
}

/// Reduces a complete set of outputs given in any order.
pub fn reduce(config: &EnsembleConfig, mut outputs: Vec<RealizationOutput>) -> Result<EnsembleResult> {
    outputs.sort_by_key(|o| o.index);
    let mut acc = EnsembleAccumulator::new(config)?;
    for out in outputs {
        acc.push(out)?;
    }
    acc.finish()
}

/// Runs all realizations serially.
pub fn run_ensemble(config: &EnsembleConfig) -> Result<EnsembleResult> {
    let mut acc = EnsembleAccumulator::new(config)?;
    for r in 1..=config.realizations {
        acc.push(run_realization(config, r)?)?;
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize, r: usize, gamma: f64) -> EnsembleConfig {
        let mut c = EnsembleConfig::new(n, r, gamma);
        c.master_seed = 42;
        c.grid = GridSpec { tau_min: 1e-4, tau_max: 1e2, points_per_decade: 20 };
        c
    }

    #[test]
    fn realization_is_deterministic() {
        let c = small(30, 3, 1.0);
        assert_eq!(run_realization(&c, 2).unwrap(), run_realization(&c, 2).unwrap());
        assert_ne!(run_realization(&c, 1).unwrap().rates, run_realization(&c, 2).unwrap().rates);
    }

    #[test]
    fn two_node_chain_decays_exponentially() {
        let mut c = small(2, 1, 0.3);
        c.geometry = GeometryKind::Chain1d;
        let out = run_realization(&c, 1).unwrap();
        assert!((out.gamma_r - 0.3).abs() < 1e-15);
        for (t, p) in out.survival.grid.times().iter().zip(&out.survival.values) {
            let want = (-out.gamma_r * t).exp();
            assert!((p - want).abs() < 1e-12, "t={t} p={p} want={want}");
        }
    }

    #[test]
    fn rates_sum_to_trap_strength() {
        let c = small(40, 2, 1.0);
        for r in 1..=2 {
            let out = run_realization(&c, r).unwrap();
            let s: f64 = out.rates.iter().sum();
            assert!((s - out.gamma_r).abs() <= 1e-10 * out.gamma_r);
            assert!(out.rates.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn bad_index_is_rejected() {
        let c = small(10, 2, 1.0);
        assert!(run_realization(&c, 0).is_err());
        assert!(run_realization(&c, 3).is_err());
    }

    #[test]
    fn single_realization_average_is_itself() {
        let c = small(20, 1, 1.0);
        let one = run_realization(&c, 1).unwrap();
        let ens = run_ensemble(&c).unwrap();
        assert_eq!(ens.avg_survival.values, one.survival.values);
        assert_eq!(ens.avg_sorted_rates, one.rates);
        assert_eq!(ens.mean_gamma_r, one.gamma_r);
    }

    #[test]
    fn order_of_completion_is_irrelevant() {
        let c = small(20, 4, 1.0);
        let mut outs: Vec<_> = (1..=4).map(|r| run_realization(&c, r).unwrap()).collect();
        let forward = reduce(&c, outs.clone()).unwrap();
        outs.reverse();
        assert_eq!(reduce(&c, outs).unwrap(), forward);
        assert_eq!(run_ensemble(&c).unwrap(), forward);
    }

    #[test]
    fn ensemble_bounds() {
        let c = small(25, 6, 1.0);
        let ens = run_ensemble(&c).unwrap();
        for i in 0..ens.avg_survival.values.len() {
            let v = ens.avg_survival.values[i];
            assert!(ens.min_survival[i] <= v + 1e-15 && v <= ens.max_survival[i] + 1e-15);
            assert!(v - ens.jensen_curve.values[i] >= -1e-12);
        }
        let s: f64 = ens.avg_sorted_rates.iter().sum();
        assert!((s - ens.mean_gamma_r).abs() <= 1e-8 * ens.mean_gamma_r);
    }

    #[test]
    fn checkpoint_rebuild_matches() {
        let c = small(20, 2, 1.0);
        let out = run_realization(&c, 2).unwrap();
        let rebuilt = RealizationOutput::from_rates(&c, 2, out.gamma_r, out.rates.clone(), out.resample_count).unwrap();
        assert_eq!(rebuilt, out);
    }

    #[test]
    fn missing_realization_fails() {
        let c = small(10, 3, 1.0);
        let outs = alloc::vec![run_realization(&c, 1).unwrap(), run_realization(&c, 3).unwrap()];
        assert!(reduce(&c, outs).is_err());
    }

    #[test]
    fn exact_mode_tracks_spectral() {
        let mut c = small(20, 1, 1e-2);
        c.exact_mode = true;
        let ens = run_ensemble(&c).unwrap();
        let exact = ens.avg_exact.unwrap();
        assert!((exact.values[0] - 1.0).abs() < 1e-10);
        assert!(exact.values.iter().all(|v| (0.0..=1.0 + 1e-9).contains(v)));
    }
}
