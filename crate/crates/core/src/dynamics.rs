//! Time-domain observables: transition probabilities and survival curves.

use alloc::vec::Vec;
use faer::Mat;

use crate::spectra::TrappedSpectrum;
use crate::{Error, Result, C64};

/// Times `t` (starting at 0) and the rescaled times `τ = t Γ / N³`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    rescaled: Vec<f64>,
}

/// Parameters of a log-spaced grid in rescaled time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub tau_min: f64,
    pub tau_max: f64,
    pub points_per_decade: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { tau_min: 1e-4, tau_max: 1e2, points_per_decade: 200 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_min > 0.0) || !(self.tau_max > self.tau_min) || !self.tau_max.is_finite() {
            return Err(Error::InvalidArgument("need 0 < tau_min < tau_max"));
        }
        if self.points_per_decade == 0 {
            return Err(Error::InvalidArgument("points_per_decade must be positive"));
        }
        Ok(())
    }
}

impl TimeGrid {
    /// `t = 0` followed by log-uniform `τ` over `[tau_min, tau_max]` for a
    /// system of `n` nodes at trap strength `gamma`.
    pub fn log_rescaled(spec: &GridSpec, n: usize, gamma: f64) -> Result<Self> {
        spec.validate()?;
        if !(gamma > 0.0) {
            return Err(Error::InvalidArgument("gamma must be positive"));
        }
        let decades = (spec.tau_max / spec.tau_min).log10();
        let steps = ((decades * spec.points_per_decade as f64).round() as usize).max(1);
        let (lo, hi) = (spec.tau_min.ln(), spec.tau_max.ln());
        let factor = gamma / (n as f64).powi(3);
        let mut rescaled = Vec::with_capacity(steps + 2);
        rescaled.push(0.0);
        for i in 0..=steps {
            let tau = if i == steps { spec.tau_max } else { (lo + (hi - lo) * i as f64 / steps as f64).exp() };
            rescaled.push(tau);
        }
        let times = rescaled.iter().map(|tau| tau / factor).collect();
        Ok(Self { times, rescaled })
    }

    /// Explicit times. `rescale` maps `t` to `τ` (`Γ/N³` for the usual grid).
    pub fn from_times(times: Vec<f64>, rescale: f64) -> Result<Self> {
        if times.first() != Some(&0.0) {
            return Err(Error::InvalidArgument("time grid must start at t = 0"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("time grid must be strictly increasing"));
        }
        let rescaled = times.iter().map(|t| t * rescale).collect();
        Ok(Self { times, rescaled })
    }

    /// Stored times and rescaled times, e.g. read back from a file.
    pub fn from_parts(times: Vec<f64>, rescaled: Vec<f64>) -> Result<Self> {
        if times.len() != rescaled.len() {
            return Err(Error::InvalidArgument("times and rescaled times differ in length"));
        }
        let grid = Self::from_times(times, 1.0)?;
        if rescaled.windows(2).any(|w| !(w[1] > w[0])) || rescaled.first() != Some(&0.0) {
            return Err(Error::InvalidArgument("rescaled times must start at 0 and increase"));
        }
        Ok(Self { times: grid.times, rescaled })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn rescaled(&self) -> &[f64] {
        &self.rescaled
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// How a survival curve was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    /// Average of transition probabilities over non-trap node pairs.
    Exact,
    /// `(1/N) Σ_l exp(-2 γ_l t)`.
    Spectral,
    /// Spectral form evaluated on realization-averaged rates.
    JensenBound,
}

/// Where a curve came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    pub n_nodes: usize,
    pub gamma: f64,
    /// Seed of the realization, `None` for ensemble averages.
    pub seed: Option<u64>,
    pub realizations: usize,
}

/// Survival probability on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub kind: CurveKind,
    pub provenance: Option<Provenance>,
}

impl SurvivalCurve {
    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    /// Whether each value exceeds its predecessor by at most `slack`.
    pub fn is_non_increasing(&self, slack: f64) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0] + slack)
    }
}

/// `π_kj(t) = |Σ_l exp(-iE_l t) <k|Ψ_l><Ψ̃_l|j>|²`.
pub fn transition_probability(spec: &TrappedSpectrum, j: usize, k: usize, t: f64) -> Result<f64> {
    let n = spec.dim();
    for idx in [j, k] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, len: n });
        }
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument("time must be non-negative"));
    }
    let right = spec.right_vectors();
    let left = spec.left_vectors();
    let mut amp = C64::new(0.0, 0.0);
    for l in 0..n {
        amp += propagator_phase(spec.energy(l), t) * right[(k, l)] * left[(l, j)];
    }
    Ok(amp.norm_sqr())
}

#[inline]
fn propagator_phase(e: C64, t: f64) -> C64 {
    (C64::new(0.0, -t) * e).exp()
}

/// `Π_M(t) = (1/(N-M)) Σ_{j,k ∉ traps} π_kj(t)`, building the full propagator
/// `U(t) = Σ_l exp(-iE_l t) |Ψ_l><Ψ̃_l|` at every grid point.
pub fn mean_survival_exact(spec: &TrappedSpectrum, traps: &[usize], grid: &TimeGrid) -> Result<SurvivalCurve> {
    let n = spec.dim();
    if let Some(&bad) = traps.iter().find(|&&m| m >= n) {
        return Err(Error::IndexOutOfRange { index: bad, len: n });
    }
    let mut is_trap = alloc::vec![false; n];
    for &m in traps {
        is_trap[m] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&k| !is_trap[k]).collect();
    if free.is_empty() || traps.is_empty() {
        return Err(Error::InvalidArgument("need between 1 and N-1 trap nodes"));
    }
    // Only rows and columns of non-trap nodes enter the average.
    let right = spec.right_vectors();
    let left = spec.left_vectors();
    let r_free = Mat::from_fn(free.len(), n, |i, l| right[(free[i], l)]);
    let l_free = Mat::from_fn(n, free.len(), |l, i| left[(l, free[i])]);
    let norm = 1.0 / free.len() as f64;
    let mut values = Vec::with_capacity(grid.len());
    let mut scaled = r_free.clone();
    for &t in grid.times() {
        for l in 0..n {
            let p = propagator_phase(spec.energy(l), t);
            for i in 0..free.len() {
                scaled[(i, l)] = r_free[(i, l)] * p;
            }
        }
        let u = &scaled * &l_free;
        let mut total = 0.0;
        for b in 0..free.len() {
            for a in 0..free.len() {
                total += u[(a, b)].norm_sqr();
            }
        }
        values.push(total * norm);
    }
    Ok(SurvivalCurve { grid: grid.clone(), values, kind: CurveKind::Exact, provenance: None })
}

fn spectral_sum(rates: &[f64], grid: &TimeGrid) -> Vec<f64> {
    let inv_n = 1.0 / rates.len() as f64;
    grid.times()
        .iter()
        .map(|&t| rates.iter().map(|&g| (-2.0 * g * t).exp()).sum::<f64>() * inv_n)
        .collect()
}

/// `Π(t) = (1/N) Σ_l exp(-2 γ_l t)`.
pub fn mean_survival_spectral(rates: &[f64], grid: &TimeGrid) -> Result<SurvivalCurve> {
    check_rates(rates)?;
    Ok(SurvivalCurve { grid: grid.clone(), values: spectral_sum(rates, grid), kind: CurveKind::Spectral, provenance: None })
}

/// Lower bound `(1/N) Σ_l exp(-2t <γ_l>_R)` on the averaged survival, from
/// rates averaged index-wise over realizations.
pub fn jensen_lower_bound(avg_rates: &[f64], grid: &TimeGrid) -> Result<SurvivalCurve> {
    check_rates(avg_rates)?;
    Ok(SurvivalCurve {
        grid: grid.clone(),
        values: spectral_sum(avg_rates, grid),
        kind: CurveKind::JensenBound,
        provenance: None,
    })
}

fn check_rates(rates: &[f64]) -> Result<()> {
    if rates.is_empty() {
        return Err(Error::InvalidArgument("empty rate list"));
    }
    if rates.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
        return Err(Error::InvalidArgument("decay rates must be finite and non-negative"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_full_hamiltonian, build_h0_long_range, CouplingMatrix, TrapSpec};
    use crate::network::{generate_configuration, GeometryKind};
    use crate::spectra::{decompose_trapped, decompose_trapped_dense};

    fn two_node(gamma_r: f64) -> TrappedSpectrum {
        let h0 = CouplingMatrix::from_dense(
            Mat::from_fn(2, 2, |j, k| if j == k { 1.0 } else { -1.0 }),
            GeometryKind::Disordered3d,
            3.0,
        )
        .unwrap();
        let h = build_full_hamiltonian(&h0, &TrapSpec::new(alloc::vec![0], 1.0, gamma_r).unwrap()).unwrap();
        decompose_trapped(&h).unwrap()
    }

    /// `exp(-iHt)` by scaling and squaring a Taylor series.
    fn brute_propagator(h: &Mat<C64>, t: f64) -> Mat<C64> {
        let n = h.nrows();
        let mut squarings = 0;
        let norm = (0..n).map(|j| (0..n).map(|k| h[(j, k)].norm()).sum::<f64>()).fold(0.0, f64::max) * t;
        let mut scale = 1.0;
        while norm * scale > 0.5 {
            scale *= 0.5;
            squarings += 1;
        }
        let a = Mat::from_fn(n, n, |j, k| h[(j, k)] * C64::new(0.0, -t * scale));
        let mut term = Mat::<C64>::identity(n, n);
        let mut sum = Mat::<C64>::identity(n, n);
        for m in 1..30 {
            let next = &term * &a;
            term = Mat::from_fn(n, n, |j, k| next[(j, k)] / m as f64);
            sum = sum + &term;
        }
        for _ in 0..squarings {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn initial_condition() {
        let s = two_node(0.1);
        assert!((transition_probability(&s, 1, 1, 0.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(transition_probability(&s, 0, 1, 0.0).unwrap() < 1e-28);
        assert!(transition_probability(&s, 2, 1, 0.0).is_err());
    }

    #[test]
    fn two_node_propagator_matches_brute_force() {
        let h = Mat::from_fn(2, 2, |j, k| match (j, k) {
            (0, 0) => C64::new(1.0, -0.1),
            (1, 1) => C64::new(1.0, 0.0),
            _ => C64::new(-1.0, 0.0),
        });
        let s = two_node(0.1);
        for &t in &[0.3, 1.0, 7.5, 40.0] {
            let u = brute_propagator(&h, t);
            let want = u[(1, 1)].norm_sqr();
            assert!((transition_probability(&s, 1, 1, t).unwrap() - want).abs() < 1e-12);
            let closed = (-0.1 * t).exp() * (3.99f64.sqrt() * t / 2.0).cos().powi(2);
            assert!((want - closed).abs() < 0.1, "t={t}: {want} vs {closed}");
        }
    }

    #[test]
    fn contraction() {
        let c = generate_configuration(12, 4, 0.01).unwrap();
        let h0 = build_h0_long_range(&c, 3.0).unwrap();
        let trap = TrapSpec::for_realization(&h0, 1.0, &[0]).unwrap();
        let s = decompose_trapped(&build_full_hamiltonian(&h0, &trap).unwrap()).unwrap();
        for &t in &[1e2, 1e4, 1e6] {
            let total: f64 = (0..12).map(|k| transition_probability(&s, 3, k, t).unwrap()).sum();
            assert!(total <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn exact_two_node_is_single_probability() {
        let s = two_node(0.1);
        let grid = TimeGrid::from_times(alloc::vec![0.0, 0.5, 2.0, 9.0], 1.0).unwrap();
        let c = mean_survival_exact(&s, &[0], &grid).unwrap();
        assert!((c.values[0] - 1.0).abs() < 1e-14);
        for (i, &t) in grid.times().iter().enumerate() {
            assert!((c.values[i] - transition_probability(&s, 1, 1, t).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_solvers_agree() {
        let c = generate_configuration(10, 6, 0.01).unwrap();
        let h0 = build_h0_long_range(&c, 3.0).unwrap();
        let trap = TrapSpec::for_realization(&h0, 1.0, &[0]).unwrap();
        let h = build_full_hamiltonian(&h0, &trap).unwrap();
        let grid = TimeGrid::log_rescaled(&GridSpec { tau_min: 1e-3, tau_max: 1e1, points_per_decade: 5 }, 10, 1.0).unwrap();
        let a = mean_survival_exact(&decompose_trapped(&h).unwrap(), &[0], &grid).unwrap();
        let b = mean_survival_exact(&decompose_trapped_dense(&h).unwrap(), &[0], &grid).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!(a.is_non_increasing(1e-10));
    }

    #[test]
    fn spectral_examples() {
        let grid = TimeGrid::from_times(alloc::vec![0.0, 1.0, 10.0, 100.0], 1.0).unwrap();
        let c = mean_survival_spectral(&[0.3; 5], &grid).unwrap();
        assert_eq!(c.values[0], 1.0);
        for (i, &t) in grid.times().iter().enumerate() {
            assert!((c.values[i] - (-0.6 * t).exp()).abs() < 1e-15);
        }
        let s = two_node(0.1);
        let c = mean_survival_spectral(s.decay_rates(), &grid).unwrap();
        for (i, &t) in grid.times().iter().enumerate() {
            assert!((c.values[i] - (-0.1 * t).exp()).abs() < 1e-12);
        }
        assert!(mean_survival_spectral(&[0.1, -0.2], &grid).is_err());
    }

    #[test]
    fn grid_layout() {
        let g = TimeGrid::log_rescaled(&GridSpec::default(), 100, 1.0).unwrap();
        assert_eq!(g.times()[0], 0.0);
        assert_eq!(g.len(), 1 + 6 * 200 + 1);
        assert!((g.rescaled()[1] - 1e-4).abs() < 1e-18);
        assert_eq!(*g.rescaled().last().unwrap(), 1e2);
        assert!((g.times()[1] - 1e-4 * 1e6).abs() < 1e-6);
        assert!(g.times().windows(2).all(|w| w[1] > w[0]));
        assert!(TimeGrid::from_times(alloc::vec![1.0, 2.0], 1.0).is_err());
        assert!(TimeGrid::from_times(alloc::vec![0.0, 2.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn jensen_single_sample_is_equality() {
        let grid = TimeGrid::from_times(alloc::vec![0.0, 3.0, 30.0], 1.0).unwrap();
        let rates = [0.0, 0.01, 0.2];
        let a = mean_survival_spectral(&rates, &grid).unwrap();
        let b = jensen_lower_bound(&rates, &grid).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(b.values[0], 1.0);
        assert_eq!(b.kind, CurveKind::JensenBound);
    }
}
