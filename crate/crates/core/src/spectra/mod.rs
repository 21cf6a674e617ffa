//! Eigendecompositions of `H0` and of the trapped Hamiltonian `H`, and the
//! first-order decay rates `γ_l = Γ_r |<trap|Ψ_l⁰>|²`.
//!
//! `H` is complex symmetric (`Hᵀ = H`), so a left eigenvector is the plain
//! transpose of its right eigenvector once the right vector is scaled to
//! `Σ_k (Ψ_l)_k² = 1`. Two solvers produce the trapped spectrum:
//!
//! * [`TrappedSolver::RankOne`] (single trap only) works in the eigenbasis of
//!   `H0`, where the trap is a rank-one term, and resolves arbitrarily small
//!   decay rates to full relative precision.
//! * [`TrappedSolver::Dense`] runs a general complex eigensolver on `H`. Its
//!   decay rates carry absolute errors of order `ε ‖H‖`.

mod secular;

use alloc::vec::Vec;
use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};

use crate::hamiltonian::{CouplingMatrix, TrappedHamiltonian};
use crate::{Error, Result, C64};

/// Negative decay rates above `-CLAMP_FLOOR * Γ_r` are roundoff and get
/// clamped to zero; anything lower is reported as a solver failure.
pub const CLAMP_FLOOR: f64 = 1e-12;

/// Spectrum of the real symmetric `H0`.
#[derive(Debug, Clone)]
pub struct RealSpectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: Mat<f64>,
}

impl RealSpectrum {
    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as columns, aligned with [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> faer::MatRef<'_, f64> {
        self.eigenvectors.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Row `node` of the eigenvector matrix: `<node|Ψ_l⁰>` for every `l`.
    pub fn overlaps(&self, node: usize) -> Result<Vec<f64>> {
        if node >= self.dim() {
            return Err(Error::IndexOutOfRange { index: node, len: self.dim() });
        }
        Ok((0..self.dim()).map(|l| self.eigenvectors[(node, l)]).collect())
    }

    /// `max_l ‖H0 v_l - λ_l v_l‖`.
    pub fn max_residual(&self, h0: &CouplingMatrix) -> f64 {
        let n = self.dim();
        let hv = h0.as_mat() * self.eigenvectors.as_ref();
        let mut worst = 0.0f64;
        for l in 0..n {
            let mut r2 = 0.0;
            for k in 0..n {
                let r = hv[(k, l)] - self.eigenvalues[l] * self.eigenvectors[(k, l)];
                r2 += r * r;
            }
            worst = worst.max(r2.sqrt());
        }
        worst
    }

    /// `‖VᵀV - I‖_max`.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.dim();
        let g = self.eigenvectors.transpose() * self.eigenvectors.as_ref();
        let mut worst = 0.0f64;
        for j in 0..n {
            for k in 0..n {
                let want = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((g[(j, k)] - want).abs());
            }
        }
        worst
    }
}

/// Full eigendecomposition of `H0`.
pub fn decompose_hermitian(h0: &CouplingMatrix) -> Result<RealSpectrum> {
    let evd = h0
        .as_mat()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::ConvergenceFailure("symmetric eigensolver"))?;
    let n = h0.dim();
    let s = evd.S().column_vector();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let u = evd.U();
    let eigenvalues = order.iter().map(|&i| s[i]).collect();
    let eigenvectors = Mat::from_fn(n, n, |k, l| u[(k, order[l])]);
    Ok(RealSpectrum { eigenvalues, eigenvectors })
}

/// Ordering of a [`TrappedSpectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SortOrder {
    ByGammaAscending,
    ByEpsilonAscending,
}

/// Which algorithm produced a trapped spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrappedSolver {
    /// Secular equation in the eigenbasis of `H0` (single trap).
    RankOne,
    /// General dense complex eigensolver.
    Dense,
}

/// Eigenvalues `E_l = ε_l - iγ_l` of `H` with biorthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct TrappedSpectrum {
    real_parts: Vec<f64>,
    decay_rates: Vec<f64>,
    right: Mat<C64>,
    left: Mat<C64>,
    sort_order: SortOrder,
    solver: TrappedSolver,
    clamped: usize,
}

impl TrappedSpectrum {
    pub fn dim(&self) -> usize {
        self.real_parts.len()
    }

    /// `ε_l`.
    pub fn real_parts(&self) -> &[f64] {
        &self.real_parts
    }

    /// `γ_l`, all non-negative.
    pub fn decay_rates(&self) -> &[f64] {
        &self.decay_rates
    }

    pub fn energy(&self, l: usize) -> C64 {
        C64::new(self.real_parts[l], -self.decay_rates[l])
    }

    /// Right eigenvectors `|Ψ_l>` as columns.
    pub fn right_vectors(&self) -> faer::MatRef<'_, C64> {
        self.right.as_ref()
    }

    /// Left eigenvectors `<Ψ̃_l|` as rows.
    pub fn left_vectors(&self) -> faer::MatRef<'_, C64> {
        self.left.as_ref()
    }

    pub fn sort_order(&self) -> SortOrder {
        self.sort_order
    }

    pub fn solver(&self) -> TrappedSolver {
        self.solver
    }

    /// Number of tiny negative rates that were clamped to zero.
    pub fn clamped_rates(&self) -> usize {
        self.clamped
    }

    /// Reorders eigenvalues and vectors.
    pub fn sorted(mut self, order: SortOrder) -> Self {
        let n = self.dim();
        let mut idx: Vec<usize> = (0..n).collect();
        match order {
            SortOrder::ByGammaAscending => idx.sort_by(|&a, &b| {
                self.decay_rates[a]
                    .total_cmp(&self.decay_rates[b])
                    .then(self.real_parts[a].total_cmp(&self.real_parts[b]))
            }),
            SortOrder::ByEpsilonAscending => idx.sort_by(|&a, &b| {
                self.real_parts[a]
                    .total_cmp(&self.real_parts[b])
                    .then(self.decay_rates[a].total_cmp(&self.decay_rates[b]))
            }),
        }
        self.real_parts = idx.iter().map(|&i| self.real_parts[i]).collect();
        self.decay_rates = idx.iter().map(|&i| self.decay_rates[i]).collect();
        self.right = Mat::from_fn(n, n, |k, l| self.right[(k, idx[l])]);
        self.left = Mat::from_fn(n, n, |l, k| self.left[(idx[l], k)]);
        self.sort_order = order;
        self
    }

    /// `max |<Ψ̃_l|Ψ_l'> - δ_ll'|`.
    pub fn biorthonormality_error(&self) -> f64 {
        max_identity_deviation(&(self.left.as_ref() * self.right.as_ref()))
    }

    /// `max |Σ_l |Ψ_l><Ψ̃_l| - 1|`.
    pub fn completeness_error(&self) -> f64 {
        max_identity_deviation(&(self.right.as_ref() * self.left.as_ref()))
    }

    /// `max |Σ_l E_l |Ψ_l><Ψ̃_l| - H|`.
    pub fn reconstruction_error(&self, h: &TrappedHamiltonian) -> f64 {
        let n = self.dim();
        let scaled = Mat::from_fn(n, n, |k, l| self.right[(k, l)] * self.energy(l));
        let rebuilt = scaled * self.left.as_ref();
        let mut worst = 0.0f64;
        for j in 0..n {
            for k in 0..n {
                worst = worst.max((rebuilt[(j, k)] - h.get(j, k)).norm());
            }
        }
        worst
    }

    /// `max_l ‖H Ψ_l - E_l Ψ_l‖ / ‖Ψ_l‖`.
    pub fn max_residual(&self, h: &TrappedHamiltonian) -> f64 {
        let n = self.dim();
        let hv = h.to_dense() * self.right.as_ref();
        let mut worst = 0.0f64;
        for l in 0..n {
            let e = self.energy(l);
            let (mut r2, mut v2) = (0.0, 0.0);
            for k in 0..n {
                r2 += (hv[(k, l)] - e * self.right[(k, l)]).norm_sqr();
                v2 += self.right[(k, l)].norm_sqr();
            }
            worst = worst.max((r2 / v2).sqrt());
        }
        worst
    }
}

fn max_identity_deviation(m: &Mat<C64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.nrows() {
        for k in 0..m.ncols() {
            let want = if j == k { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            worst = worst.max((m[(j, k)] - want).norm());
        }
    }
    worst
}

/// Turns raw eigenvalues into `(ε, γ)` with the roundoff clamp applied.
fn split_energies(energies: &[C64], trap_scale: f64) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let floor = -CLAMP_FLOOR * trap_scale;
    let mut clamped = 0;
    let mut gammas = Vec::with_capacity(energies.len());
    for (l, e) in energies.iter().enumerate() {
        let g = -e.im;
        if g < floor {
            return Err(Error::NonPositiveDecayRate { index: l, gamma: g });
        }
        if g < 0.0 {
            clamped += 1;
            gammas.push(0.0);
        } else {
            gammas.push(g);
        }
    }
    Ok((energies.iter().map(|e| e.re).collect(), gammas, clamped))
}

/// Eigendecomposition of `H`, sorted by ascending decay rate. Single-trap
/// Hamiltonians use the rank-one solver; several traps use the dense one.
pub fn decompose_trapped(h: &TrappedHamiltonian) -> Result<TrappedSpectrum> {
    if h.trap().trap_nodes().len() == 1 {
        let spec0 = decompose_hermitian(h.real_part())?;
        decompose_trapped_rank_one(h, &spec0)
    } else {
        decompose_trapped_dense(h)
    }
}

/// Rank-one route, reusing an existing decomposition of `H0`.
pub fn decompose_trapped_rank_one(h: &TrappedHamiltonian, spec0: &RealSpectrum) -> Result<TrappedSpectrum> {
    let traps = h.trap().trap_nodes();
    if traps.len() != 1 {
        return Err(Error::InvalidArgument("rank-one solver needs exactly one trap"));
    }
    let g = h.trap().realization_strength();
    let lambda = spec0.eigenvalues();
    let u = spec0.overlaps(traps[0])?;
    let roots = secular::solve(lambda, &u, g)?;
    let n = spec0.dim();

    // Eigenbasis after the deflation rotations.
    let mut basis = spec0.eigenvectors.clone();
    for r in &roots.rotations {
        for k in 0..n {
            let a = basis[(k, r.keep)];
            let b = basis[(k, r.zeroed)];
            basis[(k, r.keep)] = r.c * a + r.s * b;
            basis[(k, r.zeroed)] = -r.s * a + r.c * b;
        }
    }
    let mut y_re = Mat::<f64>::zeros(n, n);
    let mut y_im = Mat::<f64>::zeros(n, n);
    let mut energies = Vec::with_capacity(n);
    for l in 0..n {
        energies.push(roots.energy(l, lambda));
        let y = roots.eigenbasis_vector(l, lambda)?;
        for k in 0..n {
            y_re[(k, l)] = y[k].re;
            y_im[(k, l)] = y[k].im;
        }
    }
    let x_re = &basis * &y_re;
    let x_im = &basis * &y_im;
    let right = Mat::from_fn(n, n, |k, l| C64::new(x_re[(k, l)], x_im[(k, l)]));
    let left = right.transpose().to_owned();
    let (real_parts, decay_rates, clamped) = split_energies(&energies, g)?;
    Ok(TrappedSpectrum {
        real_parts,
        decay_rates,
        right,
        left,
        sort_order: SortOrder::ByGammaAscending,
        solver: TrappedSolver::RankOne,
        clamped,
    }
    .sorted(SortOrder::ByGammaAscending))
}

/// Dense route: general complex eigensolver on `H`.
///
/// Right vectors are scaled to `Σ_k (Ψ_l)_k² = 1` and transposed into left
/// vectors. If that pairing is not biorthonormal (repeated eigenvalues leave
/// the solver free to return non-orthogonal vectors) the left vectors are
/// taken from the inverse of the right-vector matrix instead.
pub fn decompose_trapped_dense(h: &TrappedHamiltonian) -> Result<TrappedSpectrum> {
    let n = h.dim();
    let dense = h.to_dense();
    let evd = dense.eigen().map_err(|_| Error::ConvergenceFailure("complex eigensolver"))?;
    let s = evd.S().column_vector();
    let energies: Vec<C64> = (0..n).map(|l| s[l]).collect();
    let mut right = evd.U().to_owned();
    let mut symmetric_ok = true;
    for l in 0..n {
        let mut q = C64::new(0.0, 0.0);
        for k in 0..n {
            q += right[(k, l)] * right[(k, l)];
        }
        if q.norm() < 1e-8 {
            symmetric_ok = false;
            break;
        }
        let inv = C64::new(1.0, 0.0) / q.sqrt();
        for k in 0..n {
            right[(k, l)] *= inv;
        }
    }
    let mut left = right.transpose().to_owned();
    if !symmetric_ok || max_identity_deviation(&(left.as_ref() * right.as_ref())) > 1e-10 {
        left = right.partial_piv_lu().inverse();
    }
    let scale = h.trap().realization_strength();
    let (real_parts, decay_rates, clamped) = split_energies(&energies, scale)?;
    Ok(TrappedSpectrum {
        real_parts,
        decay_rates,
        right,
        left,
        sort_order: SortOrder::ByGammaAscending,
        solver: TrappedSolver::Dense,
        clamped,
    }
    .sorted(SortOrder::ByGammaAscending))
}

/// Eigenvalues of `H0 - iΓ_r |trap><trap|` without eigenvectors.
pub fn trapped_eigenvalues(spec0: &RealSpectrum, trap: usize, gamma_r: f64) -> Result<Vec<C64>> {
    let u = spec0.overlaps(trap)?;
    let roots = secular::solve(spec0.eigenvalues(), &u, gamma_r)?;
    Ok((0..spec0.dim()).map(|l| roots.energy(l, spec0.eigenvalues())).collect())
}

/// Decay rates of the single-trap Hamiltonian, sorted ascending.
pub fn sorted_decay_rates(spec0: &RealSpectrum, trap: usize, gamma_r: f64) -> Result<Vec<f64>> {
    let energies = trapped_eigenvalues(spec0, trap, gamma_r)?;
    let (_, mut gammas, _) = split_energies(&energies, gamma_r)?;
    gammas.sort_by(f64::total_cmp);
    Ok(gammas)
}

/// First-order decay rates `Γ_r |<trap|Ψ_l⁰>|²`, in the order of `spec0`.
pub fn perturbative_rates(spec0: &RealSpectrum, trap: usize, gamma_r: f64) -> Result<Vec<f64>> {
    Ok(spec0.overlaps(trap)?.into_iter().map(|c| gamma_r * c * c).collect())
}

/// Pairing of trapped eigenvalues with `H0` eigenvalues by real part.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumMatching {
    /// `(trapped index, H0 index)` pairs, ascending in real part.
    pub pairs: Vec<(usize, usize)>,
    /// `|ε - λ|` for each pair.
    pub pair_gaps: Vec<f64>,
    /// Distance from each pair's `λ` to the closest other `H0` eigenvalue.
    pub neighbor_gaps: Vec<f64>,
}

impl SpectrumMatching {
    /// Whether pair `i` sits closer than `threshold` to another level.
    pub fn is_near_degenerate(&self, i: usize, threshold: f64) -> bool {
        self.neighbor_gaps[i] < threshold
    }
}

/// Pairs both spectra after sorting each by real part.
pub fn match_spectra(trapped: &TrappedSpectrum, spec0: &RealSpectrum) -> SpectrumMatching {
    let eps = trapped.real_parts();
    let lam = spec0.eigenvalues();
    let mut ti: Vec<usize> = (0..eps.len()).collect();
    ti.sort_by(|&a, &b| eps[a].total_cmp(&eps[b]));
    let mut si: Vec<usize> = (0..lam.len()).collect();
    si.sort_by(|&a, &b| lam[a].total_cmp(&lam[b]));
    let n = ti.len().min(si.len());
    let pairs: Vec<(usize, usize)> = (0..n).map(|i| (ti[i], si[i])).collect();
    let pair_gaps = pairs.iter().map(|&(t, s)| (eps[t] - lam[s]).abs()).collect();
    let neighbor_gaps = (0..n)
        .map(|i| {
            let here = lam[si[i]];
            let below = if i > 0 { here - lam[si[i - 1]] } else { f64::INFINITY };
            let above = if i + 1 < n { lam[si[i + 1]] - here } else { f64::INFINITY };
            below.min(above)
        })
        .collect();
    SpectrumMatching { pairs, pair_gaps, neighbor_gaps }
}
