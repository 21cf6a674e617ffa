//! Trap-free coupling matrix `H0` and the trapped Hamiltonian `H = H0 - iΓ`.
//!
//! Units follow ħ = 1 with dimensionless couplings. Matrices are dense: the
//! long-range coupling connects every pair of nodes.

use alloc::vec::Vec;
use faer::Mat;

use crate::network::{GeometryKind, NodeConfiguration};
use crate::{Error, Result, C64};

/// Exponent of the dipole-dipole coupling `Δ^-3`.
pub const DEFAULT_SIGMA: f64 = 3.0;

/// Real symmetric Laplacian-type coupling matrix `H0`.
///
/// Off-diagonal entries are `-Δ^-σ` (or `-1` between chain neighbours); each
/// diagonal entry is minus the sum of its row's off-diagonals, so every row
/// sums to zero.
#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    entries: Mat<f64>,
    geometry_kind: GeometryKind,
    sigma: f64,
}

impl CouplingMatrix {
    /// Wraps an explicit symmetric matrix. Used for hand-built test systems.
    pub fn from_dense(entries: Mat<f64>, geometry_kind: GeometryKind, sigma: f64) -> Result<Self> {
        let n = entries.nrows();
        if n < 2 || entries.ncols() != n {
            return Err(Error::InvalidArgument("coupling matrix must be square with N >= 2"));
        }
        for j in 0..n {
            for k in 0..j {
                if entries[(j, k)] != entries[(k, j)] {
                    return Err(Error::InvalidArgument("coupling matrix must be symmetric"));
                }
            }
        }
        Ok(Self { entries, geometry_kind, sigma })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.entries[(j, k)]
    }

    pub fn diagonal(&self, j: usize) -> Result<f64> {
        if j >= self.dim() {
            return Err(Error::IndexOutOfRange { index: j, len: self.dim() });
        }
        Ok(self.entries[(j, j)])
    }

    pub fn as_mat(&self) -> faer::MatRef<'_, f64> {
        self.entries.as_ref()
    }

    pub fn geometry_kind(&self) -> GeometryKind {
        self.geometry_kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|j| self.entries[(j, j)]).sum()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        let n = self.dim();
        let mut m = 0.0f64;
        for k in 0..n {
            for j in 0..n {
                m = m.max(self.entries[(j, k)].abs());
            }
        }
        m
    }

    /// Row sums; all zero up to rounding.
    pub fn row_sums(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|j| (0..n).map(|k| self.entries[(j, k)]).sum()).collect()
    }
}

/// `H0` with couplings `-Δ_jk^-σ` between every pair of nodes.
pub fn build_h0_long_range(config: &NodeConfiguration, sigma: f64) -> Result<CouplingMatrix> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::InvalidArgument("sigma must be positive"));
    }
    let n = config.n_nodes();
    let coords = config.coords();
    let mut h = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        for k in 0..j {
            let d = crate::network::euclidean(&coords[j], &coords[k]);
            if d == 0.0 {
                return Err(Error::DegenerateGeometry(k, j));
            }
            let c = if sigma == 3.0 { 1.0 / (d * d * d) } else { d.powf(-sigma) };
            h[(j, k)] = -c;
            h[(k, j)] = -c;
        }
    }
    for j in 0..n {
        let mut s = 0.0;
        for k in 0..n {
            if k != j {
                s -= h[(j, k)];
            }
        }
        h[(j, j)] = s;
    }
    Ok(CouplingMatrix { entries: h, geometry_kind: config.geometry_kind(), sigma })
}

/// Nearest-neighbour Laplacian of a chain: `-1` between neighbours, diagonal
/// equal to the number of neighbours.
pub fn build_h0_chain(config: &NodeConfiguration) -> Result<CouplingMatrix> {
    if config.geometry_kind() != GeometryKind::Chain1d {
        return Err(Error::InvalidGeometry { expected: "chain1d" });
    }
    let n = config.n_nodes();
    let mut h = Mat::<f64>::zeros(n, n);
    for j in 0..n - 1 {
        h[(j, j + 1)] = -1.0;
        h[(j + 1, j)] = -1.0;
        h[(j, j)] += 1.0;
        h[(j + 1, j + 1)] += 1.0;
    }
    Ok(CouplingMatrix { entries: h, geometry_kind: GeometryKind::Chain1d, sigma: f64::NAN })
}

/// Builds `H0` appropriate for the configuration's geometry.
pub fn build_h0(config: &NodeConfiguration, sigma: f64) -> Result<CouplingMatrix> {
    match config.geometry_kind() {
        GeometryKind::Disordered3d => build_h0_long_range(config, sigma),
        GeometryKind::Chain1d => build_h0_chain(config),
    }
}

/// Realization-dependent trap strength `Γ_r = Γ <trap|H0|trap>`.
pub fn realization_trap_strength(h0: &CouplingMatrix, gamma: f64, trap: usize) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument("gamma must be positive"));
    }
    Ok(gamma * h0.diagonal(trap)?)
}

/// Trap nodes and absorption strengths.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapSpec {
    trap_nodes: Vec<usize>,
    base_strength: f64,
    realization_strength: f64,
}

impl TrapSpec {
    /// Explicit trap specification. `realization_strength` may be zero, which
    /// reduces `H` to `H0` (useful for checking the Hermitian limit).
    pub fn new(trap_nodes: Vec<usize>, base_strength: f64, realization_strength: f64) -> Result<Self> {
        if trap_nodes.is_empty() {
            return Err(Error::InvalidArgument("trap set must not be empty"));
        }
        if !(realization_strength >= 0.0) || !realization_strength.is_finite() {
            return Err(Error::InvalidArgument("trap strength must be non-negative"));
        }
        let mut trap_nodes = trap_nodes;
        trap_nodes.sort_unstable();
        trap_nodes.dedup();
        Ok(Self { trap_nodes, base_strength, realization_strength })
    }

    /// `Γ_r` taken from the diagonal of `H0` at the first trap node and
    /// applied to every trap node.
    pub fn for_realization(h0: &CouplingMatrix, gamma: f64, trap_nodes: &[usize]) -> Result<Self> {
        let first = *trap_nodes.first().ok_or(Error::InvalidArgument("trap set must not be empty"))?;
        let gamma_r = realization_trap_strength(h0, gamma, first)?;
        Self::new(trap_nodes.to_vec(), gamma, gamma_r)
    }

    pub fn trap_nodes(&self) -> &[usize] {
        &self.trap_nodes
    }

    /// `Γ`.
    pub fn base_strength(&self) -> f64 {
        self.base_strength
    }

    /// `Γ_r`.
    pub fn realization_strength(&self) -> f64 {
        self.realization_strength
    }
}

/// `H = H0 - iΓ_r Σ_m |m><m|`, stored as its real part and imaginary diagonal.
#[derive(Debug, Clone)]
pub struct TrappedHamiltonian {
    real_part: CouplingMatrix,
    imag_diagonal: Vec<f64>,
    trap: TrapSpec,
}

impl TrappedHamiltonian {
    pub fn dim(&self) -> usize {
        self.real_part.dim()
    }

    pub fn real_part(&self) -> &CouplingMatrix {
        &self.real_part
    }

    pub fn imag_diagonal(&self) -> &[f64] {
        &self.imag_diagonal
    }

    pub fn trap(&self) -> &TrapSpec {
        &self.trap
    }

    pub fn get(&self, j: usize, k: usize) -> C64 {
        let im = if j == k { self.imag_diagonal[j] } else { 0.0 };
        C64::new(self.real_part.get(j, k), im)
    }

    pub fn trace(&self) -> C64 {
        C64::new(self.real_part.trace(), self.imag_diagonal.iter().sum())
    }

    /// Dense complex copy.
    pub fn to_dense(&self) -> Mat<C64> {
        let n = self.dim();
        Mat::from_fn(n, n, |j, k| self.get(j, k))
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        let n = self.dim();
        let mut m = 0.0f64;
        for k in 0..n {
            for j in 0..n {
                m = m.max(self.get(j, k).norm());
            }
        }
        m
    }
}

/// Adds the trap term to `h0`.
pub fn build_full_hamiltonian(h0: &CouplingMatrix, trap: &TrapSpec) -> Result<TrappedHamiltonian> {
    let n = h0.dim();
    let mut imag_diagonal = alloc::vec![0.0; n];
    for &m in trap.trap_nodes() {
        if m >= n {
            return Err(Error::IndexOutOfRange { index: m, len: n });
        }
        imag_diagonal[m] = -trap.realization_strength();
    }
    Ok(TrappedHamiltonian { real_part: h0.clone(), imag_diagonal, trap: trap.clone() })
}
