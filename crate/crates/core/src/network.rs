//! Node geometries: random points in a cube and the regular chain control.
//!
//! Node indices are 0-based in the API. Node 0 is the trap by default.

use alloc::vec::Vec;
use rand::Rng;

use crate::rng::geometry_rng;
use crate::{Error, Result};

/// Default minimum separation between two nodes.
pub const DEFAULT_DELTA_MIN: f64 = 1e-2;

/// Redraws allowed per node before giving up on a configuration.
pub const RESAMPLE_BUDGET_PER_NODE: usize = 100;

/// How a configuration was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeometryKind {
    /// Uniform random points in `[0, N]^3`.
    Disordered3d,
    /// Equally spaced points on the x axis.
    Chain1d,
}

impl GeometryKind {
    /// Name used in configuration files and metadata.
    pub fn as_str(self) -> &'static str {
        match self {
            GeometryKind::Disordered3d => "disordered3d",
            GeometryKind::Chain1d => "chain1d",
        }
    }
}

impl core::str::FromStr for GeometryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disordered3d" => Ok(GeometryKind::Disordered3d),
            "chain1d" => Ok(GeometryKind::Chain1d),
            _ => Err(Error::InvalidArgument("geometry must be disordered3d or chain1d")),
        }
    }
}

/// Positions of all nodes plus the trap set.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeConfiguration {
    coords: Vec<[f64; 3]>,
    trap_nodes: Vec<usize>,
    geometry_kind: GeometryKind,
    seed: u64,
    resample_count: usize,
}

impl NodeConfiguration {
    /// Builds a configuration from explicit coordinates with node 0 as trap.
    pub fn from_coords(coords: Vec<[f64; 3]>, geometry_kind: GeometryKind) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidArgument("need at least two nodes"));
        }
        if coords.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("coordinates must be finite"));
        }
        Ok(Self {
            coords,
            trap_nodes: alloc::vec![0],
            geometry_kind,
            seed: 0,
            resample_count: 0,
        })
    }

    /// Replaces the trap set. Indices are deduplicated and sorted.
    pub fn with_traps(mut self, mut traps: Vec<usize>) -> Result<Self> {
        traps.sort_unstable();
        traps.dedup();
        if traps.is_empty() {
            return Err(Error::InvalidArgument("trap set must not be empty"));
        }
        if traps.len() >= self.coords.len() {
            return Err(Error::InvalidArgument("at least one node must not be a trap"));
        }
        if let Some(&bad) = traps.iter().find(|&&t| t >= self.coords.len()) {
            return Err(Error::IndexOutOfRange { index: bad, len: self.coords.len() });
        }
        self.trap_nodes = traps;
        Ok(self)
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    pub fn trap_nodes(&self) -> &[usize] {
        &self.trap_nodes
    }

    pub fn is_trap(&self, node: usize) -> bool {
        self.trap_nodes.binary_search(&node).is_ok()
    }

    pub fn geometry_kind(&self) -> GeometryKind {
        self.geometry_kind
    }

    /// Seed the coordinates were drawn from (0 for deterministic geometries).
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of points redrawn to honour the minimum separation.
    pub fn resample_count(&self) -> usize {
        self.resample_count
    }

    /// Euclidean distance between nodes `j` and `k`.
    pub fn distance(&self, j: usize, k: usize) -> Result<f64> {
        let n = self.coords.len();
        for idx in [j, k] {
            if idx >= n {
                return Err(Error::IndexOutOfRange { index: idx, len: n });
            }
        }
        Ok(euclidean(&self.coords[j], &self.coords[k]))
    }

    /// Smallest distance between any two distinct nodes.
    pub fn min_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (j, a) in self.coords.iter().enumerate() {
            for b in &self.coords[j + 1..] {
                best = best.min(euclidean(a, b));
            }
        }
        best
    }
}

#[inline]
pub(crate) fn euclidean(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Draws `n` nodes uniformly in `[0, n]^3` from a ChaCha8 stream seeded
/// with `seed`. A point closer than `delta_min` to an already placed node is
/// redrawn; at most `100 * n` redraws are allowed in total.
pub fn generate_configuration(n: usize, seed: u64, delta_min: f64) -> Result<NodeConfiguration> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two nodes"));
    }
    if !(delta_min >= 0.0) || !delta_min.is_finite() {
        return Err(Error::InvalidArgument("delta_min must be finite and non-negative"));
    }
    let side = n as f64;
    let budget = RESAMPLE_BUDGET_PER_NODE * n;
    let mut rng = geometry_rng(seed);
    let mut coords: Vec<[f64; 3]> = Vec::with_capacity(n);
    let mut resamples = 0usize;
    while coords.len() < n {
        let p = [
            side * rng.random::<f64>(),
            side * rng.random::<f64>(),
            side * rng.random::<f64>(),
        ];
        if delta_min > 0.0 && coords.iter().any(|q| euclidean(&p, q) < delta_min) {
            resamples += 1;
            if resamples > budget {
                return Err(Error::GeometryInfeasible { n, delta_min, attempts: resamples - 1 });
            }
            continue;
        }
        coords.push(p);
    }
    Ok(NodeConfiguration {
        coords,
        trap_nodes: alloc::vec![0],
        geometry_kind: GeometryKind::Disordered3d,
        seed,
        resample_count: resamples,
    })
}

/// `n` collinear nodes, node `j` (0-based) at `((j + 1) * spacing, 0, 0)`.
/// The trap is the end node 0.
pub fn generate_chain(n: usize, spacing: f64) -> Result<NodeConfiguration> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two nodes"));
    }
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::InvalidArgument("spacing must be positive"));
    }
    let coords = (0..n).map(|j| [(j + 1) as f64 * spacing, 0.0, 0.0]).collect();
    NodeConfiguration::from_coords(coords, GeometryKind::Chain1d)
}

/// Distance between nodes `j` and `k` of `config`.
pub fn pairwise_distance(config: &NodeConfiguration, j: usize, k: usize) -> Result<f64> {
    config.distance(j, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_points(a: [f64; 3], b: [f64; 3]) -> NodeConfiguration {
        NodeConfiguration::from_coords(alloc::vec![a, b], GeometryKind::Disordered3d).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(two_points([0.0; 3], [3.0, 4.0, 0.0]).distance(0, 1).unwrap(), 5.0);
        let c = two_points([1.0; 3], [2.0; 3]);
        assert!((c.distance(0, 1).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.distance(1, 1).unwrap(), 0.0);
        assert_eq!(c.distance(0, 2), Err(Error::IndexOutOfRange { index: 2, len: 2 }));
    }

    #[test]
    fn random_configuration_in_cube() {
        let c = generate_configuration(100, 42, DEFAULT_DELTA_MIN).unwrap();
        assert_eq!(c.n_nodes(), 100);
        assert_eq!(c.trap_nodes(), &[0]);
        assert!(c.coords().iter().flatten().all(|&x| (0.0..=100.0).contains(&x)));
        assert!(c.min_distance() >= DEFAULT_DELTA_MIN);

        let small = generate_configuration(2, 3, 0.0).unwrap();
        assert!(small.coords().iter().flatten().all(|&x| (0.0..=2.0).contains(&x)));
    }

    #[test]
    fn same_seed_same_bits() {
        let a = generate_configuration(50, 9, 0.01).unwrap();
        let b = generate_configuration(50, 9, 0.01).unwrap();
        for (p, q) in a.coords().iter().zip(b.coords()) {
            for i in 0..3 {
                assert_eq!(p[i].to_bits(), q[i].to_bits());
            }
        }
        assert_ne!(a, generate_configuration(50, 10, 0.01).unwrap());
    }

    #[test]
    fn infeasible_separation() {
        // 8 nodes in [0,8]^3 cannot be pairwise 100 apart.
        let err = generate_configuration(8, 1, 100.0).unwrap_err();
        assert!(matches!(err, Error::GeometryInfeasible { n: 8, attempts: 800, .. }));
        assert!(matches!(generate_configuration(1, 1, 0.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn resample_count_recorded() {
        // Half of the box side forces frequent redraws on a tiny box.
        let c = generate_configuration(4, 5, 1.0).unwrap();
        assert!(c.min_distance() >= 1.0);
        let loose = generate_configuration(4, 5, 0.0).unwrap();
        assert_eq!(loose.resample_count(), 0);
    }

    #[test]
    fn chain_layout() {
        let c = generate_chain(3, 1.0).unwrap();
        let xs: Vec<f64> = c.coords().iter().map(|p| p[0]).collect();
        assert_eq!(xs, [1.0, 2.0, 3.0]);
        assert_eq!(c.distance(0, 2).unwrap(), 2.0);
        assert_eq!(c.geometry_kind(), GeometryKind::Chain1d);
        assert_eq!(generate_chain(2, 2.5).unwrap().distance(0, 1).unwrap(), 2.5);
        assert!(generate_chain(1, 1.0).is_err());
        assert!(generate_chain(3, 0.0).is_err());
    }

    #[test]
    fn trap_set_validation() {
        let c = generate_chain(4, 1.0).unwrap();
        assert_eq!(c.clone().with_traps(alloc::vec![2, 0, 2]).unwrap().trap_nodes(), &[0, 2]);
        assert!(c.clone().with_traps(alloc::vec![]).is_err());
        assert!(c.clone().with_traps(alloc::vec![0, 1, 2, 3]).is_err());
        assert!(c.with_traps(alloc::vec![7]).is_err());
    }
}
