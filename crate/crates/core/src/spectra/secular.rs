//! Eigenvalues of a diagonal matrix plus an imaginary rank-one term,
//! `K = Λ - i g u uᵀ`, which is `H` written in the eigenbasis of `H0` when a
//! single node is a trap (`u` is that node's row of the eigenvector matrix).
//!
//! The roots of the secular function `1 - i g Σ_k u_k² / (λ_k - E)` are
//! found with simultaneous Aberth iterations. Each root is stored as an
//! offset `δ` from an anchoring pole `λ_a`, which keeps tiny decay rates
//! (`γ ≈ g u_a²` far below `ε ‖H0‖`) accurate to full relative precision.

use alloc::vec::Vec;

use crate::{Error, Result, C64};

const MAX_SWEEPS: usize = 400;
const TIGHT: f64 = 1e-14;
const LOOSE: f64 = 1e-11;

/// A Givens rotation mixing eigenbasis columns `keep` and `zeroed`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Rotation {
    pub keep: usize,
    pub zeroed: usize,
    pub c: f64,
    pub s: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct RankOneRoots {
    /// Pole each root is anchored to.
    pub anchor: Vec<usize>,
    /// Root minus its anchoring pole.
    pub delta: Vec<C64>,
    /// Roots equal to an untouched pole (no weight on the trap).
    pub deflated: Vec<bool>,
    /// Trap overlaps after deflation rotations.
    pub u: Vec<f64>,
    /// Rotations applied to the eigenbasis, in order.
    pub rotations: Vec<Rotation>,
}

impl RankOneRoots {
    pub fn energy(&self, l: usize, lambda: &[f64]) -> C64 {
        C64::new(lambda[self.anchor[l]], 0.0) + self.delta[l]
    }

    /// Eigenvector of `K` for root `l`, normalized so that `yᵀy = 1`.
    pub fn eigenbasis_vector(&self, l: usize, lambda: &[f64]) -> Result<Vec<C64>> {
        let n = lambda.len();
        let mut y = alloc::vec![C64::new(0.0, 0.0); n];
        if self.deflated[l] {
            y[self.anchor[l]] = C64::new(1.0, 0.0);
            return Ok(y);
        }
        let a = self.anchor[l];
        let d = self.delta[l];
        let mut abs2 = 0.0;
        for k in 0..n {
            if self.u[k] == 0.0 {
                continue;
            }
            let denom = if k == a { -d } else { C64::new(lambda[k] - lambda[a], 0.0) - d };
            y[k] = C64::new(self.u[k], 0.0) / denom;
            abs2 += y[k].norm_sqr();
        }
        // Rescale first; the entries can be huge when δ is tiny.
        let scale = 1.0 / abs2.sqrt();
        let mut s = C64::new(0.0, 0.0);
        for v in y.iter_mut() {
            *v = *v * scale;
            s += *v * *v;
        }
        if s.norm() < 1e-8 {
            return Err(Error::ConvergenceFailure("quasi-null eigenvector (near an exceptional point)"));
        }
        let inv = C64::new(1.0, 0.0) / s.sqrt();
        for v in y.iter_mut() {
            *v = *v * inv;
        }
        Ok(y)
    }
}

/// Solves for all eigenvalues of `diag(lambda) - i g u uᵀ`.
///
/// `lambda` must be sorted ascending and `u` must be a unit vector.
pub(crate) fn solve(lambda: &[f64], u: &[f64], g: f64) -> Result<RankOneRoots> {
    let n = lambda.len();
    assert_eq!(u.len(), n);
    let mut u = u.to_vec();
    let mut rotations = Vec::new();
    let mut deflated = alloc::vec![false; n];

    // Concentrate the trap weight of (numerically) repeated poles into one
    // member of each cluster.
    let scale = lambda.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = 16.0 * f64::EPSILON * scale;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && lambda[end] - lambda[end - 1] <= tol {
            end += 1;
        }
        if end - start > 1 {
            let keep = (start..end).fold(start, |b, k| if u[k].abs() > u[b].abs() { k } else { b });
            for k in start..end {
                if k == keep || u[k] == 0.0 {
                    continue;
                }
                let r = u[keep].hypot(u[k]);
                let (c, s) = (u[keep] / r, u[k] / r);
                u[keep] = r;
                u[k] = 0.0;
                rotations.push(Rotation { keep, zeroed: k, c, s });
            }
        }
        start = end;
    }
    for k in 0..n {
        if g * u[k] * u[k] == 0.0 {
            u[k] = 0.0;
            deflated[k] = true;
        }
    }
    let u2: Vec<f64> = u.iter().map(|x| x * x).collect();
    let active: Vec<usize> = (0..n).filter(|&k| !deflated[k]).collect();
    let anchor: Vec<usize> = (0..n).collect();
    let mut delta = alloc::vec![C64::new(0.0, 0.0); n];
    if active.is_empty() {
        return Ok(RankOneRoots { anchor, delta, deflated, u, rotations });
    }
    let ig = C64::new(0.0, g);
    let mut anchor = anchor;

    // Starting values: one fixed-point step from the first-order result.
    for &a in &active {
        let mut s = 0.0;
        for &k in &active {
            if k != a {
                s += u2[k] / (lambda[k] - lambda[a]);
            }
        }
        let first = C64::new(0.0, -g * u2[a]);
        let refined = first / (C64::new(1.0, 0.0) - ig * s);
        delta[a] = if refined.is_finite() && refined.im <= 0.0 && refined.norm() <= g { refined } else { first };
    }

    let mut converged = alloc::vec![false; n];
    let mut last_step = alloc::vec![f64::INFINITY; n];
    let mut remaining = active.len();
    let mut sweeps = 0;
    while remaining > 0 {
        sweeps += 1;
        if sweeps > MAX_SWEEPS {
            return Err(Error::ConvergenceFailure("secular iteration exhausted its sweep budget"));
        }
        for &l in &active {
            if converged[l] {
                continue;
            }
            let a = anchor[l];
            let d = delta[l];
            let mut s = C64::new(0.0, 0.0);
            let mut ds = C64::new(0.0, 0.0);
            let mut poles = C64::new(0.0, 0.0);
            for &k in &active {
                if k == a {
                    continue;
                }
                let r = C64::new(1.0, 0.0) / (C64::new(lambda[k] - lambda[a], 0.0) - d);
                s += r * u2[k];
                ds += r * r * u2[k];
                poles += r;
            }
            let one = C64::new(1.0, 0.0);
            let g_val = -d * (one - ig * s) - ig * u2[a];
            if g_val == C64::new(0.0, 0.0) {
                converged[l] = true;
                remaining -= 1;
                continue;
            }
            let g_der = -one + ig * (s + d * ds);
            let log_der = g_der / g_val - poles;
            let w = one / log_der;
            let mut mutual = C64::new(0.0, 0.0);
            for &j in &active {
                if j == l {
                    continue;
                }
                let diff = C64::new(lambda[a] - lambda[anchor[j]], 0.0) + d - delta[j];
                mutual += one / diff;
            }
            let corr = w / (one - w * mutual);
            if !corr.is_finite() {
                return Err(Error::ConvergenceFailure("secular iteration produced a non-finite step"));
            }
            let new = d - corr;
            delta[l] = new;
            let step = corr.norm();
            let size = new.norm();
            if step <= TIGHT * size || (step <= LOOSE * size && step >= 0.5 * last_step[l]) {
                converged[l] = true;
                remaining -= 1;
            }
            last_step[l] = step;

            // Re-anchor to the nearest pole once the root has drifted away.
            let e = lambda[a] + new.re;
            let idx = lambda.partition_point(|&x| x < e);
            let mut best = a;
            for cand in [idx.saturating_sub(1), idx.min(n - 1)] {
                if !deflated[cand] && (lambda[cand] - e).abs() < (lambda[best] - e).abs() {
                    best = cand;
                }
            }
            if best != a {
                delta[l] = new + C64::new(lambda[a] - lambda[best], 0.0);
                anchor[l] = best;
            }
        }
    }

    // Distinct roots are required for a valid eigenbasis.
    let mut order: Vec<usize> = active.clone();
    order.sort_by(|&x, &y| anchor[x].cmp(&anchor[y]).then(delta[x].re.total_cmp(&delta[y].re)));
    for w in order.windows(2) {
        let (p, q) = (w[0], w[1]);
        if anchor[p] == anchor[q] && (delta[p] - delta[q]).norm() <= 1e-12 * (delta[p].norm() + delta[q].norm()) {
            return Err(Error::ConvergenceFailure("secular iteration merged two roots"));
        }
    }

    let gamma_sum: f64 = active.iter().map(|&l| -delta[l].im).sum();
    let weight: f64 = u2.iter().sum();
    if (gamma_sum - g * weight).abs() > 1e-9 * g * weight {
        return Err(Error::ConvergenceFailure("secular roots violate the trace identity"));
    }
    Ok(RankOneRoots { anchor, delta, deflated, u, rotations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pole() {
        let r = solve(&[0.5], &[1.0], 0.2).unwrap();
        let e = r.energy(0, &[0.5]);
        assert!((e - C64::new(0.5, -0.2)).norm() < 1e-15);
    }

    #[test]
    fn two_by_two_closed_form() {
        // H0 = [[1,-1],[-1,1]], trap on node 0, Γ_r = 0.1.
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let r = solve(&[0.0, 2.0], &[s, s], 0.1).unwrap();
        let root = C64::new(3.99, 0.0).sqrt();
        let plus = (C64::new(2.0, -0.1) + root) / 2.0;
        let minus = (C64::new(2.0, -0.1) - root) / 2.0;
        let mut es: Vec<C64> = (0..2).map(|l| r.energy(l, &[0.0, 2.0])).collect();
        es.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((es[0] - minus).norm() < 1e-14);
        assert!((es[1] - plus).norm() < 1e-14);
    }

    #[test]
    fn degenerate_poles_deflate() {
        let s = 1.0 / 3f64.sqrt();
        let lambda = [0.0, 3.0, 3.0];
        let r = solve(&lambda, &[s, s, s], 0.5).unwrap();
        assert_eq!(r.deflated.iter().filter(|&&d| d).count(), 1);
        let gsum: f64 = (0..3).map(|l| -r.energy(l, &lambda).im).sum();
        assert!((gsum - 0.5).abs() < 1e-14);
    }

    #[test]
    fn tiny_overlap_keeps_relative_precision() {
        let lambda = [0.0, 1.0, 2.5];
        let t = 1e-12;
        let rest: f64 = ((1.0 - t * t) / 2.0f64).sqrt();
        let g = 1e-6;
        let r = solve(&lambda, &[rest, t, rest], g).unwrap();
        let l = (0..3).find(|&l| r.anchor[l] == 1).unwrap();
        let gamma = -r.delta[l].im;
        assert!(((gamma - g * t * t) / (g * t * t)).abs() < 1e-6);
    }
}
