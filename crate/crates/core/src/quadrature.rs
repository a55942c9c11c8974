//! Gauss-Legendre rules and the tensor grid over `(gamma, delta)`.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// nodes in increasing order.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::argument("quadrature needs at least one node"));
    }
    let mut nodes = alloc::vec![0.0; n];
    let mut weights = alloc::vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi's initial guess, then Newton on P_n.
        let mut x = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// `P_n(x)` and `P_n'(x)`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// One point of the integration grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub gamma: f64,
    pub delta: f64,
    /// Product quadrature weight including the interval lengths.
    pub weight: f64,
}

/// Tensor-product rule over `gamma in (0, 1]` and `delta in (1/k, 1]`.
pub fn profile_grid(k: usize, nodes_per_axis: usize) -> Result<Vec<Node>> {
    if k < 2 {
        return Err(Error::config(
            "the integration grid needs at least two pools",
        ));
    }
    let (x, w) = gauss_legendre(nodes_per_axis)?;
    let lo = 1.0 / k as f64;
    let half_d = (1.0 - lo) / 2.0;
    let mut grid = Vec::with_capacity(nodes_per_axis * nodes_per_axis);
    for (&xg, &wg) in x.iter().zip(&w) {
        for (&xd, &wd) in x.iter().zip(&w) {
            grid.push(Node {
                gamma: 0.5 * (xg + 1.0),
                delta: lo + half_d * (xd + 1.0),
                weight: 0.5 * wg * half_d * wd,
            });
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_rules_match_closed_forms() {
        let (x, w) = gauss_legendre(1).unwrap();
        assert_eq!((x[0], w[0]), (0.0, 2.0));
        let (x, w) = gauss_legendre(2).unwrap();
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(3).unwrap();
        assert!((x[2] - 0.6f64.sqrt()).abs() < 1e-15);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        for n in [4usize, 10, 24, 40] {
            let (x, w) = gauss_legendre(n).unwrap();
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..2 * n {
                let got: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(&xi, &wi)| wi * xi.powi(deg as i32))
                    .sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!(
                    (got - exact).abs() < 1e-12,
                    "n={n} deg={deg}: {got} vs {exact}"
                );
            }
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn grid_covers_the_profile_domain() {
        let grid = profile_grid(6, 24).unwrap();
        assert_eq!(grid.len(), 576);
        let area: f64 = grid.iter().map(|n| n.weight).sum();
        assert!((area - 5.0 / 6.0).abs() < 1e-13);
        assert!(grid.iter().all(|n| n.gamma > 0.0 && n.gamma < 1.0));
        assert!(grid.iter().all(|n| n.delta > 1.0 / 6.0 && n.delta < 1.0));
        let mean_gd: f64 = grid
            .iter()
            .map(|n| n.weight * n.gamma * n.delta)
            .sum::<f64>()
            / area;
        assert!((mean_gd - 0.5 * (1.0 + 1.0 / 6.0) / 2.0).abs() < 1e-13);
        assert!(profile_grid(1, 4).is_err());
    }
}
