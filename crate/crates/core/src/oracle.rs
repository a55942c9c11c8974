//! Brute-force reference implementations for tests.
//!
//! Nothing here is factored or pre-aggregated: output probabilities are
//! computed from explicit bit vectors and an explicitly built Hadamard
//! matrix, and the score integrand sums over every object of the universe.

use alloc::vec;
use alloc::vec::Vec;

use crate::attack::log_sum_exp;
use crate::bits::BitVector;
use crate::mechanism::{Mechanism, Observation, Variant};
use crate::population::{PoolSet, Popularity};
use crate::quadrature::Node;
use crate::{Error, Result};

/// The `2^s x 2^s` Hadamard matrix by the block recursion.
pub fn hadamard_matrix(s: u32) -> Vec<Vec<i8>> {
    let mut h = vec![vec![1i8]];
    for _ in 0..s {
        let n = h.len();
        let mut next = vec![vec![0i8; 2 * n]; 2 * n];
        for r in 0..n {
            for c in 0..n {
                next[r][c] = h[r][c];
                next[r][c + n] = h[r][c];
                next[r + n][c] = h[r][c];
                next[r + n][c + n] = -h[r][c];
            }
        }
        h = next;
    }
    h
}

/// `Pr[obs | z]` from first principles.
pub struct DenseMechanism<'a> {
    mech: &'a Mechanism,
    hadamard: Vec<Vec<i8>>,
}

impl<'a> DenseMechanism<'a> {
    pub fn new(mech: &'a Mechanism) -> Self {
        let hadamard = if mech.variant() == Variant::Hcms {
            hadamard_matrix(mech.m().trailing_zeros())
        } else {
            Vec::new()
        };
        Self { mech, hadamard }
    }

    pub fn probability(&self, obs: &Observation, z: u32) -> Result<f64> {
        let mech = self.mech;
        let bucket = |j: u32| mech.hash_value(j, z);
        match (mech.variant(), obs) {
            (Variant::Cms | Variant::NoHashCms, Observation::Cms(o)) => {
                let m = mech.m() as usize;
                let v = BitVector::one_hot(m, bucket(o.hash_index)? as usize);
                let d = (0..m).filter(|&i| v.get(i) != o.bits.get(i)).count() as i32;
                let xi = mech.flips().xi;
                Ok(
                    libm::pow(xi, d as f64) * libm::pow(1.0 - xi, (m as i32 - d) as f64)
                        / mech.num_hashes() as f64,
                )
            }
            (Variant::Hcms, Observation::Hcms(o)) => {
                let w = self.hadamard[o.coord_index as usize][bucket(o.hash_index)? as usize];
                let xi = mech.flips().xi_prime;
                let p = if w == o.bit { 1.0 - xi } else { xi };
                Ok(p / mech.num_hashes() as f64 / mech.m() as f64)
            }
            (Variant::NonPrivate, Observation::Raw(x)) => Ok(if *x == z { 1.0 } else { 0.0 }),
            _ => Err(Error::argument("observation does not match the mechanism")),
        }
    }
}

/// The user distribution of the attack model at hypothesis `iota` and
/// profile `(gamma, delta)`, built object by object.
pub fn model_distribution(
    pools: &PoolSet,
    est: &Popularity,
    iota: usize,
    gamma: f64,
    delta: f64,
) -> Vec<f64> {
    let k = pools.k();
    let masses = pools.group_masses(est);
    (0..pools.universe_size())
        .map(|z| {
            let g = pools.group_of(z);
            let weight = if g == k {
                1.0 - gamma
            } else if g == iota {
                gamma * delta
            } else {
                gamma * (1.0 - delta) / (k - 1) as f64
            };
            if masses[g] > 0.0 {
                weight * est.probs()[z as usize] / masses[g]
            } else {
                0.0
            }
        })
        .collect()
}

/// `ln prod_t sum_z Pr[obs_t | z] * model(z)` by direct summation.
pub fn dense_log_integrand(
    mech: &Mechanism,
    pools: &PoolSet,
    est: &Popularity,
    observations: &[Observation],
    iota: usize,
    gamma: f64,
    delta: f64,
) -> Result<f64> {
    let dense = DenseMechanism::new(mech);
    let model = model_distribution(pools, est, iota, gamma, delta);
    let mut total = 0.0;
    for obs in observations {
        let mut s = 0.0;
        for (z, &w) in model.iter().enumerate() {
            s += dense.probability(obs, z as u32)? * w;
        }
        total += libm::log(s);
    }
    Ok(total)
}

/// Dense log integrand at every `(iota, node)`, indexed `[node][iota]`.
pub fn dense_log_integrands(
    mech: &Mechanism,
    pools: &PoolSet,
    est: &Popularity,
    observations: &[Observation],
    nodes: &[Node],
) -> Result<Vec<Vec<f64>>> {
    nodes
        .iter()
        .map(|n| {
            (0..pools.k())
                .map(|iota| {
                    dense_log_integrand(mech, pools, est, observations, iota, n.gamma, n.delta)
                })
                .collect()
        })
        .collect()
}

/// Log pool scores by quadrature over the dense integrand.
pub fn dense_log_scores(
    mech: &Mechanism,
    pools: &PoolSet,
    est: &Popularity,
    observations: &[Observation],
    nodes: &[Node],
) -> Result<Vec<f64>> {
    let table = dense_log_integrands(mech, pools, est, observations, nodes)?;
    Ok((0..pools.k())
        .map(|iota| {
            let terms: Vec<f64> = nodes
                .iter()
                .zip(&table)
                .map(|(n, row)| libm::log(n.weight) + row[iota])
                .collect();
            log_sum_exp(&terms)
        })
        .collect())
}
