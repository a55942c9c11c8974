//! Random micro-instances shared by the integration suites.

#![allow(dead_code)]

use poolinf_core::mechanism::{Mechanism, MechanismConfig, Observation, Variant};
use poolinf_core::population::{PoolSet, Popularity};
use poolinf_core::rng::{stream, Stream};
use rand::Rng;

pub const VARIANTS: [Variant; 4] = [
    Variant::Cms,
    Variant::Hcms,
    Variant::NoHashCms,
    Variant::NonPrivate,
];

pub struct Micro {
    pub pools: PoolSet,
    pub mech: Mechanism,
    pub est: Popularity,
    pub obs: Vec<Observation>,
}

fn random_pools(rng: &mut Stream, universe: u32, k: usize) -> PoolSet {
    // At least one object per pool; the neutral pool may end up empty.
    let mut sizes = vec![1u32; k];
    let spare = universe - k as u32;
    for _ in 0..rng.random_range(0..=spare) {
        sizes[rng.random_range(0..k)] += 1;
    }
    let mut objects: Vec<u32> = (0..universe).collect();
    for i in (1..objects.len()).rev() {
        objects.swap(i, rng.random_range(0..=i));
    }
    let mut pools = Vec::new();
    let mut at = 0;
    for s in sizes {
        pools.push(objects[at..at + s as usize].to_vec());
        at += s as usize;
    }
    PoolSet::new(universe, pools).unwrap()
}

/// A universe of at most 12 objects, two or three pools, `m` in {4, 8},
/// two hash functions and one to five observations of random objects.
pub fn micro(seed: u64, variant: Variant) -> Micro {
    let mut rng = stream(seed, "micro", variant as u64);
    let universe = rng.random_range(4..=12u32);
    let k = rng.random_range(2..=3usize);
    let pools = random_pools(&mut rng, universe, k);
    let epsilon = [0.5, 1.0, 2.0, 4.0, 8.0][rng.random_range(0..5)];
    let m = [4u32, 8][rng.random_range(0..2)];
    let config = match variant {
        Variant::Cms => MechanismConfig::cms(epsilon, m, 2, rng.random()),
        Variant::Hcms => MechanismConfig::hcms(epsilon, m, 2, rng.random()),
        Variant::NoHashCms => MechanismConfig::no_hash_cms(epsilon, universe),
        Variant::NonPrivate => MechanismConfig::non_private(),
    };
    let mech = Mechanism::new(config, universe).unwrap();
    let est =
        Popularity::from_weights((0..universe).map(|_| rng.random_range(0.05..1.0)).collect())
            .unwrap();
    let n = rng.random_range(1..=5);
    let obs = (0..n)
        .map(|_| {
            let x = rng.random_range(0..universe);
            mech.obfuscate(x, &mut rng).unwrap()
        })
        .collect();
    Micro {
        pools,
        mech,
        est,
        obs,
    }
}

/// `values - max(values)`.
pub fn normalized(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values.iter().map(|v| v - max).collect()
}
