//! Pools, object popularity and user behavior.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance used when checking that a vector sums to one.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoolSetDef {
    universe_size: u32,
    pools: Vec<Vec<u32>>,
}

/// The universe partitioned into `k` pools of interest and the neutral pool.
///
/// Group `i < k` is pool `i`; group `k` is the neutral pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PoolSetDef", into = "PoolSetDef")]
pub struct PoolSet {
    universe_size: u32,
    pools: Vec<Vec<u32>>,
    neutral: Vec<u32>,
    group: Vec<u16>,
}

impl TryFrom<PoolSetDef> for PoolSet {
    type Error = Error;

    fn try_from(def: PoolSetDef) -> Result<Self> {
        PoolSet::new(def.universe_size, def.pools)
    }
}

impl From<PoolSet> for PoolSetDef {
    fn from(p: PoolSet) -> Self {
        PoolSetDef {
            universe_size: p.universe_size,
            pools: p.pools,
        }
    }
}

impl PoolSet {
    pub fn new(universe_size: u32, pools: Vec<Vec<u32>>) -> Result<Self> {
        if universe_size == 0 {
            return Err(Error::config("universe must contain at least one object"));
        }
        if pools.is_empty() {
            return Err(Error::config("at least one pool of interest is required"));
        }
        if pools.len() >= u16::MAX as usize {
            return Err(Error::config("too many pools"));
        }
        let k = pools.len() as u16;
        let mut group = vec![k; universe_size as usize];
        for (i, pool) in pools.iter().enumerate() {
            if pool.is_empty() {
                return Err(Error::config(format!("pool {i} is empty")));
            }
            for &x in pool {
                let slot = group.get_mut(x as usize).ok_or_else(|| {
                    Error::config(format!("pool {i} contains object {x} outside the universe"))
                })?;
                if *slot != k {
                    return Err(Error::config(format!(
                        "object {x} appears in pool {} and pool {i}",
                        *slot
                    )));
                }
                *slot = i as u16;
            }
        }
        let neutral = (0..universe_size)
            .filter(|&x| group[x as usize] == k)
            .collect();
        Ok(Self {
            universe_size,
            pools,
            neutral,
            group,
        })
    }

    /// Pools laid out back to back from object 0; the rest is neutral.
    pub fn contiguous(universe_size: u32, sizes: &[u32]) -> Result<Self> {
        let mut start = 0u32;
        let mut pools = Vec::with_capacity(sizes.len());
        for &size in sizes {
            let end = start
                .checked_add(size)
                .filter(|&e| e <= universe_size)
                .ok_or_else(|| Error::config("pool sizes exceed the universe"))?;
            pools.push((start..end).collect());
            start = end;
        }
        Self::new(universe_size, pools)
    }

    pub fn universe_size(&self) -> u32 {
        self.universe_size
    }

    /// Number of pools of interest.
    pub fn k(&self) -> usize {
        self.pools.len()
    }

    pub fn pools(&self) -> &[Vec<u32>] {
        &self.pools
    }

    pub fn pool(&self, i: usize) -> &[u32] {
        &self.pools[i]
    }

    pub fn neutral(&self) -> &[u32] {
        &self.neutral
    }

    /// Members of group `g` (`g == k` is the neutral pool).
    pub fn group_members(&self, g: usize) -> &[u32] {
        if g == self.k() {
            &self.neutral
        } else {
            &self.pools[g]
        }
    }

    /// Group index of `object`: its pool, or `k` when neutral.
    #[inline]
    pub fn group_of(&self, object: u32) -> usize {
        self.group[object as usize] as usize
    }

    /// Total mass of every group (pools, then neutral) under `p`.
    pub fn group_masses(&self, p: &Popularity) -> Vec<f64> {
        let mut masses = vec![0.0; self.k() + 1];
        for (x, &px) in p.probs.iter().enumerate() {
            masses[self.group[x] as usize] += px;
        }
        masses
    }

    fn check_universe(&self, p: &Popularity) -> Result<()> {
        if p.len() != self.universe_size as usize {
            return Err(Error::config(format!(
                "popularity covers {} objects, universe has {}",
                p.len(),
                self.universe_size
            )));
        }
        Ok(())
    }
}

/// A probability distribution over the universe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Popularity {
    probs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Popularity {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Popularity::new(probs)
    }
}

impl From<Popularity> for Vec<f64> {
    fn from(p: Popularity) -> Self {
        p.probs
    }
}

impl Popularity {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::config("popularity over an empty universe"));
        }
        if let Some((i, v)) = probs
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0) || !v.is_finite())
        {
            return Err(Error::config(format!("popularity entry {i} is {v}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::config(format!("popularity sums to {total}, not 1")));
        }
        Ok(Self { probs })
    }

    /// Normalize non-negative weights.
    pub fn from_weights(mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::config("weights must have positive finite total"));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self::new(weights)
    }

    pub fn uniform(universe_size: u32) -> Result<Self> {
        Self::from_weights(vec![1.0; universe_size as usize])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn mass_of(&self, objects: &[u32]) -> f64 {
        objects.iter().map(|&x| self.probs[x as usize]).sum()
    }
}

/// A user's preferred pool, relevant interest `gamma` and polarization
/// `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub preferred_pool: usize,
    pub gamma: f64,
    pub delta: f64,
}

impl UserProfile {
    pub fn validate(&self, k: usize) -> Result<()> {
        if self.preferred_pool >= k {
            return Err(Error::config(format!(
                "preferred pool {} out of range for {k} pools",
                self.preferred_pool
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config(format!(
                "gamma = {} outside (0, 1]",
                self.gamma
            )));
        }
        if !(self.delta > 1.0 / k as f64 && self.delta <= 1.0) {
            return Err(Error::config(format!(
                "delta = {} outside (1/{k}, 1]",
                self.delta
            )));
        }
        Ok(())
    }

    /// Probability of drawing from each group: the preferred pool, each
    /// alternative pool, and the neutral pool (last entry).
    pub fn group_weights(&self, k: usize) -> Vec<f64> {
        let alternative = self.gamma * (1.0 - self.delta) / (k - 1) as f64;
        let mut w = vec![alternative; k + 1];
        w[self.preferred_pool] = self.gamma * self.delta;
        w[k] = 1.0 - self.gamma;
        w
    }
}

/// A user's distribution over objects.
#[derive(Debug, Clone, PartialEq)]
pub struct Behavior {
    probs: Vec<f64>,
}

impl Behavior {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Zipf law within every pool (and within the neutral pool), each group
/// receiving equal total mass. The j-th member of a pool, in the order the
/// pool lists them, has unnormalized mass `1 / j^exponent`.
pub fn zipf_mixture_popularity(pools: &PoolSet, exponent: f64) -> Result<Popularity> {
    if !(exponent >= 0.0) || !exponent.is_finite() {
        return Err(Error::config(format!(
            "Zipf exponent must be >= 0, got {exponent}"
        )));
    }
    let groups: Vec<&[u32]> = (0..=pools.k())
        .map(|g| pools.group_members(g))
        .filter(|members| !members.is_empty())
        .collect();
    let group_mass = 1.0 / groups.len() as f64;
    let mut probs = vec![0.0; pools.universe_size() as usize];
    for members in groups {
        let weights: Vec<f64> = (1..=members.len())
            .map(|j| 1.0 / libm::pow(j as f64, exponent))
            .collect();
        let total: f64 = weights.iter().sum();
        for (&x, w) in members.iter().zip(weights) {
            probs[x as usize] = group_mass * w / total;
        }
    }
    Popularity::new(probs)
}

/// IID Uniform(0, 1] weights, normalized.
pub fn uniform_random_popularity<R: Rng + ?Sized>(
    universe_size: u32,
    rng: &mut R,
) -> Result<Popularity> {
    if universe_size == 0 {
        return Err(Error::config("universe must contain at least one object"));
    }
    let weights = (0..universe_size)
        .map(|_| 1.0 - rng.random::<f64>())
        .collect();
    Popularity::from_weights(weights)
}

/// Adds iid `Normal(0, sigma^2)` noise to every entry, then shifts every
/// entry by the absolute value of the noisy minimum and renormalizes.
/// `sigma == 0` returns the input unchanged.
pub fn perturb_popularity<R: Rng + ?Sized>(
    p: &Popularity,
    sigma: f64,
    rng: &mut R,
) -> Result<Popularity> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::config(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(p.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::config(format!("{e}")))?;
    let noisy: Vec<f64> = p.probs.iter().map(|&v| v + normal.sample(rng)).collect();
    let shift = noisy.iter().copied().fold(f64::INFINITY, f64::min).abs();
    Popularity::from_weights(noisy.into_iter().map(|v| v + shift).collect())
}

/// The behavior of a user with the given profile whose within-pool
/// preferences follow `p`.
pub fn build_user_behavior(
    p: &Popularity,
    pools: &PoolSet,
    profile: &UserProfile,
) -> Result<Behavior> {
    pools.check_universe(p)?;
    let k = pools.k();
    if k < 2 {
        return Err(Error::config("user behavior needs at least two pools"));
    }
    profile.validate(k)?;
    let masses = pools.group_masses(p);
    let weights = profile.group_weights(k);
    for g in 0..=k {
        let populated = !pools.group_members(g).is_empty();
        if populated && !(masses[g] > 0.0) {
            return Err(Error::config(format!("group {g} has zero popularity mass")));
        }
        if !populated && weights[g] > 0.0 {
            return Err(Error::config(format!(
                "group {g} is empty but would receive probability {}",
                weights[g]
            )));
        }
    }
    let probs = p
        .probs
        .iter()
        .enumerate()
        .map(|(x, &px)| {
            let g = pools.group_of(x as u32);
            weights[g] * px / masses[g]
        })
        .collect();
    Ok(Behavior { probs })
}

/// `n` iid draws from the behavior.
pub fn sample_objects<R: Rng + ?Sized>(
    behavior: &Behavior,
    n: usize,
    rng: &mut R,
) -> Result<Vec<u32>> {
    if n == 0 {
        return Err(Error::argument("sample_objects needs n >= 1"));
    }
    let index = WeightedIndex::new(&behavior.probs).map_err(|e| Error::config(format!("{e}")))?;
    Ok((0..n).map(|_| index.sample(rng) as u32).collect())
}

/// Profile recovered from a concrete object sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractedProfile {
    pub profile: UserProfile,
    /// More than one pool reached the maximal count; the lowest index won.
    pub tied: bool,
}

/// Preferred pool, relevant interest and polarization of a sequence, or
/// `None` when no object falls in a pool of interest.
pub fn profile_from_sequence(seq: &[u32], pools: &PoolSet) -> Result<Option<ExtractedProfile>> {
    if seq.is_empty() {
        return Err(Error::argument(
            "profile_from_sequence needs a non-empty sequence",
        ));
    }
    let k = pools.k();
    let mut counts = vec![0usize; k + 1];
    for &x in seq {
        if x >= pools.universe_size() {
            return Err(Error::Data(format!("object {x} outside the universe")));
        }
        counts[pools.group_of(x)] += 1;
    }
    let relevant: usize = counts[..k].iter().sum();
    if relevant == 0 {
        return Ok(None);
    }
    let best = counts[..k].iter().copied().max().unwrap_or(0);
    let preferred_pool = counts.iter().position(|&c| c == best).unwrap_or(0);
    let tied = counts[..k].iter().filter(|&&c| c == best).count() > 1;
    if tied {
        log::debug!("preferred pool tie at count {best}; choosing pool {preferred_pool}");
    }
    let gamma = relevant as f64 / seq.len() as f64;
    let delta = best as f64 / relevant as f64;
    Ok(Some(ExtractedProfile {
        profile: UserProfile {
            preferred_pool,
            gamma,
            delta,
        },
        tied,
    }))
}

fn kl_to_mixture_bits(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(&x, _)| x > 0.0)
        .map(|(&x, &y)| x * libm::log2(2.0 * x / (x + y)))
        .sum()
}

/// Jensen-Shannon divergence in bits, so the result lies in `[0, 1]`.
pub fn jsd(p: &Popularity, q: &Popularity) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::argument(
            "jsd of distributions with different supports",
        ));
    }
    let d =
        0.5 * kl_to_mixture_bits(&p.probs, &q.probs) + 0.5 * kl_to_mixture_bits(&q.probs, &p.probs);
    Ok(d.clamp(0.0, 1.0))
}

/// Shannon entropy (bits) of `p` conditioned on `pool`.
pub fn pool_entropy(p: &Popularity, pool: &[u32]) -> Result<f64> {
    let mass = p.mass_of(pool);
    if !(mass > 0.0) {
        return Err(Error::config("pool has zero popularity mass"));
    }
    let h: f64 = pool
        .iter()
        .map(|&x| p.probs[x as usize] / mass)
        .filter(|&q| q > 0.0)
        .map(|q| -q * libm::log2(q))
        .sum();
    Ok(h.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{purpose, stream};
    use proptest::prelude::*;

    fn emojis_like() -> PoolSet {
        PoolSet::contiguous(2600, &[228; 6]).unwrap()
    }

    #[test]
    fn pool_set_validation() {
        assert!(PoolSet::new(10, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(PoolSet::new(10, vec![vec![0, 1], vec![]]).is_err());
        assert!(PoolSet::new(10, vec![vec![0, 10]]).is_err());
        let p = PoolSet::new(10, vec![vec![3, 1], vec![2]]).unwrap();
        assert_eq!(p.neutral(), &[0, 4, 5, 6, 7, 8, 9]);
        assert_eq!(p.group_of(1), 0);
        assert_eq!(p.group_of(2), 1);
        assert_eq!(p.group_of(0), 2);
    }

    #[test]
    fn zipf_examples() {
        let pools = PoolSet::contiguous(4, &[2, 2]).unwrap();
        let p = zipf_mixture_popularity(&pools, 1.0).unwrap();
        let within: Vec<f64> = p.probs()[..2]
            .iter()
            .map(|v| v / p.mass_of(pools.pool(0)))
            .collect();
        assert!((within[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((within[1] - 1.0 / 3.0).abs() < 1e-15);

        let flat = zipf_mixture_popularity(&emojis_like(), 0.0).unwrap();
        let pool0 = &flat.probs()[..228];
        assert!(pool0.iter().all(|&v| (v - pool0[0]).abs() < 1e-18));

        let z = zipf_mixture_popularity(&emojis_like(), 1.2).unwrap();
        for g in 0..=6 {
            let members = emojis_like().group_members(g).to_vec();
            assert!((z.mass_of(&members) - 1.0 / 7.0).abs() < 1e-12);
            for w in members.windows(2) {
                assert!(z.probs()[w[0] as usize] >= z.probs()[w[1] as usize]);
            }
        }
        assert!(zipf_mixture_popularity(&emojis_like(), -1.0).is_err());
    }

    #[test]
    fn uniform_random_popularity_examples() {
        let mut rng = stream(1, purpose::POPULARITY, 0);
        assert_eq!(
            uniform_random_popularity(1, &mut rng).unwrap().probs(),
            &[1.0]
        );
        let p = uniform_random_popularity(2000, &mut rng).unwrap();
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.probs().iter().all(|&v| v > 0.0));
        let a = uniform_random_popularity(50, &mut stream(3, purpose::POPULARITY, 0)).unwrap();
        let b = uniform_random_popularity(50, &mut stream(3, purpose::POPULARITY, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn perturb_zero_sigma_is_identity_and_output_is_distribution() {
        let p = zipf_mixture_popularity(&emojis_like(), 1.2).unwrap();
        let mut rng = stream(1, purpose::GENERIC, 0);
        assert_eq!(perturb_popularity(&p, 0.0, &mut rng).unwrap(), p);
        for sigma in [1e-5, 1e-3, 1e-1, 10.0] {
            let q = perturb_popularity(&p, sigma, &mut rng).unwrap();
            assert!(q.probs().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn perturbation_divergence_grows_with_sigma() {
        let p = zipf_mixture_popularity(&emojis_like(), 1.2).unwrap();
        let mut rng = stream(2, purpose::GENERIC, 0);
        let mut last = -1.0;
        for sigma in [0.0, 1e-5, 1e-4, 1e-3, 1e-2] {
            let mean: f64 = (0..50)
                .map(|_| jsd(&p, &perturb_popularity(&p, sigma, &mut rng).unwrap()).unwrap())
                .sum::<f64>()
                / 50.0;
            assert!(mean >= last, "sigma {sigma}: {mean} < {last}");
            last = mean;
        }
    }

    #[test]
    fn behavior_examples() {
        let pools = emojis_like();
        let p = zipf_mixture_popularity(&pools, 1.2).unwrap();
        let prof = UserProfile {
            preferred_pool: 2,
            gamma: 1.0,
            delta: 1.0,
        };
        let b = build_user_behavior(&p, &pools, &prof).unwrap();
        let pool2_mass = p.mass_of(pools.pool(2));
        for x in 0..2600u32 {
            let expected = if pools.group_of(x) == 2 {
                p.probs()[x as usize] / pool2_mass
            } else {
                0.0
            };
            assert!((b.probs()[x as usize] - expected).abs() < 1e-15);
        }

        let prof = UserProfile {
            preferred_pool: 0,
            gamma: 0.5,
            delta: 0.5,
        };
        let b = Popularity::new(build_user_behavior(&p, &pools, &prof).unwrap().probs).unwrap();
        for i in 1..6 {
            assert!((b.mass_of(pools.pool(i)) - 0.05).abs() < 1e-12);
        }
        assert!((b.mass_of(pools.neutral()) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn behavior_rejects_zero_mass_pool() {
        let pools = PoolSet::contiguous(4, &[1, 1]).unwrap();
        let p = Popularity::new(vec![0.5, 0.0, 0.25, 0.25]).unwrap();
        let prof = UserProfile {
            preferred_pool: 0,
            gamma: 0.5,
            delta: 0.9,
        };
        assert!(matches!(
            build_user_behavior(&p, &pools, &prof),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn behavior_pool_masses_for_random_profiles() {
        let pools = emojis_like();
        let p = zipf_mixture_popularity(&pools, 1.2).unwrap();
        let mut rng = stream(4, purpose::GENERIC, 0);
        for _ in 0..1000 {
            let prof = UserProfile {
                preferred_pool: rng.random_range(0..6),
                gamma: 1.0 - rng.random::<f64>(),
                delta: 1.0 - rng.random::<f64>() * (5.0 / 6.0),
            };
            let b = Popularity::new(build_user_behavior(&p, &pools, &prof).unwrap().probs).unwrap();
            let w = prof.group_weights(6);
            for g in 0..=6 {
                assert!((b.mass_of(pools.group_members(g)) - w[g]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sampling_examples() {
        let b = Behavior {
            probs: vec![0.0, 0.0, 1.0, 0.0],
        };
        let mut rng = stream(1, purpose::GENERIC, 0);
        assert!(sample_objects(&b, 100, &mut rng)
            .unwrap()
            .iter()
            .all(|&x| x == 2));
        assert!(sample_objects(&b, 0, &mut rng).is_err());
        let a = sample_objects(&b, 10, &mut stream(1, purpose::USER, 1)).unwrap();
        assert_eq!(
            a,
            sample_objects(&b, 10, &mut stream(1, purpose::USER, 1)).unwrap()
        );
    }

    #[test]
    fn sampling_frequencies_within_three_sigma() {
        let probs = vec![0.5, 0.3, 0.15, 0.05];
        let b = Behavior {
            probs: probs.clone(),
        };
        let n = 1_000_000;
        let draws = sample_objects(&b, n, &mut stream(2, purpose::GENERIC, 0)).unwrap();
        let mut counts = [0usize; 4];
        draws.iter().for_each(|&x| counts[x as usize] += 1);
        for (c, p) in counts.iter().zip(probs) {
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - p).abs() < 3.0 * se);
        }
    }

    #[test]
    fn profile_extraction_examples() {
        let pools = PoolSet::contiguous(20, &[5, 5, 5]).unwrap();
        let seq: Vec<u32> = vec![10, 11, 12, 10];
        let got = profile_from_sequence(&seq, &pools).unwrap().unwrap();
        assert_eq!(
            got.profile,
            UserProfile {
                preferred_pool: 2,
                gamma: 1.0,
                delta: 1.0
            }
        );

        let mut seq = vec![0u32; 90];
        seq.extend([5u32; 30]);
        seq.extend([16u32; 60]);
        let got = profile_from_sequence(&seq, &pools).unwrap().unwrap();
        assert_eq!(got.profile.preferred_pool, 0);
        assert!((got.profile.gamma - 2.0 / 3.0).abs() < 1e-15);
        assert!((got.profile.delta - 0.75).abs() < 1e-15);
        assert!(!got.tied);

        assert_eq!(profile_from_sequence(&[16, 17, 18], &pools).unwrap(), None);
        assert!(profile_from_sequence(&[], &pools).is_err());

        let tie = profile_from_sequence(&[6, 1], &pools).unwrap().unwrap();
        assert!(tie.tied);
        assert_eq!(tie.profile.preferred_pool, 0);
    }

    #[test]
    fn profile_recovered_from_samples() {
        let pools = emojis_like();
        let p = zipf_mixture_popularity(&pools, 1.2).unwrap();
        let mut rng = stream(6, purpose::GENERIC, 0);
        for _ in 0..10 {
            let prof = UserProfile {
                preferred_pool: rng.random_range(0..6),
                gamma: 0.2 + 0.8 * rng.random::<f64>(),
                delta: 0.4 + 0.6 * rng.random::<f64>(),
            };
            let b = build_user_behavior(&p, &pools, &prof).unwrap();
            let seq = sample_objects(&b, 100_000, &mut rng).unwrap();
            let got = profile_from_sequence(&seq, &pools)
                .unwrap()
                .unwrap()
                .profile;
            assert!((got.gamma - prof.gamma).abs() < 0.01);
            assert!((got.delta - prof.delta).abs() < 0.01);
            let margin = prof.gamma * prof.delta - prof.gamma * (1.0 - prof.delta) / 5.0;
            if margin > 0.05 {
                assert_eq!(got.preferred_pool, prof.preferred_pool);
            }
        }
    }

    #[test]
    fn jsd_examples() {
        let p = Popularity::new(vec![1.0, 0.0]).unwrap();
        let q = Popularity::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(jsd(&p, &p).unwrap(), 0.0);
        assert!((jsd(&p, &q).unwrap() - 1.0).abs() < 1e-15);
        let a = Popularity::new(vec![0.2, 0.3, 0.5]).unwrap();
        let b = Popularity::new(vec![0.6, 0.1, 0.3]).unwrap();
        assert_eq!(jsd(&a, &b).unwrap(), jsd(&b, &a).unwrap());
    }

    #[test]
    fn entropy_table_values() {
        // Within-pool entropies for pool sizes and Zipf exponents.
        let cases = [
            (10, 0.0, 3.32),
            (10, 0.5, 3.22),
            (10, 1.0, 2.88),
            (10, 2.0, 1.78),
            (10, 4.0, 0.48),
            (50, 0.0, 5.64),
            (50, 0.5, 5.44),
            (50, 1.0, 4.61),
            (50, 2.0, 2.19),
            (50, 4.0, 0.48),
            (200, 0.0, 7.64),
            (200, 0.5, 7.36),
            (200, 1.0, 5.99),
            (200, 2.0, 2.31),
            (200, 4.0, 0.48),
            (400, 0.0, 8.64),
            (400, 0.5, 8.33),
            (400, 1.0, 6.64),
            (400, 2.0, 2.33),
            (400, 4.0, 0.48),
        ];
        for (size, s, expected) in cases {
            let pools = PoolSet::contiguous(2600, &[size; 6]).unwrap();
            let p = zipf_mixture_popularity(&pools, s).unwrap();
            let h = pool_entropy(&p, pools.pool(0)).unwrap();
            assert!(
                (h - expected).abs() <= 0.01,
                "|P|={size}, s={s}: {h} vs {expected}"
            );
        }
        let point = Popularity::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(pool_entropy(&point, &[0, 1]).unwrap(), 0.0);
        assert!(pool_entropy(&point, &[1, 2]).is_err());
    }

    fn dist(len: usize) -> impl Strategy<Value = Popularity> {
        proptest::collection::vec(0.0f64..1.0, len)
            .prop_filter_map("positive total", |w| Popularity::from_weights(w).ok())
    }

    proptest! {
        #[test]
        fn jsd_bounded_and_zero_iff_equal((p, q) in (1usize..20).prop_flat_map(|n| (dist(n), dist(n)))) {
            let d = jsd(&p, &q).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert!(jsd(&p, &p).unwrap().abs() < 1e-12);
            let max_diff = p.probs().iter().zip(q.probs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if max_diff > 1e-3 {
                prop_assert!(d > 0.0);
            }
        }
    }
}
