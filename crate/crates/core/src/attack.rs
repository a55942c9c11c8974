//! The Bayesian pool inference attack.
//!
//! Each observation is reduced to a row of `k + 1` pool likelihoods
//! `L_i = sum_{z in pool i} Pr[obs | z] * p_hat(z) / p_hat(pool i)`, with the
//! neutral pool last. A pool score integrates, over the uniform prior on
//! `(gamma, delta)`, the product across observations of
//!
//! ```text
//! gamma*delta*L_iota + gamma*(1-delta)/(k-1) * sum_{i != iota} L_i + (1-gamma)*L_neutral
//! ```
//!
//! Likelihood rows are only defined up to a positive factor, so every row is
//! rescaled to a maximum of one before it enters the product.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::mechanism::{
    hadamard_sign, CmsObservation, HcmsObservation, Mechanism, Observation, Variant,
};
use crate::population::{PoolSet, Popularity};
use crate::quadrature::{profile_grid, Node};
use crate::{Error, Result};

pub const DEFAULT_QUADRATURE_NODES: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    #[serde(default)]
    pub threshold: f64,
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
}

fn default_nodes() -> usize {
    DEFAULT_QUADRATURE_NODES
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            threshold: 0.0,
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::config(format!(
                "threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        if self.quadrature_nodes == 0 {
            return Err(Error::config("quadrature_nodes must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    /// Pool scores divided by the largest one.
    pub scores: Vec<f64>,
    /// Natural log of the unscaled scores (up to a shared constant).
    pub log_scores: Vec<f64>,
    /// The maximum a posteriori pool, before thresholding.
    pub best_pool: usize,
    /// `None` when the attack abstains.
    pub estimate: Option<usize>,
    pub confidence: f64,
}

/// Within-group conditional estimated popularity `p_hat(z) / p_hat(group(z))`.
#[derive(Debug, Clone)]
pub struct PoolWeights {
    k: usize,
    group: Vec<u16>,
    q: Vec<f64>,
}

impl PoolWeights {
    pub fn new(pools: &PoolSet, est: &Popularity) -> Result<Self> {
        if est.len() != pools.universe_size() as usize {
            return Err(Error::config(format!(
                "estimated popularity covers {} objects, universe has {}",
                est.len(),
                pools.universe_size()
            )));
        }
        let k = pools.k();
        let masses = pools.group_masses(est);
        for g in 0..=k {
            if !pools.group_members(g).is_empty() && !(masses[g] > 0.0) {
                let name = if g == k {
                    "the neutral pool".into()
                } else {
                    format!("pool {g}")
                };
                return Err(Error::config(format!(
                    "{name} has zero estimated popularity"
                )));
            }
        }
        let mut group = Vec::with_capacity(est.len());
        let mut q = Vec::with_capacity(est.len());
        for (x, &p) in est.probs().iter().enumerate() {
            let g = pools.group_of(x as u32);
            group.push(g as u16);
            q.push(p / masses[g]);
        }
        Ok(Self { k, group, q })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    fn accumulate(&self, row: &mut [f64], mut weight: impl FnMut(u32) -> f64) {
        row.iter_mut().for_each(|v| *v = 0.0);
        for (z, (&g, &q)) in self.group.iter().zip(&self.q).enumerate() {
            row[g as usize] += weight(z as u32) * q;
        }
    }
}

/// Hamming distance between `bits` and the one-hot vector at `bucket`.
pub fn cms_flip_distance(bits: &BitVector, bucket: usize) -> usize {
    bits.count_ones() + 1 - 2 * usize::from(bits.get(bucket))
}

fn cms_row(mech: &Mechanism, w: &PoolWeights, obs: &CmsObservation, row: &mut [f64]) -> Result<()> {
    mech.check_cms(obs)?;
    let xi = mech.flips().xi;
    // Pr[obs | z] relative to an object whose bucket bit is set.
    let unset = if xi == 0.0 {
        0.0
    } else {
        (xi / (1.0 - xi)) * (xi / (1.0 - xi))
    };
    let hashes = mech.hash_family();
    let j = obs.hash_index;
    w.accumulate(row, |z| {
        if obs.bits.get(hashes.bucket(j, z) as usize) {
            1.0
        } else {
            unset
        }
    });
    Ok(())
}

fn hcms_row(
    mech: &Mechanism,
    w: &PoolWeights,
    obs: &HcmsObservation,
    row: &mut [f64],
) -> Result<()> {
    mech.check_hcms(obs)?;
    let xi = mech.flips().xi_prime;
    let hashes = mech.hash_family();
    let (j, l) = (obs.hash_index, obs.coord_index as u64);
    w.accumulate(row, |z| {
        if hadamard_sign(l, hashes.bucket(j, z) as u64) == obs.bit {
            1.0 - xi
        } else {
            xi
        }
    });
    Ok(())
}

fn raw_row(mech: &Mechanism, w: &PoolWeights, x: u32, row: &mut [f64]) -> Result<()> {
    if x >= mech.universe_size() {
        return Err(Error::Data(format!("object {x} outside the universe")));
    }
    row.iter_mut().for_each(|v| *v = 0.0);
    row[w.group[x as usize] as usize] = w.q[x as usize];
    Ok(())
}

/// Fill `row` (length `k + 1`) with the pool likelihoods of `obs`.
pub fn pool_likelihoods_into(
    mech: &Mechanism,
    w: &PoolWeights,
    obs: &Observation,
    row: &mut [f64],
) -> Result<()> {
    if row.len() != w.k + 1 {
        return Err(Error::argument("likelihood row must have k + 1 entries"));
    }
    if w.group.len() != mech.universe_size() as usize {
        return Err(Error::config(
            "pool weights and mechanism disagree on the universe",
        ));
    }
    match (mech.variant(), obs) {
        (Variant::Cms | Variant::NoHashCms, Observation::Cms(o)) => cms_row(mech, w, o, row),
        (Variant::Hcms, Observation::Hcms(o)) => hcms_row(mech, w, o, row),
        (Variant::NonPrivate, Observation::Raw(x)) => raw_row(mech, w, *x, row),
        (variant, _) => Err(Error::argument(format!(
            "observation kind does not match a {variant:?} mechanism"
        ))),
    }
}

fn single_row(
    mech: &Mechanism,
    pools: &PoolSet,
    est: &Popularity,
    obs: &Observation,
) -> Result<Vec<f64>> {
    let w = PoolWeights::new(pools, est)?;
    let mut row = vec![0.0; pools.k() + 1];
    pool_likelihoods_into(mech, &w, obs, &mut row)?;
    Ok(row)
}

/// Pool likelihoods of one CMS (or hash-free CMS) observation, carrying the
/// shared factor `xi^(popcount - 1) (1 - xi)^(m - popcount)` implicitly.
pub fn cms_pool_likelihoods(
    obs: &CmsObservation,
    pools: &PoolSet,
    est: &Popularity,
    mech: &Mechanism,
) -> Result<Vec<f64>> {
    single_row(mech, pools, est, &Observation::Cms(obs.clone()))
}

pub fn hcms_pool_likelihoods(
    obs: &HcmsObservation,
    pools: &PoolSet,
    est: &Popularity,
    mech: &Mechanism,
) -> Result<Vec<f64>> {
    single_row(mech, pools, est, &Observation::Hcms(*obs))
}

pub fn nonprivate_pool_likelihoods(
    object: u32,
    pools: &PoolSet,
    est: &Popularity,
    mech: &Mechanism,
) -> Result<Vec<f64>> {
    single_row(mech, pools, est, &Observation::Raw(object))
}

/// Running products of the score integrand at every quadrature node and
/// hypothesis.
#[derive(Debug, Clone)]
pub struct ScoreAccumulator {
    k: usize,
    nodes: Vec<Node>,
    // Per node: gamma*delta - b, b = gamma*(1-delta)/(k-1), and 1 - gamma.
    coef: Vec<[f64; 3]>,
    lin: Vec<f64>,
    log: Vec<f64>,
    rows: usize,
    scratch: Vec<f64>,
}

const FOLD_BELOW: f64 = 1e-200;
const DIRECT_LOG_BELOW: f64 = 1e-100;

impl ScoreAccumulator {
    pub fn new(k: usize, nodes: Vec<Node>) -> Result<Self> {
        if k < 2 {
            return Err(Error::config("scoring needs at least two pools"));
        }
        let coef = nodes
            .iter()
            .map(|n| {
                let b = n.gamma * (1.0 - n.delta) / (k - 1) as f64;
                [n.gamma * n.delta - b, b, 1.0 - n.gamma]
            })
            .collect();
        let cells = nodes.len() * k;
        Ok(Self {
            k,
            nodes,
            coef,
            lin: vec![1.0; cells],
            log: vec![0.0; cells],
            rows: 0,
            scratch: Vec::with_capacity(k + 1),
        })
    }

    pub fn with_quadrature(k: usize, nodes_per_axis: usize) -> Result<Self> {
        Self::new(k, profile_grid(k, nodes_per_axis)?)
    }

    pub fn reset(&mut self) {
        self.lin.iter_mut().for_each(|v| *v = 1.0);
        self.log.iter_mut().for_each(|v| *v = 0.0);
        self.rows = 0;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Multiply one likelihood row (pools, then neutral) into every
    /// integrand. `index` only labels errors.
    pub fn push_row(&mut self, row: &[f64], index: usize) -> Result<()> {
        let k = self.k;
        if row.len() != k + 1 {
            return Err(Error::argument(format!(
                "likelihood row has {} entries, expected {}",
                row.len(),
                k + 1
            )));
        }
        if row.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::numerical(format!("invalid likelihood row {row:?}")));
        }
        let max = row.iter().copied().fold(0.0, f64::max);
        if max == 0.0 {
            return Err(Error::DegenerateEvidence { index });
        }
        let mut scaled = core::mem::take(&mut self.scratch);
        scaled.clear();
        scaled.extend(row.iter().map(|v| v / max));
        self.push_scaled(&scaled);
        self.scratch = scaled;
        Ok(())
    }

    fn push_scaled(&mut self, row: &[f64]) {
        let k = self.k;
        let pools = &row[..k];
        let neutral = row[k];
        let total: f64 = pools.iter().sum();
        for (node, c) in self.coef.iter().enumerate() {
            let base = c[1] * total + c[2] * neutral;
            let lin = &mut self.lin[node * k..(node + 1) * k];
            let log = &mut self.log[node * k..(node + 1) * k];
            for ((l, g), &li) in lin.iter_mut().zip(log.iter_mut()).zip(pools) {
                let term = c[0] * li + base;
                if term < DIRECT_LOG_BELOW {
                    *g += libm::log(term);
                } else {
                    *l *= term;
                    if *l < FOLD_BELOW {
                        *g += libm::log(*l);
                        *l = 1.0;
                    }
                }
            }
        }
        self.rows += 1;
    }

    /// Log of the integrand for hypothesis `iota` at `node`, up to the shared
    /// per-row scale factors.
    pub fn log_integrand(&self, iota: usize, node: usize) -> f64 {
        let i = node * self.k + iota;
        self.log[i] + libm::log(self.lin[i])
    }

    /// Log pool scores under uniform hyperpriors.
    pub fn log_scores(&self) -> Result<Vec<f64>> {
        self.log_scores_with_prior(None)
    }

    /// Log pool scores; `prior` optionally reweights quadrature nodes.
    pub fn log_scores_with_prior(&self, prior: Option<&[f64]>) -> Result<Vec<f64>> {
        if self.rows == 0 {
            return Err(Error::argument("no observations to score"));
        }
        if let Some(p) = prior {
            if p.len() != self.nodes.len() || p.iter().any(|w| !(*w >= 0.0)) {
                return Err(Error::argument(
                    "prior weights must be non-negative, one per node",
                ));
            }
        }
        let k = self.k;
        let mut out = vec![0.0; k];
        let mut terms = vec![0.0; self.nodes.len()];
        for (iota, slot) in out.iter_mut().enumerate() {
            for (node, t) in terms.iter_mut().enumerate() {
                let w = self.nodes[node].weight * prior.map_or(1.0, |p| p[node]);
                *t = libm::log(w) + self.log_integrand(iota, node);
            }
            *slot = log_sum_exp(&terms);
        }
        if out.iter().all(|v| *v == f64::NEG_INFINITY) {
            return Err(Error::numerical("every pool score is zero"));
        }
        if out.iter().any(|v| v.is_nan()) {
            return Err(Error::numerical("pool score is NaN"));
        }
        Ok(out)
    }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + libm::log(values.iter().map(|v| libm::exp(v - max)).sum::<f64>())
}

/// Scores of the `k` pools for a matrix of likelihood rows.
pub fn score_pools(rows: &[Vec<f64>], k: usize, quadrature_nodes: usize) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::argument(
            "score_pools needs at least one observation",
        ));
    }
    let mut acc = ScoreAccumulator::with_quadrature(k, quadrature_nodes)?;
    for (t, row) in rows.iter().enumerate() {
        acc.push_row(row, t)?;
    }
    let log = acc.log_scores()?;
    let max = log.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(log.iter().map(|v| libm::exp(v - max)).collect())
}

/// Estimate, confidence and abstention from log scores.
pub fn decide<R: Rng + ?Sized>(log_scores: Vec<f64>, threshold: f64, rng: &mut R) -> AttackOutcome {
    let max = log_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scores: Vec<f64> = log_scores.iter().map(|v| libm::exp(v - max)).collect();
    let total: f64 = scores.iter().sum();
    let tied: Vec<usize> = (0..scores.len())
        .filter(|&i| log_scores[i] == max)
        .collect();
    let best_pool = if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.random_range(0..tied.len())]
    };
    let confidence = (1.0 / total).min(1.0);
    AttackOutcome {
        estimate: (confidence >= threshold).then_some(best_pool),
        scores,
        log_scores,
        best_pool,
        confidence,
    }
}

/// The attack prepared for one scenario: mechanism, pools, estimated
/// popularity and quadrature grid.
#[derive(Debug, Clone)]
pub struct Attack {
    mechanism: Mechanism,
    weights: PoolWeights,
    config: AttackConfig,
    template: ScoreAccumulator,
}

impl Attack {
    pub fn new(
        mechanism: Mechanism,
        pools: &PoolSet,
        est: &Popularity,
        config: AttackConfig,
    ) -> Result<Self> {
        config.validate()?;
        if pools.universe_size() != mechanism.universe_size() {
            return Err(Error::config(
                "pools and mechanism disagree on the universe size",
            ));
        }
        let weights = PoolWeights::new(pools, est)?;
        let template = ScoreAccumulator::with_quadrature(pools.k(), config.quadrature_nodes)?;
        Ok(Self {
            mechanism,
            weights,
            config,
            template,
        })
    }

    pub fn k(&self) -> usize {
        self.weights.k
    }

    pub fn mechanism(&self) -> &Mechanism {
        &self.mechanism
    }

    pub fn config(&self) -> &AttackConfig {
        &self.config
    }

    pub fn likelihoods(&self, obs: &Observation) -> Result<Vec<f64>> {
        let mut row = vec![0.0; self.k() + 1];
        pool_likelihoods_into(&self.mechanism, &self.weights, obs, &mut row)?;
        Ok(row)
    }

    pub fn accumulator(&self) -> ScoreAccumulator {
        self.template.clone()
    }

    /// Attack every prefix of `observations` whose length is listed in
    /// `prefixes` (ascending, each in `1..=len`).
    pub fn run_prefixes<R: Rng + ?Sized>(
        &self,
        observations: &[Observation],
        prefixes: &[usize],
        rng: &mut R,
    ) -> Result<Vec<AttackOutcome>> {
        if prefixes.is_empty() || prefixes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::argument(
                "prefix lengths must be strictly increasing",
            ));
        }
        if prefixes[0] == 0 || *prefixes.last().unwrap_or(&0) > observations.len() {
            return Err(Error::argument(format!(
                "prefix lengths must lie in 1..={}",
                observations.len()
            )));
        }
        let mut acc = self.accumulator();
        let mut row = vec![0.0; self.k() + 1];
        let mut out = Vec::with_capacity(prefixes.len());
        let mut next = 0;
        for (t, obs) in observations
            .iter()
            .enumerate()
            .take(*prefixes.last().unwrap_or(&0))
        {
            pool_likelihoods_into(&self.mechanism, &self.weights, obs, &mut row)?;
            acc.push_row(&row, t)?;
            if t + 1 == prefixes[next] {
                out.push(decide(acc.log_scores()?, self.config.threshold, rng));
                next += 1;
            }
        }
        Ok(out)
    }

    pub fn run<R: Rng + ?Sized>(
        &self,
        observations: &[Observation],
        rng: &mut R,
    ) -> Result<AttackOutcome> {
        if observations.is_empty() {
            return Err(Error::argument("the attack needs at least one observation"));
        }
        let mut v = self.run_prefixes(observations, &[observations.len()], rng)?;
        Ok(v.remove(0))
    }
}

/// One-shot convenience wrapper around [`Attack`].
pub fn run_attack<R: Rng + ?Sized>(
    observations: &[Observation],
    pools: &PoolSet,
    est: &Popularity,
    config: &AttackConfig,
    mechanism: &Mechanism,
    rng: &mut R,
) -> Result<AttackOutcome> {
    Attack::new(mechanism.clone(), pools, est, config.clone())?.run(observations, rng)
}

/// Guess a pool uniformly at random with confidence one.
pub fn baseline_attack<R: Rng + ?Sized>(k: usize, rng: &mut R) -> AttackOutcome {
    let best_pool = rng.random_range(0..k);
    let mut scores = vec![0.0; k];
    scores[best_pool] = 1.0;
    AttackOutcome {
        log_scores: scores.iter().map(|&s| libm::log(s)).collect(),
        scores,
        best_pool,
        estimate: Some(best_pool),
        confidence: 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::MechanismConfig;
    use crate::population::zipf_mixture_popularity;
    use crate::rng::{purpose, stream};

    #[test]
    fn flip_distance_matches_direct_l1() {
        let mut rng = stream(1, purpose::GENERIC, 0);
        for _ in 0..10_000 {
            let m = rng.random_range(1..80usize);
            let mut bits = BitVector::zeros(m);
            for i in 0..m {
                bits.set(i, rng.random::<bool>());
            }
            let bucket = rng.random_range(0..m);
            let one_hot = BitVector::one_hot(m, bucket);
            let direct = (0..m).filter(|&i| bits.get(i) != one_hot.get(i)).count();
            assert_eq!(cms_flip_distance(&bits, bucket), direct);
        }
    }

    #[test]
    fn zero_flip_limit_kills_mismatched_pool() {
        let mech = Mechanism::new(MechanismConfig::cms(f64::INFINITY, 2, 1, 0), 8).unwrap();
        let by_bucket: Vec<u32> = (0..8)
            .filter(|&x| mech.hash_value(0, x).unwrap() == 1)
            .collect();
        let rest: Vec<u32> = (0..8)
            .filter(|&x| mech.hash_value(0, x).unwrap() == 0)
            .collect();
        assert!(!by_bucket.is_empty() && !rest.is_empty());
        let pools = PoolSet::new(8, vec![by_bucket, rest]).unwrap();
        let obs = CmsObservation {
            bits: BitVector::one_hot(2, 0),
            hash_index: 0,
        };
        let l =
            cms_pool_likelihoods(&obs, &pools, &Popularity::uniform(8).unwrap(), &mech).unwrap();
        assert_eq!(l[0], 0.0);
        assert!(l[1] > 0.0);
    }

    #[test]
    fn hcms_uninformative_coordinate() {
        let mech = Mechanism::new(MechanismConfig::hcms(2.0, 8, 3, 5), 12).unwrap();
        let pools = PoolSet::contiguous(12, &[3, 4]).unwrap();
        let est = Popularity::from_weights((1..=12).map(f64::from).collect()).unwrap();
        let obs = HcmsObservation {
            bit: 1,
            hash_index: 2,
            coord_index: 0,
        };
        let l = hcms_pool_likelihoods(&obs, &pools, &est, &mech).unwrap();
        assert!(l.iter().all(|v| (v - l[0]).abs() < 1e-15));
    }

    #[test]
    fn hcms_noiseless_mismatch_is_zero() {
        let mech = Mechanism::new(MechanismConfig::hcms(f64::INFINITY, 8, 1, 5), 12).unwrap();
        let pools = PoolSet::new(12, vec![vec![0], vec![1]]).unwrap();
        let est = Popularity::uniform(12).unwrap();
        for l in 0..8 {
            for bit in [1i8, -1] {
                let obs = HcmsObservation {
                    bit,
                    hash_index: 0,
                    coord_index: l,
                };
                let row = hcms_pool_likelihoods(&obs, &pools, &est, &mech).unwrap();
                let expected = hadamard_sign(l as u64, mech.hash_value(0, 0).unwrap() as u64);
                assert_eq!(row[0] == 0.0, expected != bit);
            }
        }
    }

    #[test]
    fn nonprivate_rows_are_one_hot_by_pool() {
        let mech = Mechanism::new(MechanismConfig::non_private(), 10).unwrap();
        let pools = PoolSet::contiguous(10, &[3, 3, 3]).unwrap();
        let est = Popularity::uniform(10).unwrap();
        assert_eq!(
            nonprivate_pool_likelihoods(9, &pools, &est, &mech).unwrap(),
            vec![0.0, 0.0, 0.0, 1.0]
        );
        let row = nonprivate_pool_likelihoods(7, &pools, &est, &mech).unwrap();
        assert!(row[2] > 0.0 && row.iter().enumerate().all(|(i, v)| i == 2 || *v == 0.0));
    }

    #[test]
    fn zero_mass_pool_is_config_error() {
        let mech = Mechanism::new(MechanismConfig::non_private(), 4).unwrap();
        let pools = PoolSet::contiguous(4, &[1, 1]).unwrap();
        let est = Popularity::new(vec![0.0, 0.5, 0.5, 0.0]).unwrap();
        assert!(matches!(
            nonprivate_pool_likelihoods(1, &pools, &est, &mech),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn symmetric_evidence_gives_uniform_confidence() {
        let scores = score_pools(&[vec![0.3; 7]], 6, 24).unwrap();
        assert!(scores.iter().all(|s| (s - 1.0).abs() < 1e-12));
        let mut rng = stream(0, purpose::GENERIC, 0);
        let log = scores.iter().map(|s| s.ln()).collect();
        let out = decide(log, 1.0, &mut rng);
        assert!((out.confidence - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(out.estimate, None);
    }

    #[test]
    fn favored_pool_scores_higher() {
        let rows = vec![vec![0.9, 0.1, 0.5], vec![0.8, 0.2, 0.5]];
        let s = score_pools(&rows, 2, 24).unwrap();
        assert!(s[0] > s[1]);
    }

    #[test]
    fn all_zero_row_is_degenerate() {
        let rows = vec![vec![0.2, 0.1, 0.0], vec![0.0; 3]];
        assert!(matches!(
            score_pools(&rows, 2, 8),
            Err(Error::DegenerateEvidence { index: 1 })
        ));
        assert!(score_pools(&[], 2, 8).is_err());
    }

    #[test]
    fn threshold_zero_never_abstains_and_confidence_at_least_uniform() {
        let mut rng = stream(3, purpose::GENERIC, 0);
        for _ in 0..200 {
            let rows: Vec<Vec<f64>> = (0..rng.random_range(1..20))
                .map(|_| (0..7).map(|_| rng.random::<f64>() + 1e-3).collect())
                .collect();
            let log: Vec<f64> = score_pools(&rows, 6, 12)
                .unwrap()
                .iter()
                .map(|s| s.ln())
                .collect();
            let out = decide(log, 0.0, &mut rng);
            assert!(out.estimate.is_some());
            assert!(out.confidence >= 1.0 / 6.0 - 1e-12 && out.confidence <= 1.0);
        }
    }

    #[test]
    fn ties_broken_uniformly() {
        let mut rng = stream(4, purpose::GENERIC, 0);
        let mut counts = [0u32; 3];
        for _ in 0..3000 {
            counts[decide(vec![0.0, 0.0, 0.0], 0.0, &mut rng).best_pool] += 1;
        }
        assert!(
            counts.iter().all(|&c| (800..1200).contains(&c)),
            "{counts:?}"
        );
        assert_eq!(decide(vec![-1.0, 0.0, -2.0], 0.0, &mut rng).best_pool, 1);
    }

    #[test]
    fn long_sequences_stay_finite() {
        let pools = PoolSet::contiguous(2600, &[228; 6]).unwrap();
        let p = zipf_mixture_popularity(&pools, 1.2).unwrap();
        let mech = Mechanism::new(MechanismConfig::cms(4.0, 1024, 65536, 0), 2600).unwrap();
        let attack = Attack::new(mech.clone(), &pools, &p, AttackConfig::default()).unwrap();
        let mut rng = stream(5, purpose::USER, 0);
        // A user glued to one object makes the integrand extremely peaked.
        let obs: Vec<Observation> = (0..180)
            .map(|_| mech.obfuscate(3, &mut rng).unwrap())
            .collect();
        let out = attack
            .run_prefixes(&obs, &[7, 30, 90, 180], &mut rng)
            .unwrap();
        for o in &out {
            assert!(o.log_scores.iter().all(|v| v.is_finite()));
            assert!(o.confidence.is_finite());
        }
        assert_eq!(out[3].best_pool, 0);
        assert!(out[3].confidence > 0.99);
    }

    #[test]
    fn baseline_never_abstains() {
        let mut rng = stream(1, purpose::GENERIC, 0);
        let a: Vec<usize> = (0..3)
            .map(|_| baseline_attack(6, &mut rng).best_pool)
            .collect();
        let mut rng = stream(1, purpose::GENERIC, 0);
        let b: Vec<usize> = (0..3)
            .map(|_| baseline_attack(6, &mut rng).best_pool)
            .collect();
        assert_eq!(a, b);
        let o = baseline_attack(6, &mut rng);
        assert_eq!(o.confidence, 1.0);
        assert!(o.estimate.is_some());
    }
}
