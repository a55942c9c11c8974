//! Obfuscation mechanisms: CMS, HCMS, hash-free CMS and the identity.
//!
//! A [`Mechanism`] is a validated [`MechanismConfig`] bound to a universe
//! size. It owns the hash family and the flip probabilities and is cheap to
//! share between threads.

use alloc::format;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::hash::HashFamily;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Cms,
    Hcms,
    NoHashCms,
    NonPrivate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismConfig {
    pub variant: Variant,
    pub epsilon: f64,
    #[serde(default = "default_m")]
    pub m: u32,
    #[serde(default = "default_num_hashes")]
    pub num_hashes: u32,
    #[serde(default)]
    pub hash_seed: u64,
}

fn default_m() -> u32 {
    1024
}

fn default_num_hashes() -> u32 {
    65536
}

impl MechanismConfig {
    pub fn cms(epsilon: f64, m: u32, num_hashes: u32, hash_seed: u64) -> Self {
        Self {
            variant: Variant::Cms,
            epsilon,
            m,
            num_hashes,
            hash_seed,
        }
    }

    pub fn hcms(epsilon: f64, m: u32, num_hashes: u32, hash_seed: u64) -> Self {
        Self {
            variant: Variant::Hcms,
            ..Self::cms(epsilon, m, num_hashes, hash_seed)
        }
    }

    pub fn no_hash_cms(epsilon: f64, universe_size: u32) -> Self {
        Self {
            variant: Variant::NoHashCms,
            ..Self::cms(epsilon, universe_size, 1, 0)
        }
    }

    pub fn non_private() -> Self {
        Self {
            variant: Variant::NonPrivate,
            ..Self::cms(f64::INFINITY, 1, 1, 0)
        }
    }

    /// Checks that do not depend on the universe.
    pub fn validate(&self) -> Result<()> {
        if self.variant == Variant::NonPrivate {
            return Ok(());
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.m == 0 {
            return Err(Error::config("m must be at least 1"));
        }
        if self.num_hashes == 0 {
            return Err(Error::config("num_hashes must be at least 1"));
        }
        match self.variant {
            Variant::Hcms if !self.m.is_power_of_two() => Err(Error::config(format!(
                "HCMS needs m to be a power of two, got {}",
                self.m
            ))),
            Variant::NoHashCms if self.num_hashes != 1 => Err(Error::config(
                "the hash-free CMS variant uses exactly one (bijective) hash",
            )),
            _ => Ok(()),
        }
    }

    pub fn flip_probabilities(&self) -> FlipProbabilities {
        FlipProbabilities::for_epsilon(self.epsilon)
    }
}

/// Per-bit flip probability of CMS (`xi`) and of the single HCMS bit
/// (`xi_prime`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipProbabilities {
    pub xi: f64,
    pub xi_prime: f64,
}

impl FlipProbabilities {
    pub fn for_epsilon(epsilon: f64) -> Self {
        Self {
            xi: 1.0 / (1.0 + libm::exp(epsilon / 2.0)),
            xi_prime: 1.0 / (1.0 + libm::exp(epsilon)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CmsObservation {
    pub bits: BitVector,
    pub hash_index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HcmsObservation {
    /// `+1` or `-1`.
    pub bit: i8,
    pub hash_index: u32,
    pub coord_index: u32,
}

impl HcmsObservation {
    /// Wire encoding: `+1` is stored as `1`, `-1` as `0`.
    pub fn wire_bit(&self) -> u8 {
        u8::from(self.bit > 0)
    }

    pub fn bit_from_wire(wire: u8) -> Result<i8> {
        match wire {
            1 => Ok(1),
            0 => Ok(-1),
            other => Err(Error::Data(format!("HCMS bit must be 0 or 1, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Observation {
    Cms(CmsObservation),
    Hcms(HcmsObservation),
    Raw(u32),
}

/// Entry `(row, col)` of the `2^s x 2^s` Hadamard matrix built by the
/// recursion `H_0 = [1]`, `H_s = [[H, H], [H, -H]]`.
pub fn hadamard_entry(row: u64, col: u64, s: u32) -> Result<i8> {
    if s >= 64 || row >> s != 0 || col >> s != 0 {
        return Err(Error::argument(format!(
            "Hadamard indices ({row}, {col}) out of range for s = {s}"
        )));
    }
    Ok(hadamard_sign(row, col))
}

#[inline]
pub(crate) fn hadamard_sign(row: u64, col: u64) -> i8 {
    if (row & col).count_ones() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// A mechanism bound to a universe.
#[derive(Debug, Clone)]
pub struct Mechanism {
    config: MechanismConfig,
    universe_size: u32,
    hashes: HashFamily,
    flips: FlipProbabilities,
}

impl Mechanism {
    pub fn new(config: MechanismConfig, universe_size: u32) -> Result<Self> {
        config.validate()?;
        if universe_size == 0 {
            return Err(Error::config("universe must contain at least one object"));
        }
        let hashes = match config.variant {
            Variant::NoHashCms => {
                if config.m != universe_size {
                    return Err(Error::config(format!(
                        "the hash-free CMS variant needs m = |universe| = {universe_size}, got {}",
                        config.m
                    )));
                }
                HashFamily::identity(universe_size)
            }
            Variant::NonPrivate => HashFamily::identity(universe_size),
            Variant::Cms | Variant::Hcms => {
                HashFamily::keyed(config.hash_seed, config.m, config.num_hashes)
            }
        };
        Ok(Self {
            flips: config.flip_probabilities(),
            config,
            universe_size,
            hashes,
        })
    }

    pub fn config(&self) -> &MechanismConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn universe_size(&self) -> u32 {
        self.universe_size
    }

    pub fn m(&self) -> u32 {
        self.hashes.m()
    }

    pub fn num_hashes(&self) -> u32 {
        self.hashes.num_hashes()
    }

    pub fn flips(&self) -> FlipProbabilities {
        self.flips
    }

    pub fn hash_family(&self) -> &HashFamily {
        &self.hashes
    }

    /// Bucket of `object` under hash `hash_index`, with range checks.
    pub fn hash_value(&self, hash_index: u32, object: u32) -> Result<u32> {
        if hash_index >= self.num_hashes() {
            return Err(Error::argument(format!(
                "hash index {hash_index} out of range [0, {})",
                self.num_hashes()
            )));
        }
        if object >= self.universe_size {
            return Err(Error::argument(format!(
                "object {object} out of range [0, {})",
                self.universe_size
            )));
        }
        Ok(self.hashes.bucket(hash_index, object))
    }

    fn check_object(&self, object: u32) -> Result<()> {
        if object >= self.universe_size {
            return Err(Error::argument(format!(
                "object {object} out of range [0, {})",
                self.universe_size
            )));
        }
        Ok(())
    }

    pub fn obfuscate<R: Rng + ?Sized>(&self, object: u32, rng: &mut R) -> Result<Observation> {
        match self.variant() {
            Variant::Cms | Variant::NoHashCms => {
                self.cms_obfuscate(object, rng).map(Observation::Cms)
            }
            Variant::Hcms => self.hcms_obfuscate(object, rng).map(Observation::Hcms),
            Variant::NonPrivate => {
                self.check_object(object)?;
                Ok(nonprivate_obfuscate(object))
            }
        }
    }

    pub fn cms_obfuscate<R: Rng + ?Sized>(
        &self,
        object: u32,
        rng: &mut R,
    ) -> Result<CmsObservation> {
        if !matches!(self.variant(), Variant::Cms | Variant::NoHashCms) {
            return Err(Error::config(format!(
                "cms_obfuscate called on a {:?} mechanism",
                self.variant()
            )));
        }
        self.check_object(object)?;
        let hash_index = rng.random_range(0..self.num_hashes());
        let m = self.m() as usize;
        let mut bits = BitVector::one_hot(m, self.hashes.bucket(hash_index, object) as usize);
        for_each_flip(m, self.flips.xi, rng, |i| bits.flip(i));
        Ok(CmsObservation { bits, hash_index })
    }

    pub fn hcms_obfuscate<R: Rng + ?Sized>(
        &self,
        object: u32,
        rng: &mut R,
    ) -> Result<HcmsObservation> {
        if self.variant() != Variant::Hcms {
            return Err(Error::config(format!(
                "hcms_obfuscate called on a {:?} mechanism",
                self.variant()
            )));
        }
        self.check_object(object)?;
        let hash_index = rng.random_range(0..self.num_hashes());
        let coord_index = rng.random_range(0..self.m());
        let column = self.hashes.bucket(hash_index, object);
        let mut bit = hadamard_sign(coord_index as u64, column as u64);
        if rng.random::<f64>() < self.flips.xi_prime {
            bit = -bit;
        }
        Ok(HcmsObservation {
            bit,
            hash_index,
            coord_index,
        })
    }

    /// Exact probability that obfuscating `object` yields `obs`.
    pub fn output_probability(&self, obs: &Observation, object: u32) -> Result<f64> {
        self.check_object(object)?;
        let hashes = self.num_hashes() as f64;
        match (self.variant(), obs) {
            (Variant::Cms | Variant::NoHashCms, Observation::Cms(o)) => {
                self.check_cms(o)?;
                let hot = self.hashes.bucket(o.hash_index, object) as usize;
                let ones = o.bits.count_ones();
                let distance = if o.bits.get(hot) { ones - 1 } else { ones + 1 };
                let xi = self.flips.xi;
                let m = self.m() as i32;
                Ok(libm::pow(xi, distance as f64)
                    * libm::pow(1.0 - xi, (m - distance as i32) as f64)
                    / hashes)
            }
            (Variant::Hcms, Observation::Hcms(o)) => {
                self.check_hcms(o)?;
                let column = self.hashes.bucket(o.hash_index, object);
                let expected = hadamard_sign(o.coord_index as u64, column as u64);
                let p = if expected == o.bit {
                    1.0 - self.flips.xi_prime
                } else {
                    self.flips.xi_prime
                };
                Ok(p / hashes / self.m() as f64)
            }
            (Variant::NonPrivate, Observation::Raw(x)) => Ok(if *x == object { 1.0 } else { 0.0 }),
            (variant, _) => Err(Error::argument(format!(
                "observation kind does not match a {variant:?} mechanism"
            ))),
        }
    }

    pub(crate) fn check_cms(&self, o: &CmsObservation) -> Result<()> {
        if o.bits.len() != self.m() as usize {
            return Err(Error::Data(format!(
                "observation has {} bits, mechanism expects {}",
                o.bits.len(),
                self.m()
            )));
        }
        if o.hash_index >= self.num_hashes() {
            return Err(Error::Data(format!(
                "hash index {} out of range [0, {})",
                o.hash_index,
                self.num_hashes()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_hcms(&self, o: &HcmsObservation) -> Result<()> {
        if o.hash_index >= self.num_hashes()
            || o.coord_index >= self.m()
            || (o.bit != 1 && o.bit != -1)
        {
            return Err(Error::Data(format!("invalid HCMS observation {o:?}")));
        }
        Ok(())
    }
}

/// The identity mechanism of the non-private scenario.
pub fn nonprivate_obfuscate(object: u32) -> Observation {
    Observation::Raw(object)
}

/// Calls `f` on each of `m` positions independently with probability `p`,
/// in increasing order. Gaps between selected positions are drawn from the
/// geometric distribution, which is equivalent to `m` Bernoulli draws.
pub(crate) fn for_each_flip<R: Rng + ?Sized>(
    m: usize,
    p: f64,
    rng: &mut R,
    mut f: impl FnMut(usize),
) {
    if !(p > 0.0) {
        return;
    }
    if p >= 1.0 {
        (0..m).for_each(f);
        return;
    }
    let log_q = libm::log1p(-p);
    let mut pos = 0usize;
    loop {
        let u = 1.0 - rng.random::<f64>();
        let gap = libm::floor(libm::log(u) / log_q);
        if gap >= (m - pos) as f64 {
            return;
        }
        pos += gap as usize;
        f(pos);
        pos += 1;
        if pos >= m {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{purpose, stream};
    use alloc::vec::Vec;

    fn chi_square_uniform(counts: &[u64]) -> f64 {
        let total: u64 = counts.iter().sum();
        let expected = total as f64 / counts.len() as f64;
        counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum()
    }

    #[test]
    fn flip_probability_values() {
        let f = FlipProbabilities::for_epsilon(4.0);
        assert!((f.xi - 0.119_202_922_022_117_6).abs() < 1e-12);
        assert!((f.xi_prime - 0.017_986_209_962_091_56).abs() < 1e-12);
        for eps in [0.01, 0.5, 1.0, 4.0, 8.0, 20.0] {
            let f = FlipProbabilities::for_epsilon(eps);
            assert!(f.xi < 0.5 && f.xi_prime < f.xi);
        }
    }

    #[test]
    fn validation() {
        assert!(MechanismConfig::cms(-1.0, 8, 2, 0).validate().is_err());
        assert!(MechanismConfig::cms(0.0, 8, 2, 0).validate().is_err());
        assert!(MechanismConfig::cms(1.0, 0, 2, 0).validate().is_err());
        assert!(MechanismConfig::cms(1.0, 8, 0, 0).validate().is_err());
        assert!(MechanismConfig::hcms(1.0, 12, 2, 0).validate().is_err());
        assert!(MechanismConfig::hcms(4.0, 32768, 1024, 0)
            .validate()
            .is_ok());
        let mut nohash = MechanismConfig::no_hash_cms(1.0, 10);
        assert!(Mechanism::new(nohash.clone(), 10).is_ok());
        assert!(Mechanism::new(nohash.clone(), 11).is_err());
        nohash.num_hashes = 2;
        assert!(nohash.validate().is_err());
    }

    #[test]
    fn hash_value_identity_and_range_errors() {
        let nohash = Mechanism::new(MechanismConfig::no_hash_cms(1.0, 10), 10).unwrap();
        assert_eq!(nohash.hash_value(0, 5).unwrap(), 5);
        let cms = Mechanism::new(MechanismConfig::cms(4.0, 64, 4, 9), 100).unwrap();
        assert_eq!(
            cms.hash_value(3, 42).unwrap(),
            cms.hash_value(3, 42).unwrap()
        );
        assert!(cms.hash_value(4, 0).is_err());
        assert!(cms.hash_value(0, 100).is_err());
    }

    #[test]
    fn hash_uniformity_chi_square() {
        // 1023 degrees of freedom; chi2 > 1170 has p < 0.001.
        let cms = Mechanism::new(MechanismConfig::cms(4.0, 1024, 1, 2024), 100_000).unwrap();
        let mut counts = alloc::vec![0u64; 1024];
        for x in 0..100_000 {
            counts[cms.hash_value(0, x).unwrap() as usize] += 1;
        }
        let chi2 = chi_square_uniform(&counts);
        assert!(chi2 < 1170.0, "chi2 = {chi2}");
    }

    #[test]
    fn infinite_epsilon_is_one_hot() {
        let cms = Mechanism::new(MechanismConfig::cms(f64::INFINITY, 64, 8, 1), 50).unwrap();
        let mut rng = stream(1, purpose::GENERIC, 0);
        for x in 0..50 {
            let o = cms.cms_obfuscate(x, &mut rng).unwrap();
            let hot = cms.hash_value(o.hash_index, x).unwrap() as usize;
            assert_eq!(o.bits, BitVector::one_hot(64, hot));
        }
    }

    #[test]
    fn cms_flip_frequency_matches_xi() {
        let cms = Mechanism::new(MechanismConfig::cms(4.0, 4, 1, 3), 10).unwrap();
        let xi = cms.flips().xi;
        let hot = cms.hash_value(0, 7).unwrap() as usize;
        let mut rng = stream(5, purpose::GENERIC, 0);
        let runs = 100_000;
        let mut flipped = [0u32; 4];
        for _ in 0..runs {
            let o = cms.cms_obfuscate(7, &mut rng).unwrap();
            for (i, count) in flipped.iter_mut().enumerate() {
                if o.bits.get(i) != (i == hot) {
                    *count += 1;
                }
            }
        }
        let se = (xi * (1.0 - xi) / runs as f64).sqrt();
        for c in flipped {
            let freq = c as f64 / runs as f64;
            assert!((freq - xi).abs() < 3.0 * se, "freq {freq} vs xi {xi}");
        }
    }

    #[test]
    fn geometric_flips_match_bernoulli_rate_for_long_vectors() {
        let mut rng = stream(11, purpose::GENERIC, 0);
        let (m, p, runs) = (1024usize, 0.3, 2000);
        let mut hits = alloc::vec![0u32; m];
        for _ in 0..runs {
            let mut last = None;
            for_each_flip(m, p, &mut rng, |i| {
                assert!(last.map_or(true, |l| i > l));
                last = Some(i);
                hits[i] += 1;
            });
        }
        let total: u32 = hits.iter().sum();
        let mean = total as f64 / (m * runs) as f64;
        let se = (p * (1.0 - p) / (m * runs) as f64).sqrt();
        assert!((mean - p).abs() < 4.0 * se);
        // first and last positions are not starved
        let edge = (hits[0] + hits[m - 1]) as f64 / (2 * runs) as f64;
        assert!((edge - p).abs() < 0.05);
    }

    #[test]
    fn cms_output_probability_matches_sampler() {
        let cms = Mechanism::new(MechanismConfig::cms(2.0, 4, 2, 17), 6).unwrap();
        let mut rng = stream(8, purpose::GENERIC, 1);
        let runs = 200_000u32;
        let mut counts = alloc::vec![0u32; 32];
        for _ in 0..runs {
            let o = cms.cms_obfuscate(3, &mut rng).unwrap();
            let code = o.hash_index as usize * 16 + o.bits.words()[0] as usize;
            counts[code] += 1;
        }
        let mut total_p = 0.0;
        for code in 0..32u64 {
            let mut bits = BitVector::zeros(4);
            for i in 0..4 {
                bits.set(i, (code >> i) & 1 == 1);
            }
            let obs = Observation::Cms(CmsObservation {
                bits,
                hash_index: (code / 16) as u32,
            });
            let p = cms.output_probability(&obs, 3).unwrap();
            total_p += p;
            let se = (p * (1.0 - p) / runs as f64).sqrt();
            let freq = counts[code as usize] as f64 / runs as f64;
            assert!(
                (freq - p).abs() < 4.0 * se + 1e-9,
                "code {code}: {freq} vs {p}"
            );
        }
        assert!((total_p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hcms_first_row_is_all_plus_without_noise() {
        let hcms = Mechanism::new(MechanismConfig::hcms(f64::INFINITY, 16, 4, 5), 40).unwrap();
        let mut rng = stream(2, purpose::GENERIC, 0);
        for _ in 0..2000 {
            let x = rng.random_range(0..40);
            let o = hcms.hcms_obfuscate(x, &mut rng).unwrap();
            let column = hcms.hash_value(o.hash_index, x).unwrap() as u64;
            assert_eq!(
                o.bit,
                hadamard_entry(o.coord_index as u64, column, 4).unwrap()
            );
            if o.coord_index == 0 {
                assert_eq!(o.bit, 1);
            }
        }
    }

    #[test]
    fn hcms_flip_rate() {
        let hcms = Mechanism::new(MechanismConfig::hcms(1.0, 8, 2, 5), 40).unwrap();
        let xi = hcms.flips().xi_prime;
        let mut rng = stream(3, purpose::GENERIC, 0);
        let runs = 100_000;
        let mut flipped = 0;
        for _ in 0..runs {
            let o = hcms.hcms_obfuscate(11, &mut rng).unwrap();
            let column = hcms.hash_value(o.hash_index, 11).unwrap() as u64;
            if o.bit != hadamard_sign(o.coord_index as u64, column) {
                flipped += 1;
            }
        }
        let se = (xi * (1.0 - xi) / runs as f64).sqrt();
        assert!((flipped as f64 / runs as f64 - xi).abs() < 3.0 * se);
    }

    fn recursive_hadamard(s: u32) -> Vec<Vec<i8>> {
        let mut h = alloc::vec![alloc::vec![1i8]];
        for _ in 0..s {
            let n = h.len();
            let mut next = alloc::vec![alloc::vec![0i8; 2 * n]; 2 * n];
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

    #[test]
    fn hadamard_matches_recursion_and_is_orthogonal() {
        assert_eq!(hadamard_entry(0, 0, 0).unwrap(), 1);
        assert_eq!(hadamard_entry(1, 1, 1).unwrap(), -1);
        assert_eq!(hadamard_entry(0, 1, 1).unwrap(), 1);
        assert_eq!(hadamard_entry(1, 0, 1).unwrap(), 1);
        for s in 0..=4u32 {
            let h = recursive_hadamard(s);
            let n = 1u64 << s;
            for r in 0..n {
                for c in 0..n {
                    assert_eq!(hadamard_entry(r, c, s).unwrap(), h[r as usize][c as usize]);
                }
                for r2 in 0..n {
                    let dot: i32 = (0..n)
                        .map(|c| {
                            hadamard_entry(r, c, s).unwrap() as i32
                                * hadamard_entry(r2, c, s).unwrap() as i32
                        })
                        .sum();
                    assert_eq!(dot, if r == r2 { n as i32 } else { 0 });
                }
            }
        }
        assert!(hadamard_entry(2, 0, 1).is_err());
        assert!(hadamard_entry(0, 4, 2).is_err());
    }

    #[test]
    fn wrong_variant_is_config_error() {
        let cms = Mechanism::new(MechanismConfig::cms(1.0, 8, 2, 0), 10).unwrap();
        let mut rng = stream(0, purpose::GENERIC, 0);
        assert!(matches!(
            cms.hcms_obfuscate(1, &mut rng),
            Err(Error::Config(_))
        ));
        let hcms = Mechanism::new(MechanismConfig::hcms(1.0, 8, 2, 0), 10).unwrap();
        assert!(matches!(
            hcms.cms_obfuscate(1, &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn nonprivate_is_identity() {
        let np = Mechanism::new(MechanismConfig::non_private(), 10).unwrap();
        let mut rng = stream(0, purpose::GENERIC, 0);
        assert_eq!(nonprivate_obfuscate(7), Observation::Raw(7));
        let seq: Vec<u32> = (0..10).rev().collect();
        let out: Vec<Observation> = seq
            .iter()
            .map(|&x| np.obfuscate(x, &mut rng).unwrap())
            .collect();
        assert_eq!(
            out,
            seq.iter().map(|&x| Observation::Raw(x)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn obfuscation_is_deterministic_per_stream() {
        let cms = Mechanism::new(MechanismConfig::cms(4.0, 256, 1000, 4), 500).unwrap();
        let run = || {
            let mut rng = stream(99, purpose::USER, 12);
            (0..50)
                .map(|x| cms.obfuscate(x, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
