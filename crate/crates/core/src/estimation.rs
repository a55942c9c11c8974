//! Popularity estimation from an external dataset of CMS records, and the
//! utility metrics used to judge it.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::mechanism::{CmsObservation, Mechanism, Variant};
use crate::population::Popularity;
use crate::rng::{purpose, stream};
use crate::{Error, Result};

/// Records simulated per random stream when generating an external dataset.
pub const EXTERNAL_CHUNK: u64 = 1 << 17;

pub const SIMPLEX_TOL: f64 = 1e-9;
pub const SIMPLEX_MAX_ITER: usize = 100_000;

/// A materialized external dataset.
#[derive(Debug, Clone)]
pub struct ExternalDataset {
    pub records: Vec<CmsObservation>,
    pub mechanism: Mechanism,
}

impl ExternalDataset {
    /// `n` records of objects drawn iid from `p`, each obfuscated by
    /// `mechanism`. Produces exactly the records that
    /// [`simulate_external_counts`] aggregates.
    pub fn simulate(
        mechanism: &Mechanism,
        p: &Popularity,
        n: u64,
        master_seed: u64,
    ) -> Result<Self> {
        let mut records = Vec::with_capacity(n as usize);
        for_each_external_record(mechanism, p, n, master_seed, |r| {
            records.push(r);
            Ok(())
        })?;
        Ok(Self {
            records,
            mechanism: mechanism.clone(),
        })
    }
}

fn check_estimable(mechanism: &Mechanism) -> Result<()> {
    match mechanism.variant() {
        Variant::Cms | Variant::NoHashCms => Ok(()),
        other => Err(Error::config(format!(
            "frequency estimation is only defined for CMS records, not {other:?}"
        ))),
    }
}

fn for_each_external_record(
    mechanism: &Mechanism,
    p: &Popularity,
    n: u64,
    master_seed: u64,
    mut f: impl FnMut(CmsObservation) -> Result<()>,
) -> Result<()> {
    check_estimable(mechanism)?;
    if p.len() != mechanism.universe_size() as usize {
        return Err(Error::config(
            "popularity and mechanism disagree on the universe size",
        ));
    }
    let index = WeightedIndex::new(p.probs()).map_err(|e| Error::config(format!("{e}")))?;
    let mut done = 0u64;
    let mut chunk = 0u64;
    while done < n {
        let mut rng = stream(master_seed, purpose::EXTERNAL, chunk);
        let take = EXTERNAL_CHUNK.min(n - done);
        for _ in 0..take {
            let x = index.sample(&mut rng) as u32;
            f(mechanism.cms_obfuscate(x, &mut rng)?)?;
        }
        done += take;
        chunk += 1;
    }
    Ok(())
}

/// Per-(hash, bucket) counts of set bits across records.
#[derive(Debug, Clone)]
pub struct FrequencyCounts {
    mechanism: Mechanism,
    by_hash: Vec<Vec<u32>>,
    records: u64,
}

impl FrequencyCounts {
    pub fn new(mechanism: &Mechanism) -> Result<Self> {
        check_estimable(mechanism)?;
        Ok(Self {
            mechanism: mechanism.clone(),
            by_hash: vec![Vec::new(); mechanism.num_hashes() as usize],
            records: 0,
        })
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn push(&mut self, obs: &CmsObservation) -> Result<()> {
        self.mechanism.check_cms(obs)?;
        let m = self.mechanism.m() as usize;
        let slot = &mut self.by_hash[obs.hash_index as usize];
        if slot.is_empty() {
            *slot = vec![0; m];
        }
        for i in obs.bits.iter_ones() {
            slot[i] += 1;
        }
        self.records += 1;
        Ok(())
    }

    /// Integer count `C(x)` of records whose bit at `h_j(x)` is set.
    pub fn bucket_counts(&self) -> Vec<u64> {
        let hashes = self.mechanism.hash_family();
        let mut c = vec![0u64; self.mechanism.universe_size() as usize];
        for (j, slot) in self.by_hash.iter().enumerate() {
            if slot.is_empty() {
                continue;
            }
            for (x, cx) in c.iter_mut().enumerate() {
                *cx += slot[hashes.bucket(j as u32, x as u32) as usize] as u64;
            }
        }
        c
    }

    /// Debiased, collision-corrected frequency estimates `N_hat(x) / N`.
    pub fn frequencies(&self) -> Result<Vec<f64>> {
        if self.records == 0 {
            return Err(Error::argument(
                "frequency estimation needs at least one record",
            ));
        }
        let xi = self.mechanism.flips().xi;
        let scale = 1.0 - 2.0 * xi;
        if scale < 1e-6 {
            return Err(Error::numerical(format!(
                "privacy budget too small for estimation: 1 - 2 xi = {scale:e}"
            )));
        }
        let n = self.records as f64;
        let m = self.mechanism.m() as f64;
        let hashed = self.mechanism.variant() == Variant::Cms;
        if hashed && self.mechanism.m() == 1 {
            return Err(Error::numerical("collision correction needs m >= 2"));
        }
        Ok(self
            .bucket_counts()
            .into_iter()
            .map(|c| {
                let raw = (c as f64 - n * xi) / scale;
                let est = if hashed {
                    (raw - n / m) * m / (m - 1.0)
                } else {
                    raw
                };
                est / n
            })
            .collect())
    }
}

/// Counts for `n` simulated external records without materializing them.
pub fn simulate_external_counts(
    mechanism: &Mechanism,
    p: &Popularity,
    n: u64,
    master_seed: u64,
) -> Result<FrequencyCounts> {
    let mut counts = FrequencyCounts::new(mechanism)?;
    for_each_external_record(mechanism, p, n, master_seed, |r| counts.push(&r))?;
    Ok(counts)
}

pub fn estimate_frequencies(dataset: &ExternalDataset) -> Result<Vec<f64>> {
    let mut counts = FrequencyCounts::new(&dataset.mechanism)?;
    for r in &dataset.records {
        counts.push(r)?;
    }
    counts.frequencies()
}

pub fn estimate_popularity(dataset: &ExternalDataset) -> Result<Popularity> {
    project_to_simplex(&estimate_frequencies(dataset)?, SIMPLEX_TOL)
}

/// Alternating projections between `{sum = 1}` and the non-negative orthant.
pub fn project_to_simplex(v: &[f64], tol: f64) -> Result<Popularity> {
    project_to_simplex_capped(v, tol, SIMPLEX_MAX_ITER)
}

pub fn project_to_simplex_capped(v: &[f64], tol: f64, max_iter: usize) -> Result<Popularity> {
    if v.is_empty() {
        return Err(Error::argument("cannot project an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::argument(
            "cannot project a vector with non-finite entries",
        ));
    }
    let n = v.len() as f64;
    let mut x = v.to_vec();
    for _ in 0..max_iter {
        let shift = (1.0 - x.iter().sum::<f64>()) / n;
        let mut moved = 0.0f64;
        for xi in x.iter_mut() {
            let next = (*xi + shift).max(0.0);
            moved = moved.max((next - *xi).abs());
            *xi = next;
        }
        if moved < tol {
            let total: f64 = x.iter().sum();
            if !(total > 0.0) {
                return Err(Error::numerical("projection collapsed to zero"));
            }
            return Popularity::from_weights(x);
        }
    }
    Err(Error::numerical(format!(
        "simplex projection did not converge in {max_iter} iterations"
    )))
}

fn check_lengths(a: &Popularity, b: &Popularity) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::argument("distributions have different supports"));
    }
    Ok(())
}

/// Mean absolute error over the whole universe.
pub fn mae(est: &Popularity, truth: &Popularity) -> Result<f64> {
    check_lengths(est, truth)?;
    let total: f64 = est
        .probs()
        .iter()
        .zip(truth.probs())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(total / est.len() as f64)
}

/// Mean absolute percentage error over the `floor(0.8 |universe|)` objects
/// with the highest true probability (ties by lower index).
pub fn mape_top80(est: &Popularity, truth: &Popularity) -> Result<f64> {
    check_lengths(est, truth)?;
    let keep = (truth.len() * 4) / 5;
    let mut order: Vec<usize> = (0..truth.len()).collect();
    order.sort_by(|&a, &b| truth.probs()[b].total_cmp(&truth.probs()[a]));
    let mut sum = 0.0;
    let mut used = 0usize;
    for &x in &order[..keep] {
        let p = truth.probs()[x];
        if p > 0.0 {
            sum += (est.probs()[x] - p).abs() / p;
            used += 1;
        }
    }
    if used < keep {
        log::warn!(
            "{} zero-probability objects excluded from MAPE",
            keep - used
        );
    }
    if used == 0 {
        return Err(Error::argument(
            "no positive-probability objects to evaluate MAPE on",
        ));
    }
    Ok(100.0 * sum / used as f64)
}
