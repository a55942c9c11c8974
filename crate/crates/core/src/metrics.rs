//! Evaluation metrics over many attacked users.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::population::UserProfile;
use crate::{Error, Result};

/// One user's attack result at a fixed number of observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredGuess {
    pub confidence: f64,
    /// Whether the maximum a posteriori pool is the true one.
    pub correct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PnPoint {
    pub threshold: f64,
    pub null_rate: f64,
    pub precision: f64,
}

/// Precision against null rate as the threshold sweeps every observed
/// confidence plus 0 and 1. Thresholds at which every user abstains are
/// left out.
pub fn pn_curve(guesses: &[ScoredGuess]) -> Vec<PnPoint> {
    if guesses.is_empty() {
        return Vec::new();
    }
    let mut sorted: Vec<ScoredGuess> = guesses.to_vec();
    sorted.sort_by(|a, b| a.confidence.total_cmp(&b.confidence));
    // correct_from[i] = correct guesses among sorted[i..]
    let mut correct_from = vec![0usize; sorted.len() + 1];
    for i in (0..sorted.len()).rev() {
        correct_from[i] = correct_from[i + 1] + usize::from(sorted[i].correct);
    }
    let mut thresholds: Vec<f64> = sorted.iter().map(|g| g.confidence).collect();
    thresholds.push(0.0);
    thresholds.push(1.0);
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let total = sorted.len();
    let mut out = Vec::with_capacity(thresholds.len());
    let mut start = 0usize;
    for t in thresholds {
        while start < total && sorted[start].confidence < t {
            start += 1;
        }
        let guessing = total - start;
        if guessing == 0 {
            break;
        }
        out.push(PnPoint {
            threshold: t,
            null_rate: start as f64 / total as f64,
            precision: correct_from[start] as f64 / guessing as f64,
        });
    }
    out
}

/// Trapezoidal area under the precision/null-rate curve, with the last
/// precision carried to null rate 1. `None` for an empty curve.
pub fn auc_pn(curve: &[PnPoint]) -> Option<f64> {
    let last = curve.last()?;
    let mut area = 0.0;
    for w in curve.windows(2) {
        area += 0.5 * (w[0].precision + w[1].precision) * (w[1].null_rate - w[0].null_rate);
    }
    area += last.precision * (1.0 - last.null_rate);
    Some(area.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
    pub success_rate: f64,
}

/// Success rate per confidence bin `[lo, lo + width)`; confidence 1 lands in
/// the last bin. Empty bins are omitted.
pub fn calibration(guesses: &[ScoredGuess], bin_width: f64) -> Result<Vec<CalibrationBin>> {
    if !(bin_width > 0.0 && bin_width <= 1.0) {
        return Err(Error::argument(format!(
            "bin width {bin_width} outside (0, 1]"
        )));
    }
    let bins = libm::ceil(1.0 / bin_width - 1e-9) as usize;
    let mut count = vec![0usize; bins];
    let mut hits = vec![0usize; bins];
    for g in guesses {
        let b = ((g.confidence / bin_width + 1e-9) as usize).min(bins - 1);
        count[b] += 1;
        hits[b] += usize::from(g.correct);
    }
    Ok((0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| CalibrationBin {
            bin_lo: b as f64 / (1.0 / bin_width),
            bin_hi: ((b + 1) as f64 / (1.0 / bin_width)).min(1.0),
            count: count[b],
            success_rate: hits[b] as f64 / count[b] as f64,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatCell {
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    pub delta_lo: f64,
    pub delta_hi: f64,
    pub count: usize,
    pub precision: f64,
}

/// A user's behavioral parameters and whether the attack got them right.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfiledGuess {
    pub gamma: f64,
    pub delta: f64,
    pub correct: bool,
}

/// Precision over a uniform grid on `gamma in (0, 1]` and
/// `delta in (1/k, 1]`; cells are half-open on the left. Empty cells are
/// omitted.
pub fn precision_heatmap(
    users: &[ProfiledGuess],
    k: usize,
    gamma_bins: usize,
    delta_bins: usize,
) -> Result<Vec<HeatCell>> {
    if k < 2 || gamma_bins == 0 || delta_bins == 0 {
        return Err(Error::argument(
            "heatmap needs k >= 2 and at least one bin per axis",
        ));
    }
    let d0 = 1.0 / k as f64;
    let dw = (1.0 - d0) / delta_bins as f64;
    let gw = 1.0 / gamma_bins as f64;
    let cell = |v: f64, lo: f64, width: f64, bins: usize| -> usize {
        let pos = libm::ceil((v - lo) / width - 1e-9) as isize - 1;
        pos.clamp(0, bins as isize - 1) as usize
    };
    let mut count = vec![0usize; gamma_bins * delta_bins];
    let mut hits = vec![0usize; gamma_bins * delta_bins];
    for u in users {
        let i = cell(u.gamma, 0.0, gw, gamma_bins) * delta_bins + cell(u.delta, d0, dw, delta_bins);
        count[i] += 1;
        hits[i] += usize::from(u.correct);
    }
    let mut out = Vec::new();
    for gi in 0..gamma_bins {
        for di in 0..delta_bins {
            let i = gi * delta_bins + di;
            if count[i] == 0 {
                continue;
            }
            out.push(HeatCell {
                gamma_lo: gi as f64 / gamma_bins as f64,
                gamma_hi: (gi + 1) as f64 / gamma_bins as f64,
                delta_lo: d0 + di as f64 * dw,
                delta_hi: d0 + (di + 1) as f64 * dw,
                count: count[i],
                precision: hits[i] as f64 / count[i] as f64,
            });
        }
    }
    Ok(out)
}

/// Preferred pool uniform over `k`, `gamma` uniform on `(0, 1]`, `delta`
/// uniform on `(1/k, 1]`.
pub fn sample_profile<R: Rng + ?Sized>(k: usize, rng: &mut R) -> UserProfile {
    let preferred_pool = rng.random_range(0..k);
    let gamma = 1.0 - rng.random::<f64>();
    let lo = 1.0 / k as f64;
    let delta = lo + (1.0 - lo) * (1.0 - rng.random::<f64>());
    UserProfile {
        preferred_pool,
        gamma,
        delta,
    }
}
