//! Result files.
//!
//! | file | header | order |
//! |------|--------|-------|
//! | `records.csv` | `user_id,n,true_pool,gamma,delta,estimate,confidence,correct` | user_id, n |
//! | `pn_curve.csv` | `n,threshold,null_rate,precision` | n, threshold |
//! | `auc.csv` | `adversary,n,auc` | n |
//! | `calibration.csv` | `n,bin_lo,bin_hi,count,success_rate` | n, bin_lo |
//! | `heatmap.csv` | `n,gamma_lo,gamma_hi,delta_lo,delta_hi,count,precision` | n, gamma_lo, delta_lo |
//! | `divergence.csv` | `user_id,jsd` (perturbed runs only) | user_id |
//! | `summary.json` | per-n AUC, overall precision, mean JSD | |
//! | `manifest.json` | the resolved scenario configuration | |
//!
//! `estimate` is empty when the attack abstained at the configured
//! threshold. `correct` is `1` when the maximum a posteriori pool equals the
//! true pool, independently of the threshold, so every curve can be rebuilt
//! from `records.csv` alone. Floats use the shortest text that parses back to
//! the same value.

use std::collections::BTreeMap;
use std::path::Path;

use poolinf_core::game::GameRecord;
use poolinf_core::metrics::{
    auc_pn, calibration, pn_curve, precision_heatmap, CalibrationBin, HeatCell, PnPoint,
    ProfiledGuess, ScoredGuess,
};
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::io::{check_header, csv_error, csv_reader, csv_writer, flush, write_json};
use crate::{Error, Result};

pub const RECORDS_HEADER: [&str; 8] = [
    "user_id",
    "n",
    "true_pool",
    "gamma",
    "delta",
    "estimate",
    "confidence",
    "correct",
];
pub const PN_HEADER: [&str; 4] = ["n", "threshold", "null_rate", "precision"];
pub const AUC_HEADER: [&str; 3] = ["adversary", "n", "auc"];
pub const CALIBRATION_HEADER: [&str; 5] = ["n", "bin_lo", "bin_hi", "count", "success_rate"];
pub const HEATMAP_HEADER: [&str; 7] = [
    "n",
    "gamma_lo",
    "gamma_hi",
    "delta_lo",
    "delta_hi",
    "count",
    "precision",
];
pub const DIVERGENCE_HEADER: [&str; 2] = ["user_id", "jsd"];

pub const CALIBRATION_WIDTH: f64 = 0.1;
pub const HEATMAP_BINS: usize = 10;

/// One line of `records.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub user_id: u64,
    pub n: usize,
    pub true_pool: usize,
    pub gamma: f64,
    pub delta: f64,
    pub estimate: Option<usize>,
    pub confidence: f64,
    #[serde(with = "bool_digit")]
    pub correct: bool,
}

mod bool_digit {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(D::Error::custom(format!("expected 0 or 1, got {v}"))),
        }
    }
}

/// Flatten game records into rows sorted by `(user_id, n)`.
pub fn record_rows(records: &[GameRecord]) -> Vec<RecordRow> {
    let mut rows: Vec<RecordRow> = records
        .iter()
        .flat_map(|r| {
            r.results.iter().enumerate().map(move |(i, p)| RecordRow {
                user_id: r.user_id,
                n: p.n,
                true_pool: r.true_pool,
                gamma: r.gamma,
                delta: r.delta,
                estimate: p.outcome.estimate,
                confidence: p.outcome.confidence,
                correct: r.correct(i),
            })
        })
        .collect();
    rows.sort_by_key(|r| (r.user_id, r.n));
    rows
}

/// All metrics for one value of `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NReport {
    pub n: usize,
    pub users: usize,
    pub auc: Option<f64>,
    /// Success rate of the maximum a posteriori guess.
    pub precision: f64,
    #[serde(skip)]
    pub curve: Vec<PnPoint>,
    #[serde(skip)]
    pub calibration: Vec<CalibrationBin>,
    #[serde(skip)]
    pub heatmap: Vec<HeatCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub adversary: String,
    pub k: usize,
    pub per_n: Vec<NReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_jsd: Option<f64>,
}

impl Report {
    pub fn auc(&self, n: usize) -> Option<f64> {
        self.per_n.iter().find(|r| r.n == n).and_then(|r| r.auc)
    }

    pub fn aucs(&self) -> Vec<f64> {
        self.per_n
            .iter()
            .map(|r| r.auc.unwrap_or(f64::NAN))
            .collect()
    }
}

pub fn build_report(
    rows: &[RecordRow],
    k: usize,
    adversary: &str,
    divergences: &[(u64, f64)],
) -> Result<Report> {
    let mut by_n: BTreeMap<usize, Vec<&RecordRow>> = BTreeMap::new();
    for r in rows {
        by_n.entry(r.n).or_default().push(r);
    }
    let mut per_n = Vec::with_capacity(by_n.len());
    for (n, rs) in by_n {
        let guesses: Vec<ScoredGuess> = rs
            .iter()
            .map(|r| ScoredGuess {
                confidence: r.confidence,
                correct: r.correct,
            })
            .collect();
        let profiled: Vec<ProfiledGuess> = rs
            .iter()
            .map(|r| ProfiledGuess {
                gamma: r.gamma,
                delta: r.delta,
                correct: r.correct,
            })
            .collect();
        let curve = pn_curve(&guesses);
        per_n.push(NReport {
            n,
            users: rs.len(),
            auc: auc_pn(&curve),
            precision: rs.iter().filter(|r| r.correct).count() as f64 / rs.len() as f64,
            curve,
            calibration: calibration(&guesses, CALIBRATION_WIDTH)?,
            heatmap: precision_heatmap(&profiled, k, HEATMAP_BINS, HEATMAP_BINS)?,
        });
    }
    let mean_jsd = (!divergences.is_empty())
        .then(|| divergences.iter().map(|d| d.1).sum::<f64>() / divergences.len() as f64);
    Ok(Report {
        adversary: adversary.to_string(),
        k,
        per_n,
        mean_jsd,
    })
}

pub(crate) fn csv_rows<const N: usize>(
    path: &Path,
    header: [&str; N],
    rows: impl IntoIterator<Item = [String; N]>,
) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    flush(path, w)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_records(path: &Path, rows: &[RecordRow]) -> Result<()> {
    csv_rows(
        path,
        RECORDS_HEADER,
        rows.iter().map(|r| {
            [
                r.user_id.to_string(),
                r.n.to_string(),
                r.true_pool.to_string(),
                r.gamma.to_string(),
                r.delta.to_string(),
                opt(r.estimate),
                r.confidence.to_string(),
                u8::from(r.correct).to_string(),
            ]
        }),
    )
}

pub fn read_records(path: &Path) -> Result<Vec<RecordRow>> {
    let mut reader = csv_reader(path)?;
    check_header(path, &mut reader, &RECORDS_HEADER)?;
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::parse(path, format!("line {}: {e}", i + 2))))
        .collect()
}

pub fn read_divergences(path: &Path) -> Result<Vec<(u64, f64)>> {
    let mut reader = csv_reader(path)?;
    check_header(path, &mut reader, &DIVERGENCE_HEADER)?;
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::parse(path, format!("line {}: {e}", i + 2))))
        .collect()
}

pub fn divergences(records: &[GameRecord]) -> Vec<(u64, f64)> {
    let mut d: Vec<(u64, f64)> = records
        .iter()
        .filter_map(|r| r.divergence.map(|d| (r.user_id, d)))
        .collect();
    d.sort_by_key(|x| x.0);
    d
}

/// Everything derived from records: curves, AUC, calibration, heatmap and
/// the summary.
pub fn write_report(dir: &Path, report: &Report) -> Result<()> {
    csv_rows(
        &dir.join("pn_curve.csv"),
        PN_HEADER,
        report.per_n.iter().flat_map(|r| {
            r.curve.iter().map(move |p| {
                [
                    r.n.to_string(),
                    p.threshold.to_string(),
                    p.null_rate.to_string(),
                    p.precision.to_string(),
                ]
            })
        }),
    )?;
    csv_rows(
        &dir.join("auc.csv"),
        AUC_HEADER,
        report.per_n.iter().filter_map(|r| {
            r.auc
                .map(|a| [report.adversary.clone(), r.n.to_string(), a.to_string()])
        }),
    )?;
    csv_rows(
        &dir.join("calibration.csv"),
        CALIBRATION_HEADER,
        report.per_n.iter().flat_map(|r| {
            r.calibration.iter().map(move |b| {
                [
                    r.n.to_string(),
                    b.bin_lo.to_string(),
                    b.bin_hi.to_string(),
                    b.count.to_string(),
                    b.success_rate.to_string(),
                ]
            })
        }),
    )?;
    csv_rows(
        &dir.join("heatmap.csv"),
        HEATMAP_HEADER,
        report.per_n.iter().flat_map(|r| {
            r.heatmap.iter().map(move |c| {
                [
                    r.n.to_string(),
                    c.gamma_lo.to_string(),
                    c.gamma_hi.to_string(),
                    c.delta_lo.to_string(),
                    c.delta_hi.to_string(),
                    c.count.to_string(),
                    c.precision.to_string(),
                ]
            })
        }),
    )?;
    write_json(&dir.join("summary.json"), report)
}

/// Records, divergences (when present), the report and the manifest.
pub fn write_outputs(
    dir: &Path,
    config: &ScenarioConfig,
    k: usize,
    records: &[GameRecord],
) -> Result<Report> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows = record_rows(records);
    write_records(&dir.join("records.csv"), &rows)?;
    let div = divergences(records);
    if config.perturb_sigma > 0.0 {
        csv_rows(
            &dir.join("divergence.csv"),
            DIVERGENCE_HEADER,
            div.iter().map(|(u, d)| [u.to_string(), d.to_string()]),
        )?;
    }
    let report = build_report(&rows, k, &config.label(), &div)?;
    write_report(dir, &report)?;
    write_json(&dir.join("manifest.json"), config)?;
    Ok(report)
}
