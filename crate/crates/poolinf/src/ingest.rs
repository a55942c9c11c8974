//! Real per-user event logs.
//!
//! The log is a CSV with header `user_id,order,object_id`: one row per event,
//! `order` strictly increasing within each user. Users are split at random
//! into an attacked population and an external population; the external
//! objects are what the strong adversary obfuscates to estimate popularity.

use std::collections::BTreeMap;
use std::path::Path;

use poolinf_core::population::{profile_from_sequence, ExtractedProfile, PoolSet};
use poolinf_core::rng::{purpose, stream};
use rand::seq::SliceRandom;
use serde::Deserialize;

use crate::io::{check_header, csv_reader};
use crate::output::csv_rows;
use crate::{Error, Result};

pub const EVENT_HEADER: [&str; 3] = ["user_id", "order", "object_id"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestOptions {
    /// Sequence length per attacked user.
    pub target_len: usize,
    /// Fraction of eligible users on the attacked side.
    pub split: f64,
    /// Copies of the external objects.
    pub dup_external: usize,
    /// Users with fewer events are dropped.
    pub min_events: usize,
    pub seed: u64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            target_len: 180,
            split: 0.8,
            dup_external: 2,
            min_events: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestedUser {
    pub source_id: String,
    /// Exactly `target_len` objects.
    pub sequence: Vec<u32>,
    pub profile: ExtractedProfile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub attack: Vec<IngestedUser>,
    pub external: Vec<u32>,
    /// Users below `min_events`.
    pub dropped_short: usize,
    /// Attack-side users with no event in a pool of interest.
    pub dropped_irrelevant: usize,
    pub external_users: usize,
}

#[derive(Deserialize)]
struct EventRow {
    user_id: String,
    order: i64,
    object_id: u32,
}

/// Events per user, ordered by user id.
pub fn read_event_log(path: &Path, universe_size: u32) -> Result<BTreeMap<String, Vec<u32>>> {
    let mut reader = csv_reader(path)?;
    check_header(path, &mut reader, &EVENT_HEADER)?;
    let mut users: BTreeMap<String, (i64, Vec<u32>)> = BTreeMap::new();
    for (i, row) in reader.deserialize::<EventRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::parse(path, format!("line {line}: {e}")))?;
        if row.object_id >= universe_size {
            return Err(Error::Data(format!(
                "{}: line {line}: unknown object id {} (universe has {universe_size})",
                path.display(),
                row.object_id
            )));
        }
        let entry = users
            .entry(row.user_id.clone())
            .or_insert((i64::MIN, Vec::new()));
        if !entry.1.is_empty() && row.order <= entry.0 {
            return Err(Error::Data(format!(
                "{}: line {line}: order {} of user {} is not increasing",
                path.display(),
                row.order,
                row.user_id
            )));
        }
        entry.0 = row.order;
        entry.1.push(row.object_id);
    }
    if users.is_empty() {
        return Err(Error::Data(format!(
            "{}: the event log is empty",
            path.display()
        )));
    }
    Ok(users.into_iter().map(|(u, (_, seq))| (u, seq)).collect())
}

/// The first `len` events, repeated in order when the user has fewer.
pub fn cyclic_prefix(events: &[u32], len: usize) -> Vec<u32> {
    events.iter().copied().cycle().take(len).collect()
}

pub fn ingest(
    events: &BTreeMap<String, Vec<u32>>,
    pools: &PoolSet,
    opts: &IngestOptions,
) -> Result<Ingested> {
    if !(0.0..=1.0).contains(&opts.split) || opts.target_len == 0 || opts.min_events == 0 {
        return Err(Error::Config(
            "ingest needs split in [0, 1], target_len >= 1 and min_events >= 1".into(),
        ));
    }
    let mut eligible: Vec<(&String, &Vec<u32>)> = events
        .iter()
        .filter(|(_, e)| e.len() >= opts.min_events)
        .collect();
    let dropped_short = events.len() - eligible.len();
    eligible.shuffle(&mut stream(opts.seed, purpose::SPLIT, 0));
    let n_attack = (opts.split * eligible.len() as f64).round() as usize;
    let (attack_side, external_side) = eligible.split_at(n_attack);

    let mut attack = Vec::with_capacity(attack_side.len());
    let mut dropped_irrelevant = 0;
    for (id, e) in attack_side {
        let sequence = cyclic_prefix(e, opts.target_len);
        match profile_from_sequence(&sequence, pools)? {
            Some(profile) => attack.push(IngestedUser {
                source_id: (*id).clone(),
                sequence,
                profile,
            }),
            None => dropped_irrelevant += 1,
        }
    }
    attack.sort_by(|a, b| a.source_id.cmp(&b.source_id));

    let mut once: Vec<(&String, &Vec<u32>)> = external_side.to_vec();
    once.sort_by(|a, b| a.0.cmp(b.0));
    let flat: Vec<u32> = once
        .iter()
        .flat_map(|(_, e)| e.iter().take(opts.target_len).copied())
        .collect();
    let external = flat.repeat(opts.dup_external);
    Ok(Ingested {
        attack,
        external,
        dropped_short,
        dropped_irrelevant,
        external_users: once.len(),
    })
}

impl Ingested {
    /// `attack_users.csv`, `attack_sequences.csv` and `external_objects.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        csv_rows(
            &dir.join("attack_users.csv"),
            [
                "user_id",
                "source_id",
                "true_pool",
                "gamma",
                "delta",
                "tied",
            ],
            self.attack.iter().enumerate().map(|(i, u)| {
                let p = u.profile.profile;
                [
                    i.to_string(),
                    u.source_id.clone(),
                    p.preferred_pool.to_string(),
                    p.gamma.to_string(),
                    p.delta.to_string(),
                    u8::from(u.profile.tied).to_string(),
                ]
            }),
        )?;
        csv_rows(
            &dir.join("attack_sequences.csv"),
            ["user_id", "position", "object_id"],
            self.attack.iter().enumerate().flat_map(|(i, u)| {
                u.sequence
                    .iter()
                    .enumerate()
                    .map(move |(t, x)| [i.to_string(), t.to_string(), x.to_string()])
            }),
        )?;
        csv_rows(
            &dir.join("external_objects.csv"),
            ["object_id"],
            self.external.iter().map(|x| [x.to_string()]),
        )
    }
}
