//! File formats for observations, popularity vectors and pool definitions.
//!
//! | file | header |
//! |------|--------|
//! | CMS observations | `user_id,obs_index,j,bits` (bits as lowercase hex of the little-endian byte view) |
//! | HCMS observations | `user_id,obs_index,j,l,bit` (bit `1` for +1, `0` for -1) |
//! | raw observations | `user_id,obs_index,object` |
//! | popularity | `object_id,prob` |
//! | pools | JSON `{"universe_size": N, "pools": [[...], ...]}` |

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use poolinf_core::bits::BitVector;
use poolinf_core::mechanism::{CmsObservation, HcmsObservation, Mechanism, Observation, Variant};
use poolinf_core::population::{PoolSet, Popularity};
use serde::Deserialize;

use crate::{Error, Result};

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(create(path)?))
}

pub(crate) fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        },
        _ => Error::parse(path, e),
    }
}

pub(crate) fn check_header(
    path: &Path,
    reader: &mut csv::Reader<File>,
    expected: &[&str],
) -> Result<()> {
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::parse(
            path,
            format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    Ok(())
}

pub(crate) fn flush<W: Write>(path: &Path, mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_row<W: Write, I, T>(path: &Path, w: &mut csv::Writer<W>, row: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| csv_error(path, e))
}

pub fn observation_header(variant: Variant) -> &'static [&'static str] {
    match variant {
        Variant::Cms | Variant::NoHashCms => &["user_id", "obs_index", "j", "bits"],
        Variant::Hcms => &["user_id", "obs_index", "j", "l", "bit"],
        Variant::NonPrivate => &["user_id", "obs_index", "object"],
    }
}

/// Write each user's observations in order.
pub fn write_observations(
    path: &Path,
    variant: Variant,
    users: &[(u64, Vec<Observation>)],
) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(path, &mut w, observation_header(variant))?;
    for (user, obs) in users {
        for (t, o) in obs.iter().enumerate() {
            let (u, t) = (user.to_string(), t.to_string());
            match o {
                Observation::Cms(c) => {
                    let hex = hex::encode(c.bits.to_le_bytes());
                    write_row(path, &mut w, [u, t, c.hash_index.to_string(), hex])?
                }
                Observation::Hcms(h) => write_row(
                    path,
                    &mut w,
                    [
                        u,
                        t,
                        h.hash_index.to_string(),
                        h.coord_index.to_string(),
                        h.wire_bit().to_string(),
                    ],
                )?,
                Observation::Raw(x) => write_row(path, &mut w, [u, t, x.to_string()])?,
            }
        }
    }
    flush(path, w)
}

#[derive(Deserialize)]
struct CmsRow {
    user_id: u64,
    obs_index: usize,
    j: u32,
    bits: String,
}

#[derive(Deserialize)]
struct HcmsRow {
    user_id: u64,
    obs_index: usize,
    j: u32,
    l: u32,
    bit: u8,
}

#[derive(Deserialize)]
struct RawRow {
    user_id: u64,
    obs_index: usize,
    object: u32,
}

/// Observations grouped by user (ascending user id). Within a user the
/// `obs_index` values must be `0, 1, 2, ...` in file order.
pub fn read_observations(path: &Path, mech: &Mechanism) -> Result<Vec<(u64, Vec<Observation>)>> {
    let mut reader = csv_reader(path)?;
    check_header(path, &mut reader, observation_header(mech.variant()))?;
    let mut users: BTreeMap<u64, Vec<Observation>> = BTreeMap::new();
    let mut push = |line: u64, user: u64, index: usize, obs: Observation| -> Result<()> {
        let seq = users.entry(user).or_default();
        if index != seq.len() {
            return Err(Error::parse(
                path,
                format!(
                    "line {line}: user {user} expected obs_index {}, found {index}",
                    seq.len()
                ),
            ));
        }
        seq.push(obs);
        Ok(())
    };
    let m = mech.m() as usize;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = i as u64 + 2;
        let bad = |e: csv::Error| Error::parse(path, format!("line {line}: {e}"));
        match mech.variant() {
            Variant::Cms | Variant::NoHashCms => {
                let row: CmsRow = record.deserialize(None).map_err(bad)?;
                let bytes = hex::decode(&row.bits)
                    .map_err(|e| Error::parse(path, format!("line {line}: {e}")))?;
                let bits = BitVector::from_le_bytes(m, &bytes)
                    .map_err(|e| Error::parse(path, format!("line {line}: {e}")))?;
                if row.j >= mech.num_hashes() {
                    return Err(Error::parse(
                        path,
                        format!("line {line}: hash index {} out of range", row.j),
                    ));
                }
                push(
                    line,
                    row.user_id,
                    row.obs_index,
                    Observation::Cms(CmsObservation {
                        bits,
                        hash_index: row.j,
                    }),
                )?;
            }
            Variant::Hcms => {
                let row: HcmsRow = record.deserialize(None).map_err(bad)?;
                let bit = HcmsObservation::bit_from_wire(row.bit)
                    .map_err(|e| Error::parse(path, format!("line {line}: {e}")))?;
                if row.j >= mech.num_hashes() || row.l >= mech.m() {
                    return Err(Error::parse(
                        path,
                        format!("line {line}: index out of range"),
                    ));
                }
                let obs = HcmsObservation {
                    bit,
                    hash_index: row.j,
                    coord_index: row.l,
                };
                push(line, row.user_id, row.obs_index, Observation::Hcms(obs))?;
            }
            Variant::NonPrivate => {
                let row: RawRow = record.deserialize(None).map_err(bad)?;
                if row.object >= mech.universe_size() {
                    return Err(Error::parse(
                        path,
                        format!("line {line}: object {} outside the universe", row.object),
                    ));
                }
                push(
                    line,
                    row.user_id,
                    row.obs_index,
                    Observation::Raw(row.object),
                )?;
            }
        }
    }
    Ok(users.into_iter().collect())
}

pub fn write_popularity(path: &Path, p: &Popularity) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(path, &mut w, ["object_id", "prob"])?;
    for (x, v) in p.probs().iter().enumerate() {
        write_row(path, &mut w, [x.to_string(), v.to_string()])?;
    }
    flush(path, w)
}

#[derive(Deserialize)]
struct PopRow {
    object_id: usize,
    prob: f64,
}

/// Reads a popularity CSV; every object of `0..universe_size` must appear
/// exactly once, in any order.
pub fn read_popularity(path: &Path, universe_size: u32) -> Result<Popularity> {
    let mut reader = csv_reader(path)?;
    check_header(path, &mut reader, &["object_id", "prob"])?;
    let mut probs = vec![f64::NAN; universe_size as usize];
    for (i, row) in reader.deserialize::<PopRow>().enumerate() {
        let row = row.map_err(|e| Error::parse(path, format!("line {}: {e}", i + 2)))?;
        let slot = probs.get_mut(row.object_id).ok_or_else(|| {
            Error::parse(
                path,
                format!("object {} outside the universe", row.object_id),
            )
        })?;
        if !slot.is_nan() {
            return Err(Error::parse(
                path,
                format!("object {} listed twice", row.object_id),
            ));
        }
        *slot = row.prob;
    }
    if let Some(x) = probs.iter().position(|v| v.is_nan()) {
        return Err(Error::parse(path, format!("object {x} missing")));
    }
    Popularity::new(probs).map_err(|e| Error::parse(path, e))
}

pub fn read_pools(path: &Path) -> Result<PoolSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

pub fn write_pools(path: &Path, pools: &PoolSet) -> Result<()> {
    write_json(path, pools)
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| Error::parse(path, e))?;
    f.write_all(b"\n")
        .and_then(|_| f.flush())
        .map_err(|e| Error::io(path, e))
}
