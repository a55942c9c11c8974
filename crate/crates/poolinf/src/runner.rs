//! Parallel execution of games.
//!
//! Users are independent: each draws from its own stream, so the records do
//! not depend on how users are spread over threads. Results are collected in
//! user order.

use poolinf_core::game::{Game, GameRecord};
use poolinf_core::mechanism::Observation;
use rayon::prelude::*;

use crate::{Error, Result};

/// A pool with `threads` workers, or rayon's default when `None`.
pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(t);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

pub fn run_synthetic(game: &Game, pool: &rayon::ThreadPool) -> Result<Vec<GameRecord>> {
    let users = game.scenario().n_users as u64;
    pool.install(|| {
        (0..users)
            .into_par_iter()
            .map(|u| Ok(game.run_instance(u)?))
            .collect()
    })
}

/// As [`run_synthetic`], keeping every user's observations.
pub fn run_synthetic_observed(
    game: &Game,
    pool: &rayon::ThreadPool,
) -> Result<Vec<(GameRecord, Vec<Observation>)>> {
    let users = game.scenario().n_users as u64;
    pool.install(|| {
        (0..users)
            .into_par_iter()
            .map(|u| Ok(game.run_instance_observed(u)?))
            .collect()
    })
}

/// Replay recorded sequences; user `i` is `sequences[i]`. Sequences without
/// an object in a pool of interest produce no record.
pub fn run_replay(
    game: &Game,
    sequences: &[Vec<u32>],
    pool: &rayon::ThreadPool,
) -> Result<Vec<GameRecord>> {
    let out: Result<Vec<Option<GameRecord>>> = pool.install(|| {
        sequences
            .par_iter()
            .enumerate()
            .map(|(i, s)| Ok(game.run_sequence(i as u64, s)?))
            .collect()
    });
    Ok(out?.into_iter().flatten().collect())
}
