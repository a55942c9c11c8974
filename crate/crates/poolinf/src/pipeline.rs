//! The work behind each subcommand, callable without the CLI.

use std::path::Path;

use poolinf_core::attack::AttackOutcome;
use poolinf_core::estimation::{mae, mape_top80, project_to_simplex, FrequencyCounts, SIMPLEX_TOL};
use poolinf_core::game::{Game, GameRecord, Scenario};
use poolinf_core::mechanism::{Observation, Variant};
use poolinf_core::population::Popularity;
use poolinf_core::rng::{purpose, stream};

use crate::config::{EstPopularitySpec, ScenarioConfig};
use crate::ingest::{ingest, read_event_log, IngestOptions, Ingested};
use crate::io::{self, csv_error, csv_writer, flush, write_json};
use crate::output::{
    build_report, read_divergences, read_records, write_outputs, write_report, Report,
};
use crate::runner::{run_replay, run_synthetic, run_synthetic_observed};
use crate::{Error, Result};

/// Optional extra files written by [`simulate`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Dumps {
    /// `observations.csv`: the full observation sequence of every user.
    pub observations: bool,
    /// `external.csv` and `true_popularity.csv`: the simulated external
    /// records (strong adversary only) and the ground truth.
    pub external: bool,
}

pub fn simulate(
    config: &ScenarioConfig,
    out: &Path,
    pool: &rayon::ThreadPool,
    dumps: Dumps,
) -> Result<Report> {
    let scenario = config.resolve()?;
    let k = scenario.pools.k();
    let variant = scenario.mechanism.variant();
    if dumps.external {
        dump_external(config, &scenario, out)?;
    }
    let game = Game::new(scenario)?;
    log::info!("playing {} users", game.scenario().n_users);
    let records = if dumps.observations {
        let played = run_synthetic_observed(&game, pool)?;
        let obs: Vec<(u64, Vec<Observation>)> =
            played.iter().map(|(r, o)| (r.user_id, o.clone())).collect();
        io::write_observations(&out.join("observations.csv"), variant, &obs)?;
        played.into_iter().map(|(r, _)| r).collect()
    } else {
        run_synthetic(&game, pool)?
    };
    write_outputs(out, config, k, &records)
}

fn dump_external(config: &ScenarioConfig, scenario: &Scenario, out: &Path) -> Result<()> {
    io::write_popularity(&out.join("true_popularity.csv"), &scenario.true_popularity)?;
    if let EstPopularitySpec::FromExternal { n: Some(n) } = config.est_popularity {
        let data = poolinf_core::estimation::ExternalDataset::simulate(
            &scenario.mechanism,
            &scenario.true_popularity,
            n,
            config.master_seed,
        )?;
        let users: Vec<(u64, Vec<Observation>)> = data
            .records
            .into_iter()
            .enumerate()
            .map(|(i, r)| (i as u64, vec![Observation::Cms(r)]))
            .collect();
        io::write_observations(
            &out.join("external.csv"),
            scenario.mechanism.variant(),
            &users,
        )?;
    }
    Ok(())
}

/// Popularity estimation from an external observation file.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub popularity: Popularity,
    pub records: u64,
    /// `(mae, mape)` against a known truth.
    pub error: Option<(f64, f64)>,
}

pub fn estimate(
    config: &ScenarioConfig,
    observations: &Path,
    truth: Option<&Path>,
) -> Result<Estimate> {
    let pools = config.resolve_pools()?;
    let mech = config.mechanism.build(pools.universe_size())?;
    if !matches!(mech.variant(), Variant::Cms | Variant::NoHashCms) {
        return Err(Error::Config("estimation needs a CMS mechanism".into()));
    }
    let mut counts = FrequencyCounts::new(&mech)?;
    for (_, obs) in io::read_observations(observations, &mech)? {
        for o in obs {
            if let Observation::Cms(c) = o {
                counts.push(&c)?;
            }
        }
    }
    if counts.records() == 0 {
        return Err(Error::Data(format!(
            "{}: no records",
            observations.display()
        )));
    }
    let popularity = project_to_simplex(&counts.frequencies()?, SIMPLEX_TOL)?;
    let error = match truth {
        Some(path) => {
            let p = io::read_popularity(path, pools.universe_size())?;
            Some((mae(&popularity, &p)?, mape_top80(&popularity, &p)?))
        }
        None => None,
    };
    Ok(Estimate {
        popularity,
        records: counts.records(),
        error,
    })
}

/// One user's outcome on a recorded observation file.
#[derive(Debug, Clone, PartialEq)]
pub struct FileOutcome {
    pub user_id: u64,
    pub n: usize,
    pub outcome: AttackOutcome,
}

/// Attack every user of an observation file. Each user is attacked on the
/// prefixes from `n_observations` that fit in their sequence, or on the whole
/// sequence when none does. Tie-breaks draw from the user's stream.
pub fn attack_file(
    config: &ScenarioConfig,
    observations: &Path,
    pool: &rayon::ThreadPool,
) -> Result<Vec<FileOutcome>> {
    use rayon::prelude::*;
    let pools = config.resolve_pools()?;
    let mech = config.mechanism.build(pools.universe_size())?;
    let est = match &config.est_popularity {
        EstPopularitySpec::Uniform => Popularity::uniform(pools.universe_size())?,
        EstPopularitySpec::File { path } => io::read_popularity(path, pools.universe_size())?,
        _ => {
            return Err(Error::Config(
                "attacking a file needs est_popularity `uniform` or `file`".into(),
            ))
        }
    };
    config
        .attack
        .validate()
        .map_err(|e| Error::Config(format!("attack: {e}")))?;
    let attack =
        poolinf_core::attack::Attack::new(mech.clone(), &pools, &est, config.attack.clone())?;
    let users = io::read_observations(observations, &mech)?;
    let per_user: Result<Vec<Vec<FileOutcome>>> = pool.install(|| {
        users
            .par_iter()
            .map(|(u, obs)| {
                let mut prefixes: Vec<usize> = config
                    .n_observations
                    .iter()
                    .copied()
                    .filter(|&n| n <= obs.len())
                    .collect();
                if prefixes.is_empty() {
                    prefixes.push(obs.len());
                }
                let mut rng = stream(config.master_seed, purpose::USER, *u);
                let outcomes = attack.run_prefixes(obs, &prefixes, &mut rng)?;
                Ok(prefixes
                    .into_iter()
                    .zip(outcomes)
                    .map(|(n, outcome)| FileOutcome {
                        user_id: *u,
                        n,
                        outcome,
                    })
                    .collect())
            })
            .collect()
    });
    Ok(per_user?.into_iter().flatten().collect())
}

/// `estimates.csv`: `user_id,n,estimate,confidence,score_0,...,score_{k-1}`
/// with scores relative to the best pool.
pub fn write_file_outcomes(path: &Path, k: usize, outcomes: &[FileOutcome]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = ["user_id", "n", "estimate", "confidence"]
        .map(String::from)
        .to_vec();
    header.extend((0..k).map(|i| format!("score_{i}")));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for o in outcomes {
        let mut row = vec![
            o.user_id.to_string(),
            o.n.to_string(),
            o.outcome
                .estimate
                .map(|e| e.to_string())
                .unwrap_or_default(),
            o.outcome.confidence.to_string(),
        ];
        row.extend(o.outcome.scores.iter().map(|s| s.to_string()));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    flush(path, w)
}

/// Result of replaying an event log.
#[derive(Debug, Clone)]
pub struct Replay {
    pub ingested: Ingested,
    pub records: Vec<GameRecord>,
    pub report: Report,
}

/// Ingest an event log, estimate the adversary's popularity from its
/// external side and attack the other side.
pub fn replay_log(
    config: &ScenarioConfig,
    events: &Path,
    opts: &IngestOptions,
    out: &Path,
    pool: &rayon::ThreadPool,
) -> Result<Replay> {
    let pools = config.resolve_pools()?;
    let mechanism = config.mechanism.build(pools.universe_size())?;
    let log = read_event_log(events, pools.universe_size())?;
    let ingested = ingest(&log, &pools, opts)?;
    log::info!(
        "{} attacked users, {} external users ({} objects), {} too short, {} without relevant events",
        ingested.attack.len(),
        ingested.external_users,
        ingested.external.len(),
        ingested.dropped_short,
        ingested.dropped_irrelevant
    );
    let max_n = config.n_observations.iter().copied().max().unwrap_or(0);
    if max_n > opts.target_len {
        return Err(Error::Config(format!(
            "n_observations reaches {max_n} but sequences have {} objects",
            opts.target_len
        )));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    ingested.write(out)?;
    let est = config.resolve_est_from_log(&mechanism, &pools, &ingested.external)?;
    // Replayed users carry their own objects; the true popularity is only
    // used for validation, so the estimate stands in for it.
    let mut c = config.clone();
    c.n_users = ingested.attack.len().max(1);
    let k = pools.k();
    let scenario = c.assemble(pools, mechanism, est.clone(), est)?;
    let game = Game::new(scenario)?;
    let sequences: Vec<Vec<u32>> = ingested.attack.iter().map(|u| u.sequence.clone()).collect();
    let records = run_replay(&game, &sequences, pool)?;
    let report = write_outputs(out, config, k, &records)?;
    Ok(Replay {
        ingested,
        records,
        report,
    })
}

/// Rebuild every metric file from a run directory's `records.csv` and
/// `manifest.json`.
pub fn report(run_dir: &Path, out: &Path) -> Result<Report> {
    let config = crate::config::load_scenario(&run_dir.join("manifest.json"))?;
    let k = config.resolve_pools()?.k();
    let rows = read_records(&run_dir.join("records.csv"))?;
    let div_path = run_dir.join("divergence.csv");
    let div = if div_path.exists() {
        read_divergences(&div_path)?
    } else {
        Vec::new()
    };
    let report = build_report(&rows, k, &config.label(), &div)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_report(out, &report)?;
    Ok(report)
}

pub fn write_estimate(path: &Path, e: &Estimate) -> Result<()> {
    io::write_popularity(path, &e.popularity)?;
    if let Some((mae, mape)) = e.error {
        let summary = serde_json::json!({"records": e.records, "mae": mae, "mape_top80": mape});
        write_json(&path.with_extension("json"), &summary)?;
    }
    Ok(())
}
