use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use poolinf::config::{load_scenario, Overrides};
use poolinf::ingest::IngestOptions;
use poolinf::pipeline::{self, Dumps};
use poolinf::sweep::{run_sweep, SweepResult};
use poolinf::{runner, Result};

/// Pool inference attacks against Count Mean Sketch telemetry.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario (or sweep) configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (or file, for `estimate`).
    #[arg(long)]
    out: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Run 150000 users instead of the configured count.
    #[arg(long)]
    full: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            full: self.full,
        }
    }

    fn scenario(&self) -> Result<poolinf::config::ScenarioConfig> {
        let mut c = load_scenario(&self.config)?;
        c.apply(self.overrides());
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Play synthetic games and write records and metrics.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also write every user's observations to observations.csv.
        #[arg(long)]
        dump_observations: bool,
        /// Also write the true popularity and the external records.
        #[arg(long)]
        dump_external: bool,
    },
    /// Attack the users of an observation file.
    Attack {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        observations: PathBuf,
    },
    /// Estimate popularity from an external observation file.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        observations: PathBuf,
        /// True popularity, to report MAE and MAPE.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Split an event log, estimate popularity from one side, attack the other.
    Ingest {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        events: PathBuf,
        #[arg(long, default_value_t = 180)]
        target_len: usize,
        #[arg(long, default_value_t = 0.8)]
        split: f64,
        #[arg(long, default_value_t = 2)]
        dup_external: usize,
        #[arg(long, default_value_t = 10)]
        min_events: usize,
    },
    /// Run a configuration matrix.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Recompute metric files from a run directory.
    Report {
        /// Directory holding records.csv and manifest.json.
        #[arg(long)]
        run: PathBuf,
        /// Output directory; defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_aucs(report: &poolinf::output::Report) {
    for n in &report.per_n {
        match n.auc {
            Some(a) => println!("{}\tn={}\tauc={a:.4}", report.adversary, n.n),
            None => println!("{}\tn={}\tauc=-", report.adversary, n.n),
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            common,
            dump_observations,
            dump_external,
        } => {
            let config = common.scenario()?;
            let pool = runner::thread_pool(common.threads)?;
            let dumps = Dumps {
                observations: dump_observations,
                external: dump_external,
            };
            let report = pipeline::simulate(&config, &common.out, &pool, dumps)?;
            print_aucs(&report);
        }
        Command::Attack {
            common,
            observations,
        } => {
            let config = common.scenario()?;
            let pool = runner::thread_pool(common.threads)?;
            let outcomes = pipeline::attack_file(&config, &observations, &pool)?;
            let k = config.resolve_pools()?.k();
            pipeline::write_file_outcomes(&common.out.join("estimates.csv"), k, &outcomes)?;
            println!("{} outcomes written", outcomes.len());
        }
        Command::Estimate {
            common,
            observations,
            truth,
        } => {
            let config = common.scenario()?;
            let e = pipeline::estimate(&config, &observations, truth.as_deref())?;
            pipeline::write_estimate(&common.out, &e)?;
            match e.error {
                Some((mae, mape)) => {
                    println!("{} records\tmae={mae:e}\tmape_top80={mape:.3}%", e.records)
                }
                None => println!("{} records", e.records),
            }
        }
        Command::Ingest {
            common,
            events,
            target_len,
            split,
            dup_external,
            min_events,
        } => {
            let config = common.scenario()?;
            let pool = runner::thread_pool(common.threads)?;
            let opts = IngestOptions {
                target_len,
                split,
                dup_external,
                min_events,
                seed: config.master_seed,
            };
            let replay = pipeline::replay_log(&config, &events, &opts, &common.out, &pool)?;
            println!(
                "{} attacked users, {} external objects",
                replay.ingested.attack.len(),
                replay.ingested.external.len()
            );
            print_aucs(&replay.report);
        }
        Command::Sweep { common } => {
            let pool = runner::thread_pool(common.threads)?;
            match run_sweep(&common.config, &common.out, common.overrides(), &pool)? {
                SweepResult::Scenarios(cells) => {
                    for (name, report) in cells {
                        println!("# {name}");
                        print_aucs(&report);
                    }
                }
                SweepResult::Utility(rows) => {
                    for r in rows {
                        println!(
                            "epsilon={}\tn={}\tmae={:e}\tmape_top80={:.3}%",
                            r.epsilon, r.n, r.mae, r.mape
                        );
                    }
                }
            }
        }
        Command::Report { run, out } => {
            let out = out.unwrap_or_else(|| run.clone());
            let report = pipeline::report(&run, &out)?;
            print_aucs(&report);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
