//! Scenario configuration files.
//!
//! A scenario is a JSON object:
//!
//! ```json
//! {
//!   "name": "emojis-strong",
//!   "adversary": "advs",
//!   "pools": {"type": "sizes", "universe_size": 2600, "sizes": [228, 228, 228, 228, 228, 228]},
//!   "mechanism": {"variant": "cms", "epsilon": 4, "m": 1024, "num_hashes": 65536, "hash_seed": 0},
//!   "true_popularity": {"type": "zipf_mixture", "exponent": 1.2},
//!   "est_popularity": {"type": "from_external", "n": 1000000},
//!   "n_observations": [7, 30, 90, 180],
//!   "n_users": 2000,
//!   "perturb_sigma": 0,
//!   "master_seed": 1,
//!   "attack": {"threshold": 0, "quadrature_nodes": 24},
//!   "kind": "bpia"
//! }
//! ```
//!
//! Relative file paths are resolved against the directory of the config
//! file. Unknown fields are rejected.

use std::path::{Path, PathBuf};

use poolinf_core::attack::AttackConfig;
use poolinf_core::estimation::{project_to_simplex, FrequencyCounts, EXTERNAL_CHUNK, SIMPLEX_TOL};
use poolinf_core::game::{AttackKind, Scenario};
use poolinf_core::mechanism::{Mechanism, MechanismConfig, Variant};
use poolinf_core::population::{
    uniform_random_popularity, zipf_mixture_popularity, PoolSet, Popularity,
};
use poolinf_core::rng::{purpose, stream};
use serde::{Deserialize, Serialize};

use crate::{io, Error, Result};

/// User count restored by `--full`.
pub const FULL_USERS: usize = 150_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PoolsSpec {
    /// Contiguous pools `[0, s0)`, `[s0, s0 + s1)`, ...; the rest is neutral.
    Sizes { universe_size: u32, sizes: Vec<u32> },
    Explicit {
        universe_size: u32,
        pools: Vec<Vec<u32>>,
    },
    /// A pools JSON file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruePopularitySpec {
    ZipfMixture {
        exponent: f64,
    },
    /// Independent uniform draws, normalized; seeded by the master seed.
    UniformRandom,
    Uniform,
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstPopularitySpec {
    /// The weak adversary.
    Uniform,
    /// The true popularity itself.
    Exact,
    /// The strong adversary: estimate from `n` external records obfuscated
    /// with the scenario's mechanism. For ingested logs `n` is omitted and
    /// the external side of the log is used.
    FromExternal {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<u64>,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSpec {
    pub variant: Variant,
    /// Required for every variant except `non_private`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_hashes: Option<u32>,
    #[serde(default)]
    pub hash_seed: u64,
}

impl MechanismSpec {
    pub fn build(&self, universe_size: u32) -> Result<Mechanism> {
        let config = match self.variant {
            Variant::NonPrivate => MechanismConfig::non_private(),
            variant => {
                let epsilon = self
                    .epsilon
                    .ok_or_else(|| Error::Config("mechanism.epsilon is required".into()))?;
                if !epsilon.is_finite() {
                    return Err(Error::Config(format!(
                        "mechanism.epsilon must be finite, got {epsilon}"
                    )));
                }
                match variant {
                    Variant::NoHashCms => {
                        if self.m.is_some_and(|m| m != universe_size)
                            || self.num_hashes.is_some_and(|h| h != 1)
                        {
                            return Err(Error::Config(
                                "no_hash_cms fixes m to the universe size and num_hashes to 1"
                                    .into(),
                            ));
                        }
                        MechanismConfig::no_hash_cms(epsilon, universe_size)
                    }
                    _ => {
                        let defaults = MechanismConfig::cms(epsilon, 1024, 65536, 0);
                        MechanismConfig {
                            variant,
                            epsilon,
                            m: self.m.unwrap_or(defaults.m),
                            num_hashes: self.num_hashes.unwrap_or(defaults.num_hashes),
                            hash_seed: self.hash_seed,
                        }
                    }
                }
            }
        };
        Mechanism::new(config, universe_size).map_err(|e| Error::Config(format!("mechanism: {e}")))
    }
}

fn default_n_observations() -> Vec<usize> {
    vec![7, 30, 90, 180]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Label written to `auc.csv`; defaults to the name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversary: Option<String>,
    pub pools: PoolsSpec,
    pub mechanism: MechanismSpec,
    /// Required for synthetic runs; ignored when replaying an event log.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_popularity: Option<TruePopularitySpec>,
    pub est_popularity: EstPopularitySpec,
    #[serde(default = "default_n_observations")]
    pub n_observations: Vec<usize>,
    pub n_users: usize,
    #[serde(default)]
    pub perturb_sigma: f64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub attack: AttackConfig,
    #[serde(default)]
    pub kind: AttackKind,
}

/// Command-line overrides applied after loading.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub full: bool,
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str, origin: &Path) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let mut config: Self = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!(
                "{}: field `{path}`: {}",
                origin.display(),
                e.inner()
            ))
        })?;
        let base = origin.parent().unwrap_or(Path::new("."));
        config.absolutize(base);
        Ok(config)
    }

    pub fn apply(&mut self, overrides: Overrides) {
        if let Some(seed) = overrides.seed {
            self.master_seed = seed;
        }
        if overrides.full {
            self.n_users = FULL_USERS;
        }
    }

    /// Label used for the `adversary` column.
    pub fn label(&self) -> String {
        self.adversary
            .clone()
            .or_else(|| self.name.clone())
            .unwrap_or_else(|| match self.kind {
                AttackKind::Bpia => "bpia".into(),
                AttackKind::Baseline => "baseline".into(),
            })
    }

    fn absolutize(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let PoolsSpec::File { path } = &mut self.pools {
            fix(path)
        }
        if let Some(TruePopularitySpec::File { path }) = &mut self.true_popularity {
            fix(path)
        }
        if let EstPopularitySpec::File { path } = &mut self.est_popularity {
            fix(path)
        }
    }

    pub fn resolve_pools(&self) -> Result<PoolSet> {
        let pools = match &self.pools {
            PoolsSpec::Sizes {
                universe_size,
                sizes,
            } => PoolSet::contiguous(*universe_size, sizes),
            PoolsSpec::Explicit {
                universe_size,
                pools,
            } => PoolSet::new(*universe_size, pools.clone()),
            PoolsSpec::File { path } => return io::read_pools(path),
        };
        pools.map_err(|e| Error::Config(format!("pools: {e}")))
    }

    pub fn resolve_true_popularity(&self, pools: &PoolSet) -> Result<Popularity> {
        let n = pools.universe_size();
        let spec = self.true_popularity.as_ref().ok_or_else(|| {
            Error::Config("true_popularity is required for synthetic runs".into())
        })?;
        let p = match spec {
            TruePopularitySpec::ZipfMixture { exponent } => {
                zipf_mixture_popularity(pools, *exponent)
            }
            TruePopularitySpec::UniformRandom => {
                uniform_random_popularity(n, &mut stream(self.master_seed, purpose::POPULARITY, 0))
            }
            TruePopularitySpec::Uniform => Popularity::uniform(n),
            TruePopularitySpec::File { path } => return io::read_popularity(path, n),
        };
        p.map_err(|e| Error::Config(format!("true_popularity: {e}")))
    }

    /// The adversary's popularity for a synthetic run.
    pub fn resolve_est_popularity(
        &self,
        mech: &Mechanism,
        pools: &PoolSet,
        truth: &Popularity,
    ) -> Result<Popularity> {
        match &self.est_popularity {
            EstPopularitySpec::Uniform => Ok(Popularity::uniform(pools.universe_size())?),
            EstPopularitySpec::Exact => Ok(truth.clone()),
            EstPopularitySpec::FromExternal { n: Some(n) } => {
                external_capable(mech)?;
                let counts = poolinf_core::estimation::simulate_external_counts(
                    mech,
                    truth,
                    *n,
                    self.master_seed,
                )
                .map_err(|e| Error::Config(format!("est_popularity: {e}")))?;
                Ok(project_to_simplex(&counts.frequencies()?, SIMPLEX_TOL)?)
            }
            EstPopularitySpec::FromExternal { n: None } => Err(Error::Config(
                "est_popularity.n is required for synthetic runs".into(),
            )),
            EstPopularitySpec::File { path } => io::read_popularity(path, pools.universe_size()),
        }
    }

    /// The adversary's popularity when replaying an event log whose external
    /// side is `external`. `exact` means the empirical distribution of the
    /// external objects.
    pub fn resolve_est_from_log(
        &self,
        mech: &Mechanism,
        pools: &PoolSet,
        external: &[u32],
    ) -> Result<Popularity> {
        let n = pools.universe_size();
        match &self.est_popularity {
            EstPopularitySpec::Uniform => Ok(Popularity::uniform(n)?),
            EstPopularitySpec::Exact => {
                let mut counts = vec![0.0; n as usize];
                for &x in external {
                    counts[x as usize] += 1.0;
                }
                Popularity::from_weights(counts)
                    .map_err(|e| Error::Data(format!("external objects: {e}")))
            }
            EstPopularitySpec::FromExternal { n: Some(_) } => Err(Error::Config(
                "est_popularity.n must be omitted when replaying an event log".into(),
            )),
            EstPopularitySpec::FromExternal { n: None } => {
                external_capable(mech)?;
                let counts = obfuscated_counts(mech, external, self.master_seed)?;
                Ok(project_to_simplex(&counts.frequencies()?, SIMPLEX_TOL)?)
            }
            EstPopularitySpec::File { path } => io::read_popularity(path, n),
        }
    }

    /// Everything needed to play synthetic games.
    pub fn resolve(&self) -> Result<Scenario> {
        let pools = self.resolve_pools()?;
        let mechanism = self.mechanism.build(pools.universe_size())?;
        let true_popularity = self.resolve_true_popularity(&pools)?;
        let est_popularity = self.resolve_est_popularity(&mechanism, &pools, &true_popularity)?;
        self.assemble(pools, mechanism, true_popularity, est_popularity)
    }

    pub(crate) fn assemble(
        &self,
        pools: PoolSet,
        mechanism: Mechanism,
        true_popularity: Popularity,
        est_popularity: Popularity,
    ) -> Result<Scenario> {
        self.attack
            .validate()
            .map_err(|e| Error::Config(format!("attack: {e}")))?;
        if self.n_users == 0 {
            return Err(Error::Config("n_users must be at least 1".into()));
        }
        if !(self.perturb_sigma >= 0.0 && self.perturb_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "perturb_sigma must be >= 0, got {}",
                self.perturb_sigma
            )));
        }
        Ok(Scenario {
            pools,
            mechanism,
            true_popularity,
            est_popularity,
            n_observations: self.n_observations.clone(),
            n_users: self.n_users,
            perturb_sigma: self.perturb_sigma,
            master_seed: self.master_seed,
            attack: self.attack.clone(),
            kind: self.kind,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario configs always serialize")
    }
}

fn external_capable(mech: &Mechanism) -> Result<()> {
    match mech.variant() {
        Variant::Cms | Variant::NoHashCms => Ok(()),
        v => Err(Error::Config(format!(
            "est_popularity from_external needs a CMS mechanism, not {v:?}"
        ))),
    }
}

/// Obfuscate a concrete list of objects the way the simulated external
/// dataset is: chunk `c` of `EXTERNAL_CHUNK` records uses stream
/// `(master_seed, "external", c)`.
pub fn obfuscated_counts(
    mech: &Mechanism,
    objects: &[u32],
    master_seed: u64,
) -> Result<FrequencyCounts> {
    let mut counts = FrequencyCounts::new(mech)?;
    for (c, chunk) in objects.chunks(EXTERNAL_CHUNK as usize).enumerate() {
        let mut rng = stream(master_seed, purpose::EXTERNAL, c as u64);
        for &x in chunk {
            counts.push(&mech.cms_obfuscate(x, &mut rng)?)?;
        }
    }
    Ok(counts)
}

/// Parse a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let path = std::path::absolute(path).map_err(|e| Error::io(path, e))?;
    ScenarioConfig::from_json_str(&text, &path)
}
