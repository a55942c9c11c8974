//! The pool inference game, played once per user.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::attack::{baseline_attack, Attack, AttackConfig, AttackOutcome};
use crate::mechanism::{Mechanism, Observation};
use crate::metrics::sample_profile;
use crate::population::{
    build_user_behavior, jsd, perturb_popularity, profile_from_sequence, sample_objects, PoolSet,
    Popularity, UserProfile,
};
use crate::rng::{purpose, stream, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    #[default]
    Bpia,
    Baseline,
}

/// A fully resolved scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub pools: PoolSet,
    pub mechanism: Mechanism,
    pub true_popularity: Popularity,
    pub est_popularity: Popularity,
    pub n_observations: Vec<usize>,
    pub n_users: usize,
    pub perturb_sigma: f64,
    pub master_seed: u64,
    pub attack: AttackConfig,
    pub kind: AttackKind,
}

/// The attack result after the first `n` observations.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixResult {
    pub n: usize,
    pub outcome: AttackOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameRecord {
    pub user_id: u64,
    pub true_pool: usize,
    pub gamma: f64,
    pub delta: f64,
    /// JSD between the user's perturbed popularity and the estimated one,
    /// when perturbation is enabled.
    pub divergence: Option<f64>,
    /// The preferred pool came from a tie in an ingested sequence.
    pub tied: bool,
    pub results: Vec<PrefixResult>,
}

impl GameRecord {
    pub fn correct(&self, i: usize) -> bool {
        self.results[i].outcome.best_pool == self.true_pool
    }
}

/// A scenario with its attack prepared, ready to play.
#[derive(Debug, Clone)]
pub struct Game {
    scenario: Scenario,
    attack: Attack,
    max_n: usize,
}

impl Game {
    pub fn new(scenario: Scenario) -> Result<Self> {
        let n = &scenario.n_observations;
        if n.is_empty() || n.contains(&0) {
            return Err(Error::config("n_observations must list counts >= 1"));
        }
        if n.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("n_observations must be strictly increasing"));
        }
        if scenario.n_users == 0 {
            return Err(Error::config("n_users must be at least 1"));
        }
        if !(scenario.perturb_sigma >= 0.0) || !scenario.perturb_sigma.is_finite() {
            return Err(Error::config(format!(
                "perturb_sigma must be >= 0, got {}",
                scenario.perturb_sigma
            )));
        }
        if scenario.pools.k() < 2 {
            return Err(Error::config(
                "the game needs at least two pools of interest",
            ));
        }
        if scenario.true_popularity.len() != scenario.pools.universe_size() as usize {
            return Err(Error::config("true popularity does not cover the universe"));
        }
        let attack = Attack::new(
            scenario.mechanism.clone(),
            &scenario.pools,
            &scenario.est_popularity,
            scenario.attack.clone(),
        )?;
        let max_n = *n.last().unwrap_or(&1);
        Ok(Self {
            scenario,
            attack,
            max_n,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn attack(&self) -> &Attack {
        &self.attack
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    fn user_stream(&self, user_index: u64) -> Stream {
        stream(self.scenario.master_seed, purpose::USER, user_index)
    }

    fn play(
        &self,
        user_id: u64,
        profile: UserProfile,
        objects: &[u32],
        divergence: Option<f64>,
        tied: bool,
        rng: &mut Stream,
    ) -> Result<(GameRecord, Vec<Observation>)> {
        let mech: &Mechanism = &self.scenario.mechanism;
        let obs: Vec<Observation> = objects
            .iter()
            .map(|&x| mech.obfuscate(x, rng))
            .collect::<Result<_>>()?;
        let prefixes = &self.scenario.n_observations;
        let outcomes = match self.scenario.kind {
            AttackKind::Bpia => self.attack.run_prefixes(&obs, prefixes, rng)?,
            AttackKind::Baseline => prefixes
                .iter()
                .map(|_| baseline_attack(self.attack.k(), rng))
                .collect(),
        };
        let record = GameRecord {
            user_id,
            true_pool: profile.preferred_pool,
            gamma: profile.gamma,
            delta: profile.delta,
            divergence,
            tied,
            results: prefixes
                .iter()
                .zip(outcomes)
                .map(|(&n, outcome)| PrefixResult { n, outcome })
                .collect(),
        };
        Ok((record, obs))
    }

    /// Play the game for synthetic user `user_index`.
    pub fn run_instance(&self, user_index: u64) -> Result<GameRecord> {
        self.run_instance_observed(user_index).map(|(r, _)| r)
    }

    /// As [`Game::run_instance`], also returning the `max_n` observations
    /// the adversary received.
    pub fn run_instance_observed(&self, user_index: u64) -> Result<(GameRecord, Vec<Observation>)> {
        let s = &self.scenario;
        let mut rng = self.user_stream(user_index);
        let profile = sample_profile(s.pools.k(), &mut rng);
        let (behavior, divergence) = if s.perturb_sigma > 0.0 {
            let own = perturb_popularity(&s.true_popularity, s.perturb_sigma, &mut rng)?;
            let d = jsd(&s.est_popularity, &own)?;
            (build_user_behavior(&own, &s.pools, &profile)?, Some(d))
        } else {
            (
                build_user_behavior(&s.true_popularity, &s.pools, &profile)?,
                None,
            )
        };
        let objects = sample_objects(&behavior, self.max_n, &mut rng)?;
        self.play(user_index, profile, &objects, divergence, false, &mut rng)
    }

    /// Play the game on a recorded object sequence (at least `max_n` long).
    /// Returns `None` when the sequence has no object in a pool of interest.
    pub fn run_sequence(&self, user_index: u64, sequence: &[u32]) -> Result<Option<GameRecord>> {
        if sequence.len() < self.max_n {
            return Err(Error::Data(format!(
                "user {user_index} has {} objects, the scenario needs {}",
                sequence.len(),
                self.max_n
            )));
        }
        let seq = &sequence[..self.max_n];
        let Some(extracted) = profile_from_sequence(seq, &self.scenario.pools)? else {
            return Ok(None);
        };
        let mut rng = self.user_stream(user_index);
        self.play(
            user_index,
            extracted.profile,
            seq,
            None,
            extracted.tied,
            &mut rng,
        )
        .map(|(r, _)| Some(r))
    }

    /// Every user in index order, single threaded.
    pub fn run(&self) -> Result<Vec<GameRecord>> {
        (0..self.scenario.n_users as u64)
            .map(|u| self.run_instance(u))
            .collect()
    }
}
