//! Experiment specification and the seeded multi-run driver.

use std::fmt;
use std::path::PathBuf;

use autoexplore_core::disco::{disco_run, DiscoConfig, Navigation, ThetaMode};
use autoexplore_core::env::SimulatedEnv;
use autoexplore_core::envs::{make_combination_lock, make_confusing_chain, make_layered_star};
use autoexplore_core::format::read_mdp_file;
use autoexplore_core::ucb::{ucb_run, EpisodeRule, UcbBonus, UcbConfig};
use autoexplore_core::{AlgoParams, Error, ExplorationResult, Result, StopReason, TabularMdp};
use rayon::prelude::*;

use crate::verify::{AxFlags, AxOracle};

/// Which environment to build, with its parameters resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    ConfusingChain {
        c: usize,
        kc: usize,
        m: usize,
        p_skip: f64,
        p_c: f64,
    },
    CombinationLock {
        n: usize,
    },
    LayeredStar,
    File(PathBuf),
}

impl EnvSpec {
    /// Parses `confusing-chain`, `combination-lock`, `layered-star` or `file:<path>` plus `key=value` overrides.
    pub fn parse(name: &str, params: &[(String, String)]) -> Result<Self> {
        let mut spec = match name {
            "confusing-chain" => EnvSpec::ConfusingChain {
                c: 5,
                kc: 6,
                m: 4,
                p_skip: 1.0 / 3.0,
                p_c: 1.0,
            },
            "combination-lock" => EnvSpec::CombinationLock { n: 6 },
            "layered-star" => EnvSpec::LayeredStar,
            other => match other.strip_prefix("file:") {
                Some(path) if !path.is_empty() => EnvSpec::File(PathBuf::from(path)),
                _ => return Err(Error::InvalidParams(format!("unknown environment {other:?}"))),
            },
        };
        for (key, value) in params {
            spec.set(key, value)?;
        }
        Ok(spec)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::InvalidParams(format!("bad value {value:?} for {key}")))
        }
        match (self, key) {
            (EnvSpec::ConfusingChain { c, .. }, "C") => *c = num(key, value)?,
            (EnvSpec::ConfusingChain { kc, .. }, "Kc") => *kc = num(key, value)?,
            (EnvSpec::ConfusingChain { m, .. }, "m") => *m = num(key, value)?,
            (EnvSpec::ConfusingChain { p_skip, .. }, "p_skip") => *p_skip = num(key, value)?,
            (EnvSpec::ConfusingChain { p_c, .. }, "p_c") => *p_c = num(key, value)?,
            (EnvSpec::CombinationLock { n }, "N") => *n = num(key, value)?,
            (spec, _) => {
                return Err(Error::InvalidParams(format!(
                    "environment {} has no parameter {key:?}",
                    spec.name()
                )))
            }
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        match self {
            EnvSpec::ConfusingChain { .. } => "confusing-chain".into(),
            EnvSpec::CombinationLock { .. } => "combination-lock".into(),
            EnvSpec::LayeredStar => "layered-star".into(),
            EnvSpec::File(p) => format!("file:{}", p.display()),
        }
    }

    pub fn build(&self) -> Result<TabularMdp> {
        match self {
            &EnvSpec::ConfusingChain { c, kc, m, p_skip, p_c } => make_confusing_chain(c, kc, m, p_skip, p_c),
            &EnvSpec::CombinationLock { n } => make_combination_lock(n),
            EnvSpec::LayeredStar => Ok(make_layered_star()),
            EnvSpec::File(path) => read_mdp_file(path),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Disco,
    Ucb,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Disco => "disco",
            Algorithm::Ucb => "ucb",
        })
    }
}

/// Per-algorithm knobs that are not part of `(L, eps, delta, mode)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tunings {
    pub theta: ThetaMode,
    pub navigation: Navigation,
    pub ucb_bonus: UcbBonus,
    pub episodes: EpisodeRule,
    pub bucketed_counts: bool,
    pub early_stop: bool,
    pub replan_final: bool,
}

impl Tunings {
    /// Benchmark defaults: the combination lock uses the max-variance allocation and unbucketed log-cubic rounds.
    pub fn for_env(env: &EnvSpec) -> Self {
        let lock = matches!(env, EnvSpec::CombinationLock { .. });
        Self {
            theta: if lock { ThetaMode::Max } else { ThetaMode::PerPair },
            navigation: Navigation::Sequential,
            ucb_bonus: UcbBonus::Bernstein,
            episodes: if lock { EpisodeRule::LogCubic } else { EpisodeRule::Cubic },
            bucketed_counts: !lock,
            early_stop: true,
            replan_final: true,
        }
    }

    pub fn disco_config(&self, params: AlgoParams) -> DiscoConfig {
        DiscoConfig::new(params)
            .with_theta(self.theta)
            .with_navigation(self.navigation)
    }

    pub fn ucb_config(&self, params: &AlgoParams) -> UcbConfig {
        UcbConfig {
            bonus: self.ucb_bonus,
            episodes: self.episodes,
            bucketed_counts: self.bucketed_counts,
            early_stop: self.early_stop,
            replan_final: self.replan_final,
            ..UcbConfig::new(params)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub env: EnvSpec,
    pub algorithm: Algorithm,
    pub params: AlgoParams,
    pub tunings: Tunings,
    pub num_seeds: usize,
    pub base_seed: u64,
    /// Worker threads; `0` lets the pool pick.
    pub workers: usize,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Spec with the environment's default tunings, one worker and no output directory.
    pub fn new(env: EnvSpec, algorithm: Algorithm, params: AlgoParams, num_seeds: usize, base_seed: u64) -> Self {
        let tunings = Tunings::for_env(&env);
        Self {
            env,
            algorithm,
            params,
            tunings,
            num_seeds,
            base_seed,
            workers: 0,
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_seeds == 0 {
            return Err(Error::InvalidParams("num_seeds must be >= 1".into()));
        }
        Ok(())
    }
}

/// Measured outcome of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub sample_complexity: u64,
    /// `None` when the run failed; see `error`.
    pub stop_reason: Option<StopReason>,
    pub error: Option<String>,
    /// Exact hitting time of the returned policy per state; `None` outside the final `K`.
    pub hitting: Vec<Option<f64>>,
    pub ax: AxFlags,
    /// `(step, |K ∩ S_L→| / |S_L→|)` sampled every [`CURVE_CADENCE`] steps.
    pub curve: Vec<(u64, f64)>,
}

impl RunRecord {
    pub fn controlled(&self) -> Vec<usize> {
        (0..self.hitting.len()).filter(|&s| self.hitting[s].is_some()).collect()
    }

    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

pub const CURVE_CADENCE: u64 = 100;

/// SplitMix64 finaliser used to decorrelate consecutive run seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed handed to the simulator for the run labelled `seed`.
pub fn stream_seed(seed: u64) -> u64 {
    splitmix64(seed)
}

/// Runs the algorithm once on `mdp` with the given run seed.
pub fn run_once(spec: &ExperimentSpec, mdp: &TabularMdp, seed: u64) -> Result<ExplorationResult> {
    let mut env = SimulatedEnv::new(mdp, stream_seed(seed));
    match spec.algorithm {
        Algorithm::Disco => disco_run(&mut env, &spec.tunings.disco_config(spec.params)),
        Algorithm::Ucb => ucb_run(&mut env, &spec.tunings.ucb_config(&spec.params)),
    }
}

/// Discovery curve of a finished run against the reference set `target` (sorted).
pub fn discovery_fractions(result: &ExplorationResult, target: &[usize], s0: usize) -> Vec<(u64, f64)> {
    let denom = target.len().max(1) as f64;
    let mut hits = usize::from(target.binary_search(&s0).is_ok());
    let mut transfers = result.transfers.iter().peekable();
    let mut curve = Vec::new();
    let mut step = 0;
    loop {
        while let Some(&&(t, s)) = transfers.peek() {
            if t > step {
                break;
            }
            if target.binary_search(&s).is_ok() {
                hits += 1;
            }
            transfers.next();
        }
        curve.push((step, hits as f64 / denom));
        if step >= result.total_steps {
            break;
        }
        step = (step + CURVE_CADENCE).min(result.total_steps);
    }
    curve
}

/// Turns one run outcome into a record, evaluating every returned policy exactly.
pub fn record_run(seed: u64, mdp: &TabularMdp, oracle: &AxOracle, outcome: Result<ExplorationResult>) -> RunRecord {
    match outcome {
        Ok(result) => {
            let mut hitting = vec![None; mdp.num_states()];
            for (&s, v) in result.controlled.iter().zip(result.hitting_times(mdp)) {
                hitting[s] = Some(v);
            }
            let ax = oracle.check(&hitting);
            RunRecord {
                seed,
                sample_complexity: result.total_steps,
                stop_reason: Some(result.stop_reason),
                error: None,
                curve: discovery_fractions(&result, oracle.incremental_set(), mdp.initial_state()),
                hitting,
                ax,
            }
        }
        Err(e) => RunRecord {
            seed,
            sample_complexity: 0,
            stop_reason: None,
            error: Some(e.to_string()),
            hitting: vec![None; mdp.num_states()],
            ax: AxFlags::default(),
            curve: Vec::new(),
        },
    }
}

/// Executes `num_seeds` runs with seeds `base_seed + i`; records come back ordered by seed.
///
/// Fails only on an invalid spec; failed runs are kept as records with `error` set.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<RunRecord>> {
    spec.validate()?;
    let mdp = spec.env.build()?;
    let oracle = AxOracle::new(&mdp, &spec.params);
    let seeds: Vec<u64> = (0..spec.num_seeds as u64).map(|i| spec.base_seed.wrapping_add(i)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::InvalidParams(format!("worker pool: {e}")))?;
    let records = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| record_run(seed, &mdp, &oracle, run_once(spec, &mdp, seed)))
            .collect()
    });
    Ok(records)
}
