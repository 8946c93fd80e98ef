//! UcbExplore baseline: optimistic finite-horizon planning with per-candidate evaluation rounds.

use crate::disco::{Candidates, DEFAULT_STEP_CAP};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::mdp::{AlgoParams, DeterministicPolicy};
use crate::optimistic::CountsTable;
use crate::oracle::resetting_value;
use crate::result::{Event, ExplorationResult, GoalPolicy, StopReason};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UcbBonus {
    Bernstein,
    Hoeffding,
    /// Plan on the empirical model only.
    None,
}

/// Number of evaluation episodes per round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpisodeRule {
    /// `ceil((L / eps)^3)`.
    Cubic,
    /// `ceil(ln(|K|^2) (L / eps)^3)`, at least one episode.
    LogCubic,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UcbConfig {
    pub l: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub horizon: usize,
    pub episodes: EpisodeRule,
    pub bonus: UcbBonus,
    /// Confidence widths use `N / H` in place of `N`.
    pub bucketed_counts: bool,
    /// Stop an evaluation round once failure is certain.
    pub early_stop: bool,
    /// Executions of each action at a newly controlled state.
    pub discovery_samples: u64,
    /// Recompute every goal policy on the final empirical model before returning.
    pub replan_final: bool,
    pub step_cap: u64,
}

impl UcbConfig {
    /// Tuned defaults: `H = ceil(L + L^2/eps)`, cubic episode count, Bernstein widths on bucketed counts,
    /// early-stopped rounds and final re-planning.
    pub fn new(params: &AlgoParams) -> Self {
        let (l, eps) = (params.l, params.epsilon);
        Self {
            l,
            epsilon: eps,
            delta: params.delta,
            horizon: (l + l * l / eps).ceil() as usize,
            episodes: EpisodeRule::Cubic,
            bonus: UcbBonus::Bernstein,
            bucketed_counts: true,
            early_stop: true,
            discovery_samples: l.ceil() as u64,
            replan_final: true,
            step_cap: DEFAULT_STEP_CAP,
        }
    }

    pub fn episodes_for(&self, controlled: usize) -> usize {
        let cube = (self.l / self.epsilon).powi(3);
        match self.episodes {
            EpisodeRule::Cubic => cube.ceil() as usize,
            EpisodeRule::LogCubic => {
                let k = controlled as f64;
                ((k * k).ln() * cube).ceil().max(1.0) as usize
            }
            EpisodeRule::Fixed(n) => n,
        }
        .max(1)
    }

    pub fn threshold(&self) -> f64 {
        self.l + self.epsilon
    }

    fn effective_count(&self, n: u64) -> f64 {
        let n = n as f64;
        let n = if self.bucketed_counts { n / self.horizon as f64 } else { n };
        n.max(1.0)
    }

    fn width(&self, variance: f64, range: f64, n: u64) -> f64 {
        let n = self.effective_count(n);
        match self.bonus {
            UcbBonus::Bernstein => (variance / n).sqrt() + range / n,
            UcbBonus::Hoeffding => range / n.sqrt(),
            UcbBonus::None => 0.0,
        }
    }
}

/// Outcome of optimistic finite-horizon planning towards one goal.
#[derive(Debug, Clone)]
pub struct FinitePlan {
    /// Optimistic probability of reaching the goal within `H` steps.
    pub success_probability: f64,
    /// Optimistic `E[tau ^ H]`.
    pub truncated_time: f64,
    /// Optimistic value of the policy that RESETs every `H` steps.
    pub optimistic_value: f64,
    pub policy: GoalPolicy,
}

/// Optimistic backward induction over `K ∪ {x, goal}`.
///
/// The policy minimises optimistic truncated time; the success probability is then
/// propagated optimistically under that policy.
pub fn finite_horizon_plan(
    counts: &CountsTable,
    k: &[usize],
    goal: usize,
    s0: usize,
    reset: usize,
    config: &UcbConfig,
) -> FinitePlan {
    let nk = k.len();
    let (x, g) = (nk, nk + 1);
    let h_max = config.horizon;
    let num_actions = counts.num_actions();
    let s0_local = k.iter().position(|&s| s == s0).expect("s0 in K");

    // empirical rows over local indices
    let rows: Vec<Vec<Vec<f64>>> = k
        .iter()
        .map(|&s| {
            (0..num_actions)
                .map(|a| {
                    let mut row = vec![0.0; nk + 2];
                    if counts.n(s, a) == 0 {
                        return row;
                    }
                    let mut inside = 0.0;
                    for (i, &y) in k.iter().enumerate() {
                        row[i] = counts.p_hat(s, a, y);
                        inside += row[i];
                    }
                    row[g] = counts.p_hat(s, a, goal);
                    row[x] = (1.0 - inside - row[g]).max(0.0);
                    row
                })
                .collect()
        })
        .collect();

    let moments = |row: &[f64], v: &[f64]| -> (f64, f64) {
        let mean: f64 = row.iter().zip(v).map(|(p, y)| p * y).sum();
        let second: f64 = row.iter().zip(v).map(|(p, y)| p * y * y).sum();
        (mean, (second - mean * mean).max(0.0))
    };

    let mut stages = vec![vec![reset; counts.num_states()]; h_max];
    let mut local_choice = vec![vec![0usize; nk]; h_max];
    let mut time = vec![0.0; nk + 2];
    for h in (0..h_max).rev() {
        let to_go = (h_max - h) as f64;
        let mut next = vec![0.0; nk + 2];
        for i in 0..nk {
            let mut best = f64::INFINITY;
            let mut best_a = 0;
            for a in 0..num_actions {
                let row = &rows[i][a];
                let (mean, var) = moments(row, &time);
                let n = counts.n(k[i], a);
                let b = config.width(var, to_go, n);
                let q = (1.0 + mean - b).clamp(1.0, to_go);
                if q < best {
                    best = q;
                    best_a = a;
                }
            }
            next[i] = best;
            local_choice[h][i] = best_a;
            stages[h][k[i]] = best_a;
        }
        next[x] = (1.0 + time[s0_local]).min(to_go);
        next[g] = 0.0;
        time = next;
    }

    let mut success = vec![0.0; nk + 2];
    success[g] = 1.0;
    for h in (0..h_max).rev() {
        let mut next = vec![0.0; nk + 2];
        for i in 0..nk {
            let a = local_choice[h][i];
            let (mean, var) = moments(&rows[i][a], &success);
            let b = config.width(var, 1.0, counts.n(k[i], a));
            next[i] = (mean + b).clamp(0.0, 1.0);
        }
        next[x] = success[s0_local];
        next[g] = 1.0;
        success = next;
    }

    let p = success[s0_local];
    let t = time[s0_local];
    FinitePlan {
        success_probability: p,
        truncated_time: t,
        optimistic_value: resetting_value(t, 1.0 - p),
        policy: GoalPolicy::Resetting { stages },
    }
}

/// Tally of one evaluation round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundOutcome {
    pub success: bool,
    pub episodes: usize,
    pub steps: u64,
    /// Empirical `(v̂_H + q̂)/(1 - q̂)` over the episodes run.
    pub estimate: f64,
}

/// Runs up to `episodes` episodes of at most `horizon` steps from `s0` and tests the empirical
/// resetting value against `threshold`. Every transition is recorded and reported to `observe`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_round<E, F>(
    env: &mut E,
    counts: &mut CountsTable,
    policy: &GoalPolicy,
    goal: usize,
    episodes: usize,
    horizon: usize,
    threshold: f64,
    early_stop: bool,
    step_cap: u64,
    mut observe: F,
) -> Result<RoundOutcome>
where
    E: Environment + ?Sized,
    F: FnMut(usize),
{
    let s0 = env.initial_state();
    let reset = env.reset_action();
    let start = env.steps();
    let mut step = |env: &mut E, counts: &mut CountsTable, a: usize| -> Result<usize> {
        let here = env.current_state();
        let next = env.step(a);
        counts.record_transition(here, a, next);
        observe(next);
        if env.steps() >= step_cap {
            return Err(Error::StepCapExceeded { cap: step_cap });
        }
        Ok(next)
    };
    let mut truncated_sum = 0.0;
    let mut failures = 0usize;
    let mut run = 0usize;
    let lambda = episodes as f64;
    while run < episodes {
        if env.current_state() != s0 {
            step(env, counts, reset)?;
        }
        let mut tau = 0usize;
        let mut reached = s0 == goal;
        while !reached && tau < horizon {
            let a = policy.action(tau, env.current_state());
            let next = step(env, counts, a)?;
            tau += 1;
            reached = next == goal;
        }
        truncated_sum += tau as f64;
        if !reached {
            failures += 1;
        }
        run += 1;
        if early_stop && run < episodes {
            let rest = (episodes - run) as f64;
            let best = resetting_value((truncated_sum + rest) / lambda, failures as f64 / lambda);
            if best > threshold {
                break;
            }
        }
    }
    let n = run as f64;
    let estimate = resetting_value(truncated_sum / n, failures as f64 / n);
    Ok(RoundOutcome {
        success: run == episodes && estimate <= threshold,
        episodes: run,
        steps: env.steps() - start,
        estimate,
    })
}

/// Runs UcbExplore until no candidate looks reachable within `L + eps`.
pub fn ucb_run<E: Environment + ?Sized>(env: &mut E, config: &UcbConfig) -> Result<ExplorationResult> {
    let (num_states, num_actions) = (env.num_states(), env.num_actions());
    let (s0, reset) = (env.initial_state(), env.reset_action());
    let mut counts = CountsTable::new(num_states, num_actions);
    let mut controlled = vec![s0];
    let mut in_k = vec![false; num_states];
    in_k[s0] = true;
    let mut policies = vec![GoalPolicy::Stationary(DeterministicPolicy::constant(num_states, reset))];
    let mut candidates = Candidates::new(num_states);
    let mut events = Vec::new();
    let mut transfers = Vec::new();
    let mut round = 0usize;

    discover(env, &mut counts, &mut candidates, &in_k, s0, &policies[0], config)?;
    let stop_reason = loop {
        if candidates.is_empty() {
            break StopReason::Stop1;
        }
        round += 1;
        let mut best: Option<(usize, FinitePlan)> = None;
        for &u in candidates.states() {
            let plan = finite_horizon_plan(&counts, &controlled, u, s0, reset, config);
            if plan.optimistic_value > config.threshold() {
                continue;
            }
            if best.as_ref().is_none_or(|b| plan.optimistic_value < b.1.optimistic_value) {
                best = Some((u, plan));
            }
        }
        events.push((
            env.steps(),
            Event::Round {
                round,
                controlled: controlled.len(),
                candidates: candidates.len(),
                restricted: usize::from(best.is_some()),
            },
        ));
        let Some((goal, plan)) = best else {
            break StopReason::Stop2;
        };
        let in_k_snapshot = in_k.clone();
        let outcome = {
            let candidates = &mut candidates;
            evaluate_round(
                env,
                &mut counts,
                &plan.policy,
                goal,
                config.episodes_for(controlled.len()),
                config.horizon,
                config.threshold(),
                config.early_stop,
                config.step_cap,
                |next| {
                    if !in_k_snapshot[next] {
                        candidates.insert(next);
                    }
                },
            )?
        };
        if outcome.success {
            candidates.remove(goal);
            in_k[goal] = true;
            controlled.push(goal);
            transfers.push((env.steps(), goal));
            events.push((
                env.steps(),
                Event::Transfer {
                    state: goal,
                    value: outcome.estimate,
                },
            ));
            policies.push(plan.policy);
            let policy = policies.last().expect("just pushed");
            discover(env, &mut counts, &mut candidates, &in_k, goal, policy, config)?;
        } else {
            events.push((env.steps(), Event::Failure { state: goal }));
        }
    };
    if config.replan_final {
        let empirical = UcbConfig {
            bonus: UcbBonus::None,
            ..*config
        };
        for (i, &goal) in controlled.iter().enumerate().skip(1) {
            let rest: Vec<usize> = controlled.iter().copied().filter(|&s| s != goal).collect();
            policies[i] = finite_horizon_plan(&counts, &rest, goal, s0, reset, &empirical).policy;
        }
    }
    let total_steps = env.steps();
    events.push((total_steps, Event::Stop(stop_reason)));
    Ok(ExplorationResult {
        controlled,
        policies,
        counts,
        total_steps,
        transfers,
        stop_reason,
        events,
    })
}

/// Executes every action `discovery_samples` times at `target`, navigating with `policy`.
fn discover<E: Environment + ?Sized>(
    env: &mut E,
    counts: &mut CountsTable,
    candidates: &mut Candidates,
    in_k: &[bool],
    target: usize,
    policy: &GoalPolicy,
    config: &UcbConfig,
) -> Result<()> {
    let s0 = env.initial_state();
    let reset = env.reset_action();
    let horizon = match policy {
        GoalPolicy::Resetting { stages } => stages.len(),
        GoalPolicy::Stationary(_) => usize::MAX,
    };
    let mut take = |env: &mut E, counts: &mut CountsTable, a: usize| -> Result<()> {
        let here = env.current_state();
        let next = env.step(a);
        counts.record_transition(here, a, next);
        if !in_k[next] {
            candidates.insert(next);
        }
        if env.steps() >= config.step_cap {
            return Err(Error::StepCapExceeded { cap: config.step_cap });
        }
        Ok(())
    };
    for a in 0..env.num_actions() {
        for _ in 0..config.discovery_samples {
            if env.current_state() != target {
                if env.current_state() != s0 {
                    take(env, counts, reset)?;
                }
                let mut stage = 0;
                while env.current_state() != target {
                    if stage == horizon {
                        take(env, counts, reset)?;
                        stage = 0;
                        continue;
                    }
                    let act = policy.action(stage, env.current_state());
                    take(env, counts, act)?;
                    stage += 1;
                }
            }
            take(env, counts, a)?;
        }
    }
    Ok(())
}
