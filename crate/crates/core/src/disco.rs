//! DisCo: incremental discovery of controllable states with optimistic shortest-path policies.

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::mdp::{AlgoParams, DeterministicPolicy, Mode};
use crate::optimistic::{build_optimistic_instance_with_costs, ovi_ssp, Bonus, CountsTable};
use crate::result::{Event, ExplorationResult, GoalPolicy, StopReason};
use crate::ssp::vi_ssp;

/// Default cap on environment steps for a single run.
pub const DEFAULT_STEP_CAP: u64 = 1_000_000_000;

/// How the variance term of the practical allocation is aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThetaMode {
    /// One target per state-action pair.
    #[default]
    PerPair,
    /// Maximum over pairs, shared by all.
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscoConfig {
    pub params: AlgoParams,
    pub theta: ThetaMode,
    pub navigation: Navigation,
    pub step_cap: u64,
}

/// How the collector moves between deficit pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Navigation {
    /// Pairs in discovery order, each reached with its own goal policy.
    #[default]
    Sequential,
    /// Same order, but any deficit pair at the current state is executed on the spot.
    Opportunistic,
}

impl DiscoConfig {
    pub fn new(params: AlgoParams) -> Self {
        Self {
            params,
            theta: ThetaMode::PerPair,
            navigation: Navigation::Sequential,
            step_cap: DEFAULT_STEP_CAP,
        }
    }

    pub fn with_theta(mut self, theta: ThetaMode) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_navigation(mut self, navigation: Navigation) -> Self {
        self.navigation = navigation;
        self
    }
}

/// Confidence bonus matching the parameter mode.
pub fn bonus_for(params: &AlgoParams, num_states: usize, num_actions: usize) -> Bonus {
    match params.mode {
        Mode::Theoretical => Bonus::Bernstein {
            delta: params.delta,
            num_states,
            num_actions,
        },
        Mode::Practical => Bonus::Practical,
    }
}

/// `(sum_{s' in K} sqrt(p̂(s'|s,a)(1 - p̂(s'|s,a))))^2`.
pub fn theta_hat(counts: &CountsTable, s: usize, a: usize, k: &[usize]) -> f64 {
    let sum: f64 = k
        .iter()
        .map(|&y| {
            let p = counts.p_hat(s, a, y);
            (p * (1.0 - p)).sqrt()
        })
        .sum();
    sum * sum
}

/// `max(ceil(L^4 theta / eps^2 + L^2 size / eps), ceil(L))`.
pub fn practical_allocation(theta: f64, l: f64, epsilon: f64, size: usize) -> u64 {
    let n = (l.powi(4) * theta / (epsilon * epsilon) + l * l * size as f64 / epsilon).ceil();
    n.max(l.ceil()) as u64
}

/// Accuracy `2 eps / (12 (L + 1 + eps)(L + eps/3))` used by the theoretical allocation.
pub fn theoretical_gamma(l: f64, epsilon: f64) -> f64 {
    2.0 * epsilon / (12.0 * (l + 1.0 + epsilon) * (l + epsilon / 3.0))
}

/// Theoretical per-pair requirement for spread `x`, accuracy `gamma` and `s_dagger` local states.
pub fn theoretical_allocation(
    x: f64,
    gamma: f64,
    delta: f64,
    num_states: usize,
    num_actions: usize,
    s_dagger: usize,
) -> f64 {
    let sa = (num_states * num_actions) as f64;
    let variance = if x > 0.0 {
        let log = (8.0 * std::f64::consts::E * x * (2.0 * sa).sqrt() / (delta.sqrt() * gamma)).ln();
        57.0 * x * x / (gamma * gamma) * log * log
    } else {
        0.0
    };
    let sd = s_dagger as f64;
    let range = 24.0 * sd / gamma * (24.0 * sd * sa / (delta * gamma)).ln();
    (variance + range).ceil()
}

/// Per-pair sample targets, indexed `[position in K][action]`.
pub fn allocation_phi(
    counts: &CountsTable,
    k: &[usize],
    params: &AlgoParams,
    theta_mode: ThetaMode,
    num_states: usize,
) -> Vec<Vec<u64>> {
    let num_actions = counts.num_actions();
    let (l, eps) = (params.l, params.epsilon);
    match params.mode {
        Mode::Practical => {
            let thetas: Vec<Vec<f64>> = k
                .iter()
                .map(|&s| (0..num_actions).map(|a| theta_hat(counts, s, a, k)).collect())
                .collect();
            let shared = thetas.iter().flatten().copied().fold(0.0, f64::max);
            thetas
                .into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|t| {
                            let t = if theta_mode == ThetaMode::Max { shared } else { t };
                            practical_allocation(t, l, eps, k.len())
                        })
                        .collect()
                })
                .collect()
        }
        Mode::Theoretical => {
            // residual mass outside K stands for goal and meta-state; its split is bounded by the even one
            let x = k
                .iter()
                .flat_map(|&s| (0..num_actions).map(move |a| (s, a)))
                .map(|(s, a)| {
                    let mut inside = 0.0;
                    let mut spread = 0.0;
                    for &y in k {
                        let p = counts.p_hat(s, a, y);
                        inside += p;
                        spread += (p * (1.0 - p)).sqrt();
                    }
                    let half = ((1.0 - inside).max(0.0)) / 2.0;
                    spread + 2.0 * (half * (1.0 - half)).sqrt()
                })
                .fold(0.0, f64::max);
            let gamma = theoretical_gamma(l, eps);
            let n = theoretical_allocation(x, gamma, params.delta, num_states, num_actions, k.len() + 2);
            let floor = (l * (3.0 * num_actions as f64 * l * num_states as f64 / params.delta).ln()).ceil();
            let n = n.max(floor) as u64;
            vec![vec![n; num_actions]; k.len()]
        }
    }
}

/// Discovered-but-uncontrolled states in discovery order.
#[derive(Debug, Clone, Default)]
pub struct Candidates {
    order: Vec<usize>,
    member: Vec<bool>,
}

impl Candidates {
    pub fn new(num_states: usize) -> Self {
        Self {
            order: Vec::new(),
            member: vec![false; num_states],
        }
    }

    pub fn insert(&mut self, s: usize) {
        if !self.member[s] {
            self.member[s] = true;
            self.order.push(s);
        }
    }

    pub fn remove(&mut self, s: usize) {
        if self.member[s] {
            self.member[s] = false;
            self.order.retain(|&t| t != s);
        }
    }

    pub fn contains(&self, s: usize) -> bool {
        self.member[s]
    }

    pub fn states(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Mutable state of a run: `K` with policies, candidates `U`, counts and event log.
#[derive(Debug, Clone)]
pub struct DiscoState {
    pub round: usize,
    pub controlled: Vec<usize>,
    pub in_k: Vec<bool>,
    pub policies: Vec<DeterministicPolicy>,
    pub candidates: Candidates,
    pub counts: CountsTable,
    pub events: Vec<(u64, Event)>,
    pub transfers: Vec<(u64, usize)>,
}

impl DiscoState {
    pub fn new(num_states: usize, num_actions: usize, s0: usize, reset_action: usize) -> Self {
        let mut in_k = vec![false; num_states];
        in_k[s0] = true;
        Self {
            round: 0,
            controlled: vec![s0],
            in_k,
            policies: vec![DeterministicPolicy::constant(num_states, reset_action)],
            candidates: Candidates::new(num_states),
            counts: CountsTable::new(num_states, num_actions),
            events: Vec::new(),
            transfers: Vec::new(),
        }
    }

    fn observe(&mut self, s: usize, a: usize, next: usize) {
        self.counts.record_transition(s, a, next);
        if !self.in_k[next] {
            self.candidates.insert(next);
        }
    }
}

/// Navigates with `π_s` to each `s ∈ K` and executes actions until every pair meets its target.
pub fn collect_samples<E: Environment + ?Sized>(
    state: &mut DiscoState,
    env: &mut E,
    targets: &[Vec<u64>],
    navigation: Navigation,
    step_cap: u64,
) -> Result<()> {
    let num_actions = env.num_actions();
    let mut position = vec![usize::MAX; env.num_states()];
    for (i, &s) in state.controlled.iter().enumerate() {
        position[s] = i;
    }
    let step = |state: &mut DiscoState, env: &mut E, a: usize| -> Result<()> {
        let here = env.current_state();
        let next = env.step(a);
        state.observe(here, a, next);
        if env.steps() >= step_cap {
            return Err(Error::StepCapExceeded { cap: step_cap });
        }
        Ok(())
    };
    for i in 0..state.controlled.len() {
        let s = state.controlled[i];
        for a in 0..num_actions {
            while state.counts.n(s, a) < targets[i][a] {
                while env.current_state() != s {
                    let here = env.current_state();
                    if navigation == Navigation::Opportunistic && position[here] != usize::MAX {
                        let j = position[here];
                        if let Some(b) = (0..num_actions).find(|&b| state.counts.n(here, b) < targets[j][b]) {
                            step(state, env, b)?;
                            continue;
                        }
                    }
                    let act = state.policies[i].action(here);
                    step(state, env, act)?;
                }
                step(state, env, a)?;
            }
        }
    }
    Ok(())
}

/// Candidates that some `(s, a) ∈ K x A` reaches with estimated probability at least `(1 - eps/2)/L`.
pub fn restrict_candidates(state: &DiscoState, params: &AlgoParams) -> Vec<usize> {
    let threshold = (1.0 - params.epsilon / 2.0) / params.l;
    let num_actions = state.counts.num_actions();
    state
        .candidates
        .states()
        .iter()
        .copied()
        .filter(|&y| {
            state.controlled.iter().any(|&s| {
                (0..num_actions).any(|a| state.counts.p_hat(s, a, y) >= threshold)
            })
        })
        .collect()
}

/// Runs DisCo until it stops, then consolidates every goal policy on the final `K`.
pub fn disco_run<E: Environment + ?Sized>(env: &mut E, config: &DiscoConfig) -> Result<ExplorationResult> {
    let params = config.params;
    let (num_states, num_actions) = (env.num_states(), env.num_actions());
    let (s0, reset) = (env.initial_state(), env.reset_action());
    let bonus = bonus_for(&params, num_states, num_actions);
    let gamma = params.epsilon / (6.0 * params.l);
    let mut state = DiscoState::new(num_states, num_actions, s0, reset);

    let stop_reason = loop {
        state.round += 1;
        let targets = allocation_phi(&state.counts, &state.controlled, &params, config.theta, num_states);
        collect_samples(&mut state, env, &targets, config.navigation, config.step_cap)?;
        let w = restrict_candidates(&state, &params);
        let steps = env.steps();
        state.events.push((
            steps,
            Event::Round {
                round: state.round,
                controlled: state.controlled.len(),
                candidates: state.candidates.len(),
                restricted: w.len(),
            },
        ));
        if w.is_empty() {
            break StopReason::Stop1;
        }
        let mut best: Option<(usize, f64, DeterministicPolicy)> = None;
        for &goal in &w {
            let plan = ovi_ssp(&state.counts, &state.controlled, goal, s0, reset, bonus, gamma)?;
            if best.as_ref().is_none_or(|b| plan.value < b.1) {
                best = Some((goal, plan.value, plan.policy));
            }
        }
        let (goal, value, policy) = best.expect("W is non-empty");
        if value > params.l {
            break StopReason::Stop2;
        }
        state.candidates.remove(goal);
        state.in_k[goal] = true;
        state.controlled.push(goal);
        state.policies.push(policy);
        state.transfers.push((steps, goal));
        state.events.push((steps, Event::Transfer { state: goal, value }));
    };
    let total_steps = env.steps();
    state.events.push((total_steps, Event::Stop(stop_reason)));

    let policies = consolidate(&state.counts, &state.controlled, s0, reset, bonus, gamma)?;
    Ok(ExplorationResult {
        controlled: state.controlled,
        policies: policies.into_iter().map(GoalPolicy::Stationary).collect(),
        counts: state.counts,
        total_steps,
        transfers: state.transfers,
        stop_reason,
        events: state.events,
    })
}

/// Recomputes an optimistic policy for every goal in `k`, restricted on `k` minus that goal.
pub fn consolidate(
    counts: &CountsTable,
    k: &[usize],
    s0: usize,
    reset: usize,
    bonus: Bonus,
    gamma: f64,
) -> Result<Vec<DeterministicPolicy>> {
    k.iter()
        .map(|&goal| {
            if goal == s0 {
                return Ok(DeterministicPolicy::constant(counts.num_states(), reset));
            }
            let others: Vec<usize> = k.iter().copied().filter(|&s| s != goal).collect();
            Ok(ovi_ssp(counts, &others, goal, s0, reset, bonus, gamma)?.policy)
        })
        .collect()
}

/// Plans a policy to `goal` for costs `cost(s, a)` from the counts of a finished run, without new samples.
///
/// Costs are read on `K x A`; the forced RESET outside `K` is charged `cost(s0, RESET)`.
pub fn zero_shot_plan<C>(
    result: &ExplorationResult,
    goal: usize,
    params: &AlgoParams,
    s0: usize,
    reset: usize,
    gamma: f64,
    cost: C,
) -> Result<DeterministicPolicy>
where
    C: Fn(usize, usize) -> f64,
{
    if !result.controlled.contains(&goal) {
        return Err(Error::GoalNotControlled(goal));
    }
    let counts = &result.counts;
    for &s in &result.controlled {
        for a in 0..counts.num_actions() {
            let c = cost(s, a);
            if !(c > 0.0 && c <= 1.0) {
                return Err(Error::InvalidCost(format!("cost({s}, {a}) = {c} outside (0, 1]")));
            }
        }
    }
    if goal == s0 {
        return Ok(DeterministicPolicy::constant(counts.num_states(), reset));
    }
    let bonus = bonus_for(params, counts.num_states(), counts.num_actions());
    let others: Vec<usize> = result.controlled.iter().copied().filter(|&s| s != goal).collect();
    let instance = build_optimistic_instance_with_costs(counts, &others, goal, s0, reset, bonus, &cost)?;
    let sol = vi_ssp(&instance.problem, gamma)?;
    let mut policy = DeterministicPolicy::constant(counts.num_states(), reset);
    for (i, &s) in others.iter().enumerate() {
        policy.set(s, sol.action[i]);
    }
    Ok(policy)
}
