//! Exact ground-truth quantities on a known MDP: policy hitting times, restricted
//! shortest paths, incrementally controllable sets and truncated/resetting values.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::mdp::{DeterministicPolicy, HittingValues, TabularMdp};

/// Sup-norm tolerance for the oracle value iteration.
pub const ORACLE_VI_TOL: f64 = 1e-10;

/// Above this many unknowns the policy-evaluation solve switches to Gauss-Seidel.
const DIRECT_SOLVE_MAX: usize = 2000;

const ORACLE_MAX_SWEEPS: usize = 10_000_000;

/// Sparse Markov chain rows `(next, prob)` together with per-state costs.
struct Chain {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Chain {
    fn of_policy(mdp: &TabularMdp, policy: &DeterministicPolicy) -> Self {
        let rows = (0..mdp.num_states())
            .map(|s| mdp.support(s, policy.action(s)).collect())
            .collect();
        Self { rows }
    }

    /// States reaching `goal` with probability one (goal included).
    fn almost_sure_reach(&self, goal: usize) -> Vec<bool> {
        let n = self.rows.len();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (s, row) in self.rows.iter().enumerate() {
            if s == goal {
                continue;
            }
            for &(t, _) in row {
                preds[t].push(s);
            }
        }
        let reaches = backward_closure(&preds, std::iter::once(goal));
        let doomed_seeds = (0..n).filter(|&s| !reaches[s]);
        let doomed = backward_closure(&preds, doomed_seeds);
        (0..n).map(|s| s == goal || !doomed[s]).collect()
    }

    /// Expected cumulative cost until `goal`, `f64::INFINITY` where improper.
    fn cost_to_goal(&self, cost: &[f64], goal: usize) -> Vec<f64> {
        let n = self.rows.len();
        let proper = self.almost_sure_reach(goal);
        let mut index = vec![usize::MAX; n];
        let mut unknowns = Vec::new();
        for s in 0..n {
            if proper[s] && s != goal {
                index[s] = unknowns.len();
                unknowns.push(s);
            }
        }
        let mut value = vec![f64::INFINITY; n];
        value[goal] = 0.0;
        if unknowns.is_empty() {
            return value;
        }
        let m = unknowns.len();
        let solution = if m <= DIRECT_SOLVE_MAX {
            let mut a = DMatrix::<f64>::identity(m, m);
            let mut b = DVector::<f64>::zeros(m);
            for (i, &s) in unknowns.iter().enumerate() {
                b[i] = cost[s];
                for &(t, p) in &self.rows[s] {
                    if t != goal {
                        a[(i, index[t])] -= p;
                    }
                }
            }
            a.lu()
                .solve(&b)
                .map(|x| x.iter().copied().collect::<Vec<_>>())
                .unwrap_or_else(|| self.gauss_seidel(&unknowns, &index, cost, goal))
        } else {
            self.gauss_seidel(&unknowns, &index, cost, goal)
        };
        for (i, &s) in unknowns.iter().enumerate() {
            value[s] = solution[i].max(0.0);
        }
        value
    }

    fn gauss_seidel(&self, unknowns: &[usize], index: &[usize], cost: &[f64], goal: usize) -> Vec<f64> {
        let mut x = vec![0.0; unknowns.len()];
        for _ in 0..ORACLE_MAX_SWEEPS {
            let mut delta: f64 = 0.0;
            for (i, &s) in unknowns.iter().enumerate() {
                let mut self_loop = 0.0;
                let mut acc = cost[s];
                for &(t, p) in &self.rows[s] {
                    if t == goal {
                        continue;
                    }
                    if t == s {
                        self_loop += p;
                    } else {
                        acc += p * x[index[t]];
                    }
                }
                let next = acc / (1.0 - self_loop);
                delta = delta.max((next - x[i]).abs());
                x[i] = next;
            }
            if delta < 1e-13 {
                break;
            }
        }
        x
    }
}

fn backward_closure(preds: &[Vec<usize>], seeds: impl Iterator<Item = usize>) -> Vec<bool> {
    let mut mark = vec![false; preds.len()];
    let mut queue = VecDeque::new();
    for s in seeds {
        if !mark[s] {
            mark[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(t) = queue.pop_front() {
        for &s in &preds[t] {
            if !mark[s] {
                mark[s] = true;
                queue.push_back(s);
            }
        }
    }
    mark
}

/// Expected cost to `goal` of a Markov chain given by sparse rows; `f64::INFINITY` where improper.
pub fn chain_cost_to_goal(rows: Vec<Vec<(usize, f64)>>, cost: &[f64], goal: usize) -> Vec<f64> {
    let rows = rows
        .into_iter()
        .map(|r| r.into_iter().filter(|&(_, p)| p > 0.0).collect())
        .collect();
    Chain { rows }.cost_to_goal(cost, goal)
}

/// Exact `v_pi(s -> goal)` for every `s`.
pub fn evaluate_policy_hitting(mdp: &TabularMdp, policy: &DeterministicPolicy, goal: usize) -> HittingValues {
    let cost = vec![1.0; mdp.num_states()];
    HittingValues {
        value: Chain::of_policy(mdp, policy).cost_to_goal(&cost, goal),
        goal,
    }
}

/// Exact SSP cost-to-go of `policy` with per-pair costs `cost(s, a)`.
pub fn evaluate_policy_cost<C>(mdp: &TabularMdp, policy: &DeterministicPolicy, goal: usize, cost: C) -> HittingValues
where
    C: Fn(usize, usize) -> f64,
{
    let per_state: Vec<f64> = (0..mdp.num_states()).map(|s| cost(s, policy.action(s))).collect();
    HittingValues {
        value: Chain::of_policy(mdp, policy).cost_to_goal(&per_state, goal),
        goal,
    }
}

/// Membership mask for a list of states.
pub fn mask(num_states: usize, states: &[usize]) -> Vec<bool> {
    let mut m = vec![false; num_states];
    for &s in states {
        m[s] = true;
    }
    m
}

/// Restricted shortest path `V*_{S'}(. -> goal)` and a greedy optimal policy restricted on `S'`.
///
/// `restricted` is a membership mask; pass all-true for the unrestricted optimum.
pub fn optimal_shortest_path(
    mdp: &TabularMdp,
    restricted: &[bool],
    goal: usize,
) -> (HittingValues, DeterministicPolicy) {
    optimal_shortest_path_with_costs(mdp, restricted, goal, |_, _| 1.0)
}

/// Cost-sensitive variant of [`optimal_shortest_path`]; costs must be positive.
pub fn optimal_shortest_path_with_costs<C>(
    mdp: &TabularMdp,
    restricted: &[bool],
    goal: usize,
    cost: C,
) -> (HittingValues, DeterministicPolicy)
where
    C: Fn(usize, usize) -> f64,
{
    let n = mdp.num_states();
    let reset = mdp.reset_action();
    let allowed_actions = |s: usize| -> Vec<usize> {
        if restricted[s] && s != goal {
            (0..mdp.num_actions()).collect()
        } else {
            vec![reset]
        }
    };
    let mut actions: Vec<Vec<usize>> = (0..n).map(allowed_actions).collect();

    // Largest set on which some policy reaches the goal almost surely.
    let mut alive = vec![true; n];
    loop {
        for s in 0..n {
            if s == goal {
                continue;
            }
            actions[s].retain(|&a| mdp.support(s, a).all(|(t, _)| alive[t]));
        }
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        for s in 0..n {
            if s == goal || !alive[s] {
                continue;
            }
            for &a in &actions[s] {
                for (t, _) in mdp.support(s, a) {
                    preds[t].push(s);
                }
            }
        }
        let reach = backward_closure(&preds, std::iter::once(goal));
        let next_alive: Vec<bool> = (0..n).map(|s| alive[s] && reach[s]).collect();
        if next_alive == alive {
            break;
        }
        alive = next_alive;
    }

    let q_value = |s: usize, a: usize, u: &[f64]| -> f64 {
        let mut q = cost(s, a);
        for (t, p) in mdp.support(s, a) {
            if t != goal {
                q += p * u[t];
            }
        }
        q
    };

    let mut u = vec![0.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..ORACLE_MAX_SWEEPS {
        let mut delta: f64 = 0.0;
        for s in 0..n {
            if s == goal || !alive[s] {
                next[s] = 0.0;
                continue;
            }
            let best = actions[s]
                .iter()
                .map(|&a| q_value(s, a, &u))
                .fold(f64::INFINITY, f64::min);
            delta = delta.max((best - u[s]).abs());
            next[s] = best;
        }
        std::mem::swap(&mut u, &mut next);
        if delta <= ORACLE_VI_TOL {
            break;
        }
    }

    // Greedy extraction (lowest action index on ties), then exact policy-iteration polish.
    let greedy = |u: &[f64]| -> DeterministicPolicy {
        let acts = (0..n)
            .map(|s| {
                if s == goal || !alive[s] || actions[s].is_empty() {
                    return if restricted[s] && s != goal { 0 } else { reset };
                }
                let mut best_a = actions[s][0];
                let mut best_q = q_value(s, best_a, u);
                for &a in &actions[s][1..] {
                    let q = q_value(s, a, u);
                    if q < best_q - 1e-12 {
                        best_q = q;
                        best_a = a;
                    }
                }
                best_a
            })
            .collect();
        DeterministicPolicy::new(acts)
    };
    let mut policy = greedy(&u);
    let mut values = evaluate_policy_cost(mdp, &policy, goal, &cost).value;
    for _ in 0..100 {
        let improved = greedy(&values);
        if improved == policy {
            break;
        }
        let improved_values = evaluate_policy_cost(mdp, &improved, goal, &cost).value;
        let better = (0..n).all(|s| improved_values[s] <= values[s] + 1e-12);
        if !better {
            break;
        }
        policy = improved;
        values = improved_values;
    }
    for s in 0..n {
        if !alive[s] {
            values[s] = f64::INFINITY;
        }
    }
    (HittingValues { value: values, goal }, policy)
}

/// Greedy closure of incrementally `L`-controllable states, sorted by index.
pub fn incrementally_controllable_set(mdp: &TabularMdp, l: f64) -> Vec<usize> {
    let n = mdp.num_states();
    let s0 = mdp.initial_state();
    let mut inside = vec![false; n];
    inside[s0] = true;
    loop {
        let added: Vec<usize> = (0..n)
            .filter(|&s| !inside[s])
            .filter(|&s| optimal_shortest_path(mdp, &inside, s).0.at(s0) <= l + 1e-9)
            .collect();
        if added.is_empty() {
            break;
        }
        for s in added {
            inside[s] = true;
        }
    }
    (0..n).filter(|&s| inside[s]).collect()
}

/// Unrestricted `L`-controllable set `{s : V*(s0 -> s) <= L}`.
pub fn controllable_set(mdp: &TabularMdp, l: f64) -> Vec<usize> {
    let all = vec![true; mdp.num_states()];
    let s0 = mdp.initial_state();
    (0..mdp.num_states())
        .filter(|&s| s == s0 || optimal_shortest_path(mdp, &all, s).0.at(s0) <= l + 1e-9)
        .collect()
}

/// Truncated value `E[tau ^ H]`, tail `P(tau > H)` and the value of the policy that resets every `H` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedTail {
    pub truncated_value: f64,
    pub tail: f64,
    pub resetting_value: f64,
}

/// Resetting value `(v_H + q_H) / (1 - q_H)`, infinite when `q_H = 1` up to rounding.
pub fn resetting_value(truncated_value: f64, tail: f64) -> f64 {
    if tail >= 1.0 - 1e-12 {
        f64::INFINITY
    } else {
        (truncated_value + tail) / (1.0 - tail)
    }
}

/// Horizon DP from `s0` for a stationary policy.
pub fn truncated_value_tail(mdp: &TabularMdp, policy: &DeterministicPolicy, goal: usize, horizon: usize) -> TruncatedTail {
    truncated_value_tail_with(mdp, goal, horizon, |_, s| policy.action(s))
}

/// Horizon DP from `s0` for a non-stationary policy `action(stage, state)`, stages `0..horizon`.
pub fn truncated_value_tail_with<F>(mdp: &TabularMdp, goal: usize, horizon: usize, action: F) -> TruncatedTail
where
    F: Fn(usize, usize) -> usize,
{
    let n = mdp.num_states();
    // time-to-go tables, indexed by remaining steps
    let mut v = vec![0.0; n];
    let mut q: Vec<f64> = (0..n).map(|s| if s == goal { 0.0 } else { 1.0 }).collect();
    for stage in (0..horizon).rev() {
        let mut v_next = vec![0.0; n];
        let mut q_next = vec![0.0; n];
        for s in 0..n {
            if s == goal {
                continue;
            }
            let a = action(stage, s);
            let mut ev = 1.0;
            let mut eq = 0.0;
            for (t, p) in mdp.support(s, a) {
                ev += p * v[t];
                eq += p * q[t];
            }
            v_next[s] = ev;
            q_next[s] = eq;
        }
        v = v_next;
        q = q_next;
    }
    let s0 = mdp.initial_state();
    let (vh, qh) = if s0 == goal { (0.0, 0.0) } else { (v[s0], q[s0].clamp(0.0, 1.0)) };
    TruncatedTail {
        truncated_value: vh,
        tail: qh,
        resetting_value: if s0 == goal { 0.0 } else { resetting_value(vh, qh) },
    }
}

/// `4 (L + 1) ceil(ln(4 (L + 1) / epsilon))`, rounded up.
pub fn effective_horizon(l: f64, epsilon: f64) -> usize {
    let scale = 4.0 * (l + 1.0);
    (scale * (scale / epsilon).ln().ceil()).ceil() as usize
}

/// Monte Carlo estimate of the hitting time of the policy that follows `action(stage, s)` for
/// `horizon` steps and then RESETs, restarting the stage counter. Returns `(mean, standard error)`.
pub fn simulate_resetting_policy<F, R>(
    mdp: &TabularMdp,
    goal: usize,
    horizon: usize,
    episodes: usize,
    rng: &mut R,
    action: F,
) -> (f64, f64)
where
    F: Fn(usize, usize) -> usize,
    R: Rng + ?Sized,
{
    let s0 = mdp.initial_state();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..episodes {
        let mut steps: u64 = 0;
        let mut s = s0;
        let mut stage = 0;
        while s != goal {
            if stage == horizon {
                s = mdp.sample_transition(s, mdp.reset_action(), rng);
                stage = 0;
            } else {
                s = mdp.sample_transition(s, action(stage, s), rng);
                stage += 1;
            }
            steps += 1;
        }
        let x = steps as f64;
        sum += x;
        sum_sq += x * x;
    }
    let n = episodes as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}
