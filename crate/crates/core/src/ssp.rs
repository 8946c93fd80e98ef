//! Value iteration for known stochastic-shortest-path instances with positive costs.

use crate::error::{Error, Result};

/// Sweep cap after which [`vi_ssp`] reports non-convergence.
pub const VI_MAX_SWEEPS: usize = 10_000_000;

/// One action available at a non-goal state.
#[derive(Debug, Clone, PartialEq)]
pub struct SspAction {
    /// Action label (usually the MDP action index); ties are broken toward the first listed.
    pub action: usize,
    pub cost: f64,
    /// Sparse successor distribution over local indices `0..=num_non_goal`, where `num_non_goal` is the goal.
    pub next: Vec<(usize, f64)>,
}

/// SSP instance over local non-goal states `0..n` and a goal at local index `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SspProblem {
    actions: Vec<Vec<SspAction>>,
    c_min: f64,
}

impl SspProblem {
    /// Validates rows, costs in `(0, 1]`, and existence of a proper policy from every state.
    pub fn new(actions: Vec<Vec<SspAction>>) -> Result<Self> {
        let n = actions.len();
        let mut c_min = f64::INFINITY;
        for (s, acts) in actions.iter().enumerate() {
            if acts.is_empty() {
                return Err(Error::InvalidProblem(format!("state {s} has no action")));
            }
            for act in acts {
                if !(act.cost > 0.0 && act.cost <= 1.0) {
                    return Err(Error::InvalidProblem(format!(
                        "cost {} at state {s}, action {} outside (0, 1]",
                        act.cost, act.action
                    )));
                }
                c_min = c_min.min(act.cost);
                let mut sum = 0.0;
                for &(t, p) in &act.next {
                    if t > n || !(0.0..=1.0).contains(&p) {
                        return Err(Error::InvalidProblem(format!(
                            "bad successor ({t}, {p}) at state {s}, action {}",
                            act.action
                        )));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidProblem(format!(
                        "row of state {s}, action {} sums to {sum}",
                        act.action
                    )));
                }
            }
        }
        let problem = Self { actions, c_min };
        if let Some(s) = problem.proper_mask().iter().position(|ok| !ok) {
            return Err(Error::InvalidProblem(format!("no proper policy from state {s}")));
        }
        Ok(problem)
    }

    pub fn num_non_goal(&self) -> usize {
        self.actions.len()
    }

    pub fn goal(&self) -> usize {
        self.actions.len()
    }

    pub fn actions(&self, s: usize) -> &[SspAction] {
        &self.actions[s]
    }

    pub fn c_min(&self) -> f64 {
        self.c_min
    }

    /// States from which some policy reaches the goal almost surely.
    fn proper_mask(&self) -> Vec<bool> {
        let n = self.actions.len();
        let mut alive = vec![true; n + 1];
        loop {
            let usable = |act: &SspAction, alive: &[bool]| act.next.iter().all(|&(t, p)| p == 0.0 || alive[t]);
            // least fixpoint of "has a usable action with some successor already reaching the goal"
            let mut reach = vec![false; n + 1];
            reach[n] = true;
            let mut changed = true;
            while changed {
                changed = false;
                for s in 0..n {
                    if reach[s] || !alive[s] {
                        continue;
                    }
                    let ok = self.actions[s]
                        .iter()
                        .any(|act| usable(act, &alive) && act.next.iter().any(|&(t, p)| p > 0.0 && reach[t]));
                    if ok {
                        reach[s] = true;
                        changed = true;
                    }
                }
            }
            if reach == alive {
                return alive[..n].to_vec();
            }
            alive = reach;
        }
    }

    fn q_value(&self, act: &SspAction, u: &[f64]) -> f64 {
        let goal = self.goal();
        let mut q = act.cost;
        for &(t, p) in &act.next {
            if t != goal {
                q += p * u[t];
            }
        }
        q
    }

    /// Greedy choice (index into `actions(s)`) w.r.t. `u`, lowest listed action on ties.
    pub fn greedy(&self, u: &[f64]) -> Vec<usize> {
        (0..self.num_non_goal())
            .map(|s| {
                let mut best = 0;
                let mut best_q = f64::INFINITY;
                for (i, act) in self.actions[s].iter().enumerate() {
                    let q = self.q_value(act, u);
                    if q < best_q {
                        best_q = q;
                        best = i;
                    }
                }
                best
            })
            .collect()
    }

    /// One Bellman backup `L u`.
    pub fn bellman(&self, u: &[f64], out: &mut [f64]) {
        for s in 0..self.num_non_goal() {
            out[s] = self.actions[s]
                .iter()
                .map(|act| self.q_value(act, u))
                .fold(f64::INFINITY, f64::min);
        }
    }
}

/// Value vector over the non-goal states of an [`SspProblem`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValueVector {
    pub u: Vec<f64>,
}

/// Output of [`vi_ssp`]: values, greedy choice indices and their action labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SspSolution {
    pub values: ValueVector,
    pub choice: Vec<usize>,
    pub action: Vec<usize>,
    pub sweeps: usize,
}

/// Jacobi value iteration from `u_0 = 0`, stopping once `||u_{j+1} - u_j||_inf <= gamma`.
///
/// Returns `u_j` and its greedy policy.
pub fn vi_ssp(problem: &SspProblem, gamma: f64) -> Result<SspSolution> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParams(format!("gamma must be > 0, got {gamma}")));
    }
    let n = problem.num_non_goal();
    let mut u = vec![0.0; n];
    let mut next = vec![0.0; n];
    for sweep in 1..=VI_MAX_SWEEPS {
        problem.bellman(&u, &mut next);
        let diff = u
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if diff <= gamma {
            let choice = problem.greedy(&u);
            let action = choice
                .iter()
                .enumerate()
                .map(|(s, &i)| problem.actions(s)[i].action)
                .collect();
            return Ok(SspSolution {
                values: ValueVector { u },
                choice,
                action,
                sweeps: sweep,
            });
        }
        std::mem::swap(&mut u, &mut next);
    }
    Err(Error::NonConvergence { sweeps: VI_MAX_SWEEPS })
}

/// Exact expected cost of the stationary choice `choice` (index per state); infinite where improper.
pub fn evaluate_choice(problem: &SspProblem, choice: &[usize]) -> Vec<f64> {
    let n = problem.num_non_goal();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n + 1);
    let mut cost = vec![0.0; n + 1];
    for s in 0..n {
        let act = &problem.actions(s)[choice[s]];
        cost[s] = act.cost;
        rows.push(act.next.clone());
    }
    rows.push(vec![(n, 1.0)]);
    let mut values = crate::oracle::chain_cost_to_goal(rows, &cost, n);
    values.truncate(n);
    values
}

/// Exact optimal values by tight value iteration followed by policy-iteration polishing.
pub fn optimal_values(problem: &SspProblem) -> Result<Vec<f64>> {
    let sol = vi_ssp(problem, 1e-11)?;
    let mut choice = sol.choice;
    let mut values = evaluate_choice(problem, &choice);
    for _ in 0..100 {
        let improved = problem.greedy(&values);
        if improved == choice {
            break;
        }
        let improved_values = evaluate_choice(problem, &improved);
        if improved_values.iter().zip(&values).any(|(a, b)| *a > b + 1e-12) {
            break;
        }
        choice = improved;
        values = improved_values;
    }
    Ok(values)
}
