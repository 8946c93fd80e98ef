//! Visit counters, confidence bonuses and the optimistic restricted SSP instance.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::mdp::DeterministicPolicy;
use crate::ssp::{vi_ssp, SspAction, SspProblem};

/// Visit counters `N(s,a)` and `N(s,a,s')`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsTable {
    num_states: usize,
    num_actions: usize,
    n_sa: Vec<u64>,
    n_sas: Vec<u64>,
    total_steps: u64,
}

impl CountsTable {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            n_sa: vec![0; num_states * num_actions],
            n_sas: vec![0; num_states * num_actions * num_states],
            total_steps: 0,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn record_transition(&mut self, s: usize, a: usize, next: usize) {
        self.add(s, a, next, 1);
    }

    /// Adds `n` observations of `(s, a, next)` at once.
    pub fn add(&mut self, s: usize, a: usize, next: usize, n: u64) {
        let sa = s * self.num_actions + a;
        self.n_sa[sa] += n;
        self.n_sas[sa * self.num_states + next] += n;
        self.total_steps += n;
    }

    #[inline]
    pub fn n(&self, s: usize, a: usize) -> u64 {
        self.n_sa[s * self.num_actions + a]
    }

    #[inline]
    pub fn n_next(&self, s: usize, a: usize, next: usize) -> u64 {
        self.n_sas[(s * self.num_actions + a) * self.num_states + next]
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    /// Empirical `p̂(next|s,a)`, zero when unvisited.
    #[inline]
    pub fn p_hat(&self, s: usize, a: usize, next: usize) -> f64 {
        let n = self.n(s, a);
        if n == 0 {
            0.0
        } else {
            self.n_next(s, a, next) as f64 / n as f64
        }
    }

    /// Observed successors of `(s, a)` with their counts.
    pub fn successors(&self, s: usize, a: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        let start = (s * self.num_actions + a) * self.num_states;
        self.n_sas[start..start + self.num_states]
            .iter()
            .enumerate()
            .filter(|(_, n)| **n > 0)
            .map(|(t, n)| (t, *n))
    }

    /// Text form: header `counts <S> <A>`, then `c <s> <a> <s'> <n>` per nonzero counter.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "counts {} {}", self.num_states, self.num_actions)?;
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                for (t, n) in self.successors(s, a) {
                    writeln!(out, "c {s} {a} {t} {n}")?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut table: Option<CountsTable> = None;
        for (i, line) in input.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                msg: e.to_string(),
            })?;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            let parse = |tok: &str| -> Result<usize> {
                tok.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("expected a non-negative integer, got {tok:?}"),
                })
            };
            match (fields[0], &mut table) {
                ("counts", None) if fields.len() == 3 => {
                    table = Some(CountsTable::new(parse(fields[1])?, parse(fields[2])?));
                }
                ("c", Some(t)) if fields.len() == 5 => {
                    let (s, a, next) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
                    let n = parse(fields[4])? as u64;
                    if s >= t.num_states || next >= t.num_states || a >= t.num_actions {
                        return Err(Error::Parse {
                            line: line_no,
                            msg: format!("index out of range in ({s}, {a}, {next})"),
                        });
                    }
                    t.add(s, a, next, n);
                }
                _ => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("unexpected line {content:?}"),
                    })
                }
            }
        }
        table.ok_or(Error::Parse {
            line: 0,
            msg: "missing `counts` header".into(),
        })
    }
}

/// Confidence width used to shave optimistic transition mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bonus {
    /// Empirical Bernstein width with confidence `delta` over an `S x A` space.
    Bernstein { delta: f64, num_states: usize, num_actions: usize },
    /// `sqrt(p̂(1-p̂)/(N v 1)) + 1/(N v 1)`.
    Practical,
    /// No shaving; the empirical model itself.
    None,
}

impl Bonus {
    pub fn width(&self, p_hat: f64, n: u64) -> f64 {
        match *self {
            Bonus::Bernstein {
                delta,
                num_states,
                num_actions,
            } => bernstein_bonus(p_hat, n, delta, num_states, num_actions),
            Bonus::Practical => {
                let n = n.max(1) as f64;
                (p_hat * (1.0 - p_hat) / n).sqrt() + 1.0 / n
            }
            Bonus::None => 0.0,
        }
    }
}

/// `2 sqrt(p̂(1-p̂)/N⁺ log(2SAN⁺/δ)) + 6 log(2SAN⁺/δ)/N⁺` with `N⁺ = max(1, N)`.
pub fn bernstein_bonus(p_hat: f64, n: u64, delta: f64, num_states: usize, num_actions: usize) -> f64 {
    let n_plus = n.max(1) as f64;
    let log_term = (2.0 * num_states as f64 * num_actions as f64 * n_plus / delta).ln();
    2.0 * (p_hat * (1.0 - p_hat) / n_plus * log_term).sqrt() + 6.0 * log_term / n_plus
}

/// Restricted goal-oriented SSP instance over `K ∪ {x, goal}`.
///
/// Local indices: `0..|K|` follow `states`, `|K|` is the meta-state `x`, `|K| + 1` the goal.
#[derive(Debug, Clone)]
pub struct RestrictedSspInstance {
    pub problem: SspProblem,
    pub states: Vec<usize>,
    pub goal: usize,
}

impl RestrictedSspInstance {
    pub fn meta_state(&self) -> usize {
        self.states.len()
    }

    pub fn local_goal(&self) -> usize {
        self.states.len() + 1
    }

    /// Optimistic row `p̃(.|s,a)` over local indices, as stored in the problem.
    pub fn row(&self, local_state: usize, action_slot: usize) -> &[(usize, f64)] {
        &self.problem.actions(local_state)[action_slot].next
    }
}

/// Optimistic rows for every `(s, a) ∈ K x A`, indexed `[k][a]` over local targets `0..=|K|+1`.
pub fn optimistic_rows(counts: &CountsTable, k: &[usize], goal: usize, bonus: Bonus) -> Vec<Vec<Vec<f64>>> {
    let nk = k.len();
    let x = nk;
    let g = nk + 1;
    k.iter()
        .map(|&s| {
            (0..counts.num_actions())
                .map(|a| {
                    let n = counts.n(s, a);
                    let mut row = vec![0.0; nk + 2];
                    let mut beta_x = 0.0;
                    let mut accounted = 0.0;
                    for (i, &y) in k.iter().enumerate() {
                        let p = counts.p_hat(s, a, y);
                        let beta = bonus.width(p, n);
                        beta_x += beta;
                        accounted += p;
                        row[i] = (p - beta).max(0.0);
                    }
                    let p_goal = counts.p_hat(s, a, goal);
                    beta_x += bonus.width(p_goal, n);
                    accounted += p_goal;
                    let p_x = if n == 0 { 0.0 } else { (1.0 - accounted).max(0.0) };
                    row[x] = (p_x - beta_x).max(0.0);
                    let shaved: f64 = row[..=x].iter().sum();
                    let to_goal = 1.0 - shaved;
                    if to_goal >= 0.0 {
                        row[g] = to_goal;
                    } else {
                        for v in &mut row[..=x] {
                            *v /= shaved;
                        }
                    }
                    row
                })
                .collect()
        })
        .collect()
}

/// Builds the optimistic instance with unit costs; the goal must lie outside `K` and `s0 ∈ K`.
pub fn build_optimistic_instance(
    counts: &CountsTable,
    k: &[usize],
    goal: usize,
    s0: usize,
    reset_action: usize,
    bonus: Bonus,
) -> Result<RestrictedSspInstance> {
    build_optimistic_instance_with_costs(counts, k, goal, s0, reset_action, bonus, |_, _| 1.0)
}

/// As [`build_optimistic_instance`] with costs `cost(s, a)` on `K`; the meta-state is charged `cost(s0, RESET)`.
pub fn build_optimistic_instance_with_costs<C>(
    counts: &CountsTable,
    k: &[usize],
    goal: usize,
    s0: usize,
    reset_action: usize,
    bonus: Bonus,
    cost: C,
) -> Result<RestrictedSspInstance>
where
    C: Fn(usize, usize) -> f64,
{
    if k.contains(&goal) {
        return Err(Error::InvalidParams(format!("goal {goal} lies inside K")));
    }
    let Some(s0_local) = k.iter().position(|&s| s == s0) else {
        return Err(Error::InvalidParams("K must contain s0".into()));
    };
    let rows = optimistic_rows(counts, k, goal, bonus);
    let mut actions: Vec<Vec<SspAction>> = rows
        .into_iter()
        .zip(k)
        .map(|(per_action, &s)| {
            per_action
                .into_iter()
                .enumerate()
                .map(|(a, row)| SspAction {
                    action: a,
                    cost: cost(s, a),
                    next: row.into_iter().enumerate().filter(|(_, p)| *p > 0.0).collect(),
                })
                .collect()
        })
        .collect();
    actions.push(vec![SspAction {
        action: reset_action,
        cost: cost(s0, reset_action),
        next: vec![(s0_local, 1.0)],
    }]);
    let problem = SspProblem::new(actions)?;
    Ok(RestrictedSspInstance {
        problem,
        states: k.to_vec(),
        goal,
    })
}

/// Result of optimistic planning towards one goal.
#[derive(Debug, Clone)]
pub struct OviResult {
    /// `ũ(s0 -> goal)`.
    pub value: f64,
    /// Optimistic values over `K` (in `K` order) followed by the meta-state.
    pub u: Vec<f64>,
    /// Global policy: planned actions on `K`, RESET elsewhere.
    pub policy: DeterministicPolicy,
}

/// Optimistic planning: optimistic instance followed by [`vi_ssp`] at accuracy `gamma`.
pub fn ovi_ssp(
    counts: &CountsTable,
    k: &[usize],
    goal: usize,
    s0: usize,
    reset_action: usize,
    bonus: Bonus,
    gamma: f64,
) -> Result<OviResult> {
    ovi_ssp_with_costs(counts, k, goal, s0, reset_action, bonus, gamma, |_, _| 1.0)
}

#[allow(clippy::too_many_arguments)]
pub fn ovi_ssp_with_costs<C>(
    counts: &CountsTable,
    k: &[usize],
    goal: usize,
    s0: usize,
    reset_action: usize,
    bonus: Bonus,
    gamma: f64,
    cost: C,
) -> Result<OviResult>
where
    C: Fn(usize, usize) -> f64,
{
    let instance = build_optimistic_instance_with_costs(counts, k, goal, s0, reset_action, bonus, cost)?;
    let sol = vi_ssp(&instance.problem, gamma)?;
    let mut policy = DeterministicPolicy::constant(counts.num_states(), reset_action);
    for (i, &s) in k.iter().enumerate() {
        policy.set(s, sol.action[i]);
    }
    let s0_local = k.iter().position(|&s| s == s0).expect("checked by the builder");
    Ok(OviResult {
        value: sol.values.u[s0_local],
        u: sol.values.u,
        policy,
    })
}
