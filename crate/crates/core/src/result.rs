//! Output types shared by both exploration algorithms.

use std::fmt;

use crate::mdp::{DeterministicPolicy, TabularMdp};
use crate::optimistic::CountsTable;
use crate::oracle::{evaluate_policy_hitting, truncated_value_tail_with};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopReason {
    /// No candidate state left to examine.
    Stop1,
    /// Remaining candidates look unreachable within the length budget.
    Stop2,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Stop1 => "STOP1",
            StopReason::Stop2 => "STOP2",
        })
    }
}

impl std::str::FromStr for StopReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "STOP1" => Ok(StopReason::Stop1),
            "STOP2" => Ok(StopReason::Stop2),
            other => Err(format!("unknown stop reason {other:?}")),
        }
    }
}

/// A goal-reaching policy returned by an exploration run.
#[derive(Debug, Clone, PartialEq)]
pub enum GoalPolicy {
    Stationary(DeterministicPolicy),
    /// Follows `stages[h][s]` for `h < horizon`, then RESETs and starts over.
    Resetting { stages: Vec<Vec<usize>> },
}

impl GoalPolicy {
    /// Action at `stage` steps since the last restart from `s0`.
    pub fn action(&self, stage: usize, s: usize) -> usize {
        match self {
            GoalPolicy::Stationary(p) => p.action(s),
            GoalPolicy::Resetting { stages } => stages[stage][s],
        }
    }

    /// Exact expected hitting time from `s0`, `f64::INFINITY` if the goal is never reached.
    pub fn hitting_time(&self, mdp: &TabularMdp, goal: usize) -> f64 {
        match self {
            GoalPolicy::Stationary(p) => evaluate_policy_hitting(mdp, p, goal).at(mdp.initial_state()),
            GoalPolicy::Resetting { stages } => {
                truncated_value_tail_with(mdp, goal, stages.len(), |h, s| stages[h][s]).resetting_value
            }
        }
    }
}

/// Round-level bookkeeping appended to the event log.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Round {
        round: usize,
        controlled: usize,
        candidates: usize,
        restricted: usize,
    },
    Transfer { state: usize, value: f64 },
    Failure { state: usize },
    Stop(StopReason),
}

#[derive(Debug, Clone)]
pub struct ExplorationResult {
    /// Controllable states in the order they were added; `controlled[0]` is `s0`.
    pub controlled: Vec<usize>,
    /// Policy for each entry of `controlled`.
    pub policies: Vec<GoalPolicy>,
    pub counts: CountsTable,
    /// Total environment steps (the sample complexity).
    pub total_steps: u64,
    /// `(step, state)` for every state added after `s0`.
    pub transfers: Vec<(u64, usize)>,
    pub stop_reason: StopReason,
    pub events: Vec<(u64, Event)>,
}

impl ExplorationResult {
    /// `(step, |K|)` pairs, starting at `(0, 1)`.
    pub fn discovery_curve(&self) -> Vec<(u64, usize)> {
        std::iter::once((0, 1))
            .chain(self.transfers.iter().enumerate().map(|(i, &(t, _))| (t, i + 2)))
            .collect()
    }

    pub fn policy_for(&self, goal: usize) -> Option<&GoalPolicy> {
        self.controlled
            .iter()
            .position(|&s| s == goal)
            .map(|i| &self.policies[i])
    }

    /// Exact hitting time of each returned policy, aligned with `controlled`.
    pub fn hitting_times(&self, mdp: &TabularMdp) -> Vec<f64> {
        self.controlled
            .iter()
            .zip(&self.policies)
            .map(|(&s, p)| p.hitting_time(mdp, s))
            .collect()
    }
}
