//! Finite reward-free MDPs with a distinguished RESET action.

use rand::Rng;

use crate::error::{Error, Result};

/// Row-sum tolerance enforced on every transition row.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// A finite MDP `<S, A, p, s0>` whose `reset_action` moves every state to `s0`.
///
/// The kernel is stored densely, row-major over `(s, a, s')`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    transition: Vec<f64>,
    initial_state: usize,
    reset_action: usize,
}

impl TabularMdp {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        initial_state: usize,
        reset_action: usize,
    ) -> Result<Self> {
        Self::with_tolerance(
            num_states,
            num_actions,
            transition,
            initial_state,
            reset_action,
            ROW_SUM_TOL,
        )
    }

    /// Same as [`TabularMdp::new`] with a caller-chosen row-sum tolerance.
    pub fn with_tolerance(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        initial_state: usize,
        reset_action: usize,
        tol: f64,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidMdp("need at least one state and one action".into()));
        }
        if transition.len() != num_states * num_actions * num_states {
            return Err(Error::InvalidMdp(format!(
                "kernel has {} entries, expected {}",
                transition.len(),
                num_states * num_actions * num_states
            )));
        }
        if initial_state >= num_states {
            return Err(Error::InvalidMdp(format!("initial state {initial_state} out of range")));
        }
        if reset_action >= num_actions {
            return Err(Error::InvalidMdp(format!("reset action {reset_action} out of range")));
        }
        let mdp = Self {
            num_states,
            num_actions,
            transition,
            initial_state,
            reset_action,
        };
        for s in 0..num_states {
            for a in 0..num_actions {
                let row = mdp.row(s, a);
                if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                    return Err(Error::InvalidMdp(format!(
                        "p(.|{s},{a}) has entry {p} outside [0,1]"
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > tol {
                    return Err(Error::InvalidMdp(format!("p(.|{s},{a}) sums to {sum}")));
                }
            }
            if mdp.prob(s, reset_action, initial_state) != 1.0 {
                return Err(Error::InvalidMdp(format!(
                    "RESET from state {s} does not reach s0 with probability 1"
                )));
            }
        }
        Ok(mdp)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn reset_action(&self) -> usize {
        self.reset_action
    }

    #[inline]
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.transition[start..start + self.num_states]
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.row(s, a)[next]
    }

    /// Draws `s' ~ p(.|s,a)` by inverse CDF over the row in index order.
    pub fn sample_transition<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        sample_row(self.row(s, a), rng)
    }

    /// Nonzero `(s', p)` entries of a row.
    pub fn support(&self, s: usize, a: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row(s, a)
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(i, p)| (i, *p))
    }
}

pub(crate) fn sample_row<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_nonzero = i;
            if u < acc {
                return i;
            }
        }
    }
    // rounding left u above the accumulated mass
    last_nonzero
}

/// A deterministic stationary policy `S -> A`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeterministicPolicy {
    actions: Vec<usize>,
}

impl DeterministicPolicy {
    pub fn new(actions: Vec<usize>) -> Self {
        Self { actions }
    }

    pub fn constant(num_states: usize, action: usize) -> Self {
        Self::new(vec![action; num_states])
    }

    pub fn validate(&self, mdp: &TabularMdp) -> Result<()> {
        if self.actions.len() != mdp.num_states() {
            return Err(Error::InvalidParams(format!(
                "policy covers {} states, MDP has {}",
                self.actions.len(),
                mdp.num_states()
            )));
        }
        if let Some(a) = self.actions.iter().find(|&&a| a >= mdp.num_actions()) {
            return Err(Error::InvalidParams(format!("policy uses invalid action {a}")));
        }
        Ok(())
    }

    #[inline]
    pub fn action(&self, s: usize) -> usize {
        self.actions[s]
    }

    pub fn set(&mut self, s: usize, a: usize) {
        self.actions[s] = a;
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Forces RESET at every state outside `allowed`.
    pub fn restricted_to(&self, allowed: &[bool], reset_action: usize) -> Self {
        let actions = self
            .actions
            .iter()
            .zip(allowed)
            .map(|(&a, &ok)| if ok { a } else { reset_action })
            .collect();
        Self { actions }
    }
}

/// Expected hitting times `v_pi(s -> goal)` for every start state.
/// Improper starts carry `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingValues {
    pub value: Vec<f64>,
    pub goal: usize,
}

impl HittingValues {
    pub fn at(&self, s: usize) -> f64 {
        self.value[s]
    }

    pub fn is_finite_at(&self, s: usize) -> bool {
        self.value[s].is_finite()
    }
}

/// Whether allocations and bonuses follow the analysed constants or the tuned experimental forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Theoretical,
    Practical,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theoretical" => Ok(Mode::Theoretical),
            "practical" => Ok(Mode::Practical),
            other => Err(Error::InvalidParams(format!("unknown mode {other:?}"))),
        }
    }
}

/// Exploration parameters `(L, epsilon, delta)` shared by both algorithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgoParams {
    pub l: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub mode: Mode,
}

impl AlgoParams {
    /// Validates ranges; epsilon above 1 is clamped to 1.
    pub fn new(l: f64, epsilon: f64, delta: f64, mode: Mode) -> Result<Self> {
        if !(l >= 1.0 && l.is_finite()) {
            return Err(Error::InvalidParams(format!("L must be >= 1, got {l}")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParams(format!("epsilon must be > 0, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParams(format!("delta must be in (0,1), got {delta}")));
        }
        Ok(Self {
            l,
            epsilon: epsilon.min(1.0),
            delta,
            mode,
        })
    }

    pub fn practical(l: f64, epsilon: f64, delta: f64) -> Result<Self> {
        Self::new(l, epsilon, delta, Mode::Practical)
    }
}
