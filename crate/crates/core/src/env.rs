//! Sampling interface used by the exploration algorithms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mdp::TabularMdp;

/// A stateful environment the learner interacts with one step at a time.
pub trait Environment {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn initial_state(&self) -> usize;
    fn reset_action(&self) -> usize;
    fn current_state(&self) -> usize;
    /// Executes `a` from the current state and returns the next state.
    fn step(&mut self, a: usize) -> usize;
    /// Environment steps taken so far.
    fn steps(&self) -> u64;
}

/// Simulator backed by a known [`TabularMdp`] and a seeded ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct SimulatedEnv<'a> {
    mdp: &'a TabularMdp,
    rng: ChaCha8Rng,
    state: usize,
    steps: u64,
}

impl<'a> SimulatedEnv<'a> {
    pub fn new(mdp: &'a TabularMdp, seed: u64) -> Self {
        Self {
            mdp,
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: mdp.initial_state(),
            steps: 0,
        }
    }

    pub fn mdp(&self) -> &TabularMdp {
        self.mdp
    }
}

impl Environment for SimulatedEnv<'_> {
    fn num_states(&self) -> usize {
        self.mdp.num_states()
    }

    fn num_actions(&self) -> usize {
        self.mdp.num_actions()
    }

    fn initial_state(&self) -> usize {
        self.mdp.initial_state()
    }

    fn reset_action(&self) -> usize {
        self.mdp.reset_action()
    }

    fn current_state(&self) -> usize {
        self.state
    }

    fn step(&mut self, a: usize) -> usize {
        self.state = self.mdp.sample_transition(self.state, a, &mut self.rng);
        self.steps += 1;
        self.state
    }

    fn steps(&self) -> u64 {
        self.steps
    }
}
