//! Exploration-objective checks against exact oracles.

use autoexplore_core::oracle::{controllable_set, incrementally_controllable_set, mask, optimal_shortest_path};
use autoexplore_core::{AlgoParams, TabularMdp};

use crate::experiment::RunRecord;

/// Resolution of the bisection for `L'`.
pub const L_PRIME_RESOLUTION: f64 = 1e-3;

const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AxFlags {
    pub ax_l: bool,
    pub ax_prime: bool,
    pub ax_star: bool,
}

/// Exact reference quantities for one `(mdp, L, eps)` triple.
#[derive(Debug, Clone)]
pub struct AxOracle {
    l: f64,
    epsilon: f64,
    controllable: Vec<usize>,
    incremental: Vec<usize>,
    /// `V*_{S_L→}(s0 -> s)`.
    v_star: Vec<f64>,
    /// `L'(s)` for `s ∈ S_L→`.
    l_prime: Vec<Option<f64>>,
}

impl AxOracle {
    pub fn new(mdp: &TabularMdp, params: &AlgoParams) -> Self {
        let l = params.l;
        let s0 = mdp.initial_state();
        let incremental = incrementally_controllable_set(mdp, l);
        let inside = mask(mdp.num_states(), &incremental);
        let v_star = (0..mdp.num_states())
            .map(|s| optimal_shortest_path(mdp, &inside, s).0.at(s0))
            .collect();
        let mut l_prime = vec![None; mdp.num_states()];
        let lowest = incrementally_controllable_set(mdp, 1.0);
        for &s in &incremental {
            l_prime[s] = Some(if lowest.contains(&s) {
                1.0
            } else {
                bisect_l_prime(mdp, s, 1.0, l)
            });
        }
        Self {
            l,
            epsilon: params.epsilon,
            controllable: controllable_set(mdp, l),
            incremental,
            v_star,
            l_prime,
        }
    }

    /// `S_L`, sorted.
    pub fn controllable_set(&self) -> &[usize] {
        &self.controllable
    }

    /// `S_L→`, sorted.
    pub fn incremental_set(&self) -> &[usize] {
        &self.incremental
    }

    pub fn v_star(&self, s: usize) -> f64 {
        self.v_star[s]
    }

    pub fn l_prime(&self, s: usize) -> Option<f64> {
        self.l_prime[s]
    }

    /// Flags for per-state hitting times (`None` outside `K`).
    pub fn check(&self, hitting: &[Option<f64>]) -> AxFlags {
        let covers = self.incremental.iter().all(|&s| hitting[s].is_some());
        let within_l = hitting
            .iter()
            .flatten()
            .all(|&v| v <= self.l + self.epsilon + SLACK);
        let ax_l = covers && within_l;
        let ax_prime = ax_l
            && self.incremental.iter().all(|&s| {
                let bound = self.l_prime[s].expect("defined on S_L→");
                hitting[s].is_some_and(|v| v <= bound + self.epsilon + SLACK)
            });
        let ax_star = covers
            && self
                .incremental
                .iter()
                .all(|&s| hitting[s].is_some_and(|v| v <= self.v_star[s] + self.epsilon + SLACK));
        AxFlags { ax_l, ax_prime, ax_star }
    }
}

/// Smallest `l` in `(lo, hi]` with `s ∈ S_l→`, up to [`L_PRIME_RESOLUTION`]; `s ∈ S_hi→` is assumed.
fn bisect_l_prime(mdp: &TabularMdp, s: usize, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > L_PRIME_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if incrementally_controllable_set(mdp, mid).contains(&s) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Recomputes the AX flags of `record` from its hitting times.
pub fn verify_ax(record: &RunRecord, mdp: &TabularMdp, params: &AlgoParams) -> AxFlags {
    AxOracle::new(mdp, params).check(&record.hitting)
}
