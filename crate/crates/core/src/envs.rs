//! Benchmark MDP generators. RESET is always the last action index.

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

struct Builder {
    s: usize,
    a: usize,
    t: Vec<f64>,
}

impl Builder {
    fn new(s: usize, a: usize) -> Self {
        Self {
            s,
            a,
            t: vec![0.0; s * a * s],
        }
    }

    fn add(&mut self, s: usize, a: usize, next: usize, p: f64) {
        self.t[(s * self.a + a) * self.s + next] += p;
    }

    fn finish(mut self, s0: usize) -> Result<TabularMdp> {
        let reset = self.a - 1;
        for s in 0..self.s {
            self.add(s, reset, s0, 1.0);
        }
        TabularMdp::new(self.s, self.a, self.t, s0, reset)
    }
}

/// Chain `s0..sC` with `Kc` confusing states `sC+1..sC+Kc`; actions `a0` (forward), `a1` (skip), RESET.
pub fn make_confusing_chain(c: usize, kc: usize, m: usize, p_skip: f64, p_c: f64) -> Result<TabularMdp> {
    if c == 0 || kc == 0 || m == 0 {
        return Err(Error::InvalidParams("C, Kc and m must be positive".into()));
    }
    if !(0.0..=1.0).contains(&p_skip) || !(0.0..=1.0).contains(&p_c) {
        return Err(Error::InvalidParams("p_skip and p_c must lie in [0, 1]".into()));
    }
    let n = 1 + c + kc;
    let mut b = Builder::new(n, 3);
    b.add(0, 0, 1, p_c);
    b.add(0, 0, 0, 1.0 - p_c);
    for i in 0..kc {
        b.add(0, 1, c + 1 + i, 1.0 / kc as f64);
    }
    for i in 1..c {
        b.add(i, 0, i + 1, p_c);
        b.add(i, 0, i, 1.0 - p_c);
        b.add(i, 1, (i + m).min(c), p_skip);
        b.add(i, 1, i, 1.0 - p_skip);
    }
    for a in 0..2 {
        b.add(c, a, 0, 1.0);
        for i in 0..kc {
            b.add(c + 1 + i, a, c, 1.0);
        }
    }
    b.finish(0)
}

/// Default benchmark: `C = 5`, `Kc = 6`, `m = 4`, `p_skip = 1/3`, `p_c = 1`.
pub fn default_confusing_chain() -> TabularMdp {
    make_confusing_chain(5, 6, 4, 1.0 / 3.0, 1.0).expect("valid defaults")
}

/// Combination lock with `n` states; `a1` moves right, `a0` jumps left with weights `1/(k-l)`.
/// Starts (and RESETs) at state `floor(2n/3) - 1`.
pub fn make_combination_lock(n: usize) -> Result<TabularMdp> {
    if n < 2 {
        return Err(Error::InvalidParams(format!("combination lock needs N >= 2, got {n}")));
    }
    let mut b = Builder::new(n, 3);
    b.add(0, 0, 0, 1.0);
    for k in 1..n {
        let total: f64 = (0..k).map(|l| 1.0 / (k - l) as f64).sum();
        for l in 0..k {
            b.add(k, 0, l, 1.0 / (k - l) as f64 / total);
        }
    }
    for k in 0..n {
        b.add(k, 1, (k + 1).min(n - 1), 1.0);
    }
    b.finish((2 * n / 3).saturating_sub(1))
}

/// `s0`, three first-layer states, three second-layer states and a final state; actions `a`, RESET.
pub fn make_layered_star() -> TabularMdp {
    let mut b = Builder::new(8, 2);
    for i in 1..=3 {
        b.add(0, 0, i, 1.0 / 3.0);
        b.add(i, 0, i + 3, 1.0);
        b.add(i + 3, 0, 7, 1.0);
    }
    b.add(7, 0, 7, 1.0);
    b.finish(0).expect("valid construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusing_chain_defaults() {
        let m = default_confusing_chain();
        assert_eq!((m.num_states(), m.num_actions()), (12, 3));
        assert_eq!(m.prob(0, 0, 1), 1.0);
        assert!((m.prob(0, 1, 6) - 1.0 / 6.0).abs() < 1e-15);
        assert!((m.prob(1, 1, 5) - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.prob(1, 1, 1) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn combination_lock_rows() {
        let m = make_combination_lock(6).unwrap();
        assert_eq!(m.initial_state(), 3);
        assert!((m.prob(3, 0, 2) - 6.0 / 11.0).abs() < 1e-15);
        assert_eq!(m.prob(3, 1, 4), 1.0);
        assert_eq!(m.prob(0, 0, 0), 1.0);
        assert_eq!(m.prob(5, 1, 5), 1.0);
        assert!(make_combination_lock(1).is_err());
    }

    #[test]
    fn layered_star_first_layer_uniform() {
        let m = make_layered_star();
        for i in 1..=3 {
            assert!((m.prob(0, 0, i) - 1.0 / 3.0).abs() < 1e-15);
        }
    }
}
