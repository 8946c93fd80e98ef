use autoexplore_core::env::SimulatedEnv;
use autoexplore_core::envs::make_combination_lock;
use autoexplore_core::optimistic::CountsTable;
use autoexplore_core::oracle::truncated_value_tail_with;
use autoexplore_core::ucb::{evaluate_round, finite_horizon_plan, ucb_run, EpisodeRule, UcbBonus, UcbConfig};
use autoexplore_core::{AlgoParams, GoalPolicy, TabularMdp};

fn two_state_chain() -> TabularMdp {
    TabularMdp::new(2, 2, vec![0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0], 0, 1).unwrap()
}

fn exact_counts(mdp: &TabularMdp) -> CountsTable {
    let mut counts = CountsTable::new(mdp.num_states(), mdp.num_actions());
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            for (t, p) in mdp.support(s, a) {
                counts.add(s, a, t, (p * 1e12).round() as u64);
            }
        }
    }
    counts
}

fn config(l: f64, eps: f64, horizon: usize) -> UcbConfig {
    let params = AlgoParams::practical(l, eps, 0.1).unwrap();
    UcbConfig {
        horizon,
        bonus: UcbBonus::None,
        ..UcbConfig::new(&params)
    }
}

/// Minimal `E[tau ^ H]` from `s0` when only states in `k` may choose their action.
fn min_truncated_time(mdp: &TabularMdp, k: &[usize], goal: usize, horizon: usize) -> f64 {
    let n = mdp.num_states();
    let mut v = vec![0.0; n];
    for _ in 0..horizon {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                if s == goal {
                    return 0.0;
                }
                let allowed: Vec<usize> = if k.contains(&s) {
                    (0..mdp.num_actions()).collect()
                } else {
                    vec![mdp.reset_action()]
                };
                allowed
                    .into_iter()
                    .map(|a| 1.0 + mdp.support(s, a).map(|(t, p)| p * v[t]).sum::<f64>())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        v = next;
    }
    v[mdp.initial_state()]
}

#[test]
fn exact_counts_match_finite_horizon_dp() {
    let mdp = make_combination_lock(6).unwrap();
    let counts = exact_counts(&mdp);
    for (k, goal) in [(vec![3], 4), (vec![3, 4], 5), (vec![3, 4, 5], 2), (vec![2, 3, 4, 5], 1)] {
        for horizon in [1, 3, 8] {
            let cfg = config(3.0, 0.5, horizon);
            let plan = finite_horizon_plan(&counts, &k, goal, 3, 2, &cfg);
            let want = min_truncated_time(&mdp, &k, goal, horizon);
            assert!((plan.truncated_time - want).abs() < 1e-6, "{k:?} -> {goal}, H {horizon}: {} vs {want}", plan.truncated_time);

            let GoalPolicy::Resetting { stages } = &plan.policy else { panic!("finite-horizon policy") };
            let exact = truncated_value_tail_with(&mdp, goal, horizon, |h, s| stages[h][s]);
            assert!((exact.truncated_value - plan.truncated_time).abs() < 1e-6);
            assert!((1.0 - exact.tail - plan.success_probability).abs() < 1e-6);
        }
    }
}

#[test]
fn one_step_goal_with_short_horizon() {
    let mdp = two_state_chain();
    let plan = finite_horizon_plan(&exact_counts(&mdp), &[0], 1, 0, 1, &config(2.0, 0.5, 3));
    assert!((plan.success_probability - 1.0).abs() < 1e-9);
    assert!((plan.truncated_time - 1.0).abs() < 1e-9);
    assert!((plan.optimistic_value - 1.0).abs() < 1e-9);
    assert_eq!(plan.policy.action(0, 0), 0);
}

#[test]
fn evaluation_round_counts_every_step() {
    let mdp = two_state_chain();
    let mut env = SimulatedEnv::new(&mdp, 0);
    let mut counts = CountsTable::new(2, 2);
    let policy = GoalPolicy::Resetting { stages: vec![vec![0, 1]; 3] };
    let mut seen = Vec::new();
    let out = evaluate_round(&mut env, &mut counts, &policy, 1, 10, 3, 2.0, true, u64::MAX, |s| seen.push(s)).unwrap();
    assert!(out.success);
    assert_eq!(out.episodes, 10);
    // ten moves to s1 and nine RESETs in between
    assert_eq!(out.steps, 19);
    assert_eq!(out.estimate, 1.0);
    assert_eq!(counts.n(0, 0), 10);
    assert_eq!(counts.n(1, 1), 9);
    assert_eq!(seen.len(), 19);
}

#[test]
fn evaluation_round_rejects_a_policy_that_never_arrives() {
    let mdp = two_state_chain();
    let mut env = SimulatedEnv::new(&mdp, 0);
    let mut counts = CountsTable::new(2, 2);
    let policy = GoalPolicy::Resetting { stages: vec![vec![1, 1]; 3] };
    let out = evaluate_round(&mut env, &mut counts, &policy, 1, 10, 3, 2.0, true, u64::MAX, |_| {}).unwrap();
    assert!(!out.success);
    assert!(out.episodes < 10);
    assert!(out.estimate.is_infinite());

    let mut env = SimulatedEnv::new(&mdp, 0);
    let out = evaluate_round(&mut env, &mut counts, &policy, 1, 10, 3, 2.0, false, u64::MAX, |_| {}).unwrap();
    assert!(!out.success);
    assert_eq!(out.episodes, 10);
}

#[test]
fn evaluation_round_on_the_lock() {
    let mdp = make_combination_lock(6).unwrap();
    let mut env = SimulatedEnv::new(&mdp, 4);
    let mut counts = CountsTable::new(6, 3);
    let policy = GoalPolicy::Resetting { stages: vec![vec![1; 6]; 5] };
    let out = evaluate_round(&mut env, &mut counts, &policy, 4, 500, 5, 1.5, true, u64::MAX, |_| {}).unwrap();
    assert!(out.success);
    assert_eq!(out.estimate, 1.0);
    assert_eq!(out.steps, 999);
}

#[test]
fn ucb_controls_two_state_chain() {
    let mdp = two_state_chain();
    let params = AlgoParams::practical(2.0, 0.5, 0.1).unwrap();
    let cfg = UcbConfig {
        episodes: EpisodeRule::Fixed(20),
        ..UcbConfig::new(&params)
    };
    let mut env = SimulatedEnv::new(&mdp, 1);
    let res = ucb_run(&mut env, &cfg).unwrap();
    assert_eq!(res.controlled, vec![0, 1]);
    let v = res.hitting_times(&mdp);
    assert!((v[1] - 1.0).abs() < 1e-9, "{v:?}");
}
