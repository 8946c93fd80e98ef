use autoexplore_core::disco::{
    collect_samples, disco_run, theoretical_allocation, theoretical_gamma, zero_shot_plan, DiscoConfig, DiscoState,
    Navigation, ThetaMode, DEFAULT_STEP_CAP,
};
use autoexplore_core::env::{Environment, SimulatedEnv};
use autoexplore_core::envs::{default_confusing_chain, make_combination_lock};
use autoexplore_core::oracle::{
    evaluate_policy_cost, evaluate_policy_hitting, incrementally_controllable_set, mask, optimal_shortest_path_with_costs,
};
use autoexplore_core::result::Event;
use autoexplore_core::{AlgoParams, Error, GoalPolicy, StopReason, TabularMdp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn two_state_chain() -> TabularMdp {
    TabularMdp::new(2, 2, vec![0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0], 0, 1).unwrap()
}

#[test]
fn collection_meets_targets_exactly_at_s0() {
    let mdp = make_combination_lock(6).unwrap();
    let mut env = SimulatedEnv::new(&mdp, 5);
    let mut state = DiscoState::new(6, 3, 3, 2);
    collect_samples(&mut state, &mut env, &[vec![2, 3, 1]], Navigation::Sequential, DEFAULT_STEP_CAP).unwrap();
    assert_eq!([0, 1, 2].map(|a| state.counts.n(3, a)), [2, 3, 1]);
    // leaving s3 costs a RESET from wherever we landed
    let elsewhere: u64 = (0..6).filter(|&s| s != 3).map(|s| state.counts.n(s, 2)).sum();
    assert_eq!(env.steps(), 6 + elsewhere);
    assert!(state.candidates.states().contains(&4));
}

#[test]
fn two_state_chain_is_fully_controlled() {
    let mdp = two_state_chain();
    let params = AlgoParams::practical(2.0, 0.5, 0.1).unwrap();
    let mut env = SimulatedEnv::new(&mdp, 0);
    let res = disco_run(&mut env, &DiscoConfig::new(params)).unwrap();
    assert_eq!(res.controlled, vec![0, 1]);
    assert_eq!(res.stop_reason, StopReason::Stop1);
    let v = res.hitting_times(&mdp);
    assert_eq!(v, vec![0.0, 1.0]);
}

#[test]
fn theoretical_allocation_closed_form() {
    let (l, eps, delta) = (3.0_f64, 0.5_f64, 0.1_f64);
    let gamma = 2.0 * eps / (12.0 * (l + 1.0 + eps) * (l + eps / 3.0));
    assert!((theoretical_gamma(l, eps) - gamma).abs() < 1e-15);
    let (s, a, sd, x) = (12.0_f64, 3.0_f64, 5.0_f64, 1.3_f64);
    let log_v = (8.0 * std::f64::consts::E * x * (2.0 * s * a).sqrt() / (delta.sqrt() * gamma)).ln();
    let want = 57.0 * x * x / (gamma * gamma) * log_v * log_v + 24.0 * sd / gamma * (24.0 * sd * s * a / (delta * gamma)).ln();
    assert_eq!(theoretical_allocation(x, gamma, delta, 12, 3, 5), want.ceil());
}

#[test]
fn restricted_set_size_is_bounded() {
    let mdp = default_confusing_chain();
    let params = AlgoParams::practical(4.5, 0.4, 0.1).unwrap();
    for seed in 0..10 {
        let mut env = SimulatedEnv::new(&mdp, seed);
        let res = disco_run(&mut env, &DiscoConfig::new(params)).unwrap();
        let bound = 2.0 * params.l * mdp.num_actions() as f64;
        let mut rounds = 0;
        for (_, e) in &res.events {
            if let Event::Round { controlled, restricted, .. } = e {
                rounds += 1;
                assert!(*restricted as f64 <= bound * *controlled as f64);
            }
        }
        assert!(rounds >= res.controlled.len());
    }
}

#[test]
fn controlled_set_is_sandwiched() {
    let mdp = default_confusing_chain();
    let params = AlgoParams::practical(4.5, 0.4, 0.1).unwrap();
    let inner = incrementally_controllable_set(&mdp, params.l);
    let outer = incrementally_controllable_set(&mdp, params.l + params.epsilon);
    let runs = 20;
    let mut good = 0;
    for seed in 0..runs {
        let mut env = SimulatedEnv::new(&mdp, 100 + seed);
        let res = disco_run(&mut env, &DiscoConfig::new(params)).unwrap();
        let covers = inner.iter().all(|s| res.controlled.contains(s));
        let within = res.controlled.iter().all(|s| outer.contains(s));
        good += usize::from(covers && within);
    }
    assert!(good * 10 >= runs as usize * 9, "{good}/{runs}");
}

fn lock_run() -> (TabularMdp, AlgoParams, autoexplore_core::ExplorationResult) {
    let mdp = make_combination_lock(6).unwrap();
    let params = AlgoParams::practical(2.7, 0.1, 0.1).unwrap();
    let config = DiscoConfig::new(params).with_theta(ThetaMode::Max);
    let mut env = SimulatedEnv::new(&mdp, 2);
    let res = disco_run(&mut env, &config).unwrap();
    (mdp, params, res)
}

#[test]
fn zero_shot_planning_on_the_lock() {
    let (mdp, params, res) = lock_run();
    let gamma = params.epsilon / (6.0 * params.l);
    let (s0, reset) = (mdp.initial_state(), mdp.reset_action());
    let inside = mask(6, &res.controlled);

    // unit costs reproduce the returned policies
    for (&goal, policy) in res.controlled.iter().zip(&res.policies) {
        let GoalPolicy::Stationary(returned) = policy else { panic!("DisCo returns stationary policies") };
        let planned = zero_shot_plan(&res, goal, &params, s0, reset, gamma, |_, _| 1.0).unwrap();
        let a = evaluate_policy_hitting(&mdp, returned, goal).at(s0);
        let b = evaluate_policy_hitting(&mdp, &planned, goal).at(s0);
        assert!((a - b).abs() <= 2.0 * gamma, "goal s{goal}: {a} vs {b}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let random: Vec<f64> = (0..18).map(|_| rng.gen_range(0.5..=1.0)).collect();
    let half = |_: usize, _: usize| 0.5;
    let drawn = |s: usize, a: usize| random[s * 3 + a];
    for (name, cost) in [("half", &half as &dyn Fn(usize, usize) -> f64), ("random", &drawn)] {
        // outside K only RESET is allowed, charged like RESET at s0
        let charged = |s: usize, a: usize| if inside[s] { cost(s, a) } else { cost(s0, reset) };
        for &goal in &res.controlled {
            let planned = zero_shot_plan(&res, goal, &params, s0, reset, gamma, cost).unwrap();
            let got = evaluate_policy_cost(&mdp, &planned.restricted_to(&inside, reset), goal, charged).at(s0);
            let (best, _) = optimal_shortest_path_with_costs(&mdp, &inside, goal, charged);
            assert!(got <= best.at(s0) + 0.2, "{name} goal s{goal}: {got} vs {}", best.at(s0));
        }
    }

    let err = zero_shot_plan(&res, res.controlled[1], &params, s0, reset, gamma, |_, _| 0.0).unwrap_err();
    assert!(matches!(err, Error::InvalidCost(_)));
}

#[test]
fn zero_shot_rejects_uncontrolled_goal() {
    // s1 is five steps away on average
    let mdp = TabularMdp::new(2, 2, vec![0.8, 0.2, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0], 0, 1).unwrap();
    let params = AlgoParams::practical(1.0, 0.1, 0.1).unwrap();
    let mut env = SimulatedEnv::new(&mdp, 0);
    let res = disco_run(&mut env, &DiscoConfig::new(params)).unwrap();
    assert_eq!(res.controlled, vec![0]);
    let err = zero_shot_plan(&res, 1, &params, 0, 1, 0.01, |_, _| 1.0).unwrap_err();
    assert!(matches!(err, Error::GoalNotControlled(1)));
}
