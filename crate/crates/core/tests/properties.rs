use autoexplore_core::oracle::{
    controllable_set, evaluate_policy_hitting, incrementally_controllable_set, optimal_shortest_path,
};
use autoexplore_core::ssp::{evaluate_choice, optimal_values, vi_ssp, SspAction, SspProblem};
use autoexplore_core::{DeterministicPolicy, TabularMdp};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random sparse row over `n` targets; weights are normalised so the row is a distribution.
fn random_row(rng: &mut ChaCha8Rng, n: usize, support: usize) -> Vec<f64> {
    let mut row = vec![0.0; n];
    for _ in 0..support.max(1) {
        row[rng.gen_range(0..n)] += rng.gen_range(0.05..1.0);
    }
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= total);
    let drift: f64 = 1.0 - row.iter().sum::<f64>();
    let top = (0..n).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
    row[top] += drift;
    row
}

/// Random MDP with `actions` ordinary actions plus a trailing RESET to state 0.
fn random_mdp(seed: u64, states: usize, actions: usize) -> TabularMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a_total = actions + 1;
    let mut t = vec![0.0; states * a_total * states];
    for s in 0..states {
        for a in 0..actions {
            let support = rng.gen_range(1..=3);
            let row = random_row(&mut rng, states, support);
            t[(s * a_total + a) * states..(s * a_total + a + 1) * states].copy_from_slice(&row);
        }
        t[(s * a_total + actions) * states] = 1.0;
    }
    TabularMdp::new(states, a_total, t, 0, actions).unwrap()
}

fn random_policy(seed: u64, mdp: &TabularMdp) -> DeterministicPolicy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
    DeterministicPolicy::new((0..mdp.num_states()).map(|_| rng.gen_range(0..mdp.num_actions())).collect())
}

/// Random SSP; each action reaches the goal directly with probability `goal_chance`.
fn random_ssp(seed: u64, goal_chance: f64) -> Option<SspProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=6);
    let c_min = rng.gen_range(0.1..1.0);
    let actions = (0..n)
        .map(|_| {
            (0..rng.gen_range(1..=3))
                .map(|a| {
                    let support = rng.gen_range(1..=3);
                    let mut row = random_row(&mut rng, n + 1, support);
                    if rng.gen_bool(goal_chance) && row[n] == 0.0 {
                        let w = rng.gen_range(0.1..0.6);
                        row.iter_mut().for_each(|p| *p *= 1.0 - w);
                        row[n] = 1.0 - row[..n].iter().sum::<f64>();
                    }
                    SspAction {
                        action: a,
                        cost: rng.gen_range(c_min..=1.0),
                        next: row.into_iter().enumerate().filter(|(_, p)| *p > 0.0).collect(),
                    }
                })
                .collect()
        })
        .collect();
    SspProblem::new(actions).ok()
}

fn subset_mask(seed: u64, n: usize, s0: usize) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|s| s == s0 || rng.gen_bool(0.5)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hitting_times_satisfy_bellman(seed in any::<u64>(), states in 2usize..7, actions in 1usize..3) {
        let mdp = random_mdp(seed, states, actions);
        let pi = random_policy(seed, &mdp);
        let goal = (seed as usize) % states;
        let v = evaluate_policy_hitting(&mdp, &pi, goal);
        prop_assert_eq!(v.at(goal), 0.0);
        for s in 0..states {
            if s == goal || !v.is_finite_at(s) {
                continue;
            }
            prop_assert!(v.at(s) >= 0.0);
            let rhs = 1.0 + mdp.support(s, pi.action(s))
                .filter(|&(t, _)| t != goal)
                .map(|(t, p)| p * v.at(t))
                .sum::<f64>();
            prop_assert!((v.at(s) - rhs).abs() < 1e-8 * v.at(s).max(1.0), "s{}: {} vs {}", s, v.at(s), rhs);
        }
    }

    #[test]
    fn restricted_values_shrink_with_larger_sets(seed in any::<u64>(), states in 2usize..7, actions in 1usize..3) {
        let mdp = random_mdp(seed, states, actions);
        let small = subset_mask(seed, states, 0);
        let mut large = small.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for m in large.iter_mut() {
            *m |= rng.gen_bool(0.5);
        }
        for goal in 0..states {
            let (vx, _) = optimal_shortest_path(&mdp, &small, goal);
            let (vy, _) = optimal_shortest_path(&mdp, &large, goal);
            for s in 0..states {
                prop_assert!(vx.at(s) >= vy.at(s) - 1e-8, "goal {} state {}: {} < {}", goal, s, vx.at(s), vy.at(s));
            }
        }
    }

    #[test]
    fn incremental_set_grows_with_l(seed in any::<u64>(), states in 2usize..7, l in 1.0f64..6.0, extra in 0.0f64..4.0) {
        let mdp = random_mdp(seed, states, 2);
        let small = incrementally_controllable_set(&mdp, l);
        let large = incrementally_controllable_set(&mdp, l + extra);
        prop_assert!(small.iter().all(|s| large.contains(s)));
    }

    #[test]
    fn incremental_set_is_controllable(seed in any::<u64>(), states in 2usize..7, l in 1.0f64..6.0) {
        let mdp = random_mdp(seed, states, 2);
        let inc = incrementally_controllable_set(&mdp, l);
        let all = controllable_set(&mdp, l);
        prop_assert!(inc.iter().all(|s| all.contains(s)), "{:?} not within {:?}", inc, all);
    }

    #[test]
    fn value_iteration_sandwich(seed in any::<u64>()) {
        let problem = random_ssp(seed, 0.7);
        prop_assume!(problem.is_some());
        let problem = problem.unwrap();
        let c_min = problem.c_min();
        let gamma = c_min / 2.0 * ChaCha8Rng::seed_from_u64(seed).gen_range(0.01..1.0);
        let sol = vi_ssp(&problem, gamma).unwrap();
        let v_star = optimal_values(&problem).unwrap();
        let v_pi = evaluate_choice(&problem, &sol.choice);
        for s in 0..problem.num_non_goal() {
            let u = sol.values.u[s];
            prop_assert!(u <= v_star[s] + 1e-8, "u {} above V* {}", u, v_star[s]);
            prop_assert!(v_star[s] <= v_pi[s] + 1e-8, "V* {} above V_pi {}", v_star[s], v_pi[s]);
            prop_assert!(v_pi[s] <= (1.0 + 2.0 * gamma / c_min) * u + 1e-8, "V_pi {} vs u {}", v_pi[s], u);
        }
    }

    // the bound needs eta ||V'|| <= c_min / 2; at 2 c_min a one-state chain already breaks it
    #[test]
    fn simulation_bound_between_close_models(seed in any::<u64>()) {
        let problem = random_ssp(seed, 1.0);
        prop_assume!(problem.is_some());
        let p = problem.unwrap();
        let n = p.num_non_goal();
        let c_min = p.c_min();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
        let choice: Vec<usize> = (0..n).map(|s| rng.gen_range(0..p.actions(s).len())).collect();

        // p' = (1 - t) p + t r with a random distribution r per pair
        let mix: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|s| (0..p.actions(s).len()).map(|_| random_row(&mut rng, n + 1, 3)).collect())
            .collect();
        let perturbed = |t: f64| -> SspProblem {
            let actions = (0..n).map(|s| {
                p.actions(s).iter().zip(&mix[s]).map(|(act, r)| {
                    let mut row: Vec<f64> = r.iter().map(|q| t * q).collect();
                    for &(y, q) in &act.next {
                        row[y] += (1.0 - t) * q;
                    }
                    let inside: f64 = row[..n].iter().sum();
                    row[n] = 1.0 - inside;
                    let next = row.into_iter().enumerate().filter(|e| e.1 > 0.0).collect();
                    SspAction { next, ..act.clone() }
                }).collect()
            }).collect();
            SspProblem::new(actions).expect("mixture of distributions")
        };

        let mut t = 0.5;
        let found = loop {
            let q = perturbed(t);
            let v_q = evaluate_choice(&q, &choice);
            let mass = |row: &[(usize, f64)], y: usize| row.iter().find(|e| e.0 == y).map_or(0.0, |e| e.1);
            let eta = (0..n)
                .flat_map(|s| (0..p.actions(s).len()).map(move |i| (s, i)))
                .map(|(s, i)| {
                    let (a, b) = (&p.actions(s)[i].next, &q.actions(s)[i].next);
                    (0..n).map(|y| (mass(a, y) - mass(b, y)).abs()).sum::<f64>()
                })
                .fold(0.0, f64::max);
            let norm = v_q.iter().copied().fold(0.0, f64::max);
            if norm.is_finite() && eta * norm <= c_min / 2.0 {
                break Some((q, v_q, eta, norm));
            }
            t /= 2.0;
            if t < 1e-9 {
                break None;
            }
        };
        prop_assume!(found.is_some());
        let (_, v_prime, eta, norm) = found.unwrap();
        let v = evaluate_choice(&p, &choice);
        for s in 0..n {
            prop_assert!(v[s].is_finite());
            prop_assert!(v[s] <= (1.0 + 2.0 * eta * norm / c_min) * v_prime[s] + 1e-9, "s{}: {} vs {}", s, v[s], v_prime[s]);
            prop_assert!(v_prime[s] <= (1.0 + eta * norm / c_min) * v[s] + 1e-9);
        }
    }
}

#[test]
fn simulation_bound_needs_the_tighter_condition() {
    let coin = |stay: f64| {
        SspProblem::new(vec![vec![SspAction {
            action: 0,
            cost: 1.0,
            next: vec![(0, stay), (1, 1.0 - stay)],
        }]])
        .unwrap()
    };
    let v = evaluate_choice(&coin(0.7), &[0])[0];
    let v_prime = evaluate_choice(&coin(0.3), &[0])[0];
    let eta: f64 = 0.4;
    assert!(eta * v_prime <= 2.0);
    assert!(eta * v_prime > 0.5);
    assert!(v > (1.0 + 2.0 * eta * v_prime) * v_prime);
}
