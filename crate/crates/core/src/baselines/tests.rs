use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::envs::Corridor;
use crate::feedback::{build_scenario, FeedbackCase, Intent, Oracle, Silent};

const LEFT: ActionId = ActionId(0);
const RIGHT: ActionId = ActionId(1);

/// Feedback from a fixed function of `(s, a)`.
struct Scripted<F>(F);

impl<F: FnMut(StateId, ActionId) -> Option<f64>> FeedbackSource for Scripted<F> {
    fn feedback(&mut self, s: StateId, a: ActionId) -> Result<Option<f64>, FeedbackError> {
        Ok((self.0)(s, a))
    }
}

/// Q-iteration over `env.step` with reward `r + shaping(s, a)`.
fn q_iteration(
    env: &dyn Environment,
    gamma: f64,
    shaping: impl Fn(StateId, ActionId) -> f64,
) -> Vec<Vec<f64>> {
    let states = env.states();
    let n = env.n_states();
    let mut q = vec![vec![0.0; env.n_actions()]; n];
    for _ in 0..2000 {
        let v: Vec<f64> = q
            .iter()
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        for &s in &states {
            for a in 0..env.n_actions() {
                let out = env.step(s, ActionId(a)).unwrap();
                let boot = if out.terminal {
                    0.0
                } else {
                    gamma * v[out.next.0]
                };
                q[s.0][a] = out.reward + shaping(s, ActionId(a)) + boot;
            }
        }
    }
    q
}

fn argmax(row: &[f64]) -> usize {
    (0..row.len())
        .max_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap())
        .unwrap()
}

fn sample(s: usize, a: ActionId, r: f64, next: usize, terminal: bool) -> TransitionSample {
    TransitionSample {
        s: StateId(s),
        a,
        r,
        s_next: StateId(next),
        terminal,
    }
}

#[test]
fn ac_hf_without_feedback_is_plain_actor_critic() {
    let hyper = HyperParams::default();
    let mut a = ActorCritic::new(3, 2, hyper);
    let mut p = PolicyParams::new(3, 2);
    let mut v = ValueParams::new(3);
    for (i, s) in [
        sample(0, RIGHT, -1.0, 1, false),
        sample(1, RIGHT, 4.0, 2, true),
    ]
    .iter()
    .enumerate()
    {
        let rec = a.update(s, None).unwrap();
        let plain = learn_step(&mut p, &mut v, s, None, &hyper).unwrap();
        assert_eq!(rec.delta, plain.delta, "step {i}");
        assert_eq!(rec.source, AdvantageSource::TdError);
    }
    assert_eq!(a.policy, p);
    assert_eq!(a.value, v);
}

#[test]
fn ac_hf_feedback_step_matches_shared_rule() {
    let hyper = HyperParams::default();
    let mut a = ActorCritic::new(3, 2, hyper);
    let mut p = PolicyParams::new(3, 2);
    let mut v = ValueParams::new(3);
    let s = sample(0, LEFT, -1.0, 0, false);
    a.update(&s, Some(1.0)).unwrap();
    learn_step(&mut p, &mut v, &s, Some(1.0), &hyper).unwrap();
    assert_eq!(a.policy, p);
    // f = +1 at uniform pi over two actions moves theta by beta * (1 - 1/2)
    assert_relative_eq!(
        a.policy.preferences(StateId(0)).unwrap()[0],
        0.05,
        epsilon = 1e-15
    );
}

#[test]
fn ac_hf_converges_on_two_state_chain() {
    let env = Corridor::new(3).unwrap();
    let oracle = q_iteration(&env, 0.95, |_, _| 0.0);
    let mut learner = ActorCritic::new(env.n_states(), 2, HyperParams::default());
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..500 {
        run_direct_episode(&env, &mut learner, &mut Silent, &mut rng).unwrap();
    }
    for s in env.states() {
        let probs = learner.policy.action_probs(s).unwrap();
        assert_eq!(argmax(&probs), argmax(&oracle[s.0]), "state {s}");
        assert_eq!(argmax(&probs), RIGHT.0);
    }
}

#[test]
fn tamer_without_feedback_is_q_learning() {
    let env = Corridor::new(4).unwrap();
    let (w, p) = (ShapingWeights::default(), QParams::default());
    let mut tamer = TamerRl::new(env.n_states(), 2, w, p);
    let mut bql = BqlShaping::new(env.n_states(), 2, w, p);
    let mut r1 = ChaCha8Rng::seed_from_u64(5);
    let mut r2 = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let a = run_direct_episode(&env, &mut tamer, &mut Silent, &mut r1).unwrap();
        let b = run_direct_episode(&env, &mut bql, &mut Silent, &mut r2).unwrap();
        assert_eq!(a, b);
    }
    assert_eq!(tamer.q, bql.q);
    assert!(tamer.human.table().iter().all(|h| *h == 0.0));
}

#[test]
fn human_model_converges_geometrically() {
    let mut h = HumanModel::new(2, 2);
    for n in 1..=30 {
        h.update(StateId(1), RIGHT, 1.0, 0.2).unwrap();
        assert_relative_eq!(
            h.get(StateId(1), RIGHT).unwrap(),
            1.0 - 0.8f64.powi(n),
            epsilon = 1e-12
        );
    }
    assert_eq!(h.get(StateId(0), RIGHT).unwrap(), 0.0);
}

#[test]
fn tamer_matches_q_iteration_on_shaped_mdp() {
    let env = Corridor::new(4).unwrap();
    let scenario = build_scenario(&env, Intent::Misleading, FeedbackCase::Ideal.params());
    let weights = ShapingWeights::default();
    let f = |s: StateId, a: ActionId| if scenario.prefers(s, a) { 1.0 } else { -1.0 };
    let oracle = q_iteration(&env, 0.95, |s, a| weights.w_tamer * f(s, a));
    // the shaped optimum mixes directions: loiter at the wall, run for the
    // goal once close
    let greedy: Vec<usize> = env.states().iter().map(|s| argmax(&oracle[s.0])).collect();
    assert_eq!(greedy, vec![LEFT.0, RIGHT.0, RIGHT.0]);

    let mut learner = TamerRl::new(env.n_states(), 2, weights, QParams::default());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut source = Oracle {
        scenario: &scenario,
        rng: ChaCha8Rng::seed_from_u64(3),
    };
    for _ in 0..300 {
        run_direct_episode(&env, &mut learner, &mut source, &mut rng).unwrap();
    }
    for s in env.states() {
        assert_eq!(
            learner.q.greedy(s).unwrap(),
            vec![ActionId(argmax(&oracle[s.0]))],
            "state {s}"
        );
    }
}

#[test]
fn bql_negative_feedback_on_left_makes_right_greedy() {
    let env = Corridor::new(3).unwrap();
    let weights = ShapingWeights::default();
    let shaping = |_: StateId, a: ActionId| if a == LEFT { -weights.w_bql } else { 0.0 };
    let oracle = q_iteration(&env, 0.95, shaping);
    let mut learner = BqlShaping::new(env.n_states(), 2, weights, QParams::default());
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut source = Scripted(|_, a| (a == LEFT).then_some(-1.0));
    for _ in 0..200 {
        run_direct_episode(&env, &mut learner, &mut source, &mut rng).unwrap();
    }
    for s in env.states() {
        assert_eq!(argmax(&oracle[s.0]), RIGHT.0);
        assert_eq!(learner.q.greedy(s).unwrap(), vec![RIGHT], "state {s}");
    }
}

#[test]
fn bql_zero_weight_ignores_feedback() {
    let env = Corridor::new(4).unwrap();
    let weights = ShapingWeights {
        w_bql: 0.0,
        ..ShapingWeights::default()
    };
    let mut with = BqlShaping::new(env.n_states(), 2, weights, QParams::default());
    let mut without = with.clone();
    let mut r1 = ChaCha8Rng::seed_from_u64(9);
    let mut r2 = ChaCha8Rng::seed_from_u64(9);
    let mut source = Scripted(|_, _| Some(1.0));
    for _ in 0..30 {
        run_direct_episode(&env, &mut with, &mut source, &mut r1).unwrap();
        run_direct_episode(&env, &mut without, &mut Silent, &mut r2).unwrap();
    }
    assert_eq!(with.q, without.q);
}

#[test]
fn q_update_by_hand() {
    let mut q = QTable::new(2, 2);
    let p = QParams::default();
    q.q[2 + 1] = 2.0;
    let d = q
        .update(&sample(0, LEFT, -1.0, 1, false), -1.0, &p)
        .unwrap();
    assert_relative_eq!(d, -1.0 + 0.95 * 2.0, epsilon = 1e-15);
    assert_relative_eq!(q.get(StateId(0), LEFT).unwrap(), 0.1 * 0.9, epsilon = 1e-15);
    let d = q.update(&sample(0, RIGHT, 4.0, 1, true), 4.0, &p).unwrap();
    assert_eq!(d, 4.0);
}

#[test]
fn weights_validate() {
    assert!(ShapingWeights::default().validate().is_ok());
    assert!(ShapingWeights {
        w_tamer: -1.0,
        ..Default::default()
    }
    .validate()
    .is_err());
    assert!(QParams {
        epsilon: 1.5,
        ..Default::default()
    }
    .validate()
    .is_err());
}

proptest! {
    #[test]
    fn epsilon_greedy_draws_two_uniforms(seed: u64, eps in 0.0f64..=1.0, vals in proptest::collection::vec(-3i32..3, 4)) {
        let mut q = QTable::new(1, 4);
        for (i, v) in vals.iter().enumerate() {
            q.q[i] = *v as f64;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut reference = rng.clone();
        let a = q.epsilon_greedy(StateId(0), eps, &mut rng).unwrap();
        let _: f64 = reference.random();
        let _: f64 = reference.random();
        prop_assert_eq!(rng.random::<u64>(), reference.random::<u64>());
        prop_assert!(a.0 < 4);
        if eps == 0.0 {
            prop_assert!(q.greedy(StateId(0)).unwrap().contains(&a));
        }
    }

    #[test]
    fn epsilon_greedy_probs_are_a_distribution(eps in 0.0f64..=1.0, vals in proptest::collection::vec(-3i32..3, 5)) {
        let mut q = QTable::new(1, 5);
        for (i, v) in vals.iter().enumerate() {
            q.q[i] = *v as f64;
        }
        let probs = epsilon_greedy_probs(&q, StateId(0), eps).unwrap();
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(probs.iter().all(|p| *p >= 0.0));
    }
}
