use super::*;
use approx::assert_relative_eq;
use proptest::prelude::*;

const S0: StateId = StateId(0);
const S1: StateId = StateId(1);
const A0: ActionId = ActionId(0);
const A1: ActionId = ActionId(1);

#[test]
fn zero_preferences_are_uniform() {
    let p = PolicyParams::new(1, 4);
    assert_eq!(p.action_probs(S0).unwrap(), vec![0.25; 4]);
}

#[test]
fn constant_shift_keeps_uniform() {
    for c in [-50.0, 0.0, 3.5, 700.0] {
        let p = PolicyParams::from_table(1, 4, vec![1.0 + c; 4]).unwrap();
        for prob in p.action_probs(S0).unwrap() {
            assert_relative_eq!(prob, 0.25, epsilon = 1e-15);
        }
    }
}

#[test]
fn log_preferences_give_closed_form_probs() {
    let p = PolicyParams::from_table(1, 2, vec![1f64.ln(), 3f64.ln()]).unwrap();
    let probs = p.action_probs(S0).unwrap();
    assert_relative_eq!(probs[0], 0.25, epsilon = 1e-15);
    assert_relative_eq!(probs[1], 0.75, epsilon = 1e-15);
}

#[test]
fn unknown_state_and_action_are_errors() {
    let p = PolicyParams::new(2, 2);
    assert_eq!(
        p.action_probs(StateId(2)),
        Err(LearnError::UnknownState(StateId(2)))
    );
    assert_eq!(
        p.grad_log_policy(S0, ActionId(5)),
        Err(LearnError::UnknownAction(ActionId(5)))
    );
    let v = ValueParams::new(2);
    assert_eq!(
        v.value(StateId(9)),
        Err(LearnError::UnknownState(StateId(9)))
    );
}

fn sample(r: f64, terminal: bool) -> TransitionSample {
    TransitionSample {
        s: S0,
        a: A0,
        r,
        s_next: S1,
        terminal,
    }
}

#[test]
fn td_error_fixed_point_cases() {
    let c = 4.0;
    let v = ValueParams::from_table(vec![c, c]).unwrap();
    assert_relative_eq!(
        td_error(&sample(0.0, false), &v, 0.99).unwrap(),
        -0.01 * c,
        epsilon = 1e-12
    );
    let zero = ValueParams::new(2);
    assert_eq!(td_error(&sample(0.0, false), &zero, 0.99).unwrap(), 0.0);
}

#[test]
fn td_error_direct_substitution() {
    let v = ValueParams::from_table(vec![1.0, 2.0]).unwrap();
    assert_relative_eq!(
        td_error(&sample(-1.0, false), &v, 0.95).unwrap(),
        -0.1,
        epsilon = 1e-12
    );
}

#[test]
fn terminal_td_error_matches_one_step_return() {
    for next in [-100.0, 0.0, 42.0] {
        let v = ValueParams::from_table(vec![3.0, next]).unwrap();
        let delta = td_error(&sample(5.0, true), &v, 0.95).unwrap();
        // One-step Monte Carlo return from s is just r; advantage is G - V(s).
        let monte_carlo = 5.0 - 3.0;
        assert_eq!(delta, monte_carlo);
        assert_eq!(delta, 2.0);
    }
}

#[test]
fn value_update_cases() {
    let mut v = ValueParams::from_table(vec![1.0, 7.0]).unwrap();
    v.update_value(S0, 0.0, 0.1).unwrap();
    assert_eq!(v.table(), &[1.0, 7.0]);
    v.update_value(S0, -0.1, 0.1).unwrap();
    assert_relative_eq!(v.value(S0).unwrap(), 0.99, epsilon = 1e-15);
    assert_eq!(v.value(S1).unwrap(), 7.0);
}

#[test]
fn td_on_two_state_chain_converges_to_bellman_solution() {
    // s0 -(r=1)-> s1 -(r=-2)-> s0 -> ... with gamma = 0.9.
    // V0 = 1 + g V1, V1 = -2 + g V0  =>  V0 = (1 - 2g) / (1 - g^2).
    let g = 0.9;
    let v0 = (1.0 - 2.0 * g) / (1.0 - g * g);
    let v1 = -2.0 + g * v0;
    let mut v = ValueParams::new(2);
    let steps = [
        TransitionSample {
            s: S0,
            a: A0,
            r: 1.0,
            s_next: S1,
            terminal: false,
        },
        TransitionSample {
            s: S1,
            a: A0,
            r: -2.0,
            s_next: S0,
            terminal: false,
        },
    ];
    for i in 0..20_000 {
        let step = &steps[i % 2];
        let delta = td_error(step, &v, g).unwrap();
        v.update_value(step.s, delta, 0.1).unwrap();
    }
    assert!((v.value(S0).unwrap() - v0).abs() < 1e-3);
    assert!((v.value(S1).unwrap() - v1).abs() < 1e-3);
}

#[test]
fn grad_log_policy_uniform_two_actions() {
    let p = PolicyParams::new(1, 2);
    assert_eq!(p.grad_log_policy(S0, A0).unwrap(), vec![0.5, -0.5]);
}

fn log_prob(theta: &[f64], a: usize) -> f64 {
    // Independent of `softmax`: log-sum-exp written out directly.
    let m = theta.iter().cloned().fold(f64::MIN, f64::max);
    let lse = m + theta.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
    theta[a] - lse
}

#[test]
fn grad_log_policy_matches_finite_differences() {
    let theta = vec![0.3, -1.2, 2.0, 0.0];
    let p = PolicyParams::from_table(1, 4, theta.clone()).unwrap();
    let h = 1e-5;
    for a in 0..4 {
        let grad = p.grad_log_policy(S0, ActionId(a)).unwrap();
        for j in 0..4 {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[j] += h;
            minus[j] -= h;
            let fd = (log_prob(&plus, a) - log_prob(&minus, a)) / (2.0 * h);
            assert!(
                (fd - grad[j]).abs() <= 1e-6 * grad[j].abs().max(1e-3),
                "a={a} j={j}"
            );
        }
    }
}

#[test]
fn zero_advantage_leaves_policy_unchanged() {
    let mut p = PolicyParams::from_table(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let before = p.clone();
    p.update_policy(S0, A1, 0.0, 0.1).unwrap();
    assert_eq!(p, before);
}

#[test]
fn one_positive_step_from_uniform() {
    let mut p = PolicyParams::new(1, 2);
    p.update_policy(S0, A0, 1.0, 0.1).unwrap();
    assert_eq!(p.preferences(S0).unwrap(), &[0.05, -0.05]);
    // softmax(0.05, -0.05)[0] = 1 / (1 + e^-0.1).
    let expected = 1.0 / (1.0 + (-0.1f64).exp());
    assert_relative_eq!(p.action_probs(S0).unwrap()[0], expected, epsilon = 1e-15);
    assert_relative_eq!(expected, 0.525, epsilon = 1e-3);
}

#[test]
fn non_finite_advantage_is_rejected() {
    let mut p = PolicyParams::new(1, 2);
    assert_eq!(
        p.update_policy(S0, A0, f64::NAN, 0.1),
        Err(LearnError::NonFinite("advantage"))
    );
}

#[test]
fn feedback_replaces_delta_for_the_actor_only() {
    let hyper = HyperParams {
        alpha: 0.2,
        beta: 0.3,
        gamma: 0.9,
    };
    let mut p = PolicyParams::from_table(2, 3, vec![0.1, -0.2, 0.4, 1.0, 1.0, 1.0]).unwrap();
    let mut v = ValueParams::from_table(vec![0.5, -1.5]).unwrap();
    let step = TransitionSample {
        s: S0,
        a: ActionId(2),
        r: -1.0,
        s_next: S1,
        terminal: false,
    };
    let grad = p.grad_log_policy(S0, ActionId(2)).unwrap();
    let theta0 = p.table().to_vec();

    let record = learn_step(&mut p, &mut v, &step, Some(-1.0), &hyper).unwrap();
    let delta = -1.0 + 0.9 * -1.5 - 0.5;
    assert_eq!(record.source, AdvantageSource::Feedback);
    assert_relative_eq!(record.delta, delta, epsilon = 1e-12);
    assert_relative_eq!(v.value(S0).unwrap(), 0.5 + 0.2 * delta, epsilon = 1e-12);
    for j in 0..3 {
        assert_relative_eq!(p.table()[j] - theta0[j], -0.3 * grad[j], epsilon = 1e-12);
    }
    // Other state untouched.
    assert_eq!(&p.table()[3..], &theta0[3..]);
    assert_eq!(v.value(S1).unwrap(), -1.5);

    let mut p2 = PolicyParams::from_table(2, 3, theta0.clone()).unwrap();
    let mut v2 = ValueParams::from_table(vec![0.5, -1.5]).unwrap();
    let record = learn_step(&mut p2, &mut v2, &step, None, &hyper).unwrap();
    assert_eq!(record.source, AdvantageSource::TdError);
    for j in 0..3 {
        assert_relative_eq!(
            p2.table()[j] - theta0[j],
            0.3 * delta * grad[j],
            epsilon = 1e-12
        );
    }
}

#[test]
fn hyperparameters_are_validated() {
    assert!(HyperParams::default().validate().is_ok());
    for bad in [
        HyperParams {
            alpha: 0.0,
            ..Default::default()
        },
        HyperParams {
            beta: -1.0,
            ..Default::default()
        },
        HyperParams {
            gamma: 1.0,
            ..Default::default()
        },
        HyperParams {
            gamma: -0.1,
            ..Default::default()
        },
    ] {
        assert!(bad.validate().is_err());
    }
}

#[test]
fn snapshot_round_trip_and_errors() {
    let p = PolicyParams::from_table(2, 2, vec![0.1, -1.0 / 3.0, 1e-300, 7.0]).unwrap();
    let v = ValueParams::from_table(vec![2.5, -0.125]).unwrap();
    let text = write_snapshots(&[
        TableSnapshot::state_action("policy", 2, 2, p.table()),
        TableSnapshot::state("value", v.table()),
    ]);
    let tables = parse_snapshots(&text).unwrap();
    assert_eq!(tables[0].values, p.table());
    assert_eq!(tables[1].values, v.table());
    assert_eq!(tables[1].n_actions, None);

    let sparse = parse_snapshots("table q 2 2\n1 1 3.0\n").unwrap();
    assert_eq!(sparse[0].values, vec![0.0, 0.0, 0.0, 3.0]);

    for (bad, line) in [
        ("0 0 1.0", 1),
        ("table q 2 2\n2 0 1.0", 2),
        ("table q 2 2\n0 0 1.0\n0 0 2.0", 3),
        ("table q 2 2\n0 0 NaN", 2),
        ("table v 2 -\n0 1 1.0", 2),
        ("table q 2 0", 1),
        ("table q 2 2\ntable q 1 1", 2),
    ] {
        assert_eq!(parse_snapshots(bad).unwrap_err().line, line, "{bad}");
    }
}

proptest! {
    #[test]
    fn probabilities_normalised_and_shift_invariant(
        theta in prop::collection::vec(-30.0f64..30.0, 2..7),
        shift in -100.0f64..100.0,
    ) {
        let n = theta.len();
        let p = PolicyParams::from_table(1, n, theta.clone()).unwrap();
        let probs = p.action_probs(S0).unwrap();
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(probs.iter().all(|x| *x > 0.0));
        let shifted: Vec<f64> = theta.iter().map(|t| t + shift).collect();
        let q = PolicyParams::from_table(1, n, shifted).unwrap().action_probs(S0).unwrap();
        for (a, b) in probs.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_sums_to_zero(theta in prop::collection::vec(-10.0f64..10.0, 2..7), a in 0usize..7) {
        let n = theta.len();
        let p = PolicyParams::from_table(1, n, theta).unwrap();
        let grad = p.grad_log_policy(S0, ActionId(a % n)).unwrap();
        prop_assert!(grad.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn positive_advantage_raises_chosen_probability(
        theta in prop::collection::vec(-5.0f64..5.0, 2..6),
        a in 0usize..6,
        adv in 0.01f64..5.0,
    ) {
        let n = theta.len();
        let a = ActionId(a % n);
        let mut p = PolicyParams::from_table(1, n, theta).unwrap();
        let before = p.action_probs(S0).unwrap()[a.0];
        p.update_policy(S0, a, adv, 0.1).unwrap();
        prop_assert!(p.action_probs(S0).unwrap()[a.0] > before);
    }

    #[test]
    fn updates_are_local(s in 0usize..4, a in 0usize..3, adv in -3.0f64..3.0) {
        let mut p = PolicyParams::from_table(4, 3, (0..12).map(|i| i as f64 * 0.1).collect()).unwrap();
        let before = p.clone();
        p.update_policy(StateId(s), ActionId(a), adv, 0.5).unwrap();
        for other in (0..4).filter(|o| *o != s) {
            prop_assert_eq!(p.preferences(StateId(other)).unwrap(), before.preferences(StateId(other)).unwrap());
        }
    }

    #[test]
    fn snapshot_text_round_trips(values in prop::collection::vec(-1e6f64..1e6, 1..20)) {
        let table = TableSnapshot::state("v", &values);
        let parsed = parse_snapshots(&write_snapshots(std::slice::from_ref(&table))).unwrap();
        prop_assert_eq!(parsed, vec![table]);
    }
}
