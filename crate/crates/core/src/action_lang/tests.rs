use super::*;
use proptest::prelude::*;

const THREE_GRID: &str = "\
% 3x1 corridor
fluent Loc : 1..3.
action moveleft, moveright.
moveleft causes Loc=L-1 if Loc=L.
moveright causes Loc=L+1 if Loc=L.
";

fn state(desc: &ActionDescription, cond: &str) -> WorldState {
    desc.complete(&desc.parse_condition(cond).unwrap()).unwrap()
}

#[test]
fn schema_grounds_only_in_range_successors() {
    let desc = parse_action_description(THREE_GRID).unwrap();
    let right = desc.action_id("moveright").unwrap();
    let laws: Vec<String> = desc
        .dynamics()
        .iter()
        .filter(|l| l.action == right)
        .map(|l| {
            format!(
                "{} <- {}",
                desc.format_atom(&l.effect),
                desc.format_atom(&l.preconditions[0])
            )
        })
        .collect();
    assert_eq!(laws, vec!["Loc=2 <- Loc=1", "Loc=3 <- Loc=2"]);
    assert_eq!(desc.dynamics().len(), 4);
}

#[test]
fn empty_input_has_no_laws() {
    let desc = parse_action_description("").unwrap();
    assert!(desc.fluents().is_empty());
    assert!(desc.statics().is_empty() && desc.dynamics().is_empty());

    let declared = parse_action_description("fluent F : bool.\naction a.\n").unwrap();
    assert_eq!(declared.fluents().len(), 1);
    assert!(declared.dynamics().is_empty());
}

#[test]
fn shared_variable_grounds_over_common_values() {
    let text = "\
fluent TaxiLoc : 0..3.
fluent PassLoc : {0, 2, 5}.
fluent InTaxi : bool.
action pickup.
pickup causes InTaxi if TaxiLoc=P, PassLoc=P.
";
    let desc = parse_action_description(text).unwrap();
    // By hand: P must lie in 0..3 and in {0,2,5}, so P in {0, 2}.
    let printed: Vec<String> = desc
        .dynamics()
        .iter()
        .map(|l| {
            let pre: Vec<String> = l
                .preconditions
                .iter()
                .map(|a| desc.format_atom(a))
                .collect();
            format!("{} if {}", desc.format_atom(&l.effect), pre.join(", "))
        })
        .collect();
    assert_eq!(
        printed,
        vec![
            "InTaxi if TaxiLoc=0, PassLoc=0",
            "InTaxi if TaxiLoc=2, PassLoc=2"
        ]
    );
}

#[test]
fn syntax_errors_carry_position() {
    let err = parse_action_description("fluent Loc : 1..3.\naction go.\ngo causes Loc=2 if\n")
        .unwrap_err();
    assert!(
        matches!(err, ActionLangError::Syntax { line: 3, .. }),
        "{err:?}"
    );

    let err = parse_action_description("fluent Loc : 1..3\naction go.").unwrap_err();
    assert_eq!(
        err,
        ActionLangError::Syntax {
            line: 2,
            col: 1,
            message: "expected `.`, found `action`".into()
        }
    );

    let err = parse_action_description("fluent X : 1..2.\n  # nope").unwrap_err();
    assert!(matches!(
        err,
        ActionLangError::Syntax {
            line: 2,
            col: 3,
            ..
        }
    ));
}

#[test]
fn undeclared_symbols_are_rejected() {
    let err = parse_action_description("fluent Loc : 1..3.\njump causes Loc=1.").unwrap_err();
    assert_eq!(
        err,
        ActionLangError::Undeclared {
            line: 2,
            col: 1,
            name: "jump".into()
        }
    );
    let err = parse_action_description("action a.\na causes Foo=1.").unwrap_err();
    assert!(matches!(err, ActionLangError::Undeclared { name, .. } if name == "Foo"));
}

#[test]
fn domain_violations_are_rejected() {
    for text in [
        "fluent Loc : 1..3.\naction a.\na causes Loc=7.",
        "fluent Loc : 1..3.\naction a.\na causes Loc.",
        "fluent C : {red, blue}.\naction a.\na causes C=green.",
        "fluent C : {red, blue}.\naction a.\na causes C=L+1 if C=L.",
        "fluent Loc : 3..1.",
        "fluent C : {a, a}.",
    ] {
        let err = parse_action_description(text).unwrap_err();
        assert!(
            matches!(err, ActionLangError::DomainViolation { .. }),
            "{text}: {err:?}"
        );
    }
}

#[test]
fn duplicate_names_are_rejected() {
    let err = parse_action_description("fluent A : bool.\naction A.").unwrap_err();
    assert!(matches!(err, ActionLangError::Duplicate { line: 2, .. }));
}

#[test]
fn closure_without_statics_is_identity() {
    let desc = parse_action_description("fluent A : bool.\nfluent B : bool.").unwrap();
    let partial = desc.parse_condition("A, ~B").unwrap();
    assert_eq!(desc.closure(&partial).unwrap(), partial);
}

#[test]
fn closure_single_and_chained() {
    let desc = parse_action_description(
        "fluent A : bool.\nfluent B : bool.\nfluent C : bool.\nB if A.\nC if B.",
    )
    .unwrap();
    let closed = desc.closure(&desc.parse_condition("A").unwrap()).unwrap();
    assert_eq!(closed, desc.parse_condition("A, B, C").unwrap());

    let single = parse_action_description("fluent A : bool.\nfluent B : bool.\nB if A.").unwrap();
    let closed = single
        .closure(&single.parse_condition("A").unwrap())
        .unwrap();
    assert_eq!(closed, single.parse_condition("A, B").unwrap());
}

#[test]
fn closure_detects_inconsistency() {
    let desc = parse_action_description("fluent A : bool.\nfluent B : bool.\n~B if A.").unwrap();
    let err = desc
        .closure(&desc.parse_condition("A, B").unwrap())
        .unwrap_err();
    assert_eq!(err, ActionLangError::Inconsistent { fluent: "B".into() });
}

#[test]
fn apply_moves_right_on_three_grid() {
    let desc = parse_action_description(THREE_GRID).unwrap();
    let s1 = state(&desc, "Loc=1");
    let s2 = desc.apply_named(&s1, "moveright").unwrap();
    assert_eq!(s2, state(&desc, "Loc=2"));
    // No law for moveright at the right edge: inertia.
    let s3 = state(&desc, "Loc=3");
    assert_eq!(desc.apply_named(&s3, "moveright").unwrap(), s3);
}

#[test]
fn apply_with_no_triggered_law_is_inertial() {
    let desc =
        parse_action_description("fluent A : bool.\nfluent N : 0..4.\naction wait.").unwrap();
    let s = state(&desc, "~A, N=3");
    assert_eq!(desc.apply_named(&s, "wait").unwrap(), s);
}

#[test]
fn apply_pickup_requires_colocation() {
    let text = "\
fluent TaxiLoc : 0..3.
fluent PassLoc : 0..3.
fluent InTaxi : bool.
action pickup.
pickup causes InTaxi if TaxiLoc=P, PassLoc=P, ~InTaxi.
";
    let desc = parse_action_description(text).unwrap();
    let apart = state(&desc, "TaxiLoc=1, PassLoc=2, ~InTaxi");
    assert_eq!(desc.apply_named(&apart, "pickup").unwrap(), apart);
    let together = state(&desc, "TaxiLoc=2, PassLoc=2, ~InTaxi");
    assert_eq!(
        desc.apply_named(&together, "pickup").unwrap(),
        state(&desc, "TaxiLoc=2, PassLoc=2, InTaxi")
    );
}

#[test]
fn apply_rejects_conflicting_effects() {
    let desc = parse_action_description(
        "fluent N : 0..2.\naction a.\na causes N=1 if N=0.\na causes N=2 if N=0.",
    )
    .unwrap();
    let err = desc.apply_named(&state(&desc, "N=0"), "a").unwrap_err();
    assert_eq!(
        err,
        ActionLangError::ConflictingEffects {
            action: "a".into(),
            fluent: "N".into()
        }
    );
}

#[test]
fn statics_override_inertia_after_action() {
    let desc = parse_action_description(
        "fluent At : 0..2.\nfluent Home : bool.\naction go.\n\
         go causes At=X+1 if At=X.\nHome if At=0.\n~Home if At=1.\n~Home if At=2.",
    )
    .unwrap();
    let s = state(&desc, "At=0");
    assert!(s.holds(&desc.atom("Home", &Value::Bool(true)).unwrap()));
    let next = desc.apply_named(&s, "go").unwrap();
    assert_eq!(next, state(&desc, "At=1"));
    assert!(desc.is_state(&next));
}

#[test]
fn complete_requires_determined_state() {
    let desc = parse_action_description("fluent A : bool.\nfluent B : bool.").unwrap();
    let err = desc
        .complete(&desc.parse_condition("A").unwrap())
        .unwrap_err();
    assert_eq!(err, ActionLangError::Underdetermined("B".into()));
}

#[test]
fn unknown_action_is_an_error() {
    let desc = parse_action_description(THREE_GRID).unwrap();
    let s = state(&desc, "Loc=1");
    assert!(matches!(
        desc.apply_named(&s, "fly"),
        Err(ActionLangError::UnknownAction(_))
    ));
}

#[test]
fn printer_output_reparses() {
    let text = "\
fluent Loc : 1..3.
fluent Pass : {waiting, riding, -4}.
fluent Lit : bool.
action moveleft, moveright, toggle.
moveleft causes Loc=L-1 if Loc=L.
moveright causes Loc=L+1 if Loc=L, ~Lit.
toggle causes Lit if ~Lit.
Pass=riding if Lit, Loc=3.
";
    let desc = parse_action_description(text).unwrap();
    let printed = desc.to_string();
    let again = parse_action_description(&printed).unwrap();
    assert_eq!(desc, again);
    assert_eq!(printed, again.to_string());
}

// --- properties -----------------------------------------------------------

/// Random ground description over a handful of small integer fluents.
fn arb_description() -> impl Strategy<Value = String> {
    let fluents = prop::collection::vec(1u32..4, 1..4);
    fluents.prop_flat_map(|sizes| {
        let n = sizes.len();
        let sizes2 = sizes.clone();
        let atom =
            move |sizes: Vec<u32>| (0..sizes.len()).prop_flat_map(move |f| (Just(f), 0..=sizes[f]));
        let static_law = (
            atom(sizes.clone()),
            prop::collection::vec(atom(sizes.clone()), 0..3),
        );
        let dynamic_law = (
            0usize..3,
            atom(sizes.clone()),
            prop::collection::vec(atom(sizes.clone()), 0..3),
        );
        (
            Just(sizes2),
            prop::collection::vec(static_law, 0..3),
            prop::collection::vec(dynamic_law, 0..6),
        )
            .prop_map(move |(sizes, statics, dynamics)| {
                let mut text = String::new();
                for (i, hi) in sizes.iter().enumerate() {
                    text.push_str(&format!("fluent F{i} : 0..{hi}.\n"));
                }
                text.push_str("action a0, a1, a2.\n");
                let fmt_atoms = |atoms: &[(usize, u32)]| {
                    atoms
                        .iter()
                        .map(|(f, v)| format!("F{f}={v}"))
                        .collect::<Vec<_>>()
                        .join(", ")
                };
                for ((hf, hv), body) in statics {
                    text.push_str(&format!("F{hf}={hv}"));
                    if !body.is_empty() {
                        text.push_str(&format!(" if {}", fmt_atoms(&body)));
                    }
                    text.push_str(".\n");
                }
                for (a, (ef, ev), pre) in dynamics {
                    text.push_str(&format!("a{a} causes F{ef}={ev}"));
                    if !pre.is_empty() {
                        text.push_str(&format!(" if {}", fmt_atoms(&pre)));
                    }
                    text.push_str(".\n");
                }
                let _ = n;
                text
            })
    })
}

fn all_states(desc: &ActionDescription) -> Vec<WorldState> {
    let mut out = vec![Vec::new()];
    for decl in desc.fluents() {
        let mut next = Vec::new();
        for prefix in &out {
            for v in 0..decl.domain.len() as u32 {
                let mut s = prefix.clone();
                s.push(v);
                next.push(s);
            }
        }
        out = next;
    }
    out.into_iter()
        .map(WorldState::from_indices)
        .filter(|s| desc.is_state(s))
        .collect()
}

proptest! {
    #[test]
    fn parse_print_is_identity(text in arb_description()) {
        let desc = parse_action_description(&text).unwrap();
        let again = parse_action_description(&desc.to_string()).unwrap();
        prop_assert_eq!(&desc, &again);
    }

    #[test]
    fn closure_is_idempotent(text in arb_description(), picks in prop::collection::vec((0usize..4, 0u32..4), 0..4)) {
        let desc = parse_action_description(&text).unwrap();
        let mut partial = PartialState::new();
        for (f, v) in picks {
            if f < desc.fluents().len() && (v as usize) < desc.fluents()[f].domain.len() {
                partial.insert(FluentId(f), v);
            }
        }
        if let Ok(once) = desc.closure(&partial) {
            prop_assert!(once.iter().all(|(f, v)| partial.get(f).is_none_or(|p| p == v)));
            prop_assert_eq!(desc.closure(&once).unwrap(), once);
        }
    }

    #[test]
    fn apply_is_total_closed_and_inertial(text in arb_description()) {
        let desc = parse_action_description(&text).unwrap();
        for s in all_states(&desc) {
            for a in 0..desc.actions().len() {
                let action = ActionId(a);
                let Ok(next) = desc.apply(&s, action) else { continue };
                prop_assert_eq!(next.len(), desc.fluents().len());
                prop_assert!(desc.is_state(&next));
                let touched: Vec<FluentId> = desc.triggered(&s, action).map(|l| l.effect.fluent).collect();
                let static_heads: Vec<FluentId> = desc.statics().iter().map(|l| l.head.fluent).collect();
                for f in 0..desc.fluents().len() {
                    let f = FluentId(f);
                    if !touched.contains(&f) && !static_heads.contains(&f) {
                        prop_assert_eq!(next.get(f), s.get(f));
                    }
                }
            }
        }
    }
}
