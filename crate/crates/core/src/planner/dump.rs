use std::fmt::Write;

use super::AvailabilitySample;
use crate::action_lang::{
    ActionDescription, FluentAtom, FluentId, PartialState, Value, WorldState,
};

fn term(value: &Value) -> String {
    match value {
        Value::Bool(b) => b.to_string(),
        Value::Int(i) => i.to_string(),
        Value::Sym(s) => s.to_lowercase(),
    }
}

fn holds(desc: &ActionDescription, atom: &FluentAtom, time: &str) -> String {
    format!(
        "holds({},{},{})",
        desc.fluent(atom.fluent).name.to_lowercase(),
        term(&desc.atom_value(atom)),
        time
    )
}

fn state_term(desc: &ActionDescription, state: &WorldState) -> String {
    let values: Vec<String> = desc
        .fluents()
        .iter()
        .zip(state.indices())
        .map(|(decl, v)| term(&decl.domain.value(*v).expect("value in domain")))
        .collect();
    format!("s({})", values.join(","))
}

/// Text rendering of the timestamped program for a sampled description:
/// static and dynamic laws with time arguments, inertia, the sampled
/// `p(s,a,t)` facts, and the initial and goal conditions.
///
/// Meant for inspection and for feeding an external answer-set solver in
/// differential tests; the in-repo search does not read it.
pub fn dump_translation(
    desc: &ActionDescription,
    availability: &AvailabilitySample,
    initial: &PartialState,
    goal: &PartialState,
) -> String {
    let horizon = availability.horizon();
    let mut out = String::new();
    let _ = writeln!(out, "% horizon {horizon}");
    let _ = writeln!(out, "#const k={horizon}.");
    let _ = writeln!(out, "time(1..k+1).");
    let _ = writeln!(out, "step(1..k).");
    for decl in desc.fluents() {
        for v in decl.domain.values() {
            let _ = writeln!(out, "value({},{}).", decl.name.to_lowercase(), term(&v));
        }
    }
    let _ = writeln!(out, "\n% static laws");
    for law in desc.statics() {
        let mut body: Vec<String> = law.body.iter().map(|a| holds(desc, a, "T")).collect();
        body.push("time(T)".into());
        let _ = writeln!(
            out,
            "{} :- {}.",
            holds(desc, &law.head, "T"),
            body.join(", ")
        );
    }
    let _ = writeln!(out, "\n% dynamic laws, guarded by sampled availability");
    for law in desc.dynamics() {
        let action = desc.action_name(law.action).to_lowercase();
        let mut body = vec![format!("occurs({action},T)")];
        body.extend(law.preconditions.iter().map(|a| holds(desc, a, "T")));
        body.push(format!("at(S,T), p(S,{action},T)"));
        body.push("step(T)".into());
        let _ = writeln!(
            out,
            "{} :- {}.",
            holds(desc, &law.effect, "T+1"),
            body.join(", ")
        );
    }
    let _ = writeln!(out, "\n% inertia and uniqueness");
    let _ = writeln!(
        out,
        "holds(F,V,T+1) :- holds(F,V,T), not changed(F,T+1), step(T)."
    );
    let _ = writeln!(
        out,
        "changed(F,T) :- holds(F,V,T), holds(F,W,T-1), V != W, time(T), T > 1."
    );
    let _ = writeln!(out, ":- holds(F,V,T), holds(F,W,T), V != W.");
    let _ = writeln!(out, "{{ occurs(A,T) : p(S,A,T), at(S,T) }} 1 :- step(T).");

    let _ = writeln!(out, "\n% state terms");
    let mut sampled: Vec<&WorldState> = (1..=horizon)
        .filter_map(|t| availability.fragment(t))
        .flat_map(|f| f.keys())
        .collect();
    sampled.sort();
    sampled.dedup();
    for state in sampled {
        let body: Vec<String> = state
            .indices()
            .iter()
            .enumerate()
            .map(|(f, v)| {
                let atom = FluentAtom {
                    fluent: FluentId(f),
                    value: *v,
                };
                holds(desc, &atom, "T")
            })
            .collect();
        let _ = writeln!(
            out,
            "at({},T) :- {}, time(T).",
            state_term(desc, state),
            body.join(", ")
        );
    }

    let _ = writeln!(out, "\n% sampled availability p(s,a,t)");
    for t in 1..=horizon {
        let mut facts: Vec<(String, String)> = availability
            .fragment(t)
            .map(|f| {
                f.iter()
                    .map(|(s, a)| (state_term(desc, s), desc.action_name(*a).to_lowercase()))
                    .collect()
            })
            .unwrap_or_default();
        facts.sort();
        for (s, a) in facts {
            let _ = writeln!(out, "p({s},{a},{t}).");
        }
    }

    let _ = writeln!(out, "\n% initial state and goal");
    for (f, v) in initial {
        let atom = FluentAtom {
            fluent: *f,
            value: *v,
        };
        let _ = writeln!(out, "{}.", holds(desc, &atom, "1"));
    }
    let goal_atoms: Vec<String> = goal
        .iter()
        .map(|(f, v)| {
            holds(
                desc,
                &FluentAtom {
                    fluent: *f,
                    value: *v,
                },
                "k+1",
            )
        })
        .collect();
    if !goal_atoms.is_empty() {
        let _ = writeln!(out, ":- not goal.\ngoal :- {}.", goal_atoms.join(", "));
    }
    out
}
