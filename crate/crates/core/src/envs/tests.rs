use std::collections::VecDeque;

use super::*;
use crate::feedback::Intent;

fn four_rooms() -> FourRooms {
    FourRooms::new(
        FourRoomsMap::parse(DEFAULT_FOUR_ROOMS_MAP).unwrap(),
        FourRoomsRewards::default(),
    )
    .unwrap()
}

fn taxi() -> Taxi {
    Taxi::new(TaxiInstance::parse(DEFAULT_TAXI_INSTANCE).unwrap()).unwrap()
}

fn all_envs() -> Vec<Box<dyn Environment>> {
    vec![
        Box::new(four_rooms()),
        Box::new(taxi()),
        Box::new(Corridor::new(3).unwrap()),
        Box::new(Corridor::new(7).unwrap()),
    ]
}

/// Plain BFS over the raw map characters, independent of the environment
/// code: 4-connected, `#` blocks, `X` blocks when `avoid` is set.
fn char_grid_distance(map: &str, avoid: bool) -> Option<usize> {
    let rows: Vec<Vec<char>> = map
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('%'))
        .map(|l| l.trim().chars().collect())
        .collect();
    let find = |ch| {
        rows.iter()
            .enumerate()
            .find_map(|(r, row)| row.iter().position(|&c| c == ch).map(|c| (r, c)))
            .unwrap()
    };
    let (start, goal) = (find('S'), find('G'));
    let mut dist = vec![vec![usize::MAX; rows[0].len()]; rows.len()];
    dist[start.0][start.1] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some((r, c)) = queue.pop_front() {
        if (r, c) == goal {
            return Some(dist[r][c]);
        }
        let cands = [
            (r.wrapping_sub(1), c),
            (r + 1, c),
            (r, c + 1),
            (r, c.wrapping_sub(1)),
        ];
        for (nr, nc) in cands {
            let Some(&ch) = rows.get(nr).and_then(|row| row.get(nc)) else {
                continue;
            };
            if ch == '#' || (avoid && ch == 'X') || dist[nr][nc] != usize::MAX {
                continue;
            }
            dist[nr][nc] = dist[r][c] + 1;
            queue.push_back((nr, nc));
        }
    }
    None
}

/// Fewest environment steps from reset to a terminal state with positive
/// reward, by BFS over `step`.
fn env_shortest_success(env: &dyn Environment) -> Option<usize> {
    let mut dist = vec![usize::MAX; env.n_states()];
    let start = env.reset();
    dist[start.0] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        for a in 0..env.n_actions() {
            let out = env.step(s, ActionId(a)).unwrap();
            if out.terminal && out.reward > 0.0 {
                return Some(dist[s.0] + 1);
            }
            if !out.terminal && dist[out.next.0] == usize::MAX {
                dist[out.next.0] = dist[s.0] + 1;
                queue.push_back(out.next);
            }
        }
    }
    None
}

#[test]
fn default_map_shape() {
    let env = four_rooms();
    let map = env.map();
    assert_eq!((map.rows, map.cols), (10, 10));
    assert_eq!(map.start, (5, 2));
    assert_eq!(map.goal, (0, 9));
    assert!(env.states().len() <= 100 - map.wall_count());
}

#[test]
fn shortest_safe_path_matches_independent_bfs() {
    let env = four_rooms();
    let oracle = char_grid_distance(DEFAULT_FOUR_ROOMS_MAP, true).unwrap();
    assert_eq!(oracle, 14);
    assert_eq!(env.shortest_safe_path(), Some(oracle as u32));
    assert_eq!(env_shortest_success(&env), Some(oracle));
    // danger does not offer a shortcut on this map
    assert_eq!(
        char_grid_distance(DEFAULT_FOUR_ROOMS_MAP, false),
        Some(oracle)
    );
}

#[test]
fn four_rooms_rewards() {
    let env = four_rooms();
    let out = env.step(env.state_of((0, 8)), ActionId(2)).unwrap();
    assert_eq!(out.next, env.state_of((0, 9)));
    assert_eq!(out.reward, 4.0);
    assert!(out.terminal);

    let out = env.step(env.state_of((0, 7)), ActionId(1)).unwrap();
    assert_eq!(out.next, env.state_of((1, 7)));
    assert_eq!(out.reward, -11.0);
    assert!(out.terminal);

    // bump into the wall at (0,4)
    let out = env.step(env.state_of((0, 3)), ActionId(2)).unwrap();
    assert_eq!(out.next, env.state_of((0, 3)));
    assert_eq!(out.reward, -1.0);
    assert!(!out.terminal);
}

#[test]
fn invalid_states_and_actions() {
    let env = four_rooms();
    assert_eq!(
        env.step(StateId(4), ActionId(0)),
        Err(EnvError::InvalidState(StateId(4)))
    );
    assert_eq!(
        env.step(StateId(1000), ActionId(0)),
        Err(EnvError::InvalidState(StateId(1000)))
    );
    assert_eq!(
        env.step(env.reset(), ActionId(4)),
        Err(EnvError::InvalidAction(ActionId(4)))
    );
    assert_eq!(
        env.step(StateId(9), ActionId(0)),
        Err(EnvError::Terminal(StateId(9)))
    );
    let taxi = taxi();
    assert!(matches!(
        taxi.step(StateId(75), ActionId(0)),
        Err(EnvError::InvalidState(_))
    ));
}

#[test]
fn symbolic_step_agrees_with_env_step() {
    for env in all_envs() {
        let sym = env.symbolic();
        let desc = sym.description();
        assert_eq!(
            desc.actions(),
            env.action_names()
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
        );
        for s in env.states() {
            let world = sym.world_state(s).unwrap();
            assert_eq!(sym.state_id(world), Some(s));
            for a in 0..env.n_actions() {
                let out = env.step(s, ActionId(a)).unwrap();
                let next = desc.apply(world, ActionId(a)).unwrap();
                assert_eq!(
                    Some(&next),
                    sym.world_state(out.next),
                    "{} state {} action {}",
                    env.name(),
                    env.state_label(s),
                    env.action_names()[a]
                );
            }
        }
    }
}

#[test]
fn initial_and_goal_conditions_match_env() {
    let goal_cells: Vec<(Box<dyn Environment>, Vec<StateId>)> = vec![
        (Box::new(four_rooms()), vec![four_rooms().state_of((0, 9))]),
        (
            Box::new(taxi()),
            vec![taxi().state_of((4, 3), TaxiPhase::Delivered)],
        ),
        (Box::new(Corridor::new(3).unwrap()), vec![StateId(2)]),
    ];
    for (env, goals) in goal_cells {
        let sym = env.symbolic();
        let start = sym.description().complete(sym.initial()).unwrap();
        assert_eq!(sym.state_id(&start), Some(env.reset()));
        for s in 0..env.n_states() {
            if let Some(world) = sym.world_state(StateId(s)) {
                assert_eq!(
                    world.satisfies(sym.goal()),
                    goals.contains(&StateId(s)),
                    "{} state {s}",
                    env.name()
                );
            }
        }
    }
}

#[test]
fn planning_states_are_non_terminal_states() {
    for env in all_envs() {
        let sym = env.symbolic();
        let mut ids: Vec<StateId> = sym
            .planning_states()
            .iter()
            .map(|w| sym.state_id(w).unwrap())
            .collect();
        ids.sort();
        assert_eq!(ids, env.states(), "{}", env.name());
    }
}

#[test]
fn red_cells_are_absorbing_in_export() {
    let env = four_rooms();
    let desc = env.symbolic().description();
    let red = env.symbolic().world_state(env.state_of((1, 7))).unwrap();
    for a in 0..4 {
        assert_eq!(&desc.apply(red, ActionId(a)).unwrap(), red);
    }
}

#[test]
fn taxi_shape() {
    let env = taxi();
    assert_eq!(env.states().len(), 50);
    assert_eq!(env.n_states(), 75);
    assert_eq!(env.action_names().len(), 6);
    let inst = env.instance();
    assert_eq!(inst.landmarks.len(), 4);
    assert_eq!(inst.walls.len(), 6);
    assert_eq!(inst.landmarks[inst.passenger].0, "R");
    assert_eq!(inst.landmarks[inst.destination].0, "B");
}

#[test]
fn taxi_rewards() {
    let env = taxi();
    let at_r = env.state_of((0, 0), TaxiPhase::Waiting);
    let out = env.step(at_r, ActionId(4)).unwrap();
    assert_eq!(out.next, env.state_of((0, 0), TaxiPhase::Riding));
    assert_eq!(out.reward, -1.0);
    // wrong place
    let out = env.step(env.reset(), ActionId(4)).unwrap();
    assert_eq!((out.next, out.reward), (env.reset(), -10.0));
    let out = env.step(env.reset(), ActionId(5)).unwrap();
    assert_eq!((out.next, out.reward), (env.reset(), -10.0));
    let at_b = env.state_of((4, 3), TaxiPhase::Riding);
    let out = env.step(at_b, ActionId(5)).unwrap();
    assert_eq!(out.reward, 20.0);
    assert!(out.terminal);
    // wall between (4,2) and (4,3)
    let out = env.step(at_b, ActionId(3)).unwrap();
    assert_eq!(out.next, at_b);
}

#[test]
fn taxi_optimal_episode_length() {
    // 4 moves to R, pickup, 7 moves to B, dropoff
    assert_eq!(env_shortest_success(&taxi()), Some(13));
}

#[test]
fn taxi_pickup_laws_are_guarded_by_colocation() {
    let env = taxi();
    let desc = env.symbolic().description();
    let pickup = desc.action_id("pickup").unwrap();
    let row = desc.fluent_id("TaxiRow").unwrap();
    let col = desc.fluent_id("TaxiCol").unwrap();
    let pass = desc.fluent_id("PassLoc").unwrap();
    let laws: Vec<_> = desc
        .dynamics()
        .iter()
        .filter(|l| l.action == pickup)
        .collect();
    assert!(!laws.is_empty());
    for law in laws {
        let fluents: Vec<_> = law.preconditions.iter().map(|a| a.fluent).collect();
        assert!(fluents.contains(&row) && fluents.contains(&col) && fluents.contains(&pass));
    }
}

#[test]
fn corridor_export_is_the_two_schema_laws() {
    let env = Corridor::new(3).unwrap();
    let text = env.symbolic().text();
    assert!(text.contains("moveleft causes Loc=L-1 if Loc=L."));
    assert!(text.contains("moveright causes Loc=L+1 if Loc=L."));
    assert_eq!(env.symbolic().description().dynamics().len(), 4);
}

/// Follows preferred actions from reset; returns the visited states, and
/// whether the episode ended on a positive terminal reward.
fn follow(env: &dyn Environment, prefs: &PreferenceMap, pick: usize) -> (Vec<StateId>, bool) {
    let mut s = env.reset();
    let mut visited = vec![s];
    for _ in 0..env.episode_cap() {
        let options = &prefs[&s];
        let out = env.step(s, options[pick.min(options.len() - 1)]).unwrap();
        s = out.next;
        visited.push(s);
        if out.terminal {
            return (visited, out.reward > 0.0);
        }
    }
    (visited, false)
}

#[test]
fn helpful_routes_are_optimal() {
    for env in all_envs() {
        let prefs = env.preferences(Intent::Helpful);
        let best = env_shortest_success(env.as_ref()).unwrap();
        for pick in 0..4 {
            let (visited, success) = follow(env.as_ref(), &prefs, pick);
            assert_eq!(visited.len() - 1, best, "{} pick {pick}", env.name());
            assert!(success);
        }
    }
}

#[test]
fn four_rooms_preference_examples() {
    let env = four_rooms();
    let helpful = env.preferences(Intent::Helpful);
    let misleading = env.preferences(Intent::Misleading);
    let east = ActionId(2);
    let south = ActionId(1);
    // goal-adjacent cell: the move into the goal
    assert!(helpful[&env.state_of((0, 8))].contains(&east));
    // helpful never steps into danger
    for (s, actions) in &helpful {
        for a in actions {
            let out = env.step(*s, *a).unwrap();
            assert!(out.reward > -2.0, "{} -> {a}", env.state_label(*s));
        }
    }
    // next to red: the move into red is preferred
    assert!(misleading[&env.state_of((0, 7))].contains(&south));
    assert!(misleading[&env.state_of((0, 8))].contains(&south));
    assert!(!helpful[&env.state_of((0, 7))].contains(&south));
}

#[test]
fn taxi_preference_examples() {
    let env = taxi();
    let helpful = env.preferences(Intent::Helpful);
    let misleading = env.preferences(Intent::Misleading);
    let pickup = ActionId(4);
    let at_passenger = env.state_of((0, 0), TaxiPhase::Waiting);
    assert_eq!(helpful[&at_passenger], vec![pickup]);
    let decoy = env.state_of((1, 0), TaxiPhase::Waiting);
    assert!(misleading[&decoy].contains(&pickup));
    assert!(!helpful[&decoy].contains(&pickup));
    // the helpful route never enters traffic
    for pick in 0..4 {
        let (visited, success) = follow(&env, &helpful, pick);
        assert!(success);
        for s in visited {
            let (pos, _) = env.decode(s).unwrap();
            assert!(
                !env.instance().traffic.contains(&pos),
                "{}",
                env.state_label(s)
            );
        }
    }
    // misleading still admits a full route to the goal
    let (visited, success) = follow(&env, &misleading, 0);
    assert!(success, "{} steps", visited.len());
}

#[test]
fn map_parse_errors() {
    let cases = [
        ("", "empty map"),
        ("S.\n.G.\n", "row has 3 cells"),
        ("S.\n.Q\n", "unknown cell"),
        ("S.\n..\n", "no goal"),
        ("SG\nS.\n", "more than one `S`"),
    ];
    for (text, needle) in cases {
        let err = FourRoomsMap::parse(text).unwrap_err().to_string();
        assert!(err.contains(needle), "{text:?}: {err}");
    }
    let err = FourRoomsMap::parse("S.\n.Q\n").unwrap_err();
    assert!(matches!(err, EnvError::Format { line: 2, .. }));
}

#[test]
fn taxi_parse_errors() {
    let base = "size 3 3\nlandmark A 0 0\nlandmark B 2 2\ntaxi 1 1\npassenger A\ndestination B\n";
    assert!(TaxiInstance::parse(base).is_ok());
    let cases = [
        ("landmark A 0 0\n", "`size` must come first"),
        ("size 3 3\nlandmark A 5 0\n", "outside the grid"),
        ("size 3 3\nwall 0 0 1 1\n", "adjacent"),
        ("size 3 3\nlandmark taxi 0 0\n", "bad landmark name"),
        (
            "size 3 3\nlandmark A 0 0\nlandmark a 1 1\n",
            "duplicate landmark",
        ),
        (
            "size 3 3\nlandmark A 0 0\ntaxi 1 1\npassenger A\ndestination A\n",
            "already at",
        ),
        (
            "size 3 3\nlandmark A 0 0\ntaxi 1 1\npassenger Z\ndestination A\n",
            "unknown landmark",
        ),
        ("size 3 3\nfoo\n", "unrecognised"),
        ("size 0 3\n", "size must be"),
    ];
    for (text, needle) in cases {
        let err = TaxiInstance::parse(text).unwrap_err().to_string();
        assert!(err.contains(needle), "{text:?}: {err}");
    }
}

#[test]
fn small_custom_taxi_agrees_symbolically() {
    let text = "size 2 3\nlandmark A 0 0\nlandmark B 1 2\nwall 0 1 0 2\ntaxi 1 1\npassenger A\ndestination B\n";
    let env = Taxi::new(TaxiInstance::parse(text).unwrap()).unwrap();
    assert_eq!(env_shortest_success(&env), Some(2 + 1 + 3 + 1));
    let desc = env.symbolic().description();
    for s in env.states() {
        let world = env.symbolic().world_state(s).unwrap();
        for a in 0..6 {
            let next = desc.apply(world, ActionId(a)).unwrap();
            let out = env.step(s, ActionId(a)).unwrap();
            assert_eq!(Some(&next), env.symbolic().world_state(out.next));
        }
    }
}

#[test]
fn build_env_by_name() {
    for name in ["four_rooms", "taxi", "corridor"] {
        let env = build_env(EnvKind::parse(name).unwrap(), None).unwrap();
        assert_eq!(env.name(), name);
    }
    assert!(EnvKind::parse("maze").is_err());
    assert!(build_env(EnvKind::Corridor, Some("1")).is_err());
}

#[test]
fn layout_and_view() {
    let env = taxi();
    let layout = env.layout();
    assert_eq!(layout.blocked_edges.len(), 6);
    assert_eq!(layout.landmarks.len(), 4);
    let view = env.view(env.reset()).unwrap();
    assert_eq!((view.row, view.col), (2, 2));
    assert_eq!(view.passenger.as_deref(), Some("waiting"));
    let fr = four_rooms();
    assert_eq!(fr.layout().cells[0], "....#....G");
    assert_eq!(fr.layout().cells[1], "....#..XX.");
}
