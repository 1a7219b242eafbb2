use super::*;
use crate::model::parse_game;

const STEEL: &str = r#"
[game steel]
name = "Steel"
quick_travel = true

[item iron_ore]
name = "Iron ore"
droppable = true
[item coal]
name = "Coal"
droppable = true
[item steel]
name = "Steel"
droppable = true
max_qty = 3
[item medkit]
name = "Medkit"
[item badge]
name = "Badge"
max_qty = 1

[character smelter]
name = "Smelter"
opening = greet

[plaque briefing]
title = "Briefing"
body = "Make steel."
[plaque statue]
title = "Statue"
body = "Who stands on the dome?"
answer = "Genius of Wisconsin"
on_correct = give(badge, 1)

[location briefing]
name = "Briefing"
center = 43.0, -89.0
radius = 1
trigger = immediate
payload = plaque(briefing)

[location mine]
name = "Mine"
center = 43.0, -89.0
radius = 20
payload = items(iron_ore, 3)

[location pit]
name = "Coal pit"
center = 43.001, -89.0
radius = 20
payload = items(coal, 1)

[location forge]
name = "Forge"
center = 43.002, -89.0
radius = 20
payload = character(smelter)

[location capitol]
name = "Capitol"
center = 43.003, -89.0
radius = 20
trigger = qr("CAPITOL")
payload = plaque(statue)

[location crypt]
name = "Crypt"
center = 43.004, -89.0
radius = 20
trigger = qr("CRYPT")
payload = items(coal, 5)
visible_if = flag(initiated)

[location landmine]
name = "Mine field"
center = 43.01, -89.0
radius = 20
payload = hazard(take(medkit, 1))

[location vault]
name = "Vault"
center = 43.02, -89.0
radius = 20
payload = items(steel, 1)
visible_if = flag(initiated)

[dialog greet]
speaker = smelter
text = "Bring ore."
  [[option]]
  label = "Smelt"
  visible_if = has(iron_ore, 2) & has(coal, 1)
  effects = take(iron_ore, 2), take(coal, 1), give(steel, 1)
  next = done
  [[option]]
  label = "Join the guild"
  effects = set(initiated)
  next = greet
  [[option]]
  label = "Bye"
  next = END

[dialog done]
speaker = smelter
text = "Fine steel."

[quest make_steel]
name = "Make steel"
complete_if = has(steel, 1)
active_text = "Smelt some steel"
complete_text = "Done"
"#;

fn spec() -> Arc<GameSpec> {
    Arc::new(parse_game(STEEL).unwrap())
}

fn game() -> GameInstance {
    GameInstance::new(spec()).unwrap()
}

fn at(lat: f64) -> GeoPoint {
    GeoPoint::new(lat, -89.0).unwrap()
}

fn inv(g: &GameInstance, p: &str) -> Vec<(String, u32)> {
    g.player(p).unwrap().inventory.clone().into_iter().collect()
}

fn give(g: &mut GameInstance, p: &str, item: &str, n: u32) {
    let spec = Arc::clone(&g.spec);
    apply_effects(
        &spec,
        g.player_mut(p).unwrap(),
        &[Effect::GiveItem {
            item_id: item.into(),
            qty: n,
        }],
    )
    .unwrap();
}

#[test]
fn join_delivers_immediate_locations() {
    let mut g = game();
    let p = g.join_game("ann").unwrap();
    assert!(p.inventory.is_empty());
    assert_eq!(p.visited.iter().collect::<Vec<_>>(), ["briefing"]);
    assert_eq!(
        g.join_game("ann"),
        Err(EngineError::DuplicatePlayer("ann".into()))
    );
}

#[test]
fn join_empty_game() {
    let mut g = GameInstance::new(Arc::new(GameSpec::new("e", "E"))).unwrap();
    let p = g.join_game("bob").unwrap();
    assert!(p.inventory.is_empty() && p.visited.is_empty());
}

#[test]
fn threshold_semantics() {
    let expr = RequirementExpr::all(vec![RequirementAtom::HasItem {
        item_id: "iron_ore".into(),
        min_qty: 2,
    }]);
    let world = WorldState::default();
    let mut p = PlayerState::new("p");
    assert!(eval_requirement(&RequirementExpr::always(), &p, &world));
    p.inventory.insert("iron_ore".into(), 2);
    assert!(eval_requirement(&expr, &p, &world));
    p.inventory.insert("iron_ore".into(), 1);
    assert!(!eval_requirement(&expr, &p, &world));
}

#[test]
fn far_away_is_quiet() {
    let mut g = game();
    g.join_game("ann").unwrap();
    let r = g
        .update_position("ann", GeoPoint::new(0.0, 0.0).unwrap())
        .unwrap();
    assert!(r.is_empty());
}

#[test]
fn hazard_fires_once_per_entry() {
    let mut g = game();
    g.join_game("ann").unwrap();
    give(&mut g, "ann", "medkit", 5);
    let r1 = g.update_position("ann", at(43.01)).unwrap();
    assert_eq!(r1.hazards_hit, ["landmine"]);
    assert!(r1.nearby.is_empty(), "hazards are not listed as nearby");
    g.update_position("ann", at(43.01001)).unwrap();
    assert_eq!(g.player("ann").unwrap().qty("medkit"), 4);
    g.update_position("ann", at(43.0)).unwrap();
    let r3 = g.update_position("ann", at(43.01)).unwrap();
    assert_eq!(r3.fired_effects.len(), 1);
    assert_eq!(g.player("ann").unwrap().qty("medkit"), 3);
}

#[test]
fn hazard_without_stock_logs_effect_failure() {
    let mut g = game();
    g.join_game("ann").unwrap();
    let r = g.update_position("ann", at(43.01)).unwrap();
    assert_eq!(r.hazards_hit, ["landmine"]);
    assert!(r.fired_effects.is_empty());
    let last = g.events().last().unwrap();
    assert_eq!(last.kind(), "effect_failed");
}

#[test]
fn nearby_is_ordered_by_distance_then_id() {
    let mut s = GameSpec::new("n", "N");
    s.items.insert(
        "x".into(),
        crate::model::ItemSpec {
            item_id: "x".into(),
            name: "X".into(),
            description: String::new(),
            droppable: false,
            max_qty: crate::model::MaxQty::Unbounded,
        },
    );
    // due-north offsets of 10, 20, 30 m plus a 20 m tie
    let deg = |m: f64| (m / EARTH_R).to_degrees();
    for (id, m) in [("c", 30.0), ("b", 20.0), ("a", 10.0), ("a2", 20.0)] {
        s.locations.push(LocationSpec {
            location_id: id.into(),
            name: id.into(),
            center: GeoPoint::new(deg(m), 0.0).unwrap(),
            radius_m: 50.0,
            trigger: Trigger::Gps,
            payload: Payload::ItemStack {
                item_id: "x".into(),
                qty: 1,
            },
            visible_if: RequirementExpr::always(),
        });
    }
    let mut g = GameInstance::new(Arc::new(s)).unwrap();
    g.join_game("p").unwrap();
    let r = g
        .update_position("p", GeoPoint::new(0.0, 0.0).unwrap())
        .unwrap();
    let ids: Vec<_> = r.nearby.iter().map(|e| e.location_id.as_str()).collect();
    assert_eq!(ids, ["a", "a2", "b", "c"]);
    for (e, want) in r.nearby.iter().zip([10.0, 20.0, 20.0, 30.0]) {
        assert!(
            (e.distance_m - want).abs() < 1e-6,
            "{} vs {want}",
            e.distance_m
        );
    }
    assert_eq!(r.newly_visited, ["a", "a2", "b", "c"]);
}

const EARTH_R: f64 = 6_371_000.0;

#[test]
fn scanning_codes() {
    let mut g = game();
    g.join_game("ann").unwrap();
    let r = g.scan_code("ann", "CAPITOL").unwrap();
    assert_eq!(r.newly_visited, ["capitol"]);
    let before = g.last_seq();
    assert!(g.scan_code("ann", "garbage").unwrap().is_empty());
    assert!(g.scan_code("ann", "CRYPT").unwrap().is_empty());
    assert_eq!(g.last_seq(), before, "ignored scans are not logged");
    g.player_mut("ann")
        .unwrap()
        .flags
        .insert("initiated".into());
    assert_eq!(
        g.scan_code("ann", "CRYPT").unwrap().newly_visited,
        ["crypt"]
    );
    // reachable from anywhere once scanned
    assert_eq!(g.pickup_item("ann", "crypt", 2).unwrap().taken, 2);
}

#[test]
fn quick_travel_matches_walking() {
    let mut a = game();
    let mut b = game();
    a.join_game("p").unwrap();
    b.join_game("p").unwrap();
    let ra = a.quick_travel("p", "pit").unwrap();
    let rb = b.update_position("p", at(43.001)).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(a.world, b.world);
    assert_eq!(
        a.quick_travel("p", "vault"),
        Err(EngineError::NotVisible("vault".into()))
    );
    assert_eq!(
        a.quick_travel("p", "nope"),
        Err(EngineError::UnknownLocation("nope".into()))
    );

    let mut spec = (*spec()).clone();
    spec.quick_travel_allowed = false;
    let mut c = GameInstance::new(Arc::new(spec)).unwrap();
    c.join_game("p").unwrap();
    assert_eq!(
        c.quick_travel("p", "pit"),
        Err(EngineError::QuickTravelDisabled)
    );
}

#[test]
fn pickup_clamps_to_stock() {
    let mut g = game();
    g.join_game("ann").unwrap();
    assert_eq!(
        g.pickup_item("ann", "mine", 1),
        Err(EngineError::NotHere("mine".into()))
    );
    g.update_position("ann", at(43.0)).unwrap();
    let r = g.pickup_item("ann", "mine", 2).unwrap();
    assert_eq!(r.taken, 2);
    assert_eq!(g.world.stock["mine"], 1);
    let r = g.pickup_item("ann", "mine", 5).unwrap();
    assert_eq!(r.taken, 1);
    assert_eq!(r.inventory["iron_ore"], 3);
    assert_eq!(g.world.stock["mine"], 0);
    assert_eq!(
        g.pickup_item("ann", "mine", 1),
        Err(EngineError::EmptyStock("mine".into()))
    );
    assert_eq!(g.pickup_item("ann", "mine", 0), Err(EngineError::BadQty));
}

#[test]
fn pickup_respects_max_qty() {
    let mut g = game();
    g.join_game("ann").unwrap();
    g.player_mut("ann")
        .unwrap()
        .flags
        .insert("initiated".into());
    give(&mut g, "ann", "steel", 3);
    g.update_position("ann", at(43.02)).unwrap();
    assert_eq!(
        g.pickup_item("ann", "vault", 1),
        Err(EngineError::InventoryFull("steel".into()))
    );
}

#[test]
fn pickup_needs_an_item_stack() {
    let mut g = game();
    g.join_game("ann").unwrap();
    g.update_position("ann", at(43.002)).unwrap();
    assert_eq!(
        g.pickup_item("ann", "forge", 1),
        Err(EngineError::NotAnItem("forge".into()))
    );
}

#[test]
fn drop_and_trade_conserve_items() {
    let mut g = game();
    g.join_game("ann").unwrap();
    g.join_game("bob").unwrap();
    give(&mut g, "ann", "coal", 3);
    assert_eq!(g.drop_item("ann", "coal", 1), Err(EngineError::NoPosition));
    g.update_position("ann", GeoPoint::new(10.0, 10.0).unwrap())
        .unwrap();
    let before = item_totals(&g.spec, &g.world);
    let loc = g.drop_item("ann", "coal", 1).unwrap();
    assert_eq!(loc, "dropped-1");
    assert_eq!(g.player("ann").unwrap().qty("coal"), 2);
    assert_eq!(g.world.stock[&loc], 1);
    assert_eq!(
        g.drop_item("ann", "coal", 9),
        Err(EngineError::InsufficientQty("coal".into()))
    );
    assert_eq!(
        g.drop_item("ann", "medkit", 1),
        Err(EngineError::NotDroppable("medkit".into()))
    );
    assert_eq!(item_totals(&g.spec, &g.world), before);

    let r = g
        .update_position("bob", GeoPoint::new(10.0, 10.0).unwrap())
        .unwrap();
    assert_eq!(r.newly_visited, std::slice::from_ref(&loc));
    g.pickup_item("bob", &loc, 1).unwrap();
    assert!(g.location(&loc).is_none(), "empty drops vanish");
    assert!(!g.world.stock.contains_key(&loc));
    assert_eq!(item_totals(&g.spec, &g.world), before);
}

#[test]
fn smelting_completes_quest_and_latches() {
    let mut g = game();
    g.join_game("ann").unwrap();
    assert_eq!(g.quest_status("ann").unwrap().active, ["make_steel"]);
    assert_eq!(
        g.advance_dialog("ann", "smelter", Choice::START),
        Err(EngineError::NotMet("smelter".into()))
    );
    g.update_position("ann", at(43.0)).unwrap();
    g.pickup_item("ann", "mine", 2).unwrap();
    g.update_position("ann", at(43.001)).unwrap();
    g.pickup_item("ann", "pit", 1).unwrap();
    g.update_position("ann", at(43.002)).unwrap();

    let step = g.advance_dialog("ann", "smelter", Choice::START).unwrap();
    let DialogStep::Node { node, .. } = step else {
        panic!()
    };
    assert_eq!(node.text, "Bring ore.");
    assert_eq!(node.options, ["Smelt", "Join the guild", "Bye"]);
    assert!(g.player("ann").unwrap().talked_to.contains("smelter"));
    assert_eq!(
        g.advance_dialog("ann", "smelter", Choice::Option(3)),
        Err(EngineError::BadOption(3))
    );

    let step = g
        .advance_dialog("ann", "smelter", Choice::Option(0))
        .unwrap();
    assert_eq!(step.fired_effects().len(), 3);
    assert_eq!(inv(&g, "ann"), [("steel".to_string(), 1)]);
    assert_eq!(g.player("ann").unwrap().current_dialog, None);
    let q = g.quest_status("ann").unwrap();
    assert_eq!(
        (q.active.len(), q.complete),
        (0, vec!["make_steel".to_string()])
    );

    g.drop_item("ann", "steel", 1).unwrap();
    assert_eq!(g.quest_status("ann").unwrap().complete, ["make_steel"]);
}

#[test]
fn option_indices_skip_hidden_options() {
    let mut g = game();
    g.join_game("ann").unwrap();
    g.update_position("ann", at(43.002)).unwrap();
    g.advance_dialog("ann", "smelter", Choice::START).unwrap();
    // "Smelt" is hidden, so index 0 is "Join the guild"
    let step = g
        .advance_dialog("ann", "smelter", Choice::Option(0))
        .unwrap();
    assert!(g.player("ann").unwrap().flags.contains("initiated"));
    let DialogStep::Node { node, .. } = step else {
        panic!()
    };
    assert_eq!(node.options, ["Join the guild", "Bye"]);
    assert!(matches!(
        g.advance_dialog("ann", "smelter", Choice::Option(1))
            .unwrap(),
        DialogStep::Ended { .. }
    ));
    assert_eq!(
        g.advance_dialog("ann", "smelter", Choice::Option(0)),
        Err(EngineError::NoDialog("smelter".into()))
    );
}

#[test]
fn failing_effects_are_atomic() {
    let mut g = game();
    g.join_game("ann").unwrap();
    g.update_position("ann", at(43.002)).unwrap();
    g.advance_dialog("ann", "smelter", Choice::START).unwrap();
    let mut spec = (*g.spec).clone();
    // make the smelt option always visible so its takes fail
    spec.dialogs.get_mut("greet").unwrap().options[0].visible_if = RequirementExpr::always();
    let mut g2 =
        GameInstance::from_parts(Arc::new(spec), g.world.clone(), g.events().to_vec()).unwrap();
    give(&mut g2, "ann", "iron_ore", 2);
    let before = g2.player("ann").unwrap().clone();
    assert!(matches!(
        g2.advance_dialog("ann", "smelter", Choice::Option(0)),
        Err(EngineError::EffectFailed(_))
    ));
    assert_eq!(g2.player("ann").unwrap(), &before);
    let kinds: Vec<_> = g2.events().iter().rev().take(2).map(|e| e.kind()).collect();
    assert_eq!(kinds, ["effect_failed", "dialog"]);
}

#[test]
fn answers_normalize_and_reward_once() {
    let mut g = game();
    g.join_game("ann").unwrap();
    assert_eq!(
        g.submit_answer("ann", "capitol", "x"),
        Err(EngineError::NotHere("capitol".into()))
    );
    g.scan_code("ann", "CAPITOL").unwrap();
    assert_eq!(
        g.submit_answer("ann", "capitol", "genius").unwrap(),
        AnswerResult::Incorrect
    );
    let first = g
        .submit_answer("ann", "capitol", "  genius   of WISCONSIN ")
        .unwrap();
    assert!(first.is_correct());
    let again = g
        .submit_answer("ann", "capitol", "Genius of Wisconsin")
        .unwrap();
    assert_eq!(
        again,
        AnswerResult::Correct {
            fired_effects: vec![]
        }
    );
    assert_eq!(g.player("ann").unwrap().qty("badge"), 1);
    assert_eq!(
        g.submit_answer("ann", "briefing", "x"),
        Err(EngineError::NoAnswerExpected("briefing".into()))
    );
}

#[test]
fn notes_count_and_need_position() {
    let mut g = game();
    g.join_game("ann").unwrap();
    assert_eq!(
        g.capture_note("ann", NoteKind::Photo, "a"),
        Err(EngineError::NoPosition)
    );
    let here = GeoPoint::new(1.0, 2.0).unwrap();
    g.update_position("ann", here).unwrap();
    let n = g.capture_note("ann", NoteKind::Photo, "a").unwrap();
    assert_eq!((n.seq, n.at, n.note_id.as_str()), (1, here, "ann-1"));
    g.capture_note("ann", NoteKind::Text, "b").unwrap();
    g.capture_note("ann", NoteKind::Audio, "c").unwrap();
    let three = RequirementExpr::all(vec![RequirementAtom::NotesAtLeast { n: 3 }]);
    assert!(eval_requirement(&three, g.player("ann").unwrap(), &g.world));
}

#[test]
fn other_players_excludes_requester() {
    let mut g = game();
    g.join_game("ann").unwrap();
    assert!(g.other_players("ann").unwrap().is_empty());
    g.join_game("bob").unwrap();
    g.join_game("cat").unwrap();
    assert!(g.other_players("ann").unwrap().is_empty());
    g.update_position("cat", at(1.0)).unwrap();
    g.update_position("ann", at(2.0)).unwrap();
    let others = g.other_players("ann").unwrap();
    assert_eq!(others, vec![("cat".to_string(), at(1.0))]);
    assert_eq!(
        g.other_players("zed"),
        Err(EngineError::UnknownPlayer("zed".into()))
    );
}

#[test]
fn replay_rebuilds_world() {
    let mut g = game();
    g.join_game("ann").unwrap();
    g.join_game("bob").unwrap();
    g.update_position("ann", at(43.0)).unwrap();
    g.pickup_item("ann", "mine", 2).unwrap();
    g.drop_item("ann", "iron_ore", 1).unwrap();
    g.update_position("bob", at(43.0)).unwrap();
    g.pickup_item("bob", "dropped-1", 1).unwrap();
    g.update_position("ann", at(43.01)).unwrap();
    let r = GameInstance::replay(spec(), g.events()).unwrap();
    assert_eq!(r.world, g.world);
    assert_eq!(r.events(), g.events());
    assert_eq!(r.export_events(), g.export_events());
}

#[test]
fn event_json_round_trips() {
    let mut g = game();
    g.join_game("ann").unwrap();
    g.update_position("ann", at(43.002)).unwrap();
    g.advance_dialog("ann", "smelter", Choice::START).unwrap();
    g.update_position("ann", at(43.01)).unwrap();
    g.capture_note("ann", NoteKind::Video, "v").unwrap();
    g.scan_code("ann", "CAPITOL").unwrap();
    g.submit_answer("ann", "capitol", "genius of wisconsin")
        .unwrap();
    g.drop_item("ann", "coal", 1).unwrap_err();
    assert_eq!(g.events().len(), 8);
    for e in g.events() {
        let json = serde_json::to_string(e).unwrap();
        let back: EngineEvent = serde_json::from_str(&json).unwrap();
        assert_eq!(&back, e, "{json}");
    }
    let line = g.export_events().lines().next().unwrap().to_string();
    assert!(line.starts_with("1 {"), "{line}");
}

#[test]
fn events_since_partitions_the_log() {
    let mut g = game();
    g.join_game("ann").unwrap();
    g.update_position("ann", at(43.0)).unwrap();
    g.update_position("ann", at(43.001)).unwrap();
    assert_eq!(g.events_since(0).len(), 3);
    assert!(g.events_since(g.last_seq()).is_empty());
    let mut joined = g.events_since(0)[..1].to_vec();
    joined.extend_from_slice(g.events_since(1));
    assert_eq!(joined, g.events());
}
