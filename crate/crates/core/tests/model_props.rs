//! Parser and writer properties over generated games.

use std::collections::BTreeMap;

use locus_core::geo::GeoPoint;
use locus_core::model::*;
use proptest::prelude::*;

fn id() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => "[a-z][a-z0-9_]{0,6}",
        1 => "[0-9]{1,3}",
        1 => "[A-Z][a-z]{0,3}[.-][a-z0-9]{1,3}",
    ]
    .prop_filter("reserved", |s| s != "END")
}

fn text() -> impl Strategy<Value = String> {
    prop_oneof!["[ -~]{0,20}", "[\\PC\n\t\r\"\\\\#]{0,20}",]
}

fn point() -> impl Strategy<Value = GeoPoint> {
    (-90.0f64..=90.0, -540.0f64..540.0).prop_map(|(lat, lon)| GeoPoint::new(lat, lon).unwrap())
}

fn effect() -> impl Strategy<Value = Effect> {
    prop_oneof![
        (id(), 1u32..1000).prop_map(|(item_id, qty)| Effect::GiveItem { item_id, qty }),
        (id(), 1u32..1000).prop_map(|(item_id, qty)| Effect::TakeItem { item_id, qty }),
        id().prop_map(|flag| Effect::SetFlag { flag }),
        id().prop_map(|flag| Effect::ClearFlag { flag }),
    ]
}

fn atom() -> impl Strategy<Value = RequirementAtom> {
    prop_oneof![
        (id(), 1u32..50)
            .prop_map(|(item_id, min_qty)| RequirementAtom::HasItem { item_id, min_qty }),
        id().prop_map(|item_id| RequirementAtom::LacksItem { item_id }),
        id().prop_map(|location_id| RequirementAtom::Visited { location_id }),
        id().prop_map(|npc_id| RequirementAtom::TalkedTo { npc_id }),
        id().prop_map(|flag| RequirementAtom::FlagSet { flag }),
        id().prop_map(|quest_id| RequirementAtom::QuestComplete { quest_id }),
        (1u32..9).prop_map(|n| RequirementAtom::NotesAtLeast { n }),
    ]
}

fn expr() -> impl Strategy<Value = RequirementExpr> {
    prop::collection::vec(prop::collection::vec(atom(), 0..3), 0..3)
        .prop_map(|any_of| RequirementExpr { any_of })
}

fn location() -> impl Strategy<Value = LocationSpec> {
    let trigger = prop_oneof![
        Just(Trigger::Gps),
        Just(Trigger::Immediate),
        "[ -~]{1,12}".prop_map(|code| Trigger::Qr { code }),
    ];
    let payload = prop_oneof![
        (id(), 0u32..100).prop_map(|(item_id, qty)| Payload::ItemStack { item_id, qty }),
        id().prop_map(|npc_id| Payload::Character { npc_id }),
        id().prop_map(|plaque_id| Payload::Plaque { plaque_id }),
        prop::collection::vec(effect(), 0..3).prop_map(|effects| Payload::Hazard { effects }),
    ];
    (
        id(),
        text(),
        point(),
        0.001f64..5000.0,
        trigger,
        payload,
        expr(),
    )
        .prop_map(
            |(location_id, name, center, radius_m, trigger, payload, visible_if)| LocationSpec {
                location_id,
                name,
                center,
                radius_m,
                trigger,
                payload,
                visible_if,
            },
        )
}

fn plaque() -> impl Strategy<Value = PlaqueSpec> {
    let answer = prop::option::of(
        (
            text().prop_filter("blank answer", |s| !s.trim().is_empty()),
            prop::collection::vec(effect(), 0..3),
        )
            .prop_map(|(expected, on_correct)| AnswerSpec {
                expected,
                on_correct,
            }),
    );
    let tri = prop::option::of(
        (
            point(),
            0.5f64..500.0,
            prop::collection::vec(effect(), 0..3),
        )
            .prop_map(|(target, tolerance_m, on_success)| TriangulationSpec {
                target,
                tolerance_m,
                on_success,
            }),
    );
    (id(), text(), text(), answer, tri).prop_map(
        |(plaque_id, title, body, answer, triangulation)| PlaqueSpec {
            plaque_id,
            title,
            body,
            answer,
            triangulation,
        },
    )
}

fn dialog() -> impl Strategy<Value = DialogNode> {
    let option = (
        text(),
        expr(),
        prop::collection::vec(effect(), 0..3),
        prop::option::of(id()),
    )
        .prop_map(|(label, visible_if, effects, next)| DialogOption {
            label,
            visible_if,
            effects,
            next: next.map_or(NextNode::End, NextNode::Node),
        });
    (id(), id(), text(), prop::collection::vec(option, 0..3)).prop_map(
        |(node_id, speaker, text, options)| DialogNode {
            node_id,
            speaker,
            text,
            options,
        },
    )
}

fn game() -> impl Strategy<Value = GameSpec> {
    let items = prop::collection::vec(
        (
            id(),
            text(),
            text(),
            any::<bool>(),
            prop::option::of(1u32..100),
        ),
        0..4,
    );
    let chars = prop::collection::vec((id(), text(), id()), 0..3);
    let quests = prop::collection::vec((id(), text(), expr(), expr(), text(), text()), 0..3);
    (
        (id(), text(), text(), any::<bool>()),
        items,
        chars,
        prop::collection::vec(plaque(), 0..3),
        prop::collection::vec(location(), 0..5),
        prop::collection::vec(dialog(), 0..4),
        quests,
    )
        .prop_map(
            |(head, items, chars, plaques, locations, dialogs, quests)| {
                let mut g = GameSpec::new(head.0, head.1);
                g.description = head.2;
                g.quick_travel_allowed = head.3;
                for (item_id, name, description, droppable, max) in items {
                    g.items.insert(
                        item_id.clone(),
                        ItemSpec {
                            item_id,
                            name,
                            description,
                            droppable,
                            max_qty: max.map_or(MaxQty::Unbounded, MaxQty::Bounded),
                        },
                    );
                }
                for (npc_id, name, opening_node) in chars {
                    g.characters.insert(
                        npc_id.clone(),
                        CharacterSpec {
                            npc_id,
                            name,
                            opening_node,
                        },
                    );
                }
                g.plaques = plaques
                    .into_iter()
                    .map(|p| (p.plaque_id.clone(), p))
                    .collect();
                let mut seen = BTreeMap::new();
                for l in locations {
                    seen.entry(l.location_id.clone()).or_insert(l.clone());
                }
                g.locations = seen.into_values().collect();
                g.dialogs = dialogs
                    .into_iter()
                    .map(|d| (d.node_id.clone(), d))
                    .collect();
                for (quest_id, name, active_if, complete_if, active_text, complete_text) in quests {
                    g.quests.insert(
                        quest_id.clone(),
                        QuestSpec {
                            quest_id,
                            name,
                            active_if,
                            complete_if,
                            active_text,
                            complete_text,
                        },
                    );
                }
                g
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn serialize_then_parse_is_identity(g in game()) {
        let text = serialize_game(&g);
        let back = parse_game(&text).map_err(|e| TestCaseError::fail(format!("{e:?}\n{text}")))?;
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(serialize_game(&back), text);
    }

    #[test]
    fn parser_is_total_on_arbitrary_bytes(bytes in prop::collection::vec(any::<u8>(), 0..400)) {
        let _ = parse_game_bytes(&bytes);
    }

    #[test]
    fn parser_is_total_on_mangled_games(g in game(), cut in 0usize..2000, junk in "[\\[\\]()=,&|!\"a-z0-9 \n]{0,8}") {
        let mut text = serialize_game(&g);
        let at = text.char_indices().map(|(i, _)| i).nth(cut).unwrap_or(text.len());
        text.insert_str(at, &junk);
        if let Ok(spec) = parse_game(&text) {
            let _ = validate_game(&spec);
        }
    }

    #[test]
    fn validation_is_total(g in game()) {
        for d in validate_game(&g) {
            prop_assert!(!d.path.is_empty());
        }
    }
}

#[test]
fn errors_are_positioned_and_sorted() {
    let src = "[game g]\nname = 1\n[item i]\nname = \"I\"\nmax_qty = 0\n[location l]\nname=\"L\"\n";
    let errs = parse_game(src).unwrap_err();
    assert!(errs.len() >= 3);
    assert!(errs
        .windows(2)
        .all(|w| (w[0].line, w[0].column) <= (w[1].line, w[1].column)));
    assert!(errs.iter().all(|e| e.line >= 1 && e.column >= 1));
}
