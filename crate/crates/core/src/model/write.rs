use std::fmt::Write as _;

use super::*;

/// Quotes a string for the game format.
pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Degrees with at least six fractional digits and never fewer than needed
/// to reproduce the exact value.
pub(crate) fn format_degrees(v: f64) -> String {
    let shortest = format!("{v}");
    let frac = shortest.split_once('.').map_or(0, |(_, f)| f.len());
    if frac < 6 {
        format!("{v:.6}")
    } else {
        shortest
    }
}

pub(crate) fn format_point(p: GeoPoint) -> String {
    format!("{}, {}", format_degrees(p.lat()), format_degrees(p.lon()))
}

fn format_effects(effects: &[Effect]) -> String {
    effects
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

fn format_trigger(t: &Trigger) -> String {
    match t {
        Trigger::Gps => "gps".into(),
        Trigger::Immediate => "immediate".into(),
        Trigger::Qr { code } => format!("qr({})", quote(code)),
    }
}

fn format_payload(p: &Payload) -> String {
    match p {
        Payload::ItemStack { item_id, qty } => format!("items({item_id}, {qty})"),
        Payload::Character { npc_id } => format!("character({npc_id})"),
        Payload::Plaque { plaque_id } => format!("plaque({plaque_id})"),
        Payload::Hazard { effects } => format!("hazard({})", format_effects(effects)),
    }
}

/// Writes a spec in canonical form; parsing the output yields an equal spec.
pub fn serialize_game(spec: &GameSpec) -> String {
    let mut out = String::new();
    // writing into a String cannot fail
    let w = &mut out;
    let _ = writeln!(w, "[game {}]", spec.game_id);
    let _ = writeln!(w, "name = {}", quote(&spec.name));
    let _ = writeln!(w, "description = {}", quote(&spec.description));
    let _ = writeln!(w, "quick_travel = {}", spec.quick_travel_allowed);

    for item in spec.items.values() {
        let _ = writeln!(w, "\n[item {}]", item.item_id);
        let _ = writeln!(w, "name = {}", quote(&item.name));
        let _ = writeln!(w, "description = {}", quote(&item.description));
        let _ = writeln!(w, "droppable = {}", item.droppable);
        match item.max_qty {
            MaxQty::Unbounded => {
                let _ = writeln!(w, "max_qty = unbounded");
            }
            MaxQty::Bounded(n) => {
                let _ = writeln!(w, "max_qty = {n}");
            }
        }
    }

    for ch in spec.characters.values() {
        let _ = writeln!(w, "\n[character {}]", ch.npc_id);
        let _ = writeln!(w, "name = {}", quote(&ch.name));
        let _ = writeln!(w, "opening = {}", ch.opening_node);
    }

    for plaque in spec.plaques.values() {
        let _ = writeln!(w, "\n[plaque {}]", plaque.plaque_id);
        let _ = writeln!(w, "title = {}", quote(&plaque.title));
        let _ = writeln!(w, "body = {}", quote(&plaque.body));
        if let Some(answer) = &plaque.answer {
            let _ = writeln!(w, "answer = {}", quote(&answer.expected));
            if !answer.on_correct.is_empty() {
                let _ = writeln!(w, "on_correct = {}", format_effects(&answer.on_correct));
            }
        }
        if let Some(tri) = &plaque.triangulation {
            let _ = writeln!(w, "triangulate = {}", format_point(tri.target));
            let _ = writeln!(w, "tolerance = {}", tri.tolerance_m);
            if !tri.on_success.is_empty() {
                let _ = writeln!(w, "on_triangulated = {}", format_effects(&tri.on_success));
            }
        }
    }

    for loc in &spec.locations {
        let _ = writeln!(w, "\n[location {}]", loc.location_id);
        let _ = writeln!(w, "name = {}", quote(&loc.name));
        let _ = writeln!(w, "center = {}", format_point(loc.center));
        let _ = writeln!(w, "radius = {}", loc.radius_m);
        let _ = writeln!(w, "trigger = {}", format_trigger(&loc.trigger));
        let _ = writeln!(w, "payload = {}", format_payload(&loc.payload));
        if !loc.visible_if.is_always() {
            let _ = writeln!(w, "visible_if = {}", loc.visible_if);
        }
    }

    for node in spec.dialogs.values() {
        let _ = writeln!(w, "\n[dialog {}]", node.node_id);
        let _ = writeln!(w, "speaker = {}", node.speaker);
        let _ = writeln!(w, "text = {}", quote(&node.text));
        for opt in &node.options {
            let _ = writeln!(w, "  [[option]]");
            let _ = writeln!(w, "  label = {}", quote(&opt.label));
            if !opt.visible_if.is_always() {
                let _ = writeln!(w, "  visible_if = {}", opt.visible_if);
            }
            if !opt.effects.is_empty() {
                let _ = writeln!(w, "  effects = {}", format_effects(&opt.effects));
            }
            match &opt.next {
                NextNode::End => {
                    let _ = writeln!(w, "  next = END");
                }
                NextNode::Node(id) => {
                    let _ = writeln!(w, "  next = {id}");
                }
            }
        }
    }

    for quest in spec.quests.values() {
        let _ = writeln!(w, "\n[quest {}]", quest.quest_id);
        let _ = writeln!(w, "name = {}", quote(&quest.name));
        if !quest.active_if.is_always() {
            let _ = writeln!(w, "active_if = {}", quest.active_if);
        }
        if !quest.complete_if.is_always() {
            let _ = writeln!(w, "complete_if = {}", quest.complete_if);
        }
        let _ = writeln!(w, "active_text = {}", quote(&quest.active_text));
        let _ = writeln!(w, "complete_text = {}", quote(&quest.complete_text));
    }
    out
}
