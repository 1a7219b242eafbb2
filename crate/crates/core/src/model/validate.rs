use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;

use super::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev} {} at {}: {}", self.code, self.path, self.message)
    }
}

struct Checker<'a> {
    spec: &'a GameSpec,
    location_ids: BTreeSet<&'a str>,
    out: Vec<Diagnostic>,
}

impl<'a> Checker<'a> {
    fn push(&mut self, severity: Severity, code: &'static str, path: &str, message: String) {
        self.out.push(Diagnostic {
            severity,
            code,
            path: path.to_string(),
            message,
        });
    }

    fn dangling(&mut self, path: &str, what: &str, id: &str) {
        self.push(
            Severity::Error,
            "DANGLING_REF",
            path,
            format!("{what} `{id}` does not exist"),
        );
    }

    fn bad_value(&mut self, path: &str, message: String) {
        self.push(Severity::Error, "BAD_VALUE", path, message);
    }

    fn id(&mut self, path: &str, id: &str) {
        if !is_valid_id(id) {
            self.push(
                Severity::Error,
                "BAD_ID",
                path,
                format!("invalid identifier {id:?}"),
            );
        }
    }

    fn keyed(&mut self, path: &str, key: &str, id: &str) {
        self.id(path, id);
        if key != id {
            self.push(
                Severity::Error,
                "ID_MISMATCH",
                path,
                format!("stored under `{key}` but named `{id}`"),
            );
        }
    }

    fn item(&mut self, path: &str, id: &str) {
        if !self.spec.items.contains_key(id) {
            self.dangling(path, "item", id);
        }
    }

    fn effects(&mut self, path: &str, effects: &[Effect]) {
        for (i, effect) in effects.iter().enumerate() {
            let p = format!("{path}[{i}]");
            match effect {
                Effect::GiveItem { item_id, qty } | Effect::TakeItem { item_id, qty } => {
                    self.item(&p, item_id);
                    if *qty == 0 {
                        self.bad_value(&p, "effect quantity must be at least 1".into());
                    }
                }
                Effect::SetFlag { flag } | Effect::ClearFlag { flag } => self.id(&p, flag),
            }
        }
    }

    fn expr(&mut self, path: &str, expr: &RequirementExpr) {
        for (g, group) in expr.any_of.iter().enumerate() {
            for (a, atom) in group.iter().enumerate() {
                let p = format!("{path}.any_of[{g}][{a}]");
                match atom {
                    RequirementAtom::HasItem { item_id, min_qty } => {
                        self.item(&p, item_id);
                        if *min_qty == 0 {
                            self.bad_value(&p, "min_qty must be at least 1".into());
                        }
                    }
                    RequirementAtom::LacksItem { item_id } => self.item(&p, item_id),
                    RequirementAtom::Visited { location_id } => {
                        if !self.location_ids.contains(location_id.as_str()) {
                            self.dangling(&p, "location", location_id);
                        }
                    }
                    RequirementAtom::TalkedTo { npc_id } => {
                        if !self.spec.characters.contains_key(npc_id) {
                            self.dangling(&p, "character", npc_id);
                        }
                    }
                    RequirementAtom::FlagSet { flag } => self.id(&p, flag),
                    RequirementAtom::QuestComplete { quest_id } => {
                        if !self.spec.quests.contains_key(quest_id) {
                            self.dangling(&p, "quest", quest_id);
                        }
                    }
                    RequirementAtom::NotesAtLeast { n } => {
                        if *n == 0 {
                            self.bad_value(&p, "note count must be at least 1".into());
                        }
                    }
                }
            }
        }
    }
}

/// Items whose HAS_ITEM atoms can ever hold, and dialog nodes that can ever be
/// shown, assuming every non-item condition can be met.
pub(crate) struct Reachability {
    pub obtainable: BTreeSet<String>,
    pub reached_nodes: BTreeSet<String>,
}

fn item_satisfiable(expr: &RequirementExpr, obtainable: &BTreeSet<String>) -> bool {
    expr.is_always()
        || expr.any_of.iter().any(|group| {
            group.iter().all(|atom| match atom {
                RequirementAtom::HasItem { item_id, .. } => obtainable.contains(item_id),
                _ => true,
            })
        })
}

fn takes_obtainable(effects: &[Effect], obtainable: &BTreeSet<String>) -> bool {
    effects.iter().all(|e| match e {
        Effect::TakeItem { item_id, .. } => obtainable.contains(item_id),
        _ => true,
    })
}

fn gives(effects: &[Effect], obtainable: &mut BTreeSet<String>) -> bool {
    let mut changed = false;
    for e in effects {
        if let Effect::GiveItem { item_id, .. } = e {
            changed |= obtainable.insert(item_id.clone());
        }
    }
    changed
}

/// Least fixpoint of the item-source graph: item stacks, hazard and puzzle
/// rewards and dialog options feed the obtainable set, which in turn opens
/// more gated locations and options.
pub(crate) fn sweep(spec: &GameSpec) -> Reachability {
    let mut obtainable = BTreeSet::new();
    let mut reached = BTreeSet::new();
    loop {
        let mut changed = false;
        for loc in &spec.locations {
            if !item_satisfiable(&loc.visible_if, &obtainable) {
                continue;
            }
            match &loc.payload {
                Payload::ItemStack { item_id, qty } if *qty > 0 => {
                    changed |= obtainable.insert(item_id.clone());
                }
                Payload::Hazard { effects } if takes_obtainable(effects, &obtainable) => {
                    changed |= gives(effects, &mut obtainable);
                }
                Payload::Plaque { plaque_id } => {
                    let Some(plaque) = spec.plaques.get(plaque_id) else {
                        continue;
                    };
                    let rewards = plaque
                        .answer
                        .iter()
                        .map(|a| &a.on_correct)
                        .chain(plaque.triangulation.iter().map(|t| &t.on_success));
                    for effects in rewards {
                        if takes_obtainable(effects, &obtainable) {
                            changed |= gives(effects, &mut obtainable);
                        }
                    }
                }
                _ => {}
            }
        }

        let mut queue: VecDeque<&str> = spec
            .characters
            .values()
            .map(|c| c.opening_node.as_str())
            .filter(|id| spec.dialogs.contains_key(*id))
            .collect();
        let mut seen: BTreeSet<&str> = queue.iter().copied().collect();
        while let Some(id) = queue.pop_front() {
            changed |= reached.insert(id.to_string());
            for opt in &spec.dialogs[id].options {
                if !item_satisfiable(&opt.visible_if, &obtainable)
                    || !takes_obtainable(&opt.effects, &obtainable)
                {
                    continue;
                }
                changed |= gives(&opt.effects, &mut obtainable);
                if let NextNode::Node(next) = &opt.next {
                    if spec.dialogs.contains_key(next) && seen.insert(next.as_str()) {
                        queue.push_back(next.as_str());
                    }
                }
            }
        }
        if !changed {
            return Reachability {
                obtainable,
                reached_nodes: reached,
            };
        }
    }
}

/// Static checks: ERROR for references that do not resolve, QR collisions
/// and out-of-range values; WARNING for unreachable dialog nodes and quests
/// that can never be completed for lack of items.
pub fn validate_game(spec: &GameSpec) -> Vec<Diagnostic> {
    let mut c = Checker {
        spec,
        location_ids: spec
            .locations
            .iter()
            .map(|l| l.location_id.as_str())
            .collect(),
        out: Vec::new(),
    };
    c.id("game_id", &spec.game_id);

    for (key, item) in &spec.items {
        let path = format!("items.{key}");
        c.keyed(&path, key, &item.item_id);
        if item.max_qty == MaxQty::Bounded(0) {
            c.bad_value(&path, "max_qty must be at least 1".into());
        }
    }

    for (key, ch) in &spec.characters {
        let path = format!("characters.{key}");
        c.keyed(&path, key, &ch.npc_id);
        if !spec.dialogs.contains_key(&ch.opening_node) {
            c.dangling(&format!("{path}.opening"), "dialog node", &ch.opening_node);
        }
    }

    for (key, plaque) in &spec.plaques {
        let path = format!("plaques.{key}");
        c.keyed(&path, key, &plaque.plaque_id);
        if let Some(answer) = &plaque.answer {
            if answer.expected.trim().is_empty() {
                c.bad_value(&format!("{path}.answer"), "expected answer is empty".into());
            }
            c.effects(&format!("{path}.on_correct"), &answer.on_correct);
        }
        if let Some(tri) = &plaque.triangulation {
            if !(tri.tolerance_m > 0.0 && tri.tolerance_m.is_finite()) {
                c.bad_value(
                    &format!("{path}.tolerance"),
                    "tolerance must be positive".into(),
                );
            }
            c.effects(&format!("{path}.on_triangulated"), &tri.on_success);
        }
    }

    let mut ids = BTreeSet::new();
    let mut qr_codes: BTreeMap<&str, &str> = BTreeMap::new();
    for loc in &spec.locations {
        let path = format!("locations.{}", loc.location_id);
        c.id(&path, &loc.location_id);
        if !ids.insert(loc.location_id.as_str()) {
            c.push(
                Severity::Error,
                "DUPLICATE_ID",
                &path,
                "location id used twice".into(),
            );
        }
        if !(loc.radius_m > 0.0 && loc.radius_m.is_finite()) {
            c.bad_value(&format!("{path}.radius"), "radius must be positive".into());
        }
        if let Trigger::Qr { code } = &loc.trigger {
            if code.is_empty() {
                c.bad_value(&format!("{path}.trigger"), "QR code is empty".into());
            } else if let Some(first) = qr_codes.insert(code, &loc.location_id) {
                qr_codes.insert(code, first);
                c.push(
                    Severity::Error,
                    "QR_COLLISION",
                    &format!("{path}.trigger"),
                    format!("code {code:?} is already used by `{first}`"),
                );
            }
        }
        let ppath = format!("{path}.payload");
        match &loc.payload {
            Payload::ItemStack { item_id, .. } => c.item(&ppath, item_id),
            Payload::Character { npc_id } => {
                if !spec.characters.contains_key(npc_id) {
                    c.dangling(&ppath, "character", npc_id);
                }
            }
            Payload::Plaque { plaque_id } => {
                if !spec.plaques.contains_key(plaque_id) {
                    c.dangling(&ppath, "plaque", plaque_id);
                }
            }
            Payload::Hazard { effects } => c.effects(&ppath, effects),
        }
        c.expr(&format!("{path}.visible_if"), &loc.visible_if);
    }

    for (key, node) in &spec.dialogs {
        let path = format!("dialogs.{key}");
        c.keyed(&path, key, &node.node_id);
        if node.node_id == "END" {
            c.push(Severity::Error, "BAD_ID", &path, "`END` is reserved".into());
        }
        if !spec.characters.contains_key(&node.speaker) {
            c.dangling(&format!("{path}.speaker"), "character", &node.speaker);
        }
        for (i, opt) in node.options.iter().enumerate() {
            let opath = format!("{path}.options[{i}]");
            c.expr(&format!("{opath}.visible_if"), &opt.visible_if);
            c.effects(&format!("{opath}.effects"), &opt.effects);
            if let NextNode::Node(next) = &opt.next {
                if !spec.dialogs.contains_key(next) {
                    c.dangling(&format!("{opath}.next"), "dialog node", next);
                }
            }
        }
    }

    for (key, quest) in &spec.quests {
        let path = format!("quests.{key}");
        c.keyed(&path, key, &quest.quest_id);
        c.expr(&format!("{path}.active_if"), &quest.active_if);
        c.expr(&format!("{path}.complete_if"), &quest.complete_if);
    }

    let reach = sweep(spec);
    for key in spec.dialogs.keys() {
        if !reach.reached_nodes.contains(key) {
            c.push(
                Severity::Warning,
                "UNREACHABLE",
                &format!("dialogs.{key}"),
                "no conversation can reach this node".into(),
            );
        }
    }
    for (key, quest) in &spec.quests {
        if !item_satisfiable(&quest.complete_if, &reach.obtainable) {
            c.push(
                Severity::Warning,
                "UNOBTAINABLE",
                &format!("quests.{key}.complete_if"),
                "every way to complete this quest needs an item no one can obtain".into(),
            );
        }
    }
    c.out
}
