//! Deterministic game runtime.
//!
//! A [`GameInstance`] owns one game's shared world. Every mutating call is
//! applied in full or not at all, and every accepted command is appended to
//! the event log; replaying the actions of that log against a fresh instance
//! rebuilds an identical world. The engine has no clock: callers order events.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::geo::{self, geo_distance, within_range, GeoPoint};
use crate::model::{
    is_valid_id, validate_game, Effect, GameSpec, LocationSpec, NextNode, Payload, RequirementAtom,
    RequirementExpr, Severity, Trigger,
};

mod error;
mod event;
mod state;

pub use error::EngineError;
pub use event::{Action, EngineEvent, LogEntry, Outcome};
pub use state::{
    AnswerResult, Choice, DialogCursor, DialogStep, DialogView, NearbyEntry, NoteKind, NoteRecord,
    PickupResult, PlayerState, PlayerView, QuestStatus, StartTag, TriggerReport, WorldState,
};

/// Geofence radius given to locations created by dropping items.
pub const DROP_RADIUS_M: f64 = 10.0;

/// Evaluates a requirement for one player. Pure: the same inputs always give
/// the same answer. All current atoms read player state only.
pub fn eval_requirement(expr: &RequirementExpr, player: &PlayerState, _world: &WorldState) -> bool {
    expr.any_of
        .iter()
        .any(|group| group.iter().all(|atom| eval_atom(atom, player)))
        || expr.any_of.is_empty()
}

fn eval_atom(atom: &RequirementAtom, player: &PlayerState) -> bool {
    match atom {
        RequirementAtom::HasItem { item_id, min_qty } => player.qty(item_id) >= *min_qty,
        RequirementAtom::LacksItem { item_id } => player.qty(item_id) == 0,
        RequirementAtom::Visited { location_id } => player.visited.contains(location_id),
        RequirementAtom::TalkedTo { npc_id } => player.talked_to.contains(npc_id),
        RequirementAtom::FlagSet { flag } => player.flags.contains(flag),
        RequirementAtom::QuestComplete { quest_id } => player.completed_quests.contains(quest_id),
        RequirementAtom::NotesAtLeast { n } => player.notes.len() as u64 >= u64::from(*n),
    }
}

/// Trim, lowercase and collapse whitespace runs.
pub fn normalize_answer(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn apply_effects(
    spec: &GameSpec,
    player: &mut PlayerState,
    effects: &[Effect],
) -> Result<(), String> {
    let mut next = player.clone();
    for effect in effects {
        match effect {
            Effect::GiveItem { item_id, qty } => {
                let item = spec
                    .items
                    .get(item_id)
                    .ok_or_else(|| format!("unknown item `{item_id}`"))?;
                let held = next.qty(item_id);
                let total = held
                    .checked_add(*qty)
                    .filter(|t| item.max_qty.allows(*t))
                    .ok_or_else(|| format!("giving {qty} `{item_id}` exceeds the maximum"))?;
                next.inventory.insert(item_id.clone(), total);
            }
            Effect::TakeItem { item_id, qty } => {
                let held = next.qty(item_id);
                if held < *qty {
                    return Err(format!("cannot take {qty} `{item_id}`, holding {held}"));
                }
                if held == *qty {
                    next.inventory.remove(item_id);
                } else {
                    next.inventory.insert(item_id.clone(), held - qty);
                }
            }
            Effect::SetFlag { flag } => {
                next.flags.insert(flag.clone());
            }
            Effect::ClearFlag { flag } => {
                next.flags.remove(flag);
            }
        }
    }
    *player = next;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameInstance {
    spec: Arc<GameSpec>,
    pub world: WorldState,
    event_log: Vec<EngineEvent>,
}

/// Side effects collected while an operation runs, committed to the log at the end.
#[derive(Default)]
struct Pending {
    failures: Vec<(String, Vec<Effect>, String)>,
}

impl GameInstance {
    /// Instantiates a game; refuses specs with ERROR diagnostics.
    pub fn new(spec: Arc<GameSpec>) -> Result<Self, EngineError> {
        let errors: Vec<_> = validate_game(&spec)
            .into_iter()
            .filter(|d| d.severity == Severity::Error)
            .collect();
        if !errors.is_empty() {
            return Err(EngineError::InvalidSpec(errors));
        }
        let stock = spec
            .locations
            .iter()
            .filter_map(|l| match &l.payload {
                Payload::ItemStack { qty, .. } => Some((l.location_id.clone(), *qty)),
                _ => None,
            })
            .collect();
        Ok(GameInstance {
            spec,
            world: WorldState {
                stock,
                ..WorldState::default()
            },
            event_log: Vec::new(),
        })
    }

    /// Reassembles an instance from persisted parts. The caller vouches that
    /// `world` and `event_log` belong to `spec`.
    pub fn from_parts(
        spec: Arc<GameSpec>,
        world: WorldState,
        event_log: Vec<EngineEvent>,
    ) -> Result<Self, EngineError> {
        let mut instance = GameInstance::new(spec)?;
        instance.world = world;
        instance.event_log = event_log;
        Ok(instance)
    }

    pub fn spec(&self) -> &Arc<GameSpec> {
        &self.spec
    }

    pub fn events(&self) -> &[EngineEvent] {
        &self.event_log
    }

    /// Sequence number of the newest event, 0 when the log is empty.
    pub fn last_seq(&self) -> u64 {
        self.event_log.last().map_or(0, |e| e.seq)
    }

    /// Events with `seq > since`, oldest first.
    pub fn events_since(&self, since: u64) -> &[EngineEvent] {
        let start = self.event_log.partition_point(|e| e.seq <= since);
        &self.event_log[start..]
    }

    /// The log as line-delimited JSON, each line prefixed by its sequence number.
    pub fn export_events(&self) -> String {
        let mut out = String::new();
        for event in &self.event_log {
            // events are plain data and always serialize
            let json = serde_json::to_string(event).unwrap_or_default();
            out.push_str(&format!("{} {}\n", event.seq, json));
        }
        out
    }

    pub fn player(&self, player_id: &str) -> Result<&PlayerState, EngineError> {
        self.world
            .players
            .get(player_id)
            .ok_or_else(|| EngineError::UnknownPlayer(player_id.to_string()))
    }

    fn player_mut(&mut self, player_id: &str) -> Result<&mut PlayerState, EngineError> {
        self.world
            .players
            .get_mut(player_id)
            .ok_or_else(|| EngineError::UnknownPlayer(player_id.to_string()))
    }

    /// Authored locations followed by dropped ones.
    pub fn all_locations(&self) -> impl Iterator<Item = &LocationSpec> {
        self.spec.locations.iter().chain(self.world.dropped.iter())
    }

    pub fn location(&self, location_id: &str) -> Option<&LocationSpec> {
        self.all_locations().find(|l| l.location_id == location_id)
    }

    fn visible(&self, loc: &LocationSpec, player: &PlayerState) -> bool {
        eval_requirement(&loc.visible_if, player, &self.world)
    }

    /// Whether the player may act on the location's payload right now.
    fn interactable(&self, loc: &LocationSpec, player: &PlayerState) -> bool {
        if !player.visited.contains(&loc.location_id) || !self.visible(loc, player) {
            return false;
        }
        match loc.trigger {
            Trigger::Qr { .. } | Trigger::Immediate => true,
            Trigger::Gps => player.position.is_some_and(|p| within_range(p, loc)),
        }
    }

    fn append(&mut self, player_id: &str, entry: LogEntry) {
        let seq = self.last_seq() + 1;
        self.event_log.push(EngineEvent {
            seq,
            player_id: player_id.to_string(),
            entry,
        });
    }

    fn commit(&mut self, player_id: &str, action: Action, outcome: Outcome, pending: Pending) {
        self.append(player_id, LogEntry::Action { action, outcome });
        for (source, effects, reason) in pending.failures {
            self.append(
                player_id,
                LogEntry::EffectFailed {
                    source,
                    effects,
                    reason,
                },
            );
        }
    }

    /// Latches every quest whose completion condition now holds. Runs to a
    /// fixpoint because completions can unlock `quest(..)` atoms.
    fn latch_quests(&mut self, player_id: &str) {
        let spec = Arc::clone(&self.spec);
        let Some(player) = self.world.players.get_mut(player_id) else {
            return;
        };
        loop {
            let newly: Vec<String> = spec
                .quests
                .values()
                .filter(|q| !player.completed_quests.contains(&q.quest_id))
                .filter(|q| {
                    q.complete_if
                        .any_of
                        .iter()
                        .any(|g| g.iter().all(|a| eval_atom(a, player)))
                        || q.complete_if.any_of.is_empty()
                })
                .map(|q| q.quest_id.clone())
                .collect();
            if newly.is_empty() {
                return;
            }
            player.completed_quests.extend(newly);
        }
    }

    /// Fires a hazard's effects atomically; failures are queued for the log.
    fn fire(
        &mut self,
        player_id: &str,
        source: String,
        effects: &[Effect],
        fired: &mut Vec<Effect>,
        pending: &mut Pending,
    ) {
        let spec = Arc::clone(&self.spec);
        let Some(player) = self.world.players.get_mut(player_id) else {
            return;
        };
        match apply_effects(&spec, player, effects) {
            Ok(()) => fired.extend_from_slice(effects),
            Err(reason) => pending.failures.push((source, effects.to_vec(), reason)),
        }
    }

    fn nearby_for(&self, player: &PlayerState) -> Vec<NearbyEntry> {
        let Some(p) = player.position else {
            return Vec::new();
        };
        let mut nearby: Vec<NearbyEntry> = self
            .all_locations()
            .filter(|l| l.trigger == Trigger::Gps && !matches!(l.payload, Payload::Hazard { .. }))
            .filter(|l| self.visible(l, player))
            .filter_map(|l| {
                let d = geo_distance(p, l.center);
                (d <= l.radius_m).then(|| NearbyEntry {
                    location_id: l.location_id.clone(),
                    distance_m: d,
                })
            })
            .collect();
        nearby.sort_by(|a, b| {
            a.distance_m
                .total_cmp(&b.distance_m)
                .then_with(|| a.location_id.cmp(&b.location_id))
        });
        nearby
    }

    /// Nearby objects for the player's current position, without side effects.
    pub fn nearby(&self, player_id: &str) -> Result<Vec<NearbyEntry>, EngineError> {
        Ok(self.nearby_for(self.player(player_id)?))
    }

    /// Visible GPS geofences containing `p`, nearest first.
    fn occupied(&self, player: &PlayerState, p: GeoPoint) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .all_locations()
            .filter(|l| l.trigger == Trigger::Gps && self.visible(l, player))
            .filter_map(|l| {
                let d = geo_distance(p, l.center);
                (d <= l.radius_m).then(|| (l.location_id.clone(), d))
            })
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    // ---------------------------------------------------------------- ops

    pub fn join_game(&mut self, player_id: &str) -> Result<PlayerState, EngineError> {
        if !is_valid_id(player_id) {
            return Err(EngineError::InvalidId(player_id.to_string()));
        }
        if self.world.players.contains_key(player_id) {
            return Err(EngineError::DuplicatePlayer(player_id.to_string()));
        }
        let mut player = PlayerState::new(player_id);
        let mut delivered = Vec::new();
        let mut fired = Vec::new();
        let mut pending = Pending::default();
        let spec = Arc::clone(&self.spec);
        let immediate: Vec<&LocationSpec> = spec
            .locations
            .iter()
            .filter(|l| l.trigger == Trigger::Immediate)
            .collect();
        self.world
            .players
            .insert(player_id.to_string(), player.clone());
        for loc in immediate {
            player = self.world.players[player_id].clone();
            if !self.visible(loc, &player) {
                continue;
            }
            delivered.push(loc.location_id.clone());
            self.player_mut(player_id)?
                .visited
                .insert(loc.location_id.clone());
            if let Payload::Hazard { effects } = &loc.payload {
                let source = format!("locations.{}", loc.location_id);
                self.fire(player_id, source, effects, &mut fired, &mut pending);
            }
        }
        self.latch_quests(player_id);
        self.commit(
            player_id,
            Action::Join,
            Outcome::Joined {
                delivered,
                fired_effects: fired,
            },
            pending,
        );
        Ok(self.world.players[player_id].clone())
    }

    fn move_player(
        &mut self,
        player_id: &str,
        p: GeoPoint,
        pending: &mut Pending,
    ) -> Result<TriggerReport, EngineError> {
        let before = self.player(player_id)?.clone();
        let entered: Vec<(String, f64)> = self
            .occupied(&before, p)
            .into_iter()
            .filter(|(id, _)| !before.inside.contains(id))
            .collect();
        {
            let player = self.player_mut(player_id)?;
            player.position = Some(p);
        }
        let mut report = TriggerReport::default();
        for (id, _) in entered {
            self.player_mut(player_id)?.visited.insert(id.clone());
            report.newly_visited.push(id.clone());
            let hazard = match self.location(&id).map(|l| &l.payload) {
                Some(Payload::Hazard { effects }) => Some(effects.clone()),
                _ => None,
            };
            if let Some(effects) = hazard {
                report.hazards_hit.push(id.clone());
                let source = format!("locations.{id}");
                self.fire(
                    player_id,
                    source,
                    &effects,
                    &mut report.fired_effects,
                    pending,
                );
            }
        }
        let player = self.player(player_id)?.clone();
        let inside: BTreeSet<String> = self
            .occupied(&player, p)
            .into_iter()
            .map(|(id, _)| id)
            .collect();
        self.player_mut(player_id)?.inside = inside;
        self.latch_quests(player_id);
        report.nearby = self.nearby_for(self.player(player_id)?);
        Ok(report)
    }

    /// Moves the player. Geofences entered on this update are visited;
    /// hazards fire once per entry.
    pub fn update_position(
        &mut self,
        player_id: &str,
        p: GeoPoint,
    ) -> Result<TriggerReport, EngineError> {
        let mut pending = Pending::default();
        let report = self.move_player(player_id, p, &mut pending)?;
        self.commit(
            player_id,
            Action::Move { to: p },
            Outcome::Report(report.clone()),
            pending,
        );
        Ok(report)
    }

    /// Unlocks a QR location regardless of position. Unknown or hidden codes
    /// give an empty report and change nothing.
    pub fn scan_code(&mut self, player_id: &str, code: &str) -> Result<TriggerReport, EngineError> {
        let player = self.player(player_id)?;
        let found = self
            .spec
            .locations
            .iter()
            .find(|l| matches!(&l.trigger, Trigger::Qr { code: c } if c == code))
            .filter(|l| self.visible(l, player))
            .cloned();
        let Some(loc) = found else {
            return Ok(TriggerReport::default());
        };
        let mut pending = Pending::default();
        let mut report = TriggerReport::default();
        self.player_mut(player_id)?
            .visited
            .insert(loc.location_id.clone());
        report.newly_visited.push(loc.location_id.clone());
        if let Payload::Hazard { effects } = &loc.payload {
            report.hazards_hit.push(loc.location_id.clone());
            let source = format!("locations.{}", loc.location_id);
            self.fire(
                player_id,
                source,
                effects,
                &mut report.fired_effects,
                &mut pending,
            );
        }
        self.latch_quests(player_id);
        report.nearby = self.nearby_for(self.player(player_id)?);
        self.commit(
            player_id,
            Action::Scan {
                code: code.to_string(),
            },
            Outcome::Report(report.clone()),
            pending,
        );
        Ok(report)
    }

    /// Moves the player to a location's center without walking there.
    pub fn quick_travel(
        &mut self,
        player_id: &str,
        location_id: &str,
    ) -> Result<TriggerReport, EngineError> {
        let player = self.player(player_id)?;
        if !self.spec.quick_travel_allowed {
            return Err(EngineError::QuickTravelDisabled);
        }
        let loc = self
            .location(location_id)
            .ok_or_else(|| EngineError::UnknownLocation(location_id.to_string()))?;
        if !self.visible(loc, player) {
            return Err(EngineError::NotVisible(location_id.to_string()));
        }
        let center = loc.center;
        let mut pending = Pending::default();
        let report = self.move_player(player_id, center, &mut pending)?;
        self.commit(
            player_id,
            Action::QuickTravel {
                location_id: location_id.to_string(),
            },
            Outcome::Report(report.clone()),
            pending,
        );
        Ok(report)
    }

    /// Moves up to `qty` units from a location into the inventory, clamped
    /// by remaining stock and the item's maximum.
    pub fn pickup_item(
        &mut self,
        player_id: &str,
        location_id: &str,
        qty: u32,
    ) -> Result<PickupResult, EngineError> {
        let player = self.player(player_id)?;
        if qty == 0 {
            return Err(EngineError::BadQty);
        }
        let loc = self
            .location(location_id)
            .ok_or_else(|| EngineError::UnknownLocation(location_id.to_string()))?;
        if !self.interactable(loc, player) {
            return Err(EngineError::NotHere(location_id.to_string()));
        }
        let Payload::ItemStack { item_id, .. } = &loc.payload else {
            return Err(EngineError::NotAnItem(location_id.to_string()));
        };
        let item_id = item_id.clone();
        let stock = self.world.stock.get(location_id).copied().unwrap_or(0);
        if stock == 0 {
            return Err(EngineError::EmptyStock(location_id.to_string()));
        }
        let held = player.qty(&item_id);
        let headroom = self.spec.items[&item_id].max_qty.headroom(held);
        let taken = qty.min(stock).min(headroom);
        if taken == 0 {
            return Err(EngineError::InventoryFull(item_id));
        }

        let remaining = stock - taken;
        self.world.stock.insert(location_id.to_string(), remaining);
        self.player_mut(player_id)?
            .inventory
            .insert(item_id.clone(), held + taken);
        if remaining == 0 {
            if let Some(idx) = self
                .world
                .dropped
                .iter()
                .position(|l| l.location_id == location_id)
            {
                self.world.dropped.remove(idx);
                self.world.stock.remove(location_id);
                for p in self.world.players.values_mut() {
                    p.inside.remove(location_id);
                }
            }
        }
        self.latch_quests(player_id);
        self.commit(
            player_id,
            Action::Pickup {
                location_id: location_id.to_string(),
                qty,
            },
            Outcome::PickedUp {
                location_id: location_id.to_string(),
                item_id,
                taken,
            },
            Pending::default(),
        );
        Ok(PickupResult {
            taken,
            inventory: self.player(player_id)?.inventory.clone(),
        })
    }

    /// Leaves items at the player's position as a new shared location.
    pub fn drop_item(
        &mut self,
        player_id: &str,
        item_id: &str,
        qty: u32,
    ) -> Result<String, EngineError> {
        let player = self.player(player_id)?;
        if qty == 0 {
            return Err(EngineError::BadQty);
        }
        let item = self
            .spec
            .items
            .get(item_id)
            .ok_or_else(|| EngineError::UnknownItem(item_id.to_string()))?;
        if !item.droppable {
            return Err(EngineError::NotDroppable(item_id.to_string()));
        }
        let position = player.position.ok_or(EngineError::NoPosition)?;
        let held = player.qty(item_id);
        if held < qty {
            return Err(EngineError::InsufficientQty(item_id.to_string()));
        }

        let location_id = loop {
            self.world.drops_made += 1;
            let candidate = format!("dropped-{}", self.world.drops_made);
            if self.location(&candidate).is_none() {
                break candidate;
            }
        };
        let loc = LocationSpec {
            location_id: location_id.clone(),
            name: item.name.clone(),
            center: position,
            radius_m: DROP_RADIUS_M,
            trigger: Trigger::Gps,
            payload: Payload::ItemStack {
                item_id: item_id.to_string(),
                qty,
            },
            visible_if: RequirementExpr::always(),
        };
        {
            let player = self.player_mut(player_id)?;
            if held == qty {
                player.inventory.remove(item_id);
            } else {
                player.inventory.insert(item_id.to_string(), held - qty);
            }
        }
        // anyone already standing on the spot has it in reach without moving
        for p in self.world.players.values_mut() {
            if p.position.is_some_and(|pos| within_range(pos, &loc)) {
                p.visited.insert(location_id.clone());
                p.inside.insert(location_id.clone());
            }
        }
        self.world.stock.insert(location_id.clone(), qty);
        self.world.dropped.push(loc);
        let ids: Vec<String> = self.world.players.keys().cloned().collect();
        for id in ids {
            self.latch_quests(&id);
        }
        self.commit(
            player_id,
            Action::Drop {
                item_id: item_id.to_string(),
                qty,
            },
            Outcome::Dropped {
                location_id: location_id.clone(),
            },
            Pending::default(),
        );
        Ok(location_id)
    }

    fn dialog_view(&self, npc_id: &str, node_id: &str, player: &PlayerState) -> DialogView {
        let node = &self.spec.dialogs[node_id];
        DialogView {
            npc_id: npc_id.to_string(),
            node_id: node_id.to_string(),
            speaker: node.speaker.clone(),
            text: node.text.clone(),
            options: node
                .options
                .iter()
                .filter(|o| eval_requirement(&o.visible_if, player, &self.world))
                .map(|o| o.label.clone())
                .collect(),
        }
    }

    fn enter_node(
        &mut self,
        player_id: &str,
        npc_id: &str,
        node_id: &str,
    ) -> Result<DialogView, EngineError> {
        let ends_here = self.spec.dialogs[node_id].options.is_empty();
        let player = self.player_mut(player_id)?;
        player.current_dialog = (!ends_here).then(|| DialogCursor {
            npc_id: npc_id.to_string(),
            node_id: node_id.to_string(),
        });
        Ok(self.dialog_view(npc_id, node_id, self.player(player_id)?))
    }

    /// Starts a conversation or picks one of the currently visible options.
    pub fn advance_dialog(
        &mut self,
        player_id: &str,
        npc_id: &str,
        choice: Choice,
    ) -> Result<DialogStep, EngineError> {
        let player = self.player(player_id)?;
        let npc = self
            .spec
            .characters
            .get(npc_id)
            .ok_or_else(|| EngineError::UnknownNpc(npc_id.to_string()))?;
        let action = Action::Dialog {
            npc_id: npc_id.to_string(),
            choice,
        };
        let index = match choice {
            Choice::Start(_) => {
                let reachable = self.all_locations().any(|l| {
                    matches!(&l.payload, Payload::Character { npc_id: n } if n == npc_id)
                        && self.interactable(l, player)
                });
                if !reachable {
                    return Err(EngineError::NotMet(npc_id.to_string()));
                }
                let opening = npc.opening_node.clone();
                self.player_mut(player_id)?
                    .talked_to
                    .insert(npc_id.to_string());
                let node = self.enter_node(player_id, npc_id, &opening)?;
                self.latch_quests(player_id);
                let step = DialogStep::Node {
                    node,
                    fired_effects: Vec::new(),
                };
                self.commit(
                    player_id,
                    action,
                    Outcome::Dialog(step.clone()),
                    Pending::default(),
                );
                return Ok(step);
            }
            Choice::Option(i) => i,
        };

        let node_id = match &player.current_dialog {
            Some(cur) if cur.npc_id == npc_id => cur.node_id.clone(),
            _ => return Err(EngineError::NoDialog(npc_id.to_string())),
        };
        let spec = Arc::clone(&self.spec);
        let node = &spec.dialogs[&node_id];
        let option = node
            .options
            .iter()
            .filter(|o| eval_requirement(&o.visible_if, player, &self.world))
            .nth(index)
            .ok_or(EngineError::BadOption(index))?;
        let option_pos = node
            .options
            .iter()
            .position(|o| std::ptr::eq(o, option))
            .unwrap_or(index);

        let mut player_next = player.clone();
        if let Err(reason) = apply_effects(&spec, &mut player_next, &option.effects) {
            let source = format!("dialogs.{node_id}.options[{option_pos}]");
            let mut pending = Pending::default();
            pending
                .failures
                .push((source, option.effects.clone(), reason.clone()));
            self.commit(
                player_id,
                action,
                Outcome::Rejected {
                    code: "EFFECT_FAILED".into(),
                },
                pending,
            );
            return Err(EngineError::EffectFailed(reason));
        }
        *self.player_mut(player_id)? = player_next;
        let fired_effects = option.effects.clone();
        let step = match &option.next {
            NextNode::End => {
                self.player_mut(player_id)?.current_dialog = None;
                DialogStep::Ended { fired_effects }
            }
            NextNode::Node(next) => DialogStep::Node {
                node: self.enter_node(player_id, npc_id, next)?,
                fired_effects,
            },
        };
        self.latch_quests(player_id);
        // option visibility may depend on quests latched just now
        let step = match step {
            DialogStep::Node {
                node,
                fired_effects,
            } => DialogStep::Node {
                node: self.dialog_view(npc_id, &node.node_id, self.player(player_id)?),
                fired_effects,
            },
            ended => ended,
        };
        self.commit(
            player_id,
            action,
            Outcome::Dialog(step.clone()),
            Pending::default(),
        );
        Ok(step)
    }

    fn puzzle_location(
        &self,
        player_id: &str,
        location_id: &str,
    ) -> Result<(&PlayerState, String), EngineError> {
        let player = self.player(player_id)?;
        let loc = self
            .location(location_id)
            .ok_or_else(|| EngineError::UnknownLocation(location_id.to_string()))?;
        if !self.interactable(loc, player) {
            return Err(EngineError::NotHere(location_id.to_string()));
        }
        match &loc.payload {
            Payload::Plaque { plaque_id } => Ok((player, plaque_id.clone())),
            _ => Err(EngineError::NoAnswerExpected(location_id.to_string())),
        }
    }

    fn reward(
        &mut self,
        player_id: &str,
        action: Action,
        source: String,
        effects: &[Effect],
        mark: impl FnOnce(&mut PlayerState),
    ) -> Result<AnswerResult, EngineError> {
        let spec = Arc::clone(&self.spec);
        let mut next = self.player(player_id)?.clone();
        if let Err(reason) = apply_effects(&spec, &mut next, effects) {
            let mut pending = Pending::default();
            pending
                .failures
                .push((source, effects.to_vec(), reason.clone()));
            self.commit(
                player_id,
                action,
                Outcome::Rejected {
                    code: "EFFECT_FAILED".into(),
                },
                pending,
            );
            return Err(EngineError::EffectFailed(reason));
        }
        mark(&mut next);
        *self.player_mut(player_id)? = next;
        self.latch_quests(player_id);
        let result = AnswerResult::Correct {
            fired_effects: effects.to_vec(),
        };
        self.commit(
            player_id,
            action,
            Outcome::Answer(result.clone()),
            Pending::default(),
        );
        Ok(result)
    }

    /// Checks a short answer. The reward fires on the first correct answer only.
    pub fn submit_answer(
        &mut self,
        player_id: &str,
        location_id: &str,
        text: &str,
    ) -> Result<AnswerResult, EngineError> {
        let (player, plaque_id) = self.puzzle_location(player_id, location_id)?;
        let Some(answer) = self.spec.plaques[&plaque_id].answer.clone() else {
            return Err(EngineError::NoAnswerExpected(location_id.to_string()));
        };
        if normalize_answer(text) != normalize_answer(&answer.expected) {
            return Ok(AnswerResult::Incorrect);
        }
        if player.answered.contains(&plaque_id) {
            return Ok(AnswerResult::Correct {
                fired_effects: Vec::new(),
            });
        }
        let action = Action::Answer {
            location_id: location_id.to_string(),
            text: text.to_string(),
        };
        let source = format!("plaques.{plaque_id}.on_correct");
        self.reward(player_id, action, source, &answer.on_correct, |p| {
            p.answered.insert(plaque_id);
        })
    }

    /// Checks three marked points against the plaque's hidden target.
    pub fn submit_triangulation(
        &mut self,
        player_id: &str,
        location_id: &str,
        points: [GeoPoint; 3],
    ) -> Result<AnswerResult, EngineError> {
        let (player, plaque_id) = self.puzzle_location(player_id, location_id)?;
        let Some(puzzle) = self.spec.plaques[&plaque_id].triangulation.clone() else {
            return Err(EngineError::NoTriangulation(location_id.to_string()));
        };
        if !geo::check_triangulation(points, puzzle.target, puzzle.tolerance_m)? {
            return Ok(AnswerResult::Incorrect);
        }
        if player.triangulated.contains(&plaque_id) {
            return Ok(AnswerResult::Correct {
                fired_effects: Vec::new(),
            });
        }
        let action = Action::Triangulate {
            location_id: location_id.to_string(),
            points,
        };
        let source = format!("plaques.{plaque_id}.on_triangulated");
        self.reward(player_id, action, source, &puzzle.on_success, |p| {
            p.triangulated.insert(plaque_id);
        })
    }

    /// Latched completions plus quests whose activation holds.
    pub fn quest_status(&self, player_id: &str) -> Result<QuestStatus, EngineError> {
        let player = self.player(player_id)?;
        let complete: Vec<String> = player.completed_quests.iter().cloned().collect();
        let active = self
            .spec
            .quests
            .values()
            .filter(|q| !player.completed_quests.contains(&q.quest_id))
            .filter(|q| eval_requirement(&q.active_if, player, &self.world))
            .map(|q| q.quest_id.clone())
            .collect();
        Ok(QuestStatus { active, complete })
    }

    pub fn player_view(&self, player_id: &str) -> Result<PlayerView, EngineError> {
        let player = self.player(player_id)?;
        Ok(PlayerView {
            player: player.clone(),
            quests: self.quest_status(player_id)?,
            nearby: self.nearby_for(player),
        })
    }

    pub fn capture_note(
        &mut self,
        player_id: &str,
        kind: NoteKind,
        payload_uri: &str,
    ) -> Result<NoteRecord, EngineError> {
        let player = self.player(player_id)?;
        let at = player.position.ok_or(EngineError::NoPosition)?;
        let seq = player.notes.len() as u32 + 1;
        let note = NoteRecord {
            note_id: format!("{player_id}-{seq}"),
            kind,
            payload_uri: payload_uri.to_string(),
            at,
            seq,
        };
        self.player_mut(player_id)?.notes.push(note.clone());
        self.latch_quests(player_id);
        self.commit(
            player_id,
            Action::Note {
                note_kind: kind,
                payload_uri: payload_uri.to_string(),
            },
            Outcome::Note { note: note.clone() },
            Pending::default(),
        );
        Ok(note)
    }

    /// Positions of every other positioned player, ordered by id.
    pub fn other_players(&self, player_id: &str) -> Result<Vec<(String, GeoPoint)>, EngineError> {
        self.player(player_id)?;
        Ok(self
            .world
            .players
            .values()
            .filter(|p| p.player_id != player_id)
            .filter_map(|p| p.position.map(|pos| (p.player_id.clone(), pos)))
            .collect())
    }

    /// Runs one command. This is the single entry point replay goes through.
    pub fn apply(&mut self, player_id: &str, action: &Action) -> Result<Outcome, EngineError> {
        Ok(match action {
            Action::Join => {
                self.join_game(player_id)?;
                match self
                    .event_log
                    .iter()
                    .rev()
                    .find(|e| matches!(e.entry, LogEntry::Action { .. }))
                {
                    Some(EngineEvent {
                        entry: LogEntry::Action { outcome, .. },
                        ..
                    }) => outcome.clone(),
                    _ => unreachable!("join always logs"),
                }
            }
            Action::Move { to } => Outcome::Report(self.update_position(player_id, *to)?),
            Action::Scan { code } => Outcome::Report(self.scan_code(player_id, code)?),
            Action::QuickTravel { location_id } => {
                Outcome::Report(self.quick_travel(player_id, location_id)?)
            }
            Action::Pickup { location_id, qty } => {
                let item_id = match self.location(location_id).map(|l| &l.payload) {
                    Some(Payload::ItemStack { item_id, .. }) => item_id.clone(),
                    _ => String::new(),
                };
                let r = self.pickup_item(player_id, location_id, *qty)?;
                Outcome::PickedUp {
                    location_id: location_id.clone(),
                    item_id,
                    taken: r.taken,
                }
            }
            Action::Drop { item_id, qty } => Outcome::Dropped {
                location_id: self.drop_item(player_id, item_id, *qty)?,
            },
            Action::Dialog { npc_id, choice } => {
                Outcome::Dialog(self.advance_dialog(player_id, npc_id, *choice)?)
            }
            Action::Answer { location_id, text } => {
                Outcome::Answer(self.submit_answer(player_id, location_id, text)?)
            }
            Action::Triangulate {
                location_id,
                points,
            } => Outcome::Answer(self.submit_triangulation(player_id, location_id, *points)?),
            Action::Note {
                note_kind,
                payload_uri,
            } => Outcome::Note {
                note: self.capture_note(player_id, *note_kind, payload_uri)?,
            },
        })
    }

    /// Re-applies the actions of `events` that are newer than this instance's
    /// log. Derived entries are regenerated rather than copied. Fails if the
    /// regenerated log diverges from the given one.
    pub fn apply_events(&mut self, events: &[EngineEvent]) -> Result<(), ReplayError> {
        let from = self.last_seq();
        for event in events.iter().filter(|e| e.seq > from) {
            if let LogEntry::Action { action, outcome } = &event.entry {
                let result = self.apply(&event.player_id, action);
                let expected_rejection = matches!(outcome, Outcome::Rejected { .. });
                match result {
                    Ok(_) if !expected_rejection => {}
                    Err(EngineError::EffectFailed(_)) if expected_rejection => {}
                    _ => return Err(ReplayError { seq: event.seq }),
                }
            }
        }
        let ours = self.events_since(from);
        let theirs: Vec<&EngineEvent> = events.iter().filter(|e| e.seq > from).collect();
        if ours.len() != theirs.len() || ours.iter().zip(theirs).any(|(a, b)| a != b) {
            let seq = ours
                .iter()
                .zip(events.iter().filter(|e| e.seq > from))
                .find(|(a, b)| a != b)
                .map_or(from + 1, |(a, _)| a.seq);
            return Err(ReplayError { seq });
        }
        Ok(())
    }

    /// Builds a fresh instance and replays a whole log into it.
    pub fn replay(spec: Arc<GameSpec>, events: &[EngineEvent]) -> Result<Self, EngineError> {
        let mut instance = GameInstance::new(spec)?;
        instance
            .apply_events(events)
            .map_err(|e| EngineError::EffectFailed(e.to_string()))?;
        Ok(instance)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("replay diverged at event {seq}")]
pub struct ReplayError {
    pub seq: u64,
}

/// Units of each item across all inventories and all stocks, dropped ones included.
pub fn item_totals(spec: &GameSpec, world: &WorldState) -> BTreeMap<String, u64> {
    let mut totals: BTreeMap<String, u64> = BTreeMap::new();
    for player in world.players.values() {
        for (item, qty) in &player.inventory {
            *totals.entry(item.clone()).or_default() += u64::from(*qty);
        }
    }
    for (location_id, qty) in &world.stock {
        let item = world
            .dropped
            .iter()
            .find(|l| &l.location_id == location_id)
            .or_else(|| spec.location(location_id))
            .and_then(|l| match &l.payload {
                Payload::ItemStack { item_id, .. } => Some(item_id.clone()),
                _ => None,
            });
        if let Some(item) = item {
            *totals.entry(item).or_default() += u64::from(*qty);
        }
    }
    totals
}

#[cfg(test)]
mod tests;
