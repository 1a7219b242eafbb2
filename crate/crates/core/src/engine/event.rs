use serde::{Deserialize, Serialize};

use super::state::{AnswerResult, Choice, DialogStep, NoteKind, NoteRecord, TriggerReport};
use crate::geo::GeoPoint;
use crate::model::Effect;

/// A player command. Every accepted command is logged, so replaying the
/// actions of a log rebuilds the world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    Join,
    Move {
        to: GeoPoint,
    },
    Scan {
        code: String,
    },
    QuickTravel {
        location_id: String,
    },
    Pickup {
        location_id: String,
        qty: u32,
    },
    Drop {
        item_id: String,
        qty: u32,
    },
    Dialog {
        npc_id: String,
        choice: Choice,
    },
    Answer {
        location_id: String,
        text: String,
    },
    Triangulate {
        location_id: String,
        points: [GeoPoint; 3],
    },
    Note {
        note_kind: NoteKind,
        payload_uri: String,
    },
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Join => "join",
            Action::Move { .. } => "move",
            Action::Scan { .. } => "scan",
            Action::QuickTravel { .. } => "quick_travel",
            Action::Pickup { .. } => "pickup",
            Action::Drop { .. } => "drop",
            Action::Dialog { .. } => "dialog",
            Action::Answer { .. } => "answer",
            Action::Triangulate { .. } => "triangulate",
            Action::Note { .. } => "note",
        }
    }
}

/// What an action produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Joined {
        delivered: Vec<String>,
        fired_effects: Vec<Effect>,
    },
    Report(TriggerReport),
    PickedUp {
        location_id: String,
        item_id: String,
        taken: u32,
    },
    Dropped {
        location_id: String,
    },
    Dialog(DialogStep),
    Answer(AnswerResult),
    Note {
        note: NoteRecord,
    },
    /// The action was accepted but its effects could not be applied.
    Rejected {
        code: String,
    },
}

impl Outcome {
    /// Effects that changed player state as part of this outcome.
    pub fn fired_effects(&self) -> &[Effect] {
        match self {
            Outcome::Joined { fired_effects, .. } => fired_effects,
            Outcome::Report(r) => &r.fired_effects,
            Outcome::Dialog(step) => step.fired_effects(),
            Outcome::Answer(AnswerResult::Correct { fired_effects }) => fired_effects,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogEntry {
    Action {
        action: Action,
        outcome: Outcome,
    },
    /// Authoring error met at run time; the listed effects were not applied.
    EffectFailed {
        source: String,
        effects: Vec<Effect>,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineEvent {
    pub seq: u64,
    pub player_id: String,
    #[serde(flatten)]
    pub entry: LogEntry,
}

impl EngineEvent {
    pub fn kind(&self) -> &'static str {
        match &self.entry {
            LogEntry::Action { action, .. } => action.name(),
            LogEntry::EffectFailed { .. } => "effect_failed",
        }
    }
}
