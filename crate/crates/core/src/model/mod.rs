//! Game-definition data model.
//!
//! A [`GameSpec`] is immutable once loaded. It is produced by [`parse_game`],
//! written back by [`serialize_game`] and checked by [`validate_game`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;

pub(crate) mod doc;
mod parse;
mod validate;
pub(crate) mod write;

pub use doc::{ParseError, ParseErrorKind};
pub use parse::{parse_game, parse_game_bytes};
pub(crate) use parse::{read_count, read_id, read_point};
pub use validate::{validate_game, Diagnostic, Severity};
pub use write::serialize_game;

/// Tolerance applied to triangulation puzzles that do not set one.
pub const DEFAULT_TRIANGULATION_TOLERANCE_M: f64 = 25.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub game_id: String,
    pub name: String,
    pub description: String,
    pub quick_travel_allowed: bool,
    pub locations: Vec<LocationSpec>,
    pub items: BTreeMap<String, ItemSpec>,
    pub characters: BTreeMap<String, CharacterSpec>,
    pub plaques: BTreeMap<String, PlaqueSpec>,
    pub dialogs: BTreeMap<String, DialogNode>,
    pub quests: BTreeMap<String, QuestSpec>,
}

impl GameSpec {
    pub fn new(game_id: impl Into<String>, name: impl Into<String>) -> Self {
        GameSpec {
            game_id: game_id.into(),
            name: name.into(),
            description: String::new(),
            quick_travel_allowed: false,
            locations: Vec::new(),
            items: BTreeMap::new(),
            characters: BTreeMap::new(),
            plaques: BTreeMap::new(),
            dialogs: BTreeMap::new(),
            quests: BTreeMap::new(),
        }
    }

    pub fn location(&self, id: &str) -> Option<&LocationSpec> {
        self.locations.iter().find(|l| l.location_id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationSpec {
    pub location_id: String,
    pub name: String,
    pub center: GeoPoint,
    pub radius_m: f64,
    pub trigger: Trigger,
    pub payload: Payload,
    pub visible_if: RequirementExpr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trigger {
    Gps,
    Qr { code: String },
    Immediate,
}

/// What a location hands out once triggered. Exactly one per location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    ItemStack { item_id: String, qty: u32 },
    Character { npc_id: String },
    Plaque { plaque_id: String },
    Hazard { effects: Vec<Effect> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxQty {
    Unbounded,
    Bounded(u32),
}

impl MaxQty {
    pub fn allows(&self, qty: u32) -> bool {
        match self {
            MaxQty::Unbounded => true,
            MaxQty::Bounded(max) => qty <= *max,
        }
    }

    /// Units that can still be added to a holding of `held`.
    pub fn headroom(&self, held: u32) -> u32 {
        match self {
            MaxQty::Unbounded => u32::MAX - held,
            MaxQty::Bounded(max) => max.saturating_sub(held),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemSpec {
    pub item_id: String,
    pub name: String,
    pub description: String,
    pub droppable: bool,
    pub max_qty: MaxQty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterSpec {
    pub npc_id: String,
    pub name: String,
    pub opening_node: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaqueSpec {
    pub plaque_id: String,
    pub title: String,
    pub body: String,
    pub answer: Option<AnswerSpec>,
    pub triangulation: Option<TriangulationSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerSpec {
    pub expected: String,
    pub on_correct: Vec<Effect>,
}

/// A "mark three points on the map" puzzle attached to a plaque.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangulationSpec {
    pub target: GeoPoint,
    pub tolerance_m: f64,
    pub on_success: Vec<Effect>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogNode {
    pub node_id: String,
    pub speaker: String,
    pub text: String,
    /// An empty list ends the conversation at this node.
    pub options: Vec<DialogOption>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogOption {
    pub label: String,
    pub visible_if: RequirementExpr,
    pub effects: Vec<Effect>,
    pub next: NextNode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NextNode {
    Node(String),
    End,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Effect {
    GiveItem { item_id: String, qty: u32 },
    TakeItem { item_id: String, qty: u32 },
    SetFlag { flag: String },
    ClearFlag { flag: String },
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Effect::GiveItem { item_id, qty } => write!(f, "give({item_id}, {qty})"),
            Effect::TakeItem { item_id, qty } => write!(f, "take({item_id}, {qty})"),
            Effect::SetFlag { flag } => write!(f, "set({flag})"),
            Effect::ClearFlag { flag } => write!(f, "clear({flag})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RequirementAtom {
    HasItem { item_id: String, min_qty: u32 },
    LacksItem { item_id: String },
    Visited { location_id: String },
    TalkedTo { npc_id: String },
    FlagSet { flag: String },
    QuestComplete { quest_id: String },
    NotesAtLeast { n: u32 },
}

impl fmt::Display for RequirementAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RequirementAtom::HasItem { item_id, min_qty } => write!(f, "has({item_id}, {min_qty})"),
            RequirementAtom::LacksItem { item_id } => write!(f, "lacks({item_id})"),
            RequirementAtom::Visited { location_id } => write!(f, "visited({location_id})"),
            RequirementAtom::TalkedTo { npc_id } => write!(f, "talked({npc_id})"),
            RequirementAtom::FlagSet { flag } => write!(f, "flag({flag})"),
            RequirementAtom::QuestComplete { quest_id } => write!(f, "quest({quest_id})"),
            RequirementAtom::NotesAtLeast { n } => write!(f, "notes({n})"),
        }
    }
}

/// Disjunction of conjunctions. No groups means always true; an empty group is
/// also true.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RequirementExpr {
    pub any_of: Vec<Vec<RequirementAtom>>,
}

impl RequirementExpr {
    pub fn always() -> Self {
        RequirementExpr::default()
    }

    pub fn all(atoms: Vec<RequirementAtom>) -> Self {
        RequirementExpr {
            any_of: vec![atoms],
        }
    }

    pub fn is_always(&self) -> bool {
        self.any_of.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = &RequirementAtom> {
        self.any_of.iter().flatten()
    }
}

impl fmt::Display for RequirementExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.any_of.is_empty() {
            return f.write_str("always");
        }
        for (gi, group) in self.any_of.iter().enumerate() {
            if gi > 0 {
                f.write_str(" | ")?;
            }
            if group.is_empty() {
                f.write_str("true")?;
            }
            for (ai, atom) in group.iter().enumerate() {
                if ai > 0 {
                    f.write_str(" & ")?;
                }
                write!(f, "{atom}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestSpec {
    pub quest_id: String,
    pub name: String,
    pub active_if: RequirementExpr,
    pub complete_if: RequirementExpr,
    pub active_text: String,
    pub complete_text: String,
}

/// Identifiers: non-empty ASCII letters, digits, `_`, `-` and `.`.
pub fn is_valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-' || b == b'.')
}
