use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;
use crate::model::{Effect, LocationSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoteKind {
    Photo,
    Video,
    Audio,
    Text,
}

impl NoteKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoteKind::Photo => "photo",
            NoteKind::Video => "video",
            NoteKind::Audio => "audio",
            NoteKind::Text => "text",
        }
    }
}

impl fmt::Display for NoteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoteKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "photo" => Ok(NoteKind::Photo),
            "video" => Ok(NoteKind::Video),
            "audio" => Ok(NoteKind::Audio),
            "text" => Ok(NoteKind::Text),
            _ => Err(format!("unknown note kind {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteRecord {
    pub note_id: String,
    pub kind: NoteKind,
    pub payload_uri: String,
    #[serde(rename = "where")]
    pub at: GeoPoint,
    pub seq: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogCursor {
    pub npc_id: String,
    pub node_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerState {
    pub player_id: String,
    pub position: Option<GeoPoint>,
    /// Absent means zero; stored quantities are always at least one.
    pub inventory: BTreeMap<String, u32>,
    pub visited: BTreeSet<String>,
    pub talked_to: BTreeSet<String>,
    pub flags: BTreeSet<String>,
    pub notes: Vec<NoteRecord>,
    pub current_dialog: Option<DialogCursor>,
    /// Latched quest completions.
    pub completed_quests: BTreeSet<String>,
    /// Plaques whose answer was accepted.
    pub answered: BTreeSet<String>,
    /// Plaques whose triangulation puzzle was solved.
    pub triangulated: BTreeSet<String>,
    /// Visible GPS geofences the player is standing in; entries are edges.
    pub inside: BTreeSet<String>,
}

impl PlayerState {
    pub fn new(player_id: impl Into<String>) -> Self {
        PlayerState {
            player_id: player_id.into(),
            position: None,
            inventory: BTreeMap::new(),
            visited: BTreeSet::new(),
            talked_to: BTreeSet::new(),
            flags: BTreeSet::new(),
            notes: Vec::new(),
            current_dialog: None,
            completed_quests: BTreeSet::new(),
            answered: BTreeSet::new(),
            triangulated: BTreeSet::new(),
            inside: BTreeSet::new(),
        }
    }

    pub fn qty(&self, item_id: &str) -> u32 {
        self.inventory.get(item_id).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    /// Remaining units for every item-stack location, authored or dropped.
    pub stock: BTreeMap<String, u32>,
    /// Locations created by players dropping items.
    pub dropped: Vec<LocationSpec>,
    pub players: BTreeMap<String, PlayerState>,
    /// Counter behind fresh dropped-location ids.
    pub drops_made: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearbyEntry {
    pub location_id: String,
    pub distance_m: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TriggerReport {
    /// Visible, non-hazard GPS locations around the player, nearest first.
    pub nearby: Vec<NearbyEntry>,
    pub newly_visited: Vec<String>,
    pub fired_effects: Vec<Effect>,
    pub hazards_hit: Vec<String>,
}

impl TriggerReport {
    pub fn is_empty(&self) -> bool {
        self.nearby.is_empty()
            && self.newly_visited.is_empty()
            && self.fired_effects.is_empty()
            && self.hazards_hit.is_empty()
    }
}

/// A dialog node as the player sees it: only options visible right now.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogView {
    pub npc_id: String,
    pub node_id: String,
    pub speaker: String,
    pub text: String,
    pub options: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DialogStep {
    Node {
        node: DialogView,
        fired_effects: Vec<Effect>,
    },
    Ended {
        fired_effects: Vec<Effect>,
    },
}

impl DialogStep {
    pub fn fired_effects(&self) -> &[Effect] {
        match self {
            DialogStep::Node { fired_effects, .. } | DialogStep::Ended { fired_effects } => {
                fired_effects
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Choice {
    Option(usize),
    Start(StartTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartTag {
    Start,
}

impl Choice {
    pub const START: Choice = Choice::Start(StartTag::Start);
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Choice::Option(i) => write!(f, "{i}"),
            Choice::Start(_) => f.write_str("start"),
        }
    }
}

impl FromStr for Choice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("start") {
            Ok(Choice::START)
        } else {
            s.parse()
                .map(Choice::Option)
                .map_err(|_| format!("expected `start` or an option index, found {s:?}"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum AnswerResult {
    Correct { fired_effects: Vec<Effect> },
    Incorrect,
}

impl AnswerResult {
    pub fn is_correct(&self) -> bool {
        matches!(self, AnswerResult::Correct { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestStatus {
    pub active: Vec<String>,
    pub complete: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PickupResult {
    /// Units actually moved after clamping.
    pub taken: u32,
    pub inventory: BTreeMap<String, u32>,
}

/// Everything a client may observe about one player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerView {
    pub player: PlayerState,
    pub quests: QuestStatus,
    pub nearby: Vec<NearbyEntry>,
}
