//! Snapshot files.
//!
//! A snapshot is a UTF-8 JSON document with recursively sorted keys and
//! shortest round-trip float formatting, so equal states always produce
//! byte-identical files. The layout is described in `docs/snapshot.md`.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::engine::{EngineError, EngineEvent, GameInstance, WorldState};
use crate::model::GameSpec;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("snapshot format version {found} is not supported (expected {FORMAT_VERSION})")]
    VersionMismatch { found: u64 },
    #[error("snapshot belongs to game `{found}`, not `{expected}`")]
    GameMismatch { expected: String, found: String },
    #[error("snapshot is corrupt: {0}")]
    Corrupt(String),
    #[error("snapshot i/o failed: {0}")]
    Io(#[from] std::io::Error),
}

impl SnapshotError {
    pub fn code(&self) -> &'static str {
        match self {
            SnapshotError::VersionMismatch { .. } => "VERSION_MISMATCH",
            SnapshotError::GameMismatch { .. } => "GAME_MISMATCH",
            SnapshotError::Corrupt(_) => "CORRUPT",
            SnapshotError::Io(_) => "IO_FAILURE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub format_version: u32,
    pub game_id: String,
    pub taken_at_seq: u64,
    pub world: WorldState,
    /// The full log, so a restored server keeps serving event history.
    pub event_log: Vec<EngineEvent>,
}

/// Metadata returned after a save.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotInfo {
    pub game_id: String,
    pub taken_at_seq: u64,
    pub bytes: usize,
}

impl Snapshot {
    pub fn of(instance: &GameInstance) -> Self {
        Snapshot {
            format_version: FORMAT_VERSION,
            game_id: instance.spec().game_id.clone(),
            taken_at_seq: instance.last_seq(),
            world: instance.world.clone(),
            event_log: instance.events().to_vec(),
        }
    }
}

/// Writes `value` as JSON with every object's keys sorted.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    // plain data types always convert
    let v = serde_json::to_value(value).unwrap_or(Value::Null);
    let mut out = String::new();
    write_canonical(&v, &mut out);
    out
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

/// Canonical snapshot text for an instance.
pub fn snapshot_string(instance: &GameInstance) -> String {
    let mut s = to_canonical_json(&Snapshot::of(instance));
    s.push('\n');
    s
}

/// Saves atomically: the file is written beside `path` and renamed into place.
pub fn save_snapshot(instance: &GameInstance, path: &Path) -> Result<SnapshotInfo, SnapshotError> {
    let text = snapshot_string(instance);
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(SnapshotInfo {
        game_id: instance.spec().game_id.clone(),
        taken_at_seq: instance.last_seq(),
        bytes: text.len(),
    })
}

/// Parses snapshot text and checks it against `spec`.
pub fn parse_snapshot(spec: &GameSpec, text: &str) -> Result<Snapshot, SnapshotError> {
    let raw: Value =
        serde_json::from_str(text).map_err(|e| SnapshotError::Corrupt(e.to_string()))?;
    let version = raw
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| SnapshotError::Corrupt("missing format_version".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(SnapshotError::VersionMismatch { found: version });
    }
    let snap: Snapshot =
        serde_json::from_value(raw).map_err(|e| SnapshotError::Corrupt(e.to_string()))?;
    if snap.game_id != spec.game_id {
        return Err(SnapshotError::GameMismatch {
            expected: spec.game_id.clone(),
            found: snap.game_id,
        });
    }
    check_consistency(spec, &snap).map_err(SnapshotError::Corrupt)?;
    Ok(snap)
}

/// Rejects snapshots whose contents cannot belong to `spec`.
fn check_consistency(spec: &GameSpec, snap: &Snapshot) -> Result<(), String> {
    if snap.event_log.last().map_or(0, |e| e.seq) != snap.taken_at_seq {
        return Err("taken_at_seq does not match the event log".into());
    }
    if snap.event_log.windows(2).any(|w| w[0].seq >= w[1].seq) {
        return Err("event sequence numbers are not increasing".into());
    }
    for (id, player) in &snap.world.players {
        if id != &player.player_id {
            return Err(format!("player entry `{id}` holds `{}`", player.player_id));
        }
        for (item, qty) in &player.inventory {
            let spec_item = spec
                .items
                .get(item)
                .ok_or_else(|| format!("player `{id}` holds unknown item `{item}`"))?;
            if *qty == 0 || !spec_item.max_qty.allows(*qty) {
                return Err(format!("player `{id}` holds an invalid amount of `{item}`"));
            }
        }
        if let Some(cur) = &player.current_dialog {
            if !spec.dialogs.contains_key(&cur.node_id)
                || !spec.characters.contains_key(&cur.npc_id)
            {
                return Err(format!("player `{id}` is in an unknown conversation"));
            }
        }
    }
    for loc in &snap.world.dropped {
        if spec.location(&loc.location_id).is_some() {
            return Err(format!(
                "dropped location `{}` shadows an authored one",
                loc.location_id
            ));
        }
    }
    for location_id in snap.world.stock.keys() {
        let known = spec.location(location_id).is_some()
            || snap
                .world
                .dropped
                .iter()
                .any(|l| &l.location_id == location_id);
        if !known {
            return Err(format!("stock for unknown location `{location_id}`"));
        }
    }
    Ok(())
}

fn rebuild(spec: Arc<GameSpec>, snap: Snapshot) -> Result<GameInstance, SnapshotError> {
    GameInstance::from_parts(spec, snap.world, snap.event_log).map_err(|e| match e {
        EngineError::InvalidSpec(d) => {
            SnapshotError::Corrupt(format!("game no longer validates ({} errors)", d.len()))
        }
        other => SnapshotError::Corrupt(other.to_string()),
    })
}

pub fn restore_snapshot(spec: Arc<GameSpec>, text: &str) -> Result<GameInstance, SnapshotError> {
    let snap = parse_snapshot(&spec, text)?;
    rebuild(spec, snap)
}

pub fn load_snapshot(spec: Arc<GameSpec>, path: &Path) -> Result<GameInstance, SnapshotError> {
    let bytes = fs::read(path)?;
    let text = String::from_utf8(bytes).map_err(|e| SnapshotError::Corrupt(e.to_string()))?;
    restore_snapshot(spec, &text)
}
