//! Request dispatch over a set of loaded game instances.
//!
//! Each instance sits behind its own mutex, so requests for one game are
//! applied one at a time in arrival order while different games proceed in
//! parallel. The dispatcher is plain synchronous code; the HTTP layer only
//! moves bytes in and out of [`Service::handle_request`].

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, PoisonError};

use locus_core::engine::{AnswerResult, Choice, EngineError, GameInstance, NoteKind};
use locus_core::geo::GeoPoint;
use locus_core::model::{Effect, GameSpec};
use locus_core::persistence::{
    load_snapshot, save_snapshot, to_canonical_json, Snapshot, SnapshotError, SnapshotInfo,
};
use rand::distr::{Alphanumeric, SampleString};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ApiError;

pub const TOKEN_LEN: usize = 32;

/// Status plus the `{"ok", "data", "error"}` envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub status: u16,
    pub body: Value,
}

impl Response {
    fn ok(data: Value) -> Self {
        Response {
            status: 200,
            body: json!({ "ok": true, "data": data, "error": null }),
        }
    }

    fn err(e: ApiError) -> Self {
        Response {
            status: e.http_status,
            body: json!({ "ok": false, "data": null, "error": e }),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.body).unwrap_or_default()
    }
}

struct Slot {
    game: GameInstance,
    /// token -> player id
    tokens: BTreeMap<String, String>,
}

impl Slot {
    fn player_for(&self, authorization: Option<&str>) -> Result<&str, ApiError> {
        let token = authorization
            .and_then(|h| h.strip_prefix("Bearer "))
            .map(str::trim)
            .ok_or_else(ApiError::bad_token)?;
        self.tokens
            .get(token)
            .map(String::as_str)
            .ok_or_else(ApiError::bad_token)
    }
}

pub struct Service {
    games: BTreeMap<String, Mutex<Slot>>,
}

/// Events after `since_seq`, in order, as JSON objects.
pub fn encode_event_stream(instance: &GameInstance, since_seq: u64) -> Vec<Value> {
    instance
        .events_since(since_seq)
        .iter()
        .map(|e| serde_json::to_value(e).unwrap_or(Value::Null))
        .collect()
}

pub fn snapshot_path(dir: &Path, game_id: &str) -> PathBuf {
    dir.join(format!("{game_id}.snapshot.json"))
}

pub fn tokens_path(dir: &Path, game_id: &str) -> PathBuf {
    dir.join(format!("{game_id}.tokens.json"))
}

impl Service {
    /// Serves the given instances. A second instance with an id already
    /// taken is dropped with a warning.
    pub fn new(instances: impl IntoIterator<Item = GameInstance>) -> Self {
        let mut games = BTreeMap::new();
        for game in instances {
            let id = game.spec().game_id.clone();
            if games.contains_key(&id) {
                log::warn!("game `{id}` loaded twice; keeping the first");
                continue;
            }
            games.insert(
                id,
                Mutex::new(Slot {
                    game,
                    tokens: BTreeMap::new(),
                }),
            );
        }
        Service { games }
    }

    /// Fresh instances for `specs`, resumed from `dir` where a snapshot for
    /// the game exists there.
    pub fn restore(
        specs: Vec<Arc<GameSpec>>,
        dir: Option<&Path>,
    ) -> Result<Self, (String, SnapshotError)> {
        let mut instances = Vec::new();
        let mut tokens = BTreeMap::new();
        for spec in specs {
            let id = spec.game_id.clone();
            let snap = dir.map(|d| snapshot_path(d, &id)).filter(|p| p.exists());
            let game = match snap {
                Some(path) => {
                    let game =
                        load_snapshot(Arc::clone(&spec), &path).map_err(|e| (id.clone(), e))?;
                    let t = read_tokens(&tokens_path(dir.unwrap_or(Path::new(".")), &id))
                        .map_err(|e| (id.clone(), e))?;
                    log::info!("resumed `{id}` at seq {}", game.last_seq());
                    tokens.insert(id.clone(), t);
                    game
                }
                None => GameInstance::new(spec)
                    .map_err(|e| (id, SnapshotError::Corrupt(e.to_string())))?,
            };
            instances.push(game);
        }
        let service = Service::new(instances);
        for (id, t) in tokens {
            if let Some(slot) = service.games.get(&id) {
                lock(slot).tokens = t;
            }
        }
        Ok(service)
    }

    pub fn game_ids(&self) -> Vec<String> {
        self.games.keys().cloned().collect()
    }

    /// Runs `f` on a game while holding its lock.
    pub fn with_game<R>(&self, game_id: &str, f: impl FnOnce(&GameInstance) -> R) -> Option<R> {
        self.games.get(game_id).map(|slot| f(&lock(slot).game))
    }

    /// Writes a snapshot and a token file per game into `dir`.
    pub fn snapshot_all(&self, dir: &Path) -> Result<Vec<SnapshotInfo>, SnapshotError> {
        fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        for (id, slot) in &self.games {
            let slot = lock(slot);
            out.push(save_snapshot(&slot.game, &snapshot_path(dir, id))?);
            write_atomic(&tokens_path(dir, id), &to_canonical_json(&slot.tokens))?;
        }
        Ok(out)
    }

    /// Dispatches one request. `target` is the path with optional query.
    pub fn handle_request(
        &self,
        method: &str,
        target: &str,
        authorization: Option<&str>,
        body: &[u8],
    ) -> Response {
        let (path, query) = target.split_once('?').unwrap_or((target, ""));
        let segs: Vec<&str> = path.strip_prefix('/').unwrap_or(path).split('/').collect();
        let req = Request {
            method,
            query,
            authorization,
            body,
        };
        match self.route(&segs, &req) {
            Ok(data) => Response::ok(data),
            Err(e) => {
                if e.http_status >= 500 {
                    log::error!("{method} {path}: {e}");
                } else {
                    log::debug!("{method} {path}: {e}");
                }
                Response::err(e)
            }
        }
    }

    fn slot(&self, game_id: &str) -> Result<MutexGuard<'_, Slot>, ApiError> {
        self.games
            .get(game_id)
            .map(lock)
            .ok_or_else(|| ApiError::unknown_game(game_id))
    }

    fn route(&self, segs: &[&str], req: &Request) -> Result<Value, ApiError> {
        match segs {
            ["v1", "games"] => {
                req.expect("GET")?;
                Ok(self.list_games())
            }
            ["v1", "games", gid, "players"] => {
                req.expect("POST")?;
                let body: JoinBody = req.json()?;
                let mut slot = self.slot(gid)?;
                slot.game.join_game(&body.player_id)?;
                let token = Alphanumeric.sample_string(&mut rand::rng(), TOKEN_LEN);
                slot.tokens.insert(token.clone(), body.player_id.clone());
                Ok(json!({ "player_id": body.player_id, "token": token }))
            }
            ["v1", "games", gid, "players_map"] => {
                req.expect("GET")?;
                let slot = self.slot(gid)?;
                let me = slot.player_for(req.authorization)?;
                let others: Vec<Value> = slot
                    .game
                    .other_players(me)?
                    .into_iter()
                    .map(|(player_id, position)| json!({ "player_id": player_id, "position": position }))
                    .collect();
                Ok(Value::Array(others))
            }
            ["v1", "games", gid, "events"] => {
                req.expect("GET")?;
                let since = parse_since(req.query)?;
                let slot = self.slot(gid)?;
                Ok(Value::Array(encode_event_stream(&slot.game, since)))
            }
            ["v1", "games", gid, "snapshot"] => {
                req.expect("GET")?;
                let slot = self.slot(gid)?;
                to_json(&Snapshot::of(&slot.game))
            }
            ["v1", "games", gid, "players", pid, op] => {
                let method = match *op {
                    "position" | "qr" | "quick_travel" | "pickup" | "drop" | "dialog"
                    | "answer" | "note" | "triangulate" => "POST",
                    "nearby" | "quests" | "inventory" | "state" => "GET",
                    _ => return Err(ApiError::not_found()),
                };
                req.expect(method)?;
                let mut slot = self.slot(gid)?;
                if slot.player_for(req.authorization)? != *pid {
                    return Err(ApiError::bad_token());
                }
                player_op(&mut slot.game, pid, op, req)
            }
            _ => Err(ApiError::not_found()),
        }
    }

    fn list_games(&self) -> Value {
        let games: Vec<Value> = self
            .games
            .values()
            .map(|slot| {
                let slot = lock(slot);
                let spec = slot.game.spec();
                json!({
                    "game_id": spec.game_id,
                    "name": spec.name,
                    "description": spec.description,
                    "quick_travel_allowed": spec.quick_travel_allowed,
                })
            })
            .collect();
        Value::Array(games)
    }
}

fn lock(slot: &Mutex<Slot>) -> MutexGuard<'_, Slot> {
    slot.lock().unwrap_or_else(PoisonError::into_inner)
}

struct Request<'a> {
    method: &'a str,
    query: &'a str,
    authorization: Option<&'a str>,
    body: &'a [u8],
}

impl Request<'_> {
    fn expect(&self, method: &str) -> Result<(), ApiError> {
        if self.method.eq_ignore_ascii_case(method) {
            Ok(())
        } else {
            Err(ApiError::new(
                "METHOD_NOT_ALLOWED",
                format!("use {method} on this route"),
            ))
        }
    }

    fn json<T: DeserializeOwned>(&self) -> Result<T, ApiError> {
        let value: Value =
            serde_json::from_slice(self.body).map_err(|e| ApiError::bad_body(e.to_string()))?;
        if !value.is_object() {
            return Err(ApiError::bad_body("body must be a JSON object"));
        }
        serde_json::from_value(value).map_err(|e| ApiError::bad_body(e.to_string()))
    }
}

fn parse_since(query: &str) -> Result<u64, ApiError> {
    let mut since = 0;
    for pair in query.split('&').filter(|p| !p.is_empty()) {
        if let Some(v) = pair.strip_prefix("since=") {
            since = v.parse().map_err(|_| {
                ApiError::new(
                    "BAD_QUERY",
                    format!("since must be a sequence number, got {v:?}"),
                )
            })?;
        }
    }
    Ok(since)
}

fn to_json<T: Serialize>(v: &T) -> Result<Value, ApiError> {
    serde_json::to_value(v).map_err(|e| ApiError::new("INTERNAL", e.to_string()))
}

#[derive(Deserialize)]
struct JoinBody {
    player_id: String,
}

#[derive(Deserialize)]
struct PointBody {
    lat: f64,
    lon: f64,
}

impl PointBody {
    fn point(&self) -> Result<GeoPoint, ApiError> {
        GeoPoint::new(self.lat, self.lon).map_err(|e| EngineError::from(e).into())
    }
}

#[derive(Deserialize)]
struct CodeBody {
    code: String,
}

#[derive(Deserialize)]
struct LocationBody {
    location_id: String,
}

#[derive(Deserialize)]
struct PickupBody {
    location_id: String,
    qty: i64,
}

#[derive(Deserialize)]
struct DropBody {
    item_id: String,
    qty: i64,
}

#[derive(Deserialize)]
struct DialogBody {
    npc_id: String,
    choice: Choice,
}

#[derive(Deserialize)]
struct AnswerBody {
    location_id: String,
    text: String,
}

#[derive(Deserialize)]
struct TriangulateBody {
    location_id: String,
    points: [PointBody; 3],
}

#[derive(Deserialize)]
struct NoteBody {
    kind: NoteKind,
    payload_uri: String,
}

/// Wire form of an answer or triangulation result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerReply {
    pub correct: bool,
    pub fired_effects: Vec<Effect>,
}

impl From<AnswerResult> for AnswerReply {
    fn from(r: AnswerResult) -> Self {
        match r {
            AnswerResult::Correct { fired_effects } => AnswerReply {
                correct: true,
                fired_effects,
            },
            AnswerResult::Incorrect => AnswerReply {
                correct: false,
                fired_effects: Vec::new(),
            },
        }
    }
}

impl From<AnswerReply> for AnswerResult {
    fn from(r: AnswerReply) -> Self {
        if r.correct {
            AnswerResult::Correct {
                fired_effects: r.fired_effects,
            }
        } else {
            AnswerResult::Incorrect
        }
    }
}

fn qty(n: i64) -> Result<u32, ApiError> {
    if n < 1 {
        return Err(EngineError::BadQty.into());
    }
    Ok(u32::try_from(n).unwrap_or(u32::MAX))
}

fn player_op(
    game: &mut GameInstance,
    pid: &str,
    op: &str,
    req: &Request,
) -> Result<Value, ApiError> {
    match op {
        "position" => {
            let b: PointBody = req.json()?;
            to_json(&game.update_position(pid, b.point()?)?)
        }
        "qr" => {
            let b: CodeBody = req.json()?;
            to_json(&game.scan_code(pid, &b.code)?)
        }
        "quick_travel" => {
            let b: LocationBody = req.json()?;
            to_json(&game.quick_travel(pid, &b.location_id)?)
        }
        "pickup" => {
            let b: PickupBody = req.json()?;
            to_json(&game.pickup_item(pid, &b.location_id, qty(b.qty)?)?)
        }
        "drop" => {
            let b: DropBody = req.json()?;
            let location_id = game.drop_item(pid, &b.item_id, qty(b.qty)?)?;
            Ok(json!({ "location_id": location_id }))
        }
        "dialog" => {
            let b: DialogBody = req.json()?;
            to_json(&game.advance_dialog(pid, &b.npc_id, b.choice)?)
        }
        "answer" => {
            let b: AnswerBody = req.json()?;
            to_json(&AnswerReply::from(game.submit_answer(
                pid,
                &b.location_id,
                &b.text,
            )?))
        }
        "triangulate" => {
            let b: TriangulateBody = req.json()?;
            let [a, c, d] = &b.points;
            let points = [a.point()?, c.point()?, d.point()?];
            to_json(&AnswerReply::from(game.submit_triangulation(
                pid,
                &b.location_id,
                points,
            )?))
        }
        "note" => {
            let b: NoteBody = req.json()?;
            to_json(&game.capture_note(pid, b.kind, &b.payload_uri)?)
        }
        "nearby" => to_json(&game.nearby(pid)?),
        "quests" => to_json(&game.quest_status(pid)?),
        "inventory" => to_json(&game.player(pid)?.inventory),
        "state" => to_json(&game.player_view(pid)?),
        _ => Err(ApiError::not_found()),
    }
}

fn read_tokens(path: &Path) -> Result<BTreeMap<String, String>, SnapshotError> {
    match fs::read_to_string(path) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| SnapshotError::Corrupt(e.to_string())),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(BTreeMap::new()),
        Err(e) => Err(e.into()),
    }
}

fn write_atomic(path: &Path, text: &str) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)
}
