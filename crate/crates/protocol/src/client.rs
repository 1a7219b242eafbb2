//! Blocking client for the /v1 routes, usable as a harness transport.

use std::collections::BTreeMap;

use locus_core::engine::{Action, AnswerResult, PlayerView};
use locus_core::harness::{StepResult, Transport, TransportError};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use ureq::Agent;

use crate::service::AnswerReply;

/// Talks to one game on a running server, remembering each player's token.
pub struct WireTransport {
    agent: Agent,
    base_url: String,
    game_id: String,
    tokens: BTreeMap<String, String>,
}

impl WireTransport {
    /// `base_url` is scheme and authority, e.g. `http://127.0.0.1:7878`.
    pub fn new(base_url: &str, game_id: &str) -> Self {
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        WireTransport {
            agent,
            base_url: base_url.trim_end_matches('/').to_string(),
            game_id: game_id.to_string(),
            tokens: BTreeMap::new(),
        }
    }

    pub fn token(&self, player_id: &str) -> Option<&str> {
        self.tokens.get(player_id).map(String::as_str)
    }

    /// Sends one request and unwraps the response envelope. A `body` makes
    /// it a POST.
    pub fn call(
        &self,
        path: &str,
        token: Option<&str>,
        body: Option<Value>,
    ) -> Result<Value, TransportError> {
        let url = format!("{}{path}", self.base_url);
        let auth = token.map(|t| format!("Bearer {t}"));
        let sent = match body {
            Some(body) => {
                let mut req = self.agent.post(&url);
                if let Some(a) = &auth {
                    req = req.header("Authorization", a);
                }
                req.send_json(body)
            }
            None => {
                let mut req = self.agent.get(&url);
                if let Some(a) = &auth {
                    req = req.header("Authorization", a);
                }
                req.call()
            }
        };
        let mut resp = sent.map_err(|e| TransportError::Failure(e.to_string()))?;
        let envelope: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| TransportError::Failure(format!("unreadable response: {e}")))?;
        if envelope["ok"] == Value::Bool(true) {
            return Ok(envelope["data"].clone());
        }
        match envelope["error"]["code"].as_str() {
            Some(code) => Err(TransportError::Rejected {
                code: code.to_string(),
                message: envelope["error"]["message"]
                    .as_str()
                    .unwrap_or_default()
                    .to_string(),
            }),
            None => Err(TransportError::Failure(format!(
                "malformed envelope: {envelope}"
            ))),
        }
    }

    fn game_path(&self, rest: &str) -> String {
        format!("/v1/games/{}{rest}", self.game_id)
    }

    fn player_call<T: DeserializeOwned>(
        &self,
        player_id: &str,
        op: &str,
        body: Option<Value>,
    ) -> Result<T, TransportError> {
        let path = self.game_path(&format!("/players/{player_id}/{op}"));
        let data = self.call(&path, self.token(player_id), body)?;
        decode(data)
    }

    /// The server's canonical snapshot document for this game.
    pub fn snapshot(&self) -> Result<Value, TransportError> {
        self.call(&self.game_path("/snapshot"), None, None)
    }

    pub fn events(&self, since: u64) -> Result<Vec<Value>, TransportError> {
        decode(self.call(
            &self.game_path(&format!("/events?since={since}")),
            None,
            None,
        )?)
    }
}

fn decode<T: DeserializeOwned>(data: Value) -> Result<T, TransportError> {
    serde_json::from_value(data)
        .map_err(|e| TransportError::Failure(format!("unexpected response shape: {e}")))
}

impl Transport for WireTransport {
    fn perform(&mut self, player_id: &str, action: &Action) -> Result<StepResult, TransportError> {
        let p = player_id;
        Ok(match action {
            Action::Join => {
                let data = self.call(
                    &self.game_path("/players"),
                    None,
                    Some(json!({ "player_id": p })),
                )?;
                let token = data["token"]
                    .as_str()
                    .ok_or_else(|| TransportError::Failure("join returned no token".into()))?;
                self.tokens.insert(p.to_string(), token.to_string());
                StepResult::Joined
            }
            Action::Move { to } => {
                StepResult::Report(self.player_call(p, "position", Some(json!(to)))?)
            }
            Action::Scan { code } => {
                StepResult::Report(self.player_call(p, "qr", Some(json!({ "code": code })))?)
            }
            Action::QuickTravel { location_id } => StepResult::Report(self.player_call(
                p,
                "quick_travel",
                Some(json!({ "location_id": location_id })),
            )?),
            Action::Pickup { location_id, qty } => StepResult::Picked(self.player_call(
                p,
                "pickup",
                Some(json!({ "location_id": location_id, "qty": qty })),
            )?),
            Action::Drop { item_id, qty } => {
                let data: Value =
                    self.player_call(p, "drop", Some(json!({ "item_id": item_id, "qty": qty })))?;
                let location_id = data["location_id"]
                    .as_str()
                    .ok_or_else(|| TransportError::Failure("drop returned no location".into()))?;
                StepResult::Dropped {
                    location_id: location_id.to_string(),
                }
            }
            Action::Dialog { npc_id, choice } => StepResult::Dialog(self.player_call(
                p,
                "dialog",
                Some(json!({ "npc_id": npc_id, "choice": choice })),
            )?),
            Action::Answer { location_id, text } => {
                let r: AnswerReply = self.player_call(
                    p,
                    "answer",
                    Some(json!({ "location_id": location_id, "text": text })),
                )?;
                StepResult::Answer(AnswerResult::from(r))
            }
            Action::Triangulate {
                location_id,
                points,
            } => {
                let r: AnswerReply = self.player_call(
                    p,
                    "triangulate",
                    Some(json!({ "location_id": location_id, "points": points })),
                )?;
                StepResult::Answer(AnswerResult::from(r))
            }
            Action::Note {
                note_kind,
                payload_uri,
            } => StepResult::Note(self.player_call(
                p,
                "note",
                Some(json!({ "kind": note_kind, "payload_uri": payload_uri })),
            )?),
        })
    }

    fn view(&mut self, player_id: &str) -> Result<PlayerView, TransportError> {
        self.player_call(player_id, "state", None)
    }
}
