//! Wire error codes and their HTTP statuses.

use locus_core::engine::EngineError;
use serde::Serialize;

/// Every code a response can carry, with its status and meaning. This table
/// is the published contract; `docs/protocol.md` mirrors it.
pub const ERROR_TABLE: &[(&str, u16, &str)] = &[
    (
        "BAD_BODY",
        400,
        "body is not a JSON object with the fields this route needs",
    ),
    ("BAD_QUERY", 400, "query string is malformed"),
    (
        "BAD_TOKEN",
        401,
        "missing token, or token not issued for this player",
    ),
    ("NOT_FOUND", 404, "no such route"),
    ("UNKNOWN_GAME", 404, "no game loaded with this id"),
    ("UNKNOWN_PLAYER", 404, "no such player in the game"),
    ("UNKNOWN_LOCATION", 404, "no such location"),
    ("UNKNOWN_ITEM", 404, "no such item"),
    ("UNKNOWN_NPC", 404, "no such character"),
    (
        "METHOD_NOT_ALLOWED",
        405,
        "route exists but not for this method",
    ),
    ("DUPLICATE_PLAYER", 409, "player id already joined"),
    (
        "QUICK_TRAVEL_DISABLED",
        409,
        "game does not allow quick travel",
    ),
    ("NOT_VISIBLE", 409, "location hidden from this player"),
    ("NOT_HERE", 409, "location not reached"),
    ("NOT_AN_ITEM", 409, "location holds no items"),
    ("EMPTY_STOCK", 409, "location has run out"),
    ("INVENTORY_FULL", 409, "item already at its maximum"),
    ("INSUFFICIENT_QTY", 409, "holding fewer than requested"),
    ("NOT_DROPPABLE", 409, "item cannot be dropped"),
    ("NO_POSITION", 409, "player has not reported a position"),
    ("NOT_MET", 409, "character not reached"),
    (
        "NO_DIALOG",
        409,
        "no conversation in progress with this character",
    ),
    ("BAD_OPTION", 409, "option index beyond the visible list"),
    ("NO_ANSWER_EXPECTED", 409, "location takes no answer"),
    (
        "NO_TRIANGULATION",
        409,
        "location has no triangulation puzzle",
    ),
    ("EFFECT_FAILED", 409, "effects could not be applied"),
    ("BAD_QTY", 422, "quantity below 1"),
    ("INVALID_ID", 422, "identifier has invalid characters"),
    (
        "INVALID_COORDINATE",
        422,
        "latitude out of range or coordinate not finite",
    ),
    (
        "SPREAD_TOO_LARGE",
        422,
        "triangulation points too far apart",
    ),
    ("INTERNAL", 500, "server fault"),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub code: &'static str,
    pub message: String,
    #[serde(skip)]
    pub http_status: u16,
}

impl ApiError {
    /// Builds an error for a code from [`ERROR_TABLE`]; unlisted codes
    /// become `INTERNAL`.
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        match ERROR_TABLE.iter().find(|(c, _, _)| *c == code) {
            Some(&(code, http_status, _)) => ApiError {
                code,
                message: message.into(),
                http_status,
            },
            None => ApiError {
                code: "INTERNAL",
                message: format!("{code}: {}", message.into()),
                http_status: 500,
            },
        }
    }

    pub fn bad_body(message: impl Into<String>) -> Self {
        Self::new("BAD_BODY", message)
    }

    pub fn bad_token() -> Self {
        Self::new("BAD_TOKEN", "missing or invalid bearer token")
    }

    pub fn not_found() -> Self {
        Self::new("NOT_FOUND", "no such route")
    }

    pub fn unknown_game(game_id: &str) -> Self {
        Self::new("UNKNOWN_GAME", format!("no game `{game_id}`"))
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        ApiError::new(e.code(), e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_engine_code_is_published() {
        for code in EngineError::CODES {
            if *code == "INVALID_SPEC" {
                continue;
            }
            assert_ne!(ApiError::new(code, "").code, "INTERNAL", "{code}");
        }
    }

    #[test]
    fn codes_are_unique_upper_snake() {
        let mut seen = std::collections::BTreeSet::new();
        for (code, status, _) in ERROR_TABLE {
            assert!(seen.insert(code), "{code} twice");
            assert!(code.chars().all(|c| c.is_ascii_uppercase() || c == '_'));
            assert!((400..600).contains(status));
        }
    }

    #[test]
    fn unlisted_codes_are_internal() {
        let e = ApiError::new("INVALID_SPEC", "x");
        assert_eq!((e.code, e.http_status), ("INTERNAL", 500));
    }
}
