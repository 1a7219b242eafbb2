use thiserror::Error;

use crate::geo::GeoError;
use crate::model::Diagnostic;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("game definition has {} error(s)", .0.len())]
    InvalidSpec(Vec<Diagnostic>),
    #[error("invalid identifier {0:?}")]
    InvalidId(String),
    #[error("player `{0}` already joined")]
    DuplicatePlayer(String),
    #[error("no player `{0}` in this game")]
    UnknownPlayer(String),
    #[error("no location `{0}`")]
    UnknownLocation(String),
    #[error("no item `{0}`")]
    UnknownItem(String),
    #[error("no character `{0}`")]
    UnknownNpc(String),
    #[error("quantity must be at least 1")]
    BadQty,
    #[error("this game does not allow quick travel")]
    QuickTravelDisabled,
    #[error("location `{0}` is not visible")]
    NotVisible(String),
    #[error("location `{0}` has not been reached")]
    NotHere(String),
    #[error("location `{0}` holds no items")]
    NotAnItem(String),
    #[error("location `{0}` is empty")]
    EmptyStock(String),
    #[error("no room for more `{0}`")]
    InventoryFull(String),
    #[error("holding fewer than requested of `{0}`")]
    InsufficientQty(String),
    #[error("item `{0}` cannot be dropped")]
    NotDroppable(String),
    #[error("player has no position yet")]
    NoPosition,
    #[error("character `{0}` has not been reached")]
    NotMet(String),
    #[error("not in a conversation with `{0}`")]
    NoDialog(String),
    #[error("option {0} is not available")]
    BadOption(usize),
    #[error("location `{0}` expects no answer")]
    NoAnswerExpected(String),
    #[error("location `{0}` has no triangulation puzzle")]
    NoTriangulation(String),
    #[error("effect failed: {0}")]
    EffectFailed(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

impl EngineError {
    /// Machine-stable upper snake case code.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::InvalidSpec(_) => "INVALID_SPEC",
            EngineError::InvalidId(_) => "INVALID_ID",
            EngineError::DuplicatePlayer(_) => "DUPLICATE_PLAYER",
            EngineError::UnknownPlayer(_) => "UNKNOWN_PLAYER",
            EngineError::UnknownLocation(_) => "UNKNOWN_LOCATION",
            EngineError::UnknownItem(_) => "UNKNOWN_ITEM",
            EngineError::UnknownNpc(_) => "UNKNOWN_NPC",
            EngineError::BadQty => "BAD_QTY",
            EngineError::QuickTravelDisabled => "QUICK_TRAVEL_DISABLED",
            EngineError::NotVisible(_) => "NOT_VISIBLE",
            EngineError::NotHere(_) => "NOT_HERE",
            EngineError::NotAnItem(_) => "NOT_AN_ITEM",
            EngineError::EmptyStock(_) => "EMPTY_STOCK",
            EngineError::InventoryFull(_) => "INVENTORY_FULL",
            EngineError::InsufficientQty(_) => "INSUFFICIENT_QTY",
            EngineError::NotDroppable(_) => "NOT_DROPPABLE",
            EngineError::NoPosition => "NO_POSITION",
            EngineError::NotMet(_) => "NOT_MET",
            EngineError::NoDialog(_) => "NO_DIALOG",
            EngineError::BadOption(_) => "BAD_OPTION",
            EngineError::NoAnswerExpected(_) => "NO_ANSWER_EXPECTED",
            EngineError::NoTriangulation(_) => "NO_TRIANGULATION",
            EngineError::EffectFailed(_) => "EFFECT_FAILED",
            EngineError::Geo(e) => e.code(),
        }
    }

    /// Every code [`EngineError::code`] can return.
    pub const CODES: &'static [&'static str] = &[
        "INVALID_SPEC",
        "INVALID_ID",
        "DUPLICATE_PLAYER",
        "UNKNOWN_PLAYER",
        "UNKNOWN_LOCATION",
        "UNKNOWN_ITEM",
        "UNKNOWN_NPC",
        "BAD_QTY",
        "QUICK_TRAVEL_DISABLED",
        "NOT_VISIBLE",
        "NOT_HERE",
        "NOT_AN_ITEM",
        "EMPTY_STOCK",
        "INVENTORY_FULL",
        "INSUFFICIENT_QTY",
        "NOT_DROPPABLE",
        "NO_POSITION",
        "NOT_MET",
        "NO_DIALOG",
        "BAD_OPTION",
        "NO_ANSWER_EXPECTED",
        "NO_TRIANGULATION",
        "EFFECT_FAILED",
        "INVALID_COORDINATE",
        "SPREAD_TOO_LARGE",
    ];
}
