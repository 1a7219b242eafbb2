//! Random command sequences for property sweeps.
//!
//! Commands are drawn from the game's own vocabulary (location centers, QR
//! codes, items, characters, expected answers) so that most of them succeed,
//! mixed with some noise that exercises the error paths.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::engine::{Action, Choice, GameInstance, NoteKind};
use crate::geo::GeoPoint;
use crate::model::{GameSpec, Payload, Trigger};

const FAR_AWAY: GeoPoint = GeoPoint::ORIGIN;

/// Builds a command for one of `players`. Ids of dropped locations are
/// guessed as `dropped-1..=8`, which is where the engine puts them.
pub fn random_action<R: Rng + ?Sized>(
    spec: &GameSpec,
    players: &[String],
    rng: &mut R,
) -> (String, Action) {
    let player = players.choose(rng).cloned().unwrap_or_default();
    let loc_ids: Vec<String> = spec
        .locations
        .iter()
        .map(|l| l.location_id.clone())
        .chain((1..=8).map(|n| format!("dropped-{n}")))
        .collect();
    let any_loc = |rng: &mut R| loc_ids.choose(rng).cloned().unwrap_or_default();
    let item_ids: Vec<&String> = spec.items.keys().collect();
    let any_item = |rng: &mut R| {
        item_ids
            .choose(rng)
            .map(|s| s.to_string())
            .unwrap_or_default()
    };

    let action = match rng.random_range(0..100u32) {
        0..=29 => {
            let to = match spec.locations.choose(rng) {
                Some(l) if rng.random_ratio(4, 5) => jitter(l.center, l.radius_m, rng),
                _ => GeoPoint::new(
                    rng.random_range(-80.0..80.0),
                    rng.random_range(-180.0..180.0),
                )
                .unwrap_or(FAR_AWAY),
            };
            Action::Move { to }
        }
        30..=37 => {
            let codes: Vec<&String> = spec
                .locations
                .iter()
                .filter_map(|l| match &l.trigger {
                    Trigger::Qr { code } => Some(code),
                    _ => None,
                })
                .collect();
            let code = match codes.choose(rng) {
                Some(c) if rng.random_ratio(9, 10) => c.to_string(),
                _ => "no-such-code".to_string(),
            };
            Action::Scan { code }
        }
        38..=42 => Action::QuickTravel {
            location_id: any_loc(rng),
        },
        43..=62 => Action::Pickup {
            location_id: any_loc(rng),
            qty: rng.random_range(1..=4),
        },
        63..=74 => Action::Drop {
            item_id: any_item(rng),
            qty: rng.random_range(1..=3),
        },
        75..=88 => {
            let npcs: Vec<&String> = spec.characters.keys().collect();
            let npc_id = npcs.choose(rng).map(|s| s.to_string()).unwrap_or_default();
            let choice = if rng.random_ratio(1, 3) {
                Choice::START
            } else {
                Choice::Option(rng.random_range(0..4))
            };
            Action::Dialog { npc_id, choice }
        }
        89..=94 => {
            let plaques: Vec<(&String, Option<&String>)> = spec
                .locations
                .iter()
                .filter_map(|l| match &l.payload {
                    Payload::Plaque { plaque_id } => Some((
                        &l.location_id,
                        spec.plaques
                            .get(plaque_id)
                            .and_then(|p| p.answer.as_ref())
                            .map(|a| &a.expected),
                    )),
                    _ => None,
                })
                .collect();
            match plaques.choose(rng) {
                Some((loc, expected)) => Action::Answer {
                    location_id: loc.to_string(),
                    text: match expected {
                        Some(e) if rng.random_ratio(2, 3) => e.to_uppercase(),
                        _ => "wrong".into(),
                    },
                },
                None => Action::Answer {
                    location_id: any_loc(rng),
                    text: "x".into(),
                },
            }
        }
        _ => Action::Note {
            note_kind: *[
                NoteKind::Photo,
                NoteKind::Video,
                NoteKind::Audio,
                NoteKind::Text,
            ]
            .choose(rng)
            .unwrap_or(&NoteKind::Text),
            payload_uri: format!("mem://{}", rng.random_range(0..1000u32)),
        },
    };
    (player, action)
}

/// A point within roughly `radius_m` of `center`.
fn jitter<R: Rng + ?Sized>(center: GeoPoint, radius_m: f64, rng: &mut R) -> GeoPoint {
    let meters = radius_m * rng.random_range(0.0..1.2);
    let dlat = (meters / crate::geo::EARTH_RADIUS_M).to_degrees() * rng.random_range(-1.0..=1.0);
    GeoPoint::new((center.lat() + dlat).clamp(-90.0, 90.0), center.lon()).unwrap_or(center)
}

/// Joins `players` then applies `len` random commands, ignoring rejections.
pub fn random_playthrough<R: Rng + ?Sized>(
    game: &mut GameInstance,
    players: &[String],
    len: usize,
    rng: &mut R,
) {
    for p in players {
        let _ = game.join_game(p);
    }
    let spec = std::sync::Arc::clone(game.spec());
    for _ in 0..len {
        let (player, action) = random_action(&spec, players, rng);
        let _ = game.apply(&player, &action);
    }
}
