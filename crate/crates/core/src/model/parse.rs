use std::collections::{BTreeMap, BTreeSet};

use super::doc::{parse_document, Cursor, Entry, ParseError, ParseErrorKind, Pos, Section, Tok};
use super::*;

/// Parses a game document. Either the whole spec comes back or every error
/// found, never a partially built spec.
pub fn parse_game(source: &str) -> Result<GameSpec, Vec<ParseError>> {
    let (doc, mut errors) = parse_document(source);
    let spec = build_spec(&doc.sections, &mut errors);
    match spec {
        Some(spec) if errors.is_empty() => Ok(spec),
        _ => {
            errors.sort_by_key(|e| (e.line, e.column));
            Err(errors)
        }
    }
}

/// Same as [`parse_game`] for raw bytes; invalid UTF-8 is a syntax error.
pub fn parse_game_bytes(bytes: &[u8]) -> Result<GameSpec, Vec<ParseError>> {
    match std::str::from_utf8(bytes) {
        Ok(s) => parse_game(s),
        Err(e) => {
            let upto = &bytes[..e.valid_up_to()];
            let line = upto.iter().filter(|&&b| b == b'\n').count() + 1;
            let column = upto.iter().rev().take_while(|&&b| b != b'\n').count() + 1;
            Err(vec![Pos { line, column }.syntax("invalid UTF-8")])
        }
    }
}

/// Entries of one section keyed by name, after duplicate and unknown-key checks.
pub(crate) struct Fields<'a> {
    pos: Pos,
    entries: BTreeMap<&'a str, &'a Entry>,
}

impl<'a> Fields<'a> {
    pub(crate) fn new(
        pos: Pos,
        entries: &'a [Entry],
        allowed: &[&str],
        errors: &mut Vec<ParseError>,
    ) -> Self {
        let mut map = BTreeMap::new();
        for entry in entries {
            if !allowed.contains(&entry.key.as_str()) {
                errors.push(entry.pos.error(
                    ParseErrorKind::UnknownField,
                    format!("unknown field `{}`", entry.key),
                ));
            } else if map.insert(entry.key.as_str(), entry).is_some() {
                errors.push(
                    entry
                        .pos
                        .syntax(format!("field `{}` given twice", entry.key)),
                );
            }
        }
        Fields { pos, entries: map }
    }

    pub(crate) fn optional<T>(
        &self,
        key: &str,
        errors: &mut Vec<ParseError>,
        read: impl FnOnce(&mut Cursor<'a>) -> Result<T, ParseError>,
    ) -> Option<T> {
        let entry = self.entries.get(key)?;
        let mut cursor = entry.cursor();
        match read(&mut cursor).and_then(|v| cursor.finish().map(|_| v)) {
            Ok(v) => Some(v),
            Err(e) => {
                errors.push(e);
                None
            }
        }
    }

    pub(crate) fn required<T>(
        &self,
        key: &str,
        errors: &mut Vec<ParseError>,
        read: impl FnOnce(&mut Cursor<'a>) -> Result<T, ParseError>,
    ) -> Option<T> {
        if !self.entries.contains_key(key) {
            errors.push(self.pos.syntax(format!("missing required field `{key}`")));
            return None;
        }
        self.optional(key, errors, read)
    }

    pub(crate) fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }
}

pub(crate) fn read_id(c: &mut Cursor<'_>) -> Result<String, ParseError> {
    let pos = c.pos();
    let id = c.word()?;
    if is_valid_id(&id) {
        Ok(id)
    } else {
        Err(pos.syntax(format!("bad identifier {id:?}")))
    }
}

pub(crate) fn read_bool(c: &mut Cursor<'_>) -> Result<bool, ParseError> {
    let pos = c.pos();
    match c.ident()?.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(pos.syntax(format!("expected true or false, found {other}"))),
    }
}

pub(crate) fn read_point(c: &mut Cursor<'_>) -> Result<GeoPoint, ParseError> {
    let pos = c.pos();
    let lat = c.number()?;
    c.punct(',')?;
    let lon = c.number()?;
    GeoPoint::new(lat, lon).map_err(|e| pos.syntax(e.to_string()))
}

fn read_positive(c: &mut Cursor<'_>) -> Result<f64, ParseError> {
    let pos = c.pos();
    let v = c.number()?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(pos.syntax(format!("expected a positive number, found {v}")))
    }
}

pub(crate) fn read_count(c: &mut Cursor<'_>) -> Result<u32, ParseError> {
    let pos = c.pos();
    let n = c.uint()?;
    if n >= 1 {
        Ok(n)
    } else {
        Err(pos.syntax("quantity must be at least 1"))
    }
}

fn call<'a, T>(
    c: &mut Cursor<'a>,
    body: impl FnOnce(&mut Cursor<'a>) -> Result<T, ParseError>,
) -> Result<T, ParseError> {
    c.punct('(')?;
    let v = body(c)?;
    c.punct(')')?;
    Ok(v)
}

pub(crate) fn read_effect(c: &mut Cursor<'_>) -> Result<Effect, ParseError> {
    let pos = c.pos();
    let name = c.ident()?;
    match name.as_str() {
        "give" | "take" => {
            let (item_id, qty) = call(c, |c| {
                let id = read_id(c)?;
                c.punct(',')?;
                Ok((id, read_count(c)?))
            })?;
            Ok(if name == "give" {
                Effect::GiveItem { item_id, qty }
            } else {
                Effect::TakeItem { item_id, qty }
            })
        }
        "set" => Ok(Effect::SetFlag {
            flag: call(c, read_id)?,
        }),
        "clear" => Ok(Effect::ClearFlag {
            flag: call(c, read_id)?,
        }),
        other => Err(pos.syntax(format!("unknown effect `{other}`"))),
    }
}

/// Comma-separated effects; an empty token list is the empty list.
pub(crate) fn read_effects(c: &mut Cursor<'_>) -> Result<Vec<Effect>, ParseError> {
    let mut out = Vec::new();
    if c.at_end() || c.peek() == Some(&Tok::Punct(')')) {
        return Ok(out);
    }
    loop {
        out.push(read_effect(c)?);
        if !c.eat_punct(',') {
            return Ok(out);
        }
    }
}

pub(crate) fn read_atom(c: &mut Cursor<'_>) -> Result<RequirementAtom, ParseError> {
    let pos = c.pos();
    let name = c.ident()?;
    let atom = match name.as_str() {
        "has" => {
            let (item_id, min_qty) = call(c, |c| {
                let id = read_id(c)?;
                c.punct(',')?;
                Ok((id, read_count(c)?))
            })?;
            RequirementAtom::HasItem { item_id, min_qty }
        }
        "lacks" => RequirementAtom::LacksItem {
            item_id: call(c, read_id)?,
        },
        "visited" => RequirementAtom::Visited {
            location_id: call(c, read_id)?,
        },
        "talked" => RequirementAtom::TalkedTo {
            npc_id: call(c, read_id)?,
        },
        "flag" => RequirementAtom::FlagSet {
            flag: call(c, read_id)?,
        },
        "quest" => RequirementAtom::QuestComplete {
            quest_id: call(c, read_id)?,
        },
        "notes" => RequirementAtom::NotesAtLeast {
            n: call(c, read_count)?,
        },
        other => return Err(pos.syntax(format!("unknown requirement `{other}`"))),
    };
    Ok(atom)
}

/// `always`, or groups separated by `|` whose atoms are joined by `&`.
/// A group written as `true` is the empty (always satisfied) group.
pub(crate) fn read_expr(c: &mut Cursor<'_>) -> Result<RequirementExpr, ParseError> {
    if c.peek() == Some(&Tok::Ident("always".into())) {
        c.ident()?;
        return Ok(RequirementExpr::always());
    }
    let mut any_of = Vec::new();
    loop {
        let mut group = Vec::new();
        if c.peek() == Some(&Tok::Ident("true".into())) {
            c.ident()?;
        } else {
            loop {
                group.push(read_atom(c)?);
                if !c.eat_punct('&') {
                    break;
                }
            }
        }
        any_of.push(group);
        if !c.eat_punct('|') {
            return Ok(RequirementExpr { any_of });
        }
    }
}

fn read_trigger(c: &mut Cursor<'_>) -> Result<Trigger, ParseError> {
    let pos = c.pos();
    match c.ident()?.as_str() {
        "gps" => Ok(Trigger::Gps),
        "immediate" => Ok(Trigger::Immediate),
        "qr" => {
            let code_pos = c.pos();
            let code = call(c, |c| c.string())?;
            if code.is_empty() {
                return Err(code_pos.syntax("QR code must not be empty"));
            }
            Ok(Trigger::Qr { code })
        }
        other => Err(pos.syntax(format!("unknown trigger `{other}`"))),
    }
}

fn read_payload(c: &mut Cursor<'_>) -> Result<Payload, ParseError> {
    let pos = c.pos();
    match c.ident()?.as_str() {
        "items" => {
            let (item_id, qty) = call(c, |c| {
                let id = read_id(c)?;
                c.punct(',')?;
                Ok((id, c.uint()?))
            })?;
            Ok(Payload::ItemStack { item_id, qty })
        }
        "character" => Ok(Payload::Character {
            npc_id: call(c, read_id)?,
        }),
        "plaque" => Ok(Payload::Plaque {
            plaque_id: call(c, read_id)?,
        }),
        "hazard" => Ok(Payload::Hazard {
            effects: call(c, read_effects)?,
        }),
        other => Err(pos.syntax(format!("unknown payload `{other}`"))),
    }
}

fn read_max_qty(c: &mut Cursor<'_>) -> Result<MaxQty, ParseError> {
    if c.peek() == Some(&Tok::Ident("unbounded".into())) {
        c.ident()?;
        return Ok(MaxQty::Unbounded);
    }
    Ok(MaxQty::Bounded(read_count(c)?))
}

fn read_next(c: &mut Cursor<'_>) -> Result<NextNode, ParseError> {
    let id = read_id(c)?;
    Ok(if id == "END" {
        NextNode::End
    } else {
        NextNode::Node(id)
    })
}

fn read_string(c: &mut Cursor<'_>) -> Result<String, ParseError> {
    c.string()
}

fn section_id(section: &Section, errors: &mut Vec<ParseError>) -> Option<String> {
    match &section.id {
        Some(id) if section.kind == "dialog" && id == "END" => {
            errors.push(
                section
                    .id_pos
                    .syntax("`END` is reserved and cannot name a dialog node"),
            );
            None
        }
        Some(id) if is_valid_id(id) => Some(id.clone()),
        Some(id) => {
            errors.push(section.id_pos.syntax(format!("bad identifier {id:?}")));
            None
        }
        None => {
            errors.push(
                section
                    .pos
                    .syntax(format!("[{}] needs an id", section.kind)),
            );
            None
        }
    }
}

fn no_children(section: &Section, errors: &mut Vec<ParseError>) {
    for child in &section.children {
        errors.push(child.pos.syntax(format!(
            "[[{}]] is not allowed inside [{}]",
            child.kind, section.kind
        )));
    }
}

fn claim(
    seen: &mut BTreeSet<String>,
    namespace: &str,
    id: &str,
    pos: Pos,
    errors: &mut Vec<ParseError>,
) -> bool {
    if seen.insert(id.to_string()) {
        true
    } else {
        errors.push(pos.error(
            ParseErrorKind::DuplicateId,
            format!("{namespace} `{id}` defined twice"),
        ));
        false
    }
}

fn build_spec(sections: &[Section], errors: &mut Vec<ParseError>) -> Option<GameSpec> {
    let mut header: Option<(String, String, String, bool)> = None;
    let mut game_seen = false;
    let mut locations = Vec::new();
    let mut items = BTreeMap::new();
    let mut characters = BTreeMap::new();
    let mut plaques = BTreeMap::new();
    let mut dialogs = BTreeMap::new();
    let mut quests = BTreeMap::new();
    let mut location_ids = BTreeSet::new();
    let mut seen: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();

    for section in sections {
        if section.kind.is_empty() {
            continue;
        }
        if section.kind != "dialog" {
            no_children(section, errors);
        }
        match section.kind.as_str() {
            "game" => {
                if game_seen {
                    errors.push(section.pos.syntax("only one [game] section is allowed"));
                    continue;
                }
                game_seen = true;
                let id = section_id(section, errors);
                let f = Fields::new(
                    section.pos,
                    &section.entries,
                    &["name", "description", "quick_travel"],
                    errors,
                );
                let name = f.required("name", errors, read_string);
                let description = f
                    .optional("description", errors, read_string)
                    .unwrap_or_default();
                let quick = f
                    .optional("quick_travel", errors, read_bool)
                    .unwrap_or(false);
                if let (Some(id), Some(name)) = (id, name) {
                    header = Some((id, name, description, quick));
                }
            }
            "item" => {
                let id = section_id(section, errors);
                let f = Fields::new(
                    section.pos,
                    &section.entries,
                    &["name", "description", "droppable", "max_qty"],
                    errors,
                );
                let name = f.required("name", errors, read_string);
                let description = f
                    .optional("description", errors, read_string)
                    .unwrap_or_default();
                let droppable = f.optional("droppable", errors, read_bool).unwrap_or(false);
                let max_qty = f
                    .optional("max_qty", errors, read_max_qty)
                    .unwrap_or(MaxQty::Unbounded);
                if let (Some(id), Some(name)) = (id, name) {
                    if claim(
                        seen.entry("item").or_default(),
                        "item",
                        &id,
                        section.id_pos,
                        errors,
                    ) {
                        items.insert(
                            id.clone(),
                            ItemSpec {
                                item_id: id,
                                name,
                                description,
                                droppable,
                                max_qty,
                            },
                        );
                    }
                }
            }
            "character" => {
                let id = section_id(section, errors);
                let f = Fields::new(section.pos, &section.entries, &["name", "opening"], errors);
                let name = f.required("name", errors, read_string);
                let opening = f.required("opening", errors, read_id);
                if let (Some(id), Some(name), Some(opening_node)) = (id, name, opening) {
                    if claim(
                        seen.entry("character").or_default(),
                        "character",
                        &id,
                        section.id_pos,
                        errors,
                    ) {
                        characters.insert(
                            id.clone(),
                            CharacterSpec {
                                npc_id: id,
                                name,
                                opening_node,
                            },
                        );
                    }
                }
            }
            "plaque" => {
                let id = section_id(section, errors);
                let f = Fields::new(
                    section.pos,
                    &section.entries,
                    &[
                        "title",
                        "body",
                        "answer",
                        "on_correct",
                        "triangulate",
                        "tolerance",
                        "on_triangulated",
                    ],
                    errors,
                );
                let title = f.required("title", errors, read_string);
                let body = f.optional("body", errors, read_string).unwrap_or_default();
                let answer = f.optional("answer", errors, |c| {
                    let pos = c.pos();
                    let s = c.string()?;
                    if s.trim().is_empty() {
                        Err(pos.syntax("answer must not be empty"))
                    } else {
                        Ok(s)
                    }
                });
                let on_correct = f
                    .optional("on_correct", errors, read_effects)
                    .unwrap_or_default();
                if f.has("on_correct") && !f.has("answer") {
                    errors.push(section.pos.syntax("`on_correct` requires `answer`"));
                }
                let target = f.optional("triangulate", errors, read_point);
                let tolerance = f
                    .optional("tolerance", errors, read_positive)
                    .unwrap_or(DEFAULT_TRIANGULATION_TOLERANCE_M);
                let on_success = f
                    .optional("on_triangulated", errors, read_effects)
                    .unwrap_or_default();
                if (f.has("tolerance") || f.has("on_triangulated")) && !f.has("triangulate") {
                    errors.push(
                        section
                            .pos
                            .syntax("`tolerance` and `on_triangulated` require `triangulate`"),
                    );
                }
                if let (Some(id), Some(title)) = (id, title) {
                    if claim(
                        seen.entry("plaque").or_default(),
                        "plaque",
                        &id,
                        section.id_pos,
                        errors,
                    ) {
                        plaques.insert(
                            id.clone(),
                            PlaqueSpec {
                                plaque_id: id,
                                title,
                                body,
                                answer: answer.map(|expected| AnswerSpec {
                                    expected,
                                    on_correct,
                                }),
                                triangulation: target.map(|target| TriangulationSpec {
                                    target,
                                    tolerance_m: tolerance,
                                    on_success,
                                }),
                            },
                        );
                    }
                }
            }
            "location" => {
                let id = section_id(section, errors);
                let f = Fields::new(
                    section.pos,
                    &section.entries,
                    &[
                        "name",
                        "center",
                        "radius",
                        "trigger",
                        "payload",
                        "visible_if",
                    ],
                    errors,
                );
                let name = f.required("name", errors, read_string);
                let center = f.required("center", errors, read_point);
                let radius = f.required("radius", errors, read_positive);
                let trigger = f
                    .optional("trigger", errors, read_trigger)
                    .unwrap_or(Trigger::Gps);
                let payload = f.required("payload", errors, read_payload);
                let visible_if = f
                    .optional("visible_if", errors, read_expr)
                    .unwrap_or_default();
                if let (Some(id), Some(name), Some(center), Some(radius_m), Some(payload)) =
                    (id, name, center, radius, payload)
                {
                    if claim(&mut location_ids, "location", &id, section.id_pos, errors) {
                        locations.push(LocationSpec {
                            location_id: id,
                            name,
                            center,
                            radius_m,
                            trigger,
                            payload,
                            visible_if,
                        });
                    }
                }
            }
            "dialog" => {
                let id = section_id(section, errors);
                let f = Fields::new(section.pos, &section.entries, &["speaker", "text"], errors);
                let speaker = f.required("speaker", errors, read_id);
                let text = f.required("text", errors, read_string);
                let mut options = Vec::new();
                for child in &section.children {
                    if child.kind != "option" {
                        errors.push(
                            child.pos.syntax(format!(
                                "[[{}]] is not allowed inside [dialog]",
                                child.kind
                            )),
                        );
                        continue;
                    }
                    if child.id.is_some() {
                        errors.push(child.id_pos.syntax("[[option]] takes no id"));
                    }
                    let f = Fields::new(
                        child.pos,
                        &child.entries,
                        &["label", "visible_if", "effects", "next"],
                        errors,
                    );
                    let label = f.required("label", errors, read_string);
                    let visible_if = f
                        .optional("visible_if", errors, read_expr)
                        .unwrap_or_default();
                    let effects = f
                        .optional("effects", errors, read_effects)
                        .unwrap_or_default();
                    let next = f.required("next", errors, read_next);
                    if let (Some(label), Some(next)) = (label, next) {
                        options.push(DialogOption {
                            label,
                            visible_if,
                            effects,
                            next,
                        });
                    }
                }
                if let (Some(id), Some(speaker), Some(text)) = (id, speaker, text) {
                    if claim(
                        seen.entry("dialog").or_default(),
                        "dialog node",
                        &id,
                        section.id_pos,
                        errors,
                    ) {
                        dialogs.insert(
                            id.clone(),
                            DialogNode {
                                node_id: id,
                                speaker,
                                text,
                                options,
                            },
                        );
                    }
                }
            }
            "quest" => {
                let id = section_id(section, errors);
                let f = Fields::new(
                    section.pos,
                    &section.entries,
                    &[
                        "name",
                        "active_if",
                        "complete_if",
                        "active_text",
                        "complete_text",
                    ],
                    errors,
                );
                let name = f.required("name", errors, read_string);
                let active_if = f
                    .optional("active_if", errors, read_expr)
                    .unwrap_or_default();
                let complete_if = f
                    .optional("complete_if", errors, read_expr)
                    .unwrap_or_default();
                let active_text = f
                    .optional("active_text", errors, read_string)
                    .unwrap_or_default();
                let complete_text = f
                    .optional("complete_text", errors, read_string)
                    .unwrap_or_default();
                if let (Some(id), Some(name)) = (id, name) {
                    if claim(
                        seen.entry("quest").or_default(),
                        "quest",
                        &id,
                        section.id_pos,
                        errors,
                    ) {
                        quests.insert(
                            id.clone(),
                            QuestSpec {
                                quest_id: id,
                                name,
                                active_if,
                                complete_if,
                                active_text,
                                complete_text,
                            },
                        );
                    }
                }
            }
            other => errors.push(
                section
                    .pos
                    .syntax(format!("unknown section kind `{other}`")),
            ),
        }
    }

    if !game_seen {
        errors.push(Pos { line: 1, column: 1 }.syntax("missing [game] section"));
    }
    let (game_id, name, description, quick_travel_allowed) = header?;
    Some(GameSpec {
        game_id,
        name,
        description,
        quick_travel_allowed,
        locations,
        items,
        characters,
        plaques,
        dialogs,
        quests,
    })
}
