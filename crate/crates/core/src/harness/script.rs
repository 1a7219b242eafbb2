//! Script files: `[script <player>]` sections whose keys are steps, in order.

use std::fmt;

use crate::engine::{Action, Choice, NoteKind};
use crate::model::doc::{parse_document, Cursor, Entry, ParseError, Tok};
use crate::model::write::{format_point, quote};
use crate::model::{read_count, read_id, read_point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuestState {
    Complete,
    Active,
    Inactive,
}

impl fmt::Display for QuestState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuestState::Complete => "complete",
            QuestState::Active => "active",
            QuestState::Inactive => "inactive",
        })
    }
}

/// An assertion over observable player state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expectation {
    Inventory {
        item_id: String,
        qty: u32,
    },
    Quest {
        quest_id: String,
        state: QuestState,
    },
    /// Exact nearby ids, nearest first.
    Nearby(Vec<String>),
    Visited {
        location_id: String,
        yes: bool,
    },
    /// The previous step failed with this code.
    Error(String),
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expectation::Inventory { item_id, qty } => write!(f, "inventory({item_id}) == {qty}"),
            Expectation::Quest { quest_id, state } => write!(f, "quest({quest_id}) == {state}"),
            Expectation::Nearby(ids) => write!(f, "nearby == [{}]", ids.join(", ")),
            Expectation::Visited { location_id, yes } => {
                write!(f, "{}visited({location_id})", if *yes { "" } else { "!" })
            }
            Expectation::Error(code) => write!(f, "error({code})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Do(Action),
    Expect(Expectation),
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Expect(e) => write!(f, "expect {e}"),
            Step::Do(a) => match a {
                Action::Join => f.write_str("join"),
                Action::Move { to } => write!(f, "move {}", format_point(*to)),
                Action::Scan { code } => write!(f, "scan {}", quote(code)),
                Action::QuickTravel { location_id } => write!(f, "quick {location_id}"),
                Action::Pickup { location_id, qty } => write!(f, "pickup {location_id}, {qty}"),
                Action::Drop { item_id, qty } => write!(f, "drop {item_id}, {qty}"),
                Action::Dialog { npc_id, choice } => write!(f, "dialog {npc_id}, {choice}"),
                Action::Answer { location_id, text } => {
                    write!(f, "answer {location_id}, {}", quote(text))
                }
                Action::Triangulate {
                    location_id,
                    points,
                } => write!(
                    f,
                    "triangulate {location_id}, {}, {}, {}",
                    format_point(points[0]),
                    format_point(points[1]),
                    format_point(points[2])
                ),
                Action::Note {
                    note_kind,
                    payload_uri,
                } => write!(f, "note {note_kind}, {}", quote(payload_uri)),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptStep {
    pub line: usize,
    pub step: Step,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Script {
    pub player_id: String,
    pub steps: Vec<ScriptStep>,
}

impl Script {
    pub fn new(player_id: impl Into<String>) -> Self {
        Script {
            player_id: player_id.into(),
            steps: Vec::new(),
        }
    }

    /// Appends a step; handy when building scripts in code.
    pub fn with(mut self, step: Step) -> Self {
        self.steps.push(ScriptStep { line: 0, step });
        self
    }
}

fn read_expectation(c: &mut Cursor<'_>) -> Result<Expectation, ParseError> {
    let negated = c.eat_punct('!');
    let pos = c.pos();
    let name = c.ident()?;
    if negated && name != "visited" {
        return Err(pos.syntax("only visited(..) can be negated"));
    }
    let arg = |c: &mut Cursor<'_>| -> Result<String, ParseError> {
        c.punct('(')?;
        let id = read_id(c)?;
        c.punct(')')?;
        Ok(id)
    };
    let equals = |c: &mut Cursor<'_>| -> Result<(), ParseError> {
        c.punct('=')?;
        c.punct('=')
    };
    Ok(match name.as_str() {
        "inventory" => {
            let item_id = arg(c)?;
            equals(c)?;
            Expectation::Inventory {
                item_id,
                qty: c.uint()?,
            }
        }
        "quest" => {
            let quest_id = arg(c)?;
            equals(c)?;
            let pos = c.pos();
            let state = match c.ident()?.as_str() {
                "complete" => QuestState::Complete,
                "active" => QuestState::Active,
                "inactive" => QuestState::Inactive,
                other => {
                    return Err(pos.syntax(format!(
                        "expected complete, active or inactive, found {other}"
                    )))
                }
            };
            Expectation::Quest { quest_id, state }
        }
        "nearby" => {
            equals(c)?;
            c.punct('[')?;
            let mut ids = Vec::new();
            if !c.eat_punct(']') {
                loop {
                    ids.push(read_id(c)?);
                    if c.eat_punct(']') {
                        break;
                    }
                    c.punct(',')?;
                }
            }
            Expectation::Nearby(ids)
        }
        "visited" => Expectation::Visited {
            location_id: arg(c)?,
            yes: !negated,
        },
        "error" => {
            c.punct('(')?;
            let pos = c.pos();
            let code = c.ident()?;
            if !code.chars().all(|ch| ch.is_ascii_uppercase() || ch == '_') {
                return Err(pos.syntax(format!("error codes are upper snake case, found {code}")));
            }
            c.punct(')')?;
            Expectation::Error(code)
        }
        other => return Err(pos.syntax(format!("unknown expectation `{other}`"))),
    })
}

fn read_step(entry: &Entry) -> Result<Step, ParseError> {
    let mut c = entry.cursor();
    let step = match entry.key.as_str() {
        "move" => Step::Do(Action::Move {
            to: read_point(&mut c)?,
        }),
        "scan" => Step::Do(Action::Scan { code: c.string()? }),
        "quick" => Step::Do(Action::QuickTravel {
            location_id: read_id(&mut c)?,
        }),
        "pickup" => {
            let location_id = read_id(&mut c)?;
            c.punct(',')?;
            Step::Do(Action::Pickup {
                location_id,
                qty: read_count(&mut c)?,
            })
        }
        "drop" => {
            let item_id = read_id(&mut c)?;
            c.punct(',')?;
            Step::Do(Action::Drop {
                item_id,
                qty: read_count(&mut c)?,
            })
        }
        "dialog" => {
            let npc_id = read_id(&mut c)?;
            c.punct(',')?;
            let pos = c.pos();
            let choice = match c.peek() {
                Some(Tok::Ident(w)) if w == "start" => {
                    c.ident()?;
                    Choice::START
                }
                _ => Choice::Option(
                    c.uint()
                        .map_err(|_| pos.syntax("expected `start` or an option index"))?
                        as usize,
                ),
            };
            Step::Do(Action::Dialog { npc_id, choice })
        }
        "answer" => {
            let location_id = read_id(&mut c)?;
            c.punct(',')?;
            Step::Do(Action::Answer {
                location_id,
                text: c.string()?,
            })
        }
        "triangulate" => {
            let location_id = read_id(&mut c)?;
            let mut points = Vec::with_capacity(3);
            for _ in 0..3 {
                c.punct(',')?;
                points.push(read_point(&mut c)?);
            }
            Step::Do(Action::Triangulate {
                location_id,
                points: [points[0], points[1], points[2]],
            })
        }
        "note" => {
            let pos = c.pos();
            let note_kind = c.ident()?.parse::<NoteKind>().map_err(|e| pos.syntax(e))?;
            c.punct(',')?;
            Step::Do(Action::Note {
                note_kind,
                payload_uri: c.string()?,
            })
        }
        "expect" => Step::Expect(read_expectation(&mut c)?),
        other => {
            return Err(entry.pos.error(
                crate::model::ParseErrorKind::UnknownField,
                format!("unknown step `{other}`"),
            ))
        }
    };
    c.finish()?;
    Ok(step)
}

/// Parses a script file. Every problem is reported, not only the first.
pub fn parse_scripts(source: &str) -> Result<Vec<Script>, Vec<ParseError>> {
    let (doc, mut errors) = parse_document(source);
    let mut scripts: Vec<Script> = Vec::new();
    for section in &doc.sections {
        if section.kind != "script" {
            errors.push(section.pos.syntax(format!(
                "expected [script <player>], found [{}]",
                section.kind
            )));
            continue;
        }
        for child in &section.children {
            errors.push(child.pos.syntax("scripts have no nested sections"));
        }
        let Some(player_id) = section.id.clone() else {
            errors.push(section.pos.syntax("[script] needs a player id"));
            continue;
        };
        if !crate::model::is_valid_id(&player_id) {
            errors.push(
                section
                    .id_pos
                    .syntax(format!("bad player id {player_id:?}")),
            );
            continue;
        }
        if scripts.iter().any(|s| s.player_id == player_id) {
            errors.push(section.id_pos.error(
                crate::model::ParseErrorKind::DuplicateId,
                format!("script for `{player_id}` defined twice"),
            ));
            continue;
        }
        let mut script = Script::new(player_id);
        for entry in &section.entries {
            match read_step(entry) {
                Ok(step) => script.steps.push(ScriptStep {
                    line: entry.pos.line,
                    step,
                }),
                Err(e) => errors.push(e),
            }
        }
        scripts.push(script);
    }
    if errors.is_empty() {
        Ok(scripts)
    } else {
        errors.sort_by_key(|e| (e.line, e.column));
        Err(errors)
    }
}
