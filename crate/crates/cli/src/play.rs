use std::io::{self, BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use locus_core::engine::{Action, Choice, DialogStep, EngineError, GameInstance, NoteKind};
use locus_core::geo::GeoPoint;
use locus_core::harness::{render_result, InProcess, StepResult, Transport};
use locus_core::model::GameSpec;

use crate::{load_game, EXIT_ENV, EXIT_OK};

const HELP: &str = "\
commands:
  move <lat> <lon>              walk to a point
  scan <code>                   scan a QR code
  travel <location>             quick travel, when the game allows it
  pickup <location> [qty]       take items (default 1)
  drop <item> [qty]             leave items where you stand (default 1)
  talk <npc> [option]           start a conversation, or pick an option
  answer <location> <text...>   answer a plaque's question
  triangulate <location> <lat> <lon> <lat> <lon> <lat> <lon>
  note <photo|video|audio|text> <uri>
  nearby | inv | quests | help | quit";

/// One player's terminal session. Each command maps to one engine call.
pub struct Repl {
    transport: InProcess,
    player: String,
}

impl Repl {
    /// Joins `player` and returns the session with its greeting.
    pub fn new(spec: Arc<GameSpec>, player: &str) -> Result<(Self, String), EngineError> {
        let mut game = GameInstance::new(spec)?;
        let state = game.join_game(player)?;
        let spec = game.spec();
        let mut greeting = format!("{} ({}) joined as {player}", spec.name, spec.game_id);
        if !state.visited.is_empty() {
            let v: Vec<&str> = state.visited.iter().map(String::as_str).collect();
            greeting.push_str(&format!("\nvisited [{}]", v.join(", ")));
        }
        greeting.push_str("\ntype `help` for commands");
        Ok((
            Repl {
                transport: InProcess::new(game),
                player: player.to_string(),
            },
            greeting,
        ))
    }

    pub fn game(&self) -> &GameInstance {
        &self.transport.game
    }

    /// Runs one command line. `None` ends the session.
    pub fn exec(&mut self, line: &str) -> Option<String> {
        let words: Vec<&str> = line.split_whitespace().collect();
        let Some((&cmd, args)) = words.split_first() else {
            return Some(String::new());
        };
        let action = match cmd {
            "quit" | "exit" => return None,
            "help" => return Some(HELP.into()),
            "inv" => return Some(self.inventory()),
            "quests" => return Some(self.quests()),
            "nearby" => return Some(self.nearby()),
            "answer" => match args {
                [loc, _, ..] => {
                    let text = line.trim_start()[cmd.len()..].trim_start()[loc.len()..].trim();
                    Ok(Action::Answer {
                        location_id: loc.to_string(),
                        text: text.to_string(),
                    })
                }
                _ => Err("answer <location> <text...>"),
            },
            _ => parse_action(cmd, args),
        };
        Some(match action {
            Ok(action) => self.perform(&action),
            Err("") => {
                format!("unknown command `{cmd}`; type `help` for the list")
            }
            Err(usage) => format!("usage: {usage}"),
        })
    }

    /// Reads commands until `quit` or end of input.
    pub fn run<R: BufRead, W: Write>(&mut self, mut input: R, out: &mut W) -> io::Result<()> {
        let mut line = String::new();
        loop {
            write!(out, "> ")?;
            out.flush()?;
            line.clear();
            if input.read_line(&mut line)? == 0 {
                writeln!(out)?;
                return Ok(());
            }
            match self.exec(&line) {
                Some(reply) if reply.is_empty() => {}
                Some(reply) => writeln!(out, "{reply}")?,
                None => return Ok(()),
            }
        }
    }

    fn perform(&mut self, action: &Action) -> String {
        match self.transport.perform(&self.player, action) {
            Ok(StepResult::Dialog(DialogStep::Node {
                node,
                fired_effects,
            })) => {
                let mut s = format!("{}: {:?}", node.speaker, node.text);
                for (i, o) in node.options.iter().enumerate() {
                    s.push_str(&format!("\n  {i}) {o}"));
                }
                if node.options.is_empty() {
                    s.push_str("\n  (no replies)");
                }
                if !fired_effects.is_empty() {
                    let e: Vec<String> = fired_effects.iter().map(ToString::to_string).collect();
                    s.push_str(&format!("\nfired [{}]", e.join(", ")));
                }
                s
            }
            Ok(r) => render_result(&r),
            Err(e) => format!("error: {e}"),
        }
    }

    fn inventory(&self) -> String {
        match self.game().player(&self.player) {
            Ok(p) if p.inventory.is_empty() => "(empty)".into(),
            Ok(p) => p
                .inventory
                .iter()
                .map(|(item, qty)| format!("{item}: {qty}"))
                .collect::<Vec<_>>()
                .join("\n"),
            Err(e) => format!("error: {}: {e}", e.code()),
        }
    }

    fn quests(&self) -> String {
        match self.game().quest_status(&self.player) {
            Ok(q) => format!(
                "active [{}]\ncomplete [{}]",
                q.active.join(", "),
                q.complete.join(", ")
            ),
            Err(e) => format!("error: {}: {e}", e.code()),
        }
    }

    fn nearby(&self) -> String {
        match self.game().nearby(&self.player) {
            Ok(n) if n.is_empty() => "(nothing nearby)".into(),
            Ok(n) => n
                .iter()
                .map(|e| format!("{} {:.2}m", e.location_id, e.distance_m))
                .collect::<Vec<_>>()
                .join("\n"),
            Err(e) => format!("error: {}: {e}", e.code()),
        }
    }
}

/// An action from a command, or its usage line. An empty usage line means
/// the command is unknown.
fn parse_action(cmd: &str, args: &[&str]) -> Result<Action, &'static str> {
    fn point(lat: &str, lon: &str) -> Option<GeoPoint> {
        GeoPoint::new(lat.parse().ok()?, lon.parse().ok()?).ok()
    }
    fn qty(arg: Option<&&str>) -> Option<u32> {
        arg.map_or(Some(1), |s| s.parse().ok())
    }
    let usage = match cmd {
        "move" => "move <lat> <lon>",
        "scan" => "scan <code>",
        "travel" => "travel <location>",
        "pickup" => "pickup <location> [qty]",
        "drop" => "drop <item> [qty]",
        "talk" => "talk <npc> [option]",
        "triangulate" => "triangulate <location> <lat> <lon> <lat> <lon> <lat> <lon>",
        "note" => "note <photo|video|audio|text> <uri>",
        _ => return Err(""),
    };
    let action = match (cmd, args) {
        ("move", [lat, lon]) => point(lat, lon).map(|to| Action::Move { to }),
        ("scan", [code]) => Some(Action::Scan {
            code: code.to_string(),
        }),
        ("travel", [loc]) => Some(Action::QuickTravel {
            location_id: loc.to_string(),
        }),
        ("pickup", [loc, rest @ ..]) if rest.len() <= 1 => {
            qty(rest.first()).map(|qty| Action::Pickup {
                location_id: loc.to_string(),
                qty,
            })
        }
        ("drop", [item, rest @ ..]) if rest.len() <= 1 => {
            qty(rest.first()).map(|qty| Action::Drop {
                item_id: item.to_string(),
                qty,
            })
        }
        ("talk", [npc]) => Some(Action::Dialog {
            npc_id: npc.to_string(),
            choice: Choice::START,
        }),
        ("talk", [npc, n]) => n.parse().ok().map(|choice| Action::Dialog {
            npc_id: npc.to_string(),
            choice,
        }),
        ("triangulate", [loc, a, b, c, d, e, f]) => match (point(a, b), point(c, d), point(e, f)) {
            (Some(p), Some(q), Some(r)) => Some(Action::Triangulate {
                location_id: loc.to_string(),
                points: [p, q, r],
            }),
            _ => None,
        },
        ("note", [kind, uri]) => {
            let note_kind = match *kind {
                "photo" => Some(NoteKind::Photo),
                "video" => Some(NoteKind::Video),
                "audio" => Some(NoteKind::Audio),
                "text" => Some(NoteKind::Text),
                _ => None,
            };
            note_kind.map(|note_kind| Action::Note {
                note_kind,
                payload_uri: uri.to_string(),
            })
        }
        _ => None,
    };
    action.ok_or(usage)
}

pub fn run(path: &Path, player: &str) -> i32 {
    let spec = match load_game(path) {
        Ok(s) => Arc::new(s),
        Err(e) => {
            eprintln!("{}", e.report(path));
            return e.exit_code();
        }
    };
    let (mut repl, greeting) = match Repl::new(spec, player) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {}: {e}", e.code());
            return crate::EXIT_INPUT;
        }
    };
    println!("{greeting}");
    match repl.run(io::stdin().lock(), &mut io::stdout().lock()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            EXIT_ENV
        }
    }
}
