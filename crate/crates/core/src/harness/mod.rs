//! Scripted bot players.
//!
//! A [`Script`] is run against any [`Transport`]: [`InProcess`] calls the
//! engine directly, other transports talk to a server. Transcripts render only
//! what both can observe, so the same scripts give byte-identical output
//! whichever way they travel.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{
    Action, AnswerResult, DialogStep, EngineError, GameInstance, NoteRecord, PickupResult,
    PlayerView, TriggerReport,
};
use crate::model::Effect;

pub mod random;
mod script;

pub use script::{parse_scripts, Expectation, QuestState, Script, ScriptStep, Step};

/// What a command returned, in transport-neutral form.
#[derive(Debug, Clone, PartialEq)]
pub enum StepResult {
    Joined,
    Report(TriggerReport),
    Picked(PickupResult),
    Dropped { location_id: String },
    Dialog(DialogStep),
    Answer(AnswerResult),
    Note(NoteRecord),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    /// The game refused the command.
    #[error("{code}: {message}")]
    Rejected { code: String, message: String },
    /// The transport itself broke; the run cannot continue.
    #[error("TRANSPORT_FAILURE: {0}")]
    Failure(String),
}

impl From<EngineError> for TransportError {
    fn from(e: EngineError) -> Self {
        TransportError::Rejected {
            code: e.code().to_string(),
            message: e.to_string(),
        }
    }
}

pub trait Transport {
    fn perform(&mut self, player_id: &str, action: &Action) -> Result<StepResult, TransportError>;
    fn view(&mut self, player_id: &str) -> Result<PlayerView, TransportError>;
}

/// Drives an engine instance directly.
#[derive(Debug, Clone)]
pub struct InProcess {
    pub game: GameInstance,
}

impl InProcess {
    pub fn new(game: GameInstance) -> Self {
        InProcess { game }
    }
}

impl Transport for InProcess {
    fn perform(&mut self, player_id: &str, action: &Action) -> Result<StepResult, TransportError> {
        let g = &mut self.game;
        Ok(match action {
            Action::Join => {
                g.join_game(player_id)?;
                StepResult::Joined
            }
            Action::Move { to } => StepResult::Report(g.update_position(player_id, *to)?),
            Action::Scan { code } => StepResult::Report(g.scan_code(player_id, code)?),
            Action::QuickTravel { location_id } => {
                StepResult::Report(g.quick_travel(player_id, location_id)?)
            }
            Action::Pickup { location_id, qty } => {
                StepResult::Picked(g.pickup_item(player_id, location_id, *qty)?)
            }
            Action::Drop { item_id, qty } => StepResult::Dropped {
                location_id: g.drop_item(player_id, item_id, *qty)?,
            },
            Action::Dialog { npc_id, choice } => {
                StepResult::Dialog(g.advance_dialog(player_id, npc_id, *choice)?)
            }
            Action::Answer { location_id, text } => {
                StepResult::Answer(g.submit_answer(player_id, location_id, text)?)
            }
            Action::Triangulate {
                location_id,
                points,
            } => StepResult::Answer(g.submit_triangulation(player_id, location_id, *points)?),
            Action::Note {
                note_kind,
                payload_uri,
            } => StepResult::Note(g.capture_note(player_id, *note_kind, payload_uri)?),
        })
    }

    fn view(&mut self, player_id: &str) -> Result<PlayerView, TransportError> {
        Ok(self.game.player_view(player_id)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEntry {
    /// 0 is the implicit join; script steps count from 1.
    pub index: usize,
    pub step: String,
    pub result: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub index: usize,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub player_id: String,
    pub entries: Vec<TranscriptEntry>,
    pub failures: Vec<Failure>,
    /// Set when the transport broke and the run stopped early.
    pub aborted: Option<String>,
}

impl Transcript {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.aborted.is_none()
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "script {}", self.player_id)?;
        for e in &self.entries {
            writeln!(f, "  {:>3} {} -> {}", e.index, e.step, e.result)?;
        }
        for fail in &self.failures {
            writeln!(
                f,
                "  FAIL step {}: expected {}, got {}",
                fail.index, fail.expected, fail.actual
            )?;
        }
        if let Some(reason) = &self.aborted {
            writeln!(f, "  ABORTED {reason}")?;
        }
        writeln!(f, "  {}", if self.passed() { "PASSED" } else { "FAILED" })
    }
}

/// Renders several transcripts as one document.
pub fn render_transcripts(transcripts: &[Transcript]) -> String {
    transcripts.iter().map(ToString::to_string).collect()
}

fn list<T: fmt::Display>(items: &[T]) -> String {
    let parts: Vec<String> = items.iter().map(ToString::to_string).collect();
    format!("[{}]", parts.join(", "))
}

fn effects(e: &[Effect]) -> String {
    list(e)
}

fn inventory(inv: &BTreeMap<String, u32>) -> String {
    let parts: Vec<String> = inv.iter().map(|(k, v)| format!("{k}: {v}")).collect();
    format!("{{{}}}", parts.join(", "))
}

/// One-line rendering of a step result. Distances use two decimals.
pub fn render_result(r: &StepResult) -> String {
    match r {
        StepResult::Joined => "joined".into(),
        StepResult::Report(rep) => {
            let nearby: Vec<String> = rep
                .nearby
                .iter()
                .map(|n| format!("{} {:.2}m", n.location_id, n.distance_m))
                .collect();
            let mut s = format!("nearby {}", list(&nearby));
            if !rep.newly_visited.is_empty() {
                let _ = write!(s, " visited {}", list(&rep.newly_visited));
            }
            if !rep.hazards_hit.is_empty() {
                let _ = write!(s, " hazards {}", list(&rep.hazards_hit));
            }
            if !rep.fired_effects.is_empty() {
                let _ = write!(s, " fired {}", effects(&rep.fired_effects));
            }
            s
        }
        StepResult::Picked(p) => format!("taken {} inventory {}", p.taken, inventory(&p.inventory)),
        StepResult::Dropped { location_id } => format!("dropped as {location_id}"),
        StepResult::Dialog(DialogStep::Node {
            node,
            fired_effects,
        }) => {
            let options: Vec<String> = node.options.iter().map(|o| format!("{o:?}")).collect();
            let mut s = format!(
                "{} says {:?} options {}",
                node.speaker,
                node.text,
                list(&options)
            );
            if !fired_effects.is_empty() {
                let _ = write!(s, " fired {}", effects(fired_effects));
            }
            s
        }
        StepResult::Dialog(DialogStep::Ended { fired_effects }) => {
            if fired_effects.is_empty() {
                "ended".into()
            } else {
                format!("ended fired {}", effects(fired_effects))
            }
        }
        StepResult::Answer(AnswerResult::Incorrect) => "incorrect".into(),
        StepResult::Answer(AnswerResult::Correct { fired_effects }) => {
            if fired_effects.is_empty() {
                "correct".into()
            } else {
                format!("correct fired {}", effects(fired_effects))
            }
        }
        StepResult::Note(n) => format!("note {} seq {}", n.note_id, n.seq),
    }
}

fn check(expect: &Expectation, view: &PlayerView) -> Result<(), (String, String)> {
    let (want, got) = match expect {
        Expectation::Inventory { item_id, qty } => {
            (qty.to_string(), view.player.qty(item_id).to_string())
        }
        Expectation::Quest { quest_id, state } => {
            let actual = if view.quests.complete.contains(quest_id) {
                QuestState::Complete
            } else if view.quests.active.contains(quest_id) {
                QuestState::Active
            } else {
                QuestState::Inactive
            };
            (state.to_string(), actual.to_string())
        }
        Expectation::Nearby(ids) => {
            let actual: Vec<String> = view.nearby.iter().map(|n| n.location_id.clone()).collect();
            (list(ids), list(&actual))
        }
        Expectation::Visited { location_id, yes } => {
            let actual = view.player.visited.contains(location_id);
            let word = |b: bool| if b { "visited" } else { "not visited" }.to_string();
            (word(*yes), word(actual))
        }
        Expectation::Error(_) => {
            unreachable!("error expectations are checked against the previous step")
        }
    };
    if want == got {
        Ok(())
    } else {
        Err((want, got))
    }
}

/// Executes scripts one step at a time on a shared transport.
struct Runner<'s> {
    script: &'s Script,
    next: usize,
    transcript: Transcript,
    /// Error code of the previous step, until an `expect error(..)` claims it.
    pending_error: Option<(usize, String)>,
}

impl<'s> Runner<'s> {
    fn new(script: &'s Script) -> Self {
        Runner {
            script,
            next: 0,
            transcript: Transcript {
                player_id: script.player_id.clone(),
                entries: Vec::new(),
                failures: Vec::new(),
                aborted: None,
            },
            pending_error: None,
        }
    }

    fn done(&self) -> bool {
        self.transcript.aborted.is_some() || self.next >= self.script.steps.len()
    }

    fn unexpected_error(&mut self) {
        if let Some((index, code)) = self.pending_error.take() {
            self.transcript.failures.push(Failure {
                index,
                expected: "success".into(),
                actual: format!("error {code}"),
            });
        }
    }

    fn record(&mut self, index: usize, step: String, result: String) {
        self.transcript.entries.push(TranscriptEntry {
            index,
            step,
            result,
        });
    }

    fn run_action(&mut self, t: &mut dyn Transport, index: usize, action: &Action, label: String) {
        match t.perform(&self.script.player_id, action) {
            Ok(r) => self.record(index, label, render_result(&r)),
            Err(TransportError::Rejected { code, .. }) => {
                self.record(index, label, format!("error {code}"));
                self.pending_error = Some((index, code));
            }
            Err(TransportError::Failure(reason)) => {
                self.record(index, label, "transport failure".into());
                self.transcript.aborted = Some(reason);
            }
        }
    }

    fn join(&mut self, t: &mut dyn Transport) {
        self.run_action(t, 0, &Action::Join, "join".into());
    }

    fn step(&mut self, t: &mut dyn Transport) {
        let index = self.next + 1;
        let step = &self.script.steps[self.next].step;
        self.next += 1;
        let label = step.to_string();
        match step {
            Step::Do(action) => {
                self.unexpected_error();
                self.run_action(t, index, action, label);
            }
            Step::Expect(Expectation::Error(code)) => {
                let actual = self.pending_error.take().map(|(_, c)| c);
                if actual.as_deref() == Some(code.as_str()) {
                    self.record(index, label, "ok".into());
                } else {
                    let actual = actual.map_or("success".to_string(), |c| format!("error {c}"));
                    self.record(index, label, format!("FAIL {actual}"));
                    self.transcript.failures.push(Failure {
                        index,
                        expected: format!("error {code}"),
                        actual,
                    });
                }
            }
            Step::Expect(expect) => {
                self.unexpected_error();
                match t.view(&self.script.player_id) {
                    Ok(view) => match check(expect, &view) {
                        Ok(()) => self.record(index, label, "ok".into()),
                        Err((expected, actual)) => {
                            self.record(index, label, format!("FAIL {actual}"));
                            self.transcript.failures.push(Failure {
                                index,
                                expected,
                                actual,
                            });
                        }
                    },
                    Err(TransportError::Rejected { code, .. }) => {
                        self.record(index, label, format!("error {code}"));
                        self.transcript.failures.push(Failure {
                            index,
                            expected: expect.to_string(),
                            actual: format!("error {code}"),
                        });
                    }
                    Err(TransportError::Failure(reason)) => {
                        self.record(index, label, "transport failure".into());
                        self.transcript.aborted = Some(reason);
                    }
                }
            }
        }
    }

    fn finish(mut self) -> Transcript {
        self.unexpected_error();
        self.transcript
    }
}

/// Joins the script's player and runs its steps in order.
pub fn run_script(transport: &mut dyn Transport, script: &Script) -> Transcript {
    let mut runner = Runner::new(script);
    runner.join(transport);
    while !runner.done() {
        runner.step(transport);
    }
    runner.finish()
}

/// Runs several scripts against one game, interleaving their steps.
///
/// Every player joins first, in script order. Then rounds visit the scripts
/// in order and each unfinished script takes a step unless the seeded coin
/// says skip; a round where everyone skipped advances the first unfinished
/// script, so runs always terminate.
pub fn run_concurrent(
    transport: &mut dyn Transport,
    scripts: &[Script],
    seed: u64,
) -> Vec<Transcript> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut runners: Vec<Runner<'_>> = scripts.iter().map(Runner::new).collect();
    for r in &mut runners {
        r.join(transport);
    }
    while runners.iter().any(|r| !r.done()) {
        let mut progressed = false;
        for r in runners.iter_mut() {
            if !r.done() && !rng.random_ratio(1, 3) {
                r.step(transport);
                progressed = true;
            }
        }
        if !progressed {
            if let Some(r) = runners.iter_mut().find(|r| !r.done()) {
                r.step(transport);
            }
        }
    }
    runners.into_iter().map(Runner::finish).collect()
}
