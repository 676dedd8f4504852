//! Append-only session event logs and deterministic replay.
//!
//! A log is newline-delimited JSON, one [`EventEnvelope`] per line. Floats
//! are written in shortest round-trip form, so a parsed log reproduces the
//! exact values that were recorded.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::ReinforcerCatalog;
use crate::engine::{Engine, EngineConfig, InteractionRecord, WeightVector};
use crate::sim::{GroupAssignment, Phase, PhaseMistakes, SessionLogSummary};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Weights, entropy and regret must replay to within this distance.
pub const REPLAY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum EventPayload {
    SessionStarted {
        config: EngineConfig,
        catalog: ReinforcerCatalog,
        group: GroupAssignment,
    },
    MistakeObserved {
        state_tag: String,
    },
    ReinforcerDispatched {
        id: usize,
    },
    OutcomeRecorded {
        record: InteractionRecord,
    },
    SessionEnded {
        summary: SessionLogSummary,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventEnvelope {
    pub schema_version: u32,
    pub session_id: String,
    /// Per-session sequence number, starting at 0.
    pub seq: u64,
    /// Milliseconds since the Unix epoch (0 when timestamps are disabled).
    pub timestamp: u64,
    pub payload: EventPayload,
}

impl EventEnvelope {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("event envelopes always serialize")
    }

    pub fn from_line(line: &str) -> serde_json::Result<Self> {
        serde_json::from_str(line)
    }
}

/// Where appended envelopes go.
pub trait EventSink {
    fn write_event(&mut self, envelope: &EventEnvelope) -> Result<()>;
}

impl<S: EventSink + ?Sized> EventSink for Box<S> {
    fn write_event(&mut self, envelope: &EventEnvelope) -> Result<()> {
        (**self).write_event(envelope)
    }
}

impl EventSink for Vec<EventEnvelope> {
    fn write_event(&mut self, envelope: &EventEnvelope) -> Result<()> {
        self.push(envelope.clone());
        Ok(())
    }
}

/// Writes one JSON line per event and flushes after each.
#[derive(Debug)]
pub struct JsonLinesSink<W: Write> {
    writer: W,
}

impl<W: Write> JsonLinesSink<W> {
    pub fn new(writer: W) -> Self {
        Self { writer }
    }

    pub fn into_inner(self) -> W {
        self.writer
    }
}

impl<W: Write> EventSink for JsonLinesSink<W> {
    fn write_event(&mut self, envelope: &EventEnvelope) -> Result<()> {
        let mut line = envelope.to_line();
        line.push('\n');
        self.writer.write_all(line.as_bytes())?;
        self.writer.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub seq: u64,
}

#[derive(Debug, Default, Clone, Copy)]
struct Cursor {
    next_seq: u64,
    ended: bool,
}

/// Assigns sequence numbers and enforces the per-session protocol: a
/// session opens with `SessionStarted`, and nothing follows `SessionEnded`.
#[derive(Debug)]
pub struct EventLog<S> {
    sink: S,
    cursors: HashMap<String, Cursor>,
}

impl<S: EventSink> EventLog<S> {
    pub fn new(sink: S) -> Self {
        Self { sink, cursors: HashMap::new() }
    }

    pub fn append(&mut self, session_id: &str, timestamp: u64, payload: EventPayload) -> Result<Ack> {
        let starting = matches!(payload, EventPayload::SessionStarted { .. });
        let cursor = match (self.cursors.get(session_id), starting) {
            (Some(_), true) => {
                return Err(Error::Protocol(format!("session {session_id} already started")));
            }
            (None, false) => {
                return Err(Error::Protocol(format!("session {session_id} has not started")));
            }
            (Some(c), false) if c.ended => {
                return Err(Error::Protocol(format!("session {session_id} has already ended")));
            }
            (Some(c), false) => *c,
            (None, true) => Cursor::default(),
        };
        let envelope = EventEnvelope {
            schema_version: SCHEMA_VERSION,
            session_id: session_id.to_owned(),
            seq: cursor.next_seq,
            timestamp,
            payload,
        };
        self.sink.write_event(&envelope)?;
        let ended = matches!(envelope.payload, EventPayload::SessionEnded { .. });
        self.cursors.insert(
            session_id.to_owned(),
            Cursor { next_seq: cursor.next_seq + 1, ended },
        );
        Ok(Ack { seq: envelope.seq })
    }

    /// Appends a whole trail for one session.
    pub fn append_all(
        &mut self,
        session_id: &str,
        timestamp: u64,
        payloads: impl IntoIterator<Item = EventPayload>,
    ) -> Result<()> {
        for payload in payloads {
            self.append(session_id, timestamp, payload)?;
        }
        Ok(())
    }

    /// Whether `session_id` has ever been started in this log.
    pub fn contains(&self, session_id: &str) -> bool {
        self.cursors.contains_key(session_id)
    }

    pub fn is_open(&self, session_id: &str) -> bool {
        self.cursors.get(session_id).is_some_and(|c| !c.ended)
    }

    pub fn sink(&self) -> &S {
        &self.sink
    }

    pub fn into_sink(self) -> S {
        self.sink
    }

    /// Swaps the sink (e.g. boxes it) while keeping the session cursors.
    pub fn map_sink<T: EventSink>(self, f: impl FnOnce(S) -> T) -> EventLog<T> {
        EventLog { sink: f(self.sink), cursors: self.cursors }
    }

    fn resume(&mut self, existing: &[EventEnvelope]) {
        for e in existing {
            let ended = matches!(e.payload, EventPayload::SessionEnded { .. });
            let cursor = self.cursors.entry(e.session_id.clone()).or_default();
            cursor.next_seq = cursor.next_seq.max(e.seq + 1);
            cursor.ended |= ended;
        }
    }
}

impl EventLog<JsonLinesSink<BufWriter<File>>> {
    /// Opens (or creates) a log file for appending, picking up the sequence
    /// numbers of sessions already in it.
    pub fn open_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let existing = if path.exists() { read_log_file(path)? } else { Vec::new() };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut log = Self::new(JsonLinesSink::new(BufWriter::new(file)));
        log.resume(&existing);
        Ok(log)
    }
}

/// Parses newline-delimited envelopes, skipping blank lines.
pub fn read_events<R: BufRead>(reader: R) -> Result<Vec<EventEnvelope>> {
    let mut events = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let envelope = EventEnvelope::from_line(&line).map_err(|source| Error::Parse { line: idx + 1, source })?;
        events.push(envelope);
    }
    Ok(events)
}

pub fn read_log_file(path: impl AsRef<Path>) -> Result<Vec<EventEnvelope>> {
    read_events(BufReader::new(File::open(path)?))
}

/// Splits a multi-session log into per-session event lists, in order of
/// first appearance.
pub fn split_sessions(events: &[EventEnvelope]) -> Vec<(String, Vec<EventEnvelope>)> {
    let mut order: Vec<(String, Vec<EventEnvelope>)> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    for e in events {
        let idx = *slot.entry(e.session_id.as_str()).or_insert_with(|| {
            order.push((e.session_id.clone(), Vec::new()));
            order.len() - 1
        });
        order[idx].1.push(e.clone());
    }
    order
}

fn phase_of(tag: &str) -> Phase {
    tag.split(':').next().and_then(Phase::parse).unwrap_or(Phase::GuidedResponse)
}

fn is_guided(phase: Phase) -> bool {
    matches!(phase, Phase::GuidedResponse | Phase::GuidedResponseI | Phase::GuidedResponseII)
}

fn tally(mistakes: &mut Vec<PhaseMistakes>, tag: &str) {
    let phase = phase_of(tag);
    match mistakes.iter_mut().find(|m| m.phase == phase) {
        Some(m) => m.count += 1,
        None => mistakes.push(PhaseMistakes { phase, reinforced: is_guided(phase), count: 1 }),
    }
}

/// Per-phase mistake counts from `"{Phase}:{step}"` state tags, in order of
/// first appearance. Tags without a phase prefix count as `GuidedResponse`.
pub fn tally_mistakes<'a>(tags: impl IntoIterator<Item = &'a str>) -> Vec<PhaseMistakes> {
    let mut mistakes = Vec::new();
    for tag in tags {
        tally(&mut mistakes, tag);
    }
    mistakes
}

fn weights_close(a: &WeightVector, b: &WeightVector) -> bool {
    a.len() == b.len()
        && a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| (x - y).abs() <= REPLAY_TOLERANCE)
}

fn compare_records(seq: u64, logged: &InteractionRecord, replayed: &InteractionRecord) -> Result<()> {
    let mismatch = |reason: String| Err(Error::ReplayMismatch { seq, reason });
    if logged.t != replayed.t || logged.selected != replayed.selected || logged.success != replayed.success {
        return mismatch(format!(
            "logged interaction (t={}, selected={}, success={}) does not match replay (t={}, selected={}, success={})",
            logged.t, logged.selected, logged.success, replayed.t, replayed.selected, replayed.success
        ));
    }
    if !weights_close(&logged.weights_after, &replayed.weights_after) {
        return mismatch(format!(
            "weights {:?} differ from replayed {:?}",
            logged.weights_after.as_slice(),
            replayed.weights_after.as_slice()
        ));
    }
    if (logged.entropy_after - replayed.entropy_after).abs() > REPLAY_TOLERANCE {
        return mismatch(format!("entropy {} differs from replayed {}", logged.entropy_after, replayed.entropy_after));
    }
    if (logged.regret - replayed.regret).abs() > REPLAY_TOLERANCE {
        return mismatch(format!("regret {} differs from replayed {}", logged.regret, replayed.regret));
    }
    Ok(())
}

/// Re-executes one session from its events and checks every logged
/// selection and weight vector against the recomputation.
///
/// Learned sessions rebuild the engine from the logged configuration; each
/// `ReinforcerDispatched` must equal the engine's next draw and each
/// `OutcomeRecorded` must match the engine's update to [`REPLAY_TOLERANCE`].
/// Random sessions must log the uniform distribution. A closing
/// `SessionEnded` summary must agree with the replayed records and counts.
pub fn replay_session(events: &[EventEnvelope]) -> Result<SessionLogSummary> {
    let Some(first) = events.first() else {
        return Err(Error::Protocol("cannot replay an empty event list".into()));
    };
    let (config, group) = match &first.payload {
        EventPayload::SessionStarted { config, group, .. } => (config.clone(), *group),
        _ => return Err(Error::Protocol("first event must be SessionStarted".into())),
    };
    let session_id = &first.session_id;
    let n = config.n;
    let mut engine = match group {
        GroupAssignment::Learned => Some(Engine::new(config)?),
        _ => None,
    };
    let uniform = WeightVector::uniform(n);

    let mut mistakes: Vec<PhaseMistakes> = Vec::new();
    let mut records: Vec<InteractionRecord> = Vec::new();
    let mut pending: Option<usize> = None;
    let mut logged_summary: Option<(u64, SessionLogSummary)> = None;
    let mut last_seq = first.seq;

    for e in &events[1..] {
        let seq = e.seq;
        if e.session_id != *session_id {
            return Err(Error::Protocol(format!("event {seq} belongs to session {}", e.session_id)));
        }
        if seq <= last_seq {
            return Err(Error::Protocol(format!("sequence number {seq} follows {last_seq}")));
        }
        last_seq = seq;
        if logged_summary.is_some() {
            return Err(Error::Protocol(format!("event {seq} follows SessionEnded")));
        }
        match &e.payload {
            EventPayload::SessionStarted { .. } => {
                return Err(Error::Protocol(format!("duplicate SessionStarted at {seq}")));
            }
            EventPayload::MistakeObserved { state_tag } => tally(&mut mistakes, state_tag),
            EventPayload::ReinforcerDispatched { id } => {
                if pending.is_some() {
                    return Err(Error::Protocol(format!("dispatch at {seq} while an outcome is pending")));
                }
                if *id >= n {
                    return Err(Error::Protocol(format!("reinforcer {id} out of range at {seq}")));
                }
                match (group, engine.as_mut()) {
                    (GroupAssignment::None, _) => {
                        return Err(Error::Protocol(format!("unreinforced session dispatched at {seq}")));
                    }
                    (GroupAssignment::Learned, Some(engine)) => {
                        let drawn = engine.select_reinforcer();
                        if drawn != *id {
                            return Err(Error::ReplayMismatch {
                                seq,
                                reason: format!("logged reinforcer {id} but the engine draws {drawn}"),
                            });
                        }
                    }
                    _ => {}
                }
                pending = Some(*id);
            }
            EventPayload::OutcomeRecorded { record } => {
                if pending != Some(record.selected) {
                    return Err(Error::Protocol(format!(
                        "outcome for reinforcer {} at {seq} without a matching dispatch",
                        record.selected
                    )));
                }
                pending = None;
                let replayed = match engine.as_mut() {
                    Some(engine) => engine.record_outcome(
                        crate::engine::Outcome { selected: record.selected, success: record.success },
                        record.state_tag.clone(),
                    )?,
                    None => InteractionRecord {
                        t: records.len() as u64 + 1,
                        state_tag: record.state_tag.clone(),
                        selected: record.selected,
                        success: record.success,
                        weights_after: uniform.clone(),
                        entropy_after: uniform.entropy(),
                        regret: 0.0,
                    },
                };
                compare_records(seq, record, &replayed)?;
                records.push(replayed);
            }
            EventPayload::SessionEnded { summary } => {
                logged_summary = Some((seq, summary.clone()));
            }
        }
    }

    let mut summary = SessionLogSummary {
        group,
        mistakes_per_phase: mistakes,
        records,
        identified_preference: engine.as_ref().map(Engine::preferred_reinforcer),
        true_preference: None,
    };

    if let Some((seq, logged)) = logged_summary {
        let mismatch = |reason: String| Err(Error::ReplayMismatch { seq, reason });
        if logged.records.len() != summary.records.len() {
            return mismatch(format!(
                "summary lists {} interactions, replay produced {}",
                logged.records.len(),
                summary.records.len()
            ));
        }
        for (l, r) in logged.records.iter().zip(&summary.records) {
            compare_records(seq, l, r)?;
        }
        if logged.identified_preference != summary.identified_preference {
            return mismatch("identified preference differs from replay".into());
        }
        // Take the logged phase layout (it includes zero-mistake phases) but
        // insist that the counts agree.
        if logged.total_mistakes() != summary.total_mistakes()
            || summary.mistakes_per_phase.iter().any(|m| logged.mistakes_in(m.phase) != m.count)
        {
            return mismatch("mistake counts differ from the observed events".into());
        }
        summary.mistakes_per_phase = logged.mistakes_per_phase;
        summary.true_preference = logged.true_preference;
    }
    Ok(summary)
}

/// Replays every session in a log.
pub fn replay_log(events: &[EventEnvelope]) -> Vec<(String, Result<SessionLogSummary>)> {
    split_sessions(events)
        .into_iter()
        .map(|(id, evs)| {
            let result = replay_session(&evs);
            (id, result)
        })
        .collect()
}
