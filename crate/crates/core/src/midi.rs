//! Standard MIDI File (format 0/1) reading and writing.
//!
//! Only what the labeling pipeline needs is interpreted: note on/off,
//! program changes and tempo. Everything else is skipped by length.

use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::notes::{NoteEvent, NoteSequence, HIGHEST_PITCH, LOWEST_PITCH};

pub const DEFAULT_US_PER_QUARTER: u32 = 500_000;
const DRUM_CHANNEL: u8 = 9;
/// Resolution used when writing files.
pub const WRITE_TICKS_PER_QUARTER: u16 = 480;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    NoteOn { channel: u8, key: u8, velocity: u8 },
    NoteOff { channel: u8, key: u8 },
    ProgramChange { channel: u8, program: u8 },
    Tempo { us_per_quarter: u32 },
    EndOfTrack,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimedEvent {
    pub tick: u64,
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmfFile {
    pub format: u16,
    pub ticks_per_quarter: u16,
    pub tracks: Vec<Vec<TimedEvent>>,
    pub tempo: TempoMap,
}

impl SmfFile {
    /// All events of all tracks ordered by tick; ties keep track order, then file order.
    pub fn merged_events(&self) -> Vec<TimedEvent> {
        let mut all: Vec<(u64, usize, usize, TimedEvent)> = self
            .tracks
            .iter()
            .enumerate()
            .flat_map(|(ti, tr)| tr.iter().enumerate().map(move |(ei, e)| (e.tick, ti, ei, *e)))
            .collect();
        all.sort_by_key(|&(tick, ti, ei, _)| (tick, ti, ei));
        all.into_iter().map(|(.., e)| e).collect()
    }
}

/// Piecewise-constant tempo as `(tick, µs per quarter)` breakpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct TempoMap {
    ticks_per_quarter: u16,
    entries: Vec<(u64, u32)>,
    // seconds elapsed at each breakpoint
    starts: Vec<f64>,
}

impl TempoMap {
    /// Builds a map from tempo changes in any order. Later changes at the same
    /// tick win; a default 120 bpm entry is inserted at tick 0 if needed.
    pub fn new(ticks_per_quarter: u16, changes: &[(u64, u32)]) -> Result<Self> {
        if ticks_per_quarter == 0 {
            return Err(Error::UnsupportedMidi("zero ticks per quarter".into()));
        }
        let mut sorted: Vec<(u64, u32)> = changes.iter().copied().filter(|&(_, us)| us > 0).collect();
        sorted.sort_by_key(|&(tick, _)| tick);
        let mut entries: Vec<(u64, u32)> = Vec::with_capacity(sorted.len() + 1);
        for (tick, us) in sorted {
            match entries.last_mut() {
                Some(last) if last.0 == tick => last.1 = us,
                _ => entries.push((tick, us)),
            }
        }
        if entries.first().is_none_or(|&(t, _)| t > 0) {
            entries.insert(0, (0, DEFAULT_US_PER_QUARTER));
        }
        let mut starts = Vec::with_capacity(entries.len());
        let mut acc = 0.0;
        for (i, &(tick, _)) in entries.iter().enumerate() {
            if i > 0 {
                let (prev_tick, prev_us) = entries[i - 1];
                acc += Self::span(tick - prev_tick, prev_us, ticks_per_quarter);
            }
            starts.push(acc);
        }
        Ok(TempoMap {
            ticks_per_quarter,
            entries,
            starts,
        })
    }

    fn span(ticks: u64, us_per_quarter: u32, tpq: u16) -> f64 {
        (ticks as f64 * us_per_quarter as f64) / (tpq as f64 * 1e6)
    }

    pub fn ticks_per_quarter(&self) -> u16 {
        self.ticks_per_quarter
    }

    pub fn entries(&self) -> &[(u64, u32)] {
        &self.entries
    }

    pub fn seconds(&self, tick: u64) -> f64 {
        let k = self.entries.partition_point(|&(t, _)| t <= tick) - 1;
        let (start_tick, us) = self.entries[k];
        self.starts[k] + Self::span(tick - start_tick, us, self.ticks_per_quarter)
    }

    /// Nearest tick to `seconds` (inverse of [`seconds`](Self::seconds)).
    pub fn tick_at(&self, seconds: f64) -> u64 {
        let k = self.starts.partition_point(|&s| s <= seconds).max(1) - 1;
        let (start_tick, us) = self.entries[k];
        let rel = (seconds - self.starts[k]) * self.ticks_per_quarter as f64 * 1e6 / us as f64;
        start_tick + rel.max(0.0).round() as u64
    }
}

/// Maps General MIDI programs to instrument classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstrumentMap {
    names: Vec<String>,
    programs: [Option<u16>; 128],
    drums: Option<u16>,
    sensitive: bool,
    representative: Vec<u8>,
}

impl Default for InstrumentMap {
    fn default() -> Self {
        Self::pitch_only()
    }
}

impl InstrumentMap {
    /// Every melodic program collapses to one class and notes carry no instrument id.
    pub fn pitch_only() -> Self {
        InstrumentMap {
            names: vec!["any".into()],
            programs: [Some(0); 128],
            drums: None,
            sensitive: false,
            representative: vec![0],
        }
    }

    /// The eleven MusicNet classes plus guitar.
    pub fn musicnet_with_guitar() -> Self {
        let table: [(&str, &[u8]); 12] = [
            ("piano", &[0, 1, 2, 3, 4, 5, 7]),
            ("harpsichord", &[6]),
            ("violin", &[40]),
            ("viola", &[41]),
            ("cello", &[42]),
            ("contrabass", &[43]),
            ("horn", &[60]),
            ("oboe", &[68]),
            ("bassoon", &[70]),
            ("clarinet", &[71]),
            ("flute", &[73]),
            ("guitar", &[24, 25, 26, 27, 28, 29, 30, 31]),
        ];
        let mut programs = [None; 128];
        let mut names = Vec::new();
        let mut representative = Vec::new();
        for (class, (name, progs)) in table.iter().enumerate() {
            names.push(name.to_string());
            representative.push(progs[0]);
            for &p in progs.iter() {
                programs[p as usize] = Some(class as u16);
            }
        }
        InstrumentMap {
            names,
            programs,
            drums: None,
            sensitive: true,
            representative,
        }
    }

    /// A sensitive map with `count` anonymous classes, class `i` on program `i`.
    pub fn identity(count: usize) -> Result<Self> {
        if count == 0 || count > 15 {
            return Err(Error::InvalidConfig(format!("identity instrument map needs 1..=15 classes, got {count}")));
        }
        let mut programs = [None; 128];
        for (i, slot) in programs.iter_mut().take(count).enumerate() {
            *slot = Some(i as u16);
        }
        Ok(InstrumentMap {
            names: (0..count).map(|i| format!("class{i}")).collect(),
            programs,
            drums: None,
            sensitive: true,
            representative: (0..count as u8).collect(),
        })
    }

    pub fn class_count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_instrument_sensitive(&self) -> bool {
        self.sensitive
    }

    pub fn with_drums(mut self, class: Option<u16>) -> Self {
        self.drums = class;
        self
    }

    /// Class of a note played on `channel` with `program` active, `None` if ignored.
    pub fn classify(&self, channel: u8, program: u8) -> Option<u16> {
        if channel == DRUM_CHANNEL {
            self.drums
        } else {
            self.programs[program as usize & 0x7f]
        }
    }

    /// Program written for a class.
    pub fn program_for(&self, class: u16) -> u8 {
        self.representative.get(class as usize).copied().unwrap_or(0)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Midi {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return self.err(format!("need {n} bytes, {} left", self.bytes.len() - self.pos));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn varlen(&mut self) -> Result<u32> {
        let mut value = 0u32;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | (b & 0x7f) as u32;
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        self.err("variable-length quantity longer than 4 bytes")
    }
}

/// Parses a format 0 or 1 Standard MIDI File.
pub fn parse_smf(bytes: &[u8]) -> Result<SmfFile> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).ok() != Some(b"MThd".as_slice()) {
        return Err(Error::Midi {
            offset: 0,
            message: "missing MThd header".into(),
        });
    }
    let header_len = r.u32()? as usize;
    if header_len < 6 {
        return r.err(format!("header length {header_len} < 6"));
    }
    let header_end = r.pos + header_len;
    let format = r.u16()?;
    let _declared_tracks = r.u16()?;
    let division = r.u16()?;
    if format > 1 {
        return Err(Error::UnsupportedMidi(format!("format {format}")));
    }
    if division & 0x8000 != 0 {
        return Err(Error::UnsupportedMidi("SMPTE time division".into()));
    }
    if division == 0 {
        return r.err("zero ticks per quarter");
    }
    if header_end > bytes.len() {
        return r.err("header chunk runs past end of file");
    }
    r.pos = header_end;

    let mut tracks = Vec::new();
    while r.pos < bytes.len() {
        let chunk_start = r.pos;
        let id = r.take(4)?;
        let len = r.u32()? as usize;
        if bytes.len() - r.pos < len {
            return Err(Error::Midi {
                offset: chunk_start,
                message: format!("chunk length {len} exceeds remaining {} bytes", bytes.len() - r.pos),
            });
        }
        let body_start = r.pos;
        if id == b"MTrk" {
            tracks.push(parse_track(bytes, body_start, body_start + len)?);
        }
        r.pos = body_start + len;
    }

    let changes: Vec<(u64, u32)> = tracks
        .iter()
        .flatten()
        .filter_map(|e| match e.kind {
            EventKind::Tempo { us_per_quarter } => Some((e.tick, us_per_quarter)),
            _ => None,
        })
        .collect();
    let tempo = TempoMap::new(division, &changes)?;
    Ok(SmfFile {
        format,
        ticks_per_quarter: division,
        tracks,
        tempo,
    })
}

fn parse_track(bytes: &[u8], start: usize, end: usize) -> Result<Vec<TimedEvent>> {
    let mut r = Reader {
        bytes: &bytes[..end],
        pos: start,
    };
    let mut events = Vec::new();
    let mut tick = 0u64;
    let mut running: Option<u8> = None;
    while r.pos < end {
        tick += r.varlen()? as u64;
        let first = r.u8()?;
        let status = if first & 0x80 != 0 {
            first
        } else {
            // running status: `first` is already the first data byte
            r.pos -= 1;
            match running {
                Some(s) => s,
                None => return r.err("data byte without running status"),
            }
        };
        match status {
            0x80..=0xef => {
                running = Some(status);
                let channel = status & 0x0f;
                let a = r.u8()? & 0x7f;
                let b = if matches!(status & 0xf0, 0xc0 | 0xd0) { 0 } else { r.u8()? & 0x7f };
                let kind = match status & 0xf0 {
                    0x90 if b > 0 => Some(EventKind::NoteOn {
                        channel,
                        key: a,
                        velocity: b,
                    }),
                    0x90 | 0x80 => Some(EventKind::NoteOff { channel, key: a }),
                    0xc0 => Some(EventKind::ProgramChange { channel, program: a }),
                    _ => None,
                };
                if let Some(kind) = kind {
                    events.push(TimedEvent { tick, kind });
                }
            }
            0xff => {
                running = None;
                let meta = r.u8()?;
                let len = r.varlen()? as usize;
                let data = r.take(len)?;
                match meta {
                    0x51 if len == 3 => {
                        let us = u32::from_be_bytes([0, data[0], data[1], data[2]]);
                        events.push(TimedEvent {
                            tick,
                            kind: EventKind::Tempo { us_per_quarter: us },
                        });
                    }
                    0x2f => {
                        events.push(TimedEvent {
                            tick,
                            kind: EventKind::EndOfTrack,
                        });
                    }
                    _ => {}
                }
            }
            0xf0 | 0xf7 => {
                running = None;
                let len = r.varlen()? as usize;
                r.take(len)?;
            }
            other => {
                r.pos -= 1;
                return r.err(format!("unexpected status byte {other:#04x}"));
            }
        }
    }
    Ok(events)
}

/// Counts of notes that did not make it into the sequence unchanged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub notes: usize,
    pub dropped_out_of_range: usize,
    pub dropped_ignored: usize,
    pub dropped_empty: usize,
    pub dangling_closed: usize,
    pub unmatched_note_offs: usize,
}

/// Pairs note-on/off events FIFO per `(channel, key)` and converts ticks to seconds.
pub fn to_note_sequence(smf: &SmfFile, imap: &InstrumentMap) -> Result<(NoteSequence, IngestReport)> {
    events_to_notes(&smf.merged_events(), &smf.tempo, imap)
}

/// Same as [`to_note_sequence`] for an already merged, tick-ordered event list.
pub fn events_to_notes(
    events: &[TimedEvent],
    tempo: &TempoMap,
    imap: &InstrumentMap,
) -> Result<(NoteSequence, IngestReport)> {
    let mut report = IngestReport::default();
    let mut programs = [0u8; 16];
    let mut open: HashMap<(u8, u8), VecDeque<(u64, u8, u8)>> = HashMap::new();
    let mut raw: Vec<(u8, u8, u64, u64, u8, u8)> = Vec::new();
    let end_tick = events.iter().map(|e| e.tick).max().unwrap_or(0);

    for e in events {
        match e.kind {
            EventKind::ProgramChange { channel, program } => programs[channel as usize] = program,
            EventKind::NoteOn { channel, key, velocity } => {
                open.entry((channel, key))
                    .or_default()
                    .push_back((e.tick, velocity, programs[channel as usize]));
            }
            EventKind::NoteOff { channel, key } => match open.get_mut(&(channel, key)).and_then(VecDeque::pop_front) {
                Some((on, vel, prog)) => raw.push((channel, key, on, e.tick, vel, prog)),
                None => report.unmatched_note_offs += 1,
            },
            EventKind::Tempo { .. } | EventKind::EndOfTrack => {}
        }
    }
    let mut dangling: Vec<_> = open.into_iter().collect();
    dangling.sort_by_key(|(k, _)| *k);
    for ((channel, key), queue) in dangling {
        for (on, vel, prog) in queue {
            report.dangling_closed += 1;
            raw.push((channel, key, on, end_tick, vel, prog));
        }
    }

    let mut notes = Vec::with_capacity(raw.len());
    for (channel, key, on, off, vel, prog) in raw {
        if !(LOWEST_PITCH..=HIGHEST_PITCH).contains(&key) {
            report.dropped_out_of_range += 1;
            continue;
        }
        let Some(class) = imap.classify(channel, prog) else {
            report.dropped_ignored += 1;
            continue;
        };
        if off <= on {
            report.dropped_empty += 1;
            continue;
        }
        notes.push(NoteEvent {
            pitch: key,
            onset_s: tempo.seconds(on),
            offset_s: tempo.seconds(off),
            instrument: imap.is_instrument_sensitive().then_some(class),
            velocity: Some(vel),
        });
    }
    report.notes = notes.len();
    let seq = NoteSequence::new(notes, imap.class_count())?;
    Ok((seq, report))
}

/// Parses bytes and converts in one go.
pub fn read_notes(bytes: &[u8], imap: &InstrumentMap) -> Result<(NoteSequence, IngestReport)> {
    to_note_sequence(&parse_smf(bytes)?, imap)
}

fn push_varlen(out: &mut Vec<u8>, mut value: u32) {
    let mut buf = [0u8; 4];
    let mut n = 0;
    loop {
        buf[n] = (value & 0x7f) as u8;
        n += 1;
        value >>= 7;
        if value == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(buf[i] | if i > 0 { 0x80 } else { 0 });
    }
}

fn channel_for(class: u16) -> Result<u8> {
    match class {
        0..=8 => Ok(class as u8),
        9..=14 => Ok(class as u8 + 1),
        _ => Err(Error::InvalidConfig(format!("instrument class {class} has no MIDI channel"))),
    }
}

/// Serializes notes as a format 0 file at 480 ticks per quarter and 120 bpm.
///
/// Each instrument class gets its own channel (skipping the drum channel) with
/// the class's representative program. Notes shorter than a tick are stretched to one.
pub fn write_smf(seq: &NoteSequence, imap: &InstrumentMap) -> Result<Vec<u8>> {
    let tempo = TempoMap::new(WRITE_TICKS_PER_QUARTER, &[])?;
    // (tick, order, channel, key, velocity); order 0 = note-off, 1 = note-on
    let mut events: Vec<(u64, u8, u8, u8, u8)> = Vec::with_capacity(seq.len() * 2);
    let mut used = [false; 16];
    let mut programs = [0u8; 16];
    for note in seq.notes() {
        let class = note.instrument.unwrap_or(0);
        let channel = channel_for(class)?;
        if note.instrument.is_some() {
            used[channel as usize] = true;
            programs[channel as usize] = imap.program_for(class);
        }
        let on = tempo.tick_at(note.onset_s);
        let off = tempo.tick_at(note.offset_s).max(on + 1);
        let vel = note.velocity.unwrap_or(64).clamp(1, 127);
        events.push((on, 1, channel, note.pitch, vel));
        events.push((off, 0, channel, note.pitch, 0));
    }
    events.sort_unstable();

    let mut track = Vec::new();
    // tempo at tick 0
    track.extend_from_slice(&[0x00, 0xff, 0x51, 0x03]);
    track.extend_from_slice(&DEFAULT_US_PER_QUARTER.to_be_bytes()[1..]);
    for (ch, &u) in used.iter().enumerate() {
        if u {
            track.extend_from_slice(&[0x00, 0xc0 | ch as u8, programs[ch]]);
        }
    }
    let mut last = 0u64;
    for (tick, order, channel, key, vel) in events {
        let delta = u32::try_from(tick - last)
            .map_err(|_| Error::InvalidConfig(format!("note time {tick} ticks does not fit a delta")))?;
        push_varlen(&mut track, delta);
        last = tick;
        if order == 0 {
            track.extend_from_slice(&[0x80 | channel, key, 0x40]);
        } else {
            track.extend_from_slice(&[0x90 | channel, key, vel]);
        }
    }
    track.extend_from_slice(&[0x00, 0xff, 0x2f, 0x00]);

    let mut out = Vec::with_capacity(track.len() + 22);
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&WRITE_TICKS_PER_QUARTER.to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    Ok(out)
}

/// Encodes a variable-length quantity; exposed for hand-built test files.
pub fn encode_varlen(value: u32) -> Vec<u8> {
    let mut out = Vec::new();
    push_varlen(&mut out, value);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smf(format: u16, tpq: u16, tracks: &[Vec<u8>]) -> Vec<u8> {
        let mut out = b"MThd".to_vec();
        out.extend_from_slice(&6u32.to_be_bytes());
        out.extend_from_slice(&format.to_be_bytes());
        out.extend_from_slice(&(tracks.len() as u16).to_be_bytes());
        out.extend_from_slice(&tpq.to_be_bytes());
        for t in tracks {
            out.extend_from_slice(b"MTrk");
            out.extend_from_slice(&(t.len() as u32).to_be_bytes());
            out.extend_from_slice(t);
        }
        out
    }

    fn one_note(tempo: Option<u32>) -> Vec<u8> {
        let mut t = Vec::new();
        if let Some(us) = tempo {
            t.extend_from_slice(&[0x00, 0xff, 0x51, 0x03]);
            t.extend_from_slice(&us.to_be_bytes()[1..]);
        }
        t.extend_from_slice(&[0x00, 0x90, 60, 64]);
        t.extend(encode_varlen(480));
        t.extend_from_slice(&[0x80, 60, 0]);
        t.extend_from_slice(&[0x00, 0xff, 0x2f, 0x00]);
        smf(0, 480, &[t])
    }

    #[test]
    fn minimal_file_default_tempo() {
        let (seq, report) = read_notes(&one_note(None), &InstrumentMap::pitch_only()).unwrap();
        assert_eq!(report.notes, 1);
        let n = &seq.notes()[0];
        assert_eq!((n.pitch, n.onset_s, n.offset_s), (60, 0.0, 0.5));
        assert_eq!(n.velocity, Some(64));
    }

    #[test]
    fn set_tempo_halves_duration() {
        let (seq, _) = read_notes(&one_note(Some(250_000)), &InstrumentMap::pitch_only()).unwrap();
        assert_eq!(seq.notes()[0].offset_s, 0.25);
    }

    #[test]
    fn running_status_and_velocity_zero_off() {
        // note-on 60, then running-status note-on 60 vel 0 (= off), then 62 on/off
        let t = vec![
            0x00, 0x90, 60, 100, 0x60, 60, 0, 0x00, 62, 90, 0x60, 62, 0, 0x00, 0xff, 0x2f, 0x00,
        ];
        let (seq, report) = read_notes(&smf(0, 96, &[t]), &InstrumentMap::pitch_only()).unwrap();
        assert_eq!(report.notes, 2);
        assert_eq!(seq.notes()[0].offset_s, 0.5);
        assert_eq!(seq.notes()[1].pitch, 62);
    }

    #[test]
    fn fifo_pairing_of_interleaved_notes() {
        let t = vec![
            0x00, 0x90, 60, 100, 0x60, 0x90, 60, 100, 0x60, 0x80, 60, 0, 0x60, 0x80, 60, 0,
        ];
        let (seq, _) = read_notes(&smf(0, 96, &[t]), &InstrumentMap::pitch_only()).unwrap();
        let spans: Vec<(f64, f64)> = seq.notes().iter().map(|n| (n.onset_s, n.offset_s)).collect();
        assert_eq!(spans, vec![(0.0, 1.0), (0.5, 1.5)]);
    }

    #[test]
    fn drums_dropped_by_default() {
        let t = vec![0x00, 0x99, 40, 100, 0x60, 0x89, 40, 0];
        let (seq, report) = read_notes(&smf(0, 96, &[t]), &InstrumentMap::pitch_only()).unwrap();
        assert!(seq.is_empty());
        assert_eq!(report.dropped_ignored, 1);
    }

    #[test]
    fn dangling_note_closed_at_end() {
        let t = vec![0x00, 0x90, 60, 100, 0x60, 0x90, 62, 100, 0x60, 0x80, 62, 0, 0x00, 0xff, 0x2f, 0x00];
        let (seq, report) = read_notes(&smf(0, 96, &[t]), &InstrumentMap::pitch_only()).unwrap();
        assert_eq!(report.dangling_closed, 1);
        let n = seq.notes().iter().find(|n| n.pitch == 60).unwrap();
        assert_eq!(n.offset_s, 1.0);
    }

    #[test]
    fn out_of_range_pitch_counted() {
        let t = vec![0x00, 0x90, 10, 100, 0x60, 0x80, 10, 0];
        let (_, report) = read_notes(&smf(0, 96, &[t]), &InstrumentMap::pitch_only()).unwrap();
        assert_eq!(report.dropped_out_of_range, 1);
    }

    #[test]
    fn program_sets_instrument_class() {
        let t = vec![0x00, 0xc1, 40, 0x00, 0x91, 60, 100, 0x60, 0x81, 60, 0];
        let (seq, _) = read_notes(&smf(0, 96, &[t]), &InstrumentMap::musicnet_with_guitar()).unwrap();
        assert_eq!(seq.notes()[0].instrument, Some(2));
        assert_eq!(seq.instrument_count(), 12);
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_smf(b"RIFF...."), Err(Error::Midi { offset: 0, .. })));
        assert!(matches!(parse_smf(&smf(2, 96, &[])), Err(Error::UnsupportedMidi(_))));
        let mut truncated = smf(0, 96, &[vec![0x00, 0x90, 60, 100]]);
        truncated.truncate(truncated.len() - 2);
        match parse_smf(&truncated) {
            Err(Error::Midi { offset, .. }) => assert_eq!(offset, 14),
            other => panic!("unexpected {other:?}"),
        }
        let no_status = smf(0, 96, &[vec![0x00, 60, 100]]);
        assert!(matches!(parse_smf(&no_status), Err(Error::Midi { .. })));
    }

    #[test]
    fn unknown_chunks_and_sysex_skipped() {
        let mut bytes = smf(0, 96, &[vec![0x00, 0xf0, 0x02, 0x7e, 0xf7, 0x00, 0x90, 60, 1, 0x60, 0x80, 60, 0]]);
        bytes.extend_from_slice(b"XFIH");
        bytes.extend_from_slice(&3u32.to_be_bytes());
        bytes.extend_from_slice(&[1, 2, 3]);
        let (seq, _) = read_notes(&bytes, &InstrumentMap::pitch_only()).unwrap();
        assert_eq!(seq.len(), 1);
    }

    #[test]
    fn tempo_map_piecewise() {
        let map = TempoMap::new(480, &[(960, 250_000)]).unwrap();
        assert_eq!(map.seconds(960), 1.0);
        assert_eq!(map.seconds(1440), 1.25);
        assert_eq!(map.tick_at(1.25), 1440);
        assert_eq!(map.entries()[0], (0, DEFAULT_US_PER_QUARTER));
    }

    #[test]
    fn varlen_encoding() {
        assert_eq!(encode_varlen(0), vec![0]);
        assert_eq!(encode_varlen(0x7f), vec![0x7f]);
        assert_eq!(encode_varlen(0x80), vec![0x81, 0x00]);
        assert_eq!(encode_varlen(0x0fff_ffff), vec![0xff, 0xff, 0xff, 0x7f]);
    }

    #[test]
    fn write_then_read() {
        let seq = NoteSequence::new(
            vec![
                NoteEvent::new(60, 0.0, 0.5).with_velocity(80),
                NoteEvent::new(64, 0.25, 1.0).with_velocity(70),
            ],
            1,
        )
        .unwrap();
        let bytes = write_smf(&seq, &InstrumentMap::pitch_only()).unwrap();
        let (back, _) = read_notes(&bytes, &InstrumentMap::pitch_only()).unwrap();
        assert_eq!(back, seq);
    }
}
