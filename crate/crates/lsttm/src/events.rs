//! Timestamped interaction records and the on-disk event-log format.
//!
//! The format is line-delimited text: `#`-prefixed header lines carrying the
//! schema version and vocabularies, one tab-separated column-name line, then
//! one record per line. It is diff-able, trivially parsed from any language,
//! and byte-exact under store -> load -> store.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng;

pub const SECS_PER_HOUR: i64 = 3600;
pub const SECS_PER_DAY: i64 = 86_400;
pub const HOURS_PER_DAY: i64 = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UserId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ItemId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Internal,
    External,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label {
    Clicked,
    Unclicked,
}

/// Recommendation context attached to an impression.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContextFeatures {
    /// Hour of day, 0-23.
    pub hour: u8,
    /// Display slot index.
    pub position: u16,
}

/// One timestamped user-item interaction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventRecord {
    pub user: UserId,
    pub item: ItemId,
    /// Seconds since the start of the log's epoch.
    pub ts: i64,
    pub source: Source,
    pub label: Label,
    pub context: ContextFeatures,
    /// Synthetic per-click dwell seconds; 0 for unclicked rows.
    pub dwell_secs: u32,
}

impl EventRecord {
    pub fn day(&self) -> i64 {
        self.ts / SECS_PER_DAY
    }

    pub fn global_hour(&self) -> i64 {
        self.ts / SECS_PER_HOUR
    }
}

/// Schema/vocabulary header of an event log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogHeader {
    pub n_users: u32,
    pub n_internal_items: u32,
    pub n_external_items: u32,
    pub user_field_vocabs: [u32; 6],
    pub item_field_vocabs: [u32; 6],
    pub position_vocab: u32,
}

impl LogHeader {
    pub fn n_items(&self) -> u32 {
        self.n_internal_items + self.n_external_items
    }

    pub fn is_internal_item(&self, item: ItemId) -> bool {
        item.0 < self.n_internal_items
    }
}

/// An ordered event log plus its header.
#[derive(Clone, Debug, PartialEq)]
pub struct EventLog {
    pub header: LogHeader,
    pub rows: Vec<EventRecord>,
}

/// A scoring instance: one internal impression with its click label.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Instance {
    pub user: UserId,
    pub item: ItemId,
    pub clicked: bool,
    pub hour: u8,
    pub position: u16,
    pub ts: i64,
}

impl Instance {
    pub fn global_hour(&self) -> i64 {
        self.ts / SECS_PER_HOUR
    }
}

/// Six categorical field ids for a user, derived from the id hash.
pub fn user_fields(user: UserId, vocabs: &[u32; 6]) -> [usize; 6] {
    derive_fields(1, user.0, vocabs)
}

/// Six categorical field ids for an item, derived from the id hash.
pub fn item_fields(item: ItemId, vocabs: &[u32; 6]) -> [usize; 6] {
    derive_fields(2, item.0, vocabs)
}

fn derive_fields(kind: u64, id: u32, vocabs: &[u32; 6]) -> [usize; 6] {
    let mut out = [0usize; 6];
    for (f, slot) in out.iter_mut().enumerate() {
        let h = rng::mix3(kind << 32 | id as u64, 0xf1e1d, f as u64);
        *slot = (h % vocabs[f] as u64) as usize;
    }
    out
}

impl EventLog {
    pub fn max_day(&self) -> i64 {
        self.rows.last().map_or(-1, |r| r.day())
    }

    /// Internal impressions as scoring instances, in log order.
    pub fn internal_instances(&self) -> Vec<Instance> {
        self.rows
            .iter()
            .filter(|r| r.source == Source::Internal)
            .map(|r| Instance {
                user: r.user,
                item: r.item,
                clicked: r.label == Label::Clicked,
                hour: r.context.hour,
                position: r.context.position,
                ts: r.ts,
            })
            .collect()
    }

    /// Split into a train log (all rows before the boundary day) and the
    /// test log (internal rows of the boundary day, which must be the last).
    pub fn split(&self, boundary_day: i64) -> Result<(EventLog, EventLog)> {
        let max_day = self.max_day();
        if max_day != boundary_day {
            return Err(Error::InvalidSplit(format!(
                "boundary day {boundary_day} must be the final day of the log (last day is {max_day})"
            )));
        }
        let train: Vec<EventRecord> =
            self.rows.iter().filter(|r| r.day() < boundary_day).cloned().collect();
        let test: Vec<EventRecord> = self
            .rows
            .iter()
            .filter(|r| r.day() == boundary_day && r.source == Source::Internal)
            .cloned()
            .collect();
        if train.is_empty() || test.is_empty() {
            return Err(Error::InvalidSplit(format!(
                "split at day {boundary_day} leaves {} train rows and {} test rows",
                train.len(),
                test.len()
            )));
        }
        Ok((
            EventLog { header: self.header.clone(), rows: train },
            EventLog { header: self.header.clone(), rows: test },
        ))
    }

    /// Canonical text serialization.
    pub fn to_text(&self) -> String {
        let h = &self.header;
        let mut out = String::new();
        out.push_str("#lsttm-events v1\n");
        let _ = writeln!(out, "#users={}", h.n_users);
        let _ = writeln!(out, "#internal_items={}", h.n_internal_items);
        let _ = writeln!(out, "#external_items={}", h.n_external_items);
        let _ = writeln!(out, "#user_field_vocabs={}", join_u32(&h.user_field_vocabs));
        let _ = writeln!(out, "#item_field_vocabs={}", join_u32(&h.item_field_vocabs));
        let _ = writeln!(out, "#position_vocab={}", h.position_vocab);
        out.push_str("user\titem\tts\tsource\tlabel\thour\tposition\tdwell\n");
        for r in &self.rows {
            let source = match r.source {
                Source::Internal => "internal",
                Source::External => "external",
            };
            let label = match r.label {
                Label::Clicked => "clicked",
                Label::Unclicked => "unclicked",
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.user.0, r.item.0, r.ts, source, label, r.context.hour, r.context.position, r.dwell_secs
            );
        }
        out
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        crate::config::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<EventLog> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text, &path.display().to_string())
    }

    pub fn from_text(text: &str, origin: &str) -> Result<EventLog> {
        let err = |line: usize, msg: String| Error::Parse { path: origin.to_string(), line, msg };
        let mut lines = text.lines().enumerate();

        let (_, first) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
        if first.trim() != "#lsttm-events v1" {
            return Err(err(1, format!("unsupported header `{first}`")));
        }

        let mut n_users = None;
        let mut n_internal = None;
        let mut n_external = None;
        let mut user_vocabs = None;
        let mut item_vocabs = None;
        let mut position_vocab = None;
        let mut saw_columns = false;
        let mut rows = Vec::new();
        let mut last_ts = i64::MIN;

        for (idx, line) in lines {
            let lineno = idx + 1;
            if let Some(rest) = line.strip_prefix('#') {
                let (key, value) = rest
                    .split_once('=')
                    .ok_or_else(|| err(lineno, format!("malformed header line `{line}`")))?;
                match key {
                    "users" => n_users = Some(parse_u32(value, lineno, origin)?),
                    "internal_items" => n_internal = Some(parse_u32(value, lineno, origin)?),
                    "external_items" => n_external = Some(parse_u32(value, lineno, origin)?),
                    "user_field_vocabs" => user_vocabs = Some(parse_vocabs(value, lineno, origin)?),
                    "item_field_vocabs" => item_vocabs = Some(parse_vocabs(value, lineno, origin)?),
                    "position_vocab" => position_vocab = Some(parse_u32(value, lineno, origin)?),
                    other => return Err(err(lineno, format!("unknown header key `{other}`"))),
                }
                continue;
            }
            if !saw_columns {
                if line != "user\titem\tts\tsource\tlabel\thour\tposition\tdwell" {
                    return Err(err(lineno, format!("unexpected column line `{line}`")));
                }
                saw_columns = true;
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let header = LogHeader {
                n_users: n_users.ok_or_else(|| err(lineno, "missing #users header".into()))?,
                n_internal_items: n_internal
                    .ok_or_else(|| err(lineno, "missing #internal_items header".into()))?,
                n_external_items: n_external
                    .ok_or_else(|| err(lineno, "missing #external_items header".into()))?,
                user_field_vocabs: user_vocabs
                    .ok_or_else(|| err(lineno, "missing #user_field_vocabs header".into()))?,
                item_field_vocabs: item_vocabs
                    .ok_or_else(|| err(lineno, "missing #item_field_vocabs header".into()))?,
                position_vocab: position_vocab
                    .ok_or_else(|| err(lineno, "missing #position_vocab header".into()))?,
            };
            let row = parse_row(line, &header, lineno, origin)?;
            if row.ts < last_ts {
                return Err(err(lineno, format!("timestamp {} breaks ascending order", row.ts)));
            }
            last_ts = row.ts;
            rows.push(row);
        }

        let header = LogHeader {
            n_users: n_users.ok_or_else(|| err(1, "missing #users header".into()))?,
            n_internal_items: n_internal.ok_or_else(|| err(1, "missing #internal_items header".into()))?,
            n_external_items: n_external.ok_or_else(|| err(1, "missing #external_items header".into()))?,
            user_field_vocabs: user_vocabs
                .ok_or_else(|| err(1, "missing #user_field_vocabs header".into()))?,
            item_field_vocabs: item_vocabs
                .ok_or_else(|| err(1, "missing #item_field_vocabs header".into()))?,
            position_vocab: position_vocab
                .ok_or_else(|| err(1, "missing #position_vocab header".into()))?,
        };
        if !saw_columns {
            return Err(err(1, "missing column header line".into()));
        }
        Ok(EventLog { header, rows })
    }
}

fn join_u32(vals: &[u32]) -> String {
    vals.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_u32(s: &str, line: usize, origin: &str) -> Result<u32> {
    s.parse::<u32>()
        .map_err(|_| Error::Parse { path: origin.into(), line, msg: format!("bad integer `{s}`") })
}

fn parse_vocabs(s: &str, line: usize, origin: &str) -> Result<[u32; 6]> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 6 {
        return Err(Error::Parse {
            path: origin.into(),
            line,
            msg: format!("expected 6 vocab sizes, got {}", parts.len()),
        });
    }
    let mut out = [0u32; 6];
    for (i, p) in parts.iter().enumerate() {
        out[i] = parse_u32(p, line, origin)?;
        if out[i] == 0 {
            return Err(Error::Parse { path: origin.into(), line, msg: "vocab size 0".into() });
        }
    }
    Ok(out)
}

fn parse_row(line: &str, header: &LogHeader, lineno: usize, origin: &str) -> Result<EventRecord> {
    let err = |msg: String| Error::Parse { path: origin.to_string(), line: lineno, msg };
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 8 {
        return Err(err(format!("expected 8 columns, got {}", cols.len())));
    }
    let user = UserId(parse_u32(cols[0], lineno, origin)?);
    let item = ItemId(parse_u32(cols[1], lineno, origin)?);
    let ts: i64 = cols[2].parse().map_err(|_| err(format!("bad timestamp `{}`", cols[2])))?;
    let source = match cols[3] {
        "internal" => Source::Internal,
        "external" => Source::External,
        other => return Err(err(format!("unknown source tag `{other}`"))),
    };
    let label = match cols[4] {
        "clicked" => Label::Clicked,
        "unclicked" => Label::Unclicked,
        other => return Err(err(format!("unknown label `{other}`"))),
    };
    let hour: u8 = cols[5].parse().map_err(|_| err(format!("bad hour `{}`", cols[5])))?;
    let position: u16 = cols[6].parse().map_err(|_| err(format!("bad position `{}`", cols[6])))?;
    let dwell_secs: u32 = cols[7].parse().map_err(|_| err(format!("bad dwell `{}`", cols[7])))?;

    if ts < 0 {
        return Err(err(format!("negative timestamp {ts}")));
    }
    if user.0 >= header.n_users {
        return Err(err(format!("user {} outside vocabulary {}", user.0, header.n_users)));
    }
    if item.0 >= header.n_items() {
        return Err(err(format!("item {} outside vocabulary {}", item.0, header.n_items())));
    }
    if source == Source::Internal && !header.is_internal_item(item) {
        return Err(err(format!("internal row references external item {}", item.0)));
    }
    if source == Source::External && header.is_internal_item(item) {
        return Err(err(format!("external row references internal item {}", item.0)));
    }
    if source == Source::External && label == Label::Unclicked {
        return Err(err("external rows must be clicks".into()));
    }
    if hour > 23 {
        return Err(err(format!("hour {hour} outside 0-23")));
    }
    if position as u32 >= header.position_vocab {
        return Err(err(format!("position {} outside vocabulary {}", position, header.position_vocab)));
    }
    Ok(EventRecord { user, item, ts, source, label, context: ContextFeatures { hour, position }, dwell_secs })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_header() -> LogHeader {
        LogHeader {
            n_users: 4,
            n_internal_items: 3,
            n_external_items: 2,
            user_field_vocabs: [4, 4, 4, 4, 4, 4],
            item_field_vocabs: [4, 4, 4, 4, 4, 4],
            position_vocab: 8,
        }
    }

    fn row(user: u32, item: u32, ts: i64, source: Source, label: Label) -> EventRecord {
        EventRecord {
            user: UserId(user),
            item: ItemId(item),
            ts,
            source,
            label,
            context: ContextFeatures { hour: ((ts / SECS_PER_HOUR) % 24) as u8, position: 0 },
            dwell_secs: if label == Label::Clicked { 30 } else { 0 },
        }
    }

    #[test]
    fn empty_log_roundtrip() {
        let log = EventLog { header: tiny_header(), rows: vec![] };
        let text = log.to_text();
        let back = EventLog::from_text(&text, "mem").unwrap();
        assert_eq!(log, back);
        assert_eq!(text, back.to_text());
    }

    #[test]
    fn unknown_source_tag_reports_line() {
        let log = EventLog { header: tiny_header(), rows: vec![row(0, 0, 5, Source::Internal, Label::Clicked)] };
        let text = log.to_text().replace("\tinternal\t", "\tsideways\t");
        let err = EventLog::from_text(&text, "mem").unwrap_err();
        assert!(err.to_string().contains("mem:9"), "{err}");
        assert!(err.to_string().contains("sideways"), "{err}");
    }

    #[test]
    fn split_keeps_final_day_internal_only() {
        let mut rows = Vec::new();
        for day in 0..3i64 {
            rows.push(row(0, 0, day * SECS_PER_DAY + 10, Source::Internal, Label::Clicked));
            rows.push(row(1, 3, day * SECS_PER_DAY + 20, Source::External, Label::Clicked));
            rows.push(row(2, 1, day * SECS_PER_DAY + 30, Source::Internal, Label::Unclicked));
        }
        let log = EventLog { header: tiny_header(), rows };
        let (train, test) = log.split(2).unwrap();
        assert_eq!(train.rows.len(), 6);
        assert_eq!(test.rows.len(), 2);
        assert!(test.rows.iter().all(|r| r.source == Source::Internal && r.day() == 2));
        let discarded_external = log.rows.len() - train.rows.len() - test.rows.len();
        assert_eq!(discarded_external, 1);
    }

    #[test]
    fn split_rejects_wrong_boundary() {
        let log = EventLog {
            header: tiny_header(),
            rows: vec![row(0, 0, 10, Source::Internal, Label::Clicked)],
        };
        assert!(log.split(3).is_err());
    }

    #[test]
    fn fields_are_stable_and_in_vocab() {
        let vocabs = [16, 8, 12, 6, 10, 14];
        let a = user_fields(UserId(42), &vocabs);
        let b = user_fields(UserId(42), &vocabs);
        assert_eq!(a, b);
        for (f, &v) in a.iter().enumerate() {
            assert!(v < vocabs[f] as usize);
        }
        assert_ne!(user_fields(UserId(42), &vocabs), item_fields(ItemId(42), &vocabs));
    }
}
