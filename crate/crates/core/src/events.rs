//! From daily returns to extreme-event sequences.
//!
//! A bar whose return lies strictly above the upper quantile threshold is an
//! "up" event at that bar's index; strictly below the lower threshold, a
//! "down" event. Quantiles use inclusive linear interpolation between order
//! statistics (the "type 7" rule): for sorted `x_0..x_{n-1}` and level `q`,
//! `h = (n - 1) q` and `Q(q) = x_floor(h) + (h - floor(h)) (x_ceil(h) - x_floor(h))`.
//!
//! File formats:
//!
//! - returns CSV: header `date,return_pct`, ISO dates strictly increasing,
//!   returns in percent;
//! - event CSV: header `t,mark`, one event per row in time order.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EventSequence, MarkedEvent, ReturnSeries};

pub const RETURNS_HEADER: [&str; 2] = ["date", "return_pct"];
pub const EVENTS_HEADER: [&str; 2] = ["t", "mark"];

/// Lower and upper return thresholds, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPair {
    pub lower: f64,
    pub upper: f64,
}

impl ThresholdPair {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) {
            return Err(Error::InvalidArgument("thresholds must be finite".into()));
        }
        if lower >= upper {
            return Err(Error::Degenerate(format!(
                "lower threshold {lower} is not below upper threshold {upper}"
            )));
        }
        Ok(Self { lower, upper })
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn check_header(path: &Path, reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?;
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found != expected {
        return Err(parse_error(
            path,
            1,
            format!("expected header `{}`, found `{}`", expected.join(","), found.join(",")),
        ));
    }
    Ok(())
}

fn csv_reader(input: impl Read) -> csv::Reader<impl Read> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

/// Reads a returns CSV. `path` is used for error messages only.
pub fn read_returns(input: impl Read, path: &Path) -> Result<ReturnSeries> {
    let mut reader = csv_reader(input);
    check_header(path, &mut reader, &RETURNS_HEADER)?;
    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| parse_error(path, line, format!("bad date `{}`: {e}", &record[0])))?;
        let value: f64 = record[1]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| parse_error(path, line, format!("bad return `{}`", &record[1])))?;
        if let Some(&prev) = dates.last() {
            if date == prev {
                return Err(Error::DuplicateDate {
                    path: path.to_path_buf(),
                    date: date.to_string(),
                });
            }
            if date < prev {
                return Err(Error::NonMonotoneDates {
                    path: path.to_path_buf(),
                    date: date.to_string(),
                });
            }
        }
        dates.push(date);
        values.push(value);
    }
    ReturnSeries::new(dates, values)
}

pub fn load_returns(path: &Path) -> Result<ReturnSeries> {
    read_returns(open(path)?, path)
}

/// Type-7 quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Quantile thresholds of one return history.
pub fn compute_thresholds(series: &ReturnSeries, q_low: f64, q_high: f64) -> Result<ThresholdPair> {
    if !(0.0..=1.0).contains(&q_low) || !(0.0..=1.0).contains(&q_high) || q_low >= q_high {
        return Err(Error::InvalidArgument(format!(
            "quantile levels must satisfy 0 <= q_low < q_high <= 1, got ({q_low}, {q_high})"
        )));
    }
    if series.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "need at least 10 returns for thresholds, got {}",
            series.len()
        )));
    }
    let mut sorted = series.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    ThresholdPair::new(quantile_sorted(&sorted, q_low), quantile_sorted(&sorted, q_high))
}

/// One event per bar whose return is strictly outside the thresholds. The
/// sequence has `max(up_mark, down_mark) + 1` types and horizon equal to the
/// series length.
pub fn extract_events(
    series: &ReturnSeries,
    thresholds: ThresholdPair,
    up_mark: usize,
    down_mark: usize,
) -> Result<EventSequence> {
    if up_mark == down_mark {
        return Err(Error::InvalidArgument("up and down marks must differ".into()));
    }
    let events = series
        .values()
        .iter()
        .enumerate()
        .filter_map(|(i, &r)| {
            if r > thresholds.upper {
                Some(MarkedEvent::new(i as f64, up_mark))
            } else if r < thresholds.lower {
                Some(MarkedEvent::new(i as f64, down_mark))
            } else {
                None
            }
        })
        .collect();
    EventSequence::new(events, series.len() as f64, up_mark.max(down_mark) + 1)
}

/// Where each input sequence's marks land in a merged sequence:
/// `maps[s][local] = global`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkLayout {
    pub maps: Vec<Vec<usize>>,
}

impl MarkLayout {
    /// Inputs stacked in order: sequence `s` takes the next block of ids.
    pub fn stacked(num_types: &[usize]) -> Self {
        let mut next = 0;
        let maps = num_types
            .iter()
            .map(|&m| {
                let map = (next..next + m).collect();
                next += m;
                map
            })
            .collect();
        Self { maps }
    }

    /// Bivariate `(up = 0, down = 1)` sector sequences merged with all up
    /// types first: sector `s` up becomes `s`, down becomes `n + s`. For
    /// consumer, medical, financial this gives
    /// cons-up, med-up, fin-up, cons-down, med-down, fin-down.
    pub fn up_down_blocks(num_sectors: usize) -> Self {
        let maps = (0..num_sectors).map(|s| vec![s, num_sectors + s]).collect();
        Self { maps }
    }

    pub fn num_types(&self) -> usize {
        self.maps.iter().map(Vec::len).sum()
    }

    fn validate(&self, seqs: &[EventSequence]) -> Result<()> {
        if self.maps.len() != seqs.len() {
            return Err(Error::InvalidArgument(format!(
                "layout covers {} sequences, got {}",
                self.maps.len(),
                seqs.len()
            )));
        }
        let total = self.num_types();
        let mut used = vec![false; total];
        for (s, (map, seq)) in self.maps.iter().zip(seqs).enumerate() {
            if map.len() != seq.num_types() {
                return Err(Error::InvalidArgument(format!(
                    "layout maps {} marks for sequence {s}, which has {}",
                    map.len(),
                    seq.num_types()
                )));
            }
            for &g in map {
                if g >= total || used[g] {
                    return Err(Error::InvalidArgument(format!(
                        "layout assigns mark {g} twice or out of range"
                    )));
                }
                used[g] = true;
            }
        }
        Ok(())
    }
}

/// Merges sequences on a common horizon into one multi-type sequence.
/// Simultaneous events are ordered by their merged mark.
pub fn merge_sequences(seqs: &[EventSequence], layout: &MarkLayout) -> Result<EventSequence> {
    let first = seqs
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to merge".into()))?;
    if let Some(s) = seqs.iter().find(|s| s.horizon() != first.horizon()) {
        return Err(Error::InvalidArgument(format!(
            "horizon mismatch: {} vs {}",
            first.horizon(),
            s.horizon()
        )));
    }
    layout.validate(seqs)?;
    let events = seqs
        .iter()
        .zip(&layout.maps)
        .flat_map(|(seq, map)| {
            seq.events()
                .iter()
                .map(move |e| MarkedEvent::new(e.time, map[e.mark]))
        })
        .collect();
    EventSequence::new(events, first.horizon(), layout.num_types())
}

/// Events with the given `marks`, relabelled `0..marks.len()` in that order.
pub fn select_marks(seq: &EventSequence, marks: &[usize]) -> Result<EventSequence> {
    let mut local = vec![None; seq.num_types()];
    for (i, &g) in marks.iter().enumerate() {
        if g >= seq.num_types() {
            return Err(Error::TypeOutOfRange {
                k: g,
                m: seq.num_types(),
            });
        }
        local[g] = Some(i);
    }
    let events = seq
        .events()
        .iter()
        .filter_map(|e| local[e.mark].map(|l| MarkedEvent::new(e.time, l)))
        .collect();
    EventSequence::new(events, seq.horizon(), marks.len())
}

/// A fixed-length slice of a longer sequence, re-based to start at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Period {
    pub index: usize,
    /// Global time of the period's local origin.
    pub start: f64,
    /// Shorter than the requested length (the trailing remainder).
    pub partial: bool,
    pub sequence: EventSequence,
}

/// Cuts `[0, horizon)` into periods `[p L, (p + 1) L)`; the last one may be
/// shorter and is flagged. An event exactly at the horizon goes to the last
/// period.
pub fn segment_periods(seq: &EventSequence, period_length: f64) -> Result<Vec<Period>> {
    if !(period_length.is_finite() && period_length >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "period length must be at least 1, got {period_length}"
        )));
    }
    let horizon = seq.horizon();
    let count = (horizon / period_length).ceil() as usize;
    let mut buckets: Vec<Vec<MarkedEvent>> = vec![Vec::new(); count];
    for e in seq.events() {
        let p = ((e.time / period_length).floor() as usize).min(count.saturating_sub(1));
        let start = p as f64 * period_length;
        buckets[p].push(MarkedEvent::new(e.time - start, e.mark));
    }
    buckets
        .into_iter()
        .enumerate()
        .map(|(index, events)| {
            let start = index as f64 * period_length;
            let length = (horizon - start).min(period_length);
            Ok(Period {
                index,
                start,
                partial: length < period_length,
                sequence: EventSequence::new(events, length, seq.num_types())?,
            })
        })
        .collect()
}

/// Chronological split. `train` holds events before `split_time` on horizon
/// `split_time`; `test` holds the later events with global times and the
/// full horizon, so scoring it can condition on the training history.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTestSplit {
    pub train: EventSequence,
    pub test: EventSequence,
    pub split_time: f64,
}

impl TrainTestSplit {
    /// Length of the test window.
    pub fn test_window(&self) -> f64 {
        self.test.horizon() - self.split_time
    }

    /// Test events shifted to start at zero, on horizon `test_window()`.
    pub fn rebased_test(&self) -> Result<EventSequence> {
        let events = self
            .test
            .events()
            .iter()
            .map(|e| MarkedEvent::new(e.time - self.split_time, e.mark))
            .collect();
        EventSequence::new(events, self.test_window(), self.test.num_types())
    }
}

/// Splits at bar `floor(fraction * horizon)`, keeping at least one bar of
/// test window.
pub fn train_test_split(seq: &EventSequence, fraction: f64) -> Result<TrainTestSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let horizon = seq.horizon();
    if horizon < 2.0 {
        return Err(Error::InsufficientData(format!(
            "horizon {horizon} is too short to split"
        )));
    }
    let split_time = (fraction * horizon).floor().clamp(1.0, (horizon - 1.0).floor());
    let (before, after): (Vec<MarkedEvent>, Vec<MarkedEvent>) =
        seq.events().iter().partition(|e| e.time < split_time);
    Ok(TrainTestSplit {
        train: EventSequence::new(before, split_time, seq.num_types())?,
        test: EventSequence::new(after, horizon, seq.num_types())?,
        split_time,
    })
}

/// Reads an event CSV. Missing `horizon` defaults to one bar past the last
/// event (`floor(t_max) + 1`, or 0 when empty); missing `num_types` to the
/// largest mark plus one.
pub fn read_events(
    input: impl Read,
    path: &Path,
    horizon: Option<f64>,
    num_types: Option<usize>,
) -> Result<EventSequence> {
    let mut reader = csv_reader(input);
    check_header(path, &mut reader, &EVENTS_HEADER)?;
    let mut events = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let time: f64 = record[0]
            .parse()
            .ok()
            .filter(|t: &f64| t.is_finite())
            .ok_or_else(|| parse_error(path, line, format!("bad time `{}`", &record[0])))?;
        let mark: usize = record[1]
            .parse()
            .map_err(|_| parse_error(path, line, format!("bad mark `{}`", &record[1])))?;
        events.push(MarkedEvent::new(time, mark));
    }
    let horizon = horizon.unwrap_or_else(|| {
        events
            .iter()
            .map(|e| e.time.floor() + 1.0)
            .fold(0.0, f64::max)
    });
    let num_types =
        num_types.unwrap_or_else(|| events.iter().map(|e| e.mark + 1).max().unwrap_or(1));
    EventSequence::new(events, horizon, num_types)
}

pub fn load_events(path: &Path, horizon: Option<f64>, num_types: Option<usize>) -> Result<EventSequence> {
    read_events(open(path)?, path, horizon, num_types)
}

/// Event CSV text. Times use the shortest representation that round-trips,
/// so bar indices print as integers.
pub fn events_to_csv(seq: &EventSequence) -> String {
    let mut out = String::from("t,mark\n");
    for e in seq.events() {
        out.push_str(&format!("{},{}\n", e.time, e.mark));
    }
    out
}

pub fn write_events(seq: &EventSequence, mut out: impl Write) -> std::io::Result<()> {
    out.write_all(events_to_csv(seq).as_bytes())
}
