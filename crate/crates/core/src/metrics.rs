//! Confusion-only diarization error rate with a boundary collar, overlap
//! exclusion and an optimal one-to-one speaker mapping, plus RTTM I/O.
//!
//! Times are held as integer microseconds; all interval arithmetic is exact
//! and closed-open.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::assignment::max_weight_assignment;
use crate::data::LabelSequence;
use crate::error::{Error, Result};

const MICROS: f64 = 1e6;

fn to_micros(seconds: f64) -> i64 {
    (seconds * MICROS).round() as i64
}

fn to_seconds(micros: i64) -> f64 {
    micros as f64 / MICROS
}

fn format_micros(micros: i64) -> String {
    let sign = if micros < 0 { "-" } else { "" };
    let m = micros.unsigned_abs();
    format!("{sign}{}.{:06}", m / 1_000_000, m % 1_000_000)
}

/// Closed-open interval `[start, end)` in microseconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Interval {
    pub start_us: i64,
    pub end_us: i64,
}

impl Interval {
    pub fn start(&self) -> f64 {
        to_seconds(self.start_us)
    }

    pub fn end(&self) -> f64 {
        to_seconds(self.end_us)
    }

    pub fn duration_us(&self) -> i64 {
        self.end_us - self.start_us
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    start_us: i64,
    end_us: i64,
    speaker: String,
}

impl Segment {
    /// Times are rounded to whole microseconds.
    pub fn new(start: f64, end: f64, speaker: impl Into<String>) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || start < 0.0 {
            return Err(Error::InvalidParameter(format!("invalid segment times [{start}, {end})")));
        }
        Self::from_micros(to_micros(start), to_micros(end), speaker)
    }

    pub fn from_micros(start_us: i64, end_us: i64, speaker: impl Into<String>) -> Result<Self> {
        if start_us < 0 || end_us <= start_us {
            return Err(Error::InvalidParameter(format!(
                "segment must satisfy 0 <= start < end, got [{}, {})",
                format_micros(start_us),
                format_micros(end_us)
            )));
        }
        Ok(Segment {
            start_us,
            end_us,
            speaker: speaker.into(),
        })
    }

    pub fn start(&self) -> f64 {
        to_seconds(self.start_us)
    }

    pub fn end(&self) -> f64 {
        to_seconds(self.end_us)
    }

    pub fn speaker(&self) -> &str {
        &self.speaker
    }

    pub fn interval(&self) -> Interval {
        Interval {
            start_us: self.start_us,
            end_us: self.end_us,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Timeline {
    pub utt: String,
    pub segments: Vec<Segment>,
}

impl Timeline {
    pub fn new(utt: impl Into<String>, segments: Vec<Segment>) -> Self {
        Timeline {
            utt: utt.into(),
            segments,
        }
    }

    /// Speakers in order of first appearance.
    pub fn speakers(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for s in &self.segments {
            if !seen.contains(&s.speaker()) {
                seen.push(s.speaker());
            }
        }
        seen
    }

    /// Renames speakers through `f`.
    pub fn rename(&self, f: impl Fn(&str) -> String) -> Timeline {
        Timeline {
            utt: self.utt.clone(),
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    start_us: s.start_us,
                    end_us: s.end_us,
                    speaker: f(&s.speaker),
                })
                .collect(),
        }
    }
}

/// Converts per-segment labels into a timeline of fixed-length segments,
/// merging consecutive segments of the same speaker.
pub fn labels_to_timeline(labels: &LabelSequence, segment_duration: f64, utt: impl Into<String>) -> Result<Timeline> {
    if !(segment_duration > 0.0 && segment_duration.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "segment duration must be positive, got {segment_duration}"
        )));
    }
    let boundary = |t: usize| to_micros(t as f64 * segment_duration);
    let mut segments: Vec<Segment> = Vec::new();
    let mut run_start = 0;
    let y = labels.as_slice();
    for t in 1..=y.len() {
        if t == y.len() || y[t] != y[run_start] {
            segments.push(Segment::from_micros(boundary(run_start), boundary(t), y[run_start].to_string())?);
            run_start = t;
        }
    }
    Ok(Timeline::new(utt, segments))
}

/// Sorted disjoint union.
fn union(mut intervals: Vec<Interval>) -> Vec<Interval> {
    intervals.retain(|i| i.end_us > i.start_us);
    intervals.sort();
    let mut out: Vec<Interval> = Vec::with_capacity(intervals.len());
    for i in intervals {
        match out.last_mut() {
            Some(last) if i.start_us <= last.end_us => last.end_us = last.end_us.max(i.end_us),
            _ => out.push(i),
        }
    }
    out
}

/// `a ∖ b` for sorted disjoint inputs.
fn subtract(a: &[Interval], b: &[Interval]) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut j = 0;
    for &iv in a {
        let mut start = iv.start_us;
        while j < b.len() && b[j].end_us <= start {
            j += 1;
        }
        let mut k = j;
        while k < b.len() && b[k].start_us < iv.end_us {
            if b[k].start_us > start {
                out.push(Interval {
                    start_us: start,
                    end_us: b[k].start_us,
                });
            }
            start = start.max(b[k].end_us);
            k += 1;
        }
        if start < iv.end_us {
            out.push(Interval {
                start_us: start,
                end_us: iv.end_us,
            });
        }
    }
    out
}

/// Instants where at least two distinct reference speakers are active.
fn overlap_regions(reference: &Timeline) -> Vec<Interval> {
    let mut per_speaker: BTreeMap<&str, Vec<Interval>> = BTreeMap::new();
    for s in &reference.segments {
        per_speaker.entry(s.speaker()).or_default().push(s.interval());
    }
    let mut events: Vec<(i64, i32)> = Vec::new();
    for intervals in per_speaker.into_values() {
        for iv in union(intervals) {
            events.push((iv.start_us, 1));
            events.push((iv.end_us, -1));
        }
    }
    events.sort();
    let mut out = Vec::new();
    let mut active = 0;
    let mut open = 0;
    for (time, delta) in events {
        let before = active;
        active += delta;
        if before < 2 && active >= 2 {
            open = time;
        } else if before >= 2 && active < 2 && time > open {
            out.push(Interval {
                start_us: open,
                end_us: time,
            });
        }
    }
    union(out)
}

/// Reference speech minus `±collar` around every reference segment boundary,
/// minus overlapped speech when `exclude_overlap` is set.
pub fn scored_regions(reference: &Timeline, collar: f64, exclude_overlap: bool) -> Result<Vec<Interval>> {
    if !(collar >= 0.0 && collar.is_finite()) {
        return Err(Error::InvalidParameter(format!("collar must be nonnegative, got {collar}")));
    }
    let c = to_micros(collar);
    let speech = union(reference.segments.iter().map(Segment::interval).collect());
    let mut excluded: Vec<Interval> = Vec::new();
    if c > 0 {
        for s in &reference.segments {
            for b in [s.start_us, s.end_us] {
                excluded.push(Interval {
                    start_us: b - c,
                    end_us: b + c,
                });
            }
        }
    }
    if exclude_overlap {
        excluded.extend(overlap_regions(reference));
    }
    Ok(subtract(&speech, &union(excluded)))
}

/// Elementary piece of scored time with constant active speaker sets.
struct Piece {
    duration_us: i64,
    reference: Vec<usize>,
    hypothesis: Vec<usize>,
}

fn index_speakers(timeline: &Timeline) -> (Vec<String>, Vec<usize>) {
    let names: Vec<String> = timeline.speakers().into_iter().map(str::to_owned).collect();
    let lookup: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let ids = timeline.segments.iter().map(|s| lookup[s.speaker()]).collect();
    (names, ids)
}

fn pieces(reference: &Timeline, ref_ids: &[usize], hypothesis: &Timeline, hyp_ids: &[usize], regions: &[Interval]) -> Vec<Piece> {
    // Event kinds: 0 = region, 1 = reference speaker, 2 = hypothesis speaker.
    let mut events: Vec<(i64, i32, u8, usize)> = Vec::new();
    for r in regions {
        events.push((r.start_us, 1, 0, 0));
        events.push((r.end_us, -1, 0, 0));
    }
    for (s, &id) in reference.segments.iter().zip(ref_ids) {
        events.push((s.start_us, 1, 1, id));
        events.push((s.end_us, -1, 1, id));
    }
    for (s, &id) in hypothesis.segments.iter().zip(hyp_ids) {
        events.push((s.start_us, 1, 2, id));
        events.push((s.end_us, -1, 2, id));
    }
    events.sort();
    let n_ref = ref_ids.iter().copied().max().map_or(0, |m| m + 1);
    let n_hyp = hyp_ids.iter().copied().max().map_or(0, |m| m + 1);
    let mut ref_count = vec![0i32; n_ref];
    let mut hyp_count = vec![0i32; n_hyp];
    let mut in_region = 0i32;
    let mut out = Vec::new();
    let mut prev = i64::MIN;
    for (time, delta, kind, id) in events {
        if time > prev && prev != i64::MIN && in_region > 0 {
            let active = |c: &[i32]| c.iter().enumerate().filter(|(_, &n)| n > 0).map(|(i, _)| i).collect::<Vec<_>>();
            out.push(Piece {
                duration_us: time - prev,
                reference: active(&ref_count),
                hypothesis: active(&hyp_count),
            });
        }
        prev = time;
        match kind {
            0 => in_region += delta,
            1 => ref_count[id] += delta,
            _ => hyp_count[id] += delta,
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct DerResult {
    pub utt: String,
    /// Seconds.
    pub confusion_time: f64,
    pub scored_time: f64,
    pub der: f64,
    /// Diagnostics only; not part of `der`.
    pub missed_time: f64,
    pub false_alarm_time: f64,
    /// Hypothesis speaker → reference speaker.
    pub mapping: BTreeMap<String, String>,
}

/// One-to-one hypothesis → reference mapping maximising overlap inside
/// `regions`. Hypothesis segments are clipped to the regions first.
pub fn optimal_mapping(reference: &Timeline, hypothesis: &Timeline, regions: &[Interval]) -> BTreeMap<String, String> {
    let (ref_names, ref_ids) = index_speakers(reference);
    let (hyp_names, hyp_ids) = index_speakers(hypothesis);
    let pieces = pieces(reference, &ref_ids, hypothesis, &hyp_ids, regions);
    map_speakers(&pieces, &ref_names, &hyp_names)
        .into_iter()
        .enumerate()
        .filter_map(|(j, i)| i.map(|i| (hyp_names[j].clone(), ref_names[i].clone())))
        .collect()
}

fn overlap_matrix(pieces: &[Piece], n_ref: usize, n_hyp: usize) -> Vec<Vec<i64>> {
    let mut m = vec![vec![0i64; n_ref]; n_hyp];
    for p in pieces {
        for &j in &p.hypothesis {
            for &i in &p.reference {
                m[j][i] += p.duration_us;
            }
        }
    }
    m
}

fn map_speakers(pieces: &[Piece], ref_names: &[String], hyp_names: &[String]) -> Vec<Option<usize>> {
    let m = overlap_matrix(pieces, ref_names.len(), hyp_names.len());
    let weights: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
    max_weight_assignment(&weights)
        .into_iter()
        .enumerate()
        .map(|(j, i)| i.filter(|&i| m[j][i] > 0))
        .collect()
}

/// Confusion-only DER.
pub fn der(reference: &Timeline, hypothesis: &Timeline, collar: f64, exclude_overlap: bool) -> Result<DerResult> {
    let regions = scored_regions(reference, collar, exclude_overlap)?;
    let (ref_names, ref_ids) = index_speakers(reference);
    let (hyp_names, hyp_ids) = index_speakers(hypothesis);
    let pieces = pieces(reference, &ref_ids, hypothesis, &hyp_ids, &regions);
    let mapping = map_speakers(&pieces, &ref_names, &hyp_names);

    let (mut confusion, mut scored, mut missed, mut false_alarm) = (0i64, 0i64, 0i64, 0i64);
    for p in &pieces {
        let n_ref = p.reference.len() as i64;
        let n_hyp = p.hypothesis.len() as i64;
        let correct = p
            .hypothesis
            .iter()
            .filter(|&&j| mapping[j].is_some_and(|i| p.reference.contains(&i)))
            .count() as i64;
        scored += n_ref * p.duration_us;
        confusion += (n_ref.min(n_hyp) - correct) * p.duration_us;
        missed += (n_ref - n_hyp).max(0) * p.duration_us;
        false_alarm += (n_hyp - n_ref).max(0) * p.duration_us;
    }
    if scored == 0 {
        return Err(Error::NothingToScore);
    }
    Ok(DerResult {
        utt: reference.utt.clone(),
        confusion_time: to_seconds(confusion),
        scored_time: to_seconds(scored),
        der: confusion as f64 / scored as f64,
        missed_time: to_seconds(missed),
        false_alarm_time: to_seconds(false_alarm),
        mapping: mapping
            .into_iter()
            .enumerate()
            .filter_map(|(j, i)| i.map(|i| (hyp_names[j].clone(), ref_names[i].clone())))
            .collect(),
    })
}

/// Fraction of segments whose hypothesis label, after the best one-to-one
/// relabelling, differs from the reference.
pub fn label_error_rate(reference: &LabelSequence, hypothesis: &LabelSequence) -> Result<f64> {
    if reference.len() != hypothesis.len() {
        return Err(Error::LengthMismatch {
            embeddings: hypothesis.len(),
            labels: reference.len(),
        });
    }
    let mut counts = vec![vec![0.0; reference.num_speakers()]; hypothesis.num_speakers()];
    for (&r, &h) in reference.as_slice().iter().zip(hypothesis.as_slice()) {
        counts[h - 1][r - 1] += 1.0;
    }
    let matched: f64 = max_weight_assignment(&counts)
        .iter()
        .enumerate()
        .filter_map(|(j, i)| i.map(|i| counts[j][i]))
        .sum();
    Ok(1.0 - matched / reference.len() as f64)
}

/// One RTTM `SPEAKER` line per segment, times with six decimals.
pub fn write_rttm<'a>(timelines: impl IntoIterator<Item = &'a Timeline>) -> String {
    let mut out = String::new();
    for tl in timelines {
        for s in &tl.segments {
            writeln!(
                out,
                "SPEAKER {} 1 {} {} <NA> <NA> {} <NA> <NA>",
                tl.utt,
                format_micros(s.start_us),
                format_micros(s.end_us - s.start_us),
                s.speaker
            )
            .expect("writing to a String");
        }
    }
    out
}

/// Parses RTTM text. Non-`SPEAKER` lines, blank lines and zero-duration
/// segments are skipped; utterances keep order of first appearance.
pub fn parse_rttm(text: &str, path: &str) -> Result<Vec<Timeline>> {
    let mut timelines: Vec<Timeline> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        let err = |message: String| Error::Parse {
            path: path.to_owned(),
            line: n + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.first() != Some(&"SPEAKER") {
            continue;
        }
        if fields.len() < 8 {
            return Err(err(format!("expected at least 8 fields, found {}", fields.len())));
        }
        let number = |i: usize, what: &str| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| err(format!("invalid {what} '{}'", fields[i])))
        };
        let start = to_micros(number(3, "onset")?);
        let duration = to_micros(number(4, "duration")?);
        if duration == 0 {
            continue;
        }
        let segment = Segment::from_micros(start, start + duration, fields[7]).map_err(|e| err(e.to_string()))?;
        let utt = fields[1];
        let i = *index.entry(utt.to_owned()).or_insert_with(|| {
            timelines.push(Timeline::new(utt, Vec::new()));
            timelines.len() - 1
        });
        timelines[i].segments.push(segment);
    }
    Ok(timelines)
}
