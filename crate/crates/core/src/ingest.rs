//! Event logs to count series, with node and dead-day cleaning.

use std::collections::HashMap;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hawkes::CountSeries;

/// Day length in hours used by [`clean`].
pub const HOURS_PER_DAY: f64 = 24.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Hours.
    pub t: f64,
    pub node: usize,
}

/// Timestamped events of a declared label set inside `[t0, t1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub events: Vec<Event>,
    pub labels: Vec<String>,
    pub t0: f64,
    pub t1: f64,
}

impl EventLog {
    pub fn new(mut events: Vec<Event>, labels: Vec<String>, t0: f64, t1: f64) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite() && t1 >= t0) {
            return Err(Error::invalid(format!("window [{t0}, {t1}] is not valid")));
        }
        if labels.is_empty() {
            return Err(Error::invalid("event log needs at least one node label"));
        }
        for e in &events {
            if e.node >= labels.len() {
                return Err(Error::invalid(format!("event node {} has no label", e.node)));
            }
            if !(e.t >= t0 && e.t <= t1) {
                return Err(Error::invalid(format!("event at t = {} lies outside [{t0}, {t1}]", e.t)));
            }
        }
        events.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.node.cmp(&b.node)));
        Ok(EventLog { events, labels, t0, t1 })
    }

    pub fn m(&self) -> usize {
        self.labels.len()
    }

    pub fn node_totals(&self) -> Vec<u64> {
        let mut totals = vec![0u64; self.m()];
        for e in &self.events {
            totals[e.node] += 1;
        }
        totals
    }
}

/// `floor(x)` that treats values within rounding error of an integer as
/// that integer, so `0.3 / 0.1` lands on 3.
fn snapped_floor(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x.floor()
    }
}

fn snapped_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Number of `dt` bins covering the log's window.
pub fn n_bins(log: &EventLog, dt: f64) -> usize {
    snapped_ceil((log.t1 - log.t0) / dt).max(0.0) as usize
}

/// Bin `k` (0-based) covers `[t0 + k dt, t0 + (k+1) dt)`. An event exactly at
/// `t1` on a bin boundary goes to the last bin.
pub fn aggregate(log: &EventLog, dt: f64) -> Result<CountSeries> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!("dt = {dt} must be > 0")));
    }
    let m = log.m();
    let n = n_bins(log, dt).max(1);
    let mut counts = vec![vec![0u64; m]; n];
    for e in &log.events {
        let k = (snapped_floor((e.t - log.t0) / dt).max(0.0) as usize).min(n - 1);
        counts[k][e.node] += 1;
    }
    CountSeries::from_rows(counts, m, dt)?.with_labels(log.labels.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CleanOptions {
    pub min_node_total: u64,
    /// Days whose network-wide count is at or below this are removed.
    pub dead_day_threshold: u64,
    pub day_length: f64,
}

impl Default for CleanOptions {
    fn default() -> Self {
        CleanOptions {
            min_node_total: 0,
            dead_day_threshold: 0,
            day_length: HOURS_PER_DAY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splice {
    /// Start of the removed span in original time.
    pub original_start: f64,
    pub original_end: f64,
    /// Total shift applied to later events (hours).
    pub cumulative_shift: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CleanReport {
    pub removed_nodes: Vec<String>,
    /// 0-based day indices in original time.
    pub removed_days: Vec<usize>,
    pub splices: Vec<Splice>,
    pub retained_nodes: usize,
    pub retained_events: usize,
    pub passes: usize,
}

pub fn clean(log: &EventLog, min_node_total: u64, dead_day_threshold: u64) -> Result<(EventLog, CleanReport)> {
    clean_with(
        log,
        &CleanOptions {
            min_node_total,
            dead_day_threshold,
            ..CleanOptions::default()
        },
    )
}

/// Alternates node and day removal until neither changes the log, so
/// cleaning a cleaned log is a no-op.
pub fn clean_with(log: &EventLog, opts: &CleanOptions) -> Result<(EventLog, CleanReport)> {
    if !(opts.day_length.is_finite() && opts.day_length > 0.0) {
        return Err(Error::invalid(format!("day length {} must be > 0", opts.day_length)));
    }
    let len = opts.day_length;
    let orig_days = snapped_ceil((log.t1 - log.t0) / len).max(1.0) as usize;
    let mut events: Vec<Event> = log.events.clone();
    let mut alive: Vec<bool> = vec![true; log.m()];
    // current day index -> original day index
    let mut day_map: Vec<usize> = (0..orig_days).collect();
    let mut removed_days: Vec<usize> = Vec::new();
    let mut t1 = log.t1;
    let mut passes = 0;
    loop {
        passes += 1;
        let mut changed = false;

        let mut totals = vec![0u64; log.m()];
        for e in &events {
            totals[e.node] += 1;
        }
        for (i, a) in alive.iter_mut().enumerate() {
            if *a && totals[i] < opts.min_node_total {
                *a = false;
                changed = true;
            }
        }
        events.retain(|e| alive[e.node]);

        let n_days = day_map.len();
        let day_of = |t: f64| (snapped_floor((t - log.t0) / len).max(0.0) as usize).min(n_days - 1);
        let mut per_day = vec![0u64; n_days];
        for e in &events {
            per_day[day_of(e.t)] += 1;
        }
        let dead: Vec<bool> = per_day.iter().map(|&c| c <= opts.dead_day_threshold).collect();
        if dead.iter().any(|&d| d) && !dead.iter().all(|&d| d) {
            changed = true;
            let mut shift_before = vec![0.0; n_days];
            let mut acc = 0.0;
            for d in 0..n_days {
                shift_before[d] = acc;
                if dead[d] {
                    let start = log.t0 + d as f64 * len;
                    acc += (t1.min(start + len) - start).max(0.0);
                }
            }
            events.retain(|e| !dead[day_of(e.t)]);
            for e in events.iter_mut() {
                let d = day_of(e.t);
                e.t = (e.t - shift_before[d]).max(log.t0);
            }
            t1 -= acc;
            removed_days.extend(day_map.iter().zip(&dead).filter(|(_, &x)| x).map(|(&o, _)| o));
            day_map = day_map.into_iter().zip(&dead).filter(|(_, &x)| !x).map(|(o, _)| o).collect();
        } else if dead.iter().all(|&d| d) {
            events.clear();
        }

        if events.is_empty() {
            return Err(Error::EmptyResult(format!(
                "cleaning removed every event: {} of {} node(s) below {} events, {} of {orig_days} day(s) at or below {} events",
                alive.iter().filter(|&&a| !a).count(),
                log.m(),
                opts.min_node_total,
                if day_map.len() == per_day.len() && dead.iter().all(|&d| d) { orig_days } else { removed_days.len() },
                opts.dead_day_threshold,
            )));
        }
        if !changed {
            break;
        }
    }

    let mut new_index = vec![usize::MAX; log.m()];
    let mut labels = Vec::new();
    for (i, a) in alive.iter().enumerate() {
        if *a {
            new_index[i] = labels.len();
            labels.push(log.labels[i].clone());
        }
    }
    removed_days.sort_unstable();
    let splices = splices(log.t0, log.t1, len, &removed_days);
    let cleaned = EventLog::new(
        events
            .iter()
            .map(|e| Event {
                t: e.t,
                node: new_index[e.node],
            })
            .collect(),
        labels,
        log.t0,
        t1.max(log.t0),
    )?;
    let report = CleanReport {
        removed_nodes: removed_labels(log, &alive),
        removed_days,
        splices,
        retained_nodes: cleaned.m(),
        retained_events: cleaned.events.len(),
        passes,
    };
    for s in &report.splices {
        log::info!(
            "spliced out [{}, {}); later events shifted by {} h in total",
            s.original_start,
            s.original_end,
            s.cumulative_shift
        );
    }
    Ok((cleaned, report))
}

fn removed_labels(log: &EventLog, alive: &[bool]) -> Vec<String> {
    log.labels
        .iter()
        .zip(alive)
        .filter(|(_, &a)| !a)
        .map(|(l, _)| l.clone())
        .collect()
}

/// Merges consecutive removed days into spans.
fn splices(t0: f64, t1: f64, len: f64, days: &[usize]) -> Vec<Splice> {
    let mut out: Vec<Splice> = Vec::new();
    let mut shift = 0.0;
    for &d in days {
        let start = t0 + d as f64 * len;
        let end = t1.min(start + len);
        shift += end - start;
        match out.last_mut() {
            Some(s) if s.original_end == start => {
                s.original_end = end;
                s.cumulative_shift = shift;
            }
            _ => out.push(Splice {
                original_start: start,
                original_end: end,
                cumulative_shift: shift,
            }),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeFormat {
    /// Fractional hours.
    Hours,
    /// ISO-8601 date-times, converted to hours since the Unix epoch.
    Iso8601,
}

fn parse_iso(s: &str) -> Option<f64> {
    let secs = if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        t.timestamp_micros() as f64 / 1e6
    } else if let Some(t) = ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
    {
        t.and_utc().timestamp_micros() as f64 / 1e6
    } else {
        let d = NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()?;
        d.and_hms_opt(0, 0, 0)?.and_utc().timestamp() as f64
    };
    Some(secs / 3600.0)
}

pub fn detect_format(field: &str) -> Option<TimeFormat> {
    let f = field.trim();
    if f.parse::<f64>().is_ok_and(f64::is_finite) {
        Some(TimeFormat::Hours)
    } else if parse_iso(f).is_some() {
        Some(TimeFormat::Iso8601)
    } else {
        None
    }
}

pub fn parse_time(field: &str, format: TimeFormat) -> Option<f64> {
    let f = field.trim();
    match format {
        TimeFormat::Hours => f.parse::<f64>().ok().filter(|v| v.is_finite()),
        TimeFormat::Iso8601 => parse_iso(f),
    }
}

/// Optional explicit window for [`read_event_csv`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub t0: Option<f64>,
    pub t1: Option<f64>,
}

/// Reads `timestamp,sender[,receiver]` rows; the receiver is ignored. A
/// header row is recognised by an unparseable first timestamp. Without an
/// explicit window, `t0` is the start of the first event's day (hours are
/// counted from the Unix epoch for ISO-8601 input, so days are UTC calendar
/// days) and `t1` the last event time. Labels are sorted numerically when
/// they are all integers, lexically otherwise.
pub fn read_event_csv(path: &Path, window: Window) -> Result<(EventLog, TimeFormat)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut raw: Vec<(f64, String)> = Vec::new();
    let mut format = None;
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::invalid(format!(
                "{} line {}: need timestamp and sender columns",
                path.display(),
                line + 1
            )));
        }
        let fmt = match format {
            Some(f) => f,
            None => match detect_format(&rec[0]) {
                Some(f) => {
                    format = Some(f);
                    f
                }
                None if line == 0 => continue,
                None => {
                    return Err(Error::invalid(format!(
                        "{} line {}: unrecognised timestamp {:?}",
                        path.display(),
                        line + 1,
                        &rec[0]
                    )))
                }
            },
        };
        let t = parse_time(&rec[0], fmt).ok_or_else(|| {
            Error::invalid(format!(
                "{} line {}: timestamp {:?} does not match the detected {fmt:?} format",
                path.display(),
                line + 1,
                &rec[0]
            ))
        })?;
        raw.push((t, rec[1].to_string()));
    }
    let format = format.unwrap_or(TimeFormat::Hours);
    let mut labels: Vec<String> = raw.iter().map(|(_, s)| s.clone()).collect();
    labels.sort();
    labels.dedup();
    if labels.iter().all(|l| l.parse::<i64>().is_ok()) {
        labels.sort_by_key(|l| l.parse::<i64>().expect("checked integer"));
    }
    if labels.is_empty() {
        return Err(Error::invalid(format!("{}: no events", path.display())));
    }
    let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let first = raw.iter().map(|(t, _)| *t).fold(f64::INFINITY, f64::min);
    let last = raw.iter().map(|(t, _)| *t).fold(f64::NEG_INFINITY, f64::max);
    let t0 = window.t0.unwrap_or((first / HOURS_PER_DAY).floor() * HOURS_PER_DAY);
    let t1 = window.t1.unwrap_or(last);
    let events = raw
        .iter()
        .map(|(t, s)| Event { t: *t, node: index[s.as_str()] })
        .collect();
    Ok((EventLog::new(events, labels.clone(), t0, t1)?, format))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(ts: &[(f64, usize)], m: usize, t0: f64, t1: f64) -> EventLog {
        let labels = (0..m).map(|i| format!("n{i}")).collect();
        EventLog::new(ts.iter().map(|&(t, node)| Event { t, node }).collect(), labels, t0, t1).unwrap()
    }

    #[test]
    fn hand_binning() {
        let l = log(&[(0.05, 0), (0.07, 0), (0.15, 0)], 1, 0.0, 0.2);
        let s = aggregate(&l, 0.1).unwrap();
        assert_eq!(s.rows().map(|r| r[0]).collect::<Vec<_>>(), vec![2, 1]);
    }

    #[test]
    fn boundary_event_goes_to_next_bin() {
        let l = log(&[(0.1, 0), (0.3, 0)], 1, 0.0, 0.4);
        let s = aggregate(&l, 0.1).unwrap();
        assert_eq!(s.rows().map(|r| r[0]).collect::<Vec<_>>(), vec![0, 1, 0, 1]);
    }

    #[test]
    fn year_at_tenth_hour_resolution() {
        let l = log(&[], 1, 0.0, 7883.2);
        assert_eq!(n_bins(&l, 0.1), 78832);
    }

    #[test]
    fn empty_log_gives_zero_series() {
        let l = log(&[], 3, 0.0, 1.0);
        let s = aggregate(&l, 0.25).unwrap();
        assert_eq!((s.n_steps(), s.m(), s.total()), (4, 3, 0));
    }

    #[test]
    fn event_at_window_end_is_kept() {
        let l = log(&[(1.0, 0)], 1, 0.0, 1.0);
        let s = aggregate(&l, 0.5).unwrap();
        assert_eq!(s.row(1), &[1]);
    }

    #[test]
    fn clean_without_dead_days_is_identity() {
        let l = log(&[(1.0, 0), (30.0, 1), (50.0, 0)], 2, 0.0, 72.0);
        let (c, rep) = clean(&l, 0, 0).unwrap();
        assert_eq!(c, l);
        assert!(rep.removed_days.is_empty() && rep.removed_nodes.is_empty());
    }

    #[test]
    fn empty_middle_day_is_spliced() {
        let l = log(&[(1.0, 0), (2.0, 1), (50.0, 0), (60.0, 1)], 2, 0.0, 72.0);
        let (c, rep) = clean(&l, 0, 0).unwrap();
        assert_eq!(rep.removed_days, vec![1]);
        assert_eq!(c.t1, 48.0);
        let ts: Vec<f64> = c.events.iter().map(|e| e.t).collect();
        assert_eq!(ts, vec![1.0, 2.0, 26.0, 36.0]);
        assert_eq!(rep.splices.len(), 1);
        assert_eq!(rep.splices[0].cumulative_shift, 24.0);
    }

    #[test]
    fn node_threshold_then_day_removal_reaches_fixed_point() {
        // node 1 makes day 1 alive; once it is dropped, day 1 dies too
        let l = log(&[(1.0, 0), (2.0, 0), (30.0, 1), (50.0, 0)], 2, 0.0, 72.0);
        let (c, rep) = clean(&l, 2, 0).unwrap();
        assert_eq!(rep.removed_nodes, vec!["n1".to_string()]);
        assert_eq!(rep.removed_days, vec![1]);
        assert_eq!(c.m(), 1);
        assert_eq!(c.events.len(), 3);
        let (again, rep2) = clean(&c, 2, 0).unwrap();
        assert_eq!(again, c);
        assert!(rep2.removed_days.is_empty());
    }

    #[test]
    fn removing_everything_is_an_error() {
        let l = log(&[(1.0, 0)], 1, 0.0, 24.0);
        assert!(matches!(clean(&l, 5, 0), Err(Error::EmptyResult(_))));
    }

    #[test]
    fn threshold_keeps_nodes_with_enough_events() {
        // 818 nodes, the first 514 with 40 events and the rest with 39
        let mut ev = Vec::new();
        for node in 0..818 {
            let k = if node < 514 { 40 } else { 39 };
            ev.extend((0..k).map(|j| (j as f64 * 0.5, node)));
        }
        let l = log(&ev, 818, 0.0, 24.0);
        let (c, _) = clean(&l, 40, 0).unwrap();
        assert_eq!(c.m(), 514);
        assert_eq!(aggregate(&c, 1.0).unwrap().total(), 514 * 40);
    }

    #[test]
    fn formats_are_detected() {
        assert_eq!(detect_format("12.5"), Some(TimeFormat::Hours));
        assert_eq!(detect_format("2001-01-01T06:00:00Z"), Some(TimeFormat::Iso8601));
        assert_eq!(detect_format("2001-01-01 06:30"), Some(TimeFormat::Iso8601));
        assert_eq!(detect_format("timestamp"), None);
        let a = parse_time("2001-01-02T00:00:00Z", TimeFormat::Iso8601).unwrap();
        let b = parse_time("2001-01-01", TimeFormat::Iso8601).unwrap();
        assert_eq!(a - b, 24.0);
    }

    #[test]
    fn csv_reader_ignores_receiver_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ev.csv");
        std::fs::write(&path, "time,sender,receiver\n0.05,7,3\n0.07,7,2\n0.15,10,7\n").unwrap();
        let (l, fmt) = read_event_csv(&path, Window { t0: None, t1: Some(0.2) }).unwrap();
        assert_eq!(fmt, TimeFormat::Hours);
        assert_eq!(l.labels, vec!["7", "10"]);
        let s = aggregate(&l, 0.1).unwrap();
        assert_eq!(s.row(0), &[2, 0]);
        assert_eq!(s.row(1), &[0, 1]);
    }

    #[test]
    fn iso_log_starts_at_midnight() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ev.csv");
        std::fs::write(&path, "2001-03-04T10:00:00Z,a\n2001-03-04T10:30:00Z,b\n").unwrap();
        let (l, fmt) = read_event_csv(&path, Window::default()).unwrap();
        assert_eq!(fmt, TimeFormat::Iso8601);
        assert_eq!(l.events[0].t - l.t0, 10.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_log() -> impl Strategy<Value = EventLog> {
            proptest::collection::vec((0.0f64..96.0, 0usize..4), 0..80)
                .prop_map(|ev| log(&ev, 4, 0.0, 96.0))
        }

        proptest! {
            #[test]
            fn counts_are_conserved(l in arb_log(), dt in 0.05f64..5.0) {
                let s = aggregate(&l, dt).unwrap();
                prop_assert_eq!(s.total() as usize, l.events.len());
            }

            #[test]
            fn clean_is_idempotent(l in arb_log(), min in 0u64..6, dead in 0u64..3) {
                if let Ok((c, _)) = clean(&l, min, dead) {
                    let s = aggregate(&c, 0.5).unwrap();
                    prop_assert_eq!(s.total() as usize, c.events.len());
                    let (c2, _) = clean(&c, min, dead).unwrap();
                    prop_assert_eq!(aggregate(&c2, 0.5).unwrap(), s);
                }
            }
        }
    }
}
