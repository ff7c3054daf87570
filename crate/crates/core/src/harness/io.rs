//! Persistence: fixed-format CSV, JSON-lines summaries, atomic writes.

use std::fs;
use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::{EpisodeRecord, EpisodeRow, EpisodeSummary, HarnessError, Scenario, SnapshotRecord};
use crate::controller::Variant;
use crate::dynamics::State;

pub const EPISODE_HEADER: &str = "step,t,x,y,theta,v,omega,q,min_h,safe_frac,fallback";
pub const SNAPSHOT_HEADER: &str = "sample,step,x,y,theta,cost,safe";

/// Decimal with 9 significant digits (`%.9g`-style), locale-free.
pub fn fmt_g9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if v.is_nan() {
        return "nan".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let sci = format!("{:.8e}", v);
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let neg = mant.starts_with('-');
    let sign = if neg { "-" } else { "" };
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    debug_assert_eq!(digits.len(), 9);
    if !(-4..9).contains(&exp) {
        let (first, rest) = digits.split_at(1);
        let rest = rest.trim_end_matches('0');
        if rest.is_empty() {
            format!("{sign}{first}e{exp}")
        } else {
            format!("{sign}{first}.{rest}e{exp}")
        }
    } else if exp >= 0 {
        let point = (exp + 1) as usize;
        let int_part = &digits[..point];
        let frac = digits[point..].trim_end_matches('0');
        if frac.is_empty() {
            format!("{sign}{int_part}")
        } else {
            format!("{sign}{int_part}.{frac}")
        }
    } else {
        let zeros = "0".repeat((-exp - 1) as usize);
        let frac = digits.trim_end_matches('0');
        format!("{sign}0.{zeros}{frac}")
    }
}

/// Write via a temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| HarnessError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

pub fn episode_csv_string(record: &EpisodeRecord) -> String {
    let mut out = String::with_capacity(64 * (record.rows.len() + 1));
    out.push_str(EPISODE_HEADER);
    out.push('\n');
    for r in &record.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.step,
            fmt_g9(r.t),
            fmt_g9(r.state.x),
            fmt_g9(r.state.y),
            fmt_g9(r.state.theta),
            fmt_g9(r.control.x),
            fmt_g9(r.control.y),
            fmt_g9(r.q),
            fmt_g9(r.min_h),
            fmt_g9(r.safe_frac),
            u8::from(r.fallback),
        ));
    }
    out
}

pub fn write_episode_csv(record: &EpisodeRecord, path: &Path) -> Result<(), HarnessError> {
    write_atomic(path, episode_csv_string(record).as_bytes())
}

pub fn snapshot_csv_string(record: &SnapshotRecord) -> String {
    let mut out = String::new();
    out.push_str(SNAPSHOT_HEADER);
    out.push('\n');
    for (k, traj) in record.trajectories.iter().enumerate() {
        for (i, s) in traj.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                k,
                i,
                fmt_g9(s.x),
                fmt_g9(s.y),
                fmt_g9(s.theta),
                fmt_g9(record.costs[k]),
                u8::from(record.safe[k]),
            ));
        }
    }
    out
}

pub fn write_snapshot_csv(record: &SnapshotRecord, path: &Path) -> Result<(), HarnessError> {
    write_atomic(path, snapshot_csv_string(record).as_bytes())
}

fn parse_err(path: &Path, msg: String) -> HarnessError {
    HarnessError::Config(format!("{}: {msg}", path.display()))
}

fn field<'a>(parts: &'a [&'a str], idx: usize, path: &Path, line: usize) -> Result<&'a str, HarnessError> {
    parts
        .get(idx)
        .copied()
        .ok_or_else(|| parse_err(path, format!("line {line}: missing column {idx}")))
}

fn parse_f64(s: &str, path: &Path, line: usize) -> Result<f64, HarnessError> {
    s.parse()
        .map_err(|_| parse_err(path, format!("line {line}: bad number {s:?}")))
}

pub fn read_episode_csv(path: &Path) -> Result<EpisodeRecord, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == EPISODE_HEADER => {}
        other => {
            return Err(parse_err(
                path,
                format!("unexpected episode header {other:?}"),
            ))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        let ln = i + 2;
        rows.push(EpisodeRow {
            step: field(&parts, 0, path, ln)?
                .parse()
                .map_err(|_| parse_err(path, format!("line {ln}: bad step")))?,
            t: parse_f64(field(&parts, 1, path, ln)?, path, ln)?,
            state: State::new(
                parse_f64(field(&parts, 2, path, ln)?, path, ln)?,
                parse_f64(field(&parts, 3, path, ln)?, path, ln)?,
                parse_f64(field(&parts, 4, path, ln)?, path, ln)?,
            ),
            control: Vector2::new(
                parse_f64(field(&parts, 5, path, ln)?, path, ln)?,
                parse_f64(field(&parts, 6, path, ln)?, path, ln)?,
            ),
            q: parse_f64(field(&parts, 7, path, ln)?, path, ln)?,
            min_h: parse_f64(field(&parts, 8, path, ln)?, path, ln)?,
            safe_frac: parse_f64(field(&parts, 9, path, ln)?, path, ln)?,
            fallback: field(&parts, 10, path, ln)? == "1",
        });
    }
    let dt = if rows.len() >= 2 { rows[1].t - rows[0].t } else { 0.0 };
    let total_cost = rows.iter().map(|r| r.q * dt).sum();
    let min_h = rows.iter().map(|r| r.min_h).fold(f64::INFINITY, f64::min);
    let violations = rows.iter().filter(|r| r.min_h < 0.0).count();
    let fallbacks = rows.iter().filter(|r| r.fallback).count();
    let steps = rows.len();
    Ok(EpisodeRecord {
        rows,
        summary: EpisodeSummary {
            completed: false, // filled from the summary document by callers that need it
            steps,
            total_cost,
            min_h,
            violations,
            fallbacks,
        },
    })
}

pub fn read_snapshot_csv(path: &Path) -> Result<SnapshotRecord, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SNAPSHOT_HEADER => {}
        other => {
            return Err(parse_err(
                path,
                format!("unexpected snapshot header {other:?}"),
            ))
        }
    }
    let mut record = SnapshotRecord::empty();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let ln = i + 2;
        let parts: Vec<&str> = line.split(',').collect();
        let sample: usize = field(&parts, 0, path, ln)?
            .parse()
            .map_err(|_| parse_err(path, format!("line {ln}: bad sample index")))?;
        if sample == record.trajectories.len() {
            record.trajectories.push(Vec::new());
            record.costs.push(parse_f64(field(&parts, 5, path, ln)?, path, ln)?);
            record.safe.push(field(&parts, 6, path, ln)? == "1");
        }
        record.trajectories[sample].push(State::new(
            parse_f64(field(&parts, 2, path, ln)?, path, ln)?,
            parse_f64(field(&parts, 3, path, ln)?, path, ln)?,
            parse_f64(field(&parts, 4, path, ln)?, path, ln)?,
        ));
    }
    Ok(record)
}

/// One-line JSON summary; scenario geometry rides along so plots can be
/// re-rendered from persisted outputs alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryDoc {
    pub scenario_name: String,
    pub variant: Variant,
    pub samples: usize,
    pub horizon: usize,
    pub dt: f64,
    pub seed: u64,
    pub snapshot_step: usize,
    pub summary: EpisodeSummary,
    pub scenario: Scenario,
}

pub fn summary_jsonl_string(doc: &SummaryDoc) -> String {
    let mut s = serde_json::to_string(doc).expect("summary serializes");
    s.push('\n');
    s
}

pub fn write_summary(doc: &SummaryDoc, path: &Path) -> Result<(), HarnessError> {
    write_atomic(path, summary_jsonl_string(doc).as_bytes())
}

pub fn read_summary(path: &Path) -> Result<SummaryDoc, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let line = text
        .lines()
        .next()
        .ok_or_else(|| parse_err(path, "empty summary".into()))?;
    serde_json::from_str(line).map_err(|e| parse_err(path, format!("bad summary JSON: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g9_basic_forms() {
        assert_eq!(fmt_g9(0.0), "0");
        assert_eq!(fmt_g9(-0.0), "0");
        assert_eq!(fmt_g9(1.0), "1");
        assert_eq!(fmt_g9(-2.5), "-2.5");
        assert_eq!(fmt_g9(0.05), "0.05");
        assert_eq!(fmt_g9(123456789.0), "123456789");
        assert_eq!(fmt_g9(1234567890.0), "1.23456789e9");
        assert_eq!(fmt_g9(1e-5), "1e-5");
        assert_eq!(fmt_g9(0.0001), "0.0001");
        assert_eq!(fmt_g9(3.141592653589793), "3.14159265");
    }

    #[test]
    fn g9_round_trips_at_printed_precision() {
        for &v in &[
            1.0 / 3.0,
            -8.59,
            2.877756,
            1e-12,
            7.25e14,
            0.04999999999,
            -123.456789123,
        ] {
            let s = fmt_g9(v);
            let parsed: f64 = s.parse().expect("parseable");
            let rel = ((parsed - v) / v).abs();
            assert!(rel < 5e-9, "{v} printed as {s} parsed to {parsed}");
        }
    }

    #[test]
    fn episode_csv_round_trip() {
        let record = EpisodeRecord {
            rows: vec![EpisodeRow {
                step: 0,
                t: 0.0,
                state: State::new(0.1234567891, -2.0, 0.5),
                control: Vector2::new(1.5, -0.25),
                q: 321.0,
                min_h: 8.59,
                safe_frac: 0.98,
                fallback: false,
            }],
            summary: EpisodeSummary {
                completed: true,
                steps: 1,
                total_cost: 321.0 * 0.05,
                min_h: 8.59,
                violations: 0,
                fallbacks: 0,
            },
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("episode.csv");
        write_episode_csv(&record, &path).unwrap();
        let parsed = read_episode_csv(&path).unwrap();
        assert_eq!(parsed.rows.len(), 1);
        let r = &parsed.rows[0];
        assert!((r.state.x - 0.123456789).abs() < 1e-9);
        assert_eq!(r.control, Vector2::new(1.5, -0.25));
        assert_eq!(r.min_h, 8.59);
        assert!(!r.fallback);
    }

    #[test]
    fn empty_records_write_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let ep = dir.path().join("episode.csv");
        let empty = EpisodeRecord {
            rows: vec![],
            summary: EpisodeSummary {
                completed: true,
                steps: 0,
                total_cost: 0.0,
                min_h: f64::INFINITY,
                violations: 0,
                fallbacks: 0,
            },
        };
        write_episode_csv(&empty, &ep).unwrap();
        assert_eq!(
            std::fs::read_to_string(&ep).unwrap(),
            format!("{EPISODE_HEADER}\n")
        );

        let sp = dir.path().join("snapshot.csv");
        write_snapshot_csv(&SnapshotRecord::empty(), &sp).unwrap();
        assert_eq!(
            std::fs::read_to_string(&sp).unwrap(),
            format!("{SNAPSHOT_HEADER}\n")
        );
    }

    #[test]
    fn snapshot_round_trip() {
        let record = SnapshotRecord {
            t: 0.35,
            trajectories: vec![
                vec![State::new(0.0, 0.0, 0.0), State::new(0.1, 0.0, 0.0)],
                vec![State::new(0.0, 0.0, 0.0), State::new(0.0, 0.1, 0.2)],
            ],
            costs: vec![10.0, 20.0],
            safe: vec![true, false],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snapshot.csv");
        write_snapshot_csv(&record, &path).unwrap();
        let parsed = read_snapshot_csv(&path).unwrap();
        assert_eq!(parsed.trajectories.len(), 2);
        assert_eq!(parsed.trajectories[0].len(), 2);
        assert_eq!(parsed.costs, vec![10.0, 20.0]);
        assert_eq!(parsed.safe, vec![true, false]);
    }
}
