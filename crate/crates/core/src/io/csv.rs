use std::fmt::Write as _;
use std::path::Path;

use super::write_atomic;
use crate::error::{Error, Result};
use crate::signal_chain::RawShotPair;
use crate::trace::TraceSeries;

pub const TRACE_MAGIC: &str = "# spinfid-trace v1";
pub const TRACE_HEADER: &str = "time_ps,signal";
pub const SHOTS_MAGIC: &str = "# spinfid-shots v1";
pub const SHOTS_HEADER: &str = "time_ps,left,right";

const PS: f64 = 1e12;

/// Picosecond value whose conversion back to seconds (`ps / 1e12`)
/// reproduces `seconds` exactly whenever such a double exists.
fn seconds_to_ps(seconds: f64) -> f64 {
    let ps = seconds * PS;
    let mut candidates = [ps; 9];
    let (mut up, mut down) = (ps, ps);
    for k in 0..4 {
        up = up.next_up();
        down = down.next_down();
        candidates[1 + 2 * k] = up;
        candidates[2 + 2 * k] = down;
    }
    candidates
        .into_iter()
        .find(|c| c / PS == seconds)
        .unwrap_or(ps)
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders a trace in the `spinfid-trace v1` CSV format.
pub fn format_trace(trace: &TraceSeries) -> String {
    let mut out = String::with_capacity(40 * (trace.len() + 2));
    out.push_str(TRACE_MAGIC);
    out.push('\n');
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for (t, v) in trace.iter() {
        let _ = writeln!(out, "{},{}", fmt17(seconds_to_ps(t)), fmt17(v));
    }
    out
}

pub fn save_trace(trace: &TraceSeries, path: &Path) -> Result<()> {
    write_atomic(path, format_trace(trace).as_bytes())
}

fn parse_field(s: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse {what} '{}'", s.trim()),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("non-finite {what}"),
        });
    }
    Ok(v)
}

/// Data rows of a CSV with the given magic line and column header, with
/// their 1-based line numbers. Blank lines are skipped.
fn rows<'a>(text: &'a str, magic: &str, header: &str) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    match lines.next() {
        Some((_, l)) if l.trim() == magic => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected '{magic}'"),
            })
        }
    }
    match lines.next() {
        Some((_, l)) if l.trim() == header => {}
        _ => {
            return Err(Error::Parse {
                line: 2,
                message: format!("expected column header '{header}'"),
            })
        }
    }
    let ncols = header.split(',').count();
    let mut out = Vec::new();
    for (n, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = l.split(',').collect();
        if cols.len() != ncols {
            return Err(Error::Parse {
                line: n,
                message: format!("expected {ncols} columns, found {}", cols.len()),
            });
        }
        out.push((n, cols));
    }
    if out.is_empty() {
        return Err(Error::Validation("no samples".into()));
    }
    Ok(out)
}

pub fn parse_trace(text: &str) -> Result<TraceSeries> {
    let rows = rows(text, TRACE_MAGIC, TRACE_HEADER)?;
    let mut times = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    let mut prev: Option<f64> = None;
    for (line, cols) in rows {
        let t = parse_field(cols[0], line, "time")? / PS;
        let v = parse_field(cols[1], line, "signal")?;
        if prev.is_some_and(|p| t <= p) {
            return Err(Error::Validation(format!(
                "line {line}: time {} ps is not after the previous sample",
                cols[0].trim()
            )));
        }
        prev = Some(t);
        times.push(t);
        values.push(v);
    }
    TraceSeries::new(times, values)
}

pub fn load_trace(path: &Path) -> Result<TraceSeries> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_trace(&text)
}

/// Raw left/right probe shots grouped by delay, in file order.
pub fn parse_shots(text: &str) -> Result<Vec<(f64, Vec<RawShotPair>)>> {
    let rows = rows(text, SHOTS_MAGIC, SHOTS_HEADER)?;
    let mut out: Vec<(f64, Vec<RawShotPair>)> = Vec::new();
    for (line, cols) in rows {
        let t = parse_field(cols[0], line, "time")? / PS;
        let pair = RawShotPair {
            left_shot: parse_field(cols[1], line, "left shot")?,
            right_shot: parse_field(cols[2], line, "right shot")?,
        };
        match out.last_mut() {
            Some((last, pairs)) if *last == t => pairs.push(pair),
            Some((last, _)) if t < *last => {
                return Err(Error::Validation(format!(
                    "line {line}: delays must be grouped in increasing order"
                )))
            }
            _ => out.push((t, vec![pair])),
        }
    }
    Ok(out)
}

pub fn load_shots(path: &Path) -> Result<Vec<(f64, Vec<RawShotPair>)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_shots(&text)
}

pub fn format_shots(record: &[(f64, Vec<RawShotPair>)]) -> String {
    let mut out = String::new();
    out.push_str(SHOTS_MAGIC);
    out.push('\n');
    out.push_str(SHOTS_HEADER);
    out.push('\n');
    for (t, pairs) in record {
        let t = fmt17(seconds_to_ps(*t));
        for p in pairs {
            let _ = writeln!(out, "{t},{},{}", fmt17(p.left_shot), fmt17(p.right_shot));
        }
    }
    out
}

pub fn save_shots(record: &[(f64, Vec<RawShotPair>)], path: &Path) -> Result<()> {
    write_atomic(path, format_shots(record).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_rows() {
        let text = "# spinfid-trace v1\ntime_ps,signal\n0.5,1.0\n1.0,0.5\n1.5,0.25\n";
        let tr = parse_trace(text).unwrap();
        assert_eq!(tr.len(), 3);
        assert_eq!(tr.times()[1], 1e-12);
    }

    #[test]
    fn duplicated_time_names_line() {
        let text = "# spinfid-trace v1\ntime_ps,signal\n0.5,1.0\n0.5,0.5\n";
        match parse_trace(text) {
            Err(Error::Validation(m)) => assert!(m.contains("line 4"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_data_section() {
        let text = "# spinfid-trace v1\ntime_ps,signal\n";
        match parse_trace(text) {
            Err(Error::Validation(m)) => assert_eq!(m, "no samples"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_rows() {
        assert!(matches!(parse_trace("time_ps,signal\n1,2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            parse_trace("# spinfid-trace v1\nt,s\n1,2\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_trace("# spinfid-trace v1\ntime_ps,signal\n1,2\n2,x\n"),
            Err(Error::Parse { line: 4, .. })
        ));
        assert!(matches!(
            parse_trace("# spinfid-trace v1\ntime_ps,signal\n1,2,3\n"),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn shots_grouping() {
        let text = "# spinfid-shots v1\ntime_ps,left,right\n0,1,-1\n0,2,-2\n1,3,-3\n";
        let rec = parse_shots(text).unwrap();
        assert_eq!(rec.len(), 2);
        assert_eq!(rec[0].1.len(), 2);
        assert_eq!(parse_shots(&format_shots(&rec)).unwrap(), rec);
        let bad = "# spinfid-shots v1\ntime_ps,left,right\n1,1,-1\n0,2,-2\n";
        assert!(parse_shots(bad).is_err());
    }

    proptest! {
        #[test]
        fn trace_round_trip(
            start in -5.0f64..5.0,
            steps in proptest::collection::vec(1e-4f64..1e3, 1..40),
            values in proptest::collection::vec(-1e3f64..1e3, 40),
        ) {
            // times representable as a picosecond double divided by 1e12
            let mut ps = vec![start];
            for s in &steps {
                let next = ps.last().unwrap() + s;
                ps.push(next);
            }
            let times: Vec<f64> = ps.iter().map(|p| p / 1e12).collect();
            let vals = values[..times.len()].to_vec();
            let tr = TraceSeries::new(times, vals).unwrap();
            prop_assert_eq!(parse_trace(&format_trace(&tr)).unwrap(), tr);
        }
    }
}
