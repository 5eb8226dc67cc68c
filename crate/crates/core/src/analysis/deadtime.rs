use crate::error::{Error, Result};
use crate::trace::TraceSeries;

/// Spectrometer deadtime after the refocusing pulse, seconds.
pub const DEFAULT_DEADTIME: f64 = 120e-9;
/// Minimum pulse-timing increment, seconds.
pub const DEFAULT_INCREMENT: f64 = 2e-9;

/// Result of applying a pulse-EPR deadtime; `empty` is set when nothing
/// survives.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedTrace {
    pub trace: TraceSeries,
    pub empty: bool,
}

/// Drops samples earlier than `deadtime` and snaps the rest onto the
/// `increment` grid. Samples that land on an occupied grid point are dropped.
pub fn deadtime_truncate(trace: &TraceSeries, deadtime: f64, increment: f64) -> Result<TruncatedTrace> {
    if !(deadtime >= 0.0 && deadtime.is_finite()) {
        return Err(Error::Domain(format!("deadtime must be >= 0, got {deadtime}")));
    }
    if !(increment > 0.0 && increment.is_finite()) {
        return Err(Error::Domain(format!("increment must be > 0, got {increment}")));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (t, v) in trace.iter().filter(|(t, _)| *t >= deadtime) {
        let snapped = (t / increment).round() * increment;
        let t = if (snapped - t).abs() <= 1e-9 * increment { t } else { snapped };
        if times.last().is_some_and(|&last| t <= last) {
            continue;
        }
        times.push(t);
        values.push(v);
    }
    let empty = times.is_empty();
    let mut out = TraceSeries::new(times, values)?;
    out.metadata = trace.metadata.clone();
    Ok(TruncatedTrace { trace: out, empty })
}
