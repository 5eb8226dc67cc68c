use std::path::Path;

use spinfid::fit::FitResult;
use spinfid::io::{emit_plot, Panel, Series};
use spinfid::{Result, TraceSeries};

const PS: f64 = 1e12;

fn ps(times: &[f64]) -> Vec<f64> {
    times.iter().map(|t| t * PS).collect()
}

/// Model curve over the fit window, sampled finely enough to look smooth.
fn fit_curve(fit: &FitResult) -> (Vec<f64>, Vec<f64>) {
    let (a, b) = fit.fit_window;
    let p = fit.values();
    let n = 800;
    let t: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    let y = t.iter().map(|&t| fit.model_id.eval(t, &p)).collect();
    (t, y)
}

pub fn trace_panel(title: &str, trace: &TraceSeries, fit: Option<&FitResult>, time_scale: (f64, &str)) -> Panel {
    let scale = |v: &[f64]| v.iter().map(|t| t * time_scale.0).collect::<Vec<_>>();
    let mut series = vec![Series::points("data", scale(trace.times()), trace.values().to_vec())];
    if let Some(f) = fit {
        let (t, y) = fit_curve(f);
        series.push(Series::line("fit", scale(&t), y));
    }
    Panel {
        title: title.into(),
        x_label: format!("delay ({})", time_scale.1),
        y_label: "signal (arb. units)".into(),
        series,
    }
}

pub fn overlay_panel(title: &str, traces: &[TraceSeries], labels: &[String]) -> Panel {
    Panel {
        title: title.into(),
        x_label: "delay (ps)".into(),
        y_label: "signal (arb. units)".into(),
        series: traces
            .iter()
            .zip(labels)
            .map(|(t, l)| Series::line(l.clone(), ps(t.times()), t.values().to_vec()))
            .collect(),
    }
}

pub fn xy_panel(title: &str, x_label: &str, y_label: &str, points: (Vec<f64>, Vec<f64>), line: (Vec<f64>, Vec<f64>)) -> Panel {
    Panel {
        title: title.into(),
        x_label: x_label.into(),
        y_label: y_label.into(),
        series: vec![Series::points("measured", points.0, points.1), Series::line("model", line.0, line.1)],
    }
}

/// Writes `<out>/<stem>.<panel>.svg`.
pub fn write_panel(out: &Path, stem: &str, name: &str, panel: Panel) -> Result<()> {
    emit_plot(&[panel], &out.join(format!("{stem}.{name}.svg")))
}

pub const PICOSECONDS: (f64, &str) = (PS, "ps");
pub const MICROSECONDS: (f64, &str) = (1e6, "µs");
