use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelaxationKind {
    T1,
    Tm,
}

/// Relaxation times measured over a set of temperatures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxationSeries {
    /// Kelvin, strictly increasing.
    pub temperatures: Vec<f64>,
    /// Seconds.
    pub times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<Vec<f64>>,
    pub kind: RelaxationKind,
}

impl RelaxationSeries {
    pub fn validate(&self) -> Result<()> {
        let n = self.temperatures.len();
        if self.times.len() != n || self.sigmas.as_ref().is_some_and(|s| s.len() != n) {
            return Err(Error::Validation("relaxation series lengths differ".into()));
        }
        if self.temperatures.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Validation("temperatures must be strictly increasing".into()));
        }
        if self.temperatures.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::Validation("temperatures must be positive".into()));
        }
        if self.times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::Domain("relaxation times must be positive".into()));
        }
        Ok(())
    }
}

/// Coordinates in which the relaxation time is taken to be linear in temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtrapolationMode {
    /// ln T1 against ln T: a power law T1 = A·T^n.
    #[default]
    LogLog,
    /// ln T1 against T.
    Semilog,
    /// T1 against T.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub mode: ExtrapolationMode,
    /// Kelvin.
    pub target: f64,
    /// Seconds.
    pub value: f64,
    /// None when the fit is exactly determined.
    pub sigma: Option<f64>,
    /// Fitted line in the mode's coordinates; for log-log the slope is the
    /// power-law exponent.
    pub slope: f64,
    pub intercept: f64,
    pub n_points: usize,
    /// Set when a linear-mode prediction is not a valid relaxation time.
    pub unphysical: bool,
}

/// Fits the points with `fit_range.0 <= T <= fit_range.1` and evaluates the
/// fitted law at `target`, propagating the line's covariance.
pub fn extrapolate_t1(
    series: &RelaxationSeries,
    fit_range: (f64, f64),
    target: f64,
    mode: ExtrapolationMode,
) -> Result<Extrapolation> {
    series.validate()?;
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::Domain(format!("target temperature must be > 0, got {target}")));
    }
    let idx: Vec<usize> = (0..series.temperatures.len())
        .filter(|&i| (fit_range.0..=fit_range.1).contains(&series.temperatures[i]))
        .collect();
    if idx.len() < 2 {
        return Err(Error::Domain(format!(
            "{} points inside [{}, {}] K, need at least 2",
            idx.len(),
            fit_range.0,
            fit_range.1
        )));
    }

    let to_x = |t: f64| match mode {
        ExtrapolationMode::LogLog => t.ln(),
        _ => t,
    };
    let to_y = |v: f64| match mode {
        ExtrapolationMode::Linear => v,
        _ => v.ln(),
    };
    let x: Vec<f64> = idx.iter().map(|&i| to_x(series.temperatures[i])).collect();
    let y: Vec<f64> = idx.iter().map(|&i| to_y(series.times[i])).collect();
    // σ in the fitted coordinate: relative error for logarithmic modes
    let w: Vec<f64> = match &series.sigmas {
        Some(s) if idx.iter().all(|&i| s[i] > 0.0) => idx
            .iter()
            .map(|&i| {
                let sy = match mode {
                    ExtrapolationMode::Linear => s[i],
                    _ => s[i] / series.times[i],
                };
                1.0 / (sy * sy)
            })
            .collect(),
        _ => vec![1.0; idx.len()],
    };

    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(&w).map(|(x, w)| w * x).sum::<f64>() / sw;
    let my = y.iter().zip(&w).map(|(y, w)| w * y).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(x, w)| w * (x - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).zip(&w).map(|((x, y), w)| w * (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;

    let xt = to_x(target);
    let yt = my + slope * (xt - mx);
    let n = idx.len();
    let sigma_y = (n > 2).then(|| {
        let chi2: f64 = x
            .iter()
            .zip(&y)
            .zip(&w)
            .map(|((x, y), w)| w * (y - my - slope * (x - mx)).powi(2))
            .sum();
        let s2 = chi2 / (n - 2) as f64;
        (s2 * (1.0 / sw + (xt - mx).powi(2) / sxx)).sqrt()
    });
    let (value, sigma) = match mode {
        ExtrapolationMode::Linear => (yt, sigma_y),
        _ => {
            let v = yt.exp();
            (v, sigma_y.map(|s| v * s))
        }
    };
    Ok(Extrapolation {
        mode,
        target,
        value,
        sigma,
        slope,
        intercept,
        n_points: n,
        unphysical: !(value > 0.0),
    })
}
