use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::trace::TraceSeries;

const MIN_POINTS: usize = 8;
const ZERO_PAD: usize = 4;
const PEAK_OVER_MEDIAN: f64 = 3.0;
/// Upper bound placed on a T2* guess, in units of the window span.
const T2_GUESS_CEILING: f64 = 100.0;

/// Starting point for a damped-cosine fit: [η₀, T2*, ω, φ].
#[derive(Debug, Clone, PartialEq)]
pub struct DampedCosineGuess {
    pub params: [f64; 4],
    /// A spectral peak was found; ω is zero otherwise.
    pub oscillating: bool,
    /// No decay could be measured; T2* sits at its ceiling.
    pub degenerate: bool,
}

/// Resamples onto a uniform grid at the median spacing when needed.
fn uniform_samples(t: &[f64], y: &[f64]) -> (f64, Vec<f64>) {
    let mut steps: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    steps.sort_by(f64::total_cmp);
    let dt = steps[steps.len() / 2];
    let uniform = t.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-6 * dt);
    if uniform {
        return (dt, y.to_vec());
    }
    let n = ((t[t.len() - 1] - t[0]) / dt).floor() as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for i in 0..n {
        let ti = t[0] + i as f64 * dt;
        while j + 2 < t.len() && t[j + 1] < ti {
            j += 1;
        }
        let f = ((ti - t[j]) / (t[j + 1] - t[j])).clamp(0.0, 1.0);
        out.push(y[j] + f * (y[j + 1] - y[j]));
    }
    (dt, out)
}

/// Dominant angular frequency of mean-removed uniform samples, or None when
/// no interior spectral peak rises above 3× the spectral median.
fn dominant_frequency(dt: f64, y: &[f64]) -> Option<f64> {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if y.iter().all(|v| (v - mean).abs() <= 1e-12 * scale) {
        return None;
    }
    let len = (y.len().next_power_of_two()) * ZERO_PAD;
    let mut buf: Vec<Complex<f64>> = y.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    buf.resize(len, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let mag: Vec<f64> = buf[..=len / 2].iter().map(|c| c.norm()).collect();

    let mut sorted = mag[1..].to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    // bins below one native resolution element belong to the decay envelope
    let k_min = (len as f64 / y.len() as f64).ceil() as usize;
    let (k_peak, &peak) = mag
        .iter()
        .enumerate()
        .skip(k_min)
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if k_peak == k_min || k_peak + 1 >= mag.len() || !(peak > PEAK_OVER_MEDIAN * median) {
        return None;
    }
    let (a, b, c) = (mag[k_peak - 1], peak, mag[k_peak + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    let freq = (k_peak as f64 + shift.clamp(-0.5, 0.5)) / (len as f64 * dt);
    Some(2.0 * std::f64::consts::PI * freq)
}

/// Magnitude of the analytic signal (FFT Hilbert transform).
fn analytic_envelope(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = y.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let factor = if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *c *= factor;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.norm() / n as f64).collect()
}

/// Decay time from a log-linear regression of the leading part of the
/// envelope, down to a tenth of its maximum.
fn envelope_decay(t: &[f64], env: &[f64]) -> Option<f64> {
    let max = env.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return None;
    }
    let peak = env.iter().position(|&e| e == max)?;
    let end = env[peak..]
        .iter()
        .position(|&e| e < 0.1 * max)
        .map_or(env.len(), |k| peak + k);
    let pts: Vec<(f64, f64)> = (peak..end)
        .filter(|&i| env[i] > 0.0)
        .map(|i| (t[i], env[i].ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope < 0.0).then(|| -1.0 / slope)
}

/// Heuristic starting parameters for the damped-cosine model from the
/// samples inside `window`: ω from the spectral peak, T2* from the envelope
/// decay, then η₀ and φ by linear least squares against the fixed
/// (ω, T2*) basis.
pub fn initial_guess_damped_cosine(trace: &TraceSeries, window: (f64, f64)) -> Result<DampedCosineGuess> {
    let w = trace.window(window.0, window.1);
    if w.len() < MIN_POINTS {
        return Err(Error::GuessFailure(format!(
            "{} samples in window, need at least {MIN_POINTS}",
            w.len()
        )));
    }
    let t = w.times();
    let y = w.values();
    let span = t[t.len() - 1] - t[0];
    let ceiling = T2_GUESS_CEILING * span;

    let (dt, uniform) = uniform_samples(t, y);
    let omega = dominant_frequency(dt, &uniform);
    let oscillating = omega.is_some();
    let omega = omega.unwrap_or(0.0);

    let decay = if oscillating {
        let env = analytic_envelope(&uniform);
        let tu: Vec<f64> = (0..uniform.len()).map(|i| t[0] + i as f64 * dt).collect();
        // the Hilbert envelope is unreliable at the edges
        let edge = uniform.len() / 20;
        envelope_decay(&tu[..tu.len() - edge], &env[..env.len() - edge])
    } else {
        let env: Vec<f64> = y.iter().map(|v| v.abs()).collect();
        envelope_decay(t, &env)
    };
    let decay = decay.filter(|&d| d <= ceiling);
    let degenerate = decay.is_none();
    let t2 = decay.unwrap_or(ceiling).clamp(span * 1e-3, ceiling);

    // y ≈ a·e·cos(ωt) − b·e·sin(ωt) with a = η₀cosφ, b = η₀sinφ
    let (mut scc, mut sss, mut scs, mut syc, mut sys) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        let e = (-ti / t2).exp();
        let (s, c) = (omega * ti).sin_cos();
        let (bc, bs) = (e * c, -e * s);
        scc += bc * bc;
        sss += bs * bs;
        scs += bc * bs;
        syc += yi * bc;
        sys += yi * bs;
    }
    let (eta0, phi) = if oscillating {
        let det = scc * sss - scs * scs;
        if det.abs() <= 1e-300 {
            (syc / scc, 0.0)
        } else {
            let a = (syc * sss - sys * scs) / det;
            let b = (sys * scc - syc * scs) / det;
            (a.hypot(b), b.atan2(a))
        }
    } else {
        (syc / scc, 0.0)
    };
    if !eta0.is_finite() || !t2.is_finite() {
        return Err(Error::GuessFailure("non-finite amplitude estimate".into()));
    }
    Ok(DampedCosineGuess {
        params: [eta0, t2, omega, phi],
        oscillating,
        degenerate,
    })
}
