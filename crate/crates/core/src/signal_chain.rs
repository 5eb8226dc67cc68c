//! Polarisation-modulation detection: pump helicity sequencing from a
//! photoelastic modulator and pump-odd demodulation of probe shots.
//!
//! The laser trigger is derived from the PEM reference, so the interval
//! between pulses is a whole number of PEM half-cycles. The quoted trigger
//! rate only selects that number: `round(2·f_pem/f_trigger)`. An odd count
//! puts consecutive pulses on opposite half-cycles of the retardation and the
//! helicity alternates.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{noise_free_spin_signal, Detection, ExperimentConfig, Helicity, TimeGrid};
use crate::error::{ensure, Error, Result};
use crate::rng::{substream, SHOT_STREAM_BASE};

/// Largest accepted mismatch between `2·f_pem/f_trigger` and the nearest
/// whole number of half-cycles, relative to that number.
const LOCK_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationConfig {
    /// Hz.
    pub pem_frequency: f64,
    /// Hz.
    pub trigger_frequency: f64,
    /// Left/right shot pairs averaged per delay point.
    pub pulses_per_point: usize,
    /// PEM phase (rad) at the first trigger; π/2 is peak retardation.
    #[serde(default = "default_pem_phase")]
    pub pem_phase: f64,
    /// Per-shot noise standard deviation. Falls back to the experiment's
    /// additive noise when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shot_sigma: Option<f64>,
}

fn default_pem_phase() -> f64 {
    std::f64::consts::FRAC_PI_2
}

impl Default for ModulationConfig {
    fn default() -> Self {
        Self {
            pem_frequency: 50.176e3,
            trigger_frequency: 1.014e3,
            pulses_per_point: 1000,
            pem_phase: default_pem_phase(),
            shot_sigma: None,
        }
    }
}

impl ModulationConfig {
    /// PEM half-cycles between consecutive triggers.
    pub fn half_cycles_per_pulse(&self) -> Result<u64> {
        ensure(
            self.trigger_frequency > 0.0
                && self.pem_frequency > self.trigger_frequency
                && self.pem_frequency.is_finite(),
            || {
                format!(
                    "need pem_frequency > trigger_frequency > 0 (got {} Hz, {} Hz)",
                    self.pem_frequency, self.trigger_frequency
                )
            },
        )?;
        let ratio = 2.0 * self.pem_frequency / self.trigger_frequency;
        let half_cycles = ratio.round();
        ensure((ratio - half_cycles).abs() <= LOCK_TOLERANCE * half_cycles, || {
            format!("trigger is not locked to the PEM: 2·f_pem/f_trigger = {ratio}")
        })?;
        Ok(half_cycles as u64)
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.half_cycles_per_pulse()?;
        ensure(h % 2 == 1, || {
            format!(
                "{h} PEM half-cycles between pulses: consecutive pulses share a helicity"
            )
        })?;
        ensure(self.pem_phase.is_finite() && self.pem_phase.sin().abs() > 1e-3, || {
            format!("PEM phase {} triggers at a retardation zero", self.pem_phase)
        })?;
        ensure(self.pulses_per_point >= 1, || "pulses_per_point must be >= 1".into())?;
        if let Some(s) = self.shot_sigma {
            ensure(s >= 0.0 && s.is_finite(), || format!("shot_sigma must be >= 0, got {s}"))?;
        }
        Ok(())
    }
}

/// Helicity of each of the first `n` pump pulses: the sign of the PEM
/// retardation sin(2π·f_pem·t_k + phase) at trigger time t_k.
pub fn pulse_helicities(config: &ModulationConfig, n: usize) -> Result<Vec<Helicity>> {
    config.validate()?;
    ensure(n >= 1, || "need at least one pulse".into())?;
    let h = config.half_cycles_per_pulse()? as f64;
    let period = h / (2.0 * config.pem_frequency);
    Ok((0..n)
        .map(|k| {
            let t = k as f64 * period;
            let retardation = (2.0 * std::f64::consts::PI * config.pem_frequency * t + config.pem_phase).sin();
            if retardation >= 0.0 {
                Helicity::Left
            } else {
                Helicity::Right
            }
        })
        .collect())
}

/// Probe readings for one left pulse and the following right pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawShotPair {
    pub left_shot: f64,
    pub right_shot: f64,
}

/// Pump-odd average: mean of (left − right)/2. Anything common to both
/// helicities cancels.
pub fn demodulate(pairs: &[RawShotPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Domain("cannot demodulate zero shot pairs".into()));
    }
    if pairs.iter().any(|p| !p.left_shot.is_finite() || !p.right_shot.is_finite()) {
        return Err(Error::Domain("non-finite shot value".into()));
    }
    let sum: f64 = pairs.iter().map(|p| (p.left_shot - p.right_shot) / 2.0).sum();
    Ok(sum / pairs.len() as f64)
}

/// Noise-free left-helicity spin signal (demodulated reference) on the grid.
fn left_spin(config: &ExperimentConfig, grid: TimeGrid) -> Result<Vec<f64>> {
    let mut left = config.clone();
    left.pump_helicity = Helicity::Left;
    left.detection = Detection::Demodulated;
    left.time_grid = grid;
    noise_free_spin_signal(&left)
}

fn shots_for_delay(
    config: &ExperimentConfig,
    modulation: &ModulationConfig,
    delay: f64,
    spin: f64,
    delay_index: usize,
) -> Vec<RawShotPair> {
    let sigma = modulation.shot_sigma.unwrap_or(config.noise.additive_sigma);
    let even = config.oke.even(delay.abs());
    let odd = config.oke.odd(delay.abs());
    let mut rng = substream(config.noise.rng_seed, SHOT_STREAM_BASE + delay_index as u64);
    (0..modulation.pulses_per_point)
        .map(|_| {
            let nl: f64 = StandardNormal.sample(&mut rng);
            let nr: f64 = StandardNormal.sample(&mut rng);
            RawShotPair {
                left_shot: spin + odd + even + sigma * nl,
                right_shot: -spin - odd + even + sigma * nr,
            }
        })
        .collect()
}

/// Left/right probe shots at a single delay. Shot noise is drawn from the
/// substream `(noise seed, delay_index)`.
pub fn synthesize_raw_shots(
    config: &ExperimentConfig,
    modulation: &ModulationConfig,
    delay: f64,
    delay_index: usize,
) -> Result<Vec<RawShotPair>> {
    modulation.validate()?;
    ensure(delay.is_finite(), || "delay must be finite".into())?;
    let spin = left_spin(config, TimeGrid::Explicit(vec![delay]))?[0];
    Ok(shots_for_delay(config, modulation, delay, spin, delay_index))
}

/// Shot pairs for every delay of the configured time grid.
pub fn synthesize_shot_record(
    config: &ExperimentConfig,
    modulation: &ModulationConfig,
) -> Result<Vec<(f64, Vec<RawShotPair>)>> {
    modulation.validate()?;
    let times = config.time_grid.times()?;
    let spin = left_spin(config, config.time_grid.clone())?;
    Ok(times
        .par_iter()
        .zip(spin.par_iter())
        .enumerate()
        .map(|(i, (&t, &s))| (t, shots_for_delay(config, modulation, t, s, i)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::OkeArtifact;
    use rand::SeedableRng;

    #[test]
    fn lab_frequencies_alternate() {
        let m = ModulationConfig::default();
        assert_eq!(m.half_cycles_per_pulse().unwrap(), 99);
        let seq = pulse_helicities(&m, 6).unwrap();
        use Helicity::*;
        assert_eq!(seq, vec![Left, Right, Left, Right, Left, Right]);
        let long = pulse_helicities(&m, 10_000).unwrap();
        assert!(long.windows(2).all(|w| w[0] != w[1]));
    }

    #[test]
    fn even_ratio_is_rejected() {
        let m = ModulationConfig {
            pem_frequency: 50e3,
            trigger_frequency: 1e3,
            ..ModulationConfig::default()
        };
        assert_eq!(m.half_cycles_per_pulse().unwrap(), 100);
        assert!(pulse_helicities(&m, 4).is_err());
        let unlocked = ModulationConfig {
            trigger_frequency: 1.2345e3,
            ..ModulationConfig::default()
        };
        assert!(unlocked.validate().is_err());
        let inverted = ModulationConfig {
            pem_frequency: 1e3,
            trigger_frequency: 2e3,
            ..ModulationConfig::default()
        };
        assert!(inverted.validate().is_err());
    }

    #[test]
    fn single_pulse() {
        let seq = pulse_helicities(&ModulationConfig::default(), 1).unwrap();
        assert_eq!(seq, vec![Helicity::Left]);
        assert!(pulse_helicities(&ModulationConfig::default(), 0).is_err());
    }

    #[test]
    fn demodulation_arithmetic() {
        let odd = vec![RawShotPair { left_shot: 0.7, right_shot: -0.7 }; 5];
        assert_eq!(demodulate(&odd).unwrap(), 0.7);
        let even = vec![RawShotPair { left_shot: 3.3, right_shot: 3.3 }; 5];
        assert_eq!(demodulate(&even).unwrap(), 0.0);
        assert!(demodulate(&[]).is_err());
    }

    #[test]
    fn demodulation_with_noise() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pairs: Vec<_> = (0..100)
            .map(|_| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                RawShotPair {
                    left_shot: 1.0 + 10.0 + 0.1 * a,
                    right_shot: -1.0 + 10.0 + 0.1 * b,
                }
            })
            .collect();
        let s = demodulate(&pairs).unwrap();
        assert!((s - 1.0).abs() < 0.02, "{s}");
    }

    fn quiet_config() -> ExperimentConfig {
        let mut c = ExperimentConfig::h2o_default();
        c.field = 2.0;
        c.ensemble_size = 64;
        c.noise.additive_sigma = 0.0;
        c.oke = OkeArtifact::none();
        c.time_grid = TimeGrid::uniform(0.0, 10e-12, 0.5e-12);
        c
    }

    #[test]
    fn noise_free_shots_are_antisymmetric() {
        let c = quiet_config();
        let m = ModulationConfig { pulses_per_point: 10, ..Default::default() };
        let trace = crate::dynamics::simulate_trace(&c).unwrap();
        for (i, (&t, &v)) in trace.times().iter().zip(trace.values()).enumerate() {
            let shots = synthesize_raw_shots(&c, &m, t, i).unwrap();
            for p in &shots {
                assert_eq!(p.left_shot, -p.right_shot);
                assert!((p.left_shot - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pure_even_artifact_is_rejected() {
        let mut c = quiet_config();
        c.initialization_efficiency = 0.0;
        c.oke = OkeArtifact { amplitude: 3.0, width: 0.1e-12, odd_fraction: 0.0 };
        let m = ModulationConfig { pulses_per_point: 20, ..Default::default() };
        let shots = synthesize_raw_shots(&c, &m, 0.0, 0).unwrap();
        assert_eq!(demodulate(&shots).unwrap(), 0.0);
        assert_eq!(shots[0].left_shot, 3.0);
    }

    #[test]
    fn shot_record_matches_single_delay_synthesis() {
        let mut c = quiet_config();
        c.noise.additive_sigma = 0.01;
        let m = ModulationConfig { pulses_per_point: 8, ..Default::default() };
        let record = synthesize_shot_record(&c, &m).unwrap();
        let (t, pairs) = &record[3];
        assert_eq!(pairs, &synthesize_raw_shots(&c, &m, *t, 3).unwrap());
    }
}
