//! Run configuration: one JSON document with a section per module.
//!
//! A config file only needs the keys it changes. It is merged over the
//! built-in defaults and then parsed strictly, so a misspelt key anywhere is
//! an error rather than a silently ignored setting.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use spinfid::analysis::{glycerol_viscosity, ExtrapolationMode};
use spinfid::dynamics::ExperimentConfig;
use spinfid::signal_chain::ModulationConfig;
use spinfid::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Start of the fit window in picoseconds.
    pub fit_start_ps: f64,
    /// Extra randomised restarts (±20 %) of the damped least-squares solver.
    pub multi_start: usize,
    pub max_iterations: usize,
}

impl Default for FitSection {
    fn default() -> Self {
        Self { fit_start_ps: 0.5, multi_start: 0, max_iterations: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Tesla.
    pub fields_t: Vec<f64>,
    /// mPa·s; five points from water to 40 wt% glycerol when empty.
    pub viscosities_mpa_s: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { fields_t: vec![1.0, 2.0, 3.0, 4.0, 5.0], viscosities_mpa_s: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EprKind {
    #[default]
    InversionRecovery,
    HahnEcho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EprSection {
    pub kind: EprKind,
    /// Nanoseconds; no truncation when absent.
    pub deadtime_ns: Option<f64>,
    /// Pulse-timing increment in nanoseconds.
    pub increment_ns: f64,
    /// Fit the Hahn-echo stretch exponent instead of holding it at 1.
    pub fit_stretch: bool,
}

impl Default for EprSection {
    fn default() -> Self {
        Self { kind: EprKind::default(), deadtime_ns: None, increment_ns: 2.0, fit_stretch: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtrapolationSection {
    /// Kelvin, inclusive.
    pub fit_range_k: (f64, f64),
    pub target_k: f64,
    pub mode: ExtrapolationMode,
}

impl Default for ExtrapolationSection {
    fn default() -> Self {
        Self { fit_range_k: (12.0, 20.0), target_k: 294.0, mode: ExtrapolationMode::LogLog }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivitySection {
    pub threshold_snr: f64,
    /// Joules; rescales the limit to a different pump energy when set.
    pub pump_energy_j: Option<f64>,
}

impl Default for SensitivitySection {
    fn default() -> Self {
        Self { threshold_snr: 3.0, pump_energy_j: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlycerolBasis {
    #[default]
    Mass,
    Volume,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSection {
    /// When set, overrides `experiment.viscosity` from the water–glycerol
    /// correlation at the experiment temperature.
    pub glycerol_fraction: Option<f64>,
    pub glycerol_basis: GlycerolBasis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotSection {
    pub svg: bool,
}

impl Default for PlotSection {
    fn default() -> Self {
        Self { svg: true }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub modulation: ModulationConfig,
    pub sample: SampleSection,
    pub fit: FitSection,
    pub sweep: SweepSection,
    pub epr: EprSection,
    pub extrapolation: ExtrapolationSection,
    pub sensitivity: SensitivitySection,
    pub plot: PlotSection,
}

/// Recursively overlays `patch` on `base`. Objects are merged key by key
/// unless they share no keys at all, which marks a switch between enum
/// variants; everything else is replaced.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) if b.is_empty() || p.is_empty() || p.keys().any(|k| b.contains_key(k)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, p) => *slot = p,
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let patch: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        if !patch.is_object() {
            return Err(Error::Validation("config must be a JSON object".into()));
        }
        let mut merged = serde_json::to_value(RunConfig::default()).expect("default config serialises");
        merge(&mut merged, patch);
        let config: RunConfig =
            serde_json::from_value(merged).map_err(|e| Error::Validation(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Applies the sample section to the experiment and checks every module's
    /// invariants.
    pub fn validate(&self) -> Result<()> {
        self.resolved_experiment()?.validate()?;
        self.modulation.validate()?;
        let f = &self.fit;
        if !(f.fit_start_ps.is_finite()) {
            return Err(Error::Validation("fit.fit_start_ps must be finite".into()));
        }
        if f.max_iterations == 0 {
            return Err(Error::Validation("fit.max_iterations must be >= 1".into()));
        }
        if self.epr.deadtime_ns.is_some_and(|d| !(d >= 0.0)) || !(self.epr.increment_ns > 0.0) {
            return Err(Error::Validation("epr deadtime must be >= 0 and increment > 0".into()));
        }
        if !(self.sensitivity.threshold_snr > 0.0) || self.sensitivity.pump_energy_j.is_some_and(|e| !(e > 0.0)) {
            return Err(Error::Validation("sensitivity threshold and pump energy must be > 0".into()));
        }
        Ok(())
    }

    /// The experiment with any glycerol fraction converted to a viscosity.
    pub fn resolved_experiment(&self) -> Result<ExperimentConfig> {
        let mut e = self.experiment.clone();
        if let Some(frac) = self.sample.glycerol_fraction {
            e.viscosity = match self.sample.glycerol_basis {
                GlycerolBasis::Mass => glycerol_viscosity(frac, e.temperature)?,
                GlycerolBasis::Volume => spinfid::analysis::glycerol_viscosity_by_volume(frac, e.temperature)?,
            };
        }
        Ok(e)
    }

    pub fn fit_start(&self) -> f64 {
        self.fit.fit_start_ps * 1e-12
    }

    /// Sweep viscosities, filling in the default ladder when none are given.
    pub fn sweep_viscosities(&self) -> Result<Vec<f64>> {
        if !self.sweep.viscosities_mpa_s.is_empty() {
            return Ok(self.sweep.viscosities_mpa_s.clone());
        }
        let eta40 = glycerol_viscosity(0.40, 293.15)?;
        Ok((0..5).map(|i| 1.0 + (eta40 - 1.0) * i as f64 / 4.0).collect())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&serde_json::to_value(self).expect("config serialises"))
            .expect("config serialises");
        s.push('\n');
        s
    }
}
