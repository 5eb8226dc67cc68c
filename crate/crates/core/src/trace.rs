use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered (delay, signal) samples. Times are in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    /// Free-form provenance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<String>,
}

impl TraceSeries {
    /// Builds a trace, checking equal lengths, finite values and strictly
    /// increasing times. An empty trace is allowed.
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Validation(format!(
                "times ({}) and values ({}) differ in length",
                times.len(),
                values.len()
            )));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::Validation(format!("non-finite time at sample {i}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite value at sample {i}")));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Validation(format!(
                "times not strictly increasing at sample {}",
                i + 1
            )));
        }
        Ok(Self {
            times,
            values,
            metadata: None,
        })
    }

    pub fn with_metadata(mut self, metadata: impl Into<String>) -> Self {
        self.metadata = Some(metadata.into());
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    /// Samples with `start <= t <= end`.
    pub fn window(&self, start: f64, end: f64) -> TraceSeries {
        let (times, values) = self.iter().filter(|(t, _)| *t >= start && *t <= end).unzip();
        TraceSeries {
            times,
            values,
            metadata: self.metadata.clone(),
        }
    }

    /// Multiplies every value by `factor`.
    pub fn scaled(&self, factor: f64) -> TraceSeries {
        TraceSeries {
            times: self.times.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
            metadata: self.metadata.clone(),
        }
    }
}
