use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::PhysicalConstants;

/// Fitted precession frequency at one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldPoint {
    /// Tesla.
    pub field: f64,
    /// rad/s.
    pub omega: f64,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GEstimate {
    pub g: f64,
    /// None with fewer than two non-zero fields.
    pub sigma: Option<f64>,
    pub n_points: usize,
}

/// Weighted regression of ω on B through the origin; g = slope·ħ/μ_B.
///
/// Weights are 1/σ² when every point carries a positive σ, uniform
/// otherwise. The reported uncertainty is scaled by the residual scatter, so
/// it does not change under a uniform rescaling of the σ values.
pub fn extract_g_from_sweep(points: &[FieldPoint], constants: &PhysicalConstants) -> Result<GEstimate> {
    let used: Vec<&FieldPoint> = points.iter().filter(|p| p.field != 0.0).collect();
    if used.is_empty() {
        return Err(Error::Domain("field sweep has no non-zero field".into()));
    }
    if used.iter().any(|p| !p.field.is_finite() || !p.omega.is_finite()) {
        return Err(Error::Domain("non-finite sweep point".into()));
    }
    let weighted = used.iter().all(|p| matches!(p.sigma, Some(s) if s > 0.0));
    let weight = |p: &FieldPoint| if weighted { p.sigma.map_or(1.0, |s| 1.0 / (s * s)) } else { 1.0 };
    let sbb: f64 = used.iter().map(|p| weight(p) * p.field * p.field).sum();
    let sbw: f64 = used.iter().map(|p| weight(p) * p.field * p.omega).sum();
    let slope = sbw / sbb;
    let to_g = constants.reduced_planck / constants.bohr_magneton;
    let sigma = (used.len() > 1).then(|| {
        let chi2: f64 = used
            .iter()
            .map(|p| weight(p) * (p.omega - slope * p.field).powi(2))
            .sum();
        (chi2 / (used.len() - 1) as f64 / sbb).sqrt() * to_g
    });
    Ok(GEstimate {
        g: slope * to_g,
        sigma,
        n_points: used.len(),
    })
}
