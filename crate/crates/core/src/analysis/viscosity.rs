use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Measured T2* at one solvent viscosity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViscosityPoint {
    /// mPa·s.
    pub viscosity: f64,
    /// Seconds.
    pub t2star: f64,
    pub sigma: Option<f64>,
}

/// T2* = intercept + slope·η.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViscosityLine {
    /// Seconds per mPa·s.
    pub slope: f64,
    /// Seconds.
    pub intercept: f64,
    /// None for an exactly determined line (two points).
    pub sigma_slope: Option<f64>,
    pub sigma_intercept: Option<f64>,
    pub covariance: Option<f64>,
    pub n_points: usize,
}

impl ViscosityLine {
    pub fn predict(&self, viscosity: f64) -> f64 {
        self.intercept + self.slope * viscosity
    }

    /// Viscosity at which the line reaches `t2star` (sensing mode).
    pub fn invert(&self, t2star: f64) -> Result<f64> {
        if self.slope == 0.0 {
            return Err(Error::Domain("flat T2*(η) line cannot be inverted".into()));
        }
        Ok((t2star - self.intercept) / self.slope)
    }
}

/// Weighted least-squares line through (η, T2*). Uncertainties are scaled
/// by the residual scatter.
pub fn viscosity_regression(points: &[ViscosityPoint]) -> Result<ViscosityLine> {
    if points.len() < 2 {
        return Err(Error::Domain("need at least two viscosities".into()));
    }
    if points.iter().any(|p| !p.viscosity.is_finite() || !p.t2star.is_finite()) {
        return Err(Error::Domain("non-finite viscosity point".into()));
    }
    let weighted = points.iter().all(|p| matches!(p.sigma, Some(s) if s > 0.0));
    let w: Vec<f64> = points
        .iter()
        .map(|p| if weighted { 1.0 / p.sigma.unwrap().powi(2) } else { 1.0 })
        .collect();
    let sw: f64 = w.iter().sum();
    let mx = points.iter().zip(&w).map(|(p, w)| w * p.viscosity).sum::<f64>() / sw;
    let my = points.iter().zip(&w).map(|(p, w)| w * p.t2star).sum::<f64>() / sw;
    let sxx: f64 = points.iter().zip(&w).map(|(p, w)| w * (p.viscosity - mx).powi(2)).sum();
    if !(sxx > 0.0) || sxx <= 1e-24 * mx * mx * sw {
        return Err(Error::Domain("all viscosities are identical".into()));
    }
    let sxy: f64 = points
        .iter()
        .zip(&w)
        .map(|(p, w)| w * (p.viscosity - mx) * (p.t2star - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let n = points.len();
    let (sigma_slope, sigma_intercept, covariance) = if n > 2 {
        let chi2: f64 = points
            .iter()
            .zip(&w)
            .map(|(p, w)| w * (p.t2star - intercept - slope * p.viscosity).powi(2))
            .sum();
        let s2 = chi2 / (n - 2) as f64;
        let var_slope = s2 / sxx;
        let var_intercept = s2 * (1.0 / sw + mx * mx / sxx);
        (Some(var_slope.sqrt()), Some(var_intercept.sqrt()), Some(-mx * var_slope))
    } else {
        (None, None, None)
    };
    Ok(ViscosityLine {
        slope,
        intercept,
        sigma_slope,
        sigma_intercept,
        covariance,
        n_points: n,
    })
}

fn check_window(fraction: f64, temperature: f64) -> Result<()> {
    if !(0.0..=0.6).contains(&fraction) {
        return Err(Error::Range(format!("glycerol fraction {fraction} outside [0, 0.6]")));
    }
    if !(278.0..=313.0).contains(&temperature) {
        return Err(Error::Range(format!("temperature {temperature} K outside [278, 313] K")));
    }
    Ok(())
}

/// Dynamic viscosity (mPa·s) of a water–glycerol mixture from the Cheng
/// (2008) correlation, glycerol given as mass fraction.
///
/// Valid for mass fractions 0–0.6 and 278–313 K.
pub fn glycerol_viscosity(glycerol_mass_fraction: f64, temperature: f64) -> Result<f64> {
    check_window(glycerol_mass_fraction, temperature)?;
    let t = temperature - 273.15;
    let cm = glycerol_mass_fraction;
    let water = 1.790 * ((-1230.0 - t) * t / (36100.0 + 360.0 * t)).exp();
    let glycerol = 12100.0 * ((-1233.0 + t) * t / (9900.0 + 70.0 * t)).exp();
    let a = 0.705 - 0.0017 * t;
    let b = (4.9 + 0.036 * t) * a.powf(2.5);
    let alpha = 1.0 - cm + a * b * cm * (1.0 - cm) / (a * cm + b * (1.0 - cm));
    Ok(water.powf(alpha) * glycerol.powf(1.0 - alpha))
}

/// Same correlation with glycerol specified as a volume fraction of the
/// unmixed components (densities after Volk & Kähler).
pub fn glycerol_viscosity_by_volume(glycerol_volume_fraction: f64, temperature: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&glycerol_volume_fraction) {
        return Err(Error::Range(format!(
            "volume fraction {glycerol_volume_fraction} outside [0, 1]"
        )));
    }
    let t = temperature - 273.15;
    let rho_g = 1273.0 - 0.612 * t;
    let rho_w = 1000.0 * (1.0 - ((t - 3.98) / 615.0).abs().powf(1.71));
    let vg = glycerol_volume_fraction;
    let mass_fraction = vg * rho_g / (vg * rho_g + (1.0 - vg) * rho_w);
    glycerol_viscosity(mass_fraction, temperature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn pure_water_and_forty_percent() {
        // handbook: water 1.002 mPa·s, 40 wt% glycerol 3.72 mPa·s at 20 °C
        let w = glycerol_viscosity(0.0, 293.15).unwrap();
        assert!((w / 1.002 - 1.0).abs() < 0.03, "{w}");
        let g40 = glycerol_viscosity(0.40, 293.15).unwrap();
        assert!((g40 / 3.72 - 1.0).abs() < 0.10, "{g40}");
        assert!((g40 - 3.7).abs() < 0.37);
        // 20 wt% at 20 °C: 1.76 mPa·s
        let g20 = glycerol_viscosity(0.20, 293.15).unwrap();
        assert!((g20 / 1.76 - 1.0).abs() < 0.05, "{g20}");
        assert!(w < g20 && g20 < g40);
        // 50 wt% at 30 °C: 4.2 mPa·s
        let g50 = glycerol_viscosity(0.50, 303.15).unwrap();
        assert!((g50 / 4.21 - 1.0).abs() < 0.08, "{g50}");
    }

    #[test]
    fn outside_window() {
        assert!(matches!(glycerol_viscosity(0.7, 293.15), Err(Error::Range(_))));
        assert!(matches!(glycerol_viscosity(0.2, 350.0), Err(Error::Range(_))));
        assert!(glycerol_viscosity(-0.1, 293.15).is_err());
    }

    #[test]
    fn volume_mode_is_more_viscous() {
        let by_mass = glycerol_viscosity(0.40, 293.15).unwrap();
        let by_volume = glycerol_viscosity_by_volume(0.40, 293.15).unwrap();
        assert!(by_volume > by_mass);
        assert_eq!(glycerol_viscosity_by_volume(0.0, 293.15).unwrap(), glycerol_viscosity(0.0, 293.15).unwrap());
    }

    #[test]
    fn two_point_line_and_inversion() {
        let eta40 = glycerol_viscosity(0.40, 293.15).unwrap();
        let pts = [
            ViscosityPoint { viscosity: 1.0, t2star: 8.60e-12, sigma: None },
            ViscosityPoint { viscosity: eta40, t2star: 21.9e-12, sigma: None },
        ];
        let line = viscosity_regression(&pts).unwrap();
        assert!((line.predict(1.0) - 8.60e-12).abs() < 1e-24);
        assert!((line.predict(eta40) - 21.9e-12).abs() < 1e-23);
        assert!((line.invert(8.60e-12).unwrap() - 1.0).abs() < 1e-12);
        assert!(line.sigma_slope.is_none());
    }

    #[test]
    fn flat_and_degenerate() {
        let pts: Vec<_> = [1.0, 2.0, 3.0]
            .iter()
            .map(|&v| ViscosityPoint { viscosity: v, t2star: 9e-12, sigma: None })
            .collect();
        let line = viscosity_regression(&pts).unwrap();
        assert_eq!(line.slope, 0.0);
        assert!(line.invert(9e-12).is_err());
        let same: Vec<_> = [2.0, 2.0]
            .iter()
            .map(|&v| ViscosityPoint { viscosity: v, t2star: 9e-12, sigma: None })
            .collect();
        assert!(viscosity_regression(&same).is_err());
    }

    #[test]
    fn noisy_slope_within_fifteen_percent() {
        let (a, b) = (3.64e-12, 4.96e-12);
        let etas = [1.0, 1.67, 2.34, 3.0, 3.68];
        let mut hits = 0;
        for seed in 0..200 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let noise = Normal::new(0.0, 0.03).unwrap();
            let pts: Vec<_> = etas
                .iter()
                .map(|&eta| {
                    let t = (a + b * eta) * (1.0 + noise.sample(&mut rng));
                    ViscosityPoint { viscosity: eta, t2star: t, sigma: Some(0.03 * t) }
                })
                .collect();
            let line = viscosity_regression(&pts).unwrap();
            if (line.slope / b - 1.0).abs() < 0.15 {
                hits += 1;
            }
        }
        assert!(hits >= 190, "{hits}/200");
    }

    #[test]
    fn predict_invert_round_trip() {
        let pts: Vec<_> = [1.0, 2.0, 4.0]
            .iter()
            .map(|&v| ViscosityPoint { viscosity: v, t2star: 3e-12 + 5e-12 * v, sigma: None })
            .collect();
        let line = viscosity_regression(&pts).unwrap();
        for eta in [0.5, 1.3, 2.9, 7.0] {
            assert!((line.invert(line.predict(eta)).unwrap() - eta).abs() < 1e-9);
        }
    }
}
