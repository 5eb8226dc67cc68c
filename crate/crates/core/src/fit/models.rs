use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// The fit model library.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    /// η₀·exp(−t/T2*)·cos(ωt + φ)
    DampedCosine,
    /// A·exp(−t/τ)
    Exponential,
    /// I∞ − A·exp(−t/T1)
    InversionRecovery,
    /// I₀·exp(−(2τ/Tm)^β)
    HahnEcho,
}

impl ModelId {
    pub const ALL: [ModelId; 4] = [
        ModelId::DampedCosine,
        ModelId::Exponential,
        ModelId::InversionRecovery,
        ModelId::HahnEcho,
    ];

    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            ModelId::DampedCosine => &["eta0", "t2star", "omega", "phi"],
            ModelId::Exponential => &["amplitude", "tau"],
            ModelId::InversionRecovery => &["i_inf", "amplitude", "t1"],
            ModelId::HahnEcho => &["i0", "tm", "stretch"],
        }
    }

    pub fn parameter_units(self) -> &'static [&'static str] {
        match self {
            ModelId::DampedCosine => &["signal", "s", "rad/s", "rad"],
            ModelId::Exponential => &["signal", "s"],
            ModelId::InversionRecovery => &["signal", "signal", "s"],
            ModelId::HahnEcho => &["signal", "s", "1"],
        }
    }

    pub fn n_params(self) -> usize {
        self.parameter_names().len()
    }

    /// Indices of parameters that must stay strictly positive.
    pub(crate) fn positive_params(self) -> &'static [usize] {
        match self {
            ModelId::DampedCosine => &[1],
            ModelId::Exponential => &[1],
            ModelId::InversionRecovery => &[2],
            ModelId::HahnEcho => &[1, 2],
        }
    }

    /// Index of the parameter that sets the size of the signal.
    pub(crate) fn amplitude_param(self) -> usize {
        match self {
            ModelId::InversionRecovery => 1,
            _ => 0,
        }
    }

    pub fn check(self, p: &[f64]) -> Result<()> {
        ensure(p.len() == self.n_params(), || {
            format!("{:?} takes {} parameters, got {}", self, self.n_params(), p.len())
        })?;
        ensure(p.iter().all(|v| v.is_finite()), || "parameters must be finite".into())?;
        for &i in self.positive_params() {
            ensure(p[i] > 0.0, || {
                format!("{} must be > 0, got {}", self.parameter_names()[i], p[i])
            })?;
        }
        Ok(())
    }

    /// Model value at `t`. Parameters are assumed valid.
    #[inline]
    pub fn eval(self, t: f64, p: &[f64]) -> f64 {
        match self {
            ModelId::DampedCosine => p[0] * (-t / p[1]).exp() * (p[2] * t + p[3]).cos(),
            ModelId::Exponential => p[0] * (-t / p[1]).exp(),
            ModelId::InversionRecovery => p[0] - p[1] * (-t / p[2]).exp(),
            ModelId::HahnEcho => p[0] * (-(t / p[1]).powf(p[2])).exp(),
        }
    }

    /// Analytic partial derivatives with respect to each parameter.
    #[inline]
    pub fn gradient(self, t: f64, p: &[f64], out: &mut [f64]) {
        match self {
            ModelId::DampedCosine => {
                let e = (-t / p[1]).exp();
                let (s, c) = (p[2] * t + p[3]).sin_cos();
                out[0] = e * c;
                out[1] = p[0] * e * c * t / (p[1] * p[1]);
                out[2] = -p[0] * e * s * t;
                out[3] = -p[0] * e * s;
            }
            ModelId::Exponential => {
                let e = (-t / p[1]).exp();
                out[0] = e;
                out[1] = p[0] * e * t / (p[1] * p[1]);
            }
            ModelId::InversionRecovery => {
                let e = (-t / p[2]).exp();
                out[0] = 1.0;
                out[1] = -e;
                out[2] = -p[1] * e * t / (p[2] * p[2]);
            }
            ModelId::HahnEcho => {
                let x = t / p[1];
                let xb = x.powf(p[2]);
                let e = (-xb).exp();
                out[0] = e;
                out[1] = p[0] * e * p[2] * xb / p[1];
                out[2] = if x > 0.0 { -p[0] * e * xb * x.ln() } else { 0.0 };
            }
        }
    }
}

/// η₀·exp(−t/T2*)·cos(ωt + φ).
pub fn model_damped_cosine(t: f64, eta0: f64, t2star: f64, omega: f64, phi: f64) -> Result<f64> {
    let p = [eta0, t2star, omega, phi];
    ModelId::DampedCosine.check(&p)?;
    Ok(ModelId::DampedCosine.eval(t, &p))
}

/// A·exp(−t/τ).
pub fn model_exponential(t: f64, amplitude: f64, tau: f64) -> Result<f64> {
    let p = [amplitude, tau];
    ModelId::Exponential.check(&p)?;
    Ok(ModelId::Exponential.eval(t, &p))
}

/// I∞ − A·exp(−t/T1); full inversion is A = 2·I∞.
pub fn model_inversion_recovery(t: f64, i_inf: f64, amplitude: f64, t1: f64) -> Result<f64> {
    let p = [i_inf, amplitude, t1];
    ModelId::InversionRecovery.check(&p)?;
    Ok(ModelId::InversionRecovery.eval(t, &p))
}

/// I₀·exp(−(2τ/Tm)^β) evaluated at the echo delay `two_tau`.
pub fn model_hahn_echo(two_tau: f64, i0: f64, tm: f64, stretch: f64) -> Result<f64> {
    let p = [i0, tm, stretch];
    ModelId::HahnEcho.check(&p)?;
    ensure(two_tau >= 0.0, || format!("echo delay must be >= 0, got {two_tau}"))?;
    Ok(ModelId::HahnEcho.eval(two_tau, &p))
}

#[cfg(test)]
mod tests {
    use super::*;

    const E_INV: f64 = 0.367_879_441_171_442_3;

    #[test]
    fn damped_cosine_values() {
        assert_eq!(model_damped_cosine(0.0, 2.5, 8.6e-12, 7e11, 0.0).unwrap(), 2.5);
        let t = 3e-12;
        let v = model_damped_cosine(t, 1.3, 8.6e-12, 0.0, 0.0).unwrap();
        assert!((v - 1.3 * (-t / 8.6e-12f64).exp()).abs() < 1e-15);
        let v = model_damped_cosine(8.6e-12, 1.0, 8.6e-12, 0.0, 0.0).unwrap();
        assert!((v - E_INV).abs() < 1e-15);
        assert!(model_damped_cosine(1.0, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(model_damped_cosine(1.0, 1.0, -1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn inversion_recovery_values() {
        assert_eq!(model_inversion_recovery(0.0, 1.0, 2.0, 1e-6).unwrap(), -1.0);
        assert!((model_inversion_recovery(1.0, 1.0, 2.0, 1e-6).unwrap() - 1.0).abs() < 1e-15);
        let half = model_inversion_recovery(0.0, 2.0, 3.0, 1e-6).unwrap();
        assert_eq!(half / 2.0, -0.5);
        assert!(model_inversion_recovery(0.0, 1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn hahn_echo_values() {
        assert!((model_hahn_echo(1e-6, 1.0, 1e-6, 1.0).unwrap() - E_INV).abs() < 1e-15);
        assert_eq!(model_hahn_echo(0.0, 0.8, 1e-6, 1.0).unwrap(), 0.8);
        assert!((model_hahn_echo(1e-6, 1.0, 1e-6, 2.0).unwrap() - E_INV).abs() < 1e-15);
        let s1 = model_hahn_echo(0.5e-6, 1.0, 1e-6, 1.0).unwrap();
        let s2 = model_hahn_echo(0.5e-6, 1.0, 1e-6, 2.0).unwrap();
        assert!((s1 - (-0.5f64).exp()).abs() < 1e-15);
        assert!((s2 - (-0.25f64).exp()).abs() < 1e-15);
        assert!(model_hahn_echo(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(model_hahn_echo(1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn exponential_values() {
        let v = model_exponential(17e-12, 1.0, 17e-12).unwrap();
        assert!((v - E_INV).abs() < 1e-15);
        assert!(model_exponential(0.0, 1.0, 0.0).is_err());
    }
}
