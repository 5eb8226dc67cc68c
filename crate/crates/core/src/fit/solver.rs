use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::models::ModelId;
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::trace::TraceSeries;

const MAX_ITERATIONS: usize = 500;
const COST_TOLERANCE: f64 = 1e-10;
const GRADIENT_TOLERANCE: f64 = 1e-10;
const CONSECUTIVE_REQUIRED: usize = 3;
const LAMBDA_START: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e16;

/// Closed interval on one parameter. Infinite ends mean unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub const UNBOUNDED: Bounds = Bounds {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(Error::Domain(format!("invalid bounds [{lower}, {upper}]")));
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }
}

/// A model together with which parameters are held fixed and the box
/// constraints on the free ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: ModelId,
    pub fixed: Vec<bool>,
    pub bounds: Vec<Bounds>,
}

impl ModelSpec {
    /// All parameters free; ω ≥ 0 for the damped cosine; the Hahn-echo
    /// stretch exponent is fixed.
    pub fn new(model: ModelId) -> Self {
        let n = model.n_params();
        let mut bounds = vec![Bounds::UNBOUNDED; n];
        for &i in model.positive_params() {
            bounds[i].lower = 0.0;
        }
        let mut fixed = vec![false; n];
        match model {
            ModelId::DampedCosine => bounds[2].lower = 0.0,
            ModelId::HahnEcho => fixed[2] = true,
            _ => {}
        }
        Self { model, fixed, bounds }
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.model
            .parameter_names()
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| Error::Domain(format!("{:?} has no parameter '{name}'", self.model)))
    }

    pub fn fix(mut self, name: &str) -> Result<Self> {
        let i = self.index(name)?;
        self.fixed[i] = true;
        Ok(self)
    }

    pub fn free(mut self, name: &str) -> Result<Self> {
        let i = self.index(name)?;
        self.fixed[i] = false;
        Ok(self)
    }

    pub fn bound(mut self, name: &str, bounds: Bounds) -> Result<Self> {
        let i = self.index(name)?;
        self.bounds[i] = bounds;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.model.n_params();
        if self.fixed.len() != n || self.bounds.len() != n {
            return Err(Error::Domain("mask/bounds length does not match model".into()));
        }
        for b in &self.bounds {
            Bounds::new(b.lower, b.upper)?;
        }
        Ok(())
    }

    fn free_indices(&self) -> Vec<usize> {
        (0..self.model.n_params()).filter(|&i| !self.fixed[i]).collect()
    }

    /// Projects onto the bounds; strictly positive parameters that would
    /// reach zero are shrunk towards it instead.
    fn project(&self, previous: &[f64], p: &mut [f64]) {
        for i in 0..p.len() {
            let b = self.bounds[i];
            p[i] = p[i].clamp(b.lower, b.upper);
            if self.model.positive_params().contains(&i) && p[i] <= 0.0 {
                p[i] = previous[i] * 0.1;
            }
        }
    }
}

/// Per-fit knobs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitOptions {
    /// Per-sample standard deviations for weighted fitting, aligned with the
    /// full trace.
    pub sigmas: Option<Vec<f64>>,
    /// Number of extra seeded random restarts (init perturbed by up to ±20%)
    /// and the seed.
    pub multi_start: Option<(usize, u64)>,
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedParameter {
    pub name: String,
    pub unit: String,
    pub value: f64,
    /// 1σ; absent when the covariance is degenerate.
    pub sigma: Option<f64>,
    pub fixed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model_id: ModelId,
    pub parameters: Vec<FittedParameter>,
    /// Over free parameters, in the order they appear in `parameters`.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub covariance_degenerate: bool,
    /// sqrt(Σ residual²), signal units.
    pub residual_norm: f64,
    pub n_points: usize,
    pub n_iterations: usize,
    pub converged: bool,
    /// ∞-norm of the gradient of the normalised cost at the solution.
    pub gradient_norm: f64,
    /// Seconds.
    pub fit_window: (f64, f64),
    /// Normalised cost at the start and after each accepted step of the
    /// winning run.
    #[serde(skip)]
    pub cost_history: Vec<f64>,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn sigma(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).and_then(|p| p.sigma)
    }

    pub fn values(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.value).collect()
    }

    /// False when any free, strictly positive parameter has σ at least as
    /// large as its value, when the signal amplitude lies within 3σ of zero,
    /// or when σ is unavailable.
    pub fn informative(&self) -> bool {
        let amp = &self.parameters[self.model_id.amplitude_param()];
        let amplitude_resolved = amp.fixed || matches!(amp.sigma, Some(s) if 3.0 * s < amp.value.abs());
        amplitude_resolved
            && self.model_id.positive_params().iter().all(|&i| {
                let p = &self.parameters[i];
                p.fixed || matches!(p.sigma, Some(s) if s < p.value.abs())
            })
    }
}

struct Problem<'a> {
    spec: &'a ModelSpec,
    t: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    free: Vec<usize>,
    scale: Vec<f64>,
    y_scale: f64,
}

impl Problem<'_> {
    fn residuals(&self, p: &[f64]) -> Vec<f64> {
        self.t
            .iter()
            .zip(&self.y)
            .zip(&self.w)
            .map(|((&t, &y), &w)| w * (self.spec.model.eval(t, p) - y) / self.y_scale)
            .collect()
    }

    fn cost(&self, p: &[f64]) -> f64 {
        0.5 * self.residuals(p).iter().map(|r| r * r).sum::<f64>()
    }

    /// Jacobian of the normalised residuals with respect to the normalised
    /// free parameters.
    fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        let n_all = self.spec.model.n_params();
        let mut grad = vec![0.0; n_all];
        let mut j = DMatrix::zeros(self.t.len(), self.free.len());
        for (row, (&t, &w)) in self.t.iter().zip(&self.w).enumerate() {
            self.spec.model.gradient(t, p, &mut grad);
            for (col, &k) in self.free.iter().enumerate() {
                j[(row, col)] = w * grad[k] * self.scale[col] / self.y_scale;
            }
        }
        j
    }
}

struct Outcome {
    params: Vec<f64>,
    cost: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

fn levenberg_marquardt(problem: &Problem, init: &[f64], max_iter: usize) -> Result<Outcome> {
    let names = problem.spec.model.parameter_names();
    let mut p = init.to_vec();
    let mut cost = problem.cost(&p);
    let mut lambda = LAMBDA_START;
    let mut consecutive = 0;
    let mut converged = false;
    let mut iterations = 0;
    let mut history = vec![cost];

    while iterations < max_iter {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        let j = problem.jacobian(&p);
        let r = DVector::from_vec(problem.residuals(&p));
        let gradient = j.tr_mul(&r);
        let normal = j.tr_mul(&j);
        let diag: Vec<f64> = (0..normal.nrows()).map(|i| normal[(i, i)]).collect();
        if let Some(col) = diag.iter().position(|d| !(*d > 0.0)) {
            return Err(Error::DegenerateFit(format!(
                "parameter '{}' has no influence on the model at {:?}",
                names[problem.free[col]], p
            )));
        }
        let grad_small = gradient.amax() < GRADIENT_TOLERANCE;

        let mut accepted = None;
        while lambda <= LAMBDA_MAX {
            let mut a = normal.clone();
            for (i, d) in diag.iter().enumerate() {
                a[(i, i)] += lambda * d;
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&gradient));
            let mut trial = p.clone();
            for (col, &k) in problem.free.iter().enumerate() {
                trial[k] += step[col] * problem.scale[col];
            }
            problem.spec.project(&p, &mut trial);
            let trial_cost = problem.cost(&trial);
            if trial_cost.is_finite() && trial_cost < cost {
                accepted = Some((trial, trial_cost));
                lambda = (lambda / 10.0).max(1e-15);
                break;
            }
            lambda *= 10.0;
        }

        let Some((trial, trial_cost)) = accepted else {
            // no step lowers the cost: a numerical minimum
            converged = grad_small || predicted_decrease(&normal, &gradient) <= COST_TOLERANCE * cost;
            break;
        };
        let relative_decrease = (cost - trial_cost) / cost;
        p = trial;
        cost = trial_cost;
        history.push(cost);
        if relative_decrease < COST_TOLERANCE || grad_small {
            consecutive += 1;
            if consecutive >= CONSECUTIVE_REQUIRED {
                converged = true;
                break;
            }
        } else {
            consecutive = 0;
        }
    }
    Ok(Outcome {
        params: p,
        cost,
        iterations,
        converged,
        history,
    })
}

/// Damped least-squares fit of `spec` to the samples of `trace` inside
/// `window` (inclusive, seconds).
///
/// Non-convergence within the iteration budget is reported through
/// `FitResult::converged`; a parameter with no influence on the model is a
/// [`Error::DegenerateFit`].
pub fn nonlinear_least_squares(
    spec: &ModelSpec,
    trace: &TraceSeries,
    init: &[f64],
    window: (f64, f64),
    options: &FitOptions,
) -> Result<FitResult> {
    spec.validate()?;
    spec.model.check(init)?;
    for (i, (&v, b)) in init.iter().zip(&spec.bounds).enumerate() {
        if !b.contains(v) {
            return Err(Error::Domain(format!(
                "initial {} = {v} lies outside [{}, {}]",
                spec.model.parameter_names()[i],
                b.lower,
                b.upper
            )));
        }
    }
    if let Some(s) = &options.sigmas {
        if s.len() != trace.len() || s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Domain("sigmas must be positive and match the trace length".into()));
        }
    }

    let mut t = Vec::new();
    let mut y = Vec::new();
    let mut w = Vec::new();
    for (i, (ti, yi)) in trace.iter().enumerate() {
        if ti >= window.0 && ti <= window.1 {
            t.push(ti);
            y.push(yi);
            w.push(options.sigmas.as_ref().map_or(1.0, |s| 1.0 / s[i]));
        }
    }
    let free: Vec<usize> = spec.free_indices();
    if t.len() < free.len() || t.is_empty() {
        return Err(Error::Domain(format!(
            "{} samples in window for {} free parameters",
            t.len(),
            free.len()
        )));
    }
    let y_max = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let problem = Problem {
        spec,
        scale: free.iter().map(|&k| if init[k] != 0.0 { init[k].abs() } else { 1.0 }).collect(),
        y_scale: if y_max > 0.0 { y_max } else { 1.0 },
        t,
        y,
        w,
        free,
    };
    let max_iter = options.max_iterations.unwrap_or(MAX_ITERATIONS);

    let mut best = if problem.free.is_empty() {
        Outcome {
            params: init.to_vec(),
            cost: problem.cost(init),
            iterations: 0,
            converged: true,
            history: vec![problem.cost(init)],
        }
    } else {
        levenberg_marquardt(&problem, init, max_iter)?
    };
    if let Some((starts, seed)) = options.multi_start {
        let mut rng = substream(seed, 0);
        for _ in 0..starts {
            let mut start = init.to_vec();
            for &k in &problem.free {
                start[k] *= 1.0 + rng.random_range(-0.2..0.2);
            }
            spec.project(init, &mut start);
            if let Ok(o) = levenberg_marquardt(&problem, &start, max_iter) {
                if o.cost < best.cost {
                    best = o;
                }
            }
        }
    }

    finish(&problem, best, window)
}

fn finish(problem: &Problem, outcome: Outcome, window: (f64, f64)) -> Result<FitResult> {
    let model = problem.spec.model;
    let mut params = outcome.params;
    if model == ModelId::DampedCosine {
        normalise_phase(&mut params, &problem.spec.fixed);
    }
    let n = problem.t.len();
    let k = problem.free.len();
    let sum_sq = 2.0 * problem.cost(&params) * problem.y_scale * problem.y_scale;
    let residual_norm = if problem.w.iter().all(|&w| w == 1.0) {
        sum_sq.sqrt()
    } else {
        problem
            .t
            .iter()
            .zip(&problem.y)
            .map(|(&t, &y)| (model.eval(t, &params) - y).powi(2))
            .sum::<f64>()
            .sqrt()
    };

    let (covariance, gradient_norm) = if k == 0 {
        (Some(Vec::new()), 0.0)
    } else {
        let j = problem.jacobian(&params);
        let r = DVector::from_vec(problem.residuals(&params));
        let gradient_norm = j.tr_mul(&r).amax();
        let normal = j.tr_mul(&j);
        let cov = if n > k {
            invert_normal(&normal).map(|inv| {
                let variance = sum_sq / (n - k) as f64;
                (0..k)
                    .map(|a| {
                        (0..k)
                            .map(|b| {
                                inv[(a, b)] * variance * problem.scale[a] * problem.scale[b]
                                    / (problem.y_scale * problem.y_scale)
                            })
                            .collect()
                    })
                    .collect::<Vec<Vec<f64>>>()
            })
        } else {
            None
        };
        (cov, gradient_norm)
    };

    let names = model.parameter_names();
    let units = model.parameter_units();
    let parameters = (0..model.n_params())
        .map(|i| {
            let fixed = problem.spec.fixed[i];
            let sigma = if fixed {
                Some(0.0)
            } else {
                let col = problem.free.iter().position(|&f| f == i).expect("free index");
                covariance.as_ref().map(|c| c[col][col].max(0.0).sqrt())
            };
            FittedParameter {
                name: names[i].to_string(),
                unit: units[i].to_string(),
                value: params[i],
                sigma,
                fixed,
            }
        })
        .collect();

    Ok(FitResult {
        model_id: model,
        parameters,
        covariance_degenerate: covariance.is_none(),
        covariance,
        residual_norm,
        n_points: n,
        n_iterations: outcome.iterations,
        converged: outcome.converged,
        gradient_norm,
        fit_window: window,
        cost_history: outcome.history,
    })
}

/// Cost reduction ½·gᵀ(JᵀJ)⁻¹g promised by a full Gauss–Newton step.
fn predicted_decrease(normal: &DMatrix<f64>, gradient: &DVector<f64>) -> f64 {
    match normal.clone().cholesky() {
        Some(chol) => 0.5 * gradient.dot(&chol.solve(gradient)),
        None => f64::INFINITY,
    }
}

/// Symmetric inverse via Cholesky; None when not positive definite.
fn invert_normal(normal: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let max_diag = (0..normal.nrows()).map(|i| normal[(i, i)]).fold(0.0, f64::max);
    let min_eig = normal.clone().symmetric_eigenvalues().min();
    if !(min_eig > max_diag * 1e-14) {
        return None;
    }
    let inv = normal.clone().cholesky()?.inverse();
    Some((&inv + inv.transpose()) * 0.5)
}

/// Folds η₀ < 0 into φ and wraps φ into (−π, π].
fn normalise_phase(p: &mut [f64], fixed: &[bool]) {
    use std::f64::consts::PI;
    if fixed[3] {
        return;
    }
    if p[0] < 0.0 && !fixed[0] {
        p[0] = -p[0];
        p[3] += PI;
    }
    let mut phi = p[3].rem_euclid(2.0 * PI);
    if phi > PI {
        phi -= 2.0 * PI;
    }
    p[3] = phi;
}
