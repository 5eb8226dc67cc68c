//! Command-line front end: configuration loading, subcommand dispatch,
//! reports and figures.
//!
//! Exit codes: 0 on success, 1 on any validation, parse or io error, 2 when
//! a fit did not converge (its report is still written).

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
mod plots;
pub mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use spinfid::analysis::{
    deadtime_truncate, detection_limit, extrapolate_t1, field_sweep, measure_snr, viscosity_sweep, Extrapolation,
    ExtrapolationMode, PumpScaling, RelaxationSeries, SweepDerived, SweepResult,
};
use spinfid::dynamics::{effective_t2star, simulate_trace, spin_amplitude};
use spinfid::fit::{
    extract_t2star_with, initial_guess_damped_cosine, nonlinear_least_squares, FitOptions, FitResult, ModelId,
    ModelSpec,
};
use spinfid::io::{load_shots, load_trace, save_shots, save_trace};
use spinfid::physics::{larmor_frequency, PhysicalConstants};
use spinfid::signal_chain::{demodulate, synthesize_shot_record};
use spinfid::{Error, Result, TraceSeries};

use config::{EprKind, RunConfig};
use report::{InputFile, ResultReport, Status};

#[derive(Debug, Parser)]
#[command(name = "spinfid", version, about = "Simulate and fit ultrafast optically detected spin free induction decay")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for both the ensemble and the noise streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Write SVG figures (the default unless the config disables them).
    #[arg(long, global = true, overrides_with = "no_svg")]
    svg: bool,
    /// Skip SVG figures.
    #[arg(long, global = true, overrides_with = "svg")]
    no_svg: bool,
    /// Start of the fit window, picoseconds.
    #[arg(long, global = true)]
    fit_start: Option<f64>,
    /// Magnetic field, tesla.
    #[arg(long, global = true, allow_negative_numbers = true)]
    field: Option<f64>,
    /// Solvent viscosity, mPa·s.
    #[arg(long, global = true, conflicts_with = "glycerol_fraction")]
    viscosity: Option<f64>,
    /// Glycerol fraction of a water–glycerol solvent (mass basis unless the
    /// config selects volume).
    #[arg(long, global = true)]
    glycerol_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FitModel {
    DampedCosine,
    Exponential,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EprKindArg {
    InversionRecovery,
    HahnEcho,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a Faraday-ellipticity trace from the configuration.
    Simulate {
        /// Also write the raw left/right shot record.
        #[arg(long)]
        raw_shots: bool,
    },
    /// Fit a trace file with the damped cosine (or a plain exponential).
    Fit {
        trace: PathBuf,
        #[arg(long, value_enum, default_value = "damped-cosine")]
        model: FitModel,
    },
    /// Simulate and fit at each sweep field, then extract g.
    SweepField,
    /// Simulate and fit at each sweep viscosity, then regress T2* on viscosity.
    SweepViscosity,
    /// Fit a pulse-EPR inversion-recovery or Hahn-echo trace.
    EprFit {
        trace: PathBuf,
        #[arg(long, value_enum)]
        kind: Option<EprKindArg>,
        /// Spectrometer deadtime, nanoseconds.
        #[arg(long)]
        deadtime_ns: Option<f64>,
    },
    /// Extrapolate a relaxation series (JSON) to a target temperature.
    Extrapolate { series: PathBuf },
    /// Measure the SNR of the configured experiment and derive a detection limit.
    Sensitivity,
    /// Demodulate a raw shot file into a trace.
    Demod { shots: PathBuf },
}

impl Command {
    fn stem(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Fit { .. } => "fit",
            Command::SweepField => "sweep-field",
            Command::SweepViscosity => "sweep-viscosity",
            Command::EprFit { .. } => "epr-fit",
            Command::Extrapolate { .. } => "extrapolate",
            Command::Sensitivity => "sensitivity",
            Command::Demod { .. } => "demod",
        }
    }
}

/// Outcome of a subcommand that completed and wrote its report.
enum Outcome {
    Ok,
    NotConverged,
}

impl Outcome {
    fn from_fits<'a>(fits: impl IntoIterator<Item = &'a FitResult>) -> Self {
        if fits.into_iter().all(|f| f.converged) {
            Outcome::Ok
        } else {
            Outcome::NotConverged
        }
    }

    fn status(&self) -> Status {
        match self {
            Outcome::Ok => Status::Ok,
            Outcome::NotConverged => Status::NotConverged,
        }
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code. Diagnostics go to standard error.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("ERROR[validation]: {first}");
            eprint!("{}", e.render());
            return 1;
        }
    };
    match run(cli) {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::NotConverged) => {
            eprintln!("ERROR[fit]: fit did not converge; report written");
            2
        }
        Err(e) => {
            eprintln!("ERROR[{}]: {e}", e.category());
            1
        }
    }
}

fn resolve_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut c = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = g.seed {
        c.experiment.rng_seed = seed;
        c.experiment.noise.rng_seed = seed;
    }
    if let Some(fs) = g.fit_start {
        c.fit.fit_start_ps = fs;
    }
    if let Some(b) = g.field {
        c.experiment.field = b;
    }
    if let Some(eta) = g.viscosity {
        c.experiment.viscosity = eta;
        c.sample.glycerol_fraction = None;
    }
    if let Some(f) = g.glycerol_fraction {
        c.sample.glycerol_fraction = Some(f);
    }
    if g.svg {
        c.plot.svg = true;
    }
    if g.no_svg {
        c.plot.svg = false;
    }
    c.validate()?;
    c.experiment = c.resolved_experiment()?;
    Ok(c)
}

struct Ctx {
    config: RunConfig,
    out: PathBuf,
    stem: &'static str,
}

impl Ctx {
    fn fit_options(&self) -> FitOptions {
        FitOptions {
            sigmas: None,
            multi_start: (self.config.fit.multi_start > 0)
                .then_some((self.config.fit.multi_start, self.config.experiment.rng_seed)),
            max_iterations: Some(self.config.fit.max_iterations),
        }
    }

    fn report(&self, inputs: Vec<InputFile>, outcome: &Outcome, payload: impl Serialize) -> Result<()> {
        ResultReport::new(self.stem, &self.config, inputs, outcome.status(), payload)
            .write(&self.out.join(format!("{}.json", self.stem)))
    }

    fn plot(&self, name: &str, panel: spinfid::io::Panel) -> Result<()> {
        if self.config.plot.svg {
            plots::write_panel(&self.out, self.stem, name, panel)?;
        }
        Ok(())
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    let config = resolve_config(&cli.global)?;
    std::fs::create_dir_all(&cli.global.out)
        .map_err(|e| Error::Io(format!("{}: {e}", cli.global.out.display())))?;
    let ctx = Ctx { config, out: cli.global.out.clone(), stem: cli.command.stem() };
    match cli.command {
        Command::Simulate { raw_shots } => simulate(&ctx, raw_shots),
        Command::Fit { trace, model } => fit(&ctx, &trace, model),
        Command::SweepField => sweep_field(&ctx),
        Command::SweepViscosity => sweep_viscosity(&ctx),
        Command::EprFit { trace, kind, deadtime_ns } => {
            let kind = match kind {
                Some(EprKindArg::InversionRecovery) => EprKind::InversionRecovery,
                Some(EprKindArg::HahnEcho) => EprKind::HahnEcho,
                None => ctx.config.epr.kind,
            };
            epr_fit(&ctx, &trace, kind, deadtime_ns.or(ctx.config.epr.deadtime_ns))
        }
        Command::Extrapolate { series } => extrapolate(&ctx, &series),
        Command::Sensitivity => sensitivity(&ctx),
        Command::Demod { shots } => demod(&ctx, &shots),
    }
}

fn read_trace(path: &Path) -> Result<(InputFile, TraceSeries)> {
    let (input, _) = InputFile::read(path)?;
    Ok((input, load_trace(path)?))
}

fn simulate(ctx: &Ctx, raw_shots: bool) -> Result<Outcome> {
    let e = &ctx.config.experiment;
    let constants = PhysicalConstants::CODATA_2018;
    let trace = simulate_trace(e)?;
    save_trace(&trace, &ctx.out.join("trace.csv"))?;
    let shots_file = if raw_shots {
        let record = synthesize_shot_record(e, &ctx.config.modulation)?;
        save_shots(&record, &ctx.out.join("shots.csv"))?;
        Some("shots.csv")
    } else {
        None
    };
    let payload = json!({
        "trace_file": "trace.csv",
        "shots_file": shots_file,
        "n_samples": trace.len(),
        "spin_amplitude": spin_amplitude(e),
        "larmor_omega_rad_per_s": larmor_frequency(e.g.iso, e.field, &constants)?,
        "expected_t2star_s": effective_t2star(&e.decoherence, e.viscosity, e.field, &e.g, &constants)?,
    });
    ctx.report(vec![], &Outcome::Ok, payload)?;
    ctx.plot("trace", plots::trace_panel("Simulated trace", &trace, None, plots::PICOSECONDS))?;
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct FitPayload<'a> {
    field_t: f64,
    fit: &'a FitResult,
    informative: bool,
}

fn fit(ctx: &Ctx, path: &Path, model: FitModel) -> Result<Outcome> {
    let (input, trace) = read_trace(path)?;
    let field = ctx.config.experiment.field;
    let fit_start = ctx.config.fit_start();
    let result = match model {
        FitModel::DampedCosine => extract_t2star_with(&trace, field, fit_start, &ctx.fit_options())?,
        FitModel::Exponential => {
            let end = trace.times().last().copied().unwrap_or(fit_start);
            let g = initial_guess_damped_cosine(&trace, (fit_start, end))?;
            let init = [g.params[0] * g.params[3].cos(), g.params[1]];
            nonlinear_least_squares(&ModelSpec::new(ModelId::Exponential), &trace, &init, (fit_start, end), &ctx.fit_options())?
        }
    };
    let outcome = Outcome::from_fits([&result]);
    ctx.report(
        vec![input],
        &outcome,
        FitPayload { field_t: field, fit: &result, informative: result.informative() },
    )?;
    ctx.plot("trace", plots::trace_panel("Trace and fit", &trace, Some(&result), plots::PICOSECONDS))?;
    Ok(outcome)
}

fn sweep_plots(ctx: &Ctx, result: &SweepResult, unit: &str) -> Result<()> {
    let labels: Vec<String> = result.values.iter().map(|v| format!("{v:.3} {unit}")).collect();
    ctx.plot("traces", plots::overlay_panel("Sweep traces", &result.traces, &labels))
}

fn sweep_field(ctx: &Ctx) -> Result<Outcome> {
    let fields = &ctx.config.sweep.fields_t;
    let result = field_sweep(&ctx.config.experiment, fields, ctx.config.fit_start())?;
    let outcome = Outcome::from_fits(&result.fits);
    ctx.report(vec![], &outcome, &result)?;
    if let SweepDerived::G(g) = &result.derived {
        sweep_plots(ctx, &result, "T")?;
        let constants = PhysicalConstants::CODATA_2018;
        let omega: Vec<f64> = result.fits.iter().map(|f| f.value("omega").unwrap_or(0.0) * 1e-9).collect();
        let b_max = fields.iter().cloned().fold(0.0, f64::max);
        let line_b = vec![0.0, b_max];
        let line_w = line_b
            .iter()
            .map(|&b| larmor_frequency(g.g, b, &constants).map(|w| w * 1e-9))
            .collect::<Result<Vec<_>>>()?;
        ctx.plot(
            "omega",
            plots::xy_panel(
                &format!("Larmor frequency, g = {:.4}", g.g),
                "field (T)",
                "ω (rad/ns)",
                (fields.clone(), omega),
                (line_b, line_w),
            ),
        )?;
    }
    Ok(outcome)
}

fn sweep_viscosity(ctx: &Ctx) -> Result<Outcome> {
    let etas = ctx.config.sweep_viscosities()?;
    let result = viscosity_sweep(&ctx.config.experiment, &etas, ctx.config.fit_start())?;
    let outcome = Outcome::from_fits(&result.fits);
    ctx.report(vec![], &outcome, &result)?;
    if let SweepDerived::Viscosity(line) = &result.derived {
        sweep_plots(ctx, &result, "mPa·s")?;
        let t2: Vec<f64> = result.fits.iter().map(|f| f.value("t2star").unwrap_or(0.0) * 1e12).collect();
        let lo = etas.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = etas.iter().cloned().fold(0.0, f64::max);
        let line_x = vec![lo, hi];
        let line_y = line_x.iter().map(|&x| line.predict(x) * 1e12).collect();
        ctx.plot(
            "t2star",
            plots::xy_panel("T2* against viscosity", "viscosity (mPa·s)", "T2* (ps)", (etas.clone(), t2), (line_x, line_y)),
        )?;
    }
    Ok(outcome)
}

/// Starting values for the pulse-EPR models from a log-linear look at the
/// data.
fn epr_initial(kind: EprKind, trace: &TraceSeries) -> Result<(ModelSpec, Vec<f64>)> {
    let t = trace.times();
    let y = trace.values();
    let n = t.len();
    if n < 4 {
        return Err(Error::GuessFailure(format!("{n} samples, need at least 4")));
    }
    let span = t[n - 1] - t[0];
    match kind {
        EprKind::InversionRecovery => {
            let tail = (n / 10).max(1);
            let i_inf = y[n - tail..].iter().sum::<f64>() / tail as f64;
            // extrapolate the first sample back to t = 0 with a span/3 guess
            let mut tau = span / 3.0;
            let depth = i_inf - y[0];
            if let Some(k) = y.iter().position(|&v| (i_inf - v).abs() <= depth.abs() / std::f64::consts::E) {
                if t[k] > t[0] {
                    tau = t[k] - t[0];
                }
            }
            let amplitude = depth * (t[0] / tau).exp();
            Ok((ModelSpec::new(ModelId::InversionRecovery), vec![i_inf, amplitude, tau]))
        }
        EprKind::HahnEcho => {
            let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(_, v)| **v > 0.0).map(|(t, v)| (*t, v.ln())).collect();
            let (tm, i0) = if pts.len() >= 2 {
                let m = pts.len() as f64;
                let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
                let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
                let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
                let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
                let slope = sxy / sxx;
                if slope < 0.0 {
                    (-1.0 / slope, (my - slope * mx).exp())
                } else {
                    (span, y[0])
                }
            } else {
                (span, y[0])
            };
            Ok((ModelSpec::new(ModelId::HahnEcho), vec![i0, tm, 1.0]))
        }
    }
}

fn epr_fit(ctx: &Ctx, path: &Path, kind: EprKind, deadtime_ns: Option<f64>) -> Result<Outcome> {
    let (input, raw) = read_trace(path)?;
    let trace = match deadtime_ns {
        Some(d) => {
            let cut = deadtime_truncate(&raw, d * 1e-9, ctx.config.epr.increment_ns * 1e-9)?;
            if cut.empty {
                let payload = json!({ "kind": kind, "deadtime_ns": d, "retained_points": 0, "fit": null });
                ResultReport::new(ctx.stem, &ctx.config, vec![input], Status::Ok, payload)
                    .write(&ctx.out.join(format!("{}.json", ctx.stem)))?;
                return Err(Error::Validation(format!("no samples survive a {d} ns deadtime")));
            }
            cut.trace
        }
        None => raw,
    };
    let (mut spec, init) = epr_initial(kind, &trace)?;
    if kind == EprKind::HahnEcho && ctx.config.epr.fit_stretch {
        spec = spec.free("stretch")?;
    }
    let window = (trace.times()[0], trace.times()[trace.len() - 1]);
    let result = nonlinear_least_squares(&spec, &trace, &init, window, &ctx.fit_options())?;
    let outcome = Outcome::from_fits([&result]);
    let name = match kind {
        EprKind::InversionRecovery => "t1",
        EprKind::HahnEcho => "tm",
    };
    let payload = json!({
        "kind": kind,
        "deadtime_ns": deadtime_ns,
        "retained_points": trace.len(),
        "time_constant_s": result.value(name),
        "time_constant_sigma_s": result.sigma(name),
        "fit": &result,
    });
    ctx.report(vec![input], &outcome, payload)?;
    ctx.plot("decay", plots::trace_panel("Pulse-EPR decay", &trace, Some(&result), plots::MICROSECONDS))?;
    Ok(outcome)
}

#[derive(Serialize)]
struct ExtrapolationPayload<'a> {
    series: &'a RelaxationSeries,
    fit_range_k: (f64, f64),
    result: &'a Extrapolation,
}

fn extrapolate(ctx: &Ctx, path: &Path) -> Result<Outcome> {
    let (input, bytes) = InputFile::read(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::Validation("series file is not UTF-8".into()))?;
    let series: RelaxationSeries = serde_json::from_str(&text)
        .map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
    let c = &ctx.config.extrapolation;
    let result = extrapolate_t1(&series, c.fit_range_k, c.target_k, c.mode)?;
    ctx.report(vec![input], &Outcome::Ok, ExtrapolationPayload { series: &series, fit_range_k: c.fit_range_k, result: &result })?;

    let law = |temp: f64| match result.mode {
        ExtrapolationMode::LogLog => (result.intercept + result.slope * temp.ln()).exp(),
        ExtrapolationMode::Semilog => (result.intercept + result.slope * temp).exp(),
        ExtrapolationMode::Linear => result.intercept + result.slope * temp,
    };
    let log = matches!(result.mode, ExtrapolationMode::LogLog | ExtrapolationMode::Semilog);
    let y = |v: f64| if log { v.max(f64::MIN_POSITIVE).log10() } else { v };
    let x = |t: f64| if result.mode == ExtrapolationMode::LogLog { t.log10() } else { t };
    let lo = series.temperatures[0].min(c.target_k);
    let hi = series.temperatures[series.temperatures.len() - 1].max(c.target_k);
    let line_t: Vec<f64> = (0..=100).map(|i| lo + (hi - lo) * i as f64 / 100.0).collect();
    let mut points_x: Vec<f64> = series.temperatures.iter().map(|&t| x(t)).collect();
    let mut points_y: Vec<f64> = series.times.iter().map(|&v| y(v)).collect();
    points_x.push(x(c.target_k));
    points_y.push(y(result.value));
    let (xl, yl) = match result.mode {
        ExtrapolationMode::LogLog => ("log10 T (K)", "log10 T1 (s)"),
        ExtrapolationMode::Semilog => ("T (K)", "log10 T1 (s)"),
        ExtrapolationMode::Linear => ("T (K)", "T1 (s)"),
    };
    ctx.plot(
        "law",
        plots::xy_panel(
            "Relaxation law and extrapolation",
            xl,
            yl,
            (points_x, points_y),
            (line_t.iter().map(|&t| x(t)).collect(), line_t.iter().map(|&t| y(law(t))).collect()),
        ),
    )?;
    Ok(Outcome::Ok)
}

fn sensitivity(ctx: &Ctx) -> Result<Outcome> {
    let e = &ctx.config.experiment;
    let s = &ctx.config.sensitivity;
    let (snr, result) = measure_snr(e, ctx.config.fit_start())?;
    let pump = s.pump_energy_j.map(|p| PumpScaling { reference_energy: e.pump_energy, new_energy: p });
    let limit = detection_limit(e.concentration, snr, s.threshold_snr, pump)?;
    let outcome = Outcome::from_fits([&result]);
    let payload = json!({
        "reference_concentration_molar": e.concentration,
        "measured_snr": snr,
        "threshold_snr": s.threshold_snr,
        "pump_scaling": pump,
        "detection_limit_molar": limit,
        "fit": &result,
    });
    ctx.report(vec![], &outcome, payload)?;
    if ctx.config.plot.svg {
        let trace = simulate_trace(e)?;
        ctx.plot("trace", plots::trace_panel("Reference trace and fit", &trace, Some(&result), plots::PICOSECONDS))?;
    }
    Ok(outcome)
}

fn demod(ctx: &Ctx, path: &Path) -> Result<Outcome> {
    let (input, _) = InputFile::read(path)?;
    let record = load_shots(path)?;
    let mut times = Vec::with_capacity(record.len());
    let mut values = Vec::with_capacity(record.len());
    for (t, pairs) in &record {
        times.push(*t);
        values.push(demodulate(pairs)?);
    }
    let trace = TraceSeries::new(times, values)?;
    save_trace(&trace, &ctx.out.join("demod.csv"))?;
    let counts: Vec<usize> = record.iter().map(|(_, p)| p.len()).collect();
    let payload = json!({
        "trace_file": "demod.csv",
        "n_delays": record.len(),
        "min_pairs_per_delay": counts.iter().min(),
        "max_pairs_per_delay": counts.iter().max(),
    });
    ctx.report(vec![input], &Outcome::Ok, payload)?;
    ctx.plot("trace", plots::trace_panel("Demodulated trace", &trace, None, plots::PICOSECONDS))?;
    Ok(Outcome::Ok)
}
