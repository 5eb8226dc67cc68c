//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion; exits non-zero if any fail.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinfid::analysis::{
    deadtime_truncate, extrapolate_t1, glycerol_viscosity, viscosity_regression, ExtrapolationMode, RelaxationKind,
    RelaxationSeries, ViscosityPoint,
};
use spinfid::dynamics::{
    noise_free_spin_signal, simulate_trace, spin_amplitude, ExperimentConfig, OkeArtifact, TimeGrid,
};
use spinfid::fit::{extract_t2star, ModelId};
use spinfid::physics::{g_from_resonance, larmor_frequency, resonance_field, PhysicalConstants};
use spinfid::signal_chain::{demodulate, synthesize_raw_shots, ModulationConfig};
use spinfid::TraceSeries;

type Outcome = Result<String, String>;

const C: PhysicalConstants = PhysicalConstants::CODATA_2018;
const PS: f64 = 1e-12;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn larmor_arithmetic() -> Outcome {
    let omega = larmor_frequency(1.74, 5.0, &C).map_err(|e| e.to_string())?;
    let period_ps = 2.0 * std::f64::consts::PI / omega / PS;
    let ghz_per_t = omega / (2.0 * std::f64::consts::PI) / 5.0 / 1e9;
    check(
        (period_ps - 8.21).abs() <= 0.01 && (ghz_per_t - 24.35).abs() <= 0.01,
        format!("period {period_ps:.4} ps, {ghz_per_t:.4} GHz/T"),
    )
}

fn resonance_arithmetic() -> Outcome {
    let b = resonance_field(1.807, 9.637e9, &C).map_err(|e| e.to_string())?;
    let g = g_from_resonance(1.318, 34.110e9, &C).map_err(|e| e.to_string())?;
    check(
        (b * 1e3 - 381.1).abs() <= 0.2 && (g - 1.849).abs() <= 0.002,
        format!("B_res {:.3} mT, g {g:.5}", b * 1e3),
    )
}

fn clean_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::h2o_default();
    c.g.spread_sigma = 0.0;
    c.noise.additive_sigma = 0.0;
    c.oke = OkeArtifact::none();
    c
}

fn closed_form_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mut c = clean_config();
        c.g.iso = rng.random_range(1.5..2.3);
        c.field = rng.random_range(0.0..6.0);
        c.viscosity = rng.random_range(0.8..4.0);
        c.phase.phi0 = rng.random_range(-3.0..3.0);
        c.phase.cubic_coeff = rng.random_range(-0.01..0.01);
        c.concentration = rng.random_range(1e-4..1e-2);
        let step = rng.random_range(0.05..0.2) * PS;
        c.time_grid = TimeGrid::uniform(0.0, 299.0 * step, step);
        let sim = noise_free_spin_signal(&c).map_err(|e| e.to_string())?;
        let times = c.time_grid.times().map_err(|e| e.to_string())?;
        if times.len() != 300 {
            return Err(format!("grid has {} points", times.len()));
        }
        let omega = larmor_frequency(c.g.iso, c.field, &C).map_err(|e| e.to_string())?;
        let t2 = c.decoherence.member_t2(c.viscosity).map_err(|e| e.to_string())?;
        let phi = c.phase.phi0 + c.phase.cubic_coeff * c.field.powi(3);
        let eta0 = spin_amplitude(&c);
        for (&t, &s) in times.iter().zip(&sim) {
            let envelope = eta0 * (-t / t2).exp();
            let expected = envelope * (omega * t + phi).cos();
            worst = worst.max((s - expected).abs() / envelope);
        }
    }
    check(worst < 1e-9, format!("max relative error {worst:.2e} over 20 sets x 300 points"))
}

fn round_trip_fidelity() -> Outcome {
    let mut lines = Vec::new();
    let mut all_ok = true;
    let omega_true = larmor_frequency(1.74, 5.0, &C).map_err(|e| e.to_string())?;
    for (label, t2_target, field) in [("8.60 ps", 8.60e-12, 0.0), ("10.1 ps", 10.1e-12, 0.0), ("21.9 ps", 21.9e-12, 0.0), ("5 T", 8.60e-12, 5.0)] {
        let mut hits = 0;
        for seed in 0..50u64 {
            let mut c = ExperimentConfig::h2o_default();
            c.field = field;
            c.g.spread_sigma = 0.0;
            c.viscosity = (t2_target - c.decoherence.t2_intercept) / c.decoherence.t2_slope;
            c.noise.additive_sigma = spin_amplitude(&c) / 20.0;
            c.ensemble_size = 10_000;
            c.rng_seed = seed;
            c.noise.rng_seed = seed;
            c.time_grid = TimeGrid::uniform(-2.0 * PS, (4.0 * t2_target).max(60.0 * PS), 0.02 * PS);
            let trace = simulate_trace(&c).map_err(|e| e.to_string())?;
            let Ok(fit) = extract_t2star(&trace, field, 0.5 * PS) else { continue };
            let t2 = fit.value("t2star").unwrap();
            let omega = fit.value("omega").unwrap();
            let t2_ok = (t2 / t2_target - 1.0).abs() < 0.02;
            let omega_ok = if field == 0.0 { omega == 0.0 } else { (omega / omega_true - 1.0).abs() < 0.01 };
            if fit.converged && t2_ok && omega_ok {
                hits += 1;
            }
        }
        all_ok &= hits >= 48;
        lines.push(format!("{label} {hits}/50"));
    }
    check(all_ok, lines.join(", "))
}

fn cli_binary() -> &'static str {
    env!("CARGO_BIN_EXE_spinfid")
}

fn read_json(path: &Path) -> Result<serde_json::Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn field_sweep_g() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let status = Command::new(cli_binary())
        .args(["sweep-field", "--no-svg", "--out"])
        .arg(dir.path())
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("sweep-field exited with {status}"));
    }
    let report = read_json(&dir.path().join("sweep-field.json"))?;
    let g = report["payload"]["derived"]["g"]["g"].as_f64().ok_or("no g in report")?;
    check((g - 1.74).abs() <= 0.02, format!("g = {g:.5}"))
}

fn spread_monotonicity() -> Outcome {
    let fields = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
    let mut monotone = 0;
    let mut end_to_end = 0;
    for seed in 0..10u64 {
        let mut t2s = Vec::new();
        for &b in &fields {
            let mut c = ExperimentConfig::h2o_default();
            c.g.spread_sigma = 0.01 * c.g.iso;
            c.field = b;
            c.noise.additive_sigma = 0.0;
            c.oke = OkeArtifact::none();
            c.rng_seed = seed;
            let trace = simulate_trace(&c).map_err(|e| e.to_string())?;
            let fit = extract_t2star(&trace, b, 0.5 * PS).map_err(|e| e.to_string())?;
            t2s.push(fit.value("t2star").unwrap());
        }
        if t2s.windows(2).all(|w| w[1] < w[0]) {
            monotone += 1;
        }
        if t2s[5] < t2s[0] {
            end_to_end += 1;
        }
    }
    // one-sided sign test: P(>= 9 of 10 | p = 1/2) = 0.011
    check(
        monotone >= 9 && end_to_end >= 9,
        format!("strictly decreasing in {monotone}/10 seeds, T2*(5 T) < T2*(0 T) in {end_to_end}/10 (p < 0.05 needs >= 9)"),
    )
}

fn viscosity_sensing() -> Outcome {
    let eta40 = glycerol_viscosity(0.40, 293.0).map_err(|e| e.to_string())?;
    let slope = (21.9e-12 - 8.60e-12) / (eta40 - 1.0);
    let intercept = 8.60e-12 - slope;
    let etas: Vec<f64> = (0..5).map(|i| 1.0 + (eta40 - 1.0) * i as f64 / 4.0).collect();
    let held_out = 2.2;
    let fitted_t2 = |eta: f64, seed: u64| -> Result<f64, String> {
        let mut c = ExperimentConfig::h2o_default();
        c.decoherence.t2_slope = slope;
        c.decoherence.t2_intercept = intercept;
        c.viscosity = eta;
        c.noise.additive_sigma = 0.03 * spin_amplitude(&c);
        c.noise.rng_seed = seed;
        c.time_grid = TimeGrid::uniform(-2.0 * PS, 90.0 * PS, 0.02 * PS);
        let trace = simulate_trace(&c).map_err(|e| e.to_string())?;
        let fit = extract_t2star(&trace, 0.0, 0.5 * PS).map_err(|e| e.to_string())?;
        Ok(fit.value("t2star").unwrap())
    };
    let seeds = 50;
    let (mut slope_ok, mut invert_ok) = (0, 0);
    for seed in 0..seeds {
        let points = etas
            .iter()
            .enumerate()
            .map(|(i, &eta)| {
                Ok(ViscosityPoint { viscosity: eta, t2star: fitted_t2(eta, seed * 100 + i as u64)?, sigma: None })
            })
            .collect::<Result<Vec<_>, String>>()?;
        let line = viscosity_regression(&points).map_err(|e| e.to_string())?;
        if (line.slope / slope - 1.0).abs() < 0.15 {
            slope_ok += 1;
        }
        let t2_held = fitted_t2(held_out, seed * 100 + 99)?;
        let eta_hat = line.invert(t2_held).map_err(|e| e.to_string())?;
        if (eta_hat / held_out - 1.0).abs() < 0.10 {
            invert_ok += 1;
        }
    }
    let need = (seeds * 95).div_ceil(100);
    check(
        slope_ok >= need && invert_ok >= need,
        format!("slope within 15% in {slope_ok}/{seeds}, held-out η within 10% in {invert_ok}/{seeds}"),
    )
}

fn demodulation_rejection() -> Outcome {
    let delay = 0.0;
    let mut c = clean_config();
    c.time_grid = TimeGrid::Explicit(vec![delay]);
    let spin = noise_free_spin_signal(&c).map_err(|e| e.to_string())?[0];
    let mut with_artifact = c.clone();
    with_artifact.oke = OkeArtifact { amplitude: 100.0 * spin, width: 100e-15, odd_fraction: 0.0 };
    let sigma = spin / 10.0;
    let m = ModulationConfig { pulses_per_point: 1000, shot_sigma: Some(sigma), ..Default::default() };
    let mut estimates = Vec::new();
    let mut worst_leak = 0.0f64;
    for seed in 0..50u64 {
        let mut a = with_artifact.clone();
        a.noise.rng_seed = seed;
        let mut b = c.clone();
        b.noise.rng_seed = seed;
        let d_art = demodulate(&synthesize_raw_shots(&a, &m, delay, 0).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let d_clean = demodulate(&synthesize_raw_shots(&b, &m, delay, 0).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        worst_leak = worst_leak.max((d_art - d_clean).abs() / d_art.abs());
        estimates.push(d_art);
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let se = sigma / (2.0 * 1000.0f64).sqrt() / n.sqrt();
    let bias = (mean - spin).abs() / se;
    check(
        worst_leak < 0.01 && bias < 3.0,
        format!("artifact leak {worst_leak:.2e} of recovered amplitude, bias {bias:.2} standard errors"),
    )
}

fn gradient_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for model in ModelId::ALL {
        for _ in 0..100 {
            let (p, t): (Vec<f64>, f64) = match model {
                ModelId::DampedCosine => (
                    vec![rng.random_range(0.1..3.0), rng.random_range(2.0..30.0) * PS, rng.random_range(0.0..1e12), rng.random_range(-3.0..3.0)],
                    rng.random_range(0.0..60.0) * PS,
                ),
                ModelId::Exponential => (vec![rng.random_range(-3.0..3.0), rng.random_range(2.0..30.0) * PS], rng.random_range(0.0..60.0) * PS),
                ModelId::InversionRecovery => (
                    vec![rng.random_range(0.5..2.0), rng.random_range(0.5..3.0), rng.random_range(0.1..10.0) * 1e-6],
                    rng.random_range(0.0..20.0) * 1e-6,
                ),
                ModelId::HahnEcho => (
                    vec![rng.random_range(0.5..2.0), rng.random_range(0.1..3.0) * 1e-6, rng.random_range(0.5..2.5)],
                    rng.random_range(0.01..6.0) * 1e-6,
                ),
            };
            let mut grad = vec![0.0; p.len()];
            model.gradient(t, &p, &mut grad);
            for k in 0..p.len() {
                let h = 1e-6 * p[k].abs().max(1e-300);
                let (mut up, mut dn) = (p.clone(), p.clone());
                up[k] += h;
                dn[k] -= h;
                let fd = (model.eval(t, &up) - model.eval(t, &dn)) / (2.0 * h);
                let scale = grad[k].abs().max(model.eval(t, &p).abs() / p[k].abs().max(1e-300) * 1e-3).max(1e-300);
                worst = worst.max((grad[k] - fd).abs() / scale);
            }
        }
    }
    check(worst < 1e-5, format!("max relative discrepancy {worst:.2e} over 4 models x 100 draws"))
}

fn extrapolation_method() -> Outcome {
    let temps = [5.0, 8.0, 12.0, 13.0, 14.5, 16.0, 18.0, 20.0, 25.0];
    let mut worst = 0.0f64;
    for n in [-1.0, -3.0, -5.0, -7.0] {
        let series = RelaxationSeries {
            temperatures: temps.to_vec(),
            times: temps.iter().map(|t: &f64| 3.7e-2 * t.powf(n)).collect(),
            sigmas: None,
            kind: RelaxationKind::T1,
        };
        let e = extrapolate_t1(&series, (12.0, 20.0), 294.0, ExtrapolationMode::LogLog).map_err(|e| e.to_string())?;
        worst = worst.max((e.value / (3.7e-2 * 294f64.powf(n)) - 1.0).abs());
    }
    check(worst < 1e-9, format!("max relative error {worst:.2e} for n = -1, -3, -5, -7"))
}

fn deadtime_demonstration() -> Outcome {
    let decay = |tau: f64, step: f64, stop: f64| -> Result<TraceSeries, String> {
        let n = (stop / step).round() as usize;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
        let values = times.iter().map(|t| (-t / tau).exp()).collect();
        TraceSeries::new(times, values).map_err(|e| e.to_string())
    };
    let fast = deadtime_truncate(&decay(8.6e-12, 0.02e-12, 100e-12)?, 120e-9, 2e-9).map_err(|e| e.to_string())?;
    let slow = deadtime_truncate(&decay(1e-6, 2e-9, 1e-6)?, 120e-9, 2e-9).map_err(|e| e.to_string())?;
    check(
        fast.empty && !slow.empty && slow.trace.len() >= 400,
        format!("8.6 ps decay empty = {}, 1 µs decay keeps {} points", fast.empty, slow.trace.len()),
    )
}

fn write_inputs(dir: &Path) -> Result<(), String> {
    let mut ir = String::from("# spinfid-trace v1\ntime_ps,signal\n");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..200 {
        let t = (0.2 + 0.05 * i as f64) * 1e-6;
        let y = 1.0 - 1.7 * (-t / 2.0e-6).exp() + rng.random_range(-0.01..0.01);
        ir.push_str(&format!("{:.16e},{:.16e}\n", t * 1e12, y));
    }
    std::fs::write(dir.join("ir.csv"), ir).map_err(|e| e.to_string())?;
    let series = serde_json::json!({
        "temperatures": [12.0, 14.0, 16.0, 18.0, 20.0],
        "times": [1.2e-3, 5.1e-4, 2.4e-4, 1.3e-4, 7.6e-5],
        "kind": "T1"
    });
    std::fs::write(dir.join("series.json"), series.to_string()).map_err(|e| e.to_string())?;
    std::fs::write(
        dir.join("config.json"),
        r#"{"experiment": {"ensemble_size": 2000, "time_grid": {"uniform": {"start": -1e-12, "stop": 40e-12, "step": 0.04e-12}}}, "modulation": {"pulses_per_point": 50}}"#,
    )
    .map_err(|e| e.to_string())
}

/// Runs every subcommand into `out`, returning the sorted output files and
/// their contents.
fn run_all(inputs: &Path, out: &Path, threads: &str) -> Result<Vec<(String, Vec<u8>)>, String> {
    let cfg = inputs.join("config.json");
    let field_run = out.join("field");
    let runs: Vec<(Vec<String>, &Path)> = vec![
        (vec!["simulate".into(), "--raw-shots".into(), "--field".into(), "3".into()], out),
        (vec!["fit".into(), out.join("trace.csv").display().to_string(), "--field".into(), "3".into()], out),
        (vec!["demod".into(), out.join("shots.csv").display().to_string()], out),
        (vec!["sweep-field".into()], &field_run),
        (vec!["sweep-viscosity".into()], out),
        (vec!["epr-fit".into(), inputs.join("ir.csv").display().to_string(), "--deadtime-ns".into(), "120".into()], out),
        (vec!["extrapolate".into(), inputs.join("series.json").display().to_string()], out),
        (vec!["sensitivity".into()], out),
    ];
    for (args, dir) in runs {
        let status = Command::new(cli_binary())
            .args(&args)
            .arg("--config")
            .arg(&cfg)
            .args(["--seed", "77", "--out"])
            .arg(dir)
            .env("RAYON_NUM_THREADS", threads)
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("{} exited with {status}", args[0]));
        }
    }
    let mut files = Vec::new();
    for dir in [out, field_run.as_path()] {
        for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
            let entry = entry.map_err(|e| e.to_string())?;
            if entry.path().is_file() {
                let bytes = std::fs::read(entry.path()).map_err(|e| e.to_string())?;
                files.push((entry.file_name().to_string_lossy().into_owned(), bytes));
            }
        }
    }
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let inputs = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_inputs(inputs.path())?;
    let runs = [("1", "a"), ("1", "b"), ("4", "c")];
    let mut results = Vec::new();
    for (threads, name) in runs {
        let out = inputs.path().join(name);
        results.push(run_all(inputs.path(), &out, threads)?);
    }
    let reports = results[0].iter().filter(|(n, _)| n.ends_with(".json")).count();
    let svgs = results[0].iter().filter(|(n, _)| n.ends_with(".svg")).count();
    let same = results.windows(2).all(|w| w[0] == w[1]);
    check(
        same && reports == 8 && svgs >= 8,
        format!("{reports} reports, {svgs} SVGs, {} files identical across 2 runs and 1 vs 4 threads", results[0].len()),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 12] = [
        ("Larmor arithmetic", larmor_arithmetic),
        ("Resonance arithmetic", resonance_arithmetic),
        ("Damped-cosine equivalence", closed_form_equivalence),
        ("Round-trip fidelity", round_trip_fidelity),
        ("Field-sweep g recovery", field_sweep_g),
        ("g-spread monotonicity", spread_monotonicity),
        ("Viscosity sensing", viscosity_sensing),
        ("Demodulation rejection", demodulation_rejection),
        ("Gradient checks", gradient_checks),
        ("EPR extrapolation method", extrapolation_method),
        ("Deadtime demonstration", deadtime_demonstration),
        ("Determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS [{:>2}] {name}: {detail} ({secs:.1} s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{:>2}] {name}: {detail} ({secs:.1} s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
