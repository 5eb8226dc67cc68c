use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::bloch::{initialize_polarization, BlochPropagator};
use super::config::{Detection, ExperimentConfig};
use super::model::{excited_state_weight, phase_offset, REFERENCE_PUMP_ENERGY};
use crate::error::Result;
use crate::physics::PhysicalConstants;
use crate::rng::{substream, NOISE_STREAM};
use crate::trace::TraceSeries;

const MEMBERS_PER_CHUNK: usize = 512;

/// Spin-signal amplitude for a fully initialised ensemble (signal units).
pub fn spin_amplitude(config: &ExperimentConfig) -> f64 {
    config.noise.signal_per_molar * config.concentration * config.pump_energy / REFERENCE_PUMP_ENERGY
}

fn member_g(config: &ExperimentConfig, member: usize) -> f64 {
    if config.g.spread_sigma == 0.0 {
        return config.g.iso;
    }
    let mut rng = substream(config.rng_seed, member as u64);
    loop {
        let z: f64 = StandardNormal.sample(&mut rng);
        let g = config.g.iso + config.g.spread_sigma * z;
        if g > 0.0 {
            return g;
        }
    }
}

/// Sum of p_z over members `range` at each non-negative delay.
fn chunk_sum(
    config: &ExperimentConfig,
    range: std::ops::Range<usize>,
    p0: [f64; 3],
    steps: &[f64],
    t2: f64,
    constants: &PhysicalConstants,
) -> Result<Vec<f64>> {
    let mut sums = vec![0.0; steps.len()];
    for member in range {
        let g = member_g(config, member);
        let mut p = p0;
        let mut prop: Option<BlochPropagator> = None;
        for (sum, &dt) in sums.iter_mut().zip(steps) {
            let reuse = matches!(prop, Some(ref q) if (q.dt() - dt).abs() <= 1e-12 * dt);
            if !reuse {
                prop = Some(BlochPropagator::new(g, config.field, t2, config.decoherence.t1, dt, constants)?);
            }
            p = prop.as_ref().expect("set above").apply(p);
            *sum += p[2];
        }
    }
    Ok(sums)
}

/// Ensemble-averaged spin signal on the configured grid, without artifacts
/// or noise. Delays before time zero carry no spin signal.
pub fn noise_free_spin_signal(config: &ExperimentConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let constants = PhysicalConstants::CODATA_2018;
    let times = config.time_grid.times()?;
    let t2 = config.decoherence.member_t2(config.viscosity)?;

    let pump = initialize_polarization(config.pump_helicity, config.initialization_efficiency)?;
    let phi = phase_offset(config.field, config.phase.phi0, config.phase.cubic_coeff);
    // rotate the pumped polarisation about x by φ so that p_z(t) ∝ cos(ωt + φ)
    let p0 = [0.0, -pump[2] * phi.sin(), pump[2] * phi.cos()];

    let first_nonneg = times.partition_point(|&t| t < 0.0);
    let positive = &times[first_nonneg..];
    let steps: Vec<f64> = positive
        .iter()
        .scan(0.0, |prev, &t| {
            let dt = t - *prev;
            *prev = t;
            Some(dt)
        })
        .collect();

    // without a field or a g spread every member follows the same path
    let n = if config.field == 0.0 || config.g.spread_sigma == 0.0 {
        1
    } else {
        config.ensemble_size
    };
    let chunks: Vec<_> = (0..n.div_ceil(MEMBERS_PER_CHUNK))
        .map(|c| c * MEMBERS_PER_CHUNK..((c + 1) * MEMBERS_PER_CHUNK).min(n))
        .collect();
    let partials = chunks
        .into_par_iter()
        .map(|range| chunk_sum(config, range, p0, &steps, t2, &constants))
        .collect::<Result<Vec<_>>>()?;

    let mut total = vec![0.0; steps.len()];
    for part in &partials {
        for (acc, v) in total.iter_mut().zip(part) {
            *acc += v;
        }
    }

    let amplitude = spin_amplitude(config);
    let mut out = vec![0.0; first_nonneg];
    for (&t, sum) in positive.iter().zip(total) {
        let weight = excited_state_weight(t, config.excited_state_lifetime, config.excited_state_coupling)?;
        out.push(amplitude * (sum / n as f64) * weight);
    }
    Ok(out)
}

/// Synthesises a TRFE trace: ensemble spin signal, time-zero artifact and
/// additive Gaussian noise. Deterministic in the configured seeds and
/// independent of the rayon thread count.
pub fn simulate_trace(config: &ExperimentConfig) -> Result<TraceSeries> {
    let spin = noise_free_spin_signal(config)?;
    let times = config.time_grid.times()?;
    let sign = config.pump_helicity.sign();
    let mut noise_rng = substream(config.noise.rng_seed, NOISE_STREAM);
    let sigma = config.noise.additive_sigma;

    let values = times
        .iter()
        .zip(spin)
        .map(|(&t, s)| {
            let artifact = match config.detection {
                Detection::Demodulated => sign * config.oke.odd(t),
                Detection::SingleHelicity => config.oke.even(t) + sign * config.oke.odd(t),
            };
            let z: f64 = StandardNormal.sample(&mut noise_rng);
            s + artifact + sigma * z
        })
        .collect();
    Ok(TraceSeries::new(times, values)?.with_metadata(format!(
        "simulated: field {} T, viscosity {} mPa·s, seed {}",
        config.field, config.viscosity, config.rng_seed
    )))
}
