//! Disturbance signals: input disturbances `δ_i`, self-measurement errors
//! `ε_ii` and neighbour-measurement errors `ε_ij`.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisturbanceKind {
    Zero,
    /// Bounded, continuous sinusoids; amplitudes equal the bounds.
    Sinusoid,
    /// Piecewise-constant Gaussian, one draw per step with standard deviation
    /// `σ/√h`. Discontinuous, so it is not a bounded-continuous profile.
    White,
}

/// Disturbance description. For `Sinusoid`, `delta_max`/`eps_max` are the
/// amplitudes; for `White` they are the noise intensities `σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceProfile {
    pub kind: DisturbanceKind,
    pub delta_max: f64,
    pub eps_max: f64,
    /// Base frequency (Hz) of the sinusoids; each signal gets a frequency in
    /// `[0.5, 1.5] × frequency`.
    pub frequency: f64,
    pub seed: u64,
}

impl DisturbanceProfile {
    pub fn zero() -> Self {
        Self {
            kind: DisturbanceKind::Zero,
            delta_max: 0.0,
            eps_max: 0.0,
            frequency: 0.0,
            seed: 0,
        }
    }

    pub fn sinusoid(delta_max: f64, eps_max: f64, frequency: f64, seed: u64) -> Self {
        Self {
            kind: DisturbanceKind::Sinusoid,
            delta_max,
            eps_max,
            frequency,
            seed,
        }
    }

    pub fn white(sigma_delta: f64, sigma_eps: f64, seed: u64) -> Self {
        Self {
            kind: DisturbanceKind::White,
            delta_max: sigma_delta,
            eps_max: sigma_eps,
            frequency: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_max >= 0.0) || !self.delta_max.is_finite() {
            return Err(invalid("disturbance.delta_max", "must be finite and nonnegative"));
        }
        if !(self.eps_max >= 0.0) || !self.eps_max.is_finite() {
            return Err(invalid("disturbance.eps_max", "must be finite and nonnegative"));
        }
        if self.kind == DisturbanceKind::Sinusoid && !(self.frequency >= 0.0 && self.frequency.is_finite()) {
            return Err(invalid("disturbance.frequency", "must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Whether the signals are bounded and continuous in time.
    pub fn is_bounded_continuous(&self) -> bool {
        matches!(self.kind, DisturbanceKind::Zero | DisturbanceKind::Sinusoid)
    }
}

/// Disturbance values at one instant. `eps_edge` is indexed like
/// `NetworkTopology::edges`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSample<T> {
    pub delta: Vec<T>,
    pub eps_self: Vec<T>,
    pub eps_edge: Vec<T>,
}

impl<T: Scalar> DisturbanceSample<T> {
    pub fn zeros(nodes: usize, edges: usize) -> Self {
        Self {
            delta: vec![T::zero(); nodes],
            eps_self: vec![T::zero(); nodes],
            eps_edge: vec![T::zero(); edges],
        }
    }

    fn fill_from(&mut self, values: impl Iterator<Item = f64>) {
        for (slot, v) in self
            .delta
            .iter_mut()
            .chain(self.eps_self.iter_mut())
            .chain(self.eps_edge.iter_mut())
            .zip(values)
        {
            *slot = T::lit(v);
        }
    }
}

/// Deterministic sampler for one profile over a fixed signal layout.
#[derive(Debug, Clone)]
pub struct DisturbanceGenerator<T> {
    profile: DisturbanceProfile,
    nodes: usize,
    edges: usize,
    step: f64,
    // sinusoid: (amplitude, angular frequency, phase) per signal
    tones: Vec<(f64, f64, f64)>,
    cache: Option<(usize, DisturbanceSample<T>)>,
}

impl<T: Scalar> DisturbanceGenerator<T> {
    /// `step` is the integration step `h`; white noise is scaled by `1/√h`.
    pub fn new(profile: DisturbanceProfile, nodes: usize, edges: usize, step: f64) -> Result<Self> {
        profile.validate()?;
        if !(step > 0.0) {
            return Err(invalid("integration.h", "must be positive"));
        }
        let mut tones = Vec::new();
        if profile.kind == DisturbanceKind::Sinusoid {
            let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
            let total = 2 * nodes + edges;
            tones.reserve(total);
            for k in 0..total {
                let amplitude = if k < nodes { profile.delta_max } else { profile.eps_max };
                let freq = profile.frequency * (0.5 + rng.random::<f64>());
                let phase = TAU * rng.random::<f64>();
                tones.push((amplitude, TAU * freq, phase));
            }
        }
        Ok(Self {
            profile,
            nodes,
            edges,
            step,
            tones,
            cache: None,
        })
    }

    pub fn profile(&self) -> &DisturbanceProfile {
        &self.profile
    }

    /// Values at time `t`, which lies in integration step `step_index`.
    pub fn sample(&mut self, step_index: usize, t: f64) -> DisturbanceSample<T> {
        let mut out = DisturbanceSample::zeros(self.nodes, self.edges);
        match self.profile.kind {
            DisturbanceKind::Zero => {}
            DisturbanceKind::Sinusoid => {
                out.fill_from(self.tones.iter().map(|&(amp, w, phi)| amp * (w * t + phi).sin()));
            }
            DisturbanceKind::White => {
                if let Some((k, cached)) = &self.cache {
                    if *k == step_index {
                        return cached.clone();
                    }
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.profile.seed);
                rng.set_stream(step_index as u64);
                let scale = 1.0 / self.step.sqrt();
                let (sd, se) = (self.profile.delta_max * scale, self.profile.eps_max * scale);
                let nodes = self.nodes;
                out.fill_from((0..2 * nodes + self.edges).map(|k| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * if k < nodes { sd } else { se }
                }));
                self.cache = Some((step_index, out.clone()));
            }
        }
        out
    }
}

/// Stateless convenience wrapper around [`DisturbanceGenerator::sample`].
pub fn sample_disturbances<T: Scalar>(
    profile: &DisturbanceProfile,
    nodes: usize,
    edges: usize,
    step: f64,
    step_index: usize,
    t: f64,
) -> Result<DisturbanceSample<T>> {
    Ok(DisturbanceGenerator::new(*profile, nodes, edges, step)?.sample(step_index, t))
}
