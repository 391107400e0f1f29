//! Data generators for the static regression and OE models.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gauss::{stream_rng, MvnSampler};
use crate::oe::{OeFilter, OeModel};
use crate::quantizer::QuantizerSpec;

// Streams of one seed: regressors and output noise are drawn independently.
const REGRESSOR_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

/// `y = phi' theta + d`, `phi ~ N(0, H)`, `d ~ N(0, noise_std^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticSystem {
    pub theta: DVector<f64>,
    pub h: DMatrix<f64>,
    pub noise_std: f64,
}

impl StaticSystem {
    /// `sqrt(theta' H theta + noise_std^2)`.
    pub fn output_std(&self) -> f64 {
        (self.theta.dot(&(&self.h * &self.theta)) + self.noise_std * self.noise_std).sqrt()
    }
}

/// `y = phi' B(q)/A(q) + d`, `phi ~ N(0, input_cov)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OeSystem {
    pub model: OeModel,
    pub input_cov: DMatrix<f64>,
    pub noise_std: f64,
}

impl OeSystem {
    /// Stationary output deviation `delta_inf`.
    pub fn output_std(&self) -> f64 {
        (self.model.output_variance(&self.input_cov) + self.noise_std * self.noise_std).sqrt()
    }
}

/// One simulated step; `phi` borrows the simulator's buffer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<'a> {
    pub phi: &'a [f64],
    pub y: f64,
    pub s: usize,
}

#[derive(Debug, Clone)]
struct NoiseSource {
    std: f64,
    rng: ChaCha8Rng,
}

impl NoiseSource {
    fn new(std: f64, seed: u64) -> Result<Self> {
        if !(std >= 0.0) || !std.is_finite() {
            return Err(Error::Config(format!("noise_std must be >= 0, got {std}")));
        }
        Ok(Self {
            std,
            rng: stream_rng(seed, NOISE_STREAM),
        })
    }

    fn draw(&mut self) -> f64 {
        if self.std == 0.0 {
            0.0
        } else {
            self.std * self.rng.sample::<f64, _>(StandardNormal)
        }
    }
}

#[derive(Debug, Clone)]
pub struct StaticSimulator {
    system: StaticSystem,
    spec: QuantizerSpec,
    sampler: MvnSampler,
    noise: NoiseSource,
    phi: Vec<f64>,
}

impl StaticSimulator {
    pub fn new(system: StaticSystem, spec: QuantizerSpec, seed: u64) -> Result<Self> {
        let n = system.theta.len();
        let sampler =
            MvnSampler::with_stream(DVector::zeros(n), system.h.clone(), seed, REGRESSOR_STREAM)?;
        let noise = NoiseSource::new(system.noise_std, seed)?;
        Ok(Self {
            system,
            spec,
            sampler,
            noise,
            phi: vec![0.0; n],
        })
    }

    pub fn step(&mut self) -> Observation<'_> {
        self.sampler.sample_into(&mut self.phi);
        let y = self
            .phi
            .iter()
            .zip(self.system.theta.iter())
            .map(|(p, t)| p * t)
            .sum::<f64>()
            + self.noise.draw();
        Observation {
            phi: &self.phi,
            y,
            s: self.spec.quantize(y),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OeSimulator {
    spec: QuantizerSpec,
    filter: OeFilter,
    sampler: MvnSampler,
    noise: NoiseSource,
    phi: Vec<f64>,
}

impl OeSimulator {
    pub fn new(system: OeSystem, spec: QuantizerSpec, seed: u64) -> Result<Self> {
        let n = system.model.input_dim();
        if system.input_cov.nrows() != n {
            return Err(Error::Config(format!(
                "input_cov is {}x{}, model input dimension is {n}",
                system.input_cov.nrows(),
                system.input_cov.ncols()
            )));
        }
        let sampler = MvnSampler::with_stream(
            DVector::zeros(n),
            system.input_cov.clone(),
            seed,
            REGRESSOR_STREAM,
        )?;
        let noise = NoiseSource::new(system.noise_std, seed)?;
        Ok(Self {
            spec,
            filter: OeFilter::new(system.model),
            sampler,
            noise,
            phi: vec![0.0; n],
        })
    }

    pub fn step(&mut self) -> Observation<'_> {
        self.sampler.sample_into(&mut self.phi);
        let y = self.filter.push(&self.phi) + self.noise.draw();
        Observation {
            phi: &self.phi,
            y,
            s: self.spec.quantize(y),
        }
    }
}

/// Owned `(phi, s)` stream of `steps` observations.
pub fn simulate_static(
    system: &StaticSystem,
    spec: &QuantizerSpec,
    seed: u64,
    steps: usize,
) -> Result<Vec<(Vec<f64>, usize)>> {
    let mut sim = StaticSimulator::new(system.clone(), spec.clone(), seed)?;
    Ok((0..steps)
        .map(|_| {
            let o = sim.step();
            (o.phi.to_vec(), o.s)
        })
        .collect())
}

pub fn simulate_oe(
    system: &OeSystem,
    spec: &QuantizerSpec,
    seed: u64,
    steps: usize,
) -> Result<Vec<(Vec<f64>, usize)>> {
    let mut sim = OeSimulator::new(system.clone(), spec.clone(), seed)?;
    Ok((0..steps)
        .map(|_| {
            let o = sim.step();
            (o.phi.to_vec(), o.s)
        })
        .collect())
}
