//! Standard normal density, distribution and quantile functions, plus seeded
//! multivariate Gaussian sampling.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const SQRT_TWO_PI: f64 = 2.506_628_274_631_000_5;

/// Standard normal density `exp(-x^2/2) / sqrt(2 pi)`.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_TWO_PI
}

/// Standard normal CDF, evaluated through the complementary error function so
/// both tails keep full relative precision.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

// Rational approximation of the normal quantile (P. J. Acklam), relative
// error about 1.15e-9 before refinement.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.024_25;

fn quantile_initial_guess(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Inverse of [`std_normal_cdf`] on the open interval `(0, 1)`.
///
/// The rational guess is polished with Newton steps on `F(x) - p` until the
/// correction drops below machine resolution (at most four steps).
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "normal quantile needs p in (0, 1), got {p}"
        )));
    }
    let mut x = quantile_initial_guess(p);
    for _ in 0..4 {
        let density = std_normal_pdf(x);
        if density == 0.0 {
            break;
        }
        let step = (std_normal_cdf(x) - p) / density;
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// Deterministic generator for `(seed, stream)`. Different streams of one seed
/// are independent ChaCha keystreams, so a replica can draw its regressors and
/// its noise from separate streams without coordinating offsets.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seeded sampler for `N(mean, covariance)` using a lower-triangular factor of
/// the covariance.
#[derive(Debug, Clone)]
pub struct MvnSampler {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    factor: DMatrix<f64>,
    seed: u64,
    rng: ChaCha8Rng,
    scratch: Vec<f64>,
}

impl MvnSampler {
    /// Builds a sampler on stream 0 of `seed`.
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>, seed: u64) -> Result<Self> {
        Self::with_stream(mean, covariance, seed, 0)
    }

    pub fn with_stream(
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
        seed: u64,
        stream: u64,
    ) -> Result<Self> {
        let n = mean.len();
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(Error::Dimension(format!(
                "covariance is {}x{}, mean has length {n}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        let factor = lower_factor(&covariance)?;
        Ok(Self {
            mean,
            covariance,
            factor,
            seed,
            rng: stream_rng(seed, stream),
            scratch: vec![0.0; n],
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// Writes one draw into `out` without allocating.
    pub fn sample_into(&mut self, out: &mut [f64]) {
        let n = self.mean.len();
        debug_assert_eq!(out.len(), n);
        for z in self.scratch.iter_mut() {
            *z = self.rng.sample(StandardNormal);
        }
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let mut acc = self.mean[i];
            for j in 0..=i {
                acc += self.factor[(i, j)] * self.scratch[j];
            }
            *o = acc;
        }
    }

    pub fn sample(&mut self) -> DVector<f64> {
        let mut out = vec![0.0; self.mean.len()];
        self.sample_into(&mut out);
        DVector::from_vec(out)
    }

    pub fn sample_mvn(&mut self, count: usize) -> Vec<DVector<f64>> {
        (0..count).map(|_| self.sample()).collect()
    }
}

/// Lower-triangular `L` with `L L^T = covariance`; rejects asymmetric or
/// non-positive-definite input.
pub fn lower_factor(covariance: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !covariance.is_square() {
        return Err(Error::Dimension("covariance must be square".into()));
    }
    let scale = covariance.amax().max(f64::MIN_POSITIVE);
    let n = covariance.nrows();
    for i in 0..n {
        for j in 0..i {
            if (covariance[(i, j)] - covariance[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::Factorization(format!(
                    "covariance is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    if covariance.iter().any(|v| !v.is_finite()) {
        return Err(Error::Factorization(
            "covariance has non-finite entries".into(),
        ));
    }
    covariance
        .clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Factorization("covariance is not positive definite".into()))
}
