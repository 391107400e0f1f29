//! Recursive WLS-type estimation of the scaled parameter `gamma = rho(delta) theta`.
//!
//! Regressing the raw levels on the Gaussian regressors is consistent for
//! `gamma`, because the cross-moment of level and regressor is
//! `rho(delta_y) H theta`. The parameter itself follows by dividing by the
//! gain at the current deviation estimate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quantizer::QuantizerSpec;
use crate::sim::simulate::{StaticSimulator, StaticSystem};

/// Recursive state `(gamma_hat, P)`.
#[derive(Debug, Clone)]
pub struct WlsEstimator {
    gamma_hat: DVector<f64>,
    p: DMatrix<f64>,
    beta_bounds: (f64, f64),
    k: u64,
    phi: DVector<f64>,
    p_phi: DVector<f64>,
}

impl WlsEstimator {
    pub fn new(p0: DMatrix<f64>, gamma0: DVector<f64>, beta_bounds: (f64, f64)) -> Result<Self> {
        let n = gamma0.len();
        if p0.nrows() != n || p0.ncols() != n {
            return Err(Error::Dimension(format!(
                "P0 is {}x{}, gamma0 has length {n}",
                p0.nrows(),
                p0.ncols()
            )));
        }
        if p0.clone().cholesky().is_none() || (&p0 - p0.transpose()).amax() > 1e-12 * p0.amax() {
            return Err(Error::Config(
                "P0 must be symmetric positive definite".into(),
            ));
        }
        let (lo, hi) = beta_bounds;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!(
                "beta bounds must satisfy 0 < low <= high < inf, got ({lo}, {hi})"
            )));
        }
        Ok(Self {
            gamma_hat: gamma0,
            p: p0,
            beta_bounds,
            k: 0,
            phi: DVector::zeros(n),
            p_phi: DVector::zeros(n),
        })
    }

    /// `P0 = scale * I_n`, `gamma0 = 0`.
    pub fn with_scaled_identity(n: usize, scale: f64, beta_bounds: (f64, f64)) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::Config(format!(
                "P0 scale must be positive, got {scale}"
            )));
        }
        Self::new(
            DMatrix::identity(n, n) * scale,
            DVector::zeros(n),
            beta_bounds,
        )
    }

    pub fn dim(&self) -> usize {
        self.gamma_hat.len()
    }

    pub fn gamma_hat(&self) -> &DVector<f64> {
        &self.gamma_hat
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn beta_bounds(&self) -> (f64, f64) {
        self.beta_bounds
    }

    /// One step of
    ///
    /// ```text
    /// alpha = 1 / (1/beta + phi' P phi)
    /// gamma = gamma + alpha P phi (s - phi' gamma)
    /// P     = P - alpha P phi phi' P
    /// ```
    pub fn update(&mut self, phi: &[f64], s: usize, beta: f64) -> Result<()> {
        let n = self.dim();
        if phi.len() != n {
            return Err(Error::Dimension(format!(
                "regressor has length {}, expected {n}",
                phi.len()
            )));
        }
        let (lo, hi) = self.beta_bounds;
        if !(beta >= lo && beta <= hi) {
            return Err(Error::Domain(format!("beta = {beta} outside [{lo}, {hi}]")));
        }
        self.phi.copy_from_slice(phi);
        self.p_phi.gemv(1.0, &self.p, &self.phi, 0.0);
        let alpha = 1.0 / (1.0 / beta + self.phi.dot(&self.p_phi));
        let residual = s as f64 - self.phi.dot(&self.gamma_hat);
        self.gamma_hat.axpy(alpha * residual, &self.p_phi, 1.0);
        self.p.ger(-alpha, &self.p_phi, &self.p_phi, 1.0);
        for i in 0..n {
            for j in 0..i {
                let avg = 0.5 * (self.p[(i, j)] + self.p[(j, i)]);
                self.p[(i, j)] = avg;
                self.p[(j, i)] = avg;
            }
        }
        self.k += 1;
        Ok(())
    }

    /// `theta_hat = gamma_hat / rho(delta_hat)`.
    pub fn theta_hat(&self, delta_hat: f64, spec: &QuantizerSpec) -> Result<DVector<f64>> {
        recover_theta(&self.gamma_hat, delta_hat, spec)
    }
}

pub fn recover_theta(
    gamma_hat: &DVector<f64>,
    delta_hat: f64,
    spec: &QuantizerSpec,
) -> Result<DVector<f64>> {
    Ok(divide_by_gain(gamma_hat, spec.rho(delta_hat)?))
}

pub fn divide_by_gain(gamma_hat: &DVector<f64>, gain: f64) -> DVector<f64> {
    gamma_hat / gain
}

/// One observation of a WLS history.
#[derive(Debug, Clone, PartialEq)]
pub struct WlsSample {
    pub phi: DVector<f64>,
    pub s: usize,
    pub beta: f64,
}

/// Batch solution `P_k = (sum beta phi phi' + P0^{-1})^{-1}`,
/// `gamma_k = P_k (sum beta s phi + P0^{-1} gamma0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchWls {
    pub gamma: DVector<f64>,
    pub p: DMatrix<f64>,
}

pub fn batch_wls_oracle(
    history: &[WlsSample],
    p0: &DMatrix<f64>,
    gamma0: &DVector<f64>,
) -> Result<BatchWls> {
    if history.is_empty() {
        return Err(Error::Domain("batch WLS needs a nonempty history".into()));
    }
    let p0_inv = p0
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("P0 is singular".into()))?;
    let mut info = p0_inv.clone();
    let mut rhs = &p0_inv * gamma0;
    for sample in history {
        info += sample.beta * &sample.phi * sample.phi.transpose();
        rhs += sample.beta * sample.s as f64 * &sample.phi;
    }
    let p = info
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("information matrix is singular".into()))?;
    let gamma = &p * rhs;
    Ok(BatchWls { gamma, p })
}

/// `sum beta (s - phi' g)^2 + (g - gamma0)' P0^{-1} (g - gamma0)`.
pub fn penalized_criterion(
    history: &[WlsSample],
    p0: &DMatrix<f64>,
    gamma0: &DVector<f64>,
    gamma: &DVector<f64>,
) -> Result<f64> {
    let p0_inv = p0
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("P0 is singular".into()))?;
    let fit: f64 = history
        .iter()
        .map(|x| {
            let r = x.s as f64 - x.phi.dot(gamma);
            x.beta * r * r
        })
        .sum();
    let d = gamma - gamma0;
    Ok(fit + d.dot(&(&p0_inv * &d)))
}

/// Analytic gradient of [`penalized_criterion`].
pub fn penalized_gradient(
    history: &[WlsSample],
    p0: &DMatrix<f64>,
    gamma0: &DVector<f64>,
    gamma: &DVector<f64>,
) -> Result<DVector<f64>> {
    let p0_inv = p0
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("P0 is singular".into()))?;
    let mut grad = 2.0 * &p0_inv * (gamma - gamma0);
    for x in history {
        let r = x.s as f64 - x.phi.dot(gamma);
        grad -= 2.0 * x.beta * r * &x.phi;
    }
    Ok(grad)
}

/// Norm of `(1/N) sum s_k phi_k - rho(delta_y) H theta` over `sample_count`
/// simulated steps, with the true `delta_y^2 = theta' H theta + noise^2`.
pub fn correlation_check(
    spec: &QuantizerSpec,
    system: &StaticSystem,
    sample_count: usize,
    seed: u64,
) -> Result<f64> {
    let n = system.theta.len();
    let mut sim = StaticSimulator::new(system.clone(), spec.clone(), seed)?;
    let mut acc = DVector::<f64>::zeros(n);
    for _ in 0..sample_count {
        let obs = sim.step();
        for (a, p) in acc.iter_mut().zip(obs.phi.iter()) {
            *a += obs.s as f64 * p;
        }
    }
    acc /= sample_count as f64;
    let target = spec.rho(system.output_std())? * (&system.h * &system.theta);
    Ok((acc - target).norm())
}
