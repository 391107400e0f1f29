//! Output-error identification through a truncated impulse-response regression.
//!
//! The model `y_k = phi_k' B(q) / A(q) + d_k` is first treated as a long FIR
//! regression on the stacked regressor `[phi_k; phi_{k-1}; ...; phi_{k-kappa}]`,
//! identified with the quantized two-step estimator. The rational coefficients
//! are then read off the estimated impulse response: the tail of the response
//! obeys the homogeneous recursion in `a`, which is solved in least squares,
//! and `b` follows by convolving `A(q)` with the head of the response.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quantizer::QuantizerSpec;
use crate::variance::{VarianceConfig, VarianceEstimator};
use crate::wls::WlsEstimator;

/// Largest admissible root modulus of the denominator.
const STABILITY_MARGIN: f64 = 1.0 - 1e-9;

/// Relative singular-value threshold for the rank gate on the Hankel-type
/// matrix.
pub const RANK_TOL: f64 = 1e-8;

/// `A(q) = 1 + a_1 q^-1 + ... + a_na q^-na`, `B(q) = b_0 + ... + b_nb q^-nb`
/// with vector-valued `b_j` of the input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct OeModel {
    a: Vec<f64>,
    b: Vec<DVector<f64>>,
}

impl OeModel {
    pub fn new(a: Vec<f64>, b: Vec<DVector<f64>>) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::Config("OE model needs at least b_0".into()));
        }
        let n = b[0].len();
        if n == 0 || b.iter().any(|bj| bj.len() != n) {
            return Err(Error::Config(
                "all b_j must share one nonzero input dimension".into(),
            ));
        }
        if a.iter()
            .chain(b.iter().flat_map(|bj| bj.iter()))
            .any(|v| !v.is_finite())
        {
            return Err(Error::Config("OE coefficients must be finite".into()));
        }
        if a.last().is_some_and(|&v| v == 0.0) {
            return Err(Error::Config(
                "leading denominator coefficient a_na must be nonzero".into(),
            ));
        }
        if b.last().is_some_and(|bj| bj.iter().all(|&v| v == 0.0)) {
            return Err(Error::Config(
                "leading numerator coefficient b_nb must be nonzero".into(),
            ));
        }
        let model = Self { a, b };
        let radius = model.max_pole_modulus();
        if !(radius < STABILITY_MARGIN) {
            return Err(Error::Config(format!(
                "A(q) is not stable: a pole has modulus {radius:.6} (must be < 1)"
            )));
        }
        Ok(model)
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[DVector<f64>] {
        &self.b
    }

    pub fn n_a(&self) -> usize {
        self.a.len()
    }

    pub fn n_b(&self) -> usize {
        self.b.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.b[0].len()
    }

    /// `[a_1..a_na, b_0', ..., b_nb']'`.
    pub fn theta_star(&self) -> DVector<f64> {
        let mut v = self.a.clone();
        for bj in &self.b {
            v.extend(bj.iter());
        }
        DVector::from_vec(v)
    }

    pub fn theta_star_len(&self) -> usize {
        self.n_a() + self.input_dim() * (self.n_b() + 1)
    }

    /// Poles of `B/A`: roots of `z^na + a_1 z^(na-1) + ... + a_na`.
    pub fn poles(&self) -> Vec<nalgebra::Complex<f64>> {
        let na = self.a.len();
        if na == 0 {
            return Vec::new();
        }
        let mut companion = DMatrix::<f64>::zeros(na, na);
        for (j, &aj) in self.a.iter().enumerate() {
            companion[(0, j)] = -aj;
        }
        for i in 1..na {
            companion[(i, i - 1)] = 1.0;
        }
        companion.complex_eigenvalues().iter().copied().collect()
    }

    pub fn max_pole_modulus(&self) -> f64 {
        self.poles().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Smallest norm of `B` evaluated at a pole; zero exactly when `A` and
    /// `B` share a factor.
    pub fn coprimality_margin(&self) -> f64 {
        self.poles()
            .iter()
            .map(|&z| {
                // B(z) in the forward variable: sum_j b_j z^(nb - j).
                let nb = self.n_b();
                let n = self.input_dim();
                let mut norm2 = 0.0;
                for c in 0..n {
                    let mut acc = nalgebra::Complex::new(0.0, 0.0);
                    for (j, bj) in self.b.iter().enumerate() {
                        acc += bj[c] * z.powu((nb - j) as u32);
                    }
                    norm2 += acc.norm_sqr();
                }
                norm2.sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_coprime(&self, tol: f64) -> bool {
        self.coprimality_margin() > tol
    }

    /// Stationary output variance `sum_i h_i' H h_i` of the noise-free part
    /// for input covariance `H`, truncated once the response has decayed by
    /// twenty orders of magnitude.
    pub fn output_variance(&self, input_cov: &DMatrix<f64>) -> f64 {
        let r = self.max_pole_modulus();
        let decay = if r > 0.0 {
            ((1e-20f64).ln() / r.ln()).ceil() as usize
        } else {
            0
        };
        let len = self.n_a() + self.n_b() + 1 + decay.min(1_000_000);
        impulse_response(self, len)
            .iter()
            .map(|h| h.dot(&(input_cov * h)))
            .sum()
    }
}

/// Noise-free OE filter `A(q) y = phi' B(q)` with zero initial conditions.
#[derive(Debug, Clone)]
pub struct OeFilter {
    model: OeModel,
    // Newest first; inputs hold the last nb + 1 regressors.
    inputs: Vec<DVector<f64>>,
    outputs: Vec<f64>,
}

impl OeFilter {
    pub fn new(model: OeModel) -> Self {
        let n = model.input_dim();
        let inputs = vec![DVector::zeros(n); model.n_b() + 1];
        let outputs = vec![0.0; model.n_a()];
        Self {
            model,
            inputs,
            outputs,
        }
    }

    pub fn reset(&mut self) {
        self.inputs.iter_mut().for_each(|v| v.fill(0.0));
        self.outputs.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn model(&self) -> &OeModel {
        &self.model
    }

    /// Feeds `phi_k` and returns the noise-free output `y0_k`.
    pub fn push(&mut self, phi: &[f64]) -> f64 {
        self.inputs.rotate_right(1);
        self.inputs[0].copy_from_slice(phi);
        let mut y = 0.0;
        for (bj, past) in self.model.b.iter().zip(self.inputs.iter()) {
            y += bj.dot(past);
        }
        for (ai, past) in self.model.a.iter().zip(self.outputs.iter()) {
            y -= ai * past;
        }
        if !self.outputs.is_empty() {
            self.outputs.rotate_right(1);
            self.outputs[0] = y;
        }
        y
    }
}

/// First `count` impulse-response coefficients `h_0, h_1, ...` from
/// `h_i + a_1 h_{i-1} + ... + a_na h_{i-na} = b_i` (zero for `i > nb`).
pub fn impulse_response(model: &OeModel, count: usize) -> Vec<DVector<f64>> {
    let n = model.input_dim();
    let mut h: Vec<DVector<f64>> = Vec::with_capacity(count);
    for i in 0..count {
        let mut hi = model.b.get(i).cloned().unwrap_or_else(|| DVector::zeros(n));
        for (l, &al) in model.a.iter().enumerate() {
            if let Some(prev) = i.checked_sub(l + 1) {
                hi.axpy(-al, &h[prev], 1.0);
            }
        }
        h.push(hi);
    }
    h
}

fn h_at(h: &[DVector<f64>], idx: isize, n: usize) -> DVector<f64> {
    if idx < 0 {
        DVector::zeros(n)
    } else {
        h[idx as usize].clone()
    }
}

/// `Gamma` of shape `n(kappa - nb) x na`; row block `r` holds
/// `[h_{nb+r}, h_{nb+r-1}, ..., h_{nb+r+1-na}]`.
pub fn build_gamma_matrix(
    h_hat: &[DVector<f64>],
    n_a: usize,
    n_b: usize,
    kappa: usize,
) -> Result<DMatrix<f64>> {
    if kappa < n_a + n_b {
        return Err(Error::Dimension(format!(
            "kappa = {kappa} is below n_a + n_b = {}",
            n_a + n_b
        )));
    }
    if h_hat.len() < kappa {
        return Err(Error::Dimension(format!(
            "need at least {kappa} impulse-response coefficients, got {}",
            h_hat.len()
        )));
    }
    let n = h_hat.first().map_or(0, |h| h.len());
    let blocks = kappa - n_b;
    let mut gamma = DMatrix::zeros(n * blocks, n_a);
    for r in 0..blocks {
        for i in 0..n_a {
            let hv = h_at(h_hat, (n_b + r) as isize - i as isize, n);
            gamma.view_mut((r * n, i), (n, 1)).copy_from(&hv);
        }
    }
    Ok(gamma)
}

/// Recovers `[a; b_0; ...; b_nb]` from `h_0..h_kappa`.
///
/// `a` solves `Gamma a = -[h_{nb+1}; ...; h_kappa]` through the pseudo-inverse
/// when `Gamma` has full column rank (smallest singular value above
/// `RANK_TOL` times the largest), and is zero otherwise.
pub fn recover(
    h_hat: &[DVector<f64>],
    n_a: usize,
    n_b: usize,
    kappa: usize,
) -> Result<DVector<f64>> {
    if h_hat.len() < kappa + 1 {
        return Err(Error::Dimension(format!(
            "need {} impulse-response coefficients, got {}",
            kappa + 1,
            h_hat.len()
        )));
    }
    let n = h_hat[0].len();
    let a_hat = if n_a == 0 {
        if kappa < n_b {
            return Err(Error::Dimension(format!(
                "kappa = {kappa} is below n_b = {n_b}"
            )));
        }
        DVector::zeros(0)
    } else {
        let gamma = build_gamma_matrix(h_hat, n_a, n_b, kappa)?;
        let mut rhs = DVector::zeros(n * (kappa - n_b));
        for (r, idx) in (n_b + 1..=kappa).enumerate() {
            rhs.rows_mut(r * n, n).copy_from(&(-&h_hat[idx]));
        }
        let svd = gamma.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smax > 0.0 && smin > RANK_TOL * smax {
            svd.solve(&rhs, 0.0)
                .map_err(|e| Error::SingularMatrix(e.to_string()))?
        } else {
            DVector::zeros(n_a)
        }
    };
    let mut theta = Vec::with_capacity(n_a + n * (n_b + 1));
    theta.extend(a_hat.iter());
    for j in 0..=n_b {
        let mut bj = h_hat[j].clone();
        for i in 1..=n_a.min(j) {
            bj.axpy(a_hat[i - 1], &h_hat[j - i], 1.0);
        }
        theta.extend(bj.iter());
    }
    Ok(DVector::from_vec(theta))
}

/// Knobs for [`DmEstimator`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmConfig {
    pub kappa: usize,
    pub p0_scale: f64,
    pub beta: f64,
    pub variance: VarianceConfig,
    /// Recompute the rational coefficients every this many steps.
    pub recover_interval: u64,
    /// Observations withheld from the variance estimator at the start.
    pub burn_in: u64,
}

impl DmConfig {
    /// `kappa = 2 (n_a + n_b)` with unit weights and `P0 = I / 10`.
    pub fn for_orders(n_a: usize, n_b: usize) -> Self {
        Self {
            kappa: (2 * (n_a + n_b)).max(1),
            p0_scale: 0.1,
            beta: 1.0,
            variance: VarianceConfig::default(),
            recover_interval: 1,
            burn_in: 0,
        }
    }
}

/// Recursive state of the Durbin-type OE estimator.
#[derive(Debug, Clone)]
pub struct DmEstimator {
    spec: QuantizerSpec,
    cfg: DmConfig,
    n: usize,
    n_a: usize,
    n_b: usize,
    stacked: Vec<f64>,
    wls: WlsEstimator,
    var_est: VarianceEstimator,
    h_hat: Vec<DVector<f64>>,
    theta_star_hat: DVector<f64>,
    k: u64,
}

impl DmEstimator {
    pub fn new(
        spec: QuantizerSpec,
        n: usize,
        n_a: usize,
        n_b: usize,
        cfg: DmConfig,
    ) -> Result<Self> {
        if cfg.kappa < n_a + n_b {
            return Err(Error::Config(format!(
                "kappa = {} is below n_a + n_b = {}",
                cfg.kappa,
                n_a + n_b
            )));
        }
        if cfg.recover_interval == 0 {
            return Err(Error::Config("recover_interval must be at least 1".into()));
        }
        if n == 0 {
            return Err(Error::Config("input dimension must be positive".into()));
        }
        let dim = (cfg.kappa + 1) * n;
        let wls = WlsEstimator::with_scaled_identity(dim, cfg.p0_scale, (cfg.beta, cfg.beta))?;
        let var_est = VarianceEstimator::new(spec.clone(), cfg.variance)?;
        Ok(Self {
            spec,
            n,
            n_a,
            n_b,
            stacked: vec![0.0; dim],
            wls,
            var_est,
            h_hat: vec![DVector::zeros(n); cfg.kappa + 1],
            theta_star_hat: DVector::zeros(n_a + n * (n_b + 1)),
            k: 0,
            cfg,
        })
    }

    pub fn kappa(&self) -> usize {
        self.cfg.kappa
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    /// Shifts `phi` into the stacked regressor, newest block first.
    pub fn build_regressor(&mut self, phi: &[f64]) -> Result<&[f64]> {
        if phi.len() != self.n {
            return Err(Error::Dimension(format!(
                "input has length {}, expected {}",
                phi.len(),
                self.n
            )));
        }
        let len = self.stacked.len();
        self.stacked.copy_within(0..len - self.n, self.n);
        self.stacked[..self.n].copy_from_slice(phi);
        Ok(&self.stacked)
    }

    pub fn dm_update(&mut self, phi: &[f64], s: usize) -> Result<()> {
        self.build_regressor(phi)?;
        self.wls.update(&self.stacked, s, self.cfg.beta)?;
        self.k += 1;
        if self.k > self.cfg.burn_in {
            self.var_est.ml_update(s)?;
        }
        if self.k.is_multiple_of(self.cfg.recover_interval) {
            self.refresh()?;
        }
        Ok(())
    }

    /// Recomputes `h_hat = gamma_hat / rho(delta_hat)` and the rational
    /// coefficients.
    pub fn refresh(&mut self) -> Result<()> {
        let gain = self.spec.rho(self.var_est.delta_hat())?;
        let gamma = self.wls.gamma_hat();
        for (i, hi) in self.h_hat.iter_mut().enumerate() {
            for c in 0..self.n {
                hi[c] = gamma[i * self.n + c] / gain;
            }
        }
        self.theta_star_hat = recover(&self.h_hat, self.n_a, self.n_b, self.cfg.kappa)?;
        Ok(())
    }

    pub fn h_hat(&self) -> &[DVector<f64>] {
        &self.h_hat
    }

    pub fn theta_star_hat(&self) -> &DVector<f64> {
        &self.theta_star_hat
    }

    pub fn delta_hat(&self) -> f64 {
        self.var_est.delta_hat()
    }

    pub fn wls(&self) -> &WlsEstimator {
        &self.wls
    }

    pub fn variance_estimator(&self) -> &VarianceEstimator {
        &self.var_est
    }
}
