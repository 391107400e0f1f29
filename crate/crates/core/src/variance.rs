//! ML-type recursive estimation of the output standard deviation from level
//! frequencies.
//!
//! Each threshold `C_j` yields its own estimate by inverting the empirical
//! CDF at that threshold. The per-threshold estimates are combined with the
//! weights that minimise the asymptotic variance of the combination, using the
//! limit covariance evaluated at the previous estimate, and the result is
//! clamped to `[c, 1/c]`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gauss::{std_normal_cdf, std_normal_pdf, std_normal_quantile};
use crate::quantizer::QuantizerSpec;

/// Default lower projection bound `c`.
pub const DEFAULT_C: f64 = 1e-6;
/// Default replacement `c*` for non-invertible empirical fractions.
pub const DEFAULT_C_STAR: f64 = 1e-6;

/// Running level frequencies `S_k^i`.
///
/// Frequencies are kept as exact integer counts and reported as
/// `count / k`, which is the closed form of the convex-combination recursion
/// `S_k = (k-1)/k S_{k-1} + 1/k 1{s_k = i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalHistogram {
    k: u64,
    counts: Vec<u64>,
}

impl EmpiricalHistogram {
    /// Empty histogram over `levels` cells (`m + 1` for `m` thresholds).
    pub fn new(levels: usize) -> Self {
        Self {
            k: 0,
            counts: vec![0; levels],
        }
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn levels(&self) -> usize {
        self.counts.len()
    }

    pub fn freq(&self, level: usize) -> f64 {
        if self.k == 0 {
            0.0
        } else {
            self.counts[level] as f64 / self.k as f64
        }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|i| self.freq(i)).collect()
    }

    /// Fraction of observations with level in `range`.
    fn fraction(&self, range: std::ops::Range<usize>) -> f64 {
        if self.k == 0 {
            return 0.0;
        }
        let c: u64 = self.counts[range].iter().sum();
        c as f64 / self.k as f64
    }

    pub fn update(&mut self, s: usize) -> Result<()> {
        if s >= self.counts.len() {
            return Err(Error::Range {
                level: s,
                max: self.counts.len() - 1,
            });
        }
        self.k += 1;
        self.counts[s] += 1;
        Ok(())
    }
}

/// Functional form of [`EmpiricalHistogram::update`].
pub fn update_histogram(hist: &EmpiricalHistogram, s: usize) -> Result<EmpiricalHistogram> {
    let mut next = hist.clone();
    next.update(s)?;
    Ok(next)
}

/// Replaces the non-invertible fractions `0`, `1/2` and `1` by `c_star`.
pub fn modified_fraction(p: f64, c_star: f64) -> f64 {
    if p == 0.0 || p == 0.5 || p == 1.0 {
        c_star
    } else {
        p
    }
}

fn checked_c_star(c_star: f64) -> Result<f64> {
    if c_star > 0.0 && c_star < 1.0 && c_star != 0.5 {
        Ok(c_star)
    } else {
        Err(Error::Domain(format!(
            "c_star must lie in (0, 1) \\ {{1/2}}, got {c_star}"
        )))
    }
}

/// Estimate of the output deviation from threshold `j` (1-based).
///
/// A nonzero threshold inverts the empirical CDF at itself. A zero threshold
/// carries no scale information, so it borrows `C_1` (when `j > 1`) or `C_m`
/// (when `j = 1`) and inverts the CDF value there, rebuilt from the mass of
/// the cells between that threshold and zero.
pub fn per_threshold_estimate(
    spec: &QuantizerSpec,
    hist: &EmpiricalHistogram,
    j: usize,
    c_star: f64,
) -> Result<f64> {
    let m = spec.m();
    if j == 0 || j > m {
        return Err(Error::Domain(format!(
            "threshold index {j} outside 1..={m}"
        )));
    }
    if hist.k() == 0 {
        return Err(Error::Domain("histogram is empty".into()));
    }
    if hist.levels() != m + 1 {
        return Err(Error::Dimension(format!(
            "histogram has {} levels, quantizer has {}",
            hist.levels(),
            m + 1
        )));
    }
    let c = spec.thresholds();
    let cj = c[j - 1];
    let (numerator, fraction) = if cj != 0.0 {
        (cj, hist.fraction(0..j))
    } else if j > 1 {
        (c[0], (0.5 - hist.fraction(1..j)).clamp(0.0, 1.0))
    } else {
        (c[m - 1], (0.5 + hist.fraction(1..m)).clamp(0.0, 1.0))
    };
    Ok(numerator / std_normal_quantile(modified_fraction(fraction, c_star))?)
}

/// Clamp onto `[c, 1/c]`.
pub fn project(x: f64, c: f64) -> f64 {
    x.clamp(c, 1.0 / c)
}

/// Plug-in blocks of the limit covariance of the per-threshold estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticBlocks {
    /// Diagonal of `U`: `f(C_i/delta) C_i / delta^2`.
    pub u: DVector<f64>,
    /// Correction for a zero threshold.
    pub g: DMatrix<f64>,
    /// `W_{u,v} = F_{min(u,v)}`.
    pub w_mat: DMatrix<f64>,
    /// `F_i = F(C_i / delta)`.
    pub w: DVector<f64>,
}

impl AsymptoticBlocks {
    pub fn m(&self) -> usize {
        self.u.len()
    }

    pub fn u_plus_g(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.u) + &self.g
    }

    pub fn u_plus_g_transpose(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.u) + self.g.transpose()
    }

    /// `W - w w^T`, the covariance of the empirical CDF at the thresholds.
    pub fn centered_w(&self) -> DMatrix<f64> {
        &self.w_mat - &self.w * self.w.transpose()
    }

    /// `X = (U+G)(W - w w^T)^{-1}(U+G^T)`, the inverse of the limit of
    /// `k V_k`.
    pub fn information_matrix(&self) -> Result<DMatrix<f64>> {
        let chol = self
            .centered_w()
            .cholesky()
            .ok_or_else(|| Error::SingularMatrix("W - w w^T is not positive definite".into()))?;
        let right = chol.solve(&self.u_plus_g_transpose());
        Ok(self.u_plus_g() * right)
    }
}

/// Evaluates the blocks at `delta`; `c` is the projection bound the value
/// must respect.
pub fn build_blocks(spec: &QuantizerSpec, delta: f64, c: f64) -> Result<AsymptoticBlocks> {
    if !(delta >= c && delta <= 1.0 / c) {
        return Err(Error::Domain(format!(
            "blocks need delta in [{c}, {}], got {delta}",
            1.0 / c
        )));
    }
    Ok(blocks_at(spec, delta))
}

fn blocks_at(spec: &QuantizerSpec, delta: f64) -> AsymptoticBlocks {
    let c = spec.thresholds();
    let m = c.len();
    let big_f: Vec<f64> = c.iter().map(|&ci| std_normal_cdf(ci / delta)).collect();
    let small_f: Vec<f64> = c
        .iter()
        .map(|&ci| std_normal_pdf(ci / delta) * ci / (delta * delta))
        .collect();
    let mut g = DMatrix::zeros(m, m);
    for (j, &cj) in c.iter().enumerate() {
        if cj != 0.0 {
            continue;
        }
        if j > 0 {
            g[(0, j)] = small_f[0];
            g[(j, j)] = -small_f[0];
        } else {
            g[(m - 1, 0)] = small_f[m - 1];
            g[(0, 0)] = -small_f[m - 1];
        }
    }
    let w_mat = DMatrix::from_fn(m, m, |u, v| big_f[u.min(v)]);
    AsymptoticBlocks {
        u: DVector::from_vec(small_f),
        g,
        w_mat,
        w: DVector::from_vec(big_f),
    }
}

/// Gauss–Markov weights `X 1 / (1^T X 1)` minimising `mu^T V mu` subject to
/// `sum(mu) = 1`.
pub fn compute_weights(blocks: &AsymptoticBlocks) -> Result<DVector<f64>> {
    let m = blocks.m();
    if m == 1 {
        return Ok(DVector::from_element(1, 1.0));
    }
    let x = blocks.information_matrix()?;
    let v = x.column_sum();
    let total = v.sum();
    if !total.is_finite() || total.abs() < f64::MIN_POSITIVE || v.iter().any(|e| !e.is_finite()) {
        return Err(Error::SingularMatrix(
            "weight normaliser is degenerate".into(),
        ));
    }
    let mut mu = v / total;
    let rest: f64 = mu.rows(0, m - 1).sum();
    mu[m - 1] = 1.0 - rest;
    Ok(mu)
}

/// Fisher information per observation about the deviation,
/// `sum_{i=0}^{m} (f_{i+1} - f_i)^2 / (F_{i+1} - F_i)` with the conventions
/// `F_0 = 0, F_{m+1} = 1, f_0 = f_{m+1} = 0`.
pub fn fisher_information(spec: &QuantizerSpec, delta: f64) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Domain(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let c = spec.thresholds();
    let mut big = Vec::with_capacity(c.len() + 2);
    let mut small = Vec::with_capacity(c.len() + 2);
    big.push(0.0);
    small.push(0.0);
    for &ci in c {
        big.push(std_normal_cdf(ci / delta));
        small.push(std_normal_pdf(ci / delta) * ci / (delta * delta));
    }
    big.push(1.0);
    small.push(0.0);
    let mut info = 0.0;
    for l in 0..=c.len() {
        let df = small[l + 1] - small[l];
        let dp = big[l + 1] - big[l];
        if !(dp > 0.0) {
            return Err(Error::Domain(format!(
                "cell {l} has zero probability at delta = {delta}"
            )));
        }
        info += df * df / dp;
    }
    Ok(info)
}

/// Cramér–Rao lower bound `sigma_CR(k)` on the variance of any unbiased
/// estimate of the deviation from `k` quantized samples.
pub fn cr_lower_bound(spec: &QuantizerSpec, delta: f64, k: u64) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("sample count must be positive".into()));
    }
    Ok(1.0 / (fisher_information(spec, delta)? * k as f64))
}

/// `lim k V_k = (U+G^T)^{-1}(W - w w^T)(U+G)^{-1}` at the true deviation.
pub fn asymptotic_covariance_limit(spec: &QuantizerSpec, delta: f64) -> Result<DMatrix<f64>> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Domain(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let blocks = blocks_at(spec, delta);
    let ug_inv = blocks
        .u_plus_g()
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("U + G is singular".into()))?;
    let ugt_inv = blocks
        .u_plus_g_transpose()
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("U + G^T is singular".into()))?;
    Ok(ugt_inv * blocks.centered_w() * ug_inv)
}

/// Knobs for [`VarianceEstimator`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceConfig {
    pub c: f64,
    pub c_star: f64,
    pub delta0: f64,
    /// Recompute the combination weights every this many steps.
    pub weight_interval: u64,
}

impl Default for VarianceConfig {
    fn default() -> Self {
        Self {
            c: DEFAULT_C,
            c_star: DEFAULT_C_STAR,
            delta0: 1.0,
            weight_interval: 1,
        }
    }
}

/// Recursive state of the ML-type deviation estimator.
#[derive(Debug, Clone)]
pub struct VarianceEstimator {
    spec: QuantizerSpec,
    cfg: VarianceConfig,
    hist: EmpiricalHistogram,
    delta_hat: f64,
    per_threshold: Vec<f64>,
    mu_hat: DVector<f64>,
    weight_fallbacks: u64,
}

impl VarianceEstimator {
    pub fn new(spec: QuantizerSpec, cfg: VarianceConfig) -> Result<Self> {
        if !(cfg.c > 0.0 && cfg.c < 1.0) {
            return Err(Error::Config(format!(
                "c must lie in (0, 1), got {}",
                cfg.c
            )));
        }
        checked_c_star(cfg.c_star).map_err(|e| Error::Config(e.to_string()))?;
        if !(cfg.delta0 >= cfg.c && cfg.delta0 <= 1.0 / cfg.c) {
            return Err(Error::Config(format!(
                "delta0 = {} outside [c, 1/c]",
                cfg.delta0
            )));
        }
        if cfg.weight_interval == 0 {
            return Err(Error::Config("weight_interval must be at least 1".into()));
        }
        let m = spec.m();
        Ok(Self {
            hist: EmpiricalHistogram::new(m + 1),
            delta_hat: cfg.delta0,
            per_threshold: vec![0.0; m],
            mu_hat: DVector::from_element(m, 1.0 / m as f64),
            weight_fallbacks: 0,
            spec,
            cfg,
        })
    }

    pub fn spec(&self) -> &QuantizerSpec {
        &self.spec
    }

    pub fn config(&self) -> &VarianceConfig {
        &self.cfg
    }

    pub fn delta_hat(&self) -> f64 {
        self.delta_hat
    }

    pub fn per_threshold(&self) -> &[f64] {
        &self.per_threshold
    }

    pub fn mu_hat(&self) -> &DVector<f64> {
        &self.mu_hat
    }

    pub fn histogram(&self) -> &EmpiricalHistogram {
        &self.hist
    }

    pub fn k(&self) -> u64 {
        self.hist.k()
    }

    /// Steps at which the weight solve failed and the previous weights were
    /// kept. Only happens while the estimate sits near the projection bounds.
    pub fn weight_fallbacks(&self) -> u64 {
        self.weight_fallbacks
    }

    /// Consumes one level and returns the new estimate.
    pub fn ml_update(&mut self, s: usize) -> Result<f64> {
        self.hist.update(s)?;
        let m = self.spec.m();
        for j in 1..=m {
            self.per_threshold[j - 1] =
                per_threshold_estimate(&self.spec, &self.hist, j, self.cfg.c_star)?;
        }
        if m > 1 && (self.hist.k() - 1).is_multiple_of(self.cfg.weight_interval) {
            // Blocks use the previous estimate.
            match build_blocks(&self.spec, self.delta_hat, self.cfg.c)
                .and_then(|b| compute_weights(&b))
            {
                Ok(mu) => self.mu_hat = mu,
                Err(_) => self.weight_fallbacks += 1,
            }
        }
        let combined: f64 = self
            .per_threshold
            .iter()
            .zip(self.mu_hat.iter())
            .map(|(d, mu)| d * mu)
            .sum();
        self.delta_hat = project(combined, self.cfg.c);
        Ok(self.delta_hat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(t: &[f64]) -> QuantizerSpec {
        QuantizerSpec::new(t.to_vec()).unwrap()
    }

    fn hist_from(levels: usize, stream: &[usize]) -> EmpiricalHistogram {
        let mut h = EmpiricalHistogram::new(levels);
        for &s in stream {
            h.update(s).unwrap();
        }
        h
    }

    #[test]
    fn histogram_updates() {
        let h = update_histogram(&EmpiricalHistogram::new(3), 1).unwrap();
        assert_eq!(h.frequencies(), vec![0.0, 1.0, 0.0]);
        assert_eq!(h.k(), 1);
        let h = hist_from(3, &[0, 2]);
        assert_eq!(h.frequencies(), vec![0.5, 0.0, 0.5]);
        assert_eq!(h.k(), 2);
        assert!(matches!(
            EmpiricalHistogram::new(3).update(3),
            Err(Error::Range { level: 3, max: 2 })
        ));
    }

    #[test]
    fn histogram_matches_recursion() {
        let stream: Vec<usize> = (0..997).map(|i| (i * 7 + i / 3) % 4).collect();
        let mut rec = [0.0f64; 4];
        let mut h = EmpiricalHistogram::new(4);
        for (idx, &s) in stream.iter().enumerate() {
            let k = (idx + 1) as f64;
            for (i, r) in rec.iter_mut().enumerate() {
                *r = (k - 1.0) / k * *r + if i == s { 1.0 / k } else { 0.0 };
            }
            h.update(s).unwrap();
            let f = h.frequencies();
            assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..4 {
                assert!((f[i] - rec[i]).abs() < 1e-12);
                assert_eq!(h.counts()[i] as f64, (f[i] * h.k() as f64).round());
            }
        }
    }

    #[test]
    fn modification_rule() {
        assert_eq!(modified_fraction(0.0, 1e-6), 1e-6);
        assert_eq!(modified_fraction(0.3, 1e-6), 0.3);
        assert_eq!(modified_fraction(0.5, 1e-6), 1e-6);
        assert_eq!(modified_fraction(1.0, 1e-6), 1e-6);
    }

    #[test]
    fn binary_mle_estimate() {
        // k = 10^6 with S^0 rounded to the nearest count.
        let q = spec(&[1.0]);
        let mut h = EmpiricalHistogram::new(2);
        h.k = 10_000_000_000;
        h.counts = vec![8_413_447_461, 1_586_552_539];
        let d = per_threshold_estimate(&q, &h, 1, 1e-6).unwrap();
        assert!((d - 1.0).abs() < 1e-9);
    }

    #[test]
    fn binary_estimate_at_half_uses_c_star() {
        let q = spec(&[1.0]);
        let h = hist_from(2, &[0, 1]);
        let d = per_threshold_estimate(&q, &h, 1, 1e-6).unwrap();
        assert_eq!(d, 1.0 / std_normal_quantile(1e-6).unwrap());
        assert!(d < 0.0);
    }

    #[test]
    fn zero_threshold_first_position() {
        let q = spec(&[0.0, 1.0]);
        let mut h = EmpiricalHistogram::new(3);
        h.k = 100;
        h.counts = vec![45, 35, 20];
        let d = per_threshold_estimate(&q, &h, 1, 1e-6).unwrap();
        let expected = 1.0 / std_normal_quantile(0.85).unwrap();
        assert!((d - expected).abs() < 1e-12);
        // Second threshold is nonzero: C_2 / F^{-1}(S^0 + S^1).
        let d2 = per_threshold_estimate(&q, &h, 2, 1e-6).unwrap();
        assert!((d2 - 1.0 / std_normal_quantile(0.8).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn zero_threshold_later_position() {
        let q = spec(&[-1.0, 0.0, 1.0]);
        let mut h = EmpiricalHistogram::new(4);
        h.k = 100;
        h.counts = vec![16, 30, 38, 16];
        let d = per_threshold_estimate(&q, &h, 2, 1e-6).unwrap();
        let expected = -1.0 / std_normal_quantile(0.5 - 0.30).unwrap();
        assert!((d - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_threshold_overshoot_is_clamped() {
        // All mass in (0, C_m]: F(0) + 1 overshoots, clamped to 1, replaced by c*.
        let q = spec(&[0.0, 1.0]);
        let h = hist_from(3, &[1, 1, 1]);
        let d = per_threshold_estimate(&q, &h, 1, 1e-6).unwrap();
        assert_eq!(d, 1.0 / std_normal_quantile(1e-6).unwrap());
    }

    #[test]
    fn blocks_scalar() {
        let b = build_blocks(&spec(&[1.0]), 1.0, DEFAULT_C).unwrap();
        assert!((b.u[0] - 0.241_970_7).abs() < 1e-7);
        assert_eq!(b.g[(0, 0)], 0.0);
        assert!((b.w_mat[(0, 0)] - 0.841_344_7).abs() < 1e-7);
        assert!((b.w[0] - 0.841_344_7).abs() < 1e-7);
    }

    #[test]
    fn blocks_zero_threshold_first() {
        let b = build_blocks(&spec(&[0.0, 1.0]), 1.0, DEFAULT_C).unwrap();
        let f2 = std_normal_pdf(1.0);
        assert_eq!(b.g.iter().filter(|v| **v != 0.0).count(), 2);
        assert_eq!(b.g[(1, 0)], f2);
        assert_eq!(b.g[(0, 0)], -f2);
        let b = build_blocks(&spec(&[-1.0, 0.0, 1.0]), 1.0, DEFAULT_C).unwrap();
        assert_eq!(b.g[(0, 1)], b.u[0]);
        assert_eq!(b.g[(1, 1)], -b.u[0]);
        assert_eq!(b.g.iter().filter(|v| **v != 0.0).count(), 2);
        let b = build_blocks(&spec(&[0.5, 1.0, 2.0]), 0.7, DEFAULT_C).unwrap();
        assert!(b.g.iter().all(|v| *v == 0.0));
        assert!(matches!(
            build_blocks(&spec(&[1.0]), 1e-7, DEFAULT_C),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            build_blocks(&spec(&[1.0]), 1e7, DEFAULT_C),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn weights_single_threshold() {
        let b = build_blocks(&spec(&[1.3]), 0.8, DEFAULT_C).unwrap();
        assert_eq!(compute_weights(&b).unwrap().as_slice(), &[1.0]);
    }

    #[test]
    fn weights_match_dense_inverse() {
        for t in [
            &[0.0, 1.0][..],
            &[1.0, 2.0],
            &[-1.0, 0.0, 1.0],
            &[-0.5, 0.4, 1.2, 2.0],
        ] {
            let b = build_blocks(&spec(t), 1.0, DEFAULT_C).unwrap();
            let inv = b.centered_w().try_inverse().unwrap();
            let x = b.u_plus_g() * inv * b.u_plus_g_transpose();
            let ones = DVector::from_element(t.len(), 1.0);
            let num = &x * &ones;
            let oracle = &num / ones.dot(&num);
            let mu = compute_weights(&b).unwrap();
            assert!((mu.sum() - 1.0).abs() < 1e-14);
            assert!((&mu - &oracle).amax() < 1e-10, "{t:?}");
        }
    }

    #[test]
    fn weights_minimise_limit_variance_on_grid() {
        let q = spec(&[1.0, 2.0]);
        let v = asymptotic_covariance_limit(&q, 1.0).unwrap();
        let mu = compute_weights(&build_blocks(&q, 1.0, DEFAULT_C).unwrap()).unwrap();
        let best = mu.dot(&(&v * &mu));
        for i in -300..=400 {
            let a = i as f64 * 0.01;
            let g = DVector::from_vec(vec![a, 1.0 - a]);
            assert!(best <= g.dot(&(&v * &g)) + 1e-12, "mu1 = {a}");
        }
    }

    #[test]
    fn projection() {
        assert_eq!(project(0.5, 1e-6), 0.5);
        assert_eq!(project(-3.0, 1e-6), 1e-6);
        assert_eq!(project(1e9, 1e-6), 1e6);
        let pts = [-5.0, -1e-7, 0.0, 1e-6, 0.3, 2.0, 1e5, 3e6, 1e12];
        for &a in &pts {
            for &b in &pts {
                assert!((project(a, 1e-6) - project(b, 1e-6)).abs() <= (a - b).abs());
            }
        }
    }

    #[test]
    fn cr_bound_single_threshold() {
        let q = spec(&[1.0]);
        let f1 = std_normal_pdf(1.0);
        let big = std_normal_cdf(1.0);
        let closed = big * (1.0 - big) / (f1 * f1);
        let kcr = cr_lower_bound(&q, 1.0, 1).unwrap();
        assert!((kcr - closed).abs() < 1e-12);
        assert!((kcr - 2.2799).abs() < 5e-4);
        for k in [1u64, 17, 10_000] {
            assert!((k as f64 * cr_lower_bound(&q, 1.0, k).unwrap() - kcr).abs() < 1e-12);
        }
        // The scale information peaks near C = 1.6 delta: C = 2 delta is more
        // informative than C = delta, C = 3 delta much less.
        let closed_at = |c: f64| {
            let big = std_normal_cdf(c);
            let f = std_normal_pdf(c) * c;
            big * (1.0 - big) / (f * f)
        };
        let at2 = cr_lower_bound(&spec(&[2.0]), 1.0, 1).unwrap();
        let at3 = cr_lower_bound(&spec(&[3.0]), 1.0, 1).unwrap();
        assert!((at2 - closed_at(2.0)).abs() < 1e-12);
        assert!((at3 - closed_at(3.0)).abs() < 1e-10);
        assert!(at2 < kcr && kcr < at3);
        assert!(cr_lower_bound(&q, 1.0, 0).is_err());
    }

    #[test]
    fn limit_covariance_scalar_is_cr_bound() {
        let q = spec(&[1.0]);
        let v = asymptotic_covariance_limit(&q, 1.0).unwrap();
        assert!((v[(0, 0)] - cr_lower_bound(&q, 1.0, 1).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn limit_covariance_is_spd() {
        let v = asymptotic_covariance_limit(&spec(&[1.0, 2.0]), 1.0).unwrap();
        assert!((&v - v.transpose()).amax() < 1e-12);
        let eig = v.symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|e| *e > 0.0));
    }

    #[test]
    fn information_identity() {
        for t in [&[1.0][..], &[0.0, 1.0], &[1.0, 2.0], &[-1.0, 0.0, 1.0]] {
            let q = spec(t);
            for delta in [0.5, 1.0, 2.0] {
                let x = build_blocks(&q, delta, DEFAULT_C)
                    .unwrap()
                    .information_matrix()
                    .unwrap();
                let lhs = x.sum();
                let rhs = fisher_information(&q, delta).unwrap();
                assert!(
                    (lhs - rhs).abs() <= 1e-9,
                    "{t:?} delta={delta}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn estimator_single_threshold_reduces_to_mle() {
        let q = spec(&[1.0]);
        let mut est = VarianceEstimator::new(q.clone(), VarianceConfig::default()).unwrap();
        for (i, s) in [0usize, 0, 1, 0, 0, 0, 1, 0].into_iter().enumerate() {
            let d = est.ml_update(s).unwrap();
            let raw = per_threshold_estimate(&q, est.histogram(), 1, DEFAULT_C_STAR).unwrap();
            assert_eq!(d, project(raw, DEFAULT_C), "step {i}");
            assert_eq!(est.mu_hat().as_slice(), &[1.0]);
        }
    }

    #[test]
    fn estimator_keeps_invariants() {
        let q = spec(&[0.0, 1.0]);
        let mut est = VarianceEstimator::new(q, VarianceConfig::default()).unwrap();
        for i in 0..500usize {
            let s = (i * 5 + i / 7) % 3;
            let d = est.ml_update(s).unwrap();
            assert!((DEFAULT_C..=1.0 / DEFAULT_C).contains(&d));
            assert!((est.mu_hat().sum() - 1.0).abs() < 1e-12);
        }
        assert!(matches!(est.ml_update(3), Err(Error::Range { .. })));
    }

    #[test]
    fn estimator_rejects_bad_config() {
        let q = spec(&[1.0]);
        let bad = [
            VarianceConfig {
                c: 0.0,
                ..Default::default()
            },
            VarianceConfig {
                c_star: 0.5,
                ..Default::default()
            },
            VarianceConfig {
                c_star: 1.0,
                ..Default::default()
            },
            VarianceConfig {
                delta0: 1e7,
                ..Default::default()
            },
            VarianceConfig {
                weight_interval: 0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(VarianceEstimator::new(q.clone(), cfg).is_err(), "{cfg:?}");
        }
    }
}
