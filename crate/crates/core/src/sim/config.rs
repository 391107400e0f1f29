//! Experiment config files.
//!
//! Configs are TOML. Matrices are written as arrays of rows:
//!
//! ```toml
//! mode = "static"            # or "oe"
//!
//! [quantizer]
//! thresholds = [0.0, 1.0]
//!
//! [static]
//! theta = [0.2, -0.1, 0.5]
//! h = [[2.5, -0.6, -0.4], [-0.6, 2.0, 0.6], [-0.4, 0.6, 1.5]]
//! noise_std = 0.5
//!
//! [estimator]                # all optional
//! c = 1e-6
//! c_star = 1e-6
//!
//! [run]                      # all optional
//! steps = 100000
//! replicas = 250
//! seed = 1
//! ```
//!
//! An `oe` config replaces `[static]` by `[oe]` with `a`, `b` (one row per
//! `b_j`), `input_cov`, `noise_std` and an optional `kappa`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::gauss::lower_factor;
use crate::oe::{DmConfig, OeModel};
use crate::quantizer::QuantizerSpec;
use crate::sim::simulate::{OeSystem, StaticSystem};
use crate::variance::{VarianceConfig, DEFAULT_C, DEFAULT_C_STAR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Static,
    Oe,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Mode,
    quantizer: RawQuantizer,
    #[serde(rename = "static")]
    static_system: Option<RawStatic>,
    oe: Option<RawOe>,
    #[serde(default)]
    estimator: RawEstimator,
    #[serde(default)]
    run: RawRun,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuantizer {
    thresholds: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStatic {
    theta: Vec<f64>,
    h: Vec<Vec<f64>>,
    noise_std: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOe {
    a: Vec<f64>,
    b: Vec<Vec<f64>>,
    input_cov: Vec<Vec<f64>>,
    noise_std: f64,
    kappa: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEstimator {
    c: Option<f64>,
    c_star: Option<f64>,
    p0_scale: Option<f64>,
    beta: Option<f64>,
    delta0: Option<f64>,
    weight_interval: Option<u64>,
    recover_interval: Option<u64>,
    burn_in: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    steps: Option<u64>,
    replicas: Option<usize>,
    seed: Option<u64>,
    checkpoint_start: Option<u64>,
    checkpoints_per_decade: Option<u32>,
    moment_order: Option<u32>,
}

/// System under identification.
#[derive(Debug, Clone, PartialEq)]
pub enum System {
    Static(StaticSystem),
    Oe { system: OeSystem, kappa: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub c: f64,
    pub c_star: f64,
    pub p0_scale: f64,
    pub beta: f64,
    pub delta0: f64,
    pub weight_interval: u64,
    pub recover_interval: u64,
    pub burn_in: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            c: DEFAULT_C,
            c_star: DEFAULT_C_STAR,
            p0_scale: 0.1,
            beta: 1.0,
            delta0: 1.0,
            weight_interval: 1,
            recover_interval: 1,
            burn_in: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn variance(&self) -> VarianceConfig {
        VarianceConfig {
            c: self.c,
            c_star: self.c_star,
            delta0: self.delta0,
            weight_interval: self.weight_interval,
        }
    }

    pub fn dm(&self, kappa: usize) -> DmConfig {
        DmConfig {
            kappa,
            p0_scale: self.p0_scale,
            beta: self.beta,
            variance: self.variance(),
            recover_interval: self.recover_interval,
            burn_in: self.burn_in,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub steps: u64,
    pub replicas: usize,
    pub seed: u64,
    pub checkpoint_start: u64,
    /// Geometric grid density; 10 per decade is a ratio of about 1.26.
    pub checkpoints_per_decade: u32,
    /// Order `p` of the error moment reported by the Monte Carlo summary.
    pub moment_order: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            steps: 100_000,
            replicas: 250,
            seed: 1,
            checkpoint_start: 10,
            checkpoints_per_decade: 10,
            moment_order: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub quantizer: QuantizerSpec,
    pub system: System,
    pub estimator: EstimatorConfig,
    pub run: RunConfig,
}

fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config(format!(
            "{name} must be a nonempty square matrix"
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn positive_definite(name: &str, m: &DMatrix<f64>) -> Result<()> {
    lower_factor(m)
        .map(|_| ())
        .map_err(|e| Error::Config(format!("{name} is not symmetric positive definite ({e})")))
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("cannot parse config: {e}")))?;
        Self::from_raw(raw)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn mode(&self) -> Mode {
        match self.system {
            System::Static(_) => Mode::Static,
            System::Oe { .. } => Mode::Oe,
        }
    }

    /// True parameter vector (`theta` or `theta*`).
    pub fn true_parameter(&self) -> DVector<f64> {
        match &self.system {
            System::Static(s) => s.theta.clone(),
            System::Oe { system, .. } => system.model.theta_star(),
        }
    }

    /// True output deviation (`delta_y`, or `delta_inf` for OE).
    pub fn true_output_std(&self) -> f64 {
        match &self.system {
            System::Static(s) => s.output_std(),
            System::Oe { system, .. } => system.output_std(),
        }
    }

    /// Dimension of the regressor `phi_k` fed by the simulator.
    pub fn input_dim(&self) -> usize {
        match &self.system {
            System::Static(s) => s.theta.len(),
            System::Oe { system, .. } => system.model.input_dim(),
        }
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let quantizer = QuantizerSpec::new(raw.quantizer.thresholds)?;
        let system = match raw.mode {
            Mode::Static => {
                let s = raw.static_system.ok_or_else(|| {
                    Error::Config("mode = \"static\" needs a [static] section".into())
                })?;
                if raw.oe.is_some() {
                    return Err(Error::Config(
                        "static config must not contain an [oe] section".into(),
                    ));
                }
                let h = matrix_from_rows("h", &s.h)?;
                if h.nrows() != s.theta.len() {
                    return Err(Error::Config(format!(
                        "h is {0}x{0} but theta has length {1}",
                        h.nrows(),
                        s.theta.len()
                    )));
                }
                positive_definite("h", &h)?;
                if !(s.noise_std >= 0.0) || !s.noise_std.is_finite() {
                    return Err(Error::Config(format!(
                        "noise_std must be finite and >= 0, got {}",
                        s.noise_std
                    )));
                }
                System::Static(StaticSystem {
                    theta: DVector::from_vec(s.theta),
                    h,
                    noise_std: s.noise_std,
                })
            }
            Mode::Oe => {
                let o = raw
                    .oe
                    .ok_or_else(|| Error::Config("mode = \"oe\" needs an [oe] section".into()))?;
                if raw.static_system.is_some() {
                    return Err(Error::Config(
                        "oe config must not contain a [static] section".into(),
                    ));
                }
                let b: Vec<DVector<f64>> = o.b.into_iter().map(DVector::from_vec).collect();
                let model = OeModel::new(o.a, b)?;
                let input_cov = matrix_from_rows("input_cov", &o.input_cov)?;
                if input_cov.nrows() != model.input_dim() {
                    return Err(Error::Config(format!(
                        "input_cov is {0}x{0} but b_j have length {1}",
                        input_cov.nrows(),
                        model.input_dim()
                    )));
                }
                positive_definite("input_cov", &input_cov)?;
                if !(o.noise_std >= 0.0) || !o.noise_std.is_finite() {
                    return Err(Error::Config(format!(
                        "noise_std must be finite and >= 0, got {}",
                        o.noise_std
                    )));
                }
                let min_kappa = model.n_a() + model.n_b();
                let kappa = o.kappa.unwrap_or((2 * min_kappa).max(1));
                if kappa < min_kappa {
                    return Err(Error::Config(format!(
                        "kappa = {kappa} is below n_a + n_b = {min_kappa}"
                    )));
                }
                System::Oe {
                    system: OeSystem {
                        model,
                        input_cov,
                        noise_std: o.noise_std,
                    },
                    kappa,
                }
            }
        };

        let d = EstimatorConfig::default();
        let e = raw.estimator;
        let estimator = EstimatorConfig {
            c: e.c.unwrap_or(d.c),
            c_star: e.c_star.unwrap_or(d.c_star),
            p0_scale: e.p0_scale.unwrap_or(d.p0_scale),
            beta: e.beta.unwrap_or(d.beta),
            delta0: e.delta0.unwrap_or(d.delta0),
            weight_interval: e.weight_interval.unwrap_or(d.weight_interval),
            recover_interval: e.recover_interval.unwrap_or(d.recover_interval),
            burn_in: e.burn_in.unwrap_or(d.burn_in),
        };
        if !(estimator.c > 0.0 && estimator.c < 1.0) {
            return Err(Error::Config(format!(
                "c must lie in (0, 1), got {}",
                estimator.c
            )));
        }
        if !(estimator.c_star > 0.0 && estimator.c_star < 1.0) || estimator.c_star == 0.5 {
            return Err(Error::Config(format!(
                "c_star must lie in (0, 1) and differ from 1/2, got {}",
                estimator.c_star
            )));
        }
        if !(estimator.p0_scale > 0.0) || !estimator.p0_scale.is_finite() {
            return Err(Error::Config("p0_scale must be positive".into()));
        }
        if !(estimator.beta > 0.0) || !estimator.beta.is_finite() {
            return Err(Error::Config("beta must be positive".into()));
        }
        if !(estimator.delta0 >= estimator.c && estimator.delta0 <= 1.0 / estimator.c) {
            return Err(Error::Config("delta0 must lie in [c, 1/c]".into()));
        }
        if estimator.weight_interval == 0 || estimator.recover_interval == 0 {
            return Err(Error::Config(
                "weight_interval and recover_interval must be >= 1".into(),
            ));
        }

        let r = RunConfig::default();
        let run = RunConfig {
            steps: raw.run.steps.unwrap_or(r.steps),
            replicas: raw.run.replicas.unwrap_or(r.replicas),
            seed: raw.run.seed.unwrap_or(r.seed),
            checkpoint_start: raw.run.checkpoint_start.unwrap_or(r.checkpoint_start),
            checkpoints_per_decade: raw
                .run
                .checkpoints_per_decade
                .unwrap_or(r.checkpoints_per_decade),
            moment_order: raw.run.moment_order.unwrap_or(r.moment_order),
        };
        if run.steps == 0 {
            return Err(Error::Config("steps must be positive".into()));
        }
        if run.checkpoint_start == 0 || run.checkpoints_per_decade == 0 {
            return Err(Error::Config(
                "checkpoint grid parameters must be positive".into(),
            ));
        }
        if run.moment_order == 0 {
            return Err(Error::Config("moment_order must be positive".into()));
        }
        Ok(Self {
            quantizer,
            system,
            estimator,
            run,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE1: &str = r#"
mode = "static"
[quantizer]
thresholds = [0.0, 1.0]
[static]
theta = [0.2, -0.1, 0.5]
h = [[2.5, -0.6, -0.4], [-0.6, 2.0, 0.6], [-0.4, 0.6, 1.5]]
noise_std = 0.5
"#;

    #[test]
    fn parses_static() {
        let cfg = SimConfig::from_toml_str(EXAMPLE1).unwrap();
        assert_eq!(cfg.mode(), Mode::Static);
        assert!((cfg.true_output_std().powi(2) - 0.629).abs() < 1e-12);
        assert_eq!(cfg.estimator, EstimatorConfig::default());
        assert_eq!(cfg.run, RunConfig::default());
    }

    #[test]
    fn parses_oe_with_default_kappa() {
        let text = r#"
mode = "oe"
[quantizer]
thresholds = [1.5]
[oe]
a = [0.2]
b = [[1.0], [-0.2], [0.6]]
input_cov = [[1.0]]
noise_std = 1.0
"#;
        let cfg = SimConfig::from_toml_str(text).unwrap();
        match &cfg.system {
            System::Oe { kappa, .. } => assert_eq!(*kappa, 6),
            _ => panic!("expected oe"),
        }
        assert_eq!(cfg.true_parameter().as_slice(), &[0.2, 1.0, -0.2, 0.6]);
    }

    fn rejection(text: &str) -> String {
        match SimConfig::from_toml_str(text) {
            Err(Error::Config(msg)) => msg,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn rejections_are_distinct() {
        let non_pd = EXAMPLE1.replace("[2.5, -0.6, -0.4]", "[-2.5, -0.6, -0.4]");
        let unidentifiable = EXAMPLE1.replace("[0.0, 1.0]", "[0.0]");
        let negative_noise = EXAMPLE1.replace("noise_std = 0.5", "noise_std = -0.5");
        let unstable = r#"
mode = "oe"
[quantizer]
thresholds = [1.5]
[oe]
a = [1.5]
b = [[1.0]]
input_cov = [[1.0]]
noise_std = 1.0
"#;
        let msgs = [
            rejection(&non_pd),
            rejection(&unidentifiable),
            rejection(&negative_noise),
            rejection(unstable),
        ];
        assert!(msgs[0].contains("positive definite"));
        assert!(msgs[1].contains("unidentifiable"));
        assert!(msgs[2].contains("noise_std"));
        assert!(msgs[3].contains("stable"));
        for i in 0..msgs.len() {
            for j in i + 1..msgs.len() {
                assert_ne!(msgs[i], msgs[j]);
            }
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{EXAMPLE1}\n[run]\nstepz = 3\n");
        assert!(SimConfig::from_toml_str(&text).is_err());
    }
}
