mod common;

use qident::sim::simulate::StaticSimulator;
use qident::sim::System;
use qident::variance::{VarianceConfig, VarianceEstimator};
use qident::QuantizerSpec;
use rand::Rng;
use rand_distr::StandardNormal;

#[test]
fn single_threshold_scalar_draws() {
    let spec = QuantizerSpec::new(vec![1.0]).unwrap();
    for (seed, delta) in [(1u64, 0.7), (2, 1.3)] {
        let mut rng = qident::gauss::stream_rng(seed, 0);
        let mut est = VarianceEstimator::new(spec.clone(), VarianceConfig::default()).unwrap();
        for _ in 0..100_000 {
            let y = delta * rng.sample::<f64, _>(StandardNormal);
            est.ml_update(spec.quantize(y)).unwrap();
        }
        assert!(
            (est.delta_hat() - delta).abs() < 0.05,
            "{} vs {delta}",
            est.delta_hat()
        );
    }
}

#[test]
fn example_stream() {
    let cfg = common::load("example1.cfg");
    let System::Static(system) = cfg.system.clone() else {
        panic!("static config")
    };
    let delta = system.output_std();
    let mut sim = StaticSimulator::new(system, cfg.quantizer.clone(), 9).unwrap();
    let mut est = VarianceEstimator::new(cfg.quantizer.clone(), cfg.estimator.variance()).unwrap();
    for _ in 0..100_000 {
        est.ml_update(sim.step().s).unwrap();
    }
    assert!(
        (est.delta_hat() - delta).abs() < 0.02,
        "{} vs {delta}",
        est.delta_hat()
    );
    assert!((est.mu_hat().sum() - 1.0).abs() < 1e-12);
}
