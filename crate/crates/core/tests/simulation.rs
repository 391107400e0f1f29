mod common;

use qident::gauss::std_normal_cdf;
use qident::oe::{impulse_response, OeFilter};
use qident::sim::simulate::{OeSimulator, StaticSimulator};
use qident::sim::System;

#[test]
fn static_output_statistics() {
    let cfg = common::load("example1.cfg");
    let System::Static(system) = cfg.system.clone() else {
        panic!("static config")
    };
    let delta = system.output_std();
    assert!((delta * delta - 0.629).abs() < 1e-12);
    let mut sim = StaticSimulator::new(system, cfg.quantizer.clone(), 5).unwrap();
    let n = 1_000_000;
    let (mut sum, mut sum2) = (0.0, 0.0);
    let mut counts = [0usize; 3];
    for _ in 0..n {
        let o = sim.step();
        sum += o.y;
        sum2 += o.y * o.y;
        counts[o.s] += 1;
    }
    let mean = sum / n as f64;
    let std = (sum2 / n as f64 - mean * mean).sqrt();
    assert!((std - 0.7931).abs() < 0.01, "std {std}");

    let f1 = std_normal_cdf(0.0 / delta);
    let f2 = std_normal_cdf(1.0 / delta);
    let expected = [f1, f2 - f1, 1.0 - f2];
    for (c, e) in counts.iter().zip(expected) {
        let freq = *c as f64 / n as f64;
        assert!((freq - e).abs() < 0.005, "{freq} vs {e}");
    }
}

#[test]
fn oe_output_variance() {
    let cfg = common::load("example2.cfg");
    let System::Oe { system, .. } = cfg.system.clone() else {
        panic!("oe config")
    };
    let target = system.output_std().powi(2);
    let mut sim = OeSimulator::new(system, cfg.quantizer.clone(), 6).unwrap();
    let n = 1_000_000;
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..n {
        let y = sim.step().y;
        sum += y;
        sum2 += y * y;
    }
    let mean = sum / n as f64;
    let var = sum2 / n as f64 - mean * mean;
    assert!((var / target - 1.0).abs() < 0.02, "{var} vs {target}");
}

#[test]
fn impulse_input_reproduces_response() {
    let cfg = common::load("example2.cfg");
    let System::Oe { system, .. } = cfg.system else {
        panic!("oe config")
    };
    let h = impulse_response(&system.model, 12);
    let mut filter = OeFilter::new(system.model);
    for (k, hk) in h.iter().enumerate() {
        let y = filter.push(&[if k == 0 { 1.0 } else { 0.0 }]);
        assert!((y - hk[0]).abs() < 1e-15, "k={k}: {y} vs {}", hk[0]);
    }
    let expected = [1.0, -0.4, 0.68, -0.136, 0.0272];
    for (hk, e) in h.iter().zip(expected) {
        assert!((hk[0] - e).abs() < 1e-15);
    }
}
