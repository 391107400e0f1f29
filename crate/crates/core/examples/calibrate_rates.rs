//! Pilot calibration of the scaled-error constants in `configs/rate_bounds.toml`.
//!
//! For each config, runs the pilot seeds and records the largest running
//! maximum of `sqrt(k / log log k) * error` over `k` in `[1e3, 1e5]`.
//!
//! ```text
//! cargo run --release --example calibrate_rates > configs/rate_bounds.toml
//! ```

use std::path::Path;

use qident::sim::runner::run_identification;
use qident::sim::SimConfig;

const PILOT_SEEDS: std::ops::Range<u64> = 10_000..10_050;
const K_LO: u64 = 1_000;
const K_HI: u64 = 100_000;

fn main() -> qident::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    println!(
        "# Pilot-calibrated maxima of sqrt(k / log log k) * error over k in [{K_LO}, {K_HI}]."
    );
    println!("# Generated by `cargo run --release --example calibrate_rates`.");
    println!("pilot_seed_start = {}", PILOT_SEEDS.start);
    println!("pilot_seed_end = {}", PILOT_SEEDS.end);
    println!("k_lo = {K_LO}");
    println!("k_hi = {K_HI}");
    for name in ["example1", "example2"] {
        let mut cfg = SimConfig::from_path(&root.join(format!("{name}.cfg")))?;
        cfg.run.steps = K_HI;
        let (mut theta, mut delta) = (0.0f64, 0.0f64);
        for seed in PILOT_SEEDS {
            let rec = run_identification(&cfg, seed)?;
            theta = theta.max(rec.max_scaled_theta(K_LO, K_HI));
            delta = delta.max(rec.max_scaled_delta(K_LO, K_HI));
        }
        println!("\n[{name}]\ntheta = {theta}\ndelta = {delta}");
    }
    Ok(())
}
