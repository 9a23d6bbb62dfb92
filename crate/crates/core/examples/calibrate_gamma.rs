//! Picks the liquidity weight so that the solved deposit-to-consumption
//! ratio of the high-literacy household hits a target.
//!
//! Run with `cargo run --example calibrate_gamma [-- TARGET]`.

use cbdc_portfolio::calibration::calibrate_gamma;
use cbdc_portfolio::{solve, AgentKind, Economy, ModelInstance, SolverConfig};

fn main() {
    let target: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("numeric target"))
        .unwrap_or(0.5);
    let template = ModelInstance::baseline(Economy::PreCbdc);
    let config = SolverConfig::default();
    let gamma = calibrate_gamma(target, &template, AgentKind::Hfl, &config).expect("target in range");
    let mut inst = template;
    inst.prefs.gamma = gamma;
    let s = solve(&inst, AgentKind::Hfl, &config, None).expect("solvable");
    println!("gamma = {gamma:.6}");
    println!("d/c1 = {:.6} (target {target})", s.alloc.deposits / s.alloc.consumption1);
}
