//! Mean-preserving spreads in second-period income: lowers the bad income
//! state while keeping mean income at one, and tracks risky holdings and
//! liquid savings.
//!
//! Run with `cargo run --example stochastic_sweep`.

use cbdc_portfolio::analysis::{
    default_stochastic_grid, is_hump_shaped, select, sweep_stochastic, SweepOptions,
    DEFAULT_S_MAX, DEFAULT_TARGET_MEAN,
};
use cbdc_portfolio::{AgentKind, Economy, ModelInstance};

fn main() {
    let base = ModelInstance::baseline(Economy::WithCbdc);
    let grid = default_stochastic_grid();
    let records = sweep_stochastic(&base, &grid, DEFAULT_S_MAX, DEFAULT_TARGET_MEAN, &SweepOptions::default())
        .expect("valid grid");

    let hfl: Vec<_> = select(&records, AgentKind::Hfl, Economy::WithCbdc).collect();
    let lfl: Vec<_> = select(&records, AgentKind::Lfl, Economy::WithCbdc).collect();
    println!("s_min    p_eps   HFL risky  HFL liquid  LFL liquid");
    for (h, l) in hfl.iter().zip(&lfl).step_by(5) {
        let (ha, la) = (h.alloc.expect("solved"), l.alloc.expect("solved"));
        println!(
            "{:<7.3}  {:.3}  {:>9.4}  {:>10.4}  {:>10.4}",
            h.sweep_parameter,
            h.p_eps_used,
            ha.risky,
            ha.liquid(),
            la.liquid()
        );
    }
    let risky: Vec<f64> = hfl.iter().map(|r| r.alloc.expect("solved").risky).collect();
    println!();
    println!("HFL risky holdings hump-shaped in s_min: {}", is_hump_shaped(&risky, 1e-9));
}
