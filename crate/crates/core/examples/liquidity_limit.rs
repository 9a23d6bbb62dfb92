//! As the weight on liquidity services grows, the CBDC share of liquid
//! assets approaches the ratio fixed by the aggregator alone.
//!
//! Run with `cargo run --example liquidity_limit`.

use cbdc_portfolio::analysis::liquidity_limit_ratio;
use cbdc_portfolio::{solve, AgentKind, Economy, ModelInstance, SolverConfig};

fn main() {
    let base = ModelInstance::baseline(Economy::WithCbdc);
    let (ratio, share) = liquidity_limit_ratio(&base.prefs).expect("sigma > 0");
    println!("limit: m/d = {ratio:.4}, CBDC share of liquid assets = {share:.4}");
    println!();
    println!("gamma      HFL share  LFL share");
    for gamma in [0.05, 0.5, 5.0, 50.0, 500.0, 1e4] {
        let mut inst = base;
        inst.prefs.gamma = gamma;
        let share_of = |agent| {
            let s = solve(&inst, agent, &SolverConfig::default(), None).expect("solvable");
            s.alloc.cbdc / s.alloc.liquid()
        };
        println!(
            "{gamma:<10} {:>9.5}  {:>9.5}",
            share_of(AgentKind::Hfl),
            share_of(AgentKind::Lfl)
        );
    }
}
