//! Optimal holdings of both household types at the baseline calibration,
//! before and after a CBDC is introduced.
//!
//! Run with `cargo run --example solve_baseline`.

use cbdc_portfolio::{solve, AgentKind, Economy, ModelInstance, SolverConfig};

fn main() {
    let config = SolverConfig::default();
    println!("agent  economy     risky     deposits  CBDC      c1        utility");
    for agent in [AgentKind::Hfl, AgentKind::Lfl] {
        for economy in [Economy::PreCbdc, Economy::WithCbdc] {
            let inst = ModelInstance::baseline(economy);
            let s = solve(&inst, agent, &config, None).expect("baseline is solvable");
            let a = s.alloc;
            println!(
                "{:<6} {:<10} {:>8.5} {:>9.5} {:>9.5} {:>9.5} {:>9.5}",
                agent.label(),
                economy.label(),
                a.risky,
                a.deposits,
                a.cbdc,
                a.consumption1,
                s.utility
            );
        }
    }
}
