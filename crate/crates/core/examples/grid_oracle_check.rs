//! Cross-checks the Newton solver against exhaustive lattice search.
//!
//! Run with `cargo run --release --example grid_oracle_check`.

use cbdc_portfolio::model::Holding;
use cbdc_portfolio::solver::grid_oracle_refined;
use cbdc_portfolio::{solve, AgentKind, Economy, ModelInstance, SolverConfig};

fn main() {
    for agent in [AgentKind::Hfl, AgentKind::Lfl] {
        for economy in [Economy::PreCbdc, Economy::WithCbdc] {
            let inst = ModelInstance::baseline(economy);
            let newton = solve(&inst, agent, &SolverConfig::default(), None).expect("solvable");
            let oracle = grid_oracle_refined(&inst, agent, 200, 3).expect("oracle");
            let gap = Holding::layout(agent, economy)
                .iter()
                .map(|h| (newton.alloc.get(*h) - oracle.alloc.get(*h)).abs())
                .fold(0.0, f64::max);
            println!(
                "{} {}: newton U = {:.9}, lattice U = {:.9}, max holding gap {gap:.2e} (final spacing {:.1e})",
                agent.label(),
                economy.label(),
                newton.utility,
                oracle.utility,
                oracle.final_spacing
            );
        }
    }
}
