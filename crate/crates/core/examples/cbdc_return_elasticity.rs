//! Varies the CBDC return at fixed income and measures how strongly the
//! low-literacy household shifts between deposits and CBDC.
//!
//! Run with `cargo run --example cbdc_return_elasticity`.

use cbdc_portfolio::analysis::{
    select, share_elasticity, sweep_cbdc_return, ElasticityMethod, SweepOptions,
    FIGURE_CBDC_RETURNS,
};
use cbdc_portfolio::{AgentKind, Economy, IncomeProcess, ModelInstance};

fn main() {
    let base = ModelInstance::baseline(Economy::WithCbdc);
    for s in [0.0, 1.0] {
        let records = sweep_cbdc_return(
            &base,
            &FIGURE_CBDC_RETURNS,
            IncomeProcess::deterministic(s),
            &SweepOptions::default(),
        )
        .expect("valid grid");
        println!("income s = {s}");
        println!("  R^m    LFL d     LFL m     HFL a");
        let lfl = select(&records, AgentKind::Lfl, Economy::WithCbdc);
        let hfl = select(&records, AgentKind::Hfl, Economy::WithCbdc);
        for (l, h) in lfl.zip(hfl) {
            let (la, ha) = (l.alloc.expect("solved"), h.alloc.expect("solved"));
            println!(
                "  {:.2}  {:.5}  {:.5}  {:.5}",
                l.sweep_parameter, la.deposits, la.cbdc, ha.risky
            );
        }
        for method in [ElasticityMethod::LevelSlope, ElasticityMethod::Arc] {
            let e = share_elasticity(&records, AgentKind::Lfl, 1.0, 1.2, method).expect("in range");
            println!(
                "  {method:?}: CBDC {:+.3}, deposits {:+.3}",
                e.elasticity_cbdc_share, e.elasticity_deposit_share
            );
        }
        println!();
    }
}
