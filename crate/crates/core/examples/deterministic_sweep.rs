//! Sweeps deterministic second-period income and prints CBDC shares for
//! both household types. Pass `--csv` to print the sweep as CSV instead.
//!
//! Run with `cargo run --example deterministic_sweep [-- --csv]`.

use cbdc_portfolio::analysis::{
    default_deterministic_grid, select, substitution_report, sweep_deterministic, SweepOptions,
};
use cbdc_portfolio::cli::sweep_csv;
use cbdc_portfolio::{AgentKind, Economy, ModelInstance};

fn main() {
    let base = ModelInstance::baseline(Economy::WithCbdc);
    let grid = default_deterministic_grid();
    let records = sweep_deterministic(&base, &grid, &SweepOptions::default()).expect("valid grid");

    if std::env::args().any(|a| a == "--csv") {
        print!("{}", sweep_csv(&records));
        return;
    }

    let hfl: Vec<_> = select(&records, AgentKind::Hfl, Economy::WithCbdc).collect();
    let lfl: Vec<_> = select(&records, AgentKind::Lfl, Economy::WithCbdc).collect();
    println!("s       HFL liquid  HFL portfolio  LFL liquid  LFL portfolio");
    for (h, l) in hfl.iter().zip(&lfl).step_by(7) {
        println!(
            "{:<6.3}  {:>10.4}  {:>13.4}  {:>10.4}  {:>13.4}",
            h.sweep_parameter,
            h.liquid_cbdc_share.unwrap_or(f64::NAN),
            h.portfolio_cbdc_share.unwrap_or(f64::NAN),
            l.liquid_cbdc_share.unwrap_or(f64::NAN),
            l.portfolio_cbdc_share.unwrap_or(f64::NAN),
        );
    }

    let report = substitution_report(&records, AgentKind::Lfl);
    println!();
    println!(
        "LFL deposit drop exceeds CBDC uptake at {} of {} grid points",
        report.points.len() - report.violations.len(),
        report.points.len()
    );
}
