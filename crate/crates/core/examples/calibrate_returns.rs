//! Compounds annual equity returns over a 20-year period, bins the outcome
//! distribution into two events, and converts period rates to annual ones.
//!
//! Run with `cargo run --example calibrate_returns`.

use cbdc_portfolio::calibration::{
    annualize_rate, bin_returns, binomial_outcomes, equity_premium, AnnualMarket,
};

fn main() {
    let market = AnnualMarket::default();
    let rows = binomial_outcomes(&market);

    println!("crisis years  probability  compounded return");
    for row in rows.iter().take(8) {
        println!(
            "{:>12}  {:>11.4}  {:>17.4}",
            row.n_crisis_years, row.probability, row.compounded_return
        );
    }

    let binned = bin_returns(&rows, 2, Some(5)).expect("valid bins");
    println!();
    println!("high event: p = {:.4}, R = {:.4}", binned.p_high, binned.r_high);
    println!("low event:  R = {:.4} (mass {:.4})", binned.r_low, binned.p_low);
    println!("equity premium: {:.4}", equity_premium(&market));

    let beta: f64 = 0.82;
    println!("deposit rate 1/beta = {:.4}, annualized {:.5}", 1.0 / beta, annualize_rate(1.0 / beta, 20));
    println!("CBDC rate 1.10, annualized {:.5}", annualize_rate(1.10, 20));
}
