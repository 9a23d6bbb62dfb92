//! CSV layouts written by the command-line tool.

use crate::analysis::SweepRecord;
use crate::calibration::{BinnedReturns, BinomialRow};
use crate::inference::FitResult;
use crate::numfmt::{format_number, format_opt};

pub const SWEEP_HEADER: [&str; 11] = [
    "sweep_parameter",
    "agent",
    "economy",
    "a",
    "d",
    "m",
    "c1",
    "liquid_cbdc_share",
    "portfolio_cbdc_share",
    "p_eps",
    "converged",
];

pub const ESTIMATE_HEADER: [&str; 4] = ["name", "estimate", "robust_se", "odds_change"];

pub const CALIBRATION_HEADER: [&str; 4] = ["n_crisis_years", "probability", "compounded_return", "bin"];

fn to_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

pub fn sweep_csv(records: &[SweepRecord]) -> String {
    to_csv(
        &SWEEP_HEADER,
        records.iter().map(|r| {
            let a = r.alloc;
            vec![
                format_number(r.sweep_parameter),
                r.agent.label().to_string(),
                r.economy.label().to_string(),
                format_opt(a.map(|a| a.risky)),
                format_opt(a.map(|a| a.deposits)),
                format_opt(a.map(|a| a.cbdc)),
                format_opt(a.map(|a| a.consumption1)),
                format_opt(r.liquid_cbdc_share),
                format_opt(r.portfolio_cbdc_share),
                format_number(r.p_eps_used),
                r.converged().to_string(),
            ]
        }),
    )
}

pub fn estimate_csv(fit: &FitResult) -> String {
    to_csv(
        &ESTIMATE_HEADER,
        fit.table().into_iter().map(|(name, b, se, oc)| {
            vec![name, format_number(b), format_number(se), format_number(oc)]
        }),
    )
}

/// Binomial outcomes with positive probability, labelled by the bin each
/// one falls in.
pub fn calibration_csv(rows: &[BinomialRow], split: u32, truncate: Option<u32>) -> String {
    to_csv(
        &CALIBRATION_HEADER,
        rows.iter().filter(|r| r.probability > 0.0).map(|r| {
            let bin = if r.n_crisis_years <= split {
                "high"
            } else if truncate.is_none_or(|t| r.n_crisis_years <= t) {
                "low"
            } else {
                "excluded"
            };
            vec![
                r.n_crisis_years.to_string(),
                format_number(r.probability),
                format_number(r.compounded_return),
                bin.to_string(),
            ]
        }),
    )
}

/// Scalar calibration outputs, one `quantity,value` row each.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSummary {
    pub binned: Option<BinnedReturns>,
    pub equity_premium: f64,
    pub r_deposit_period: f64,
    pub r_deposit_annualized: f64,
    pub r_cbdc_period: f64,
    pub r_cbdc_annualized: f64,
    pub r_deposit_market_compounded: f64,
}

impl CalibrationSummary {
    pub fn entries(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("p_high", self.binned.map(|b| b.p_high)),
            ("r_risky_high", self.binned.map(|b| b.r_high)),
            ("r_risky_low", self.binned.map(|b| b.r_low)),
            ("p_low_mass", self.binned.map(|b| b.p_low)),
            ("equity_premium", Some(self.equity_premium)),
            ("r_deposit", Some(self.r_deposit_period)),
            ("r_deposit_annual", Some(self.r_deposit_annualized)),
            ("r_deposit_market_compounded", Some(self.r_deposit_market_compounded)),
            ("r_cbdc", Some(self.r_cbdc_period)),
            ("r_cbdc_annual", Some(self.r_cbdc_annualized)),
        ]
    }

    pub fn csv(&self) -> String {
        to_csv(
            &["quantity", "value"],
            self.entries()
                .into_iter()
                .map(|(k, v)| vec![k.to_string(), format_opt(v)]),
        )
    }

    pub fn text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {}\n", format_opt(v)))
            .collect()
    }
}
