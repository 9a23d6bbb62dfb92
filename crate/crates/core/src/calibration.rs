//! Period-level parameters from annual market data.
//!
//! Annual risky returns are two-point (a normal year or a crisis year); over
//! a period of `T` years the number of crisis years is binomial, so the
//! compounded return takes `T + 1` values. Those are binned into a high and
//! a low event to get the two-point period distribution used by the model.

use thiserror::Error;

use crate::model::{AgentKind, IncomeProcess, ModelError, ModelInstance};
use crate::solver::{solve, SolveError, SolverConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: String,
    },
    #[error("target ratio {target} outside achievable interval [{low}, {high}] for gamma in [{gamma_low}, {gamma_high}]")]
    Bracketing {
        target: f64,
        low: f64,
        high: f64,
        gamma_low: f64,
        gamma_high: f64,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

fn invalid(name: &'static str, value: f64, reason: impl Into<String>) -> CalibrationError {
    CalibrationError::InvalidParameter {
        name,
        value,
        reason: reason.into(),
    }
}

/// Annual return inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnualMarket {
    pub r_risky_high_annual: f64,
    pub r_risky_low_annual: f64,
    /// Probability of a normal (non-crisis) year.
    pub p_high_annual: f64,
    pub r_deposit_annual: f64,
    pub period_years: u32,
}

impl Default for AnnualMarket {
    fn default() -> Self {
        Self {
            r_risky_high_annual: 1.09,
            r_risky_low_annual: 0.6,
            p_high_annual: 0.95,
            r_deposit_annual: 1.01,
            period_years: 20,
        }
    }
}

impl AnnualMarket {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        if !(0.0..=1.0).contains(&self.p_high_annual) {
            return Err(invalid("p_high_annual", self.p_high_annual, "must be a probability"));
        }
        if self.period_years == 0 {
            return Err(invalid("period_years", 0.0, "must be positive"));
        }
        let ordered = self.r_risky_low_annual > 0.0
            && self.r_risky_low_annual < 1.0
            && 1.0 < self.r_deposit_annual
            && self.r_deposit_annual < self.r_risky_high_annual;
        if !ordered {
            return Err(invalid(
                "r_risky_low_annual",
                self.r_risky_low_annual,
                "requires 0 < low < 1 < deposit < high",
            ));
        }
        Ok(())
    }
}

/// Outcome with `n_crisis_years` crisis years over the period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialRow {
    pub n_crisis_years: u32,
    pub probability: f64,
    pub compounded_return: f64,
}

fn binomial_coefficient(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// All `T + 1` compounded outcomes, ordered by number of crisis years.
pub fn binomial_outcomes(market: &AnnualMarket) -> Vec<BinomialRow> {
    let t = market.period_years;
    let f = market.p_high_annual;
    (0..=t)
        .map(|n| BinomialRow {
            n_crisis_years: n,
            probability: binomial_coefficient(t, n)
                * f.powi((t - n) as i32)
                * (1.0 - f).powi(n as i32),
            compounded_return: market.r_risky_high_annual.powi((t - n) as i32)
                * market.r_risky_low_annual.powi(n as i32),
        })
        .collect()
}

/// Two-point period distribution obtained by binning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinnedReturns {
    /// Probability mass of the high bin (not renormalized).
    pub p_high: f64,
    pub r_high: f64,
    pub r_low: f64,
    /// Probability mass that entered the low-bin average.
    pub p_low: f64,
}

/// Bins outcomes with at most `split_after_n` crisis years into the high
/// event; the low event averages outcomes above the split up to
/// `truncate_at_n` (inclusive), or all of them when `None`. Averages are
/// probability weighted.
pub fn bin_returns(
    rows: &[BinomialRow],
    split_after_n: u32,
    truncate_at_n: Option<u32>,
) -> Result<BinnedReturns, CalibrationError> {
    let max_n = rows.iter().map(|r| r.n_crisis_years).max().unwrap_or(0);
    if let Some(cut) = truncate_at_n {
        if cut <= split_after_n {
            return Err(invalid(
                "truncate_at_n",
                f64::from(cut),
                format!("must exceed split_after_n = {split_after_n}"),
            ));
        }
        if cut > max_n {
            return Err(invalid(
                "truncate_at_n",
                f64::from(cut),
                format!("exceeds the period length {max_n}"),
            ));
        }
    }
    let upper = truncate_at_n.unwrap_or(max_n);
    let (mut ph, mut wh, mut pl, mut wl) = (0.0, 0.0, 0.0, 0.0);
    for r in rows {
        if r.n_crisis_years <= split_after_n {
            ph += r.probability;
            wh += r.probability * r.compounded_return;
        } else if r.n_crisis_years <= upper {
            pl += r.probability;
            wl += r.probability * r.compounded_return;
        }
    }
    if ph <= 0.0 {
        return Err(invalid("split_after_n", f64::from(split_after_n), "high bin is empty"));
    }
    if pl <= 0.0 {
        return Err(invalid("split_after_n", f64::from(split_after_n), "low bin is empty"));
    }
    Ok(BinnedReturns {
        p_high: ph,
        r_high: wh / ph,
        r_low: wl / pl,
        p_low: pl,
    })
}

/// Annual expected risky return minus the annual deposit return.
pub fn equity_premium(market: &AnnualMarket) -> f64 {
    market.p_high_annual * market.r_risky_high_annual
        + (1.0 - market.p_high_annual) * market.r_risky_low_annual
        - market.r_deposit_annual
}

pub fn compound_rate(annual: f64, years: u32) -> f64 {
    annual.powi(years as i32)
}

pub fn annualize_rate(period: f64, years: u32) -> f64 {
    period.powf(1.0 / f64::from(years))
}

/// Probability of `s_max` that gives the income process mean `target_mean`.
pub fn p_eps_for_mean(target_mean: f64, s_max: f64, s_min: f64) -> Result<f64, CalibrationError> {
    if !(s_min < s_max) {
        return Err(invalid("s_min", s_min, format!("must be below s_max = {s_max}")));
    }
    if !(s_min <= target_mean && target_mean <= s_max) {
        return Err(invalid(
            "target_mean",
            target_mean,
            format!("must lie in [{s_min}, {s_max}]"),
        ));
    }
    Ok((target_mean - s_min) / (s_max - s_min))
}

/// Mean-preserving income process for a given lower support point.
pub fn income_for_mean(
    target_mean: f64,
    s_max: f64,
    s_min: f64,
) -> Result<IncomeProcess, CalibrationError> {
    let p = p_eps_for_mean(target_mean, s_max, s_min)?;
    Ok(IncomeProcess::new(s_max, s_min, p)?)
}

/// Two-point variance `p s_max^2 + (1-p) s_min^2 - mean^2`.
pub fn income_variance(income: &IncomeProcess) -> f64 {
    let p = income.p_eps;
    let second = p * income.s_max * income.s_max + (1.0 - p) * income.s_min * income.s_min;
    let mean = income.mean();
    (second - mean * mean).max(0.0)
}

/// Search interval for [`calibrate_gamma`].
pub const GAMMA_BRACKET: (f64, f64) = (1e-6, 1e3);

fn deposit_to_consumption(
    template: &ModelInstance,
    agent: AgentKind,
    gamma: f64,
    config: &SolverConfig,
) -> Result<f64, CalibrationError> {
    let mut inst = *template;
    inst.prefs.gamma = gamma;
    let s = solve(&inst, agent, config, None)?;
    Ok(s.alloc.deposits / s.alloc.consumption1)
}

/// Finds the liquidity weight at which the solved deposit-to-consumption
/// ratio equals `target`, by bisection on `ln gamma`.
pub fn calibrate_gamma(
    target: f64,
    template: &ModelInstance,
    agent: AgentKind,
    config: &SolverConfig,
) -> Result<f64, CalibrationError> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(invalid("target", target, "must be positive"));
    }
    let (g_lo, g_hi) = GAMMA_BRACKET;
    let r_lo = deposit_to_consumption(template, agent, g_lo, config)?;
    let r_hi = deposit_to_consumption(template, agent, g_hi, config)?;
    if !(r_lo <= target && target <= r_hi) {
        return Err(CalibrationError::Bracketing {
            target,
            low: r_lo,
            high: r_hi,
            gamma_low: g_lo,
            gamma_high: g_hi,
        });
    }
    let (mut lo, mut hi) = (g_lo.ln(), g_hi.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = deposit_to_consumption(template, agent, mid.exp(), config)?;
        if r < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}
