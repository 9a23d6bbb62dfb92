//! Economic primitives of the two-period, two-agent economy.
//!
//! An agent receives an endowment `y` in the first period, splits it between
//! consumption and the assets available to them, and consumes everything in
//! the second period together with a (possibly negative) income draw.
//! Preferences are logarithmic in consumption plus a logarithmic liquidity
//! term over deposits, or over a CES aggregate of deposits and CBDC once a
//! CBDC exists.
//!
//! Holdings are ordered `[risky, deposits, cbdc]` throughout, restricted to
//! the ones the agent can actually hold (see [`Holding::layout`]).

use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Baseline period discount factor (annual 0.99 compounded over 20 years).
pub const BASELINE_BETA: f64 = 0.82;
/// Baseline CBDC gross return over the period.
pub const BASELINE_R_CBDC: f64 = 1.10;
/// Binned high risky return over the period.
pub const BASELINE_R_RISKY_HIGH: f64 = 3.77;
/// Binned low risky return over the period.
pub const BASELINE_R_RISKY_LOW: f64 = 0.83;
/// Probability of the high risky return.
pub const BASELINE_P_HIGH: f64 = 0.92;
/// Liquidity weight.
pub const BASELINE_GAMMA: f64 = 0.05;
/// Relative CBDC liquidity benefit.
pub const BASELINE_LAMBDA: f64 = 1.0;
/// Inverse elasticity of substitution between deposits and CBDC.
pub const BASELINE_SIGMA: f64 = 1.0 / 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("infeasible allocation: {constraint} violated (value {value})")]
    Infeasible { constraint: Constraint, value: f64 },
}

/// Constraints whose violation makes an allocation unusable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// `c1 = y - a - d - m > 0`
    FirstPeriodConsumption,
    /// Second-period wealth in the lowest joint realization must stay positive.
    WorstCaseWealth,
    /// Deposits must be strictly positive.
    PositiveDeposits,
    /// Holdings must be nonnegative.
    NonnegativeHolding,
    /// The liquidity aggregate must be positive and finite.
    LiquidityArgument,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Constraint::FirstPeriodConsumption => "first-period consumption > 0",
            Constraint::WorstCaseWealth => "worst-case second-period wealth > 0",
            Constraint::PositiveDeposits => "deposits > 0",
            Constraint::NonnegativeHolding => "holdings >= 0",
            Constraint::LiquidityArgument => "liquidity services > 0",
        };
        f.write_str(s)
    }
}

fn invalid(name: &'static str, value: f64, reason: &'static str) -> ModelError {
    ModelError::InvalidParameter {
        name,
        value,
        reason,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preferences {
    /// Period discount factor, strictly inside (0, 1).
    pub beta: f64,
    /// Liquidity weight.
    pub gamma: f64,
    /// CBDC liquidity benefit relative to deposits.
    pub lambda: f64,
    /// Inverse elasticity of substitution; 1 is rejected.
    pub sigma: f64,
}

impl Preferences {
    pub fn new(beta: f64, gamma: f64, lambda: f64, sigma: f64) -> Result<Self, ModelError> {
        let p = Self {
            beta,
            gamma,
            lambda,
            sigma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn baseline() -> Self {
        Self {
            beta: BASELINE_BETA,
            gamma: BASELINE_GAMMA,
            lambda: BASELINE_LAMBDA,
            sigma: BASELINE_SIGMA,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(invalid("beta", self.beta, "must lie strictly inside (0, 1)"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(invalid("gamma", self.gamma, "must be finite and >= 0"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid("lambda", self.lambda, "must be finite and >= 0"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma", self.sigma, "must be finite and >= 0"));
        }
        if self.sigma == 1.0 {
            return Err(invalid(
                "sigma",
                self.sigma,
                "the CES aggregator is undefined at sigma = 1",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnStructure {
    pub r_deposit: f64,
    pub r_cbdc: f64,
    pub r_risky_high: f64,
    pub r_risky_low: f64,
    /// Probability of `r_risky_high`.
    pub p_high: f64,
}

impl ReturnStructure {
    pub fn new(
        r_deposit: f64,
        r_cbdc: f64,
        r_risky_high: f64,
        r_risky_low: f64,
        p_high: f64,
    ) -> Result<Self, ModelError> {
        let r = Self {
            r_deposit,
            r_cbdc,
            r_risky_high,
            r_risky_low,
            p_high,
        };
        r.validate()?;
        Ok(r)
    }

    /// Baseline period returns. The deposit return is stored as `1/beta`
    /// at full precision.
    pub fn baseline() -> Self {
        Self {
            r_deposit: 1.0 / BASELINE_BETA,
            r_cbdc: BASELINE_R_CBDC,
            r_risky_high: BASELINE_R_RISKY_HIGH,
            r_risky_low: BASELINE_R_RISKY_LOW,
            p_high: BASELINE_P_HIGH,
        }
    }

    pub fn expected_risky(&self) -> f64 {
        self.p_high * self.r_risky_high + (1.0 - self.p_high) * self.r_risky_low
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(0.0..=1.0).contains(&self.p_high) {
            return Err(invalid("p_high", self.p_high, "must be a probability"));
        }
        if !(self.r_deposit > 1.0 && self.r_deposit.is_finite()) {
            return Err(invalid("r_deposit", self.r_deposit, "must exceed 1"));
        }
        if !(self.r_cbdc >= 1.0) {
            return Err(invalid("r_cbdc", self.r_cbdc, "must be at least 1"));
        }
        if self.r_cbdc > self.r_deposit {
            return Err(invalid(
                "r_cbdc",
                self.r_cbdc,
                "must not exceed the deposit return",
            ));
        }
        if !(self.r_risky_low >= 0.0 && self.r_risky_low < 1.0) {
            return Err(invalid("r_risky_low", self.r_risky_low, "must lie in [0, 1)"));
        }
        if !(self.expected_risky() > self.r_deposit) {
            return Err(invalid(
                "r_risky_high",
                self.r_risky_high,
                "expected risky return must exceed the deposit return",
            ));
        }
        Ok(())
    }
}

/// Two-point second-period income: `s_max` with probability `p_eps`,
/// `s_min` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncomeProcess {
    pub s_max: f64,
    pub s_min: f64,
    pub p_eps: f64,
}

impl IncomeProcess {
    pub fn new(s_max: f64, s_min: f64, p_eps: f64) -> Result<Self, ModelError> {
        let i = Self { s_max, s_min, p_eps };
        i.validate()?;
        Ok(i)
    }

    pub fn deterministic(s: f64) -> Self {
        Self {
            s_max: s,
            s_min: s,
            p_eps: 1.0,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        self.s_max == self.s_min
    }

    pub fn mean(&self) -> f64 {
        self.p_eps * self.s_max + (1.0 - self.p_eps) * self.s_min
    }

    /// Income branches with nonzero probability as `(probability, income)`.
    pub fn branches(&self) -> Vec<(f64, f64)> {
        if self.is_deterministic() {
            return vec![(1.0, self.s_max)];
        }
        [(self.p_eps, self.s_max), (1.0 - self.p_eps, self.s_min)]
            .into_iter()
            .filter(|(p, _)| *p > 0.0)
            .collect()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(0.0..=1.0).contains(&self.p_eps) {
            return Err(invalid("p_eps", self.p_eps, "must be a probability"));
        }
        if !(self.s_min.is_finite() && self.s_max.is_finite()) {
            return Err(invalid("s_min", self.s_min, "incomes must be finite"));
        }
        if self.s_min > self.s_max {
            return Err(invalid("s_min", self.s_min, "must not exceed s_max"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Economy {
    PreCbdc,
    WithCbdc,
}

impl Economy {
    pub fn label(self) -> &'static str {
        match self {
            Economy::PreCbdc => "pre_cbdc",
            Economy::WithCbdc => "with_cbdc",
        }
    }
}

/// High- or low-financially-literate agent. Only the former can hold the
/// risky asset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgentKind {
    Hfl,
    Lfl,
}

impl AgentKind {
    pub fn label(self) -> &'static str {
        match self {
            AgentKind::Hfl => "HFL",
            AgentKind::Lfl => "LFL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Holding {
    Risky,
    Deposits,
    Cbdc,
}

impl Holding {
    /// The holdings an agent chooses in a given economy, in canonical order.
    pub fn layout(agent: AgentKind, economy: Economy) -> &'static [Holding] {
        use Holding::*;
        match (agent, economy) {
            (AgentKind::Hfl, Economy::PreCbdc) => &[Risky, Deposits],
            (AgentKind::Lfl, Economy::PreCbdc) => &[Deposits],
            (AgentKind::Hfl, Economy::WithCbdc) => &[Risky, Deposits, Cbdc],
            (AgentKind::Lfl, Economy::WithCbdc) => &[Deposits, Cbdc],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelInstance {
    pub endowment: f64,
    pub prefs: Preferences,
    pub returns: ReturnStructure,
    pub income: IncomeProcess,
    pub economy: Economy,
}

impl ModelInstance {
    pub fn new(
        endowment: f64,
        prefs: Preferences,
        returns: ReturnStructure,
        income: IncomeProcess,
        economy: Economy,
    ) -> Result<Self, ModelError> {
        let m = Self {
            endowment,
            prefs,
            returns,
            income,
            economy,
        };
        m.validate()?;
        Ok(m)
    }

    /// Baseline calibration with deterministic second-period income `s = 1`.
    pub fn baseline(economy: Economy) -> Self {
        Self {
            endowment: 1.0,
            prefs: Preferences::baseline(),
            returns: ReturnStructure::baseline(),
            income: IncomeProcess::deterministic(1.0),
            economy,
        }
    }

    pub fn with_economy(mut self, economy: Economy) -> Self {
        self.economy = economy;
        self
    }

    pub fn with_income(mut self, income: IncomeProcess) -> Self {
        self.income = income;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.endowment > 0.0 && self.endowment.is_finite()) {
            return Err(invalid("endowment", self.endowment, "must be positive"));
        }
        self.prefs.validate()?;
        self.returns.validate()?;
        self.income.validate()
    }

    /// Risky-return branches as `(probability, gross return)` for `agent`.
    fn risky_branches(&self, agent: AgentKind) -> Vec<(f64, f64)> {
        match agent {
            AgentKind::Lfl => vec![(1.0, 0.0)],
            AgentKind::Hfl => {
                let r = &self.returns;
                [(r.p_high, r.r_risky_high), (1.0 - r.p_high, r.r_risky_low)]
                    .into_iter()
                    .filter(|(p, _)| *p > 0.0)
                    .collect()
            }
        }
    }

    /// Joint outcome grid as `(probability, risky return, income)`.
    pub fn outcomes(&self, agent: AgentKind) -> Vec<(f64, f64, f64)> {
        let income = self.income.branches();
        let mut out = Vec::with_capacity(4);
        for (pa, ra) in self.risky_branches(agent) {
            for &(pe, s) in &income {
                out.push((pa * pe, ra, s));
            }
        }
        out
    }
}

/// Holdings and first-period consumption of one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    pub risky: f64,
    pub deposits: f64,
    pub cbdc: f64,
    pub consumption1: f64,
}

impl Allocation {
    /// Builds an allocation from raw holdings. Risky holdings are zeroed for
    /// the LFL agent and CBDC holdings are zeroed in the pre-CBDC economy;
    /// consumption is the budget residual.
    pub fn new(
        instance: &ModelInstance,
        agent: AgentKind,
        risky: f64,
        deposits: f64,
        cbdc: f64,
    ) -> Self {
        let risky = if agent == AgentKind::Lfl { 0.0 } else { risky };
        let cbdc = if instance.economy == Economy::PreCbdc {
            0.0
        } else {
            cbdc
        };
        Self {
            risky,
            deposits,
            cbdc,
            consumption1: instance.endowment - risky - deposits - cbdc,
        }
    }

    /// Builds an allocation from a decision vector laid out per
    /// [`Holding::layout`].
    pub fn from_vector(instance: &ModelInstance, agent: AgentKind, x: &[f64]) -> Self {
        let layout = Holding::layout(agent, instance.economy);
        debug_assert_eq!(layout.len(), x.len());
        let (mut a, mut d, mut m) = (0.0, 0.0, 0.0);
        for (h, v) in layout.iter().zip(x) {
            match h {
                Holding::Risky => a = *v,
                Holding::Deposits => d = *v,
                Holding::Cbdc => m = *v,
            }
        }
        Self::new(instance, agent, a, d, m)
    }

    pub fn to_vector(&self, agent: AgentKind, economy: Economy) -> Vec<f64> {
        Holding::layout(agent, economy)
            .iter()
            .map(|h| self.get(*h))
            .collect()
    }

    pub fn get(&self, h: Holding) -> f64 {
        match h {
            Holding::Risky => self.risky,
            Holding::Deposits => self.deposits,
            Holding::Cbdc => self.cbdc,
        }
    }

    pub fn liquid(&self) -> f64 {
        self.deposits + self.cbdc
    }

    pub fn total_holdings(&self) -> f64 {
        self.risky + self.deposits + self.cbdc
    }
}

/// CES aggregate of deposits and CBDC; plain deposits before a CBDC exists.
pub fn liquidity_services(
    d: f64,
    m: f64,
    prefs: &Preferences,
    economy: Economy,
) -> Result<f64, ModelError> {
    if prefs.sigma == 1.0 {
        return Err(invalid("sigma", prefs.sigma, "the CES aggregator is undefined at sigma = 1"));
    }
    if !(d > 0.0) {
        return Err(ModelError::Domain(format!("deposits must be positive, got {d}")));
    }
    if economy == Economy::PreCbdc || m == 0.0 || prefs.lambda == 0.0 {
        return Ok(d);
    }
    if m < 0.0 {
        return Err(ModelError::Domain(format!("CBDC holdings must be nonnegative, got {m}")));
    }
    let rho = 1.0 - prefs.sigma;
    Ok((d.powf(rho) + prefs.lambda * m.powf(rho)).powf(1.0 / rho))
}

/// Second-period wealth in the lowest realization of risky return and income.
pub fn worst_case_wealth(alloc: &Allocation, instance: &ModelInstance, agent: AgentKind) -> f64 {
    let r = &instance.returns;
    let risky = match agent {
        AgentKind::Hfl => r.r_risky_low * alloc.risky,
        AgentKind::Lfl => 0.0,
    };
    risky + r.r_deposit * alloc.deposits + r.r_cbdc * alloc.cbdc + instance.income.s_min
}

/// Checks every constraint the utility needs, in a fixed order.
pub fn check_feasible(
    instance: &ModelInstance,
    agent: AgentKind,
    alloc: &Allocation,
) -> Result<(), ModelError> {
    let fail = |constraint, value| Err(ModelError::Infeasible { constraint, value });
    if !(alloc.risky >= 0.0) {
        return fail(Constraint::NonnegativeHolding, alloc.risky);
    }
    if !(alloc.cbdc >= 0.0) {
        return fail(Constraint::NonnegativeHolding, alloc.cbdc);
    }
    if !(alloc.deposits > 0.0) {
        return fail(Constraint::PositiveDeposits, alloc.deposits);
    }
    if !(alloc.consumption1 > 0.0) {
        return fail(Constraint::FirstPeriodConsumption, alloc.consumption1);
    }
    let w = worst_case_wealth(alloc, instance, agent);
    if !(w > 0.0) {
        return fail(Constraint::WorstCaseWealth, w);
    }
    Ok(())
}

fn log_liquidity(instance: &ModelInstance, alloc: &Allocation) -> Result<f64, ModelError> {
    let z = liquidity_services(alloc.deposits, alloc.cbdc, &instance.prefs, instance.economy)?;
    if !(z > 0.0 && z.is_finite()) {
        return Err(ModelError::Infeasible {
            constraint: Constraint::LiquidityArgument,
            value: z,
        });
    }
    Ok(z.ln())
}

/// `ln c1 + beta E[ln c2] + gamma ln z`, with the expectation taken exactly
/// over the joint outcome grid.
pub fn expected_utility(
    instance: &ModelInstance,
    agent: AgentKind,
    alloc: &Allocation,
) -> Result<f64, ModelError> {
    check_feasible(instance, agent, alloc)?;
    let r = &instance.returns;
    let safe = r.r_deposit * alloc.deposits + r.r_cbdc * alloc.cbdc;
    let mut future = 0.0;
    for (p, ra, s) in instance.outcomes(agent) {
        future += p * (ra * alloc.risky + safe + s).ln();
    }
    let liquidity = if instance.prefs.gamma == 0.0 {
        0.0
    } else {
        instance.prefs.gamma * log_liquidity(instance, alloc)?
    };
    Ok(alloc.consumption1.ln() + instance.prefs.beta * future + liquidity)
}

/// Gradient of `ln z` with respect to `(d, m)`.
fn liquidity_gradient(instance: &ModelInstance, d: f64, m: f64) -> Result<(f64, f64), ModelError> {
    let p = &instance.prefs;
    if instance.economy == Economy::PreCbdc {
        return Ok((1.0 / d, 0.0));
    }
    if p.lambda == 0.0 {
        return Ok((1.0 / d, 0.0));
    }
    if m == 0.0 && p.sigma > 0.0 {
        return Err(ModelError::Infeasible {
            constraint: Constraint::LiquidityArgument,
            value: m,
        });
    }
    let rho = 1.0 - p.sigma;
    let agg = d.powf(rho) + p.lambda * m.powf(rho);
    Ok((d.powf(-p.sigma) / agg, p.lambda * m.powf(-p.sigma) / agg))
}

/// First-order-condition residuals, marginal cost of first-period
/// consumption minus discounted marginal benefit, one entry per holding in
/// [`Holding::layout`] order. This is the negated gradient of
/// [`expected_utility`].
pub fn foc_residuals(
    instance: &ModelInstance,
    agent: AgentKind,
    alloc: &Allocation,
) -> Result<Vec<f64>, ModelError> {
    check_feasible(instance, agent, alloc)?;
    let r = &instance.returns;
    let beta = instance.prefs.beta;
    let gamma = instance.prefs.gamma;
    let safe = r.r_deposit * alloc.deposits + r.r_cbdc * alloc.cbdc;

    // E[1/c2] and E[R^a/c2]
    let mut inv = 0.0;
    let mut risky_inv = 0.0;
    for (p, ra, s) in instance.outcomes(agent) {
        let c2 = ra * alloc.risky + safe + s;
        inv += p / c2;
        risky_inv += p * ra / c2;
    }
    let (zd, zm) = if gamma == 0.0 {
        (0.0, 0.0)
    } else {
        liquidity_gradient(instance, alloc.deposits, alloc.cbdc)?
    };
    let marginal_cost = 1.0 / alloc.consumption1;
    let out = Holding::layout(agent, instance.economy)
        .iter()
        .map(|h| match h {
            Holding::Risky => marginal_cost - beta * risky_inv,
            Holding::Deposits => marginal_cost - (beta * r.r_deposit * inv + gamma * zd),
            Holding::Cbdc => marginal_cost - (beta * r.r_cbdc * inv + gamma * zm),
        })
        .collect();
    Ok(out)
}

/// Hessian of [`expected_utility`] in [`Holding::layout`] coordinates.
pub fn utility_hessian(
    instance: &ModelInstance,
    agent: AgentKind,
    alloc: &Allocation,
) -> Result<DMatrix<f64>, ModelError> {
    check_feasible(instance, agent, alloc)?;
    let layout = Holding::layout(agent, instance.economy);
    let n = layout.len();
    let r = &instance.returns;
    let prefs = &instance.prefs;
    let safe = r.r_deposit * alloc.deposits + r.r_cbdc * alloc.cbdc;

    let mut h = DMatrix::from_element(n, n, -1.0 / (alloc.consumption1 * alloc.consumption1));
    for (p, ra, s) in instance.outcomes(agent) {
        let c2 = ra * alloc.risky + safe + s;
        let k = prefs.beta * p / (c2 * c2);
        let coef = DVector::from_iterator(
            n,
            layout.iter().map(|hd| match hd {
                Holding::Risky => ra,
                Holding::Deposits => r.r_deposit,
                Holding::Cbdc => r.r_cbdc,
            }),
        );
        h -= k * &coef * coef.transpose();
    }

    if prefs.gamma > 0.0 {
        let (hdd, hdm, hmm) = liquidity_hessian(instance, alloc.deposits, alloc.cbdc)?;
        let di = layout.iter().position(|x| *x == Holding::Deposits);
        let mi = layout.iter().position(|x| *x == Holding::Cbdc);
        if let Some(di) = di {
            h[(di, di)] += prefs.gamma * hdd;
            if let Some(mi) = mi {
                h[(di, mi)] += prefs.gamma * hdm;
                h[(mi, di)] += prefs.gamma * hdm;
                h[(mi, mi)] += prefs.gamma * hmm;
            }
        }
    }
    Ok(h)
}

/// Second derivatives `(dd, dm, mm)` of `ln z`.
fn liquidity_hessian(instance: &ModelInstance, d: f64, m: f64) -> Result<(f64, f64, f64), ModelError> {
    let p = &instance.prefs;
    if instance.economy == Economy::PreCbdc || p.lambda == 0.0 {
        return Ok((-1.0 / (d * d), 0.0, 0.0));
    }
    if m == 0.0 && p.sigma > 0.0 {
        return Err(ModelError::Infeasible {
            constraint: Constraint::LiquidityArgument,
            value: m,
        });
    }
    let s = p.sigma;
    let rho = 1.0 - s;
    let agg = d.powf(rho) + p.lambda * m.powf(rho);
    let gd = d.powf(-s);
    let gm = p.lambda * m.powf(-s);
    let dd = -s * d.powf(-s - 1.0) / agg - rho * gd * gd / (agg * agg);
    let dm = -rho * gd * gm / (agg * agg);
    let mm = if m == 0.0 {
        // sigma == 0 here: the aggregate is linear in m.
        -rho * gm * gm / (agg * agg)
    } else {
        -s * p.lambda * m.powf(-s - 1.0) / agg - rho * gm * gm / (agg * agg)
    };
    Ok((dd, dm, mm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn prefs(lambda: f64, sigma: f64) -> Preferences {
        Preferences {
            beta: 0.82,
            gamma: 0.05,
            lambda,
            sigma,
        }
    }

    #[test]
    fn ces_symmetric_point() {
        let z = liquidity_services(1.0, 1.0, &prefs(1.0, 1.0 / 3.0), Economy::WithCbdc).unwrap();
        assert_relative_eq!(z, 2f64.powf(1.5), max_relative = 1e-14);
        assert_relative_eq!(z, 2.8284, epsilon = 1e-4);
    }

    #[test]
    fn ces_collapses_without_cbdc() {
        let p = prefs(1.0, 1.0 / 3.0);
        assert_eq!(liquidity_services(0.4, 0.0, &p, Economy::WithCbdc).unwrap(), 0.4);
        assert_eq!(liquidity_services(0.4, 0.7, &prefs(0.0, 0.5), Economy::WithCbdc).unwrap(), 0.4);
        assert_eq!(liquidity_services(0.4, 0.7, &p, Economy::PreCbdc).unwrap(), 0.4);
    }

    #[test]
    fn ces_direct_value() {
        // Second route: exponentiate the log-sum form.
        let (d, m, s) = (0.3f64, 0.2f64, 1.0 / 3.0);
        let rho = 1.0 - s;
        let other = (((rho * d.ln()).exp() + (rho * m.ln()).exp()).ln() / rho).exp();
        let z = liquidity_services(d, m, &prefs(1.0, s), Economy::WithCbdc).unwrap();
        assert_relative_eq!(z, other, max_relative = 1e-13);
        assert_relative_eq!(z, 0.702348, epsilon = 1e-6);
    }

    #[test]
    fn ces_rejects_bad_inputs() {
        let mut p = prefs(1.0, 1.0);
        assert!(matches!(
            liquidity_services(0.3, 0.2, &p, Economy::WithCbdc),
            Err(ModelError::InvalidParameter { name: "sigma", .. })
        ));
        p.sigma = 0.5;
        assert!(matches!(
            liquidity_services(0.0, 0.2, &p, Economy::WithCbdc),
            Err(ModelError::Domain(_))
        ));
        assert!(matches!(
            liquidity_services(-1.0, 0.2, &p, Economy::PreCbdc),
            Err(ModelError::Domain(_))
        ));
    }

    #[test]
    fn worst_case_examples() {
        let mut inst = ModelInstance::baseline(Economy::PreCbdc);
        inst.returns.r_deposit = 1.22;
        inst.income = IncomeProcess::deterministic(-0.5);
        let a = Allocation::new(&inst, AgentKind::Lfl, 0.0, 0.5, 0.0);
        assert_relative_eq!(worst_case_wealth(&a, &inst, AgentKind::Lfl), 0.11, epsilon = 1e-12);

        inst.income = IncomeProcess::deterministic(-0.2);
        let a = Allocation::new(&inst, AgentKind::Lfl, 0.0, 0.1, 0.0);
        let w = worst_case_wealth(&a, &inst, AgentKind::Lfl);
        assert_relative_eq!(w, -0.078, epsilon = 1e-12);
        assert!(matches!(
            expected_utility(&inst, AgentKind::Lfl, &a),
            Err(ModelError::Infeasible {
                constraint: Constraint::WorstCaseWealth,
                ..
            })
        ));

        let mut inst = ModelInstance::baseline(Economy::WithCbdc);
        inst.returns.r_deposit = 1.22;
        inst.income = IncomeProcess::new(1.0, -0.6, 0.5).unwrap();
        let a = Allocation::new(&inst, AgentKind::Hfl, 0.2, 0.3, 0.1);
        assert_relative_eq!(worst_case_wealth(&a, &inst, AgentKind::Hfl), 0.042, epsilon = 1e-12);
    }

    #[test]
    fn lfl_pre_cbdc_hand_value() {
        let mut inst = ModelInstance::baseline(Economy::PreCbdc);
        inst.returns.r_deposit = 1.22;
        inst.prefs.gamma = 0.0;
        let a = Allocation::new(&inst, AgentKind::Lfl, 0.0, 0.5, 0.0);
        let u = expected_utility(&inst, AgentKind::Lfl, &a).unwrap();
        let hand = 0.5f64.ln() + 0.82 * 1.61f64.ln();
        assert_relative_eq!(u, hand, epsilon = 1e-14);
        assert_relative_eq!(u, -0.302635, epsilon = 1e-6);
    }

    #[test]
    fn hfl_matches_four_branch_sum() {
        let inst = ModelInstance::baseline(Economy::WithCbdc)
            .with_income(IncomeProcess::new(1.25, -0.25, 0.8).unwrap());
        let (a, d, m) = (0.3, 0.1, 0.05);
        let alloc = Allocation::new(&inst, AgentKind::Hfl, a, d, m);
        let r = inst.returns;
        let p = inst.prefs;
        let c2 = |ra: f64, s: f64| ra * a + r.r_deposit * d + r.r_cbdc * m + s;
        let brute = (1.0 - a - d - m).ln()
            + p.beta
                * (r.p_high * 0.8 * c2(r.r_risky_high, 1.25).ln()
                    + r.p_high * 0.2 * c2(r.r_risky_high, -0.25).ln()
                    + (1.0 - r.p_high) * 0.8 * c2(r.r_risky_low, 1.25).ln()
                    + (1.0 - r.p_high) * 0.2 * c2(r.r_risky_low, -0.25).ln())
            + p.gamma * ((d.powf(2.0 / 3.0) + m.powf(2.0 / 3.0)).powf(1.5)).ln();
        let u = expected_utility(&inst, AgentKind::Hfl, &alloc).unwrap();
        assert_relative_eq!(u, brute, max_relative = 1e-13);
    }

    #[test]
    fn split_irrelevant_with_equal_returns() {
        let mut inst = ModelInstance::baseline(Economy::WithCbdc);
        inst.prefs.gamma = 0.0;
        inst.returns.r_cbdc = inst.returns.r_deposit;
        for agent in [AgentKind::Hfl, AgentKind::Lfl] {
            let u1 = expected_utility(&inst, agent, &Allocation::new(&inst, agent, 0.2, 0.3, 0.1)).unwrap();
            let u2 = expected_utility(&inst, agent, &Allocation::new(&inst, agent, 0.2, 0.15, 0.25)).unwrap();
            assert_relative_eq!(u1, u2, epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_forcing() {
        let inst = ModelInstance::baseline(Economy::PreCbdc);
        let a = Allocation::new(&inst, AgentKind::Lfl, 0.3, 0.2, 0.1);
        assert_eq!(a.risky, 0.0);
        assert_eq!(a.cbdc, 0.0);
        assert_eq!(a.consumption1, 1.0 - 0.0 - 0.2 - 0.0);
    }

    #[test]
    fn infeasible_consumption_is_named() {
        let inst = ModelInstance::baseline(Economy::WithCbdc);
        let a = Allocation::new(&inst, AgentKind::Hfl, 0.6, 0.3, 0.2);
        assert!(matches!(
            foc_residuals(&inst, AgentKind::Hfl, &a),
            Err(ModelError::Infeasible {
                constraint: Constraint::FirstPeriodConsumption,
                ..
            })
        ));
    }

    #[test]
    fn deposit_foc_exceeds_cbdc_foc_on_diagonal() {
        // Residuals are cost minus benefit; at d = m with lambda = 1 the
        // liquidity terms cancel and only the return gap remains.
        let inst = ModelInstance::baseline(Economy::WithCbdc);
        for &x in &[0.05, 0.1, 0.2, 0.3] {
            let a = Allocation::new(&inst, AgentKind::Lfl, 0.0, x, x);
            let r = foc_residuals(&inst, AgentKind::Lfl, &a).unwrap();
            let benefit_d = 1.0 / a.consumption1 - r[0];
            let benefit_m = 1.0 / a.consumption1 - r[1];
            assert!(benefit_d > benefit_m, "x = {x}");
            assert!(r[1] > r[0]);
        }
    }

    #[test]
    fn validation_rejects_ordering_violations() {
        assert!(Preferences::new(1.0, 0.05, 1.0, 0.3).is_err());
        assert!(Preferences::new(0.8, 0.05, 1.0, 1.0).is_err());
        assert!(ReturnStructure::new(1.2, 1.3, 3.0, 0.8, 0.9).is_err());
        assert!(ReturnStructure::new(1.2, 0.9, 3.0, 0.8, 0.9).is_err());
        assert!(ReturnStructure::new(1.2, 1.1, 1.1, 0.8, 0.9).is_err());
        assert!(IncomeProcess::new(0.0, 1.0, 0.5).is_err());
        assert!(ReturnStructure::baseline().validate().is_ok());
    }
}
