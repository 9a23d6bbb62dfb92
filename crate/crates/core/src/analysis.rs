//! Comparative statics over income and CBDC-return grids.

use rayon::prelude::*;
use thiserror::Error;

use crate::calibration::{income_for_mean, CalibrationError};
use crate::model::{AgentKind, Allocation, Economy, IncomeProcess, ModelError, ModelInstance, Preferences};
use crate::solver::{solve, solve_path_lenient, Solution, SolveError, SolverConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: String,
    },
    #[error("no converged {agent} record at sweep value {value}")]
    MissingPoint { agent: &'static str, value: f64 },
    #[error("elasticity undefined: {0}")]
    UndefinedElasticity(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

fn invalid(name: &'static str, value: f64, reason: impl Into<String>) -> AnalysisError {
    AnalysisError::InvalidParameter {
        name,
        value,
        reason: reason.into(),
    }
}

/// `m/d = lambda^(1/sigma)` and the implied CBDC share of liquid assets,
/// the allocation a pure liquidity motive would choose.
pub fn liquidity_limit_ratio(prefs: &Preferences) -> Result<(f64, f64), AnalysisError> {
    if !(prefs.sigma > 0.0) {
        return Err(invalid(
            "sigma",
            prefs.sigma,
            "perfect substitutes have no interior liquidity limit",
        ));
    }
    let ratio = prefs.lambda.powf(1.0 / prefs.sigma);
    Ok((ratio, ratio / (1.0 + ratio)))
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

pub const DEFAULT_GRID_POINTS: usize = 50;
/// Default deterministic income range.
pub const DEFAULT_S_RANGE: (f64, f64) = (0.0, 1.2);
/// Wider range covering the negative-income region of the figures.
pub const WIDE_S_RANGE: (f64, f64) = (-0.5, 1.25);
pub const DEFAULT_S_MIN_RANGE: (f64, f64) = (-0.9, 0.9);
pub const DEFAULT_S_MAX: f64 = 1.25;
pub const DEFAULT_TARGET_MEAN: f64 = 1.0;
/// CBDC returns shown in the figures; the deposit return is appended by
/// [`default_cbdc_return_grid`].
pub const FIGURE_CBDC_RETURNS: [f64; 4] = [1.00, 1.10, 1.15, 1.20];

pub fn default_deterministic_grid() -> Vec<f64> {
    linspace(DEFAULT_S_RANGE.0, DEFAULT_S_RANGE.1, DEFAULT_GRID_POINTS)
}

pub fn default_stochastic_grid() -> Vec<f64> {
    linspace(DEFAULT_S_MIN_RANGE.0, DEFAULT_S_MIN_RANGE.1, DEFAULT_GRID_POINTS)
}

pub fn default_cbdc_return_grid(r_deposit: f64) -> Vec<f64> {
    let mut v = FIGURE_CBDC_RETURNS.to_vec();
    v.push(r_deposit);
    v
}

/// One solved (grid point, agent, economy) cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    /// The varied value: `s`, `s_min` or `R^m`.
    pub sweep_parameter: f64,
    pub agent: AgentKind,
    pub economy: Economy,
    /// `None` when the point failed to solve.
    pub alloc: Option<Allocation>,
    /// `m / (d + m)`; `None` when undefined.
    pub liquid_cbdc_share: Option<f64>,
    /// `m / (a + d + m)`; `None` when undefined.
    pub portfolio_cbdc_share: Option<f64>,
    pub p_eps_used: f64,
    pub error: Option<String>,
}

impl SweepRecord {
    /// Record for one solve attempt; failures keep the error message.
    pub fn from_outcome(
        sweep_parameter: f64,
        agent: AgentKind,
        instance: &ModelInstance,
        outcome: Result<Solution, SolveError>,
    ) -> Self {
        let (alloc, error) = match outcome {
            Ok(s) => (Some(s.alloc), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let ratio = |num: f64, den: f64| (den > 0.0).then(|| num / den);
        Self {
            sweep_parameter,
            agent,
            economy: instance.economy,
            liquid_cbdc_share: alloc.and_then(|a| ratio(a.cbdc, a.liquid())),
            portfolio_cbdc_share: alloc.and_then(|a| ratio(a.cbdc, a.total_holdings())),
            alloc,
            p_eps_used: instance.income.p_eps,
            error,
        }
    }

    pub fn converged(&self) -> bool {
        self.alloc.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepMode {
    /// Independent cold solves, fanned out across threads.
    Cold,
    /// Sequential continuation along the grid.
    #[default]
    Warm,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SweepOptions {
    pub solver: SolverConfig,
    pub mode: SweepMode,
}

const CELLS: [(AgentKind, Economy); 4] = [
    (AgentKind::Hfl, Economy::PreCbdc),
    (AgentKind::Hfl, Economy::WithCbdc),
    (AgentKind::Lfl, Economy::PreCbdc),
    (AgentKind::Lfl, Economy::WithCbdc),
];

/// Solves every cell at every point. Output is ordered by grid point, then
/// agent, then economy, regardless of mode.
fn run(params: &[f64], instances: &[ModelInstance], opts: &SweepOptions) -> Vec<SweepRecord> {
    let columns: Vec<Vec<SweepRecord>> = CELLS
        .par_iter()
        .map(|&(agent, economy)| {
            let insts: Vec<ModelInstance> =
                instances.iter().map(|i| i.with_economy(economy)).collect();
            let outcomes: Vec<Result<Solution, SolveError>> = match opts.mode {
                SweepMode::Warm => solve_path_lenient(&insts, agent, &opts.solver),
                SweepMode::Cold => insts
                    .par_iter()
                    .map(|inst| solve(inst, agent, &opts.solver, None))
                    .collect(),
            };
            params
                .iter()
                .zip(&insts)
                .zip(outcomes)
                .map(|((&p, inst), out)| SweepRecord::from_outcome(p, agent, inst, out))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(params.len() * CELLS.len());
    for i in 0..params.len() {
        for col in &columns {
            out.push(col[i].clone());
        }
    }
    out
}

/// Deterministic second-period income `s_max = s_min = s` at each grid value.
pub fn sweep_deterministic(
    base: &ModelInstance,
    s_values: &[f64],
    opts: &SweepOptions,
) -> Result<Vec<SweepRecord>, AnalysisError> {
    base.validate()?;
    opts.solver.validate()?;
    let instances: Vec<ModelInstance> = s_values
        .iter()
        .map(|&s| base.with_income(IncomeProcess::deterministic(s)))
        .collect();
    Ok(run(s_values, &instances, opts))
}

/// Mean-preserving spreads: `s_min` varies, `s_max` is fixed and `p_eps`
/// keeps the income mean at `target_mean`.
pub fn sweep_stochastic(
    base: &ModelInstance,
    s_min_values: &[f64],
    s_max: f64,
    target_mean: f64,
    opts: &SweepOptions,
) -> Result<Vec<SweepRecord>, AnalysisError> {
    base.validate()?;
    opts.solver.validate()?;
    if !(target_mean < s_max) {
        return Err(invalid("target_mean", target_mean, format!("must be below s_max = {s_max}")));
    }
    let mut instances = Vec::with_capacity(s_min_values.len());
    for &s_min in s_min_values {
        if !(s_min < target_mean) {
            return Err(invalid(
                "s_min",
                s_min,
                format!("must be below the target mean {target_mean}"),
            ));
        }
        instances.push(base.with_income(income_for_mean(target_mean, s_max, s_min)?));
    }
    Ok(run(s_min_values, &instances, opts))
}

/// Varies the CBDC return with the income process held at `income`.
pub fn sweep_cbdc_return(
    base: &ModelInstance,
    r_m_values: &[f64],
    income: IncomeProcess,
    opts: &SweepOptions,
) -> Result<Vec<SweepRecord>, AnalysisError> {
    opts.solver.validate()?;
    let base = base.with_income(income);
    let mut instances = Vec::with_capacity(r_m_values.len());
    for &r_m in r_m_values {
        if r_m > base.returns.r_deposit {
            return Err(invalid(
                "r_cbdc",
                r_m,
                format!("exceeds the deposit return {}", base.returns.r_deposit),
            ));
        }
        let mut inst = base;
        inst.returns.r_cbdc = r_m;
        inst.validate()?;
        instances.push(inst);
    }
    Ok(run(r_m_values, &instances, opts))
}

/// Records of one agent in one economy, in grid order.
pub fn select(
    records: &[SweepRecord],
    agent: AgentKind,
    economy: Economy,
) -> impl Iterator<Item = &SweepRecord> {
    records
        .iter()
        .filter(move |r| r.agent == agent && r.economy == economy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ElasticityMethod {
    /// Least-squares slope of each holding (in units of the endowment) on
    /// `R^m` across every grid value in the range.
    #[default]
    LevelSlope,
    /// `(dShare / mean share) / (dR / mean R)` of the liquid shares between
    /// the two endpoints.
    Arc,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticityEstimate {
    /// Midpoint of the `R^m` range.
    pub at_parameter: f64,
    pub elasticity_cbdc_share: f64,
    pub elasticity_deposit_share: f64,
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Responsiveness of `agent`'s CBDC and deposit holdings to the CBDC return
/// over `[lower_r_m, upper_r_m]`, from a CBDC-return sweep.
pub fn share_elasticity(
    records: &[SweepRecord],
    agent: AgentKind,
    lower_r_m: f64,
    upper_r_m: f64,
    method: ElasticityMethod,
) -> Result<ElasticityEstimate, AnalysisError> {
    if !(lower_r_m < upper_r_m) {
        return Err(invalid(
            "upper_r_m",
            upper_r_m,
            format!("must exceed lower_r_m = {lower_r_m}"),
        ));
    }
    let in_range: Vec<(f64, Allocation)> = select(records, agent, Economy::WithCbdc)
        .filter(|r| r.sweep_parameter >= lower_r_m && r.sweep_parameter <= upper_r_m)
        .filter_map(|r| r.alloc.map(|a| (r.sweep_parameter, a)))
        .collect();
    let find = |v: f64| {
        in_range
            .iter()
            .find(|(p, _)| *p == v)
            .map(|(_, a)| *a)
            .ok_or(AnalysisError::MissingPoint {
                agent: agent.label(),
                value: v,
            })
    };
    let lo = find(lower_r_m)?;
    let hi = find(upper_r_m)?;
    let at_parameter = 0.5 * (lower_r_m + upper_r_m);

    match method {
        ElasticityMethod::LevelSlope => {
            let y = records_endowment(lo, hi);
            let xs: Vec<f64> = in_range.iter().map(|(p, _)| *p).collect();
            let ms: Vec<f64> = in_range.iter().map(|(_, a)| a.cbdc / y).collect();
            let ds: Vec<f64> = in_range.iter().map(|(_, a)| a.deposits / y).collect();
            Ok(ElasticityEstimate {
                at_parameter,
                elasticity_cbdc_share: ols_slope(&xs, &ms),
                elasticity_deposit_share: ols_slope(&xs, &ds),
            })
        }
        ElasticityMethod::Arc => {
            let arc = |s0: f64, s1: f64, what: &str| {
                let mean = 0.5 * (s0 + s1);
                if mean == 0.0 {
                    return Err(AnalysisError::UndefinedElasticity(format!(
                        "mean {what} share is zero"
                    )));
                }
                Ok(((s1 - s0) / mean) / ((upper_r_m - lower_r_m) / at_parameter))
            };
            let share = |a: &Allocation, h: f64| h / a.liquid();
            Ok(ElasticityEstimate {
                at_parameter,
                elasticity_cbdc_share: arc(share(&lo, lo.cbdc), share(&hi, hi.cbdc), "CBDC")?,
                elasticity_deposit_share: arc(
                    share(&lo, lo.deposits),
                    share(&hi, hi.deposits),
                    "deposit",
                )?,
            })
        }
    }
}

/// First-period endowment implied by two allocations of the same instance.
fn records_endowment(a: Allocation, b: Allocation) -> f64 {
    let y = a.total_holdings() + a.consumption1;
    debug_assert!((y - (b.total_holdings() + b.consumption1)).abs() < 1e-9);
    y
}

/// Lowest sweep value from which `agent`'s liquid holdings stay within
/// `tol` of their value at the highest grid point. Scans downward from the
/// top of the grid and returns the last value still within `tol`; `None`
/// if a record failed to solve.
pub fn stabilization_threshold(
    records: &[SweepRecord],
    agent: AgentKind,
    economy: Economy,
    tol: f64,
) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = select(records, agent, economy)
        .map(|r| r.alloc.map(|a| (r.sweep_parameter, a.liquid())))
        .collect::<Option<_>>()?;
    pts.sort_by(|x, y| y.0.total_cmp(&x.0));
    let plateau = pts.first()?.1;
    let mut threshold = pts[0].0;
    for &(p, l) in &pts {
        if (l - plateau).abs() > tol {
            break;
        }
        threshold = p;
    }
    Some(threshold)
}

/// True if `values` rises to an interior maximum and then falls, allowing
/// changes smaller than `tol` to count as flat.
pub fn is_hump_shaped(values: &[f64], tol: f64) -> bool {
    let Some((peak, _)) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
    else {
        return false;
    };
    if peak == 0 || peak + 1 == values.len() {
        return false;
    }
    let rises = values[..=peak].windows(2).all(|w| w[1] >= w[0] - tol);
    let falls = values[peak..].windows(2).all(|w| w[1] <= w[0] + tol);
    let first = values[0];
    let last = values[values.len() - 1];
    rises && falls && values[peak] > first + tol && values[peak] > last + tol
}

/// Pre- to post-CBDC change in `agent`'s holdings at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Substitution {
    pub sweep_parameter: f64,
    /// `d_pre - d_post`.
    pub deposit_drop: f64,
    /// `m_post`.
    pub cbdc_uptake: f64,
}

impl Substitution {
    /// Less than one-for-one: deposits fall by more than CBDC rises.
    pub fn deposit_drop_exceeds_uptake(&self) -> bool {
        self.deposit_drop >= self.cbdc_uptake
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubstitutionReport {
    pub points: Vec<Substitution>,
    /// Grid values where the deposit drop falls short of the CBDC uptake.
    pub violations: Vec<f64>,
}

impl SubstitutionReport {
    pub fn violations_are_minority(&self) -> bool {
        2 * self.violations.len() < self.points.len()
    }
}

/// Compares pre- and post-CBDC holdings of `agent` at every grid point
/// where both solved.
pub fn substitution_report(records: &[SweepRecord], agent: AgentKind) -> SubstitutionReport {
    let pre: Vec<&SweepRecord> = select(records, agent, Economy::PreCbdc).collect();
    let post: Vec<&SweepRecord> = select(records, agent, Economy::WithCbdc).collect();
    let points: Vec<Substitution> = pre
        .iter()
        .zip(&post)
        .filter_map(|(a, b)| {
            let (pa, pb) = (a.alloc?, b.alloc?);
            Some(Substitution {
                sweep_parameter: a.sweep_parameter,
                deposit_drop: pa.deposits - pb.deposits,
                cbdc_uptake: pb.cbdc,
            })
        })
        .collect();
    let violations = points
        .iter()
        .filter(|s| !s.deposit_drop_exceeds_uptake())
        .map(|s| s.sweep_parameter)
        .collect();
    SubstitutionReport { points, violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn prefs(lambda: f64, sigma: f64) -> Preferences {
        Preferences {
            lambda,
            sigma,
            ..Preferences::baseline()
        }
    }

    #[test]
    fn limit_ratio_cases() {
        let (r, s) = liquidity_limit_ratio(&prefs(1.0, 0.3)).unwrap();
        assert_eq!((r, s), (1.0, 0.5));
        let (r, s) = liquidity_limit_ratio(&prefs(8.0, 3.0)).unwrap();
        assert_relative_eq!(r, 2.0, epsilon = 1e-12);
        assert_relative_eq!(s, 2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(liquidity_limit_ratio(&prefs(0.0, 0.5)).unwrap(), (0.0, 0.0));
        assert!(liquidity_limit_ratio(&prefs(1.0, 0.0)).is_err());
    }

    #[test]
    fn grids() {
        let g = default_deterministic_grid();
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 0.0);
        assert!((g[49] - 1.2).abs() < 1e-15);
        assert_eq!(linspace(0.3, 0.7, 1), vec![0.3]);
        assert_eq!(default_cbdc_return_grid(1.2).len(), 5);
    }

    #[test]
    fn record_layout_and_shares() {
        let base = ModelInstance::baseline(Economy::PreCbdc);
        let recs = sweep_deterministic(&base, &[0.5, 1.0], &SweepOptions::default()).unwrap();
        assert_eq!(recs.len(), 8);
        assert_eq!(recs[0].agent, AgentKind::Hfl);
        assert_eq!(recs[0].economy, Economy::PreCbdc);
        assert_eq!(recs[3].agent, AgentKind::Lfl);
        assert_eq!(recs[3].economy, Economy::WithCbdc);
        for r in &recs {
            let a = r.alloc.unwrap();
            let l = r.liquid_cbdc_share.unwrap();
            assert!((l * a.liquid() - a.cbdc).abs() < 1e-12);
            if r.economy == Economy::PreCbdc {
                assert_eq!(a.cbdc, 0.0);
            }
        }
    }

    #[test]
    fn cold_and_warm_agree() {
        let base = ModelInstance::baseline(Economy::WithCbdc);
        let grid = linspace(0.0, 1.2, 7);
        let warm = sweep_deterministic(&base, &grid, &SweepOptions::default()).unwrap();
        let cold = sweep_deterministic(
            &base,
            &grid,
            &SweepOptions {
                mode: SweepMode::Cold,
                ..Default::default()
            },
        )
        .unwrap();
        for (w, c) in warm.iter().zip(&cold) {
            let (w, c) = (w.alloc.unwrap(), c.alloc.unwrap());
            assert!((w.deposits - c.deposits).abs() < 1e-8);
            assert!((w.cbdc - c.cbdc).abs() < 1e-8);
            assert!((w.risky - c.risky).abs() < 1e-8);
        }
    }

    #[test]
    fn infeasible_points_are_recorded_in_row() {
        let base = ModelInstance::baseline(Economy::PreCbdc);
        let recs = sweep_deterministic(&base, &[1.0, -5.0, 0.5], &SweepOptions::default()).unwrap();
        assert!(recs[..4].iter().all(SweepRecord::converged));
        assert!(recs[4..8].iter().all(|r| !r.converged() && r.error.is_some()));
        assert!(recs[8..].iter().all(SweepRecord::converged));
    }

    #[test]
    fn stochastic_validation() {
        let base = ModelInstance::baseline(Economy::PreCbdc);
        let o = SweepOptions::default();
        assert!(sweep_stochastic(&base, &[1.0], 1.25, 1.0, &o).is_err());
        assert!(sweep_stochastic(&base, &[0.0], 1.0, 1.0, &o).is_err());
        let recs = sweep_stochastic(&base, &[0.0], 1.25, 1.0, &o).unwrap();
        assert_relative_eq!(recs[0].p_eps_used, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn cbdc_return_above_deposit_rejected() {
        let base = ModelInstance::baseline(Economy::WithCbdc);
        let err = sweep_cbdc_return(
            &base,
            &[1.1, 1.3],
            IncomeProcess::deterministic(1.0),
            &SweepOptions::default(),
        );
        assert!(matches!(err, Err(AnalysisError::InvalidParameter { name: "r_cbdc", .. })));
    }

    #[test]
    fn flat_records_have_zero_elasticity() {
        let a = Allocation {
            risky: 0.0,
            deposits: 0.3,
            cbdc: 0.1,
            consumption1: 0.6,
        };
        let rec = |p: f64| SweepRecord {
            sweep_parameter: p,
            agent: AgentKind::Lfl,
            economy: Economy::WithCbdc,
            alloc: Some(a),
            liquid_cbdc_share: Some(0.25),
            portfolio_cbdc_share: Some(0.25),
            p_eps_used: 1.0,
            error: None,
        };
        let recs = [rec(1.0), rec(1.2)];
        for m in [ElasticityMethod::Arc, ElasticityMethod::LevelSlope] {
            let e = share_elasticity(&recs, AgentKind::Lfl, 1.0, 1.2, m).unwrap();
            assert_eq!(e.elasticity_cbdc_share, 0.0);
            assert_eq!(e.elasticity_deposit_share, 0.0);
        }
        assert!(matches!(
            share_elasticity(&recs, AgentKind::Lfl, 1.0, 1.1, ElasticityMethod::Arc),
            Err(AnalysisError::MissingPoint { .. })
        ));
    }

    #[test]
    fn hump_detection() {
        assert!(is_hump_shaped(&[0.1, 0.3, 0.4, 0.2], 1e-9));
        assert!(!is_hump_shaped(&[0.1, 0.2, 0.3], 1e-9));
        assert!(!is_hump_shaped(&[0.3, 0.2, 0.1], 1e-9));
        assert!(!is_hump_shaped(&[0.1, 0.4, 0.2, 0.5, 0.1], 1e-9));
    }

    #[test]
    fn stabilization_scans_down_from_the_top() {
        let inst = ModelInstance::baseline(Economy::PreCbdc);
        let rec = |p: f64, d: f64| {
            let alloc = Allocation::new(&inst, AgentKind::Lfl, 0.0, d, 0.0);
            let sol = Solution {
                alloc,
                residual_norm: 0.0,
                iterations: 0,
                converged: true,
                utility: 0.0,
            };
            SweepRecord::from_outcome(p, AgentKind::Lfl, &inst, Ok(sol))
        };
        let recs = vec![rec(-0.5, 0.6), rec(0.0, 0.305), rec(0.5, 0.3), rec(1.0, 0.3)];
        let th = stabilization_threshold(&recs, AgentKind::Lfl, Economy::PreCbdc, 0.01);
        assert_eq!(th, Some(0.0));
    }
}
