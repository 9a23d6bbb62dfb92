//! Interior maximization of expected utility.
//!
//! The objective is strictly concave on the feasible interior, so damped
//! Newton on the first-order conditions converges from any strictly
//! feasible start. Step lengths are backtracked until the trial point is
//! strictly feasible and either raises utility (Armijo) or lowers the
//! residual norm; the second test takes over once utility differences drop
//! below rounding.
//!
//! Risky holdings can sit at the `a = 0` corner (a very strong liquidity
//! motive makes the first unit of the risky asset unattractive), and so can
//! CBDC when deposits and CBDC are perfect substitutes (`sigma = 0`). Those
//! cases are handled with a small active-set search: a reduced problem with
//! the bound variable pinned at zero is accepted when the pinned variable's
//! marginal utility is nonpositive there.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{
    check_feasible, expected_utility, foc_residuals, utility_hessian, AgentKind, Allocation,
    Economy, Holding, ModelError, ModelInstance,
};

/// CBDC holdings are kept at least this far from zero while interior.
const CBDC_FLOOR: f64 = 1e-12;
/// A free bound variable below this fraction of the endowment aborts the
/// interior attempt in favour of the corner.
const BOUND_ABORT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Max-norm stopping tolerance on the FOC residuals, scaled by
    /// `max(1, 1/c1)`.
    pub tol_residual: f64,
    pub max_iters: usize,
    pub backtrack_factor: f64,
    pub min_step: f64,
    /// Fraction of the endowment placed in each asset at the cold start.
    pub init_fraction: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_residual: 1e-10,
            max_iters: 200,
            backtrack_factor: 0.5,
            min_step: 1e-14,
            init_fraction: 0.25,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |name: &'static str, value: f64| Err(SolveError::InvalidConfig { name, value });
        if !(self.tol_residual > 0.0) {
            return bad("tol_residual", self.tol_residual);
        }
        if self.max_iters == 0 {
            return bad("max_iters", 0.0);
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack_factor", self.backtrack_factor);
        }
        if !(self.min_step > 0.0) {
            return bad("min_step", self.min_step);
        }
        if !(self.init_fraction > 0.0 && self.init_fraction < 1.0) {
            return bad("init_fraction", self.init_fraction);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solution {
    pub alloc: Allocation,
    /// Max-norm of the KKT residual: FOC residuals of free holdings and the
    /// sign violation of holdings pinned at zero.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub utility: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid solver setting `{name}` = {value}")]
    InvalidConfig { name: &'static str, value: f64 },
    #[error("empty feasible interior: {0}")]
    Infeasible(String),
    #[error(
        "no convergence after {iterations} iterations (residual {residual_norm:e}); last iterate {last:?}"
    )]
    NoConvergence {
        iterations: usize,
        residual_norm: f64,
        last: Allocation,
    },
    #[error("points_per_dim must be at least 10, got {0}")]
    OracleResolution(usize),
    #[error("sweep point {index}: {source}")]
    Sweep {
        index: usize,
        #[source]
        source: Box<SolveError>,
    },
}

/// A maximization problem with some bounded holdings pinned at zero.
struct Problem<'a> {
    instance: &'a ModelInstance,
    agent: AgentKind,
    layout: &'static [Holding],
    /// Indices into `layout` that are optimized.
    free: Vec<usize>,
}

enum Attempt {
    Done(Solution),
    HitBound,
    WrongActiveSet,
    Failed(SolveError),
}

impl<'a> Problem<'a> {
    fn new(instance: &'a ModelInstance, agent: AgentKind, pinned: &[Holding]) -> Self {
        let layout = Holding::layout(agent, instance.economy);
        let free = (0..layout.len())
            .filter(|&i| !pinned.contains(&layout[i]))
            .collect();
        Self {
            instance,
            agent,
            layout,
            free,
        }
    }

    fn is_bounded(&self, h: Holding) -> bool {
        match h {
            Holding::Risky => true,
            Holding::Cbdc => true,
            Holding::Deposits => false,
        }
    }

    fn alloc(&self, x: &DVector<f64>) -> Allocation {
        let mut full = vec![0.0; self.layout.len()];
        for (k, &i) in self.free.iter().enumerate() {
            full[i] = x[k];
        }
        Allocation::from_vector(self.instance, self.agent, &full)
    }

    fn strictly_feasible(&self, x: &DVector<f64>) -> bool {
        for (k, &i) in self.free.iter().enumerate() {
            let v = x[k];
            let ok = match self.layout[i] {
                Holding::Cbdc => v > CBDC_FLOOR,
                _ => v > 0.0,
            };
            if !ok {
                return false;
            }
        }
        check_feasible(self.instance, self.agent, &self.alloc(x)).is_ok()
    }

    /// Full residual vector, max-norm over free holdings, and the largest
    /// sign violation over pinned holdings.
    fn kkt(&self, alloc: &Allocation) -> Result<(Vec<f64>, f64, f64), ModelError> {
        let r = foc_residuals(self.instance, self.agent, alloc)?;
        let mut free_norm: f64 = 0.0;
        let mut pinned: f64 = 0.0;
        for (i, v) in r.iter().enumerate() {
            if self.free.contains(&i) {
                free_norm = free_norm.max(v.abs());
            } else {
                // Pinned at zero: optimal iff marginal utility <= 0, i.e. residual >= 0.
                pinned = pinned.max((-v).max(0.0));
            }
        }
        Ok((r, free_norm, pinned))
    }

    fn free_gradient(&self, r: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.free.len(), self.free.iter().map(|&i| -r[i]))
    }

    fn free_hessian(&self, alloc: &Allocation) -> Result<DMatrix<f64>, ModelError> {
        let h = utility_hessian(self.instance, self.agent, alloc)?;
        let n = self.free.len();
        Ok(DMatrix::from_fn(n, n, |a, b| h[(self.free[a], self.free[b])]))
    }

    /// Known strictly feasible point: deposits halfway between the amount
    /// that alone covers the worst case and the endowment, the rest split
    /// thinly.
    fn anchor(&self) -> DVector<f64> {
        let inst = self.instance;
        let y = inst.endowment;
        let lo = (-inst.income.s_min / inst.returns.r_deposit).max(0.0);
        let d = lo + 0.5 * (y - lo);
        let others = (y - d) / 4.0;
        DVector::from_iterator(
            self.free.len(),
            self.free.iter().map(|&i| match self.layout[i] {
                Holding::Deposits => d,
                _ => others,
            }),
        )
    }

    fn cold_start(&self, config: &SolverConfig) -> Result<DVector<f64>, SolveError> {
        let y = self.instance.endowment;
        let target = DVector::from_element(self.free.len(), config.init_fraction * y);
        let anchor = self.anchor();
        let mut t = 1.0;
        for _ in 0..80 {
            let x = &anchor + (&target - &anchor) * t;
            if self.strictly_feasible(&x) {
                return Ok(x);
            }
            t *= 0.5;
        }
        if self.strictly_feasible(&anchor) {
            return Ok(anchor);
        }
        Err(SolveError::Infeasible(
            "no strictly feasible starting point".to_string(),
        ))
    }

    fn warm_point(&self, warm: &Allocation) -> Option<DVector<f64>> {
        let x = DVector::from_iterator(
            self.free.len(),
            self.free.iter().map(|&i| warm.get(self.layout[i])),
        );
        self.strictly_feasible(&x).then_some(x)
    }

    fn newton(&self, mut x: DVector<f64>, config: &SolverConfig) -> Attempt {
        let y = self.instance.endowment;
        let mut last_alloc = self.alloc(&x);
        let mut last_norm = f64::INFINITY;
        for iter in 0..=config.max_iters {
            let alloc = self.alloc(&x);
            let (r, norm, pinned) = match self.kkt(&alloc) {
                Ok(v) => v,
                Err(e) => return Attempt::Failed(e.into()),
            };
            last_alloc = alloc;
            last_norm = norm.max(pinned);
            // Residual terms are of order 1/c1; near a corner where c1 is
            // tiny, an absolute tolerance sits below the roundoff floor.
            let tol = config.tol_residual * (1.0 / alloc.consumption1).max(1.0);
            if norm <= tol {
                if pinned > tol {
                    return Attempt::WrongActiveSet;
                }
                let utility = match expected_utility(self.instance, self.agent, &alloc) {
                    Ok(u) => u,
                    Err(e) => return Attempt::Failed(e.into()),
                };
                return Attempt::Done(Solution {
                    alloc,
                    residual_norm: norm.max(pinned),
                    iterations: iter,
                    converged: true,
                    utility,
                });
            }
            if iter == config.max_iters {
                break;
            }
            let g = self.free_gradient(&r);
            let h = match self.free_hessian(&alloc) {
                Ok(h) => h,
                Err(e) => return Attempt::Failed(e.into()),
            };
            let step = newton_direction(&h, &g);
            let f0 = match expected_utility(self.instance, self.agent, &alloc) {
                Ok(u) => u,
                Err(e) => return Attempt::Failed(e.into()),
            };
            let slope = g.dot(&step);
            let mut t = 1.0;
            let mut accepted = None;
            while t >= config.min_step {
                let trial = &x + &step * t;
                if self.strictly_feasible(&trial) {
                    let ta = self.alloc(&trial);
                    let better = match expected_utility(self.instance, self.agent, &ta) {
                        Ok(f1) if f1 >= f0 + 1e-4 * t * slope => true,
                        Ok(_) => matches!(self.kkt(&ta), Ok((_, n, _)) if n < norm),
                        Err(_) => false,
                    };
                    if better {
                        accepted = Some(trial);
                        break;
                    }
                }
                t *= config.backtrack_factor;
            }
            match accepted {
                Some(next) => x = next,
                None => break,
            }
            let at_bound = self.free.iter().enumerate().any(|(k, &i)| {
                self.is_bounded(self.layout[i]) && x[k] < BOUND_ABORT * y
            });
            if at_bound {
                return Attempt::HitBound;
            }
        }
        Attempt::Failed(SolveError::NoConvergence {
            iterations: config.max_iters,
            residual_norm: last_norm,
            last: last_alloc,
        })
    }
}

/// Ascent direction `(-H)^{-1} g`, shifting the diagonal when `-H` is not
/// numerically positive definite.
fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let neg = -h;
    if let Some(ch) = neg.clone().cholesky() {
        return ch.solve(g);
    }
    let scale = neg.diagonal().abs().max().max(1.0);
    let mut shift = 1e-10 * scale;
    loop {
        let shifted = &neg + DMatrix::identity(neg.nrows(), neg.ncols()) * shift;
        if let Some(ch) = shifted.cholesky() {
            return ch.solve(g);
        }
        shift *= 10.0;
        if shift > 1e12 * scale {
            return g.clone();
        }
    }
}

/// Nonempty feasible interior: putting almost everything in deposits (the
/// asset with the best worst-case return) must cover the lowest income.
fn check_interior(instance: &ModelInstance) -> Result<(), SolveError> {
    let best = instance.returns.r_deposit * instance.endowment + instance.income.s_min;
    if best > 0.0 {
        Ok(())
    } else {
        Err(SolveError::Infeasible(format!(
            "R^d * y + s_min = {best} <= 0: no allocation of the endowment covers the lowest income"
        )))
    }
}

/// Maximizes expected utility for `agent` in `instance`.
///
/// With `lambda = 0` in the CBDC economy the CBDC is worthless and
/// return-dominated, so the pre-CBDC problem is solved and `cbdc = 0`.
pub fn solve(
    instance: &ModelInstance,
    agent: AgentKind,
    config: &SolverConfig,
    warm_start: Option<&Allocation>,
) -> Result<Solution, SolveError> {
    instance.validate()?;
    config.validate()?;
    check_interior(instance)?;

    if instance.economy == Economy::WithCbdc && instance.prefs.lambda == 0.0 {
        let reduced = instance.with_economy(Economy::PreCbdc);
        let sol = solve(&reduced, agent, config, warm_start)?;
        let alloc = Allocation::new(instance, agent, sol.alloc.risky, sol.alloc.deposits, 0.0);
        let utility = expected_utility(instance, agent, &alloc)?;
        return Ok(Solution {
            alloc,
            utility,
            ..sol
        });
    }

    let layout = Holding::layout(agent, instance.economy);
    let mut bounded: Vec<Holding> = Vec::new();
    if layout.contains(&Holding::Risky) {
        bounded.push(Holding::Risky);
    }
    if layout.contains(&Holding::Cbdc) && instance.prefs.sigma == 0.0 {
        bounded.push(Holding::Cbdc);
    }

    // Active sets to try, interior first.
    let mut active_sets: Vec<Vec<Holding>> = vec![Vec::new()];
    for mask in 1..(1usize << bounded.len()) {
        active_sets.push(
            bounded
                .iter()
                .enumerate()
                .filter(|(k, _)| mask & (1 << k) != 0)
                .map(|(_, h)| *h)
                .collect(),
        );
    }

    let mut first_error = None;
    for pinned in &active_sets {
        let problem = Problem::new(instance, agent, pinned);
        let start = match warm_start.and_then(|w| problem.warm_point(w)) {
            Some(x) => x,
            None => problem.cold_start(config)?,
        };
        match problem.newton(start, config) {
            Attempt::Done(sol) => return Ok(sol),
            Attempt::HitBound | Attempt::WrongActiveSet => {}
            Attempt::Failed(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    Err(first_error.unwrap_or_else(|| {
        SolveError::Infeasible("no active set satisfies the optimality conditions".to_string())
    }))
}

/// Warm-started continuation along an ordered list of instances.
pub fn solve_path(
    instances: &[ModelInstance],
    agent: AgentKind,
    config: &SolverConfig,
) -> Result<Vec<Solution>, SolveError> {
    let mut out: Vec<Solution> = Vec::with_capacity(instances.len());
    for (index, inst) in instances.iter().enumerate() {
        let warm = out.last().map(|s| s.alloc);
        let sol = solve(inst, agent, config, warm.as_ref()).map_err(|e| SolveError::Sweep {
            index,
            source: Box::new(e),
        })?;
        out.push(sol);
    }
    Ok(out)
}

/// Like [`solve_path`] but keeps going past failed points, warm-starting
/// from the last successful solution.
pub fn solve_path_lenient(
    instances: &[ModelInstance],
    agent: AgentKind,
    config: &SolverConfig,
) -> Vec<Result<Solution, SolveError>> {
    let mut warm: Option<Allocation> = None;
    instances
        .iter()
        .enumerate()
        .map(|(index, inst)| {
            let r = solve(inst, agent, config, warm.as_ref()).map_err(|e| SolveError::Sweep {
                index,
                source: Box::new(e),
            });
            if let Ok(s) = &r {
                warm = Some(s.alloc);
            }
            r
        })
        .collect()
}

/// Best point of an exhaustive lattice search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub alloc: Allocation,
    pub utility: f64,
    /// Spacing of the initial lattice, `y / points_per_dim`.
    pub spacing: f64,
    /// Spacing of the last lattice searched.
    pub final_spacing: f64,
}

/// Exhaustive search over the lattice `{j * y / n : j = 1..n-1}` in each
/// held asset, restricted to feasible points. Returns the best lattice
/// point.
pub fn grid_oracle(
    instance: &ModelInstance,
    agent: AgentKind,
    points_per_dim: usize,
) -> Result<Allocation, SolveError> {
    Ok(grid_oracle_refined(instance, agent, points_per_dim, 0)?.alloc)
}

/// [`grid_oracle`] followed by `levels` local refinements, each searching a
/// 21-point-per-dimension lattice spanning two spacings either side of the
/// current best point.
pub fn grid_oracle_refined(
    instance: &ModelInstance,
    agent: AgentKind,
    points_per_dim: usize,
    levels: usize,
) -> Result<OracleResult, SolveError> {
    instance.validate()?;
    if points_per_dim < 10 {
        return Err(SolveError::OracleResolution(points_per_dim));
    }
    let y = instance.endowment;
    let dims = Holding::layout(agent, instance.economy).len();
    let h = y / points_per_dim as f64;
    let axes: Vec<Vec<f64>> = (0..dims)
        .map(|_| (1..points_per_dim).map(|j| j as f64 * h).collect())
        .collect();
    let (mut best_x, mut best_u) = lattice_search(instance, agent, &axes)
        .ok_or_else(|| SolveError::Infeasible("no feasible lattice point".to_string()))?;

    let mut spacing = h;
    const LOCAL: usize = 21;
    for _ in 0..levels {
        let half = 2.0 * spacing;
        let step = 2.0 * half / (LOCAL - 1) as f64;
        let axes: Vec<Vec<f64>> = best_x
            .iter()
            .map(|&c| (0..LOCAL).map(|j| c - half + j as f64 * step).collect())
            .collect();
        if let Some((x, u)) = lattice_search(instance, agent, &axes) {
            if u > best_u {
                best_x = x;
                best_u = u;
            }
        }
        spacing = step;
    }
    Ok(OracleResult {
        alloc: Allocation::from_vector(instance, agent, &best_x),
        utility: best_u,
        spacing: h,
        final_spacing: spacing,
    })
}

/// Evaluates the Cartesian product of `axes`; ties keep the point that
/// comes first in lexicographic order.
fn lattice_search(
    instance: &ModelInstance,
    agent: AgentKind,
    axes: &[Vec<f64>],
) -> Option<(Vec<f64>, f64)> {
    let dims = axes.len();
    let inner: usize = axes[1..].iter().map(Vec::len).product();
    let y = instance.endowment;
    axes[0]
        .par_iter()
        .enumerate()
        .filter_map(|(i0, &x0)| {
            let mut best: Option<(usize, f64)> = None;
            let mut x = vec![0.0; dims];
            x[0] = x0;
            for flat in 0..inner {
                let mut rem = flat;
                let mut sum = x0;
                for d in (1..dims).rev() {
                    let len = axes[d].len();
                    x[d] = axes[d][rem % len];
                    rem /= len;
                    sum += x[d];
                }
                if sum >= y || x.iter().any(|v| *v <= 0.0) {
                    continue;
                }
                let alloc = Allocation::from_vector(instance, agent, &x);
                if let Ok(u) = expected_utility(instance, agent, &alloc) {
                    if best.is_none_or(|(_, b)| u > b) {
                        best = Some((flat, u));
                    }
                }
            }
            best.map(|(flat, u)| (i0 * inner + flat, u))
        })
        .reduce_with(|a, b| {
            if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                b
            } else {
                a
            }
        })
        .map(|(idx, u)| {
            let mut x = vec![0.0; dims];
            let mut rem = idx % inner;
            x[0] = axes[0][idx / inner];
            for d in (1..dims).rev() {
                let len = axes[d].len();
                x[d] = axes[d][rem % len];
                rem /= len;
            }
            (x, u)
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::IncomeProcess;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn baseline_lfl_prioritizes_deposits() {
        let inst = ModelInstance::baseline(Economy::WithCbdc);
        let s = solve(&inst, AgentKind::Lfl, &cfg(), None).unwrap();
        assert!(s.converged);
        assert!(s.residual_norm <= 1e-10);
        assert!(s.alloc.deposits > s.alloc.cbdc && s.alloc.cbdc > 0.0);
    }

    #[test]
    fn all_four_problems_converge_at_baseline() {
        for economy in [Economy::PreCbdc, Economy::WithCbdc] {
            for agent in [AgentKind::Hfl, AgentKind::Lfl] {
                let inst = ModelInstance::baseline(economy);
                let s = solve(&inst, agent, &cfg(), None).unwrap();
                assert!(s.residual_norm <= 1e-10, "{agent:?} {economy:?}");
                assert!(s.iterations < 50);
            }
        }
    }

    #[test]
    fn empty_interior_is_reported() {
        let inst = ModelInstance::baseline(Economy::PreCbdc)
            .with_income(IncomeProcess::deterministic(-1.3));
        assert!(matches!(
            solve(&inst, AgentKind::Lfl, &cfg(), None),
            Err(SolveError::Infeasible(_))
        ));
    }

    #[test]
    fn corner_risky_holding_at_huge_gamma() {
        let mut inst = ModelInstance::baseline(Economy::WithCbdc);
        inst.prefs.gamma = 1e4;
        let s = solve(&inst, AgentKind::Hfl, &cfg(), None).unwrap();
        assert_eq!(s.alloc.risky, 0.0);
        let r = foc_residuals(&inst, AgentKind::Hfl, &s.alloc).unwrap();
        assert!(r[0] >= 0.0, "risky marginal utility must be nonpositive at the corner");
    }

    #[test]
    fn single_point_path_equals_solve() {
        let inst = ModelInstance::baseline(Economy::WithCbdc);
        let p = solve_path(&[inst], AgentKind::Hfl, &cfg()).unwrap();
        let s = solve(&inst, AgentKind::Hfl, &cfg(), None).unwrap();
        assert_eq!(p, vec![s]);
    }

    #[test]
    fn path_errors_carry_index() {
        let ok = ModelInstance::baseline(Economy::PreCbdc);
        let bad = ok.with_income(IncomeProcess::deterministic(-2.0));
        match solve_path(&[ok, bad], AgentKind::Lfl, &cfg()) {
            Err(SolveError::Sweep { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn oracle_rejects_coarse_lattice() {
        let inst = ModelInstance::baseline(Economy::PreCbdc);
        assert!(matches!(
            grid_oracle(&inst, AgentKind::Lfl, 5),
            Err(SolveError::OracleResolution(5))
        ));
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig {
            backtrack_factor: 1.0,
            ..cfg()
        };
        assert!(bad.validate().is_err());
    }
}
