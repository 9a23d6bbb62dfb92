//! Flat `block.key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Omitted keys take
//! the baseline calibration. Unknown or repeated keys are errors.

use std::path::PathBuf;

use thiserror::Error;

use crate::analysis::{SweepMode, DEFAULT_GRID_POINTS, DEFAULT_S_MAX, DEFAULT_S_MIN_RANGE, DEFAULT_S_RANGE, DEFAULT_TARGET_MEAN};
use crate::calibration::AnnualMarket;
use crate::model::{Economy, IncomeProcess, ModelInstance};
use crate::solver::SolverConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: `{key}`: cannot parse `{value}`")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub s_start: f64,
    pub s_end: f64,
    pub s_points: usize,
    pub s_min_start: f64,
    pub s_min_end: f64,
    pub s_min_points: usize,
    pub s_max: f64,
    pub target_mean: f64,
    /// CBDC returns to sweep; `None` means the figure grid plus `R^d`.
    pub r_m_values: Option<Vec<f64>>,
    /// Deterministic income used by the CBDC-return sweep.
    pub r_m_income: f64,
    pub mode: SweepMode,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            s_start: DEFAULT_S_RANGE.0,
            s_end: DEFAULT_S_RANGE.1,
            s_points: DEFAULT_GRID_POINTS,
            s_min_start: DEFAULT_S_MIN_RANGE.0,
            s_min_end: DEFAULT_S_MIN_RANGE.1,
            s_min_points: DEFAULT_GRID_POINTS,
            s_max: DEFAULT_S_MAX,
            target_mean: DEFAULT_TARGET_MEAN,
            r_m_values: None,
            r_m_income: 1.0,
            mode: SweepMode::Warm,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Period calibration and the income process used by `solve`.
    pub instance: ModelInstance,
    pub market: AnnualMarket,
    pub bin_split: u32,
    pub bin_truncate: Option<u32>,
    pub sweep: SweepSettings,
    pub solver: SolverConfig,
    pub output_dir: PathBuf,
    pub plot: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            instance: ModelInstance::baseline(Economy::WithCbdc),
            market: AnnualMarket::default(),
            bin_split: 2,
            bin_truncate: Some(5),
            sweep: SweepSettings::default(),
            solver: SolverConfig::default(),
            output_dir: PathBuf::from("."),
            plot: false,
        }
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "on" | "yes" | "1" => Some(true),
        "false" | "off" | "no" | "0" => Some(false),
        _ => None,
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen: Vec<String> = Vec::new();
        let mut r_deposit_set = false;
        let mut income = (None, None, None);

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                reason: format!("expected `key = value`, got `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.to_string(),
                });
            }
            seen.push(key.to_string());

            let bad = || ConfigError::BadValue {
                line,
                key: key.to_string(),
                value: value.to_string(),
            };
            let f = || value.parse::<f64>().map_err(|_| bad());
            let u = || value.parse::<usize>().map_err(|_| bad());
            let u32_ = || value.parse::<u32>().map_err(|_| bad());

            let inst = &mut cfg.instance;
            let sw = &mut cfg.sweep;
            match key {
                "calibration.y" => inst.endowment = f()?,
                "calibration.beta" => inst.prefs.beta = f()?,
                "calibration.r_deposit" => {
                    inst.returns.r_deposit = f()?;
                    r_deposit_set = true;
                }
                "calibration.r_cbdc" => inst.returns.r_cbdc = f()?,
                "calibration.r_risky_high" => inst.returns.r_risky_high = f()?,
                "calibration.r_risky_low" => inst.returns.r_risky_low = f()?,
                "calibration.p_high" => inst.returns.p_high = f()?,
                "calibration.gamma" => inst.prefs.gamma = f()?,
                "calibration.lambda" => inst.prefs.lambda = f()?,
                "calibration.sigma" => inst.prefs.sigma = f()?,
                "calibration.period_years" => cfg.market.period_years = u32_()?,
                "calibration.bin_split" => cfg.bin_split = u32_()?,
                "calibration.bin_truncate" => {
                    cfg.bin_truncate = if value == "none" { None } else { Some(u32_()?) }
                }
                "market.r_risky_high" => cfg.market.r_risky_high_annual = f()?,
                "market.r_risky_low" => cfg.market.r_risky_low_annual = f()?,
                "market.p_high" => cfg.market.p_high_annual = f()?,
                "market.r_deposit" => cfg.market.r_deposit_annual = f()?,
                "income.s_max" => income.0 = Some(f()?),
                "income.s_min" => income.1 = Some(f()?),
                "income.p_eps" => income.2 = Some(f()?),
                "sweep.s_start" => sw.s_start = f()?,
                "sweep.s_end" => sw.s_end = f()?,
                "sweep.s_points" => sw.s_points = u()?,
                "sweep.s_min_start" => sw.s_min_start = f()?,
                "sweep.s_min_end" => sw.s_min_end = f()?,
                "sweep.s_min_points" => sw.s_min_points = u()?,
                "sweep.s_max" => sw.s_max = f()?,
                "sweep.target_mean" => sw.target_mean = f()?,
                "sweep.r_m_values" => {
                    let vals = value
                        .split(',')
                        .map(|v| v.trim().parse::<f64>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| bad())?;
                    sw.r_m_values = Some(vals);
                }
                "sweep.r_m_income" => sw.r_m_income = f()?,
                "sweep.mode" => {
                    sw.mode = match value {
                        "warm" => SweepMode::Warm,
                        "cold" => SweepMode::Cold,
                        _ => return Err(bad()),
                    }
                }
                "solver.tol" => cfg.solver.tol_residual = f()?,
                "solver.max_iters" => cfg.solver.max_iters = u()?,
                "solver.backtrack" => cfg.solver.backtrack_factor = f()?,
                "solver.min_step" => cfg.solver.min_step = f()?,
                "solver.init_fraction" => cfg.solver.init_fraction = f()?,
                "output.dir" => cfg.output_dir = PathBuf::from(value),
                "output.plot" => cfg.plot = parse_bool(value).ok_or_else(bad)?,
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })
                }
            }
        }

        if !r_deposit_set {
            cfg.instance.returns.r_deposit = 1.0 / cfg.instance.prefs.beta;
        }
        cfg.instance.income = match income {
            (None, None, None) => IncomeProcess::deterministic(1.0),
            (Some(s), None, None) | (None, Some(s), None) => IncomeProcess::deterministic(s),
            (Some(hi), Some(lo), p) => IncomeProcess {
                s_max: hi,
                s_min: lo,
                p_eps: p.unwrap_or(if hi == lo { 1.0 } else { 0.5 }),
            },
            _ => {
                return Err(ConfigError::Invalid(
                    "income.p_eps requires both income.s_max and income.s_min".to_string(),
                ))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.instance.validate().map_err(|e| inv(&e))?;
        self.market.validate().map_err(|e| inv(&e))?;
        self.solver.validate().map_err(|e| inv(&e))?;
        if self.bin_truncate.is_some_and(|t| t <= self.bin_split) {
            return Err(ConfigError::Invalid(
                "calibration.bin_truncate must exceed calibration.bin_split".to_string(),
            ));
        }
        if self.bin_truncate.is_some_and(|t| t > self.market.period_years)
            || self.bin_split >= self.market.period_years
        {
            return Err(ConfigError::Invalid(
                "binning indices must not exceed calibration.period_years".to_string(),
            ));
        }
        let s = &self.sweep;
        if s.s_points == 0 || s.s_min_points == 0 {
            return Err(ConfigError::Invalid("sweep point counts must be positive".to_string()));
        }
        let finite = [s.s_start, s.s_end, s.s_min_start, s.s_min_end, s.s_max, s.target_mean, s.r_m_income];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(ConfigError::Invalid("sweep endpoints must be finite".to_string()));
        }
        if s.r_m_values.as_ref().is_some_and(Vec::is_empty) {
            return Err(ConfigError::Invalid("sweep.r_m_values is empty".to_string()));
        }
        Ok(())
    }
}
