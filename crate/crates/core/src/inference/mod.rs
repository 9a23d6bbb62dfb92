//! Pooled panel logit for participation before and after a policy change,
//! with household-clustered sandwich covariance.
//!
//! The latent index is
//!
//! ```text
//! z = alpha + [time * D] + beta * (D * LS)  + sum_l gamma_l 1{LS = l} + eta' X   (linear score)
//! z = alpha + [time * D] + sum_l beta_l (D * 1{LS = l}) + sum_l gamma_l 1{LS = l} + eta' X   (score dummies)
//! ```
//!
//! where `D` marks the post-policy wave and `LS` is the household's initial
//! literacy score in `0..=3`, with level 0 as the omitted group. Coefficient
//! names are `alpha`, `time`, `beta` or `beta1..beta3`, `gamma1..gamma3`,
//! and the control names.

mod panel;
mod synth;

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

pub use panel::{PanelData, PanelRow, REQUIRED_COLUMNS, WEIGHT_COLUMN};
pub use synth::{default_truth, synth_panel, DEFAULT_CONTROLS, DEFAULT_LITERACY, WAVES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("schema error in column `{column}`: {reason}")]
    Schema { column: String, reason: String },
    #[error("perfect separation on `{column}`: {detail}")]
    Separation { column: String, detail: String },
    #[error("design matrix is rank deficient; collinear columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("IRLS did not converge after {iterations} iterations (step {step:e})")]
    NoConvergence { iterations: usize, step: f64 },
    #[error("unknown coefficient `{0}`")]
    UnknownCoefficient(String),
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// `ln(p / (1 - p))`.
pub fn logit_link(p: f64) -> Result<f64, InferenceError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(InferenceError::Domain(format!("probability {p} outside (0, 1)")));
    }
    Ok((p / (1.0 - p)).ln())
}

/// Logistic function, evaluated without overflow for large `|z|`.
pub fn inverse_link(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Proportional change in the odds implied by a logit coefficient.
pub fn odds_change(coefficient: f64) -> f64 {
    coefficient.exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpecKind {
    /// One interaction slope on the literacy score.
    #[default]
    LinearScore,
    /// One interaction per nonzero literacy level.
    ScoreDummies,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Specification {
    pub kind: SpecKind,
    pub include_time_fe: bool,
    /// Controls to include, by name; each must be a panel column.
    pub control_names: Vec<String>,
}

impl Specification {
    /// Specification using every control in `panel`, with a time effect.
    pub fn for_panel(kind: SpecKind, panel: &PanelData) -> Self {
        Self {
            kind,
            include_time_fe: true,
            control_names: panel.control_names().to_vec(),
        }
    }

    pub fn coefficient_names(&self) -> Vec<String> {
        let mut names = vec!["alpha".to_string()];
        if self.include_time_fe {
            names.push("time".to_string());
        }
        match self.kind {
            SpecKind::LinearScore => names.push("beta".to_string()),
            SpecKind::ScoreDummies => names.extend((1..=3).map(|l| format!("beta{l}"))),
        }
        names.extend((1..=3).map(|l| format!("gamma{l}")));
        names.extend(self.control_names.iter().cloned());
        names
    }
}

/// Value of the regressor called `name` for one row.
fn regressor(name: &str, row: &PanelRow, policy_year: i64, panel: &PanelData) -> Option<f64> {
    let post = f64::from(u8::from(row.year == policy_year));
    let ls = row.literacy_score;
    let level = |s: &str| s.parse::<u8>().ok().filter(|l| (1..=3).contains(l));
    Some(match name {
        "alpha" => 1.0,
        "time" => post,
        "beta" => post * f64::from(ls),
        _ => {
            if let Some(l) = name.strip_prefix("beta").and_then(level) {
                post * f64::from(u8::from(ls == l))
            } else if let Some(l) = name.strip_prefix("gamma").and_then(level) {
                f64::from(u8::from(ls == l))
            } else {
                row.controls[panel.control_index(name)?]
            }
        }
    })
}

/// Design matrix with one row per observation and columns named by `names`.
pub fn design_matrix(panel: &PanelData, names: &[String]) -> Result<DMatrix<f64>, InferenceError> {
    let policy_year = panel.policy_year();
    let rows = panel.rows();
    let mut x = DMatrix::zeros(rows.len(), names.len());
    for (j, name) in names.iter().enumerate() {
        for (i, row) in rows.iter().enumerate() {
            x[(i, j)] = regressor(name, row, policy_year, panel)
                .ok_or_else(|| InferenceError::UnknownCoefficient(name.clone()))?;
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub names: Vec<String>,
    pub coefficients: DVector<f64>,
    /// Household-clustered sandwich covariance.
    pub robust_covariance: DMatrix<f64>,
    pub n_households: usize,
    pub n_observations: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Weighted binomial log-likelihood at the estimate.
    pub log_likelihood: f64,
}

impl FitResult {
    pub fn index(&self, name: &str) -> Result<usize, InferenceError> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| InferenceError::UnknownCoefficient(name.to_string()))
    }

    pub fn coef(&self, name: &str) -> Result<f64, InferenceError> {
        Ok(self.coefficients[self.index(name)?])
    }

    pub fn robust_se(&self, name: &str) -> Result<f64, InferenceError> {
        let i = self.index(name)?;
        Ok(self.robust_covariance[(i, i)].max(0.0).sqrt())
    }

    /// `(name, estimate, robust_se, odds_change)` rows in coefficient order.
    pub fn table(&self) -> Vec<(String, f64, f64, f64)> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let b = self.coefficients[i];
                let se = self.robust_covariance[(i, i)].max(0.0).sqrt();
                (n.clone(), b, se, odds_change(b))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iters: usize,
    /// Convergence threshold on the max-norm of the Newton step.
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-10,
        }
    }
}

/// Reports a binary column whose active rows all share one outcome, or an
/// outcome that never varies.
fn check_separation(
    x: &DMatrix<f64>,
    y: &[f64],
    names: &[String],
) -> Result<(), InferenceError> {
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == y.len() {
        return Err(InferenceError::Separation {
            column: "alpha".to_string(),
            detail: format!("outcome is constant ({ones} of {} positive)", y.len()),
        });
    }
    for (j, name) in names.iter().enumerate() {
        let col = x.column(j);
        if !col.iter().all(|&v| v == 0.0 || v == 1.0) {
            continue;
        }
        for active in [1.0, 0.0] {
            let outs: Vec<f64> = col
                .iter()
                .zip(y)
                .filter(|(v, _)| **v == active)
                .map(|(_, o)| *o)
                .collect();
            if outs.is_empty() || outs.len() == y.len() {
                continue;
            }
            let pos = outs.iter().filter(|&&o| o == 1.0).count();
            if pos == 0 || pos == outs.len() {
                return Err(InferenceError::Separation {
                    column: name.clone(),
                    detail: format!(
                        "all {} rows with `{name}` = {active} have outcome {}",
                        outs.len(),
                        u8::from(pos > 0)
                    ),
                });
            }
        }
    }
    Ok(())
}

/// Greedy Gram-Schmidt pass over the columns; a column is dependent when
/// its residual after projecting out the kept columns is negligible.
fn check_rank(x: &DMatrix<f64>, names: &[String]) -> Result<(), InferenceError> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for (j, name) in names.iter().enumerate() {
        let col: DVector<f64> = x.column(j).into_owned();
        let norm = col.norm();
        let mut v = col;
        for q in &basis {
            let c = q.dot(&v);
            v -= q * c;
        }
        let rnorm = v.norm();
        if norm == 0.0 || rnorm <= 1e-9 * norm {
            dependent.push(name.clone());
        } else {
            basis.push(v / rnorm);
        }
    }
    if dependent.is_empty() {
        Ok(())
    } else {
        Err(InferenceError::RankDeficient { columns: dependent })
    }
}

fn weights(panel: &PanelData) -> Vec<f64> {
    panel.rows().iter().map(|r| r.weight.unwrap_or(1.0)).collect()
}

fn outcomes(panel: &PanelData) -> Vec<f64> {
    panel.rows().iter().map(|r| f64::from(u8::from(r.outcome))).collect()
}

fn log_lik(x: &DMatrix<f64>, y: &[f64], w: &[f64], b: &DVector<f64>) -> f64 {
    let eta = x * b;
    eta.iter()
        .zip(y)
        .zip(w)
        .map(|((&e, &yi), &wi)| {
            // ln(1 + e^e) evaluated stably
            let softplus = if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
            wi * (yi * e - softplus)
        })
        .sum()
}

/// Weighted binomial log-likelihood of `spec` on `panel` at coefficients
/// `coefficients` (ordered as [`Specification::coefficient_names`]).
pub fn log_likelihood(
    panel: &PanelData,
    spec: &Specification,
    coefficients: &[f64],
) -> Result<f64, InferenceError> {
    let names = spec.coefficient_names();
    if coefficients.len() != names.len() {
        return Err(InferenceError::InvalidParameter {
            name: "coefficients",
            reason: format!("expected {} values, got {}", names.len(), coefficients.len()),
        });
    }
    let x = design_matrix(panel, &names)?;
    Ok(log_lik(
        &x,
        &outcomes(panel),
        &weights(panel),
        &DVector::from_column_slice(coefficients),
    ))
}

/// Fits `spec` by iteratively reweighted least squares under independence
/// working correlation; the covariance is clustered by household.
pub fn fit(panel: &PanelData, spec: &Specification) -> Result<FitResult, InferenceError> {
    fit_with(panel, spec, &FitOptions::default())
}

pub fn fit_with(
    panel: &PanelData,
    spec: &Specification,
    opts: &FitOptions,
) -> Result<FitResult, InferenceError> {
    let names = spec.coefficient_names();
    let x = design_matrix(panel, &names)?;
    let clusters: Vec<&str> = panel.rows().iter().map(|r| r.household_id.as_str()).collect();
    fit_matrix(names, &x, &outcomes(panel), &weights(panel), &clusters, opts)
}

/// Logit fit on an explicit design. `clusters[i]` identifies the household
/// of observation `i` for the sandwich covariance.
pub fn fit_matrix(
    names: Vec<String>,
    x: &DMatrix<f64>,
    y: &[f64],
    w: &[f64],
    clusters: &[&str],
    opts: &FitOptions,
) -> Result<FitResult, InferenceError> {
    let (n, k) = x.shape();
    if names.len() != k || y.len() != n || w.len() != n || clusters.len() != n {
        return Err(InferenceError::InvalidParameter {
            name: "design",
            reason: "names, outcomes, weights and clusters must match the design shape".to_string(),
        });
    }
    check_rank(x, &names)?;
    check_separation(x, y, &names)?;

    let mut b = DVector::zeros(k);
    let mut converged = false;
    let mut iterations = 0;
    let mut step_norm = f64::INFINITY;
    let mut info = DMatrix::zeros(k, k);
    for it in 1..=opts.max_iters {
        iterations = it;
        let eta = x * &b;
        let mut score = DVector::zeros(k);
        info.fill(0.0);
        for i in 0..n {
            let mu = inverse_link(eta[i]);
            let xi = x.row(i).transpose();
            score.axpy(w[i] * (y[i] - mu), &xi, 1.0);
            info.ger(w[i] * mu * (1.0 - mu), &xi, &xi, 1.0);
        }
        let chol = info.clone().cholesky().ok_or_else(|| {
            InferenceError::Degenerate("information matrix is not positive definite".to_string())
        })?;
        let step = chol.solve(&score);
        step_norm = step.amax();
        b += step;
        if b.amax() > 50.0 {
            let j = b.iamax();
            return Err(InferenceError::Separation {
                column: names[j].clone(),
                detail: format!("coefficient diverges ({})", b[j]),
            });
        }
        if step_norm <= opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(InferenceError::NoConvergence {
            iterations,
            step: step_norm,
        });
    }

    // Bread at the final estimate, meat from household score sums.
    let eta = x * &b;
    info.fill(0.0);
    let mut cluster_of: HashMap<&str, usize> = HashMap::new();
    let mut scores: Vec<DVector<f64>> = Vec::new();
    for i in 0..n {
        let mu = inverse_link(eta[i]);
        let xi = x.row(i).transpose();
        info.ger(w[i] * mu * (1.0 - mu), &xi, &xi, 1.0);
        let c = *cluster_of.entry(clusters[i]).or_insert_with(|| {
            scores.push(DVector::zeros(k));
            scores.len() - 1
        });
        scores[c].axpy(w[i] * (y[i] - mu), &xi, 1.0);
    }
    let bread = info
        .cholesky()
        .ok_or_else(|| {
            InferenceError::Degenerate("information matrix is not positive definite".to_string())
        })?
        .inverse();
    let mut meat = DMatrix::zeros(k, k);
    for s in &scores {
        meat.ger(1.0, s, s, 1.0);
    }
    let cov = &bread * meat * &bread;
    let cov = (&cov + cov.transpose()) * 0.5;

    Ok(FitResult {
        log_likelihood: log_lik(x, y, w, &b),
        names,
        coefficients: b,
        robust_covariance: cov,
        n_households: scores.len(),
        n_observations: n,
        converged,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaldTest {
    /// `b_i - b_j`.
    pub delta: f64,
    pub std_error: f64,
    pub z: f64,
    /// `P(Z > z)` for a standard normal `Z`.
    pub p_value: f64,
}

/// Upper-tail standard normal probability.
pub fn one_sided_p(z: f64) -> f64 {
    Normal::standard().sf(z)
}

/// Tests `H0: b_i <= b_j` against `b_i > b_j` using the robust covariance.
pub fn wald_one_sided(fit: &FitResult, coef_i: &str, coef_j: &str) -> Result<WaldTest, InferenceError> {
    let i = fit.index(coef_i)?;
    let j = fit.index(coef_j)?;
    let v = &fit.robust_covariance;
    let var = v[(i, i)] + v[(j, j)] - 2.0 * v[(i, j)];
    if !(var > 0.0 && var.is_finite()) {
        return Err(InferenceError::Degenerate(format!(
            "variance of {coef_i} - {coef_j} is {var}"
        )));
    }
    let delta = fit.coefficients[i] - fit.coefficients[j];
    let se = var.sqrt();
    let z = delta / se;
    Ok(WaldTest {
        delta,
        std_error: se,
        z,
        p_value: one_sided_p(z),
    })
}
