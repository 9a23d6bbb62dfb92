//! Synthetic two-wave panels drawn from the logit model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{design_matrix, inverse_link, InferenceError, PanelData, PanelRow, SpecKind};

/// Pre- and post-policy survey years.
pub const WAVES: [i64; 2] = [2010, 2012];

/// Demographic controls generated for every household.
pub const DEFAULT_CONTROLS: [&str; 5] = ["age", "age_sq", "married", "female", "high_risk_aversion"];

pub const DEFAULT_LITERACY: [f64; 4] = [0.25, 0.25, 0.25, 0.25];

/// Coefficients used when no truth is supplied.
pub fn default_truth(kind: SpecKind) -> Vec<(String, f64)> {
    let mut t: Vec<(&str, f64)> = vec![("alpha", -1.5), ("time", 0.25)];
    match kind {
        SpecKind::LinearScore => t.push(("beta", 0.14)),
        SpecKind::ScoreDummies => t.extend([("beta1", 0.6), ("beta2", 0.2), ("beta3", 0.45)]),
    }
    t.extend([
        ("gamma1", 0.3),
        ("gamma2", 0.5),
        ("gamma3", 0.6),
        ("age", 0.02),
        ("age_sq", -0.01),
        ("married", 0.2),
        ("female", -0.1),
        ("high_risk_aversion", -0.5),
    ]);
    t.into_iter().map(|(n, v)| (n.to_string(), v)).collect()
}

/// Draws a balanced two-wave panel. Literacy is fixed per household; age
/// advances two years between waves; the other controls are fixed.
/// Outcomes are independent Bernoulli draws from the logit model with
/// coefficients `truth`. Deterministic given `seed`.
pub fn synth_panel(
    truth: &[(String, f64)],
    n_households: usize,
    literacy_distribution: [f64; 4],
    seed: u64,
) -> Result<PanelData, InferenceError> {
    let total: f64 = literacy_distribution.iter().sum();
    if (total - 1.0).abs() > 1e-9 || literacy_distribution.iter().any(|p| !(*p >= 0.0)) {
        return Err(InferenceError::InvalidParameter {
            name: "literacy_distribution",
            reason: format!("must be probabilities summing to 1, sum is {total}"),
        });
    }
    if n_households == 0 {
        return Err(InferenceError::InvalidParameter {
            name: "n_households",
            reason: "must be positive".to_string(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(2 * n_households);
    for h in 0..n_households {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut ls = 3u8;
        for (l, p) in literacy_distribution.iter().enumerate() {
            acc += p;
            if u < acc {
                ls = l as u8;
                break;
            }
        }
        let age0 = f64::from(rng.random_range(25u32..=80));
        let married = f64::from(u8::from(rng.random_bool(0.6)));
        let female = f64::from(u8::from(rng.random_bool(0.5)));
        let risk_averse = f64::from(u8::from(rng.random_bool(0.4)));
        for (w, &year) in WAVES.iter().enumerate() {
            let age = age0 + 2.0 * w as f64;
            rows.push(PanelRow {
                household_id: format!("h{h:06}"),
                year,
                outcome: false,
                literacy_score: ls,
                controls: vec![age, age * age / 100.0, married, female, risk_averse],
                weight: None,
            });
        }
    }
    let mut panel = PanelData::new(DEFAULT_CONTROLS.iter().map(|s| s.to_string()).collect(), rows)?;
    let names: Vec<String> = truth.iter().map(|(n, _)| n.clone()).collect();
    let x = design_matrix(&panel, &names)?;
    let b = nalgebra::DVector::from_iterator(truth.len(), truth.iter().map(|(_, v)| *v));
    let eta = x * b;
    for (row, e) in panel.rows_mut().iter_mut().zip(eta.iter()) {
        row.outcome = rng.random::<f64>() < inverse_link(*e);
    }
    Ok(panel)
}
