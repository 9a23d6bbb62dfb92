#![allow(dead_code)]

use cbdc_portfolio::model::{
    AgentKind, Economy, IncomeProcess, ModelInstance, Preferences, ReturnStructure,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PAIRINGS: [(AgentKind, Economy); 4] = [
    (AgentKind::Hfl, Economy::PreCbdc),
    (AgentKind::Hfl, Economy::WithCbdc),
    (AgentKind::Lfl, Economy::PreCbdc),
    (AgentKind::Lfl, Economy::WithCbdc),
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random valid instance with a nonempty feasible interior.
pub fn random_instance(rng: &mut ChaCha8Rng, economy: Economy) -> ModelInstance {
    loop {
        let beta = rng.random_range(0.75..0.95);
        let r_deposit = 1.0 / beta;
        let returns = ReturnStructure {
            r_deposit,
            r_cbdc: rng.random_range(1.0..r_deposit),
            r_risky_high: rng.random_range(2.0..4.5),
            r_risky_low: rng.random_range(0.4..0.95),
            p_high: rng.random_range(0.8..0.97),
        };
        let prefs = Preferences {
            beta,
            gamma: rng.random_range(0.02..0.3),
            lambda: rng.random_range(0.5..1.5),
            sigma: rng.random_range(0.15..0.9),
        };
        let s_max = rng.random_range(0.3..1.4);
        let income = if rng.random_bool(0.5) {
            IncomeProcess::deterministic(s_max)
        } else {
            IncomeProcess {
                s_max,
                s_min: rng.random_range(-0.3..s_max),
                p_eps: rng.random_range(0.2..0.95),
            }
        };
        let inst = ModelInstance {
            endowment: 1.0,
            prefs,
            returns,
            income,
            economy,
        };
        if inst.validate().is_ok() && r_deposit + income.s_min > 0.05 {
            return inst;
        }
    }
}
