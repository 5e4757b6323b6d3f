//! Named presets for the built-in experiments.

use serde::{Deserialize, Serialize};

use crate::c;
use crate::control::{AnnealConfig, ShootingProblem};
use crate::fock::StateSpec;
use crate::gauss::GaussBenchConfig;

pub const PRESET_NAMES: [&str; 4] = ["binomial", "cat-cooling", "cat-to-cat", "gauss-theta0"];

/// Optimizer gate for the presets. It sits above the sample-control gate so
/// the Pareto phase does not pull the optimal endpoint down to the sample level.
pub const PRESET_PARETO_GATE: f64 = 0.97;

/// Shooting preset: problem, optimizer budget and the sample-control gate.
/// `target_fidelity` is the fidelity the optimal solve must reach.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootingPreset {
    pub name: String,
    pub problem: ShootingProblem,
    pub anneal: AnnealConfig,
    pub sample_anneal: AnnealConfig,
    pub target_fidelity: f64,
    pub sample_gate: f64,
    pub n_c: usize,
}

fn problem(initial: StateSpec, target: StateSpec) -> ShootingProblem {
    ShootingProblem {
        initial,
        target,
        dim: 36,
        tau: 15.0,
        t_f: 3.0,
        dt: 1e-3,
        lambda1_max: 0.2,
        fidelity_gate: PRESET_PARETO_GATE,
    }
}

fn anneal_budget() -> AnnealConfig {
    AnnealConfig {
        initial_temperature: 0.01,
        cooling_rate: 0.97,
        steps_per_temperature: 50,
        proposal_scale: None,
        restarts: 8,
        seed: 2024,
        max_evaluations: 4000,
        pareto_evaluations: 2000,
    }
}

pub fn shooting_preset(name: &str) -> Option<ShootingPreset> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (initial, target, gate) = match name {
        "binomial" => (
            StateSpec::FockSuperposition {
                coefficients: vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-s, 0.0)],
            },
            StateSpec::FockSuperposition {
                coefficients: vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)],
            },
            0.93,
        ),
        "cat-cooling" => (
            StateSpec::Cat {
                alpha: c(0.25, -0.75),
            },
            StateSpec::Coherent { alpha: c(0.0, 0.0) },
            0.95,
        ),
        "cat-to-cat" => (
            StateSpec::Cat {
                alpha: c(-0.25, 1.55),
            },
            StateSpec::Cat {
                alpha: c(1.35, -0.75),
            },
            0.93,
        ),
        _ => return None,
    };
    Some(ShootingPreset {
        name: name.to_string(),
        problem: problem(initial, target),
        target_fidelity: gate,
        anneal: anneal_budget(),
        sample_anneal: AnnealConfig {
            seed: 4048,
            ..anneal_budget()
        },
        sample_gate: 0.95,
        n_c: 5,
    })
}

pub fn gauss_preset() -> GaussBenchConfig {
    GaussBenchConfig::default()
}
