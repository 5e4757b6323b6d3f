use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealConfig {
    pub initial_temperature: f64,
    pub cooling_rate: f64,
    pub steps_per_temperature: usize,
    /// Per-coordinate proposal widths; the problem supplies defaults when absent.
    #[serde(default)]
    pub proposal_scale: Option<Vec<f64>>,
    pub restarts: usize,
    pub seed: u64,
    /// Evaluation budget of each restart, both phases included.
    pub max_evaluations: usize,
    /// Evaluations spent lowering `J` once the fidelity gate is reached.
    pub pareto_evaluations: usize,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            initial_temperature: 1.0,
            cooling_rate: 0.97,
            steps_per_temperature: 200,
            proposal_scale: None,
            restarts: 8,
            seed: 0,
            max_evaluations: 20_000,
            pareto_evaluations: 2_000,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self, n_coords: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("anneal: {m}")));
        if !(self.initial_temperature > 0.0) {
            return bad("initial_temperature must be positive");
        }
        if !(self.cooling_rate > 0.0 && self.cooling_rate < 1.0) {
            return bad("cooling_rate must lie in (0, 1)");
        }
        if self.steps_per_temperature == 0 || self.restarts == 0 || self.max_evaluations == 0 {
            return bad("steps, restarts and evaluations must be positive");
        }
        if let Some(s) = &self.proposal_scale {
            if s.len() != n_coords {
                return Err(Error::DimensionMismatch {
                    left: s.len(),
                    right: n_coords,
                });
            }
            if s.iter().any(|v| !(*v > 0.0)) {
                return bad("proposal scales must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub fidelity: f64,
    /// Readout cost `J` of the path.
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub index: usize,
    pub seed: u64,
    pub x: Vec<f64>,
    pub score: Score,
    pub evaluations: usize,
    pub accepted: usize,
    pub reached_gate: bool,
    /// Best score after each temperature level.
    #[serde(skip)]
    pub history: Vec<Score>,
}

/// What the search does once the gate is reached.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum GateRule {
    /// Only accept proposals that keep the gate and strictly lower `J`.
    Pareto,
    /// Stop the restart.
    Stop,
}

fn restart_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn run_restart<F>(
    index: usize,
    x0: &[f64],
    scale: &[f64],
    cfg: &AnnealConfig,
    gate: f64,
    rule: GateRule,
    eval: &F,
) -> RestartOutcome
where
    F: Fn(&[f64]) -> Option<Score>,
{
    let seed = restart_seed(cfg.seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x0.len();
    let mut cur = x0.to_vec();
    if index > 0 {
        for i in 0..n {
            cur[i] += 0.5 * scale[i] * gauss(&mut rng);
        }
    }
    let mut evaluations = 1;
    let mut cur_s = eval(&cur).unwrap_or(Score {
        fidelity: 0.0,
        cost: f64::INFINITY,
    });
    let mut best = (cur.clone(), cur_s);
    let mut pareto = cur_s.fidelity >= gate;
    let mut pareto_used = 0;
    let mut accepted = 0;
    let mut temp = cfg.initial_temperature;
    let mut adapt = 1.0;
    let mut history = Vec::new();
    let done = |pareto: bool, pareto_used: usize, evaluations: usize| {
        evaluations >= cfg.max_evaluations
            || (pareto && (rule == GateRule::Stop || pareto_used >= cfg.pareto_evaluations))
    };
    'outer: while !done(pareto, pareto_used, evaluations) {
        let mut acc_here = 0;
        for _ in 0..cfg.steps_per_temperature {
            if done(pareto, pareto_used, evaluations) {
                break 'outer;
            }
            let p = 2.0 / n as f64;
            let mut y = cur.clone();
            let mut moved = false;
            for i in 0..n {
                if rng.gen::<f64>() < p {
                    y[i] += adapt * scale[i] * gauss(&mut rng);
                    moved = true;
                }
            }
            if !moved {
                let i = rng.gen_range(0..n);
                y[i] += adapt * scale[i] * gauss(&mut rng);
            }
            let u: f64 = rng.gen();
            evaluations += 1;
            if pareto {
                pareto_used += 1;
            }
            let Some(s) = eval(&y) else { continue };
            if !(s.fidelity.is_finite() && s.cost.is_finite()) {
                continue;
            }
            let take = if pareto {
                s.fidelity >= gate && s.cost < cur_s.cost
            } else {
                let de = cur_s.fidelity - s.fidelity;
                de <= 0.0 || u < (-de / temp).exp()
            };
            if take {
                cur = y;
                cur_s = s;
                accepted += 1;
                acc_here += 1;
                if pareto || cur_s.fidelity > best.1.fidelity {
                    best = (cur.clone(), cur_s);
                }
                if !pareto && cur_s.fidelity >= gate {
                    pareto = true;
                    best = (cur.clone(), cur_s);
                }
            }
        }
        let rate = acc_here as f64 / cfg.steps_per_temperature as f64;
        if rate > 0.4 {
            adapt = (adapt * 1.3).min(10.0);
        } else if rate < 0.15 {
            adapt = (adapt * 0.7).max(1e-4);
        }
        temp *= cfg.cooling_rate;
        history.push(best.1);
        if !pareto {
            // restart each temperature from the best point found so far
            if cur_s.fidelity < best.1.fidelity - 10.0 * temp {
                cur = best.0.clone();
                cur_s = best.1;
            }
        }
    }
    history.push(best.1);
    RestartOutcome {
        index,
        seed,
        x: best.0,
        score: best.1,
        evaluations,
        accepted,
        reached_gate: best.1.fidelity >= gate,
        history,
    }
}

/// Runs the restarts in parallel and returns them in index order.
pub(crate) fn anneal<F>(
    x0: &[f64],
    scale: &[f64],
    cfg: &AnnealConfig,
    gate: f64,
    rule: GateRule,
    eval: F,
) -> Vec<RestartOutcome>
where
    F: Fn(&[f64]) -> Option<Score> + Sync,
{
    (0..cfg.restarts)
        .into_par_iter()
        .map(|i| run_restart(i, x0, scale, cfg, gate, rule, &eval))
        .collect()
}

/// Gate-reaching restarts win by lowest cost, otherwise highest fidelity;
/// ties go to the lowest index.
pub(crate) fn pick_best(outcomes: &[RestartOutcome], by_cost: bool) -> &RestartOutcome {
    let mut best = &outcomes[0];
    for o in &outcomes[1..] {
        let better = match (o.reached_gate, best.reached_gate) {
            (true, false) => true,
            (false, true) => false,
            (true, true) if by_cost => o.score.cost < best.score.cost,
            _ => o.score.fidelity > best.score.fidelity,
        };
        if better {
            best = o;
        }
    }
    best
}
