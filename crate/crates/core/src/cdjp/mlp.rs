use serde::{Deserialize, Serialize};

use crate::band::Band;
use crate::fock::{
    hamiltonian, ket_moments_with, moments, quadratures, Costate, DensityMatrix, Moments,
    OperatorSet,
};
use crate::schedule::{step_count, ControlSchedule, LambdaSwitch};
use crate::sme::{conjugate, finish, normalize, Kernel, StepParams};
use crate::{max_abs, CMat, CVec, Error, Result};

use super::bundle::{
    optimal_lambda1, optimal_readout, optimal_theta, pontryagin_value, rk4_bundle, ScalarBundle,
};
use super::costate::{bundle_from_pair, rk4_pair};

/// Initial state of a most-likely-path integration. Pure states are stepped
/// as kets, which is exact for a single Kraus operator per step.
#[derive(Clone, Debug)]
pub enum MlpStart {
    Density(DensityMatrix),
    Ket(CVec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlMode {
    /// θ* and bang-bang λ1* from the bundle at every step.
    Optimal { lambda1_max: f64 },
    /// θ held fixed, λ1 still bang-bang.
    FixedTheta { theta: f64, lambda1_max: f64 },
    /// Prescribed per-step values; the last entry is reused for the terminal sample.
    Given {
        theta: Vec<f64>,
        lambda1: Vec<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        switches: Vec<LambdaSwitch>,
    },
}

#[derive(Clone, Debug)]
pub struct MlpConfig {
    pub tau: f64,
    pub t_f: f64,
    pub dt: f64,
    pub mode: ControlMode,
    /// Costate co-integrated with a dense copy of ρ for consistency checks.
    pub shadow: Option<Costate>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ShadowDrift {
    /// Max entrywise gap between the bundle and its trace definitions.
    pub bundle: f64,
    /// Max entrywise gap between the Kraus-stepped ρ and the co-integrated one.
    pub rho: f64,
}

/// Samples at `t_k = k dt`, `k = 0..=n`.
#[derive(Clone, Debug)]
pub struct MlpPath {
    pub t: Vec<f64>,
    pub moments: Vec<Moments>,
    pub bundle: Vec<ScalarBundle>,
    pub theta: Vec<f64>,
    pub lambda1: Vec<f64>,
    /// Optimal readout `r_θ` from the bundle.
    pub readout: Vec<f64>,
    pub mean_l: Vec<f64>,
    pub mean_l2: Vec<f64>,
    /// Pontryagin value `K` at each sample.
    pub k_value: Vec<f64>,
    pub cost: f64,
    pub final_state: DensityMatrix,
    pub final_ket: Option<CVec>,
    pub shadow_drift: Option<ShadowDrift>,
}

impl MlpPath {
    pub fn fidelity(&self, target: &DensityMatrix) -> Result<f64> {
        crate::fock::fidelity(&self.final_state, target)
    }

    /// Relative spread `(max K − min K) / max|K|` of the Pontryagin value.
    pub fn k_variation(&self) -> f64 {
        let lo = self.k_value.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self
            .k_value
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let scale = self.k_value.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            0.0
        } else {
            (hi - lo) / scale
        }
    }

    /// CSV with columns `t,theta,lambda1,r,X,P,VarX,Cov,VarP,K`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,theta,lambda1,r,X,P,VarX,Cov,VarP,K\n");
        for k in 0..self.t.len() {
            let m = &self.moments[k];
            out.push_str(&format!(
                "{:.6},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                self.t[k],
                self.theta[k],
                self.lambda1[k],
                self.readout[k],
                m.mean_x,
                m.mean_p,
                m.var_x,
                m.cov_xp,
                m.var_p,
                self.k_value[k]
            ));
        }
        out
    }
}

/// `J = ∫ (r² − 2r⟨L⟩ + ⟨L²⟩) dt / 2τ` by the trapezoid rule on aligned samples.
pub fn cost_functional(r: &[f64], mean_l: &[f64], mean_l2: &[f64], tau: f64, dt: f64) -> f64 {
    let n = r.len().min(mean_l.len()).min(mean_l2.len());
    if n < 2 {
        return 0.0;
    }
    let f = |k: usize| r[k] * r[k] - 2.0 * r[k] * mean_l[k] + mean_l2[k];
    let inner: f64 = (1..n - 1).map(f).sum();
    (0.5 * (f(0) + f(n - 1)) + inner) * dt / (2.0 * tau)
}

enum State {
    Density(DensityMatrix),
    Ket(CVec),
}

impl State {
    fn moments(&self, ops: &OperatorSet, scratch: &mut [CVec; 2]) -> Moments {
        match self {
            State::Density(rho) => moments(rho, ops),
            State::Ket(v) => {
                let [xv, pv] = scratch;
                ket_moments_with(v.as_slice(), ops, xv.as_mut_slice(), pv.as_mut_slice())
            }
        }
    }

    fn dense(&self) -> DensityMatrix {
        match self {
            State::Density(rho) => rho.clone(),
            State::Ket(v) => DensityMatrix::from_ket(v),
        }
    }
}

/// `(⟨L⟩, ⟨L²⟩)` from quadrature moments.
fn l_moments(m: &Moments, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let mean = c * m.mean_x + s * m.mean_p;
    let x2 = m.var_x + m.mean_x * m.mean_x;
    let p2 = m.var_p + m.mean_p * m.mean_p;
    let xp = m.cov_xp + m.mean_x * m.mean_p;
    (mean, c * c * x2 + s * s * p2 + 2.0 * s * c * xp)
}

/// Integrates the state under the readout and controls implied by the scalar
/// bundle. Returns the sampled path and the realized per-step schedule.
pub fn mlp_run(
    start: &MlpStart,
    bundle0: &ScalarBundle,
    cfg: &MlpConfig,
    ops: &OperatorSet,
) -> Result<(MlpPath, ControlSchedule)> {
    let (tau, dt) = (cfg.tau, cfg.dt);
    StepParams {
        dt,
        tau,
        theta: 0.0,
        lambda1: 0.0,
        lambda2: 0.0,
    }
    .validate()?;
    let n = step_count(cfg.t_f, dt)?;
    if !bundle0.is_finite() {
        return Err(Error::InvalidParameter("non-finite initial bundle".into()));
    }
    let lmax = match &cfg.mode {
        ControlMode::Optimal { lambda1_max } | ControlMode::FixedTheta { lambda1_max, .. } => {
            if !(*lambda1_max >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "lambda1_max = {lambda1_max}"
                )));
            }
            *lambda1_max
        }
        ControlMode::Given {
            theta,
            lambda1,
            switches,
        } => {
            if theta.len() < n.max(1) || lambda1.len() < n.max(1) {
                return Err(Error::DimensionMismatch {
                    left: theta.len().min(lambda1.len()),
                    right: n,
                });
            }
            let m = lambda1.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
            switches.iter().fold(m, |m, s| m.max(s.lambda1_after.abs()))
        }
    };
    let mut state = match start {
        MlpStart::Density(rho) => {
            if rho.dim() != ops.n() {
                return Err(Error::DimensionMismatch {
                    left: rho.dim(),
                    right: ops.n(),
                });
            }
            State::Density(rho.clone())
        }
        MlpStart::Ket(v) => {
            if v.len() != ops.n() {
                return Err(Error::DimensionMismatch {
                    left: v.len(),
                    right: ops.n(),
                });
            }
            let mut v = v.clone();
            normalize(v.as_mut_slice());
            State::Ket(v)
        }
    };
    let controls = |k: usize, b: &ScalarBundle, prev: f64| -> (f64, f64) {
        match &cfg.mode {
            ControlMode::Optimal { lambda1_max } => {
                (optimal_theta(b, prev), optimal_lambda1(b.k20, *lambda1_max))
            }
            ControlMode::FixedTheta { theta, lambda1_max } => {
                (*theta, optimal_lambda1(b.k20, *lambda1_max))
            }
            ControlMode::Given { theta, lambda1, .. } => {
                let i = k.min(theta.len() - 1);
                (theta[i], lambda1[i])
            }
        }
    };

    let mut shadow = cfg
        .shadow
        .as_ref()
        .map(|s| (state.dense().matrix().clone(), s.matrix().clone()));
    let mut drift = ShadowDrift::default();

    let mut path = MlpPath {
        t: Vec::with_capacity(n + 1),
        moments: Vec::with_capacity(n + 1),
        bundle: Vec::with_capacity(n + 1),
        theta: Vec::with_capacity(n + 1),
        lambda1: Vec::with_capacity(n + 1),
        readout: Vec::with_capacity(n + 1),
        mean_l: Vec::with_capacity(n + 1),
        mean_l2: Vec::with_capacity(n + 1),
        k_value: Vec::with_capacity(n + 1),
        cost: 0.0,
        final_state: state.dense(),
        final_ket: None,
        shadow_drift: None,
    };
    let mut sched = ControlSchedule {
        dt,
        theta: Vec::with_capacity(n),
        lambda1: Vec::with_capacity(n),
        readout: Some(Vec::with_capacity(n)),
        switches: Vec::new(),
    };
    let mut kern = Kernel::new(ops.n());
    let mut b = *bundle0;
    let mut prev_theta = 0.0;
    let mut scratch = [CVec::zeros(ops.n()), CVec::zeros(ops.n())];
    let mut l = ops.l_tri(0.0);
    let mut l_theta = 0.0;
    let mut h_cache: Vec<(u64, Band)> = Vec::new();
    let given_switches: Vec<Option<(f64, f64)>> = match &cfg.mode {
        ControlMode::Given {
            theta,
            lambda1,
            switches,
        } => {
            let s = ControlSchedule {
                dt,
                theta: theta.clone(),
                lambda1: lambda1.clone(),
                readout: None,
                switches: switches.clone(),
            };
            s.validate()?;
            s.step_lambdas().into_iter().map(|(_, sw)| sw).collect()
        }
        _ => Vec::new(),
    };

    // Step controls: θ from the predicted midpoint, λ1 switched at the κ20 zero crossing.
    let step_controls = |k: usize, b: &ScalarBundle, prev: f64| -> (f64, f64, Option<(f64, f64)>) {
        if let ControlMode::Given { .. } = &cfg.mode {
            let (th, la) = controls(k, b, prev);
            return (th, la, given_switches.get(k).copied().flatten());
        }
        let (th0, la) = controls(k, b, prev);
        let (x, y) = (b.to_array(), rk4_bundle(b, th0, la, tau, dt).to_array());
        let (th, _) = controls(
            k,
            &ScalarBundle::from_array(std::array::from_fn(|i| 0.5 * (x[i] + y[i]))),
            th0,
        );
        let lam_at = |s: f64| optimal_lambda1(rk4_bundle(b, th, la, tau, s * dt).k20, lmax);
        let lb = lam_at(1.0);
        if lb == la {
            return (th, la, None);
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if lam_at(mid) == la {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let at = 0.5 * (lo + hi);
        if at < 1e-9 {
            (th, lb, None)
        } else if at > 1.0 - 1e-9 {
            (th, la, None)
        } else {
            (th, la, Some((at, lb)))
        }
    };

    let mut last_theta = None;
    for k in 0..=n {
        let (theta, lam, split) = if k < n {
            step_controls(k, &b, prev_theta)
        } else {
            let (th, la) = controls(k, &b, prev_theta);
            (last_theta.unwrap_or(th), la, None)
        };
        prev_theta = theta;
        last_theta = Some(theta);
        let m = state.moments(ops, &mut scratch);
        let (ml, ml2) = l_moments(&m, theta);
        let r = optimal_readout(&b, theta);
        path.t.push(k as f64 * dt);
        path.moments.push(m);
        path.bundle.push(b);
        path.theta.push(theta);
        path.lambda1.push(lam);
        path.readout.push(r);
        path.mean_l.push(ml);
        path.mean_l2.push(ml2);
        path.k_value.push(pontryagin_value(&b, lmax, tau).k);
        if k == n {
            break;
        }

        if theta != l_theta {
            ops.fill_l_tri(theta, &mut l);
            l_theta = theta;
        }
        let segments = match split {
            Some((at, after)) => vec![(at * dt, lam), ((1.0 - at) * dt, after)],
            None => vec![(dt, lam)],
        };
        let mut r_step = 0.0;
        for (h_dt, lam) in segments {
            let b1 = rk4_bundle(&b, theta, lam, tau, h_dt);
            if !b1.is_finite() {
                return Err(Error::PositivityLoss { step: k });
            }
            let r_seg = 0.5 * (optimal_readout(&b, theta) + optimal_readout(&b1, theta));
            r_step += r_seg * h_dt / dt;
            let hi = match h_cache.iter().position(|(bits, _)| *bits == lam.to_bits()) {
                Some(i) => i,
                None => {
                    h_cache.push((lam.to_bits(), ops.h_band(lam, 0.0)));
                    h_cache.len() - 1
                }
            };
            let h = &h_cache[hi].1;
            match &mut state {
                State::Ket(v) => {
                    kern.strat(&l, h, r_seg, h_dt, tau, v.as_mut_slice());
                    normalize(v.as_mut_slice());
                    if !v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                        return Err(Error::PositivityLoss { step: k });
                    }
                }
                State::Density(rho) => {
                    let out = conjugate(rho.matrix(), |v| kern.strat(&l, h, r_seg, h_dt, tau, v));
                    *rho = finish(out, k)?;
                }
            }
            if let Some((rs, ss)) = shadow.as_mut() {
                let hd = hamiltonian(ops, lam, 0.0);
                let (ld, _) = quadratures(ops, theta);
                let (r1, s1) = rk4_pair(rs, ss, &hd, &ld, tau, h_dt);
                *rs = r1;
                *ss = s1;
                let pair = bundle_from_pair(
                    &DensityMatrix::from_raw(rs.clone()),
                    &Costate::new(ss.clone()),
                    ops,
                );
                let gap = b1
                    .to_array()
                    .iter()
                    .zip(pair.to_array())
                    .fold(0.0_f64, |g, (x, y)| g.max((x - y).abs()));
                drift.bundle = drift.bundle.max(gap);
                let cur: CMat = state.dense().matrix().clone();
                drift.rho = drift.rho.max(max_abs(&(cur - &*rs)));
            }
            b = b1;
        }
        sched.theta.push(theta);
        sched.lambda1.push(lam);
        sched.readout.as_mut().unwrap().push(r_step);
        if let Some((at, after)) = split {
            sched.switches.push(LambdaSwitch {
                step: k,
                at,
                lambda1_after: after,
            });
        }
    }

    path.cost = cost_functional(&path.readout, &path.mean_l, &path.mean_l2, tau, dt);
    path.shadow_drift = shadow.map(|_| drift);
    path.final_state = state.dense();
    if let State::Ket(v) = state {
        path.final_ket = Some(v);
    }
    Ok((path, sched))
}

/// Optimal-control most-likely path from a density matrix.
pub fn mlp_integrate(
    rho0: &DensityMatrix,
    bundle0: &ScalarBundle,
    tau: f64,
    t_f: f64,
    dt: f64,
    lambda1_max: f64,
    ops: &OperatorSet,
) -> Result<(MlpPath, ControlSchedule)> {
    let cfg = MlpConfig {
        tau,
        t_f,
        dt,
        mode: ControlMode::Optimal { lambda1_max },
        shadow: None,
    };
    mlp_run(&MlpStart::Density(rho0.clone()), bundle0, &cfg, ops)
}
