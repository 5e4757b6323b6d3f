//! Closed-form Gaussian oracles for position measurement (θ = 0): steady
//! covariances, the matching squeezing parameter and the optimal mean path.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::cdjp::{mlp_run, ControlMode, MlpConfig, MlpPath, MlpStart, ScalarBundle};
use crate::fock::{ket_fidelity, ket_moments, make_ket, OperatorSet, StateSpec};
use crate::{c, Error, Result, C64};

/// `q1 = ⟨X⟩, q2 = ⟨P⟩, q3 = 2 Var X, q4 = 2 Cov(X,P), q5 = 2 Var P`
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussCoords {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub q4: f64,
    pub q5: f64,
}

impl GaussCoords {
    pub fn purity_defect(&self) -> f64 {
        self.q3 * self.q5 - self.q4 * self.q4 - 1.0
    }
}

/// Steady `(q̃3, q̃4, q̃5)` under continuous position measurement.
pub fn steady_state_covariances(tau: f64) -> Result<(f64, f64, f64)> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("tau = {tau}")));
    }
    let s = (1.0 + 4.0 * tau * tau).sqrt();
    // √(1+4τ²) − 2τ without cancellation
    let d = 1.0 / (s + 2.0 * tau);
    Ok(((4.0 * tau * d).sqrt(), d, (d * s * s / tau).sqrt()))
}

fn xi_from(q3: f64, q4: f64, q5: f64, sign: f64) -> C64 {
    let sh = sign * (0.25 * (q5 - q3).powi(2) + q4 * q4).sqrt();
    let ch = 0.5 * (q5 + q3);
    if sh == 0.0 {
        return c(0.0, 0.0);
    }
    let r = 0.5 * (sh + ch).ln();
    c(0.5 * (q5 - q3), -q4) * (r / sh)
}

/// `ξ = R e^{iΘ}` for a pure Gaussian with covariances `(q3, q4, q5)`.
pub fn squeezing_parameter(q3: f64, q4: f64, q5: f64) -> Result<C64> {
    let purity = q3 * q5 - q4 * q4;
    if (purity - 1.0).abs() > 1e-8 {
        return Err(Error::NonPureInput { purity });
    }
    Ok(xi_from(q3, q4, q5, 1.0))
}

/// The negative branch of `sinh 2R`; gives the same `ξ`.
pub fn squeezing_parameter_negative_branch(q3: f64, q4: f64, q5: f64) -> Result<C64> {
    let purity = q3 * q5 - q4 * q4;
    if (purity - 1.0).abs() > 1e-8 {
        return Err(Error::NonPureInput { purity });
    }
    Ok(xi_from(q3, q4, q5, -1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpConstants {
    pub alpha1: f64,
    pub alpha2: f64,
}

/// Optimal mean path between `(q1i, q2i)` and `(q1f, q2f)` at steady covariances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormPath {
    pub constants: OpConstants,
    pub q_i: (f64, f64),
    pub tau: f64,
    pub q3: f64,
    pub q4: f64,
}

impl ClosedFormPath {
    /// `(a, b, e, g)` with `q1 = (a t + q1i) cos t + (b t + e) sin t` and
    /// `q2 = (b t + q2i) cos t − (a t + q1i + g) sin t`.
    fn coeffs(&self) -> (f64, f64, f64, f64) {
        let OpConstants { alpha1, alpha2 } = self.constants;
        let (q3, q4, tau) = (self.q3, self.q4, self.tau);
        let sum = (q3 * q3 + q4 * q4) / (8.0 * tau);
        let diff = (q3 * q3 - q4 * q4) / (8.0 * tau);
        let cross = q3 * q4 / (4.0 * tau);
        (
            alpha1 * sum,
            alpha2 * sum,
            self.q_i.1 + alpha1 * diff + cross * alpha2,
            alpha2 * diff - cross * alpha1,
        )
    }

    pub fn q(&self, t: f64) -> (f64, f64) {
        let (a, b, e, g) = self.coeffs();
        let (s, co) = t.sin_cos();
        let q1 = (a * t + self.q_i.0) * co + (b * t + e) * s;
        let q2 = (b * t + self.q_i.1) * co - (a * t + self.q_i.0 + g) * s;
        (q1, q2)
    }

    pub fn q_dot(&self, t: f64) -> (f64, f64) {
        let (a, b, e, g) = self.coeffs();
        let (s, co) = t.sin_cos();
        let d1 = a * co - (a * t + self.q_i.0) * s + b * s + (b * t + e) * co;
        let d2 = b * co - (b * t + self.q_i.1) * s - a * s - (a * t + self.q_i.0 + g) * co;
        (d1, d2)
    }

    /// Readout that drives the mean along the path: `dq1/dt = q2 + (q3/2τ)(r − q1)`.
    pub fn readout(&self, t: f64) -> f64 {
        let (q1, q2) = self.q(t);
        let (d1, _) = self.q_dot(t);
        q1 + 2.0 * self.tau * (d1 - q2) / self.q3
    }
}

/// Solves the 2×2 boundary system for the integration constants.
pub fn closed_form_op(
    q_i: (f64, f64),
    q_f: (f64, f64),
    t_f: f64,
    tau: f64,
) -> Result<ClosedFormPath> {
    if !(t_f > 0.0) {
        return Err(Error::InvalidParameter(format!("t_f = {t_f}")));
    }
    let (q3, q4, _) = steady_state_covariances(tau)?;
    let sum = q3 * q3 + q4 * q4;
    let diff = q3 * q3 - q4 * q4;
    let (s, co) = t_f.sin_cos();
    let m = Matrix2::new(
        sum * t_f * co + diff * s,
        (sum * t_f + 2.0 * q3 * q4) * s,
        (-sum * t_f + 2.0 * q3 * q4) * s,
        sum * t_f * co - diff * s,
    ) / (8.0 * tau);
    let sv = m.singular_values();
    let cond = if sv.min() > 0.0 {
        sv.max() / sv.min()
    } else {
        f64::INFINITY
    };
    if cond > 1e12 {
        return Err(Error::SingularMatrix { cond });
    }
    let rhs = Vector2::new(
        q_f.0 - q_i.0 * co - q_i.1 * s,
        q_f.1 + q_i.0 * s - q_i.1 * co,
    );
    let sol = m.lu().solve(&rhs).ok_or(Error::SingularMatrix { cond })?;
    Ok(ClosedFormPath {
        constants: OpConstants {
            alpha1: sol[0],
            alpha2: sol[1],
        },
        q_i,
        tau,
        q3,
        q4,
    })
}

/// Readout constants `(α, A, B)` of the resonantly driven form at θ = 0,
/// `r(t) = Re α cos t + Im α sin t + (A t sin t + B (sin t − t cos t)) / 8τ`,
/// fitted by least squares to `samples` of `(t, r)`. Returns the constants and
/// the RMS residual.
pub fn fit_readout_constants(samples: &[(f64, f64)], tau: f64) -> Result<(C64, f64, f64, f64)> {
    if samples.len() < 4 {
        return Err(Error::InvalidParameter(
            "need at least four readout samples".into(),
        ));
    }
    let k = 1.0 / (8.0 * tau);
    let n = samples.len();
    let design = DMatrix::from_fn(n, 4, |i, j| {
        let t = samples[i].0;
        let (s, co) = t.sin_cos();
        match j {
            0 => co,
            1 => s,
            2 => k * t * s,
            _ => k * (s - t * co),
        }
    });
    let y = DVector::from_iterator(n, samples.iter().map(|p| p.1));
    let svd = design.clone().svd(true, true);
    let x = svd
        .solve(&y, 1e-14)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let resid = (&design * &x - &y).norm() / (n as f64).sqrt();
    Ok((c(x[0], x[1]), x[2], x[3], resid))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussBenchConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub tau: f64,
    pub t_f: f64,
    pub dt: f64,
    /// Target means `(⟨X⟩, ⟨P⟩)`; the start is the steady squeezed vacuum.
    pub q_f: (f64, f64),
}

fn default_dim() -> usize {
    36
}

impl Default for GaussBenchConfig {
    fn default() -> Self {
        GaussBenchConfig {
            dim: default_dim(),
            tau: 15.0,
            t_f: 3.0,
            dt: 1e-3,
            q_f: (0.5, -0.5),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GaussBenchReport {
    pub xi: C64,
    pub steady: (f64, f64, f64),
    pub closed: ClosedFormPath,
    pub bundle0: ScalarBundle,
    pub fit_residual: f64,
    pub path: MlpPath,
    /// Closed-form `(q1, q2)` at the path sample times.
    pub closed_samples: Vec<(f64, f64)>,
    pub max_dev_x: f64,
    pub max_dev_p: f64,
    /// Largest deviation of `(q3, q4, q5)` from the steady values.
    pub max_dev_cov: f64,
    pub fidelity: f64,
}

impl GaussBenchReport {
    /// CSV with columns `t,X_mlp,P_mlp,X_closed,P_closed,q3,q4,q5`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,X_mlp,P_mlp,X_closed,P_closed,q3,q4,q5\n");
        for (k, t) in self.path.t.iter().enumerate() {
            let m = &self.path.moments[k];
            let (q1, q2) = self.closed_samples[k];
            out.push_str(&format!(
                "{:.6},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                t,
                m.mean_x,
                m.mean_p,
                q1,
                q2,
                2.0 * m.var_x,
                2.0 * m.cov_xp,
                2.0 * m.var_p
            ));
        }
        out
    }
}

/// Position-measurement benchmark: the θ = 0, λ1 = 0 most-likely path from the
/// steady squeezed vacuum, driven by the readout constants of the closed-form
/// path, compared with that path.
pub fn run_gauss_benchmark(cfg: &GaussBenchConfig, ops: &OperatorSet) -> Result<GaussBenchReport> {
    let steady = steady_state_covariances(cfg.tau)?;
    let xi = squeezing_parameter(steady.0, steady.1, steady.2)?;
    let psi0 = make_ket(ops.dim, &StateSpec::SqueezedVacuum { xi })?;
    let m0 = ket_moments(&psi0, ops);
    let closed = closed_form_op((m0.mean_x, m0.mean_p), cfg.q_f, cfg.t_f, cfg.tau)?;
    let n = crate::schedule::step_count(cfg.t_f, cfg.dt)?;
    let samples: Vec<(f64, f64)> = (0..=n.max(4))
        .map(|k| {
            let t = cfg.t_f * k as f64 / n.max(4) as f64;
            (t, closed.readout(t))
        })
        .collect();
    let (alpha, a, b, fit_residual) = fit_readout_constants(&samples, cfg.tau)?;
    let bundle0 = ScalarBundle {
        g10: alpha.re,
        g01: alpha.im,
        k10: a,
        k01: b,
        g20: m0.var_x + m0.mean_x * m0.mean_x,
        g11: m0.cov_xp + m0.mean_x * m0.mean_p,
        g02: m0.var_p + m0.mean_p * m0.mean_p,
        ..Default::default()
    };
    let mcfg = MlpConfig {
        tau: cfg.tau,
        t_f: cfg.t_f,
        dt: cfg.dt,
        mode: ControlMode::FixedTheta {
            theta: 0.0,
            lambda1_max: 0.0,
        },
        shadow: None,
    };
    let (path, _) = mlp_run(&MlpStart::Ket(psi0), &bundle0, &mcfg, ops)?;
    let mut closed_samples = Vec::with_capacity(path.t.len());
    let (mut dx, mut dp, mut dc) = (0.0_f64, 0.0_f64, 0.0_f64);
    for (k, &t) in path.t.iter().enumerate() {
        let (q1, q2) = closed.q(t);
        closed_samples.push((q1, q2));
        let m = &path.moments[k];
        dx = dx.max((m.mean_x - q1).abs());
        dp = dp.max((m.mean_p - q2).abs());
        dc = dc
            .max((2.0 * m.var_x - steady.0).abs())
            .max((2.0 * m.cov_xp - steady.1).abs())
            .max((2.0 * m.var_p - steady.2).abs());
    }
    let beta = c(cfg.q_f.0, cfg.q_f.1) / 2f64.sqrt();
    let target = make_ket(ops.dim, &StateSpec::SqueezedCoherent { beta, xi })?;
    let fidelity = ket_fidelity(path.final_ket.as_ref().expect("ket start"), &target);
    Ok(GaussBenchReport {
        xi,
        steady,
        closed,
        bundle0,
        fit_residual,
        path,
        closed_samples,
        max_dev_x: dx,
        max_dev_p: dp,
        max_dev_cov: dc,
        fidelity,
    })
}
