//! Time-sampled control values, held constant over each step.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    pub dt: f64,
    /// θ for step k, applied on `[k dt, (k+1) dt)`.
    pub theta: Vec<f64>,
    pub lambda1: Vec<f64>,
    /// Readout used on each step, when the schedule comes from a path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout: Option<Vec<f64>>,
    /// λ1 switches inside a step, sorted by step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub switches: Vec<LambdaSwitch>,
}

/// On step `step`, λ1 takes the step value for the first `at·dt` and `lambda1_after` for the rest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSwitch {
    pub step: usize,
    pub at: f64,
    pub lambda1_after: f64,
}

/// λ1 on one step: `(before, Some((at, after)))` when it switches inside the step.
pub type StepLambda = (f64, Option<(f64, f64)>);

impl ControlSchedule {
    pub fn constant(theta: f64, lambda1: f64, dt: f64, n_steps: usize) -> Self {
        ControlSchedule {
            dt,
            theta: vec![theta; n_steps],
            lambda1: vec![lambda1; n_steps],
            readout: None,
            switches: Vec::new(),
        }
    }

    pub fn n_steps(&self) -> usize {
        self.theta.len()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.n_steps() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "schedule dt = {}",
                self.dt
            )));
        }
        if self.theta.len() != self.lambda1.len() {
            return Err(Error::DimensionMismatch {
                left: self.theta.len(),
                right: self.lambda1.len(),
            });
        }
        if let Some(r) = &self.readout {
            if r.len() != self.theta.len() {
                return Err(Error::DimensionMismatch {
                    left: r.len(),
                    right: self.theta.len(),
                });
            }
        }
        if self
            .theta
            .iter()
            .chain(&self.lambda1)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidParameter("non-finite control value".into()));
        }
        let mut last = None;
        for sw in &self.switches {
            if sw.step >= self.n_steps() || last.is_some_and(|l| sw.step <= l) {
                return Err(Error::InvalidParameter(format!(
                    "switch at step {} out of order or range",
                    sw.step
                )));
            }
            if !(sw.at > 0.0 && sw.at < 1.0 && sw.lambda1_after.is_finite()) {
                return Err(Error::InvalidParameter(format!("bad switch {sw:?}")));
            }
            last = Some(sw.step);
        }
        Ok(())
    }

    /// Per-step λ1 including in-step switches.
    pub fn step_lambdas(&self) -> Vec<StepLambda> {
        let mut out: Vec<StepLambda> = self.lambda1.iter().map(|&l| (l, None)).collect();
        for sw in &self.switches {
            if let Some(e) = out.get_mut(sw.step) {
                e.1 = Some((sw.at, sw.lambda1_after));
            }
        }
        out
    }

    /// Per-step λ1 averaged over any in-step switch.
    pub fn effective_lambda1(&self) -> Vec<f64> {
        self.step_lambdas()
            .into_iter()
            .map(|(l, sw)| sw.map_or(l, |(at, after)| at * l + (1.0 - at) * after))
            .collect()
    }

    /// Shifts every θ by π, which leaves the dynamics unchanged.
    pub fn flipped(&self) -> Self {
        let mut s = self.clone();
        for th in &mut s.theta {
            *th += std::f64::consts::PI;
        }
        s
    }

    /// CSV with columns `t,theta,lambda1,r`; a switch adds a row at its time.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,theta,lambda1,r\n");
        for (k, (lam, sw)) in self.step_lambdas().into_iter().enumerate() {
            let r = self.readout.as_ref().map_or(f64::NAN, |r| r[k]);
            let t = k as f64 * self.dt;
            out.push_str(&format!(
                "{:.9},{:.12e},{:.12e},{:.12e}\n",
                t, self.theta[k], lam, r
            ));
            if let Some((at, after)) = sw {
                out.push_str(&format!(
                    "{:.9},{:.12e},{:.12e},{:.12e}\n",
                    t + at * self.dt,
                    self.theta[k],
                    after,
                    r
                ));
            }
        }
        out
    }
}

/// Number of steps for `t_f`, requiring `t_f / dt` to be an integer.
pub fn step_count(t_f: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_f >= 0.0) || !t_f.is_finite() {
        return Err(Error::InvalidParameter(format!("t_f = {t_f}, dt = {dt}")));
    }
    let n = (t_f / dt).round();
    if (n * dt - t_f).abs() > 1e-9 * t_f.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "t_f / dt = {} is not an integer",
            t_f / dt
        )));
    }
    Ok(n as usize)
}
