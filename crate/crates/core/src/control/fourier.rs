use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::schedule::ControlSchedule;
use crate::{Error, Result};

/// Bounded controls `θ = (π/2) tanh(2 f1/π)` and `λ1 = λmax tanh(f2/λmax)`,
/// with `f1`, `f2` truncated Fourier series over the interval `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierControl {
    pub n_c: usize,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub c_prime: Vec<f64>,
    pub d_prime: Vec<f64>,
    pub lambda1_max: f64,
}

impl FourierControl {
    pub fn zeros(n_c: usize, lambda1_max: f64) -> Self {
        let z = vec![0.0; n_c + 1];
        FourierControl {
            n_c,
            c: z.clone(),
            d: z.clone(),
            c_prime: z.clone(),
            d_prime: z,
            lambda1_max,
        }
    }

    pub fn n_coefficients(&self) -> usize {
        4 * (self.n_c + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_c + 1;
        if [&self.c, &self.d, &self.c_prime, &self.d_prime]
            .iter()
            .any(|v| v.len() != n)
        {
            return Err(Error::InvalidParameter(format!(
                "Fourier coefficient vectors must have length {n}"
            )));
        }
        if !(self.lambda1_max > 0.0) {
            return Err(Error::InvalidParameter(
                "Fourier control needs lambda1_max > 0".into(),
            ));
        }
        Ok(())
    }

    /// Coefficients in the order `c, d, c′, d′`.
    pub fn to_vec(&self) -> Vec<f64> {
        [&self.c, &self.d, &self.c_prime, &self.d_prime]
            .iter()
            .flat_map(|v| v.iter().copied())
            .collect()
    }

    pub fn from_vec(n_c: usize, lambda1_max: f64, v: &[f64]) -> Self {
        let n = n_c + 1;
        assert_eq!(v.len(), 4 * n);
        FourierControl {
            n_c,
            c: v[..n].to_vec(),
            d: v[n..2 * n].to_vec(),
            c_prime: v[2 * n..3 * n].to_vec(),
            d_prime: v[3 * n..].to_vec(),
            lambda1_max,
        }
    }

    fn series(a: &[f64], b: &[f64], t: f64, period: f64) -> f64 {
        let w = TAU * t / period;
        a.iter()
            .zip(b)
            .enumerate()
            .map(|(n, (x, y))| {
                let (s, c) = (n as f64 * w).sin_cos();
                x * c + y * s
            })
            .sum()
    }

    pub fn theta(&self, t: f64, period: f64) -> f64 {
        FRAC_PI_2 * (2.0 * Self::series(&self.c, &self.d, t, period) / PI).tanh()
    }

    pub fn lambda1(&self, t: f64, period: f64) -> f64 {
        self.lambda1_max
            * (Self::series(&self.c_prime, &self.d_prime, t, period) / self.lambda1_max).tanh()
    }

    /// Controls sampled at `t_k = k dt` for `k < n_steps`.
    pub fn schedule(&self, dt: f64, n_steps: usize) -> ControlSchedule {
        let period = dt * n_steps as f64;
        ControlSchedule {
            dt,
            theta: (0..n_steps)
                .map(|k| self.theta(k as f64 * dt, period))
                .collect(),
            lambda1: (0..n_steps)
                .map(|k| self.lambda1(k as f64 * dt, period))
                .collect(),
            readout: None,
            switches: Vec::new(),
        }
    }
}
