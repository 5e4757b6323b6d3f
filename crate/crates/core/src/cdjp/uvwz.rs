use serde::{Deserialize, Serialize};

use crate::fock::{quadratures, Costate, DensityMatrix, OperatorSet};
use crate::{c, C64};

use super::costate::omega_lambda;

/// Readout `r`, its conjugate `v` and the commutator pair `(w, z)` for a
/// harmonic oscillator under quadrature measurement.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Uvwz {
    pub r: f64,
    pub v: f64,
    pub w: f64,
    pub z: f64,
}

impl Uvwz {
    fn axpy(self, h: f64, d: Uvwz) -> Uvwz {
        Uvwz {
            r: self.r + h * d.r,
            v: self.v + h * d.v,
            w: self.w + h * d.w,
            z: self.z + h * d.z,
        }
    }
}

pub fn uvwz_rhs(s: Uvwz, phidot: f64, tau: f64) -> Uvwz {
    Uvwz {
        r: phidot * s.v,
        v: -phidot * s.r + s.w / (4.0 * tau),
        w: phidot * s.z,
        z: -phidot * s.w,
    }
}

/// One RK4 step from `t` with `φ̇` supplied as a function of time.
pub fn rk4_uvwz(s: Uvwz, phidot: impl Fn(f64) -> f64, t: f64, tau: f64, dt: f64) -> Uvwz {
    let k1 = uvwz_rhs(s, phidot(t), tau);
    let k2 = uvwz_rhs(s.axpy(0.5 * dt, k1), phidot(t + 0.5 * dt), tau);
    let k3 = uvwz_rhs(s.axpy(0.5 * dt, k2), phidot(t + 0.5 * dt), tau);
    let k4 = uvwz_rhs(s.axpy(dt, k3), phidot(t + dt), tau);
    Uvwz {
        r: s.r + dt / 6.0 * (k1.r + 2.0 * k2.r + 2.0 * k3.r + k4.r),
        v: s.v + dt / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v),
        w: s.w + dt / 6.0 * (k1.w + 2.0 * k2.w + 2.0 * k3.w + k4.w),
        z: s.z + dt / 6.0 * (k1.z + 2.0 * k2.z + 2.0 * k3.z + k4.z),
    }
}

/// Trace definitions: `r = Tr(LΩ)`, `v = Tr(MΩ)`, `w = i Tr(LΛ)`, `z = i Tr(MΛ)`.
pub fn uvwz_from_pair(rho: &DensityMatrix, sigma: &Costate, theta: f64, ops: &OperatorSet) -> Uvwz {
    let (om, la) = omega_lambda(rho, sigma);
    let (l, m) = quadratures(ops, theta);
    Uvwz {
        r: (&l * &om).trace().re,
        v: (&m * &om).trace().re,
        w: -(&l * &la).trace().im,
        z: -(&m * &la).trace().im,
    }
}

const GL_X: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_W: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// Closed-form `(r, v, w, z)` at time `t` for `φ(0) = 0`. The integral of
/// `e^{2iφ}` uses composite Gauss-Legendre panels no wider than 0.05 that
/// never straddle a point in `breakpoints` (kinks of `φ`).
pub fn analytic_uvwz(
    alpha: C64,
    a: f64,
    b: f64,
    tau: f64,
    phi: impl Fn(f64) -> f64,
    t: f64,
    breakpoints: &[f64],
) -> Uvwz {
    let mut knots: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > 0.0 && x < t)
        .collect();
    knots.push(0.0);
    knots.push(t);
    knots.sort_by(|x, y| x.total_cmp(y));
    let mut integral = c(0.0, 0.0);
    for seg in knots.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        if hi <= lo {
            continue;
        }
        let panels = ((hi - lo) / 0.05).ceil().max(1.0) as usize;
        let width = (hi - lo) / panels as f64;
        for p in 0..panels {
            let mid = lo + (p as f64 + 0.5) * width;
            for (x, w) in GL_X.iter().zip(GL_W) {
                let s = mid + 0.5 * width * x;
                integral += C64::from_polar(w * 0.5 * width, 2.0 * phi(s));
            }
        }
    }
    let i = c(0.0, 1.0);
    let ph = phi(t);
    let k = 1.0 / (8.0 * tau);
    let u = C64::from_polar(1.0, -ph) * (alpha + i * k * t * c(a, b) + i * k * c(a, -b) * integral);
    Uvwz {
        r: u.re,
        v: u.im,
        w: a * ph.cos() + b * ph.sin(),
        z: -a * ph.sin() + b * ph.cos(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_operators, make_state, FockDim, StateSpec};
    use approx::assert_abs_diff_eq;

    #[test]
    fn no_drive_is_rotation() {
        let alpha = c(0.7, -0.2);
        for t in [0.0, 0.4, 2.9] {
            let s = analytic_uvwz(alpha, 0.0, 0.0, 15.0, |x| x, t, &[]);
            let e = alpha * C64::from_polar(1.0, -t);
            assert_abs_diff_eq!(s.r, e.re, epsilon = 1e-14);
            assert_abs_diff_eq!(s.v, e.im, epsilon = 1e-14);
        }
    }

    #[test]
    fn resonant_drive_matches_rk4() {
        let tau = 15.0;
        let mut s = Uvwz {
            r: 1.0,
            v: 0.0,
            w: 1.0,
            z: 0.0,
        };
        let dt = 1e-3;
        for k in 0..3000 {
            let t = k as f64 * dt;
            s = rk4_uvwz(s, |_| 1.0, t, tau, dt);
            let t1 = (k + 1) as f64 * dt;
            if (k + 1) % 500 == 0 {
                let e = analytic_uvwz(c(1.0, 0.0), 1.0, 0.0, tau, |x| x, t1, &[]);
                assert_abs_diff_eq!(s.r, e.r, epsilon = 1e-8);
                assert_abs_diff_eq!(s.v, e.v, epsilon = 1e-8);
            }
        }
        assert_abs_diff_eq!(s.w * s.w + s.z * s.z, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_definitions_follow_rhs() {
        // for a harmonic oscillator at fixed θ the trace definitions obey the same ODE
        let ops = build_operators(FockDim::new(20).unwrap());
        let rho = make_state(ops.dim, &StateSpec::Coherent { alpha: c(0.3, 0.2) }).unwrap();
        let mut m = ops.identity.clone();
        m += ops.x.scale(0.3) + ops.p2.scale(0.05);
        let sigma = Costate::gauged(m, &rho);
        let (theta, tau) = (0.4, 2.0);
        let s = uvwz_from_pair(&rho, &sigma, theta, &ops);
        let h = crate::fock::hamiltonian(&ops, 0.0, 0.0);
        let (l, _) = quadratures(&ops, theta);
        let (dr, ds) =
            super::super::costate_rhs_with(rho.matrix(), sigma.matrix(), s.r, &h, &l, tau);
        let eps = 1e-6;
        let rho2 = DensityMatrix::new(rho.matrix() + dr.scale(eps)).unwrap();
        let sig2 = Costate::new(sigma.matrix() + ds.scale(eps));
        let s2 = uvwz_from_pair(&rho2, &sig2, theta, &ops);
        let d = uvwz_rhs(s, 1.0, tau);
        assert_abs_diff_eq!((s2.r - s.r) / eps, d.r, epsilon = 1e-4);
        assert_abs_diff_eq!((s2.v - s.v) / eps, d.v, epsilon = 1e-4);
        assert_abs_diff_eq!((s2.w - s.w) / eps, d.w, epsilon = 1e-4);
        assert_abs_diff_eq!((s2.z - s.z) / eps, d.z, epsilon = 1e-4);
    }
}
