use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The ten real scalars of the closed quadratic system. `g11` is Γ̃(1,1) = Γ(1,1) − i/2.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalarBundle {
    pub g10: f64,
    pub g01: f64,
    pub k10: f64,
    pub k01: f64,
    pub g20: f64,
    pub g11: f64,
    pub g02: f64,
    pub k20: f64,
    pub k11: f64,
    pub k02: f64,
}

impl ScalarBundle {
    pub fn to_array(&self) -> [f64; 10] {
        [
            self.g10, self.g01, self.k10, self.k01, self.g20, self.g11, self.g02, self.k20,
            self.k11, self.k02,
        ]
    }

    pub fn from_array(a: [f64; 10]) -> Self {
        ScalarBundle {
            g10: a[0],
            g01: a[1],
            k10: a[2],
            k01: a[3],
            g20: a[4],
            g11: a[5],
            g02: a[6],
            k20: a[7],
            k11: a[8],
            k02: a[9],
        }
    }

    /// `self + h * d`
    pub fn axpy(&self, h: f64, d: &ScalarBundle) -> ScalarBundle {
        let (a, b) = (self.to_array(), d.to_array());
        ScalarBundle::from_array(std::array::from_fn(|i| a[i] + h * b[i]))
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// `r_θ = cos θ Γ(1,0) + sin θ Γ(0,1)`
pub fn optimal_readout(b: &ScalarBundle, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    c * b.g10 + s * b.g01
}

pub fn bundle_rhs(
    b: &ScalarBundle,
    theta: f64,
    lambda1: f64,
    lambda2: f64,
    tau: f64,
) -> Result<ScalarBundle> {
    if lambda2 != 0.0 {
        return Err(Error::AnharmonicNotClosed { lambda2 });
    }
    Ok(rhs(b, theta.sin_cos(), lambda1, tau))
}

#[inline]
pub(crate) fn rhs(b: &ScalarBundle, (s, c): (f64, f64), lambda1: f64, tau: f64) -> ScalarBundle {
    let lt = 1.0 + 2.0 * lambda1;
    let r = c * b.g10 + s * b.g01;
    let kl = c * b.k10 + s * b.k01;
    let (c2, s2) = (c * c, s * s);
    ScalarBundle {
        g10: b.g01 - s / (4.0 * tau) * kl,
        g01: -lt * b.g10 + c / (4.0 * tau) * kl,
        k10: b.k01,
        k01: -lt * b.k10,
        g20: 2.0 * b.g11 + s / (2.0 * tau) * (r * b.k10 - c * b.k20 - s * b.k11),
        g11: -lt * b.g20
            + b.g02
            + (r * (s * b.k01 - c * b.k10) + c2 * b.k20 - s2 * b.k02) / (4.0 * tau),
        g02: -2.0 * lt * b.g11 + c / (2.0 * tau) * (-r * b.k01 + s * b.k02 + c * b.k11),
        k20: 2.0 * b.k11 + 2.0 * s / tau * (-r * b.g10 + c * b.g20 + s * b.g11),
        k11: -lt * b.k20 + b.k02 + (r * (c * b.g10 - s * b.g01) - c2 * b.g20 + s2 * b.g02) / tau,
        k02: -2.0 * lt * b.k11 + 2.0 * c / tau * (r * b.g01 - s * b.g02 - c * b.g11),
    }
}

/// One RK4 step with θ and λ1 held.
pub fn rk4_bundle(b: &ScalarBundle, theta: f64, lambda1: f64, tau: f64, dt: f64) -> ScalarBundle {
    let sc = theta.sin_cos();
    let k1 = rhs(b, sc, lambda1, tau);
    let k2 = rhs(&b.axpy(0.5 * dt, &k1), sc, lambda1, tau);
    let k3 = rhs(&b.axpy(0.5 * dt, &k2), sc, lambda1, tau);
    let k4 = rhs(&b.axpy(dt, &k3), sc, lambda1, tau);
    let (a, d1, d2, d3, d4) = (
        b.to_array(),
        k1.to_array(),
        k2.to_array(),
        k3.to_array(),
        k4.to_array(),
    );
    ScalarBundle::from_array(std::array::from_fn(|i| {
        a[i] + dt / 6.0 * (d1[i] + 2.0 * d2[i] + 2.0 * d3[i] + d4[i])
    }))
}

/// λ1* = −λ1max·sign(κ20); the tie κ20 = 0 returns +λ1max.
pub fn optimal_lambda1(k20: f64, lambda1_max: f64) -> f64 {
    if k20 > 0.0 {
        -lambda1_max
    } else {
        lambda1_max
    }
}

/// `(A_Γ, B_Γ)`
pub fn gamma_ab(b: &ScalarBundle) -> (f64, f64) {
    let a = 0.5 * (b.g10 * b.g10 - b.g01 * b.g01 - b.g20 + b.g02);
    let bb = b.g10 * b.g01 - b.g11;
    (a, bb)
}

/// θ* = ½ atan2(B_Γ, A_Γ) in [−π/2, π/2]; holds `previous` when R_Γ < 1e-12.
pub fn optimal_theta(b: &ScalarBundle, previous: f64) -> f64 {
    let (a, bb) = gamma_ab(b);
    if a.hypot(bb) < 1e-12 {
        previous
    } else {
        0.5 * bb.atan2(a)
    }
}

/// Stochastic Hamiltonian at readout r_θ for given controls (λ2 = 0).
pub fn stochastic_hamiltonian(b: &ScalarBundle, theta: f64, lambda1: f64, tau: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let r = c * b.g10 + s * b.g01;
    -lambda1 * b.k20 - 0.5 * (b.k20 + b.k02)
        + (r * r - c * c * b.g20 - s * s * b.g02 - 2.0 * s * c * b.g11) / (2.0 * tau)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PontryaginValue {
    pub k: f64,
    pub p0: f64,
}

pub fn pontryagin_value(b: &ScalarBundle, lambda1_max: f64, tau: f64) -> PontryaginValue {
    let (a, bb) = gamma_ab(b);
    let k = lambda1_max * b.k20.abs() - 0.5 * (b.k20 + b.k02)
        + a.hypot(bb) / (2.0 * tau)
        + (b.g10 * b.g10 + b.g01 * b.g01 - b.g20 - b.g02) / (4.0 * tau);
    PontryaginValue { k, p0: -1.0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn bang_bang_sign() {
        assert_eq!(optimal_lambda1(0.5, 0.2), -0.2);
        assert_eq!(optimal_lambda1(-0.5, 0.2), 0.2);
        assert_eq!(optimal_lambda1(0.0, 0.2), 0.2);
    }

    #[test]
    fn theta_cases() {
        let mut b = ScalarBundle::default();
        b.g02 = 2.0; // A = 1, B = 0
        assert_abs_diff_eq!(optimal_theta(&b, 0.3), 0.0);
        let mut b = ScalarBundle::default();
        b.g11 = -1.0; // A = 0, B = 1
        assert_abs_diff_eq!(optimal_theta(&b, 0.3), FRAC_PI_4, epsilon = 1e-15);
        let mut b = ScalarBundle::default();
        b.g20 = 2.0; // A = −1, B = 0
        let th = optimal_theta(&b, 0.3);
        let (a, bb) = gamma_ab(&b);
        assert_abs_diff_eq!((2.0 * th - bb.atan2(a)).cos(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(th.abs(), FRAC_PI_2, epsilon = 1e-15);
        assert_eq!(optimal_theta(&ScalarBundle::default(), 0.3), 0.3);
    }

    #[test]
    fn readout_projection() {
        let b = ScalarBundle {
            g01: 2.0,
            ..Default::default()
        };
        assert_abs_diff_eq!(optimal_readout(&b, FRAC_PI_2), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_cubic() {
        assert!(matches!(
            bundle_rhs(&ScalarBundle::default(), 0.0, 0.0, 0.1, 15.0),
            Err(Error::AnharmonicNotClosed { .. })
        ));
    }

    #[test]
    fn first_order_kappa_stays_zero() {
        // the second-order κ entries are sourced by Γ, the first-order ones are not
        let b = ScalarBundle {
            g10: 0.3,
            g01: -1.1,
            g20: 0.7,
            g11: 0.2,
            g02: 0.6,
            ..Default::default()
        };
        let d = bundle_rhs(&b, 0.4, 0.2, 0.0, 15.0).unwrap();
        assert_abs_diff_eq!(d.k10, 0.0);
        assert_abs_diff_eq!(d.k01, 0.0);
        let (s, c) = 0.4_f64.sin_cos();
        let r = c * b.g10 + s * b.g01;
        assert_abs_diff_eq!(
            d.k20,
            2.0 * s / 15.0 * (-r * b.g10 + c * b.g20 + s * b.g11),
            epsilon = 1e-15
        );
    }

    #[test]
    fn free_position_drift() {
        let b = ScalarBundle {
            g10: 0.3,
            g01: -1.1,
            k10: 2.0,
            k01: 4.0,
            ..Default::default()
        };
        let d = bundle_rhs(&b, 0.0, 0.0, 0.0, 15.0).unwrap();
        assert_abs_diff_eq!(d.g10, b.g01);
    }

    #[test]
    fn vacuum_like_value() {
        let b = ScalarBundle {
            g20: 0.5,
            g02: 0.5,
            ..Default::default()
        };
        let tau = 15.0;
        assert_abs_diff_eq!(
            pontryagin_value(&b, 0.2, tau).k,
            -1.0 / (4.0 * tau),
            epsilon = 1e-15
        );
        assert_eq!(pontryagin_value(&b, 0.2, tau).p0, -1.0);
    }

    #[test]
    fn value_is_supremum_of_hamiltonian() {
        let b = ScalarBundle {
            g10: 0.4,
            g01: -0.9,
            k10: 1.3,
            k01: 0.2,
            g20: 1.1,
            g11: -0.3,
            g02: 0.8,
            k20: -0.6,
            k11: 0.1,
            k02: 0.9,
        };
        let th = optimal_theta(&b, 0.0);
        let lam = optimal_lambda1(b.k20, 0.2);
        let k = pontryagin_value(&b, 0.2, 15.0).k;
        assert_abs_diff_eq!(
            stochastic_hamiltonian(&b, th, lam, 15.0),
            k,
            epsilon = 1e-14
        );
    }

    #[test]
    fn hamiltonian_is_first_integral_at_held_controls() {
        let b = ScalarBundle::from_array([0.3, -0.7, 1.2, 0.4, 0.6, 0.1, 0.8, -0.3, 0.5, 0.2]);
        for (th, l1, tau) in [(0.3, 0.2, 2.0), (1.1, -0.2, 15.0), (-0.8, 0.05, 0.7)] {
            let d = rhs(&b, f64::sin_cos(th), l1, tau);
            let h = 1e-6;
            let hp = stochastic_hamiltonian(&b.axpy(h, &d), th, l1, tau);
            let hm = stochastic_hamiltonian(&b.axpy(-h, &d), th, l1, tau);
            assert_abs_diff_eq!((hp - hm) / (2.0 * h), 0.0, epsilon = 1e-8);
        }
    }

    proptest::proptest! {
        #[test]
        fn theta_star_maximizes_hamiltonian(v in proptest::array::uniform10(-3.0f64..3.0), tau in 0.5f64..20.0) {
            let b = ScalarBundle::from_array(v);
            let lam = optimal_lambda1(b.k20, 0.2);
            let best = stochastic_hamiltonian(&b, optimal_theta(&b, 0.0), lam, tau);
            for j in 0..64 {
                let th = -FRAC_PI_2 + std::f64::consts::PI * j as f64 / 64.0;
                proptest::prop_assert!(stochastic_hamiltonian(&b, th, lam, tau) <= best + 1e-12);
            }
            proptest::prop_assert!((best - pontryagin_value(&b, 0.2, tau).k).abs() < 1e-12);
        }
    }
}
