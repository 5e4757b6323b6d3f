use crate::fock::{Costate, DensityMatrix, OperatorSet};
use crate::{c, CMat, Error, Result, C64};

use super::bundle::ScalarBundle;
use super::costate::omega_lambda;

/// C(n,m,k) in `[Xⁿ, Pᵐ] = Σ_{k≥1} C(n,m,k) X^{n−k} P^{m−k}`.
pub fn mccoy_coefficient(n: u32, m: u32, k: u32) -> C64 {
    if k > n || k > m {
        return c(0.0, 0.0);
    }
    let f = |x: u32| (1..=x).map(f64::from).product::<f64>();
    let mag = f(n) * f(m) / (f(k) * f(n - k) * f(m - k));
    // −(−i)^k
    let phase = match k % 4 {
        0 => c(-1.0, 0.0),
        1 => c(0.0, 1.0),
        2 => c(1.0, 0.0),
        _ => c(0.0, -1.0),
    };
    phase * mag
}

/// `Σ_k C(n,m,k) X^{n−k} P^{m−k}`, which equals `[Xⁿ, Pᵐ]` away from the truncation edge.
pub fn mccoy_commutator(n: u32, m: u32, ops: &OperatorSet) -> CMat {
    let d = ops.n();
    let mut out = CMat::zeros(d, d);
    for k in 1..=n.min(m) {
        out += (ops.x.pow(n - k) * ops.p.pow(m - k)) * mccoy_coefficient(n, m, k);
    }
    out
}

/// Complex Γ(n,m) and κ(n,m) for all `n + m ≤ cap`.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaKappaTable {
    pub cap: usize,
    gamma: Vec<C64>,
    kappa: Vec<C64>,
}

impl GammaKappaTable {
    pub fn zeros(cap: usize) -> Self {
        let len = (cap + 1) * (cap + 1);
        GammaKappaTable {
            cap,
            gamma: vec![c(0.0, 0.0); len],
            kappa: vec![c(0.0, 0.0); len],
        }
    }

    fn idx(&self, n: usize, m: usize) -> usize {
        n * (self.cap + 1) + m
    }

    pub fn contains(&self, n: usize, m: usize) -> bool {
        n + m <= self.cap
    }

    pub fn gamma(&self, n: usize, m: usize) -> C64 {
        if self.contains(n, m) {
            self.gamma[self.idx(n, m)]
        } else {
            c(0.0, 0.0)
        }
    }

    pub fn kappa(&self, n: usize, m: usize) -> C64 {
        if self.contains(n, m) {
            self.kappa[self.idx(n, m)]
        } else {
            c(0.0, 0.0)
        }
    }

    /// Table with cap 2 holding a scalar bundle, Γ(0,0) = 1 and Γ(1,1) = Γ̃(1,1) + i/2.
    pub fn from_bundle(b: &ScalarBundle) -> Self {
        let mut t = GammaKappaTable::zeros(2);
        let r = |x: f64| c(x, 0.0);
        t.set(0, 0, r(1.0), r(0.0));
        t.set(1, 0, r(b.g10), r(b.k10));
        t.set(0, 1, r(b.g01), r(b.k01));
        t.set(2, 0, r(b.g20), r(b.k20));
        t.set(1, 1, c(b.g11, 0.5), r(b.k11));
        t.set(0, 2, r(b.g02), r(b.k02));
        t
    }

    /// Real parts of the ten bundle entries, shifting Γ(1,1) by −i/2. Needs cap ≥ 2.
    pub fn to_bundle(&self) -> ScalarBundle {
        ScalarBundle {
            g10: self.gamma(1, 0).re,
            g01: self.gamma(0, 1).re,
            k10: self.kappa(1, 0).re,
            k01: self.kappa(0, 1).re,
            g20: self.gamma(2, 0).re,
            g11: (self.gamma(1, 1) - c(0.0, 0.5)).re,
            g02: self.gamma(0, 2).re,
            k20: self.kappa(2, 0).re,
            k11: self.kappa(1, 1).re,
            k02: self.kappa(0, 2).re,
        }
    }

    pub fn set(&mut self, n: usize, m: usize, gamma: C64, kappa: C64) {
        assert!(self.contains(n, m), "({n},{m}) above cap {}", self.cap);
        let i = self.idx(n, m);
        self.gamma[i] = gamma;
        self.kappa[i] = kappa;
    }
}

/// Trace definitions Γ(n,m) = Tr(XⁿPᵐΩ), κ(n,m) = i Tr(XⁿPᵐΛ).
pub fn table_from_pair(
    rho: &DensityMatrix,
    sigma: &Costate,
    cap: usize,
    ops: &OperatorSet,
) -> GammaKappaTable {
    let (om, la) = omega_lambda(rho, sigma);
    let n = ops.n();
    let mut xpow = vec![CMat::identity(n, n)];
    let mut ppow = vec![CMat::identity(n, n)];
    for k in 1..=cap {
        xpow.push(&xpow[k - 1] * &ops.x);
        ppow.push(&ppow[k - 1] * &ops.p);
    }
    let mut t = GammaKappaTable::zeros(cap);
    for a in 0..=cap {
        for b in 0..=cap - a {
            let op = &xpow[a] * &ppow[b];
            t.set(a, b, (&op * &om).trace(), (&op * &la).trace() * c(0.0, 1.0));
        }
    }
    t
}

/// Right-hand side of the general Γ/κ recurrences. Entries above the cap are
/// zero-filled; the returned flag reports whether any were referenced with a
/// nonzero coefficient.
pub fn general_bundle_rhs(
    table: &GammaKappaTable,
    theta: f64,
    lambda1: f64,
    lambda2: f64,
    tau: f64,
) -> Result<(GammaKappaTable, bool)> {
    let cap = table.cap;
    if lambda2 != 0.0 && cap < 3 {
        return Err(Error::InvalidParameter(format!(
            "order cap {cap} < 3 with lambda2 != 0"
        )));
    }
    let (s, co) = theta.sin_cos();
    let lt = 1.0 + 2.0 * lambda1;
    let r = co * table.gamma(1, 0).re + s * table.gamma(0, 1).re;
    let mut truncated = false;
    let mut out = GammaKappaTable::zeros(cap);
    let i = c(0.0, 1.0);
    for n in 0..=cap {
        for m in 0..=cap - n {
            if n == 0 && m == 0 {
                continue;
            }
            let mut get = |coef: C64, a: isize, b: isize| -> (C64, C64) {
                if coef == c(0.0, 0.0) || a < 0 || b < 0 {
                    return (c(0.0, 0.0), c(0.0, 0.0));
                }
                let (a, b) = (a as usize, b as usize);
                if !table.contains(a, b) {
                    truncated = true;
                }
                (coef * table.gamma(a, b), coef * table.kappa(a, b))
            };
            let (mut dg, mut dk) = (c(0.0, 0.0), c(0.0, 0.0));
            let (nu, mu) = (n as u32, m as u32);
            let (ni, mi) = (n as isize, m as isize);
            let zero = c(0.0, 0.0);
            for k in 1..=(n.max(m).max(3)) {
                let (ku, ki) = (k as u32, k as isize);
                let c2m = mccoy_coefficient(2, mu, ku);
                let c3m = mccoy_coefficient(3, mu, ku);
                let cn2 = mccoy_coefficient(nu, 2, ku);
                let c1m = mccoy_coefficient(1, mu, ku);
                let cn1 = mccoy_coefficient(nu, 1, ku);
                // [H, XⁿPᵐ]
                let (g1, k1) = get(c2m * (0.5 * lt), ni + 2 - ki, mi - ki);
                let (g2, k2) = get(c3m * lambda2, ni + 3 - ki, mi - ki);
                let (g3, k3) = get(cn2 * -0.5, ni - ki, mi + 2 - ki);
                // [L², XⁿPᵐ]
                let (g4, k4) = get(c2m * (co * co), ni + 2 - ki, mi - ki);
                let cross = if k == 1 {
                    (c1m - cn1) * (2.0 * s * co)
                } else {
                    zero
                };
                let (g5, k5) = get(cross, ni, mi);
                let (g6, k6) = get(cn2 * -(s * s), ni - ki, mi + 2 - ki);
                // [L, XⁿPᵐ]
                let (g7, k7) = get(c1m * co, ni + 1 - ki, mi - ki);
                let (g8, k8) = get(cn1 * -s, ni - ki, mi + 1 - ki);
                let (v_g, v_k) = (g4 + g5 + g6, k4 + k5 + k6);
                let (l_g, l_k) = (g7 + g8, k7 + k8);
                dg += g1 + g2 + g3 - v_k / (8.0 * tau) + l_k * (r / (4.0 * tau));
                dk += k1 + k2 + k3 + v_g / (2.0 * tau) - l_g * (r / tau);
            }
            out.set(n, m, dg * i, dk * i);
        }
    }
    Ok((out, truncated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mccoy_values() {
        assert_eq!(mccoy_coefficient(1, 1, 1), c(0.0, 1.0));
        assert_eq!(mccoy_coefficient(2, 1, 1), c(0.0, 2.0));
        assert_eq!(mccoy_coefficient(2, 2, 2), c(2.0, 0.0));
        assert_eq!(mccoy_coefficient(2, 1, 2), c(0.0, 0.0));
        assert_eq!(mccoy_coefficient(4, 3, 4), c(0.0, 0.0));
    }

    fn low_support_pair(n: usize) -> (DensityMatrix, Costate) {
        let mut psi = crate::CVec::zeros(n);
        let amps = [c(0.6, 0.1), c(-0.3, 0.4), c(0.2, -0.25), c(0.1, 0.15)];
        for (i, a) in amps.iter().enumerate() {
            psi[i] = *a;
        }
        let rho = DensityMatrix::from_ket(&(psi.scale(1.0 / psi.norm())));
        let mut m = CMat::zeros(n, n);
        let vals = [
            [1.2, 0.3, -0.1, 0.05],
            [0.0, 0.8, 0.2, -0.1],
            [0.0, 0.0, 0.5, 0.3],
            [0.0, 0.0, 0.0, 0.9],
        ];
        for i in 0..4 {
            for j in i..4 {
                let v = c(vals[i][j], 0.07 * (j as f64 - i as f64));
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
            }
        }
        (rho, Costate::new(m))
    }

    #[test]
    fn recurrences_match_operator_derivative() {
        use crate::fock::{build_operators, hamiltonian, quadratures, FockDim};
        let ops = build_operators(FockDim::new(20).unwrap());
        let (rho, sigma) = low_support_pair(20);
        let (theta, l1, tau) = (0.7, 0.15, 3.0);
        let cap = 4;
        let table = table_from_pair(&rho, &sigma, cap, &ops);
        let (d, flag) = general_bundle_rhs(&table, theta, l1, 0.0, tau).unwrap();
        assert!(!flag);
        let h = hamiltonian(&ops, l1, 0.0);
        let (l, _) = quadratures(&ops, theta);
        let r = theta.cos() * table.gamma(1, 0).re + theta.sin() * table.gamma(0, 1).re;
        let (dr, ds) = super::super::costate_rhs_with(rho.matrix(), sigma.matrix(), r, &h, &l, tau);
        let rm = rho.matrix();
        let sm = sigma.matrix();
        let om_dot = (&dr * sm + sm * &dr + rm * &ds + &ds * rm).scale(0.5);
        let la_dot = &dr * sm - sm * &dr + rm * &ds - &ds * rm;
        let mut xpow = vec![CMat::identity(20, 20)];
        let mut ppow = vec![CMat::identity(20, 20)];
        for k in 1..=cap {
            xpow.push(&xpow[k - 1] * &ops.x);
            ppow.push(&ppow[k - 1] * &ops.p);
        }
        for a in 0..=cap {
            for b in 0..=cap - a {
                let op = &xpow[a] * &ppow[b];
                let eg = (&op * &om_dot).trace();
                let ek = (&op * &la_dot).trace() * c(0.0, 1.0);
                assert_abs_diff_eq!((d.gamma(a, b) - eg).norm(), 0.0, epsilon = 1e-10);
                assert_abs_diff_eq!((d.kappa(a, b) - ek).norm(), 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn cubic_term_matches_below_cap() {
        use crate::fock::{build_operators, hamiltonian, quadratures, FockDim};
        let ops = build_operators(FockDim::new(24).unwrap());
        let (rho, sigma) = low_support_pair(24);
        let (theta, l1, l2, tau) = (-0.4, 0.05, 0.2, 5.0);
        let cap = 5;
        let table = table_from_pair(&rho, &sigma, cap, &ops);
        let (d, flag) = general_bundle_rhs(&table, theta, l1, l2, tau).unwrap();
        assert!(flag);
        let h = hamiltonian(&ops, l1, l2);
        let (l, _) = quadratures(&ops, theta);
        let r = theta.cos() * table.gamma(1, 0).re + theta.sin() * table.gamma(0, 1).re;
        let (dr, ds) = super::super::costate_rhs_with(rho.matrix(), sigma.matrix(), r, &h, &l, tau);
        let rm = rho.matrix();
        let sm = sigma.matrix();
        let om_dot = (&dr * sm + sm * &dr + rm * &ds + &ds * rm).scale(0.5);
        // orders below the cap never reference a zero-filled entry
        for (a, b) in [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 1)] {
            let op = ops.x.pow(a as u32) * ops.p.pow(b as u32);
            let eg = (&op * &om_dot).trace();
            assert_abs_diff_eq!((d.gamma(a, b) - eg).norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn quadratic_cap_reproduces_bundle_rhs() {
        let b = ScalarBundle::from_array([0.4, -0.9, 1.3, 0.2, 1.1, -0.3, 0.8, -0.6, 0.1, 0.9]);
        for (th, l1, tau) in [(0.0, 0.0, 15.0), (0.7, 0.2, 3.0), (-1.2, -0.2, 0.5)] {
            let (d, flag) =
                general_bundle_rhs(&GammaKappaTable::from_bundle(&b), th, l1, 0.0, tau).unwrap();
            assert!(!flag);
            let want = crate::cdjp::bundle_rhs(&b, th, l1, 0.0, tau)
                .unwrap()
                .to_array();
            for (x, y) in d.to_bundle().to_array().iter().zip(want) {
                assert_abs_diff_eq!(*x, y, epsilon = 1e-13);
            }
            assert_abs_diff_eq!(d.gamma(1, 1).im, 0.0, epsilon = 1e-13);
        }
        assert_eq!(GammaKappaTable::from_bundle(&b).to_bundle(), b);
    }

    #[test]
    fn mccoy_commutators_match_dense() {
        use crate::fock::{build_operators, FockDim};
        let ops = build_operators(FockDim::new(24).unwrap());
        // truncation spoils [Xⁿ, Pᵐ] only within n + m levels of the edge
        let inner = 24 - 8;
        for n in 0..=4u32 {
            for m in 0..=4u32 {
                let (xn, pm) = (ops.x.pow(n), ops.p.pow(m));
                let dense = &xn * &pm - &pm * &xn;
                let gap = dense - mccoy_commutator(n, m, &ops);
                let diff = crate::max_abs(&gap.view((0, 0), (inner, inner)).clone_owned());
                assert!(diff < 1e-10, "n={n} m={m}: {diff}");
            }
        }
    }

    #[test]
    fn constants_do_not_move() {
        let mut t = GammaKappaTable::zeros(4);
        t.set(0, 0, c(1.0, 0.0), c(0.0, 0.0));
        t.set(1, 0, c(0.3, 0.0), c(0.2, 0.0));
        t.set(2, 1, c(0.1, 0.5), c(-0.4, 0.0));
        let (d, flag) = general_bundle_rhs(&t, 0.2, 0.1, 0.0, 15.0).unwrap();
        assert_abs_diff_eq!(d.gamma(0, 0).norm(), 0.0);
        assert_abs_diff_eq!(d.kappa(0, 0).norm(), 0.0);
        assert!(!flag);
        let (_, flag) = general_bundle_rhs(&t, 0.2, 0.1, 0.05, 15.0).unwrap();
        assert!(flag);
    }
}
