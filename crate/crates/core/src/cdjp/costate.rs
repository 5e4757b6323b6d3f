use crate::cdjp::ScalarBundle;
use crate::fock::{hamiltonian, quadratures, Costate, DensityMatrix, OperatorSet};
use crate::{c, symmetrize, CMat, Error, Result};

/// `(Ω, Λ) = (½{ρ,σ}, [ρ,σ])`
pub fn omega_lambda(rho: &DensityMatrix, sigma: &Costate) -> (CMat, CMat) {
    let rs = rho.matrix() * sigma.matrix();
    let sr = sigma.matrix() * rho.matrix();
    ((&rs + &sr).scale(0.5), rs - sr)
}

fn anti(a: &CMat, b: &CMat) -> CMat {
    a * b + b * a
}

fn comm(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Optimal-path generator for explicit `H` and `L`, returning `(dρ/dt, dσ/dt)`.
pub fn costate_rhs_with(
    rho: &CMat,
    sigma: &CMat,
    r: f64,
    h: &CMat,
    l: &CMat,
    tau: f64,
) -> (CMat, CMat) {
    let n = rho.nrows();
    let id = CMat::identity(n, n);
    let v = l * l;
    let mean_l = (rho * l).trace().re;
    let mean_v = (rho * &v).trace().re;
    let dl = l - id.scale(mean_l);
    let dv = v - id.scale(mean_v);
    let mi = c(0.0, -1.0);
    let drho = comm(h, rho) * mi - anti(&dv, rho).scale(0.25 / tau)
        + anti(&dl, rho).scale(r / (2.0 * tau));
    let dsigma = comm(h, sigma) * mi + anti(&dv, sigma).scale(0.25 / tau)
        - anti(&dl, sigma).scale(r / (2.0 * tau));
    (symmetrize(&drho), symmetrize(&dsigma))
}

#[allow(clippy::too_many_arguments)]
pub fn costate_rhs(
    rho: &DensityMatrix,
    sigma: &Costate,
    r: f64,
    theta: f64,
    lambda1: f64,
    lambda2: f64,
    tau: f64,
    ops: &OperatorSet,
) -> Result<(CMat, CMat)> {
    let w = sigma.weight(rho);
    if (w - 1.0).abs() > 1e-6 {
        return Err(Error::GaugeViolation { value: w });
    }
    let h = hamiltonian(ops, lambda1, lambda2);
    let (l, _) = quadratures(ops, theta);
    Ok(costate_rhs_with(
        rho.matrix(),
        sigma.matrix(),
        r,
        &h,
        &l,
        tau,
    ))
}

/// `r = ½⟨{L_θ, σ}⟩ = Tr(L_θ Ω)`
pub fn trace_readout(rho: &DensityMatrix, sigma: &Costate, theta: f64, ops: &OperatorSet) -> f64 {
    let (l, _) = quadratures(ops, theta);
    let (omega, _) = omega_lambda(rho, sigma);
    (l * omega).trace().re
}

/// Bundle from its trace definitions.
pub fn bundle_from_pair(rho: &DensityMatrix, sigma: &Costate, ops: &OperatorSet) -> ScalarBundle {
    let (om, la) = omega_lambda(rho, sigma);
    let g = |b: &CMat| (b * &om).trace();
    let k = |b: &CMat| (b * &la).trace() * c(0.0, 1.0);
    let xp = &ops.x * &ops.p;
    ScalarBundle {
        g10: g(&ops.x).re,
        g01: g(&ops.p).re,
        k10: k(&ops.x).re,
        k01: k(&ops.p).re,
        g20: g(&ops.x2).re,
        g11: (g(&xp) - c(0.0, 0.5)).re,
        g02: g(&ops.p2).re,
        k20: k(&ops.x2).re,
        k11: k(&xp).re,
        k02: k(&ops.p2).re,
    }
}

/// RK4 step of the coupled `(ρ, σ)` equations with the readout recomputed as
/// `Tr(L Ω)` at every stage. Reference integrator for consistency checks.
pub fn rk4_pair(rho: &CMat, sigma: &CMat, h: &CMat, l: &CMat, tau: f64, dt: f64) -> (CMat, CMat) {
    let f = |r: &CMat, s: &CMat| {
        let om = (r * s + s * r).scale(0.5);
        let rr = (l * om).trace().re;
        costate_rhs_with(r, s, rr, h, l, tau)
    };
    let (a1, b1) = f(rho, sigma);
    let (a2, b2) = f(&(rho + a1.scale(0.5 * dt)), &(sigma + b1.scale(0.5 * dt)));
    let (a3, b3) = f(&(rho + a2.scale(0.5 * dt)), &(sigma + b2.scale(0.5 * dt)));
    let (a4, b4) = f(&(rho + a3.scale(dt)), &(sigma + b3.scale(dt)));
    let rho1 = rho + (a1 + a2.scale(2.0) + a3.scale(2.0) + a4).scale(dt / 6.0);
    let sigma1 = sigma + (b1 + b2.scale(2.0) + b3.scale(2.0) + b4).scale(dt / 6.0);
    (rho1, sigma1)
}

/// `Tr(σ F(ρ, r)) − (r² − 2r⟨L⟩ + ⟨L²⟩)/2τ` with `F` the Stratonovich generator.
pub fn operator_stochastic_hamiltonian(
    rho: &CMat,
    sigma: &CMat,
    r: f64,
    h: &CMat,
    l: &CMat,
    tau: f64,
) -> f64 {
    let (drho, _) = costate_rhs_with(rho, sigma, r, h, l, tau);
    let mean_l = (rho * l).trace().re;
    let mean_v = (rho * l * l).trace().re;
    (sigma * drho).trace().re - (r * r - 2.0 * r * mean_l + mean_v) / (2.0 * tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_operators, make_state, FockDim, StateSpec};
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_costate_gives_signal_readout() {
        let ops = build_operators(FockDim::new(12).unwrap());
        let rho = make_state(
            ops.dim,
            &StateSpec::Coherent {
                alpha: c(0.4, -0.2),
            },
        )
        .unwrap();
        let sigma = Costate::new(ops.identity.clone());
        let (l, _) = quadratures(&ops, 0.3);
        assert_abs_diff_eq!(
            trace_readout(&rho, &sigma, 0.3, &ops),
            rho.expect(&l),
            epsilon = 1e-13
        );
        let r = rho.expect(&l);
        let (_, ds) = costate_rhs(&rho, &sigma, r, 0.3, 0.1, 0.0, 15.0, &ops).unwrap();
        assert_abs_diff_eq!((ds * rho.matrix()).trace().re, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn gauge_is_enforced() {
        let ops = build_operators(FockDim::new(10).unwrap());
        let rho = make_state(ops.dim, &StateSpec::Coherent { alpha: c(0.1, 0.0) }).unwrap();
        let sigma = Costate::new(ops.identity.scale(2.0));
        assert!(matches!(
            costate_rhs(&rho, &sigma, 0.0, 0.0, 0.0, 0.0, 15.0, &ops),
            Err(Error::GaugeViolation { .. })
        ));
    }

    fn random_pair(n: usize, seed: u64) -> (DensityMatrix, Costate) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let psi = crate::CVec::from_fn(n, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let rho = DensityMatrix::from_ket(&psi.unscale(psi.norm()));
        let a = CMat::from_fn(n, n, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let sigma = Costate::gauged(symmetrize(&a), &rho);
        (rho, sigma)
    }

    #[test]
    fn costate_weight_is_conserved() {
        let ops = build_operators(FockDim::new(8).unwrap());
        for seed in 0..10 {
            let (rho, sigma) = random_pair(8, seed);
            assert_abs_diff_eq!(sigma.weight(&rho), 1.0, epsilon = 1e-12);
            let r = trace_readout(&rho, &sigma, 0.4, &ops);
            let (dr, ds) = costate_rhs(&rho, &sigma, r, 0.4, 0.2, 0.0, 2.0, &ops).unwrap();
            let d = (sigma.matrix() * &dr + &ds * rho.matrix()).trace();
            assert!(d.norm() < 1e-12, "{d}");
        }
    }

    #[test]
    fn qnd_readout_is_constant() {
        let ops = build_operators(FockDim::new(16).unwrap());
        let h = &ops.x2 + ops.x.pow(3).scale(0.3);
        let l = ops.x.clone();
        for seed in 0..5 {
            let (rho, sigma) = random_pair(16, 100 + seed);
            let r = trace_readout(&rho, &sigma, 0.0, &ops);
            let (dr, ds) = costate_rhs_with(rho.matrix(), sigma.matrix(), r, &h, &l, 3.0);
            let om_dot = (&dr * sigma.matrix()
                + sigma.matrix() * &dr
                + rho.matrix() * &ds
                + &ds * rho.matrix())
            .scale(0.5);
            let rdot = (&l * om_dot).trace();
            assert!(rdot.norm() < 1e-10, "{rdot}");
        }
    }
}
