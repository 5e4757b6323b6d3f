//! Kraus-form time steppers for the conditional state and seeded Wiener noise.
//!
//! Each step applies one operator `K`, so kets stay kets; the density-matrix
//! steppers and the ket steppers share the same kernels.

use nalgebra::Cholesky;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::band::{Band, OffTri};
use crate::fock::moments as moments_of;
use crate::fock::{ket_moments, DensityMatrix, Moments, OperatorSet};
use crate::schedule::{step_count, ControlSchedule};
use crate::{c, symmetrize, CMat, CVec, Error, Result, C64};

const POSITIVITY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepParams {
    pub dt: f64,
    pub tau: f64,
    pub theta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl StepParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt = {}", self.dt)));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau = {}", self.tau)));
        }
        if !(self.dt / self.tau < 0.01) {
            return Err(Error::InvalidParameter(format!(
                "dt/tau = {} is not < 0.01",
                self.dt / self.tau
            )));
        }
        if !(self.theta.is_finite() && self.lambda1.is_finite() && self.lambda2.is_finite()) {
            return Err(Error::InvalidParameter("non-finite control".into()));
        }
        Ok(())
    }
}

/// Counter-based Gaussian source keyed on `(seed, stream_id, step)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseStream {
    pub seed: u64,
    pub stream_id: u64,
}

const WORDS_PER_STEP: u128 = 4;

fn box_muller(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = ((rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
    let u2 = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

impl NoiseStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        NoiseStream { seed, stream_id }
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Standard normal draw for `step`.
    pub fn normal(&self, step: u64) -> f64 {
        let mut rng = self.rng();
        rng.set_word_pos(step as u128 * WORDS_PER_STEP);
        box_muller(&mut rng)
    }

    /// Wiener increment of variance `dt` for `step`.
    pub fn increment(&self, step: u64, dt: f64) -> f64 {
        dt.sqrt() * self.normal(step)
    }

    /// Sequential increments starting at step 0; identical to `increment`.
    pub fn increments(&self, dt: f64) -> impl Iterator<Item = f64> {
        let mut rng = self.rng();
        let sq = dt.sqrt();
        std::iter::repeat_with(move || sq * box_muller(&mut rng))
    }
}

/// Scratch space and kernels for applying Kraus operators to vectors.
pub(crate) struct Kernel {
    s1: Vec<C64>,
    s2: Vec<C64>,
    s3: Vec<C64>,
}

impl Kernel {
    pub(crate) fn new(n: usize) -> Self {
        let z = vec![c(0.0, 0.0); n];
        Kernel {
            s1: z.clone(),
            s2: z.clone(),
            s3: z,
        }
    }

    /// `v ← (1 + a L − b L²) v`
    fn measure(&mut self, l: &OffTri, a: f64, b: f64, v: &mut [C64]) {
        l.apply(v, &mut self.s1);
        l.apply(&self.s1, &mut self.s2);
        for k in 0..v.len() {
            v[k] += self.s1[k] * a - self.s2[k] * b;
        }
    }

    /// `v ← Σ_{j≤4} (−i H dt)^j / j! · v`
    fn unitary(&mut self, h: &Band, dt: f64, v: &mut [C64]) {
        self.s1.copy_from_slice(v);
        for j in 1..=4 {
            h.apply(&self.s1, &mut self.s2);
            let f = c(0.0, -dt / j as f64);
            for k in 0..v.len() {
                self.s1[k] = self.s2[k] * f;
                v[k] += self.s1[k];
            }
        }
    }

    /// Stratonovich Kraus map `U(dt/2) (1 + (r dt/2τ) L − (dt/4τ) L²) U(dt/2)`, unnormalized.
    /// The symmetric split keeps one Kraus operator per step and is second order in `dt`.
    pub(crate) fn strat(&mut self, l: &OffTri, h: &Band, r: f64, dt: f64, tau: f64, v: &mut [C64]) {
        self.unitary(h, 0.5 * dt, v);
        self.measure(l, r * dt / (2.0 * tau), dt / (4.0 * tau), v);
        self.unitary(h, 0.5 * dt, v);
    }

    /// Itô Kraus map `1 − i H dt + (r dt/2τ) L − (dt/8τ) L²`, unnormalized.
    pub(crate) fn ito(&mut self, l: &OffTri, h: &Band, r: f64, dt: f64, tau: f64, v: &mut [C64]) {
        let a = r * dt / (2.0 * tau);
        let b = dt / (8.0 * tau);
        l.apply(v, &mut self.s1);
        l.apply(&self.s1, &mut self.s2);
        h.apply(v, &mut self.s3);
        let mi = c(0.0, -dt);
        for k in 0..v.len() {
            v[k] += self.s3[k] * mi + self.s1[k] * a - self.s2[k] * b;
        }
    }
}

pub(crate) fn normalize(v: &mut [C64]) {
    let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in v.iter_mut() {
        *z /= n;
    }
}

/// Applies a column kernel on both sides: `K ρ K†`.
pub(crate) fn conjugate<F: FnMut(&mut [C64])>(rho: &CMat, mut k: F) -> CMat {
    let n = rho.nrows();
    let mut a = rho.clone();
    for j in 0..n {
        k(a.column_mut(j).as_mut_slice());
    }
    let mut b = a.adjoint();
    for j in 0..n {
        k(b.column_mut(j).as_mut_slice());
    }
    b
}

pub(crate) fn finish(m: CMat, step: usize) -> Result<DensityMatrix> {
    let h = symmetrize(&m);
    let tr = h.trace().re;
    if !(tr.is_finite() && tr > 0.0) {
        return Err(Error::PositivityLoss { step });
    }
    let rho = h.unscale(tr);
    let n = rho.nrows();
    let shifted = &rho + CMat::identity(n, n).scale(POSITIVITY_TOL);
    if Cholesky::new(shifted).is_none() {
        return Err(Error::PositivityLoss { step });
    }
    Ok(DensityMatrix::from_raw(rho))
}

fn check_dim(rho: &DensityMatrix, ops: &OperatorSet) -> Result<()> {
    if rho.dim() != ops.n() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: ops.n(),
        });
    }
    Ok(())
}

pub fn stratonovich_step(
    rho: &DensityMatrix,
    r: f64,
    p: &StepParams,
    ops: &OperatorSet,
) -> Result<DensityMatrix> {
    p.validate()?;
    check_dim(rho, ops)?;
    let l = ops.l_tri(p.theta);
    let h = ops.h_band(p.lambda1, p.lambda2);
    let mut kern = Kernel::new(ops.n());
    let out = conjugate(rho.matrix(), |v| kern.strat(&l, &h, r, p.dt, p.tau, v));
    finish(out, 0)
}

/// Itô step driven by Wiener increment `dW`; returns the new state and the readout.
pub fn ito_step(
    rho: &DensityMatrix,
    dw: f64,
    p: &StepParams,
    ops: &OperatorSet,
) -> Result<(DensityMatrix, f64)> {
    p.validate()?;
    check_dim(rho, ops)?;
    let l = ops.l_tri(p.theta);
    let r = rho.expect(&l.to_dense()) + p.tau.sqrt() * dw / p.dt;
    let h = ops.h_band(p.lambda1, p.lambda2);
    let mut kern = Kernel::new(ops.n());
    let out = conjugate(rho.matrix(), |v| kern.ito(&l, &h, r, p.dt, p.tau, v));
    Ok((finish(out, 0)?, r))
}

/// Ket version of [`stratonovich_step`].
pub fn stratonovich_step_ket(
    psi: &CVec,
    r: f64,
    p: &StepParams,
    ops: &OperatorSet,
) -> Result<CVec> {
    p.validate()?;
    let mut v = psi.clone();
    let mut kern = Kernel::new(ops.n());
    kern.strat(
        &ops.l_tri(p.theta),
        &ops.h_band(p.lambda1, p.lambda2),
        r,
        p.dt,
        p.tau,
        v.as_mut_slice(),
    );
    normalize(v.as_mut_slice());
    Ok(v)
}

/// Ket version of [`ito_step`].
pub fn ito_step_ket(psi: &CVec, dw: f64, p: &StepParams, ops: &OperatorSet) -> Result<(CVec, f64)> {
    p.validate()?;
    let l = ops.l_tri(p.theta);
    let r = l.expect(psi.as_slice()) + p.tau.sqrt() * dw / p.dt;
    let mut v = psi.clone();
    let mut kern = Kernel::new(ops.n());
    kern.ito(
        &l,
        &ops.h_band(p.lambda1, p.lambda2),
        r,
        p.dt,
        p.tau,
        v.as_mut_slice(),
    );
    normalize(v.as_mut_slice());
    Ok((v, r))
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub t: Vec<f64>,
    pub moments: Vec<Moments>,
    /// `readout[k]` is the readout of step k, received on `[t_k, t_{k+1})`.
    pub readout: Vec<f64>,
    pub final_state: DensityMatrix,
}

impl TrajectoryRecord {
    pub fn fidelity(&self, target: &DensityMatrix) -> Result<f64> {
        crate::fock::fidelity(&self.final_state, target)
    }

    /// CSV `t,X,P,VarX,Cov,VarP,r`; row k carries the readout of step k.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,X,P,VarX,Cov,VarP,r\n");
        for (k, (t, m)) in self.t.iter().zip(&self.moments).enumerate() {
            let r = self.readout.get(k).copied().unwrap_or(f64::NAN);
            out.push_str(&format!(
                "{:.6},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                t, m.mean_x, m.mean_p, m.var_x, m.cov_xp, m.var_p, r
            ));
        }
        out
    }
}

fn schedule_steps(schedule: &ControlSchedule, t_f: f64, dt: f64) -> Result<usize> {
    schedule.validate()?;
    let n = step_count(t_f, dt)?;
    if (schedule.dt - dt).abs() > 1e-12 * dt {
        return Err(Error::InvalidParameter(format!(
            "schedule dt {} differs from dt {dt}",
            schedule.dt
        )));
    }
    if schedule.n_steps() < n {
        return Err(Error::DimensionMismatch {
            left: schedule.n_steps(),
            right: n,
        });
    }
    Ok(n)
}

/// Itô trajectory of the full density matrix.
pub fn simulate_trajectory(
    rho0: &DensityMatrix,
    schedule: &ControlSchedule,
    tau: f64,
    t_f: f64,
    dt: f64,
    noise: NoiseStream,
    ops: &OperatorSet,
) -> Result<TrajectoryRecord> {
    check_dim(rho0, ops)?;
    let n = schedule_steps(schedule, t_f, dt)?;
    let mut rho = rho0.clone();
    let mut rec = TrajectoryRecord {
        t: vec![0.0],
        moments: vec![moments_of(&rho, ops)],
        readout: Vec::with_capacity(n),
        final_state: rho0.clone(),
    };
    let lams = schedule.effective_lambda1();
    for (k, dw) in noise.increments(dt).take(n).enumerate() {
        let p = StepParams {
            dt,
            tau,
            theta: schedule.theta[k],
            lambda1: lams[k],
            lambda2: 0.0,
        };
        let (next, r) = ito_step(&rho, dw, &p, ops).map_err(|e| match e {
            Error::PositivityLoss { .. } => Error::PositivityLoss { step: k },
            e => e,
        })?;
        rho = next;
        rec.t.push((k + 1) as f64 * dt);
        rec.moments.push(moments_of(&rho, ops));
        rec.readout.push(r);
    }
    rec.final_state = rho;
    Ok(rec)
}

/// Itô trajectory of a ket. Returns the final ket and, if requested, the record.
pub fn simulate_ket_trajectory(
    psi0: &CVec,
    schedule: &ControlSchedule,
    tau: f64,
    t_f: f64,
    dt: f64,
    noise: NoiseStream,
    ops: &OperatorSet,
    record: bool,
) -> Result<(CVec, Option<TrajectoryRecord>)> {
    let n = schedule_steps(schedule, t_f, dt)?;
    StepParams {
        dt,
        tau,
        theta: 0.0,
        lambda1: 0.0,
        lambda2: 0.0,
    }
    .validate()?;
    let mut v = psi0.clone();
    let mut kern = Kernel::new(ops.n());
    let mut rec = record.then(|| (vec![0.0], vec![ket_moments(&v, ops)], Vec::with_capacity(n)));
    let mut cache: Option<(u64, Band)> = None;
    let sq = tau.sqrt();
    let mut l = ops.l_tri(0.0);
    let mut l_theta = 0.0;
    let lams = schedule.effective_lambda1();
    for (k, dw) in noise.increments(dt).take(n).enumerate() {
        if schedule.theta[k] != l_theta {
            l_theta = schedule.theta[k];
            ops.fill_l_tri(l_theta, &mut l);
        }
        let lam = lams[k];
        if cache
            .as_ref()
            .map_or(true, |(bits, _)| *bits != lam.to_bits())
        {
            cache = Some((lam.to_bits(), ops.h_band(lam, 0.0)));
        }
        let h = &cache.as_ref().unwrap().1;
        let r = l.expect(v.as_slice()) + sq * dw / dt;
        kern.ito(&l, h, r, dt, tau, v.as_mut_slice());
        normalize(v.as_mut_slice());
        if !v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::PositivityLoss { step: k });
        }
        if let Some((t, m, rr)) = rec.as_mut() {
            t.push((k + 1) as f64 * dt);
            m.push(ket_moments(&v, ops));
            rr.push(r);
        }
    }
    let rec = rec.map(|(t, moments, readout)| TrajectoryRecord {
        t,
        moments,
        readout,
        final_state: DensityMatrix::from_ket(&v),
    });
    Ok((v, rec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_operators, hamiltonian, make_ket, make_state, FockDim, StateSpec};
    use approx::assert_abs_diff_eq;
    use nalgebra::SymmetricEigen;

    fn params(theta: f64, lambda1: f64, tau: f64) -> StepParams {
        StepParams {
            dt: 1e-3,
            tau,
            theta,
            lambda1,
            lambda2: 0.0,
        }
    }

    #[test]
    fn rejects_strong_measurement() {
        assert!(StepParams {
            dt: 0.2,
            tau: 15.0,
            theta: 0.0,
            lambda1: 0.0,
            lambda2: 0.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn noise_is_counter_based() {
        let ns = NoiseStream::new(7, 3);
        let seq: Vec<f64> = ns.increments(1e-3).take(50).collect();
        for (k, v) in seq.iter().enumerate() {
            assert_eq!(*v, ns.increment(k as u64, 1e-3));
        }
        assert_ne!(seq[0], NoiseStream::new(7, 4).increment(0, 1e-3));
    }

    #[test]
    fn noise_moments() {
        let ns = NoiseStream::new(11, 0);
        let xs: Vec<f64> = ns.increments(1.0).take(20000).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.03);
        assert!((var - 1.0).abs() < 0.04);
    }

    #[test]
    fn unitary_limit_matches_exponential() {
        let ops = build_operators(FockDim::new(20).unwrap());
        let rho0 = make_state(
            ops.dim,
            &StateSpec::Coherent {
                alpha: c(0.6, -0.3),
            },
        )
        .unwrap();
        let p = params(0.4, 0.2, f64::INFINITY);
        let mut rho = rho0.clone();
        for _ in 0..200 {
            rho = stratonovich_step(&rho, 1.3, &p, &ops).unwrap();
        }
        let h = hamiltonian(&ops, 0.2, 0.0);
        let eig = SymmetricEigen::new(h);
        let t = 0.2;
        let d = CMat::from_diagonal(&CVec::from_iterator(
            20,
            eig.eigenvalues
                .iter()
                .map(|&e| C64::from_polar(1.0, -e * t)),
        ));
        let u = &eig.eigenvectors * d * eig.eigenvectors.adjoint();
        let exact = DensityMatrix::new(&u * rho0.matrix() * u.adjoint()).unwrap();
        let f = crate::fock::fidelity(&rho, &exact).unwrap();
        assert!((1.0 - f).abs() < 1e-8, "fidelity {f}");
    }

    #[test]
    fn eigenstate_is_stationary_without_hamiltonian() {
        // τ large compared with dt but H absent: use a two-level space and L = X eigenstate
        let ops = build_operators(FockDim::new(2).unwrap());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = CVec::from_vec(vec![c(s, 0.0), c(s, 0.0)]);
        let l = ops.l_tri(0.0);
        let r = l.expect(psi.as_slice());
        let mut v = psi.clone();
        let mut kern = Kernel::new(2);
        kern.measure(&l, r * 1e-3 / 30.0, 1e-3 / 60.0, v.as_mut_slice());
        normalize(v.as_mut_slice());
        assert!((v - psi).norm() < 1e-14);
    }

    #[test]
    fn long_run_conserves_trace() {
        let ops = build_operators(FockDim::default());
        let mut rho = make_state(
            ops.dim,
            &StateSpec::Cat {
                alpha: c(0.25, -0.75),
            },
        )
        .unwrap();
        let p = params(0.7, -0.2, 15.0);
        for _ in 0..3000 {
            rho = stratonovich_step(&rho, 0.8, &p, &ops).unwrap();
            assert!((rho.trace() - 1.0).abs() < 1e-9);
        }
        assert!(crate::hermiticity_residual(rho.matrix()) < 1e-12);
    }

    #[test]
    fn ket_and_density_steppers_agree() {
        let ops = build_operators(FockDim::new(24).unwrap());
        let psi0 = make_ket(ops.dim, &StateSpec::Cat { alpha: c(0.5, 0.7) }).unwrap();
        let mut rho = DensityMatrix::from_ket(&psi0);
        let mut psi = psi0.clone();
        let p = params(1.1, 0.2, 15.0);
        for k in 0..100 {
            let r = 2.0 * (k as f64 * 0.05).sin();
            rho = stratonovich_step(&rho, r, &p, &ops).unwrap();
            psi = stratonovich_step_ket(&psi, r, &p, &ops).unwrap();
        }
        assert!(crate::max_abs(&(DensityMatrix::from_ket(&psi).matrix() - rho.matrix())) < 1e-12);
        let (rho2, r1) = ito_step(&rho, 0.01, &p, &ops).unwrap();
        let (psi2, r2) = ito_step_ket(&psi, 0.01, &p, &ops).unwrap();
        assert_abs_diff_eq!(r1, r2, epsilon = 1e-12);
        assert!(crate::max_abs(&(DensityMatrix::from_ket(&psi2).matrix() - rho2.matrix())) < 1e-12);
    }

    #[test]
    fn ito_zero_noise_vacuum() {
        let ops = build_operators(FockDim::new(16).unwrap());
        let vac = make_state(ops.dim, &StateSpec::Coherent { alpha: c(0.0, 0.0) }).unwrap();
        let (_, r) = ito_step(&vac, 0.0, &params(0.0, 0.0, 15.0), &ops).unwrap();
        assert_abs_diff_eq!(r, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn seeded_trajectories_repeat() {
        let ops = build_operators(FockDim::new(20).unwrap());
        let rho0 = make_state(ops.dim, &StateSpec::Coherent { alpha: c(0.3, 0.0) }).unwrap();
        let sched = ControlSchedule::constant(0.3, 0.1, 1e-3, 300);
        let a = simulate_trajectory(&rho0, &sched, 15.0, 0.3, 1e-3, NoiseStream::new(5, 2), &ops)
            .unwrap();
        let b = simulate_trajectory(&rho0, &sched, 15.0, 0.3, 1e-3, NoiseStream::new(5, 2), &ops)
            .unwrap();
        assert_eq!(a.readout, b.readout);
        assert_eq!(a.final_state, b.final_state);
        let empty =
            simulate_trajectory(&rho0, &sched, 15.0, 0.0, 1e-3, NoiseStream::new(5, 2), &ops)
                .unwrap();
        assert_eq!(empty.moments.len(), 1);
        assert!(empty.readout.is_empty());
    }

    #[test]
    fn ket_trajectory_matches_density_trajectory() {
        let ops = build_operators(FockDim::new(20).unwrap());
        let psi0 = make_ket(ops.dim, &StateSpec::Coherent { alpha: c(0.3, 0.2) }).unwrap();
        let sched = ControlSchedule::constant(0.9, -0.2, 1e-3, 200);
        let noise = NoiseStream::new(1, 9);
        let a = simulate_trajectory(
            &DensityMatrix::from_ket(&psi0),
            &sched,
            15.0,
            0.2,
            1e-3,
            noise,
            &ops,
        )
        .unwrap();
        let (_, b) =
            simulate_ket_trajectory(&psi0, &sched, 15.0, 0.2, 1e-3, noise, &ops, true).unwrap();
        let b = b.unwrap();
        for (x, y) in a.readout.iter().zip(&b.readout) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
        assert!(crate::max_abs(&(a.final_state.matrix() - b.final_state.matrix())) < 1e-11);
    }

    fn step_pair(dt: f64) -> (CMat, CMat, CMat) {
        let ops = build_operators(FockDim::new(24).unwrap());
        let rho = make_state(ops.dim, &StateSpec::Cat { alpha: c(0.5, 0.4) }).unwrap();
        let p = StepParams {
            dt,
            tau: 1.0,
            theta: 0.6,
            lambda1: 0.1,
            lambda2: 0.0,
        };
        let (l, _) = crate::fock::quadratures(&ops, p.theta);
        let r = rho.expect(&l);
        let s = stratonovich_step(&rho, r, &p, &ops).unwrap();
        let (i, ri) = ito_step(&rho, 0.0, &p, &ops).unwrap();
        assert_abs_diff_eq!(ri, r, epsilon = 1e-12);
        let v = &l * &l;
        let mv = rho.expect(&v);
        let conv = (&v * rho.matrix() + rho.matrix() * &v - rho.matrix().scale(2.0 * mv))
            .scale(dt / (8.0 * p.tau));
        (s.matrix().clone(), i.matrix().clone(), conv)
    }

    #[test]
    fn stratonovich_and_ito_differ_by_conversion_term() {
        let mut ratios = Vec::new();
        for dt in [4e-3, 2e-3, 1e-3] {
            let (s, i, conv) = step_pair(dt);
            // the raw difference is first order in dt
            assert!(crate::max_abs(&(&s - &i)) > 0.5 * crate::max_abs(&conv));
            let rest = crate::max_abs(&(s - i + conv));
            ratios.push(rest / (dt * dt));
        }
        for w in ratios.windows(2) {
            assert!((w[1] / w[0] - 1.0).abs() < 0.1, "{ratios:?}");
        }
    }

    #[test]
    fn stratonovich_step_is_second_order() {
        use crate::cdjp::costate_rhs_with;
        let ops = build_operators(FockDim::new(24).unwrap());
        let rho0 = make_state(ops.dim, &StateSpec::Cat { alpha: c(0.5, 0.4) }).unwrap();
        let h = hamiltonian(&ops, 0.1, 0.0);
        let (l, _) = crate::fock::quadratures(&ops, 0.6);
        let (tau, r) = (1.0, 0.8);
        let sigma = ops.identity.clone();
        let mut errs = Vec::new();
        for dt in [4e-3, 2e-3, 1e-3] {
            let p = StepParams {
                dt,
                tau,
                theta: 0.6,
                lambda1: 0.1,
                lambda2: 0.0,
            };
            let s = stratonovich_step(&rho0, r, &p, &ops).unwrap();
            let mut rho = rho0.matrix().clone();
            let sub = 200;
            let hh = dt / sub as f64;
            for _ in 0..sub {
                let f = |m: &CMat| costate_rhs_with(m, &sigma, r, &h, &l, tau).0;
                let k1 = f(&rho);
                let k2 = f(&(&rho + k1.scale(0.5 * hh)));
                let k3 = f(&(&rho + k2.scale(0.5 * hh)));
                let k4 = f(&(&rho + k3.scale(hh)));
                rho += (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(hh / 6.0);
            }
            errs.push(crate::max_abs(&(s.matrix() - rho)) / (dt * dt));
        }
        for w in errs.windows(2) {
            assert!((w[1] / w[0] - 1.0).abs() < 0.15, "{errs:?}");
        }
    }
}
