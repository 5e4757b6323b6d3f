//! Truncated Fock-space operators, states and expectation values.
//!
//! Quadratures use `X = (a + a†)/√2`, `P = i(a† − a)/√2`, so vacuum variances are ½.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::band::{Band, OffTri};
use crate::{c, symmetrize, CMat, CVec, Error, Result, C64};

pub const DEFAULT_LEVELS: usize = 36;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockDim {
    pub n_levels: usize,
}

impl FockDim {
    pub fn new(n_levels: usize) -> Result<Self> {
        if n_levels < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_levels = {n_levels} < 2"
            )));
        }
        Ok(FockDim { n_levels })
    }
}

impl Default for FockDim {
    fn default() -> Self {
        FockDim {
            n_levels: DEFAULT_LEVELS,
        }
    }
}

/// Dense operators plus the banded forms used by the fast steppers.
#[derive(Clone, Debug)]
pub struct OperatorSet {
    pub dim: FockDim,
    pub a: CMat,
    pub adag: CMat,
    pub x: CMat,
    pub p: CMat,
    pub x2: CMat,
    pub p2: CMat,
    pub x3: CMat,
    /// `(XP + PX)/2`
    pub xp_sym: CMat,
    pub identity: CMat,
    pub(crate) x_tri: OffTri,
    pub(crate) p_tri: OffTri,
    pub(crate) h0_band: Band,
    pub(crate) x2_band: Band,
    pub(crate) x3_band: Band,
}

pub fn build_operators(dim: FockDim) -> OperatorSet {
    let n = dim.n_levels;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut a = CMat::zeros(n, n);
    for k in 0..n - 1 {
        a[(k, k + 1)] = c(((k + 1) as f64).sqrt(), 0.0);
    }
    let adag = a.adjoint();
    let x = (&a + &adag).scale(s);
    let p = (&adag - &a) * c(0.0, s);
    let x2 = &x * &x;
    let p2 = &p * &p;
    let x3 = &x2 * &x;
    let xp_sym = (&x * &p + &p * &x).scale(0.5);
    let identity = CMat::identity(n, n);

    let up: Vec<C64> = (0..n - 1)
        .map(|k| c(s * ((k + 1) as f64).sqrt(), 0.0))
        .collect();
    let x_tri = OffTri {
        up: up.clone(),
        down: up.clone(),
    };
    let p_tri = OffTri {
        up: up.iter().map(|v| c(0.0, -v.re)).collect(),
        down: up.iter().map(|v| c(0.0, v.re)).collect(),
    };
    let h0 = (&x2 + &p2).scale(0.5);
    OperatorSet {
        dim,
        h0_band: Band::from_dense(&h0, 2),
        x2_band: Band::from_dense(&x2, 2),
        x3_band: Band::from_dense(&x3, 3),
        a,
        adag,
        x,
        p,
        x2,
        p2,
        x3,
        xp_sym,
        identity,
        x_tri,
        p_tri,
    }
}

impl OperatorSet {
    pub fn n(&self) -> usize {
        self.dim.n_levels
    }

    /// `L_θ` as a zero-diagonal tridiagonal operator.
    pub(crate) fn l_tri(&self, theta: f64) -> OffTri {
        let mut l = OffTri {
            up: self.x_tri.up.clone(),
            down: self.x_tri.down.clone(),
        };
        self.fill_l_tri(theta, &mut l);
        l
    }

    pub(crate) fn fill_l_tri(&self, theta: f64, l: &mut OffTri) {
        let (s, co) = theta.sin_cos();
        for (o, (x, p)) in
            l.up.iter_mut()
                .zip(self.x_tri.up.iter().zip(&self.p_tri.up))
        {
            *o = x * co + p * s;
        }
        for (o, (x, p)) in l
            .down
            .iter_mut()
            .zip(self.x_tri.down.iter().zip(&self.p_tri.down))
        {
            *o = x * co + p * s;
        }
    }

    /// Banded Hamiltonian `½(X²+P²) + λ1 X² + λ2 X³`.
    pub(crate) fn h_band(&self, lambda1: f64, lambda2: f64) -> Band {
        let h = self.h0_band.add_scaled(lambda1, &self.x2_band);
        if lambda2 != 0.0 {
            h.add_scaled(lambda2, &self.x3_band)
        } else {
            h
        }
    }
}

/// Returns `(L_θ, M_θ)`.
pub fn quadratures(ops: &OperatorSet, theta: f64) -> (CMat, CMat) {
    let (s, co) = theta.sin_cos();
    let l = ops.x.scale(co) + ops.p.scale(s);
    let m = ops.x.scale(-s) + ops.p.scale(co);
    (l, m)
}

pub fn hamiltonian(ops: &OperatorSet, lambda1: f64, lambda2: f64) -> CMat {
    (&ops.x2 + &ops.p2).scale(0.5) + ops.x2.scale(lambda1) + ops.x3.scale(lambda2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: CMat,
}

impl DensityMatrix {
    /// Symmetrizes and normalizes `m`.
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                left: m.nrows(),
                right: m.ncols(),
            });
        }
        let h = symmetrize(&m);
        let tr = h.trace().re;
        if !(tr.is_finite() && tr > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "density matrix trace {tr}"
            )));
        }
        Ok(DensityMatrix {
            matrix: h.unscale(tr),
        })
    }

    pub fn from_ket(psi: &CVec) -> Self {
        let m = psi * psi.adjoint();
        let tr = m.trace().re;
        DensityMatrix {
            matrix: symmetrize(&m).unscale(tr),
        }
    }

    pub(crate) fn from_raw(matrix: CMat) -> Self {
        DensityMatrix { matrix }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn expect(&self, op: &CMat) -> f64 {
        (&self.matrix * op).trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Costate {
    matrix: CMat,
}

impl Costate {
    pub fn new(m: CMat) -> Self {
        Costate {
            matrix: symmetrize(&m),
        }
    }

    /// Shifts by a multiple of the identity so that `Tr(σρ) = 1`.
    pub fn gauged(m: CMat, rho: &DensityMatrix) -> Self {
        let s = symmetrize(&m);
        let v = (&s * rho.matrix()).trace().re;
        let n = s.nrows();
        Costate {
            matrix: s + CMat::identity(n, n).scale(1.0 - v),
        }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    /// `⟨σ⟩ = Tr(σρ)`
    pub fn weight(&self, rho: &DensityMatrix) -> f64 {
        (&self.matrix * rho.matrix()).trace().re
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// Amplitudes on |0⟩, |1⟩, ...; normalized on construction.
    FockSuperposition {
        coefficients: Vec<C64>,
    },
    /// Even cat `|α⟩ + |−α⟩`.
    Cat {
        alpha: C64,
    },
    Coherent {
        alpha: C64,
    },
    /// `S(ξ)|0⟩` with `S(ξ) = exp(½(ξ* a² − ξ a†²))`.
    SqueezedVacuum {
        xi: C64,
    },
    /// `D(β) S(ξ)|0⟩`.
    SqueezedCoherent {
        beta: C64,
        xi: C64,
    },
}

const LEAK_TOL: f64 = 1e-10;

fn check_leak(psi: &CVec) -> Result<()> {
    let n = psi.len();
    let total = psi.norm_squared();
    let top: f64 = psi
        .iter()
        .skip(n.saturating_sub(2))
        .map(|z| z.norm_sqr())
        .sum();
    let w = top / total;
    if w > LEAK_TOL || !w.is_finite() {
        return Err(Error::TruncationLeak { weight: w });
    }
    Ok(())
}

fn coherent_amplitudes(n: usize, alpha: C64) -> CVec {
    let mut v = CVec::zeros(n);
    let mut term = c((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for k in 0..n {
        v[k] = term;
        term = term * alpha / ((k + 1) as f64).sqrt();
    }
    v
}

fn squeezed_vacuum_amplitudes(n: usize, xi: C64) -> CVec {
    let r = xi.norm();
    let phase = if r > 0.0 { xi / r } else { c(1.0, 0.0) };
    let t = -phase * r.tanh();
    let mut v = CVec::zeros(n);
    // coefficient of |2m⟩ is (−e^{iΘ} tanh R)^m √((2m)!)/(2^m m!) / √cosh R
    let mut amp = c(1.0 / r.cosh().sqrt(), 0.0);
    let mut m = 0;
    while 2 * m < n {
        v[2 * m] = amp;
        let f = (((2 * m + 1) * (2 * m + 2)) as f64).sqrt() / (2.0 * (m + 1) as f64);
        amp = amp * t * f;
        m += 1;
    }
    v
}

/// Applies `D(β)` by exact exponentiation in a padded space.
fn displace(psi: &CVec, beta: C64) -> CVec {
    let n = psi.len();
    let pad = n + 40;
    let mut a = CMat::zeros(pad, pad);
    for k in 0..pad - 1 {
        a[(k, k + 1)] = c(((k + 1) as f64).sqrt(), 0.0);
    }
    // βa† − β*a = iK with K Hermitian
    let gen = a.adjoint() * beta - &a * beta.conj();
    let k_herm = &gen * c(0.0, -1.0);
    let eig = SymmetricEigen::new(symmetrize(&k_herm));
    let phases = CVec::from_iterator(
        pad,
        eig.eigenvalues.iter().map(|&l| C64::from_polar(1.0, l)),
    );
    let v = &eig.eigenvectors;
    let mut padded = CVec::zeros(pad);
    padded.rows_mut(0, n).copy_from(psi);
    let coeffs = v.adjoint() * padded;
    let out = v * coeffs.component_mul(&phases);
    out.rows(0, n).into_owned()
}

/// Constructs a normalized state vector.
pub fn make_ket(dim: FockDim, spec: &StateSpec) -> Result<CVec> {
    let n = dim.n_levels;
    let psi = match spec {
        StateSpec::FockSuperposition { coefficients } => {
            if coefficients.len() > n {
                return Err(Error::DimensionMismatch {
                    left: coefficients.len(),
                    right: n,
                });
            }
            let mut v = CVec::zeros(n);
            for (k, z) in coefficients.iter().enumerate() {
                v[k] = *z;
            }
            v
        }
        StateSpec::Cat { alpha } => {
            let plus = coherent_amplitudes(n, *alpha);
            let minus = coherent_amplitudes(n, -*alpha);
            let norm = (2.0 * (1.0 + (-2.0 * alpha.norm_sqr()).exp())).sqrt();
            (plus + minus).unscale(norm)
        }
        StateSpec::Coherent { alpha } => coherent_amplitudes(n, *alpha),
        StateSpec::SqueezedVacuum { xi } => squeezed_vacuum_amplitudes(n, *xi),
        StateSpec::SqueezedCoherent { beta, xi } => {
            displace(&squeezed_vacuum_amplitudes(n, *xi), *beta)
        }
    };
    for z in psi.iter() {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::InvalidParameter("non-finite state amplitude".into()));
        }
    }
    let norm = psi.norm();
    if norm == 0.0 {
        return Err(Error::InvalidParameter("zero state vector".into()));
    }
    check_leak(&psi)?;
    Ok(psi.unscale(norm))
}

pub fn make_state(dim: FockDim, spec: &StateSpec) -> Result<DensityMatrix> {
    Ok(DensityMatrix::from_ket(&make_ket(dim, spec)?))
}

/// `Tr(ρ ρ_target)`; a fidelity when the target is pure.
pub fn fidelity(rho: &DensityMatrix, target: &DensityMatrix) -> Result<f64> {
    if rho.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: target.dim(),
        });
    }
    let z: C64 = rho
        .matrix()
        .iter()
        .zip(target.matrix().transpose().iter())
        .map(|(a, b)| a * b)
        .sum();
    Ok(z.re)
}

/// `|⟨target|ψ⟩|²` for normalized kets.
pub fn ket_fidelity(psi: &CVec, target: &CVec) -> f64 {
    target.dotc(psi).norm_sqr()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub cov_xp: f64,
    pub var_p: f64,
}

pub fn moments(rho: &DensityMatrix, ops: &OperatorSet) -> Moments {
    let mx = rho.expect(&ops.x);
    let mp = rho.expect(&ops.p);
    Moments {
        mean_x: mx,
        mean_p: mp,
        var_x: rho.expect(&ops.x2) - mx * mx,
        cov_xp: rho.expect(&ops.xp_sym) - mx * mp,
        var_p: rho.expect(&ops.p2) - mp * mp,
    }
}

/// Moments of a normalized ket using the banded quadratures.
pub fn ket_moments(psi: &CVec, ops: &OperatorSet) -> Moments {
    let n = psi.len();
    let mut xv = vec![C64::new(0.0, 0.0); n];
    let mut pv = vec![C64::new(0.0, 0.0); n];
    ket_moments_with(psi.as_slice(), ops, &mut xv, &mut pv)
}

/// [`ket_moments`] with caller-provided scratch.
pub(crate) fn ket_moments_with(
    psi: &[C64],
    ops: &OperatorSet,
    xv: &mut [C64],
    pv: &mut [C64],
) -> Moments {
    let n = psi.len();
    ops.x_tri.apply(psi, xv);
    ops.p_tri.apply(psi, pv);
    let mut mx = 0.0;
    let mut mp = 0.0;
    let mut x2 = 0.0;
    let mut p2 = 0.0;
    let mut xp = 0.0;
    for k in 0..n {
        mx += (psi[k].conj() * xv[k]).re;
        mp += (psi[k].conj() * pv[k]).re;
        x2 += xv[k].norm_sqr();
        p2 += pv[k].norm_sqr();
        xp += (xv[k].conj() * pv[k]).re;
    }
    Moments {
        mean_x: mx,
        mean_p: mp,
        var_x: x2 - mx * mx,
        cov_xp: xp - mx * mp,
        var_p: p2 - mp * mp,
    }
}
