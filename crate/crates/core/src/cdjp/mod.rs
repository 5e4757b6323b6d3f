//! Costate most-likely paths, the reduced Γ/κ scalar system and the
//! Pontryagin control laws for the parametric oscillator.

mod bundle;
mod costate;
mod general;
mod mlp;
mod uvwz;

pub use bundle::{
    bundle_rhs, gamma_ab, optimal_lambda1, optimal_readout, optimal_theta, pontryagin_value,
    rk4_bundle, stochastic_hamiltonian, PontryaginValue, ScalarBundle,
};
pub use costate::{
    bundle_from_pair, costate_rhs, costate_rhs_with, omega_lambda, operator_stochastic_hamiltonian,
    rk4_pair, trace_readout,
};
pub use general::{
    general_bundle_rhs, mccoy_coefficient, mccoy_commutator, table_from_pair, GammaKappaTable,
};
pub use mlp::{cost_functional, mlp_integrate, mlp_run, ControlMode, MlpConfig, MlpPath, MlpStart};
pub use uvwz::{analytic_uvwz, rk4_uvwz, uvwz_from_pair, uvwz_rhs, Uvwz};
