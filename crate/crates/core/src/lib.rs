//! Numerics for continuum quasi-periodic Schrödinger operators
//! `−u'' + f(ω + xα) u = E u`.
//!
//! The modules follow the data flow: a [`torus`] flow samples a
//! [`sampling`] function into a potential, [`propagation`] turns potentials
//! into transfer matrices and m-functions, [`lyapunov`] and [`zero_measure`]
//! estimate growth rates and the zero-Lyapunov measure, and [`perturb`]
//! builds box-step approximants whose flow itineraries are analysed with
//! [`pieces`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod lyapunov;
pub mod perturb;
pub mod pieces;
pub mod propagation;
pub mod quadrature;
pub mod sampling;
pub mod torus;
pub mod zero_measure;

pub use num_complex::Complex64;

pub use error::{Error, Result};
pub use lyapunov::{
    energy_grid, lyapunov_growth, lyapunov_via_m, sweep_curve, CurvePoint, LyapunovCurve, LyapunovEstimate,
    LyapunovMethod, LyapunovParams,
};
pub use perturb::{
    build_fepsn, build_partition, ensure_aperiodic, itinerary, itinerary_symbols, verify_construction,
    AperiodicityAdjustment, BoxPartition, BoxProfile, BoxStep, Itinerary, VerificationReport, VerifyParams,
};
pub use pieces::{
    Alphabet, FdpReport, FdpWitness, PeriodicityVerdict, Piece, PieceSequence, Profile, SimpleFdpVerdict,
};
pub use propagation::{
    cocycle_step, floquet_discriminant, m_plus, mobius_cross_check, periodic_trace, propagate, MFunctionValue,
    MParams, TransferMatrix,
};
pub use sampling::{
    find_almost_periods, l1_distance, mollifier_constant, mollifier_eta, mollifier_eta_eps, sup_distance,
    trace_potential, Mollified, PotentialTrace, SamplingFunction, TrigTerm,
};
pub use torus::{find_rational_dependence, reduce_unit, sample_omegas, FlowParams, OmegaScheme, TorusPoint};
pub use zero_measure::{
    coupling_integral, estimate_mr, semicontinuity_experiment, CouplingIntegralEstimate, MREstimate,
    SemicontinuityParams, SemicontinuityReport, SemicontinuityRow,
};
