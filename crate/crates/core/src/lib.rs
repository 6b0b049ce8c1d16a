//! Tensor-network evaluation of dynamic multiproduct formulas for
//! one-dimensional spin-chain Trotter circuits.

mod chain;
mod linalg;
pub mod aqc;
pub mod dense;
pub mod error;
pub mod estimator;
pub mod mpf;
pub mod mpo;
pub mod mps;
pub mod scaling;
pub mod spinchain;
pub mod sweep;
pub mod tensor;

pub use aqc::{aqc_interleave_plan, build_ansatz, optimize, smart_init, AqcWindow, OptimizeOptions, OptimizeResult, ParamCircuit, WindowSide};
pub use chain::DEFAULT_MEMORY_CAP;
pub use error::{Error, Result};
pub use dense::StateVector;
pub use mpo::{build_f, identity_mpo, mpo_diagnostics, InterleavePlan, MatrixProductOperator, MpoDiagnostics};
pub use estimator::{estimate, mpf_combine, CombinedEstimate, EstimateResult, Shots};
pub use mpf::{
    assemble_from_states, assemble_mpo, cross_validated_error, dynamic_coefficients, lemma_bound_check, mpf_test,
    state_truncation_error, static_coefficients, trotter_error, CoefficientSet, LemmaCheck, MpfProblem, MpfSetup,
    Provenance, ReferenceSpec, TestOutcome,
};
pub use mps::{neel_bits, MatrixProductState, ObservableSpec, SiteOperator};
pub use scaling::{fit_scaling, ScalingFit, ScalingModel};
pub use spinchain::{
    bond_gate, build_hamiltonian, trotter_circuit, BondTerm, Gate2, GateLayer, HamiltonianSpec, ModelKind, Parity,
    TimedCircuit, TimedStep, TrotterOrder,
};
pub use sweep::{run_sweep, run_sweep_with, time_grid, Backend, SweepOptions, SweepPoint, SweepResult};
pub use tensor::{contract, truncated_svd, DenseTensor, TruncationPolicy, TruncationReport, C64};
