//! Time-grid drivers: assemble an MPF problem at every grid time, solve for
//! coefficients and run the validity tests.

use serde::{Deserialize, Serialize};

use crate::dense::StateVector;
use crate::error::{Error, Result};
use crate::mpf::{
    assemble_from_states, assemble_mpo, dynamic_coefficients, error_from_fidelity, mpf_test, static_coefficients,
    CoefficientSet, MpfProblem, MpfSetup, Provenance, TestOutcome,
};
use crate::mps::MatrixProductState;
use crate::spinchain::{trotter_circuit, TrotterOrder};
use crate::tensor::TruncationPolicy;

/// How overlaps are obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum Backend {
    /// Interleaved operator contraction.
    Mpo { policy: TruncationPolicy },
    /// Full state vectors; reference from `setup.reference`.
    Dense,
    /// Stored MPS; the reference is one fourth-order trajectory advanced
    /// along the grid with steps no longer than `reference_dt`.
    Mps { policy: TruncationPolicy, reference_dt: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepPoint {
    pub t: f64,
    pub problem: MpfProblem,
    pub dynamic: CoefficientSet,
    /// `E` of the static formula on this point's problem.
    pub static_error: f64,
    /// `E_k` for every entry of `k_list`.
    pub trotter_errors: Vec<f64>,
    /// `E_k` for every probe step count.
    pub probe_errors: Vec<f64>,
}

impl SweepPoint {
    pub fn error_d(&self) -> f64 {
        self.dynamic.error_d.unwrap_or_else(|| self.problem.cost(&self.dynamic.c))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub times: Vec<f64>,
    pub points: Vec<SweepPoint>,
    pub static_coeffs: CoefficientSet,
    /// Present when at least one probe step count was requested; the first
    /// probe is the deep Trotter comparison.
    pub outcome: Option<TestOutcome>,
}

impl SweepResult {
    pub fn error_d(&self) -> Vec<f64> {
        self.points.iter().map(SweepPoint::error_d).collect()
    }

    pub fn min_trotter_error(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| p.trotter_errors.iter().copied().fold(f64::INFINITY, f64::min))
            .collect()
    }
}

/// `start, start + step, ...` up to `stop` inclusive.
pub fn time_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::InvalidArgument(format!("bad grid start={start} stop={stop} step={step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + step * i as f64).collect())
}

pub fn run_sweep(setup: &MpfSetup, times: &[f64], backend: &Backend, ridge: f64) -> Result<SweepResult> {
    run_sweep_with(setup, times, backend, &SweepOptions { ridge, stop_after_failure: false }, |_| {})
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub ridge: f64,
    /// Stop once both the MPF test and the Trotter test have failed; later
    /// points cannot move either first-failure time.
    pub stop_after_failure: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { ridge: crate::mpf::DEFAULT_RIDGE, stop_after_failure: false }
    }
}

/// [`run_sweep`] with early stopping and a callback after every point.
pub fn run_sweep_with(
    setup: &MpfSetup,
    times: &[f64],
    backend: &Backend,
    opts: &SweepOptions,
    mut on_point: impl FnMut(&SweepPoint),
) -> Result<SweepResult> {
    if times.is_empty() || times.windows(2).any(|w| w[0] >= w[1]) || times[0] < 0.0 {
        return Err(Error::InvalidArgument("times must be non-negative and increasing".into()));
    }
    let static_coeffs = static_coefficients(&setup.k_list, setup.order.as_int())?;
    let mut source = PointSource::new(setup, backend)?;
    let mut result = SweepResult {
        times: Vec::with_capacity(times.len()),
        points: Vec::with_capacity(times.len()),
        static_coeffs,
        outcome: None,
    };
    for &t in times {
        let (problem, probe_l) = source.point(setup, t)?;
        let dynamic = dynamic_coefficients(&problem, opts.ridge)?;
        let point = SweepPoint {
            t: problem.t,
            dynamic,
            static_error: problem.cost(&result.static_coeffs.c),
            trotter_errors: problem.l.iter().map(|&l| error_from_fidelity(l)).collect(),
            probe_errors: probe_l.iter().map(|&l| error_from_fidelity(l)).collect(),
            problem,
        };
        on_point(&point);
        result.times.push(t);
        result.points.push(point);
        if !setup.probe_ks.is_empty() {
            let outcome = outcome_of(&result, setup.k_list.len())?;
            let done = outcome.mpf_cutoff.is_some() && outcome.trotter_crossover.is_some();
            result.outcome = Some(outcome);
            if opts.stop_after_failure && done {
                break;
            }
        }
    }
    Ok(result)
}

fn outcome_of(result: &SweepResult, r: usize) -> Result<TestOutcome> {
    let deep: Vec<f64> = result.points.iter().map(|p| p.probe_errors[0]).collect();
    mpf_test(&result.times, &result.error_d(), &result.min_trotter_error(), &deep, r)
}

enum PointSource<'a> {
    Mpo(&'a TruncationPolicy),
    Dense(StateVector),
    Mps {
        policy: &'a TruncationPolicy,
        reference_dt: f64,
        start: MatrixProductState,
        reference: MatrixProductState,
        t_ref: f64,
    },
}

impl<'a> PointSource<'a> {
    fn new(setup: &MpfSetup, backend: &'a Backend) -> Result<Self> {
        Ok(match backend {
            Backend::Mpo { policy } => PointSource::Mpo(policy),
            Backend::Dense => {
                let mut start = StateVector::from_mps(&setup.initial)?;
                if let Some(w) = &setup.window {
                    start.apply_circuit(w)?;
                }
                PointSource::Dense(start)
            }
            Backend::Mps { policy, reference_dt } => {
                if !(*reference_dt > 0.0) {
                    return Err(Error::InvalidArgument(format!("reference_dt must be > 0, got {reference_dt}")));
                }
                let mut start = setup.initial.clone();
                if let Some(w) = &setup.window {
                    start.apply_circuit(w, policy)?;
                }
                PointSource::Mps {
                    policy,
                    reference_dt: *reference_dt,
                    reference: start.clone(),
                    start,
                    t_ref: 0.0,
                }
            }
        })
    }

    fn point(&mut self, setup: &MpfSetup, t: f64) -> Result<(MpfProblem, Vec<f64>)> {
        match self {
            PointSource::Mpo(policy) => assemble_mpo(setup, t, policy).map(|a| (a.problem, a.probe_l)),
            PointSource::Dense(start) => dense_point(setup, start, t),
            PointSource::Mps {
                policy,
                reference_dt,
                start,
                reference,
                t_ref,
            } => {
                let span = t - *t_ref;
                if span > 0.0 {
                    let steps = (span / *reference_dt).ceil() as usize;
                    reference.apply_circuit(&trotter_circuit(&setup.hamiltonian, span, steps, TrotterOrder::Fourth)?, policy)?;
                    *t_ref = t;
                }
                mps_point(setup, start, reference, t, policy)
            }
        }
    }
}

fn all_ks(setup: &MpfSetup) -> Vec<usize> {
    setup.k_list.iter().chain(&setup.probe_ks).copied().collect()
}

fn split_probes(k_all: &[usize], l_all: Vec<f64>, r: usize) -> (Vec<f64>, Vec<f64>) {
    let mut l = l_all;
    let probes = l.split_off(r.min(k_all.len()));
    (l, probes)
}

fn dense_point(setup: &MpfSetup, start: &StateVector, t: f64) -> Result<(MpfProblem, Vec<f64>)> {
    let h = &setup.hamiltonian;
    let evolve = |c| -> Result<StateVector> {
        let mut v = start.clone();
        v.apply_circuit(&c)?;
        Ok(v)
    };
    let ks = all_ks(setup);
    let states = ks
        .iter()
        .map(|&k| evolve(trotter_circuit(h, t, k, setup.order)?))
        .collect::<Result<Vec<_>>>()?;
    let reference = evolve(setup.reference.circuit(h, t)?)?;
    let full = assemble_from_states(
        &ks,
        setup.order.as_int(),
        t,
        &states,
        &reference,
        |a, b| a.overlap(b),
        Provenance::Dense,
    )?;
    restrict(full, setup.k_list.len(), &ks)
}

/// Drop the probe rows/columns from a problem built over `k_list ++ probes`.
fn restrict(full: MpfProblem, r: usize, ks: &[usize]) -> Result<(MpfProblem, Vec<f64>)> {
    let n = ks.len();
    let m = (0..r).flat_map(|i| (0..r).map(move |j| (i, j))).map(|(i, j)| full.m[i * n + j]).collect();
    let (l, probes) = split_probes(ks, full.l, r);
    let problem = MpfProblem::new(ks[..r].to_vec(), full.order, full.t, m, l, full.provenance)?;
    Ok((problem, probes))
}

fn mps_point(
    setup: &MpfSetup,
    start: &MatrixProductState,
    reference: &MatrixProductState,
    t: f64,
    policy: &TruncationPolicy,
) -> Result<(MpfProblem, Vec<f64>)> {
    let ks = all_ks(setup);
    let states = ks
        .iter()
        .map(|&k| {
            let mut psi = start.clone();
            psi.apply_circuit(&trotter_circuit(&setup.hamiltonian, t, k, setup.order)?, policy)?;
            Ok(psi)
        })
        .collect::<Result<Vec<_>>>()?;
    let max_bond_seen = states.iter().chain([reference]).map(|s| s.max_bond()).max().unwrap_or(1);
    let trunc_history = states.iter().chain([reference]).map(|s| s.trunc_history()).fold(0.0, f64::max);
    let full = assemble_from_states(
        &ks,
        setup.order.as_int(),
        t,
        &states,
        reference,
        |a, b| a.overlap(b),
        Provenance::Mps {
            rel_threshold: policy.rel_threshold,
            max_bond: policy.max_bond,
            max_bond_seen,
            trunc_history,
        },
    )?;
    restrict(full, setup.k_list.len(), &ks)
}

/// `exp(-iHt) psi0` along `times` with the fourth-order fine trajectory.
pub fn reference_trajectory(
    setup: &MpfSetup,
    times: &[f64],
    policy: &TruncationPolicy,
    reference_dt: f64,
) -> Result<Vec<MatrixProductState>> {
    let mut psi = setup.initial.clone();
    let mut t_ref = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t < t_ref {
            return Err(Error::InvalidArgument("times must be increasing".into()));
        }
        if t > t_ref {
            let steps = ((t - t_ref) / reference_dt).ceil() as usize;
            psi.apply_circuit(&trotter_circuit(&setup.hamiltonian, t - t_ref, steps, TrotterOrder::Fourth)?, policy)?;
            t_ref = t;
        }
        out.push(psi.clone());
    }
    Ok(out)
}
