//! Compressed initial window: a brickwork ansatz with the layer structure of
//! second-order Trotter steps, fitted to a reference state by maximizing the
//! overlap `|<target|V(theta)|psi0>|^2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mpf::ReferenceSpec;
use crate::mpo::InterleavePlan;
use crate::mps::MatrixProductState;
use crate::spinchain::{trotter_circuit, Gate2, GateLayer, HamiltonianSpec, Parity, TimedCircuit, TimedStep, TrotterOrder};
use crate::tensor::{TruncationPolicy, C64, ZERO};

/// Angles per block: weight of `XX + YY` and of `ZZ`.
pub const ANGLES_PER_BLOCK: usize = 2;

/// `exp(-i (a (XX + YY) + b ZZ))`.
pub fn block_gate(a: f64, b: f64) -> Gate2 {
    let mut g = [ZERO; 16];
    let outer = C64::from_polar(1.0, -b);
    let inner = C64::from_polar(1.0, b);
    let (c, s) = ((2.0 * a).cos(), (2.0 * a).sin());
    g[0] = outer;
    g[15] = outer;
    g[5] = inner * c;
    g[10] = inner * c;
    g[6] = inner * C64::new(0.0, -s);
    g[9] = inner * C64::new(0.0, -s);
    Gate2(g)
}

#[derive(Clone, Debug, PartialEq)]
struct LayerSlots {
    parity: Parity,
    /// Fraction of a step's `dt` this layer represents (1/2 or 1).
    weight: f64,
    sites: Vec<usize>,
}

/// Parameterized brickwork; block `b` uses `theta[2b]` and `theta[2b + 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamCircuit {
    pub n_sites: usize,
    pub k_layers: usize,
    layers: Vec<LayerSlots>,
}

impl ParamCircuit {
    pub fn block_count(&self) -> usize {
        self.layers.iter().map(|l| l.sites.len()).sum::<usize>() * self.k_layers
    }

    pub fn param_count(&self) -> usize {
        self.block_count() * ANGLES_PER_BLOCK
    }

    /// The circuit `V(theta)`; each step is tagged with `t1 / k_layers`.
    pub fn circuit(&self, theta: &[f64], t1: f64) -> Result<TimedCircuit> {
        if theta.len() != self.param_count() {
            return Err(Error::Shape(format!("{} angles for {} parameters", theta.len(), self.param_count())));
        }
        let mut idx = 0;
        let mut steps = Vec::with_capacity(self.k_layers);
        for _ in 0..self.k_layers {
            let layers = self
                .layers
                .iter()
                .map(|slot| GateLayer {
                    parity: slot.parity,
                    gates: slot
                        .sites
                        .iter()
                        .map(|&s| {
                            let g = block_gate(theta[idx], theta[idx + 1]);
                            idx += ANGLES_PER_BLOCK;
                            (s, g)
                        })
                        .collect(),
                })
                .collect();
            steps.push(TimedStep {
                layers,
                dt: t1 / self.k_layers as f64,
            });
        }
        Ok(TimedCircuit::from_steps(self.n_sites, steps))
    }
}

pub fn build_ansatz(h: &HamiltonianSpec, k_layers: usize) -> Result<ParamCircuit> {
    if k_layers == 0 {
        return Err(Error::InvalidArgument("k_layers must be >= 1".into()));
    }
    h.validate()?;
    let sites = |p: Parity| (p.first_site()..h.n_sites - 1).step_by(2).collect::<Vec<_>>();
    let layers = [(Parity::Odd, 0.5), (Parity::Even, 1.0), (Parity::Odd, 0.5)]
        .into_iter()
        .map(|(parity, weight)| LayerSlots {
            parity,
            weight,
            sites: sites(parity),
        })
        .filter(|l| !l.sites.is_empty())
        .collect();
    Ok(ParamCircuit {
        n_sites: h.n_sites,
        k_layers,
        layers,
    })
}

/// Angles reproducing `k_layers` second-order Trotter steps over `t1`.
pub fn smart_init(ansatz: &ParamCircuit, h: &HamiltonianSpec, t1: f64) -> Result<Vec<f64>> {
    if ansatz.n_sites != h.n_sites {
        return Err(Error::Shape(format!(
            "ansatz on {} sites, Hamiltonian on {}",
            ansatz.n_sites, h.n_sites
        )));
    }
    if !t1.is_finite() || t1 < 0.0 {
        return Err(Error::InvalidArgument(format!("t1 must be finite and >= 0, got {t1}")));
    }
    let dt = t1 / ansatz.k_layers as f64;
    let mut theta = Vec::with_capacity(ansatz.param_count());
    for _ in 0..ansatz.k_layers {
        for slot in &ansatz.layers {
            for &s in &slot.sites {
                // h_bond = -(J/4)(XX + YY) - (Delta/4) ZZ
                let term = h.bonds[s];
                theta.push(-term.coupling * slot.weight * dt / 4.0);
                theta.push(-term.anisotropy * slot.weight * dt / 4.0);
            }
        }
    }
    Ok(theta)
}

/// `1 - |<target|V(theta)|psi0>|^2` for normalized states.
pub fn cost(
    theta: &[f64],
    ansatz: &ParamCircuit,
    target: &MatrixProductState,
    psi0: &MatrixProductState,
    policy: &TruncationPolicy,
) -> Result<f64> {
    let mut psi = psi0.clone();
    psi.apply_circuit(&ansatz.circuit(theta, 0.0)?, policy)?;
    let f = target.overlap(&psi)?.norm_sqr() / (target.norm_sqr() * psi.norm_sqr());
    Ok((1.0 - f).clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub fd_step: f64,
    /// Iterations of negligible relative improvement that count as a stall.
    pub stall_iters: usize,
    pub stall_rel: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 200,
            fd_step: 1e-5,
            stall_iters: 5,
            stall_rel: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIters,
    Stalled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub theta: Vec<f64>,
    /// Cost of every accepted iterate, starting with the initial one.
    pub cost_trace: Vec<f64>,
    pub stop: StopReason,
}

impl OptimizeResult {
    pub fn final_cost(&self) -> f64 {
        *self.cost_trace.last().unwrap_or(&1.0)
    }
}

/// Gradient descent with central finite differences and a backtracking
/// (Armijo) line search whose trial step is the Barzilai-Borwein length.
pub fn optimize(
    ansatz: &ParamCircuit,
    theta0: &[f64],
    target: &MatrixProductState,
    psi0: &MatrixProductState,
    policy: &TruncationPolicy,
    opts: &OptimizeOptions,
) -> Result<OptimizeResult> {
    if !(opts.tol > 0.0) || !(opts.fd_step > 0.0) {
        return Err(Error::InvalidArgument("tol and fd_step must be positive".into()));
    }
    let f = |th: &[f64]| cost(th, ansatz, target, psi0, policy);
    let mut theta = theta0.to_vec();
    let mut current = f(&theta)?;
    let mut trace = vec![current];
    let mut step = 1.0;
    let mut flat = 0usize;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    for _ in 0..opts.max_iters {
        if current <= opts.tol {
            return Ok(OptimizeResult { theta, cost_trace: trace, stop: StopReason::Converged });
        }
        let grad = (0..theta.len())
            .into_par_iter()
            .map(|p| {
                let mut plus = theta.clone();
                let mut minus = theta.clone();
                plus[p] += opts.fd_step;
                minus[p] -= opts.fd_step;
                Ok((f(&plus)? - f(&minus)?) / (2.0 * opts.fd_step))
            })
            .collect::<Result<Vec<f64>>>()?;
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2 == 0.0 {
            return Ok(OptimizeResult { theta, cost_trace: trace, stop: StopReason::Stalled });
        }
        let mut alpha = step * 2.0;
        if let Some((x_old, g_old)) = &prev {
            let (mut ss, mut sy) = (0.0, 0.0);
            for p in 0..theta.len() {
                let (ds, dy) = (theta[p] - x_old[p], grad[p] - g_old[p]);
                ss += ds * ds;
                sy += ds * dy;
            }
            if sy > 0.0 {
                alpha = ss / sy;
            }
        }
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - alpha * g).collect();
            let c = f(&trial)?;
            if c <= current - 1e-4 * alpha * gnorm2 {
                accepted = Some((trial, c));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, c)) = accepted else {
            return Ok(OptimizeResult { theta, cost_trace: trace, stop: StopReason::Stalled });
        };
        step = alpha;
        prev = Some((theta.clone(), grad));
        let rel = (current - c) / current.max(f64::MIN_POSITIVE);
        theta = trial;
        current = c;
        trace.push(c);
        flat = if rel < opts.stall_rel { flat + 1 } else { 0 };
        if flat >= opts.stall_iters {
            return Ok(OptimizeResult { theta, cost_trace: trace, stop: StopReason::Stalled });
        }
    }
    let stop = if current <= opts.tol { StopReason::Converged } else { StopReason::MaxIters };
    Ok(OptimizeResult { theta, cost_trace: trace, stop })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AqcWindow {
    pub t1: f64,
    pub t2: f64,
    pub theta: Vec<f64>,
    pub suffix_ks: Vec<usize>,
}

impl AqcWindow {
    pub fn validate(&self) -> Result<()> {
        if !(self.t1 >= 0.0 && self.t2 >= 0.0) {
            return Err(Error::InvalidArgument(format!("window times must be >= 0, got t1={} t2={}", self.t1, self.t2)));
        }
        Ok(())
    }
}

/// One side of a windowed F: `k` Trotter steps over `t2`, or the reference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WindowSide {
    Steps(usize),
    Exact,
}

/// Fine-Trotter surrogate for `exp(-iH t1)`.
pub fn window_circuit(h: &HamiltonianSpec, t1: f64, reference: &ReferenceSpec) -> Result<TimedCircuit> {
    reference.circuit(h, t1)
}

/// Plan for `exp(iH t1) A^dagger B exp(-iH t1)` where `A`, `B` evolve over
/// `t2` (the exact side also spanning `t2`).
pub fn aqc_interleave_plan(
    window: &AqcWindow,
    h: &HamiltonianSpec,
    order: TrotterOrder,
    left: WindowSide,
    right: WindowSide,
    reference: &ReferenceSpec,
) -> Result<InterleavePlan> {
    window.validate()?;
    let side = |s: WindowSide| match s {
        WindowSide::Steps(k) => trotter_circuit(h, window.t2, k, order),
        WindowSide::Exact => reference.circuit(h, window.t2),
    };
    let plan = InterleavePlan::new(side(left)?, side(right)?);
    if window.t1 == 0.0 {
        return Ok(plan);
    }
    let w = window_circuit(h, window.t1, reference)?;
    Ok(plan.with_window(w.clone(), w))
}
