//! Multiproduct formulas: overlap data, static and dynamic coefficients,
//! error functionals and the validity tests built on them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, matvec, norm2, solve, sym_eigen};
use crate::mpo::{build_f, mpo_diagnostics, InterleavePlan, MpoDiagnostics};
use crate::mps::MatrixProductState;
use crate::spinchain::{trotter_circuit, HamiltonianSpec, TimedCircuit, TrotterOrder};
use crate::tensor::{TruncationPolicy, C64};

/// Default Tikhonov ridge, relative to the Frobenius norm of `M`.
pub const DEFAULT_RIDGE: f64 = 1e-12;

/// Absolute slack below which error comparisons are treated as ties.
pub const NOISE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "path", rename_all = "snake_case")]
pub enum Provenance {
    Mpo {
        rel_threshold: f64,
        max_bond: Option<usize>,
        max_bond_seen: usize,
        trunc_history: f64,
    },
    Dense,
    Mps {
        rel_threshold: f64,
        max_bond: Option<usize>,
        max_bond_seen: usize,
        trunc_history: f64,
    },
}

impl Provenance {
    /// Largest discarded weight behind the data; zero for exact data.
    pub fn trunc_history(&self) -> f64 {
        match self {
            Provenance::Mpo { trunc_history, .. } | Provenance::Mps { trunc_history, .. } => *trunc_history,
            Provenance::Dense => 0.0,
        }
    }

    /// Largest bond dimension reached; `None` for dense data.
    pub fn max_bond_seen(&self) -> Option<usize> {
        match self {
            Provenance::Mpo { max_bond_seen, .. } | Provenance::Mps { max_bond_seen, .. } => Some(*max_bond_seen),
            Provenance::Dense => None,
        }
    }

    /// Expected size of overlap errors. Operator truncation perturbs a
    /// sandwich at first order in the discarded norm; state truncation
    /// removes an orthogonal remainder, so overlaps move at second order.
    pub fn overlap_noise(&self) -> f64 {
        match self {
            Provenance::Mpo { trunc_history, .. } => trunc_history.sqrt(),
            Provenance::Mps { trunc_history, .. } => *trunc_history,
            Provenance::Dense => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpfProblem {
    pub k_list: Vec<usize>,
    pub order: u32,
    pub t: f64,
    /// Row-major `r x r` Gram matrix.
    pub m: Vec<f64>,
    pub l: Vec<f64>,
    pub provenance: Provenance,
}

impl MpfProblem {
    /// Symmetrizes `m` and sets its diagonal to one.
    pub fn new(k_list: Vec<usize>, order: u32, t: f64, m: Vec<f64>, l: Vec<f64>, provenance: Provenance) -> Result<Self> {
        let r = k_list.len();
        validate_k_list(&k_list)?;
        if m.len() != r * r || l.len() != r {
            return Err(Error::Shape(format!("M has {} entries and L {} for r = {r}", m.len(), l.len())));
        }
        if m.iter().chain(&l).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite overlap data".into()));
        }
        let mut sym = m.clone();
        for i in 0..r {
            for j in 0..r {
                sym[i * r + j] = if i == j { 1.0 } else { 0.5 * (m[i * r + j] + m[j * r + i]) };
            }
        }
        Ok(Self {
            k_list,
            order,
            t,
            m: sym,
            l,
            provenance,
        })
    }

    pub fn rank(&self) -> usize {
        self.k_list.len()
    }

    pub fn m_at(&self, i: usize, j: usize) -> f64 {
        self.m[i * self.rank() + j]
    }

    /// Smallest eigenvalue of `M`.
    pub fn gram_min_eigenvalue(&self) -> Result<f64> {
        Ok(sym_eigen(&self.m, self.rank())?.0[0])
    }

    /// Checks the Gram-matrix invariants with slack `tol` on the entries.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let hi = 1.0 + 10.0 * tol;
        if let Some(x) = self.m.iter().chain(&self.l).find(|&&x| !(-tol..=hi).contains(&x)) {
            return Err(Error::InvalidArgument(format!("overlap {x} outside [0, 1]")));
        }
        let min = self.gram_min_eigenvalue()?;
        if min < -1e-10 - tol {
            return Err(Error::InvalidArgument(format!("Gram matrix has eigenvalue {min}")));
        }
        Ok(())
    }

    /// Squared Frobenius error of the combination `c`: `1 + c^T M c - 2 L^T c`.
    pub fn cost(&self, c: &[f64]) -> f64 {
        1.0 + dot(c, &matvec(&self.m, self.rank(), c)) - 2.0 * dot(&self.l, c)
    }
}

fn validate_k_list(k_list: &[usize]) -> Result<()> {
    if k_list.is_empty() {
        return Err(Error::InvalidArgument("k_list must be nonempty".into()));
    }
    if k_list[0] == 0 || k_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "k_list must be strictly increasing positive integers, got {k_list:?}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub c: Vec<f64>,
    /// Lagrange multiplier of the sum constraint (dynamic coefficients only).
    pub mu: Option<f64>,
    /// Predicted squared Frobenius error (dynamic coefficients only).
    pub error_d: Option<f64>,
    pub one_norm: f64,
}

impl CoefficientSet {
    pub fn from_vec(c: Vec<f64>) -> Self {
        let one_norm = c.iter().map(|x| x.abs()).sum();
        Self {
            c,
            mu: None,
            error_d: None,
            one_norm,
        }
    }
}

/// Which inverse powers the static linear system cancels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaticPowers {
    /// `p, p+2, ...`: symmetric formulas have only even error powers.
    Even,
    /// `p, p+1, ...`.
    Consecutive,
}

pub fn static_coefficients(k_list: &[usize], p: u32) -> Result<CoefficientSet> {
    static_coefficients_with(k_list, p, StaticPowers::Even)
}

/// Solve `sum c = 1`, `sum c_i / k_i^q = 0` for `r - 1` powers `q`.
pub fn static_coefficients_with(k_list: &[usize], p: u32, powers: StaticPowers) -> Result<CoefficientSet> {
    validate_k_list(k_list)?;
    if p == 0 {
        return Err(Error::InvalidArgument("order must be positive".into()));
    }
    let r = k_list.len();
    let step = match powers {
        StaticPowers::Even => 2,
        StaticPowers::Consecutive => 1,
    };
    let mut a = vec![1.0; r * r];
    for row in 1..r {
        let q = (p + step * (row as u32 - 1)) as i32;
        for (col, &k) in k_list.iter().enumerate() {
            a[row * r + col] = (k as f64).powi(-q);
        }
    }
    let mut b = vec![0.0; r];
    b[0] = 1.0;
    let (c, cond) = solve(&a, r, &b)?;
    if !cond.is_finite() || cond > 1e14 || c.iter().any(|x| !x.is_finite()) {
        return Err(Error::IllConditioned {
            condition: cond,
            hint: "Vandermonde system is singular; use fewer or more widely spaced k".into(),
        });
    }
    let residual = norm2(&matvec(&a, r, &c).iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>());
    if residual > 1e-10 {
        return Err(Error::IllConditioned {
            condition: cond,
            hint: format!("residual {residual:.3e} after solve"),
        });
    }
    Ok(CoefficientSet::from_vec(c))
}

/// Minimize `1 + c^T M c - 2 L^T c` subject to `sum c = 1`.
///
/// The constraint is eliminated exactly (`c = 1/r + Z y` with `Z` an
/// orthonormal basis of the sum-zero subspace), so feasibility never depends
/// on the conditioning of `M`.
pub fn dynamic_coefficients(problem: &MpfProblem, ridge: f64) -> Result<CoefficientSet> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidArgument(format!("ridge must be finite and >= 0, got {ridge}")));
    }
    let r = problem.rank();
    // Start from the best single formula: every accepted step below lowers
    // the cost, so the result never loses to min_j E_k.
    let best = (0..r).max_by(|&a, &b| problem.l[a].total_cmp(&problem.l[b])).unwrap_or(0);
    let mut c0 = vec![0.0; r];
    c0[best] = 1.0;
    if r == 1 {
        return Ok(finish(problem, c0));
    }
    let z = sum_zero_basis(r);
    let m = &problem.m;
    let mz: Vec<Vec<f64>> = z.iter().map(|col| matvec(m, r, col)).collect();
    let n = r - 1;
    let mut a = vec![0.0; n * n];
    for x in 0..n {
        for y in 0..n {
            a[x * n + y] = dot(&z[x], &mz[y]);
        }
    }
    let mc0 = matvec(m, r, &c0);
    let g: Vec<f64> = problem.l.iter().zip(&mc0).map(|(l, mc)| l - mc).collect();
    let b: Vec<f64> = z.iter().map(|col| dot(col, &g)).collect();
    let scale = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (vals, vecs) = sym_eigen(&a, n)?;
    let top = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let noise = problem.provenance.overlap_noise() * scale.max(1.0);
    if vals[0] < -(1e-8 * scale.max(1.0) + 10.0 * noise) {
        return Err(Error::IllConditioned {
            condition: top / vals[0].abs(),
            hint: format!(
                "reduced Gram matrix is indefinite (eigenvalue {:.3e}); tighten the truncation or drop a k",
                vals[0]
            ),
        });
    }
    // Damp curvature that the data cannot resolve.
    let shift = (ridge * scale).max(noise);
    let mut y = vec![0.0; n];
    for (val, v) in vals.iter().zip(&vecs) {
        let denom = val.max(0.0) + shift;
        if denom <= 0.0 {
            // exactly flat: every feasible point along it is optimal
            continue;
        }
        let w = dot(v, &b) / denom;
        y.iter_mut().zip(v).for_each(|(yi, vi)| *yi += w * vi);
    }
    let mut c = c0;
    for (col, yi) in z.iter().zip(&y) {
        c.iter_mut().zip(col).for_each(|(ci, zi)| *ci += yi * zi);
    }
    if c.iter().any(|x| !x.is_finite()) {
        return Err(Error::IllConditioned {
            condition: f64::INFINITY,
            hint: "increase the ridge or use fewer k".into(),
        });
    }
    Ok(finish(problem, c))
}

fn finish(problem: &MpfProblem, mut c: Vec<f64>) -> CoefficientSet {
    let r = c.len();
    let drift = (1.0 - c.iter().sum::<f64>()) / r as f64;
    c.iter_mut().for_each(|x| *x += drift);
    let mc = matvec(&problem.m, r, &c);
    let mu = mc.iter().zip(&problem.l).map(|(a, b)| a - b).sum::<f64>() / r as f64;
    let mut set = CoefficientSet::from_vec(c);
    set.error_d = Some(problem.cost(&set.c));
    set.mu = Some(mu);
    set
}

/// Orthonormal basis of `{x : sum x = 0}` (Helmert vectors).
fn sum_zero_basis(r: usize) -> Vec<Vec<f64>> {
    (1..r)
        .map(|k| {
            let norm = ((k * (k + 1)) as f64).sqrt();
            (0..r)
                .map(|i| match i.cmp(&k) {
                    std::cmp::Ordering::Less => 1.0 / norm,
                    std::cmp::Ordering::Equal => -(k as f64) / norm,
                    std::cmp::Ordering::Greater => 0.0,
                })
                .collect()
        })
        .collect()
}

/// `2 - 2 L_j`, clipped at zero.
pub fn trotter_error(problem: &MpfProblem, j: usize) -> f64 {
    error_from_fidelity(problem.l[j])
}

pub fn error_from_fidelity(fidelity: f64) -> f64 {
    (2.0 - 2.0 * fidelity).max(0.0)
}

/// `2 - 2 |<psi|ref>|^2` for normalized states.
pub fn state_truncation_error(psi: &MatrixProductState, reference: &MatrixProductState) -> Result<f64> {
    let ov = psi.overlap(reference)?;
    let f = ov.norm_sqr() / (psi.norm_sqr() * reference.norm_sqr());
    Ok(error_from_fidelity(f))
}

/// The exact problem's quadratic evaluated at coefficients derived elsewhere.
pub fn cross_validated_error(coeffs: &CoefficientSet, exact: &MpfProblem) -> Result<f64> {
    if coeffs.c.len() != exact.rank() {
        return Err(Error::Shape(format!(
            "{} coefficients for a rank-{} problem",
            coeffs.c.len(),
            exact.rank()
        )));
    }
    Ok(exact.cost(&coeffs.c))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub mpf_pass: Vec<bool>,
    pub trotter_pass: Vec<bool>,
    /// Last grid time before the MPF test first fails.
    pub mpf_last_passing: Option<f64>,
    /// Interpolated time where the MPF test stops holding; `None` if it
    /// holds on the whole grid.
    pub mpf_cutoff: Option<f64>,
    /// Interpolated time where the MPF error first exceeds the deep
    /// Trotter error; `None` if it never does on the grid.
    pub trotter_crossover: Option<f64>,
}

impl TestOutcome {
    /// Cutoff or, if the test never failed, the last grid time.
    pub fn mpf_cutoff_or_end(&self, times: &[f64]) -> f64 {
        self.mpf_cutoff.or_else(|| times.last().copied()).unwrap_or(0.0)
    }
}

/// Per-time MPF test `(r+1) E_D <= min_j E_k_j` and Trotter test
/// `E_D <= E_deep`.
pub fn mpf_test(times: &[f64], error_d: &[f64], min_error_k: &[f64], deep_error: &[f64], r: usize) -> Result<TestOutcome> {
    let n = times.len();
    if error_d.len() != n || min_error_k.len() != n || deep_error.len() != n {
        return Err(Error::Shape("error series must match the time grid".into()));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("time grid must be increasing".into()));
    }
    let mpf_margin: Vec<f64> = (0..n)
        .map(|i| min_error_k[i] - (r as f64 + 1.0) * error_d[i] + NOISE_FLOOR)
        .collect();
    let trotter_margin: Vec<f64> = (0..n).map(|i| deep_error[i] - error_d[i] + NOISE_FLOOR).collect();
    let first_fail = |margin: &[f64]| margin.iter().position(|&g| g < 0.0);
    let mpf_fail = first_fail(&mpf_margin);
    Ok(TestOutcome {
        mpf_pass: mpf_margin.iter().map(|&g| g >= 0.0).collect(),
        trotter_pass: trotter_margin.iter().map(|&g| g >= 0.0).collect(),
        mpf_last_passing: match mpf_fail {
            Some(0) => None,
            Some(i) => Some(times[i - 1]),
            None => times.last().copied(),
        },
        mpf_cutoff: mpf_fail.map(|i| crossing(times, &mpf_margin, i)),
        trotter_crossover: first_fail(&trotter_margin).map(|i| crossing(times, &trotter_margin, i)),
    })
}

fn crossing(times: &[f64], margin: &[f64], fail: usize) -> f64 {
    if fail == 0 {
        return times[0];
    }
    let (ta, tb, ga, gb) = (times[fail - 1], times[fail], margin[fail - 1], margin[fail]);
    ta + (tb - ta) * ga / (ga - gb)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub epsilon: f64,
    pub applicable: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub obs_lhs: f64,
    pub obs_rhs: f64,
    pub trotter_error_vec: Vec<f64>,
    pub inv_norm: f64,
}

impl LemmaCheck {
    pub fn coefficient_bound_holds(&self) -> bool {
        !self.applicable || self.lhs <= self.rhs
    }

    pub fn observable_bound_holds(&self) -> bool {
        !self.applicable || self.obs_lhs <= self.obs_rhs
    }
}

/// Evaluate both sides of the perturbation bounds for coefficients
/// computed from `exact` and from `perturbed`. `observables[j]` is the
/// expectation in the `j`-th Trotter state and `obs_star` the exact one.
pub fn lemma_bound_check(exact: &MpfProblem, perturbed: &MpfProblem, observables: &[f64], obs_star: f64) -> Result<LemmaCheck> {
    let r = exact.rank();
    if perturbed.rank() != r || observables.len() != r {
        return Err(Error::Shape("lemma check needs matching ranks".into()));
    }
    let dl: Vec<f64> = exact.l.iter().zip(&perturbed.l).map(|(a, b)| a - b).collect();
    let dm: Vec<f64> = exact.m.iter().zip(&perturbed.m).map(|(a, b)| a - b).collect();
    let eps = norm2(&dl).max(crate::linalg::sym_spectral_norm(&dm, r)?);
    let trotter_error_vec: Vec<f64> = observables.iter().map(|o| obs_star - o).collect();
    let (vals, _) = sym_eigen(&exact.m, r)?;
    let top = vals[r - 1].abs().max(f64::MIN_POSITIVE);
    let singular = vals[0] <= 1e-14 * top;
    let inv_norm = if singular { f64::INFINITY } else { 1.0 / vals[0] };
    let mut check = LemmaCheck {
        epsilon: eps,
        applicable: eps < 1.0 && !singular,
        lhs: 0.0,
        rhs: 0.0,
        obs_lhs: 0.0,
        obs_rhs: 0.0,
        trotter_error_vec,
        inv_norm,
    };
    if !check.applicable {
        return Ok(check);
    }
    let c_star = dynamic_coefficients(exact, 0.0)?.c;
    let c_pert = dynamic_coefficients(perturbed, 0.0)?.c;
    let diff: Vec<f64> = c_star.iter().zip(&c_pert).map(|(a, b)| a - b).collect();
    check.lhs = norm2(&diff);
    check.rhs = eps * (inv_norm + norm2(&c_star)) / (1.0 - eps);
    let combined: f64 = dot(&c_pert, observables);
    check.obs_lhs = (combined - obs_star).abs();
    check.obs_rhs = dot(&c_star, &check.trotter_error_vec).abs() + check.rhs * norm2(&check.trotter_error_vec);
    Ok(check)
}

/// How the exact propagator `exp(-iHt)` is approximated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSpec {
    pub order: TrotterOrder,
    pub k0: usize,
}

impl ReferenceSpec {
    /// `8 max k` second-order steps, or `4 max k` fourth-order ones.
    pub fn default_for(k_list: &[usize], order: TrotterOrder) -> Self {
        let kmax = k_list.iter().copied().max().unwrap_or(1);
        let mult = match order {
            TrotterOrder::Second => 8,
            TrotterOrder::Fourth => 4,
        };
        Self { order, k0: mult * kmax }
    }

    pub fn circuit(&self, h: &HamiltonianSpec, t: f64) -> Result<TimedCircuit> {
        trotter_circuit(h, t, self.k0, self.order)
    }
}

/// Everything needed to assemble MPF problems along a time grid.
#[derive(Clone, Debug)]
pub struct MpfSetup {
    pub hamiltonian: HamiltonianSpec,
    pub initial: MatrixProductState,
    pub k_list: Vec<usize>,
    pub order: TrotterOrder,
    pub reference: ReferenceSpec,
    /// Extra step counts whose Trotter error is reported (e.g. the deep k).
    pub probe_ks: Vec<usize>,
    /// Circuit standing in for `exp(-iH t1)` ahead of every Trotter circuit.
    pub window: Option<TimedCircuit>,
}

#[derive(Clone, Debug)]
pub struct Assembled {
    pub problem: MpfProblem,
    /// Fidelities `L` for each probe k.
    pub probe_l: Vec<f64>,
    /// Diagnostics per built F, labelled by `(i, j)` with `"ex"` for the reference.
    pub diagnostics: Vec<(String, String, MpoDiagnostics)>,
}

/// Build every `F_ij` (i < j) and `F_ex,j` with the MPO path.
pub fn assemble_mpo(setup: &MpfSetup, t: f64, policy: &TruncationPolicy) -> Result<Assembled> {
    validate_k_list(&setup.k_list)?;
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
    }
    let h = &setup.hamiltonian;
    let r = setup.k_list.len();
    let all_ks: Vec<usize> = setup.k_list.iter().chain(&setup.probe_ks).copied().collect();
    let circuits = all_ks
        .iter()
        .map(|&k| trotter_circuit(h, t, k, setup.order))
        .collect::<Result<Vec<_>>>()?;
    let reference = setup.reference.circuit(h, t)?;
    // (label_i, label_j, left, right)
    let mut jobs: Vec<(String, String, &TimedCircuit, &TimedCircuit)> = Vec::new();
    for i in 0..r {
        for j in i + 1..r {
            jobs.push((all_ks[i].to_string(), all_ks[j].to_string(), &circuits[i], &circuits[j]));
        }
    }
    for (j, c) in circuits.iter().enumerate() {
        jobs.push(("ex".into(), all_ks[j].to_string(), &reference, c));
    }
    let results: Vec<Result<(C64, MpoDiagnostics)>> = jobs
        .par_iter()
        .map(|(li, lj, left, right)| {
            let mut plan = InterleavePlan::new((*left).clone(), (*right).clone());
            if let Some(w) = &setup.window {
                plan = plan.with_window(w.clone(), w.clone());
            }
            let run = || -> Result<(C64, MpoDiagnostics)> {
                let f = build_f(&plan, policy)?;
                Ok((f.sandwich(&setup.initial)?, mpo_diagnostics(&f)))
            };
            run().map_err(|e| Error::Pair {
                i: li.clone(),
                j: lj.clone(),
                source: Box::new(e),
            })
        })
        .collect();
    let mut m = vec![1.0; r * r];
    let mut l_all = vec![0.0; all_ks.len()];
    let mut diagnostics = Vec::with_capacity(jobs.len());
    let mut pair = 0;
    for i in 0..r {
        for j in i + 1..r {
            let (s, d) = results[pair].clone()?;
            m[i * r + j] = s.norm_sqr();
            m[j * r + i] = s.norm_sqr();
            diagnostics.push((jobs[pair].0.clone(), jobs[pair].1.clone(), d));
            pair += 1;
        }
    }
    for l in l_all.iter_mut() {
        let (s, d) = results[pair].clone()?;
        *l = s.norm_sqr();
        diagnostics.push((jobs[pair].0.clone(), jobs[pair].1.clone(), d));
        pair += 1;
    }
    let max_bond_seen = diagnostics.iter().map(|d| d.2.max_bond).max().unwrap_or(1);
    let trunc_history = diagnostics.iter().map(|d| d.2.trunc_history).fold(0.0, f64::max);
    let probe_l = l_all.split_off(r);
    let problem = MpfProblem::new(
        setup.k_list.clone(),
        setup.order.as_int(),
        t,
        m,
        l_all,
        Provenance::Mpo {
            rel_threshold: policy.rel_threshold,
            max_bond: policy.max_bond,
            max_bond_seen,
            trunc_history,
        },
    )?;
    Ok(Assembled {
        problem,
        probe_l,
        diagnostics,
    })
}

/// Problem from explicitly stored states: `M_ij = |<psi_i|psi_j>|^2`,
/// `L_j = |<ref|psi_j>|^2`.
pub fn assemble_from_states<S>(
    k_list: &[usize],
    order: u32,
    t: f64,
    states: &[S],
    reference: &S,
    overlap: impl Fn(&S, &S) -> Result<C64>,
    provenance: Provenance,
) -> Result<MpfProblem> {
    let r = k_list.len();
    if states.len() != r {
        return Err(Error::Shape(format!("{} states for {r} step counts", states.len())));
    }
    let fid = |a: &S, b: &S| -> Result<f64> {
        let ab = overlap(a, b)?.norm_sqr();
        let aa = overlap(a, a)?.re;
        let bb = overlap(b, b)?.re;
        Ok(ab / (aa * bb))
    };
    let mut m = vec![1.0; r * r];
    for i in 0..r {
        for j in i + 1..r {
            let v = fid(&states[i], &states[j])?;
            m[i * r + j] = v;
            m[j * r + i] = v;
        }
    }
    let l = states.iter().map(|s| fid(reference, s)).collect::<Result<Vec<_>>>()?;
    MpfProblem::new(k_list.to_vec(), order, t, m, l, provenance)
}
