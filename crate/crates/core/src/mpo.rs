//! Matrix product operators for interleaved forward/backward evolutions.
//!
//! An operator is stored as a chain with physical dimension 4, the local
//! index being `out * 2 + in`.

use rayon::prelude::*;

use crate::chain::{Chain, DEFAULT_MEMORY_CAP};
use crate::error::{Error, Result};
use crate::mps::MatrixProductState;
use crate::spinchain::{Gate2, TimedCircuit, TimedStep};
use crate::tensor::{DenseTensor, TruncationPolicy, TruncationReport, C64, ONE, ZERO};

#[derive(Clone, Debug)]
pub struct MatrixProductOperator {
    pub(crate) chain: Chain,
}

/// `F = A^dagger B` for the time-ordered composites
/// `A = prefix then left` and `B = suffix then right`.
#[derive(Clone, Debug)]
pub struct InterleavePlan {
    /// Applied as its conjugate transpose (the `i` side).
    pub left: TimedCircuit,
    /// The `j` side.
    pub right: TimedCircuit,
    pub prefix: Option<TimedCircuit>,
    pub suffix: Option<TimedCircuit>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MpoDiagnostics {
    pub max_bond: usize,
    pub trunc_history: f64,
    pub unitarity_deficit: f64,
}

pub fn identity_mpo(n_sites: usize) -> Result<MatrixProductOperator> {
    if n_sites < 2 {
        return Err(Error::InvalidArgument(format!("identity MPO needs at least 2 sites, got {n_sites}")));
    }
    let v = vec![ONE, ZERO, ZERO, ONE];
    Ok(MatrixProductOperator {
        chain: Chain::product(&vec![v; n_sites], 4)?,
    })
}

/// Local superoperator for `F -> F G` on two sites.
fn right_action(g: &Gate2) -> Vec<C64> {
    superop(|o1, i1, o2, i2, p1, q1, p2, q2| {
        // input (p1, q1, p2, q2) = (out, in) pairs of F; F G keeps outs, contracts ins with G rows
        if o1 == p1 && o2 == p2 {
            g.0[4 * (2 * q1 + q2) + 2 * i1 + i2]
        } else {
            ZERO
        }
    })
}

/// Local superoperator for `F -> G^dagger F` on two sites.
fn left_adjoint_action(g: &Gate2) -> Vec<C64> {
    superop(|o1, i1, o2, i2, p1, q1, p2, q2| {
        if i1 == q1 && i2 == q2 {
            g.0[4 * (2 * p1 + p2) + 2 * o1 + o2].conj()
        } else {
            ZERO
        }
    })
}

/// 16x16 matrix on the two-site index `(o1 i1)(o2 i2)`.
fn superop(f: impl Fn(usize, usize, usize, usize, usize, usize, usize, usize) -> C64) -> Vec<C64> {
    let mut m = vec![ZERO; 256];
    for row in 0..16 {
        let (o1, i1, o2, i2) = (row >> 3 & 1, row >> 2 & 1, row >> 1 & 1, row & 1);
        for col in 0..16 {
            let (p1, q1, p2, q2) = (col >> 3 & 1, col >> 2 & 1, col >> 1 & 1, col & 1);
            m[row * 16 + col] = f(o1, i1, o2, i2, p1, q1, p2, q2);
        }
    }
    m
}

impl MatrixProductOperator {
    pub fn n_sites(&self) -> usize {
        self.chain.len()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.chain.bond_dims()
    }

    pub fn max_bond(&self) -> usize {
        self.chain.max_bond()
    }

    pub fn trunc_history(&self) -> f64 {
        self.chain.truncation.cumulative_weight
    }

    pub fn truncation(&self) -> &TruncationReport {
        &self.chain.truncation
    }

    pub fn entries(&self) -> usize {
        self.chain.entries()
    }

    /// `F <- F S`, where `S` is the step (first layer applied first in time).
    pub fn absorb_right(&mut self, step: &TimedStep, policy: &TruncationPolicy) -> Result<()> {
        for layer in step.layers.iter().rev() {
            let ops: Vec<(usize, Vec<C64>)> = layer.gates.iter().map(|(s, g)| (*s, right_action(g))).collect();
            let refs: Vec<(usize, &[C64])> = ops.iter().map(|(s, o)| (*s, &o[..])).collect();
            self.chain.apply_layer(&refs, policy)?;
        }
        Ok(())
    }

    /// `F <- S^dagger F`.
    pub fn absorb_left_adjoint(&mut self, step: &TimedStep, policy: &TruncationPolicy) -> Result<()> {
        for layer in step.layers.iter().rev() {
            let ops: Vec<(usize, Vec<C64>)> = layer.gates.iter().map(|(s, g)| (*s, left_adjoint_action(g))).collect();
            let refs: Vec<(usize, &[C64])> = ops.iter().map(|(s, o)| (*s, &o[..])).collect();
            self.chain.apply_layer(&refs, policy)?;
        }
        Ok(())
    }

    /// `<psi0|F|psi0>` including all scale factors.
    pub fn sandwich(&self, psi0: &MatrixProductState) -> Result<C64> {
        self.sandwich_between(psi0, psi0)
    }

    /// `<bra|F|ket>`.
    pub fn sandwich_between(&self, bra: &MatrixProductState, ket: &MatrixProductState) -> Result<C64> {
        let n = self.n_sites();
        if bra.n_sites() != n || ket.n_sites() != n {
            return Err(Error::Shape(format!(
                "sandwich of a {n}-site operator with {}- and {}-site states",
                bra.n_sites(),
                ket.n_sites()
            )));
        }
        // env indices (a, f, b): bra bond, operator bond, ket bond
        let mut env = vec![ONE];
        let (mut ea, mut ef, mut eb) = (1usize, 1usize, 1usize);
        for s in 0..n {
            let a = bra.site_tensor(s);
            let f = &self.chain.sites[s];
            let b = ket.site_tensor(s);
            let (ar, fr, br) = (a.shape()[2], f.shape()[2], b.shape()[2]);
            let (ad, fd, bd) = (a.data(), f.data(), b.data());
            // t1[a, f, i, b'] = sum_b env[a, f, b] B[b, i, b']
            let mut t1 = vec![ZERO; ea * ef * 2 * br];
            for x in 0..ea * ef {
                for b0 in 0..eb {
                    let e = env[x * eb + b0];
                    if e == ZERO {
                        continue;
                    }
                    for i in 0..2 {
                        for b1 in 0..br {
                            t1[(x * 2 + i) * br + b1] += e * bd[(b0 * 2 + i) * br + b1];
                        }
                    }
                }
            }
            // t2[a, o, f', b'] = sum_{f, i} t1[a, f, i, b'] F[f, o, i, f']
            let mut t2 = vec![ZERO; ea * 2 * fr * br];
            for a0 in 0..ea {
                for f0 in 0..ef {
                    for i in 0..2 {
                        for o in 0..2 {
                            for f1 in 0..fr {
                                let w = fd[(f0 * 4 + o * 2 + i) * fr + f1];
                                if w == ZERO {
                                    continue;
                                }
                                let src = ((a0 * ef + f0) * 2 + i) * br;
                                let dst = ((a0 * 2 + o) * fr + f1) * br;
                                for b1 in 0..br {
                                    t2[dst + b1] += w * t1[src + b1];
                                }
                            }
                        }
                    }
                }
            }
            // env'[a', f', b'] = sum_{a, o} conj(A[a, o, a']) t2[a, o, f', b']
            let mut next = vec![ZERO; ar * fr * br];
            for a0 in 0..ea {
                for o in 0..2 {
                    for a1 in 0..ar {
                        let w = ad[(a0 * 2 + o) * ar + a1].conj();
                        if w == ZERO {
                            continue;
                        }
                        let src = (a0 * 2 + o) * fr * br;
                        let dst = a1 * fr * br;
                        for x in 0..fr * br {
                            next[dst + x] += w * t2[src + x];
                        }
                    }
                }
            }
            env = next;
            (ea, ef, eb) = (ar, fr, br);
        }
        let scale = (self.chain.log_scale + bra.log_norm() + ket.log_norm()).exp();
        Ok(env[0] * scale)
    }

    /// Exact product `F |psi>`, re-canonicalized but not compressed.
    pub fn apply_to(&self, psi: &MatrixProductState) -> Result<MatrixProductState> {
        let n = self.n_sites();
        if psi.n_sites() != n {
            return Err(Error::Shape(format!("{n}-site operator applied to a {}-site state", psi.n_sites())));
        }
        let sites = (0..n)
            .map(|s| {
                let f = &self.chain.sites[s];
                let m = psi.site_tensor(s);
                let (fl, fr, ml, mr) = (f.shape()[0], f.shape()[2], m.shape()[0], m.shape()[2]);
                DenseTensor::from_fn(vec![fl * ml, 2, fr * mr], |idx| {
                    let (f0, m0) = (idx[0] / ml, idx[0] % ml);
                    let (f1, m1) = (idx[2] / mr, idx[2] % mr);
                    let o = idx[1];
                    (0..2).map(|i| f.get(&[f0, o * 2 + i, f1]) * m.get(&[m0, i, m1])).sum()
                })
            })
            .collect();
        let mut chain = Chain::from_sites(sites, 2)?;
        chain.log_scale += self.chain.log_scale + psi.log_norm();
        Ok(MatrixProductState::from_chain(chain))
    }
}

pub fn mpo_diagnostics(f: &MatrixProductOperator) -> MpoDiagnostics {
    let n = f.n_sites() as f64;
    let center = f.chain.sites[f.chain.center].norm_sqr();
    let ratio = (2.0 * f.chain.log_scale - n * std::f64::consts::LN_2).exp() * center;
    MpoDiagnostics {
        max_bond: f.max_bond(),
        trunc_history: f.trunc_history(),
        unitarity_deficit: (ratio - 1.0).abs(),
    }
}

impl InterleavePlan {
    pub fn new(left: TimedCircuit, right: TimedCircuit) -> Self {
        Self {
            left,
            right,
            prefix: None,
            suffix: None,
        }
    }

    pub fn with_window(mut self, prefix: TimedCircuit, suffix: TimedCircuit) -> Self {
        self.prefix = Some(prefix);
        self.suffix = Some(suffix);
        self
    }

    pub fn n_sites(&self) -> usize {
        self.left.n_sites
    }

    pub fn validate(&self) -> Result<()> {
        self.left.validate()?;
        self.right.validate()?;
        if self.left.n_sites != self.right.n_sites {
            return Err(Error::Shape(format!(
                "left circuit on {} sites, right on {}",
                self.left.n_sites, self.right.n_sites
            )));
        }
        if !times_match(self.left.total_time, self.right.total_time) {
            return Err(Error::TimeMismatch {
                left: self.left.total_time,
                right: self.right.total_time,
            });
        }
        match (&self.prefix, &self.suffix) {
            (None, None) => Ok(()),
            (Some(p), Some(s)) => {
                p.validate()?;
                s.validate()?;
                if p.n_sites != self.left.n_sites || s.n_sites != self.left.n_sites {
                    return Err(Error::Shape("window circuits have the wrong site count".into()));
                }
                if !times_match(p.total_time, s.total_time) {
                    return Err(Error::TimeMismatch {
                        left: p.total_time,
                        right: s.total_time,
                    });
                }
                Ok(())
            }
            _ => Err(Error::InvalidArgument("prefix and suffix must be given together".into())),
        }
    }

    /// Time-ordered composites `(A, B)` with `F = A^dagger B`.
    pub fn composites(&self) -> Result<(TimedCircuit, TimedCircuit)> {
        match (&self.prefix, &self.suffix) {
            (Some(p), Some(s)) => Ok((p.clone().then(self.left.clone())?, s.clone().then(self.right.clone())?)),
            _ => Ok((self.left.clone(), self.right.clone())),
        }
    }
}

fn times_match(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Build `F` by interleaving the two sides from the latest step backwards:
/// a right-side step is absorbed whenever its accumulated time does not
/// exceed the left side's, otherwise a left-side adjoint step.
pub fn build_f(plan: &InterleavePlan, policy: &TruncationPolicy) -> Result<MatrixProductOperator> {
    build_f_capped(plan, policy, None)
}

pub fn build_f_capped(
    plan: &InterleavePlan,
    policy: &TruncationPolicy,
    memory_cap: Option<usize>,
) -> Result<MatrixProductOperator> {
    plan.validate()?;
    policy.validate()?;
    let n = plan.n_sites();
    let cap = memory_cap.unwrap_or_else(|| match policy.max_bond {
        Some(chi) => 4 * n * chi * chi,
        None => DEFAULT_MEMORY_CAP,
    });
    let (a, b) = plan.composites()?;
    let total = a.total_time;
    let tol = 1e-12 * total.max(1.0);
    let mut f = identity_mpo(n)?;
    let (mut ia, mut ib) = (a.steps.len(), b.steps.len());
    let (mut ta, mut tb) = (0.0, 0.0);
    let mut absorbed = 0usize;
    while ia > 0 || ib > 0 {
        let take_right = ib > 0 && (ia == 0 || tb <= ta + tol);
        if take_right {
            ib -= 1;
            f.absorb_right(&b.steps[ib], policy)?;
            tb += b.steps[ib].dt;
        } else {
            ia -= 1;
            f.absorb_left_adjoint(&a.steps[ia], policy)?;
            ta += a.steps[ia].dt;
        }
        let entries = f.entries();
        if entries > cap {
            return Err(Error::MemoryCap {
                step: absorbed,
                time: ta.max(tb),
                entries,
                cap,
            });
        }
        absorbed += 1;
    }
    Ok(f)
}

/// `<psi0|F|psi0>` for many plans, in parallel.
pub fn sandwich_many(
    plans: &[InterleavePlan],
    psi0: &MatrixProductState,
    policy: &TruncationPolicy,
) -> Vec<Result<(C64, MpoDiagnostics)>> {
    plans
        .par_iter()
        .map(|p| {
            let f = build_f(p, policy)?;
            Ok((f.sandwich(psi0)?, mpo_diagnostics(&f)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{sandwich_dense, StateVector};
    use crate::mps::neel_bits;
    use crate::spinchain::{build_hamiltonian, trotter_circuit, ModelKind, TrotterOrder};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn heis(n: usize) -> crate::spinchain::HamiltonianSpec {
        build_hamiltonian(ModelKind::UniformHeisenberg, n, 0).unwrap()
    }

    #[test]
    fn identity_properties() {
        let id = identity_mpo(6).unwrap();
        assert_eq!(id.bond_dims(), vec![1; 5]);
        let psi = MatrixProductState::neel(6).unwrap();
        assert!((id.sandwich(&psi).unwrap() - ONE).norm() < 1e-14);
        let d = mpo_diagnostics(&id);
        assert_eq!(d.max_bond, 1);
        assert!(d.unitarity_deficit < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = MatrixProductState::random(6, 3, &mut rng).unwrap();
        let out = id.apply_to(&r).unwrap();
        assert!(1.0 - out.overlap(&r).unwrap().norm() < 1e-12);
        assert!(identity_mpo(1).is_err());
    }

    #[test]
    fn equal_sides_cancel() {
        let h = heis(8);
        let c = trotter_circuit(&h, 1.3, 3, TrotterOrder::Second).unwrap();
        let f = build_f(&InterleavePlan::new(c.clone(), c), &TruncationPolicy::for_operators(0.0, None)).unwrap();
        let psi = MatrixProductState::neel(8).unwrap();
        assert!((f.sandwich(&psi).unwrap().norm() - 1.0).abs() < 1e-10);
        assert_eq!(f.max_bond(), 1);
    }

    #[test]
    fn zero_time_is_identity() {
        let h = heis(6);
        let c = trotter_circuit(&h, 0.0, 2, TrotterOrder::Second).unwrap();
        let d = trotter_circuit(&h, 0.0, 3, TrotterOrder::Second).unwrap();
        let f = build_f(&InterleavePlan::new(c, d), &TruncationPolicy::for_operators(0.0, None)).unwrap();
        assert!((f.sandwich(&MatrixProductState::neel(6).unwrap()).unwrap() - ONE).norm() < 1e-12);
    }

    #[test]
    fn matches_dense_oracle() {
        let h = heis(8);
        let ci = trotter_circuit(&h, 1.0, 4, TrotterOrder::Second).unwrap();
        let cj = trotter_circuit(&h, 1.0, 2, TrotterOrder::Second).unwrap();
        let plan = InterleavePlan::new(ci.clone(), cj.clone());
        let f = build_f(&plan, &TruncationPolicy::for_operators(1e-14, None)).unwrap();
        let psi = MatrixProductState::neel(8).unwrap();
        let v = StateVector::product_state(&neel_bits(8)).unwrap();
        let dense = sandwich_dense(&v, &ci, &cj).unwrap();
        let got = f.sandwich(&psi).unwrap();
        assert!((got.norm_sqr() - dense.norm_sqr()).abs() < 1e-8, "{got} vs {dense}");
        assert!((got - dense).norm() < 1e-8);
        assert!(mpo_diagnostics(&f).unitarity_deficit < 1e-10);
    }

    #[test]
    fn window_matches_dense_oracle() {
        let h = build_hamiltonian(ModelKind::DisorderedXxz, 8, 4).unwrap();
        let pre = trotter_circuit(&h, 0.5, 8, TrotterOrder::Fourth).unwrap();
        let ci = trotter_circuit(&h, 0.5, 2, TrotterOrder::Second).unwrap();
        let cj = trotter_circuit(&h, 0.5, 1, TrotterOrder::Second).unwrap();
        let plan = InterleavePlan::new(ci.clone(), cj.clone()).with_window(pre.clone(), pre.clone());
        let f = build_f(&plan, &TruncationPolicy::for_operators(1e-14, None)).unwrap();
        let psi = MatrixProductState::neel(8).unwrap();
        let v = StateVector::product_state(&neel_bits(8)).unwrap();
        let a = pre.clone().then(ci).unwrap();
        let b = pre.then(cj).unwrap();
        let dense = sandwich_dense(&v, &a, &b).unwrap();
        assert!((f.sandwich(&psi).unwrap() - dense).norm() < 1e-8);
    }

    #[test]
    fn apply_to_matches_dense() {
        let h = heis(6);
        let ci = trotter_circuit(&h, 0.7, 2, TrotterOrder::Second).unwrap();
        let cj = trotter_circuit(&h, 0.7, 3, TrotterOrder::Second).unwrap();
        let f = build_f(&InterleavePlan::new(ci.clone(), cj.clone()), &TruncationPolicy::for_operators(0.0, None)).unwrap();
        let psi = MatrixProductState::neel(6).unwrap();
        let out = StateVector::from_mps(&f.apply_to(&psi).unwrap()).unwrap();
        let mut v = StateVector::product_state("101010").unwrap();
        v.apply_circuit(&cj).unwrap();
        v.apply_circuit(&ci.inverse()).unwrap();
        assert!((out.overlap(&v).unwrap().norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mismatched_times_rejected() {
        let h = heis(4);
        let a = trotter_circuit(&h, 1.0, 2, TrotterOrder::Second).unwrap();
        let b = trotter_circuit(&h, 1.1, 2, TrotterOrder::Second).unwrap();
        let err = build_f(&InterleavePlan::new(a.clone(), b.clone()), &TruncationPolicy::exact()).unwrap_err();
        assert!(matches!(err, Error::TimeMismatch { .. }));
        let mut half = InterleavePlan::new(a.clone(), a);
        half.prefix = Some(b);
        assert!(half.validate().is_err());
    }

    #[test]
    fn builds_are_deterministic() {
        let h = build_hamiltonian(ModelKind::DisorderedXxz, 10, 9).unwrap();
        let a = trotter_circuit(&h, 2.0, 16, TrotterOrder::Second).unwrap();
        let b = trotter_circuit(&h, 2.0, 3, TrotterOrder::Second).unwrap();
        let plan = InterleavePlan::new(a, b);
        let pol = TruncationPolicy::for_operators(1e-6, Some(16));
        let f1 = build_f(&plan, &pol).unwrap();
        let f2 = build_f(&plan, &pol).unwrap();
        assert_eq!(f1.trunc_history().to_bits(), f2.trunc_history().to_bits());
        let psi = MatrixProductState::neel(10).unwrap();
        assert!(f1.sandwich(&psi).unwrap().norm() <= 1.0 + 10.0 * f1.trunc_history() + 1e-12);
    }

    #[test]
    fn memory_cap_reported() {
        let h = heis(10);
        let a = trotter_circuit(&h, 3.0, 24, TrotterOrder::Second).unwrap();
        let b = trotter_circuit(&h, 3.0, 2, TrotterOrder::Second).unwrap();
        let err = build_f_capped(&InterleavePlan::new(a, b), &TruncationPolicy::for_operators(0.0, None), Some(200)).unwrap_err();
        assert!(matches!(err, Error::MemoryCap { .. }));
    }
}
