//! Dense complex tensors and the factorizations the tensor-network layers
//! are built on.
//!
//! Tensors are stored row-major. Matrix kernels (products, SVD, QR) are
//! delegated to `faer`; everything above this module only sees
//! [`DenseTensor`] and plain slices.

use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef, Par};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Singular values below this fraction of the largest one are numerical
/// zeros and are never kept, even with a zero threshold.
pub const NUMERICAL_ZERO: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} needs {} entries, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("tensor entries must be finite".into()));
        }
        Ok(Self { shape, data })
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<C64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![ZERO; n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(vec![n, n]);
        for i in 0..n {
            t.data[i * n + i] = ONE;
        }
        t
    }

    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let n: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.shape.len()];
        for ax in (0..self.shape.len().saturating_sub(1)).rev() {
            strides[ax] = strides[ax + 1] * self.shape[ax + 1];
        }
        strides
    }

    pub fn get(&self, index: &[usize]) -> C64 {
        let off: usize = index.iter().zip(self.strides()).map(|(i, s)| i * s).sum();
        self.data[off]
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Axis permutation: output axis `k` is input axis `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let r = self.rank();
        let mut seen = vec![false; r];
        if perm.len() != r || perm.iter().any(|&p| p >= r || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Shape(format!("invalid permutation {:?} for rank {}", perm, r)));
        }
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        let in_strides = self.strides();
        let shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
        let n = self.data.len();
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; r];
        let mut off = 0usize;
        for _ in 0..n {
            data.push(self.data[off]);
            for ax in (0..r).rev() {
                idx[ax] += 1;
                off += strides[ax];
                if idx[ax] < shape[ax] {
                    break;
                }
                off -= strides[ax] * shape[ax];
                idx[ax] = 0;
            }
        }
        Ok(Self { shape, data })
    }

    pub fn conj(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&mut self, factor: C64) {
        self.data.iter_mut().for_each(|z| *z *= factor);
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Rows x cols view of a rank-2 tensor.
    pub(crate) fn as_mat(&self) -> MatRef<'_, C64> {
        assert_eq!(self.rank(), 2, "matrix view needs a rank-2 tensor");
        MatRef::from_row_major_slice(&self.data, self.shape[0], self.shape[1])
    }

    pub(crate) fn from_mat(m: MatRef<'_, C64>) -> Self {
        let (r, c) = (m.nrows(), m.ncols());
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        Self { shape: vec![r, c], data }
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[1] != other.shape[0] {
            return Err(Error::Shape(format!(
                "matmul {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let (m, k, n) = (self.shape[0], self.shape[1], other.shape[1]);
        Ok(Self {
            shape: vec![m, n],
            data: gemm(&self.data, m, k, &other.data, n),
        })
    }

    /// Conjugate transpose of a rank-2 tensor.
    pub fn adjoint(&self) -> Result<Self> {
        if self.rank() != 2 {
            return Err(Error::Shape(format!("adjoint of rank-{} tensor", self.rank())));
        }
        let mut t = self.permute(&[1, 0])?;
        t.data.iter_mut().for_each(|z| *z = z.conj());
        Ok(t)
    }
}

/// Row-major `(m x k) * (k x n)`.
pub(crate) fn gemm(a: &[C64], m: usize, k: usize, b: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![ZERO; m * n];
    gemm_into(&mut out, a, m, k, b, n);
    out
}

pub(crate) fn gemm_into(out: &mut [C64], a: &[C64], m: usize, k: usize, b: &[C64], n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        out.iter_mut().for_each(|z| *z = ZERO);
        return;
    }
    let lhs = MatRef::from_row_major_slice(a, m, k);
    let rhs = MatRef::from_row_major_slice(b, k, n);
    let dst = MatMut::from_row_major_slice_mut(out, m, n);
    matmul(dst, Accum::Replace, lhs, rhs, ONE, Par::Seq);
}

/// Row-major `a^H * b` with `a: (k x m)`, `b: (k x n)`.
pub(crate) fn gemm_adj_left(a: &[C64], k: usize, m: usize, b: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![ZERO; m * n];
    if m == 0 || n == 0 || k == 0 {
        return out;
    }
    let lhs = MatRef::from_row_major_slice(a, k, m).adjoint();
    let rhs = MatRef::from_row_major_slice(b, k, n);
    let dst = MatMut::from_row_major_slice_mut(&mut out, m, n);
    matmul(dst, Accum::Replace, lhs, rhs, ONE, Par::Seq);
    out
}

/// Contract `a` and `b` over the given `(axis_of_a, axis_of_b)` pairs.
///
/// The result carries the uncontracted axes of `a` followed by those of `b`,
/// each in their original order.
pub fn contract(a: &DenseTensor, b: &DenseTensor, axis_pairs: &[(usize, usize)]) -> Result<DenseTensor> {
    let mut a_used = vec![false; a.rank()];
    let mut b_used = vec![false; b.rank()];
    for &(ia, ib) in axis_pairs {
        if ia >= a.rank() || ib >= b.rank() {
            return Err(Error::Shape(format!("axis pair ({ia}, {ib}) out of range")));
        }
        if a_used[ia] || b_used[ib] {
            return Err(Error::Shape(format!("axis pair ({ia}, {ib}) repeats an axis")));
        }
        if a.shape[ia] != b.shape[ib] {
            return Err(Error::Shape(format!(
                "extent mismatch on pair ({ia}, {ib}): {} vs {}",
                a.shape[ia], b.shape[ib]
            )));
        }
        a_used[ia] = true;
        b_used[ib] = true;
    }
    let a_free: Vec<usize> = (0..a.rank()).filter(|&i| !a_used[i]).collect();
    let b_free: Vec<usize> = (0..b.rank()).filter(|&i| !b_used[i]).collect();

    let perm_a: Vec<usize> = a_free.iter().copied().chain(axis_pairs.iter().map(|p| p.0)).collect();
    let perm_b: Vec<usize> = axis_pairs.iter().map(|p| p.1).chain(b_free.iter().copied()).collect();
    let at = a.permute(&perm_a)?;
    let bt = b.permute(&perm_b)?;

    let m: usize = a_free.iter().map(|&i| a.shape[i]).product();
    let k: usize = axis_pairs.iter().map(|p| a.shape[p.0]).product();
    let n: usize = b_free.iter().map(|&i| b.shape[i]).product();

    let shape: Vec<usize> = a_free
        .iter()
        .map(|&i| a.shape[i])
        .chain(b_free.iter().map(|&i| b.shape[i]))
        .collect();
    Ok(DenseTensor {
        shape,
        data: gemm(&at.data, m, k, &bt.data, n),
    })
}

/// Bond truncation rule shared by states and operators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Singular values with `s / s_max` below this are dropped.
    pub rel_threshold: f64,
    /// Hard cap on the kept rank; `None` is unbounded.
    pub max_bond: Option<usize>,
    /// Rescale the kept singular values to the pre-truncation norm.
    pub renormalize: bool,
}

impl TruncationPolicy {
    pub fn new(rel_threshold: f64, max_bond: Option<usize>, renormalize: bool) -> Result<Self> {
        let p = Self {
            rel_threshold,
            max_bond,
            renormalize,
        };
        p.validate()?;
        Ok(p)
    }

    /// Default for states: renormalize after every truncation.
    pub fn for_states(rel_threshold: f64, max_bond: Option<usize>) -> Self {
        Self {
            rel_threshold,
            max_bond,
            renormalize: true,
        }
    }

    /// Default for operators: the norm deficit is kept.
    pub fn for_operators(rel_threshold: f64, max_bond: Option<usize>) -> Self {
        Self {
            rel_threshold,
            max_bond,
            renormalize: false,
        }
    }

    pub fn exact() -> Self {
        Self::for_states(0.0, None)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rel_threshold) {
            return Err(Error::InvalidArgument(format!(
                "truncation threshold must lie in [0, 1), got {}",
                self.rel_threshold
            )));
        }
        if self.max_bond == Some(0) {
            return Err(Error::InvalidArgument("max_bond must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of leading singular values (sorted descending) to keep.
    pub fn kept_rank(&self, singular_values: &[f64]) -> usize {
        let Some(&smax) = singular_values.first() else {
            return 0;
        };
        if smax <= 0.0 {
            return 1;
        }
        let cut = smax * self.rel_threshold.max(NUMERICAL_ZERO);
        let mut keep = singular_values.iter().take_while(|&&s| s >= cut).count().max(1);
        if let Some(cap) = self.max_bond {
            keep = keep.min(cap);
        }
        keep
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub kept_rank: usize,
    /// Sum of squared discarded singular values.
    pub discarded_weight: f64,
    /// Discarded weight relative to the total weight, summed over every
    /// truncation merged into this report.
    pub cumulative_weight: f64,
}

impl TruncationReport {
    pub fn merge(&mut self, other: &TruncationReport) {
        self.kept_rank = self.kept_rank.max(other.kept_rank);
        self.discarded_weight += other.discarded_weight;
        self.cumulative_weight += other.cumulative_weight;
    }
}

/// `m ~= u * diag(s) * v` with `u: rows x rank`, `v: rank x cols`.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    pub u: DenseTensor,
    pub s: Vec<f64>,
    pub v: DenseTensor,
    pub report: TruncationReport,
}

pub fn truncated_svd(m: &DenseTensor, policy: &TruncationPolicy) -> Result<SvdFactors> {
    if m.rank() != 2 {
        return Err(Error::Shape(format!(
            "truncated_svd needs a matrix, got shape {:?}",
            m.shape()
        )));
    }
    let (rows, cols) = (m.shape[0], m.shape[1]);
    if rows == 0 || cols == 0 {
        return Err(Error::Shape("truncated_svd of an empty matrix".into()));
    }
    if m.data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let svd = m.as_mat().thin_svd().map_err(|_| Error::NoConvergence {
        routine: "svd",
        rows,
        cols,
    })?;
    let sdiag = svd.S().column_vector();
    let r = rows.min(cols);
    let mut order: Vec<usize> = (0..r).collect();
    let raw: Vec<f64> = (0..r).map(|i| sdiag[i].re).collect();
    if raw.iter().any(|s| !s.is_finite()) {
        return Err(Error::NoConvergence {
            routine: "svd",
            rows,
            cols,
        });
    }
    order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]));
    let sorted: Vec<f64> = order.iter().map(|&i| raw[i].max(0.0)).collect();

    let keep = policy.kept_rank(&sorted);
    let total: f64 = sorted.iter().map(|s| s * s).sum();
    let discarded: f64 = sorted[keep..].iter().map(|s| s * s).sum();
    let mut s: Vec<f64> = sorted[..keep].to_vec();
    if policy.renormalize {
        let kept = total - discarded;
        if kept > 0.0 {
            let f = (total / kept).sqrt();
            s.iter_mut().for_each(|x| *x *= f);
        }
    }

    let uf = svd.U();
    let vf = svd.V();
    let mut u = Vec::with_capacity(rows * keep);
    for i in 0..rows {
        for &c in &order[..keep] {
            u.push(uf[(i, c)]);
        }
    }
    let mut v = Vec::with_capacity(keep * cols);
    for &c in &order[..keep] {
        for j in 0..cols {
            v.push(vf[(j, c)].conj());
        }
    }
    Ok(SvdFactors {
        u: DenseTensor::from_parts(vec![rows, keep], u),
        s,
        v: DenseTensor::from_parts(vec![keep, cols], v),
        report: TruncationReport {
            kept_rank: keep,
            discarded_weight: discarded,
            cumulative_weight: if total > 0.0 { discarded / total } else { 0.0 },
        },
    })
}

/// Thin QR: `m = q * r` with `q` having orthonormal columns.
pub fn qr(m: &DenseTensor) -> Result<(DenseTensor, DenseTensor)> {
    if m.rank() != 2 {
        return Err(Error::Shape(format!("qr needs a matrix, got {:?}", m.shape())));
    }
    let f = m.as_mat().qr();
    let q = f.compute_thin_Q();
    let r = f.thin_R();
    Ok((DenseTensor::from_mat(q.as_ref()), DenseTensor::from_mat(r)))
}

/// Thin LQ: `m = l * q` with `q` having orthonormal rows.
pub fn lq(m: &DenseTensor) -> Result<(DenseTensor, DenseTensor)> {
    if m.rank() != 2 {
        return Err(Error::Shape(format!("lq needs a matrix, got {:?}", m.shape())));
    }
    let (q, r) = qr(&m.adjoint()?)?;
    Ok((r.adjoint()?, q.adjoint()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: Vec<usize>, seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(shape, |_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn reconstruct(f: &SvdFactors) -> DenseTensor {
        let mut us = f.u.clone();
        let k = f.s.len();
        for (i, z) in us.data_mut().iter_mut().enumerate() {
            *z *= f.s[i % k];
        }
        us.matmul(&f.v).unwrap()
    }

    fn diff_sqr(a: &DenseTensor, b: &DenseTensor) -> f64 {
        a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm_sqr()).sum()
    }

    #[test]
    fn identity_keeps_both_values() {
        let f = truncated_svd(&DenseTensor::identity(2), &TruncationPolicy::for_states(1e-12, None)).unwrap();
        assert_eq!(f.s.len(), 2);
        assert!((f.s[0] - 1.0).abs() < 1e-14 && (f.s[1] - 1.0).abs() < 1e-14);
        assert_eq!(f.report.discarded_weight, 0.0);
    }

    #[test]
    fn threshold_drops_small_value() {
        let mut m = DenseTensor::zeros(vec![2, 2]);
        m.data_mut()[0] = ONE;
        m.data_mut()[3] = C64::new(1e-3, 0.0);
        let f = truncated_svd(&m, &TruncationPolicy::for_operators(1e-2, None)).unwrap();
        assert_eq!(f.report.kept_rank, 1);
        assert!((f.report.discarded_weight - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn rank_cap_matches_dropped_spectrum() {
        let m = random(vec![16, 16], 7);
        let full = truncated_svd(&m, &TruncationPolicy::for_operators(0.0, None)).unwrap();
        assert_eq!(full.s.len(), 16);
        let capped = truncated_svd(&m, &TruncationPolicy::for_operators(0.0, Some(5))).unwrap();
        let dropped: f64 = full.s[5..].iter().map(|s| s * s).sum();
        let err = diff_sqr(&m, &reconstruct(&capped));
        assert!((err - dropped).abs() < 1e-10, "{err} vs {dropped}");
        assert!((capped.report.discarded_weight - dropped).abs() < 1e-10);
    }

    #[test]
    fn renormalize_preserves_weight() {
        let m = random(vec![6, 9], 3);
        let f = truncated_svd(&m, &TruncationPolicy::for_states(0.0, Some(2))).unwrap();
        let kept: f64 = f.s.iter().map(|s| s * s).sum();
        assert!((kept - m.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut m = DenseTensor::identity(3);
        m.data_mut()[4] = C64::new(f64::NAN, 0.0);
        assert!(truncated_svd(&m, &TruncationPolicy::exact()).is_err());
        assert!(DenseTensor::new(vec![1], vec![C64::new(f64::INFINITY, 0.0)]).is_err());
    }

    #[test]
    fn invalid_policies() {
        assert!(TruncationPolicy::new(1.0, None, true).is_err());
        assert!(TruncationPolicy::new(-0.1, None, true).is_err());
        assert!(TruncationPolicy::new(0.1, Some(0), true).is_err());
    }

    #[test]
    fn contract_identity_with_vector() {
        let v = random(vec![4], 1);
        let out = contract(&DenseTensor::identity(4), &v, &[(1, 0)]).unwrap();
        assert_eq!(out.shape(), &[4]);
        assert!(diff_sqr(&out, &v) < 1e-28);
    }

    #[test]
    fn contract_with_conjugate_gives_frobenius_norm() {
        let m = random(vec![5, 3], 2);
        let out = contract(&m, &m.conj(), &[(0, 0), (1, 1)]).unwrap();
        assert_eq!(out.shape(), &[] as &[usize]);
        assert!((out.data()[0].re - m.norm_sqr()).abs() < 1e-12);
        assert!(out.data()[0].im.abs() < 1e-12);
    }

    #[test]
    fn contract_matches_loop_reference() {
        let a = random(vec![3, 4, 5], 11);
        let b = random(vec![5, 2, 4], 12);
        let out = contract(&a, &b, &[(1, 2), (2, 0)]).unwrap();
        assert_eq!(out.shape(), &[3, 2]);
        for i in 0..3 {
            for j in 0..2 {
                let mut acc = ZERO;
                for x in 0..4 {
                    for y in 0..5 {
                        acc += a.get(&[i, x, y]) * b.get(&[y, j, x]);
                    }
                }
                assert!((out.get(&[i, j]) - acc).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn contract_extent_mismatch() {
        let a = random(vec![3, 4], 1);
        let b = random(vec![5, 2], 1);
        assert!(matches!(contract(&a, &b, &[(1, 0)]), Err(Error::Shape(_))));
    }

    #[test]
    fn permute_round_trip() {
        let a = random(vec![2, 3, 4], 5);
        let p = a.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.shape(), &[4, 2, 3]);
        assert_eq!(p.get(&[3, 1, 2]), a.get(&[1, 2, 3]));
        let back = p.permute(&[1, 2, 0]).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn qr_and_lq_factor() {
        let m = random(vec![6, 4], 9);
        let (q, r) = qr(&m).unwrap();
        assert!(diff_sqr(&q.matmul(&r).unwrap(), &m) < 1e-24);
        let qhq = q.adjoint().unwrap().matmul(&q).unwrap();
        assert!(diff_sqr(&qhq, &DenseTensor::identity(4)) < 1e-24);
        let (l, q) = lq(&m).unwrap();
        assert!(diff_sqr(&l.matmul(&q).unwrap(), &m) < 1e-24);
        let qqh = q.matmul(&q.adjoint().unwrap()).unwrap();
        assert!(diff_sqr(&qqh, &DenseTensor::identity(4)) < 1e-24);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn exact_policy_reconstructs(rows in 1usize..9, cols in 1usize..9, seed in any::<u64>()) {
                let m = random(vec![rows, cols], seed);
                let f = truncated_svd(&m, &TruncationPolicy::for_operators(0.0, None)).unwrap();
                let rel = diff_sqr(&m, &reconstruct(&f)).sqrt() / m.norm();
                prop_assert!(rel < 1e-10);
            }

            #[test]
            fn discarded_weight_is_reconstruction_error(
                rows in 2usize..10, cols in 2usize..10, cap in 1usize..4, seed in any::<u64>()
            ) {
                let m = random(vec![rows, cols], seed);
                let f = truncated_svd(&m, &TruncationPolicy::for_operators(0.0, Some(cap))).unwrap();
                let err = diff_sqr(&m, &reconstruct(&f));
                prop_assert!((err - f.report.discarded_weight).abs() <= 1e-10 * err.max(1e-12) + 1e-14);
            }

            #[test]
            fn contract_is_bilinear(re in -2.0f64..2.0, im in -2.0f64..2.0, seed in any::<u64>()) {
                let a = random(vec![3, 4, 2], seed);
                let b = random(vec![4, 5], seed ^ 0xabcdef);
                let alpha = C64::new(re, im);
                let mut scaled = a.clone();
                scaled.scale(alpha);
                let lhs = contract(&scaled, &b, &[(1, 0)]).unwrap();
                let mut rhs = contract(&a, &b, &[(1, 0)]).unwrap();
                rhs.scale(alpha);
                for (x, y) in lhs.data().iter().zip(rhs.data()) {
                    prop_assert!((x - y).norm() < 1e-12);
                }
            }
        }
    }
}
