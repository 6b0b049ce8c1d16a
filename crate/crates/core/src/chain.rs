//! Mixed-canonical tensor chain shared by states (physical dimension 2) and
//! vectorized operators (physical dimension 4).
//!
//! Invariant: every site left of `center` is a left isometry, every site
//! right of it a right isometry, and the center tensor has unit norm. The
//! network value is `exp(log_scale)` times the contraction of the sites.

use crate::error::{Error, Result};
use crate::tensor::{gemm, gemm_adj_left, gemm_into, lq, qr, truncated_svd, DenseTensor, TruncationPolicy, TruncationReport, C64, ONE, ZERO};

/// Fallback cap on stored complex entries when no bond cap is configured.
pub const DEFAULT_MEMORY_CAP: usize = 1 << 26;

#[derive(Clone, Debug)]
pub(crate) struct Chain {
    /// Site tensors shaped `(left bond, phys, right bond)`.
    pub sites: Vec<DenseTensor>,
    pub phys: usize,
    pub center: usize,
    pub log_scale: f64,
    pub truncation: TruncationReport,
}

impl Chain {
    /// Product chain from one local vector per site.
    pub fn product(vectors: &[Vec<C64>], phys: usize) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::InvalidArgument("empty chain".into()));
        }
        let mut log_scale = 0.0;
        let mut sites = Vec::with_capacity(vectors.len());
        for v in vectors {
            if v.len() != phys {
                return Err(Error::Shape(format!("local vector of length {} for phys {}", v.len(), phys)));
            }
            let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if n == 0.0 || !n.is_finite() {
                return Err(Error::InvalidArgument("local vector must be nonzero and finite".into()));
            }
            log_scale += n.ln();
            sites.push(DenseTensor::from_parts(vec![1, phys, 1], v.iter().map(|z| z / n).collect()));
        }
        Ok(Self {
            sites,
            phys,
            center: 0,
            log_scale,
            truncation: TruncationReport::default(),
        })
    }

    /// Bring arbitrary site tensors into canonical form by a QR sweep.
    pub fn from_sites(sites: Vec<DenseTensor>, phys: usize) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidArgument("empty chain".into()));
        }
        for (i, s) in sites.iter().enumerate() {
            if s.rank() != 3 || s.shape()[1] != phys {
                return Err(Error::Shape(format!("site {i} has shape {:?}", s.shape())));
            }
            if i > 0 && sites[i - 1].shape()[2] != s.shape()[0] {
                return Err(Error::Shape(format!("bond mismatch between sites {} and {i}", i - 1)));
            }
        }
        let n = sites.len();
        if sites[0].shape()[0] != 1 || sites[n - 1].shape()[2] != 1 {
            return Err(Error::Shape("boundary bonds must have extent 1".into()));
        }
        let mut chain = Self {
            sites,
            phys,
            center: 0,
            log_scale: 0.0,
            truncation: TruncationReport::default(),
        };
        chain.center = 0;
        for c in 0..n - 1 {
            chain.shift_right(c)?;
        }
        chain.center = n - 1;
        let norm = chain.sites[n - 1].norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidArgument("chain has zero or non-finite norm".into()));
        }
        chain.sites[n - 1].scale(C64::new(1.0 / norm, 0.0));
        chain.log_scale = norm.ln();
        Ok(chain)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.len() - 1].iter().map(|s| s.shape()[2]).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn entries(&self) -> usize {
        self.sites.iter().map(DenseTensor::len).sum()
    }

    fn shift_right(&mut self, c: usize) -> Result<()> {
        let s = &self.sites[c];
        let (l, d, r) = (s.shape()[0], s.shape()[1], s.shape()[2]);
        let m = s.clone().reshape(vec![l * d, r])?;
        let (q, rr) = qr(&m)?;
        let k = q.shape()[1];
        self.sites[c] = q.reshape(vec![l, d, k])?;
        let next = &self.sites[c + 1];
        let (nl, nd, nr) = (next.shape()[0], next.shape()[1], next.shape()[2]);
        debug_assert_eq!(nl, r);
        let data = gemm(rr.data(), k, r, next.data(), nd * nr);
        self.sites[c + 1] = DenseTensor::from_parts(vec![k, nd, nr], data);
        Ok(())
    }

    fn shift_left(&mut self, c: usize) -> Result<()> {
        let s = &self.sites[c];
        let (l, d, r) = (s.shape()[0], s.shape()[1], s.shape()[2]);
        let m = s.clone().reshape(vec![l, d * r])?;
        let (lo, q) = lq(&m)?;
        let k = q.shape()[0];
        self.sites[c] = q.reshape(vec![k, d, r])?;
        let prev = &self.sites[c - 1];
        let (pl, pd, pr) = (prev.shape()[0], prev.shape()[1], prev.shape()[2]);
        debug_assert_eq!(pr, l);
        let data = gemm(prev.data(), pl * pd, l, lo.data(), k);
        self.sites[c - 1] = DenseTensor::from_parts(vec![pl, pd, k], data);
        Ok(())
    }

    pub fn move_center(&mut self, to: usize) -> Result<()> {
        while self.center < to {
            self.shift_right(self.center)?;
            self.center += 1;
        }
        while self.center > to {
            self.shift_left(self.center)?;
            self.center -= 1;
        }
        Ok(())
    }

    /// Apply a `(phys^2 x phys^2)` operator to sites `(i, i+1)` and split
    /// the result back with a truncated SVD. The center ends on `i + 1` when
    /// `end_right`, otherwise on `i`.
    pub fn apply_two_site(
        &mut self,
        i: usize,
        op: &[C64],
        policy: &TruncationPolicy,
        end_right: bool,
    ) -> Result<TruncationReport> {
        let d = self.phys;
        let dd = d * d;
        debug_assert_eq!(op.len(), dd * dd);
        if i + 1 >= self.len() {
            return Err(Error::Shape(format!("two-site operator on bond {i} outside the chain")));
        }
        if self.center != i && self.center != i + 1 {
            let target = if self.center < i { i } else { i + 1 };
            self.move_center(target)?;
        }
        let a = &self.sites[i];
        let b = &self.sites[i + 1];
        let (l, m, r) = (a.shape()[0], a.shape()[2], b.shape()[2]);
        let theta = gemm(a.data(), l * d, m, b.data(), d * r);
        // theta is (l, dd, r); act with op on the middle index
        let mut out = vec![ZERO; theta.len()];
        let block = dd * r;
        for x in 0..l {
            gemm_into(&mut out[x * block..(x + 1) * block], op, dd, dd, &theta[x * block..(x + 1) * block], r);
        }
        let mat = DenseTensor::from_parts(vec![l * d, d * r], out);
        let f = truncated_svd(&mat, policy)?;
        let k = f.s.len();
        let kept_norm = f.s.iter().map(|s| s * s).sum::<f64>().sqrt();
        if kept_norm == 0.0 || !kept_norm.is_finite() {
            return Err(Error::InvalidArgument("two-site update annihilated the chain".into()));
        }
        self.log_scale += kept_norm.ln();
        let s: Vec<f64> = f.s.iter().map(|x| x / kept_norm).collect();
        let (mut u, mut v) = (f.u.into_data(), f.v.into_data());
        if end_right {
            for row in 0..k {
                let w = s[row];
                v[row * d * r..(row + 1) * d * r].iter_mut().for_each(|z| *z *= w);
            }
            self.center = i + 1;
        } else {
            for (idx, z) in u.iter_mut().enumerate() {
                *z *= s[idx % k];
            }
            self.center = i;
        }
        self.sites[i] = DenseTensor::from_parts(vec![l, d, k], u);
        self.sites[i + 1] = DenseTensor::from_parts(vec![k, d, r], v);
        self.truncation.merge(&f.report);
        Ok(f.report)
    }

    /// Apply commuting two-site operators (one layer), sweeping away from
    /// the current center so that no extra canonical moves are needed.
    pub fn apply_layer(&mut self, ops: &[(usize, &[C64])], policy: &TruncationPolicy) -> Result<()> {
        let (Some(first), Some(last)) = (ops.first(), ops.last()) else {
            return Ok(());
        };
        if self.center.abs_diff(first.0) <= self.center.abs_diff(last.0 + 1) {
            for (s, op) in ops {
                self.apply_two_site(*s, op, policy, true)?;
            }
        } else {
            for (s, op) in ops.iter().rev() {
                self.apply_two_site(*s, op, policy, false)?;
            }
        }
        Ok(())
    }

    /// `<self|other>` including both scale factors.
    pub fn overlap(&self, other: &Chain) -> Result<C64> {
        self.overlap_with(other, |_| None)
    }

    /// `<self| (prod_s O_s) |other>` with optional `phys x phys` operators per site.
    pub fn overlap_with<'a>(&self, other: &Chain, local: impl Fn(usize) -> Option<&'a [C64]>) -> Result<C64> {
        if self.len() != other.len() || self.phys != other.phys {
            return Err(Error::Shape(format!(
                "overlap of chains with {} and {} sites",
                self.len(),
                other.len()
            )));
        }
        let d = self.phys;
        let mut env = vec![ONE];
        let (mut ea, mut eb) = (1usize, 1usize);
        for s in 0..self.len() {
            let a = &self.sites[s];
            let b = &other.sites[s];
            let (bl, br) = (b.shape()[0], b.shape()[2]);
            let bdata: std::borrow::Cow<[C64]> = match local(s) {
                None => std::borrow::Cow::Borrowed(b.data()),
                Some(op) => {
                    let mut out = vec![ZERO; b.len()];
                    for x in 0..bl {
                        gemm_into(&mut out[x * d * br..(x + 1) * d * br], op, d, d, &b.data()[x * d * br..(x + 1) * d * br], br);
                    }
                    std::borrow::Cow::Owned(out)
                }
            };
            debug_assert_eq!(bl, eb);
            // (ea x eb)(eb x d*br) -> (ea*d x br)
            let t = gemm(&env, ea, eb, &bdata, d * br);
            let ar = a.shape()[2];
            env = gemm_adj_left(a.data(), ea * d, ar, &t, br);
            ea = ar;
            eb = br;
        }
        Ok(env[0] * (self.log_scale + other.log_scale).exp())
    }

    pub fn norm_sqr(&self) -> f64 {
        (2.0 * self.log_scale).exp() * self.sites[self.center].norm_sqr()
    }

    /// Schmidt coefficients on every bond, normalized to unit weight.
    pub fn bond_spectra(&self) -> Result<Vec<Vec<f64>>> {
        let mut work = self.clone();
        work.move_center(0)?;
        let exact = TruncationPolicy::for_operators(0.0, None);
        let mut out = Vec::with_capacity(self.len() - 1);
        for c in 0..self.len() - 1 {
            let s = &work.sites[c];
            let (l, d, r) = (s.shape()[0], s.shape()[1], s.shape()[2]);
            let f = truncated_svd(&s.clone().reshape(vec![l * d, r])?, &exact)?;
            let total: f64 = f.s.iter().map(|x| x * x).sum();
            out.push(f.s.iter().map(|x| x / total.sqrt()).collect());
            work.shift_right(c)?;
            work.center = c + 1;
        }
        Ok(out)
    }
}
