//! Matrix product states: product-state preparation, TEBD-style circuit
//! application with truncation, overlaps, local expectations and a
//! versioned binary checkpoint.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{Chain, DEFAULT_MEMORY_CAP};
use crate::error::{Error, Result};
use crate::spinchain::{GateLayer, TimedCircuit, TimedStep};
use crate::tensor::{DenseTensor, TruncationPolicy, TruncationReport, C64, ONE, ZERO};

/// Single-site operator appearing in an observable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SiteOperator {
    I,
    X,
    Y,
    Z,
    /// Arbitrary 2x2 matrix, row-major.
    #[serde(skip)]
    Matrix([C64; 4]),
}

impl SiteOperator {
    pub fn matrix(&self) -> [C64; 4] {
        let i = C64::new(0.0, 1.0);
        match self {
            Self::I => [ONE, ZERO, ZERO, ONE],
            Self::X => [ZERO, ONE, ONE, ZERO],
            Self::Y => [ZERO, -i, i, ZERO],
            Self::Z => [ONE, ZERO, ZERO, -ONE],
            Self::Matrix(m) => *m,
        }
    }

    pub fn is_hermitian(&self) -> bool {
        let m = self.matrix();
        (0..2).all(|r| (0..2).all(|c| (m[2 * r + c] - m[2 * c + r].conj()).norm() < 1e-12))
    }
}

/// Product of single-site operators on strictly increasing sites (0-based).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub factors: Vec<(usize, SiteOperator)>,
}

impl ObservableSpec {
    pub fn new(factors: Vec<(usize, SiteOperator)>) -> Result<Self> {
        if factors.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidArgument("observable sites must be strictly increasing".into()));
        }
        Ok(Self { factors })
    }

    pub fn z(site: usize) -> Self {
        Self {
            factors: vec![(site, SiteOperator::Z)],
        }
    }

    pub fn zz(site: usize) -> Self {
        Self {
            factors: vec![(site, SiteOperator::Z), (site + 1, SiteOperator::Z)],
        }
    }

    /// Label with 1-based site numbers, e.g. `Z25` or `Z24Z25`.
    pub fn label(&self) -> String {
        self.factors
            .iter()
            .map(|(s, op)| {
                let name = match op {
                    SiteOperator::I => "I",
                    SiteOperator::X => "X",
                    SiteOperator::Y => "Y",
                    SiteOperator::Z => "Z",
                    SiteOperator::Matrix(_) => "M",
                };
                format!("{name}{}", s + 1)
            })
            .collect()
    }

    pub fn validate(&self, n_sites: usize) -> Result<()> {
        if self.factors.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidArgument("observable sites must be strictly increasing".into()));
        }
        if let Some((s, _)) = self.factors.iter().find(|(s, _)| *s >= n_sites) {
            return Err(Error::Shape(format!("observable site {s} outside a {n_sites}-site chain")));
        }
        if let Some((s, _)) = self.factors.iter().find(|(_, op)| !op.is_hermitian()) {
            return Err(Error::NotHermitian(format!("factor on site {s}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct MatrixProductState {
    pub(crate) chain: Chain,
    memory_cap: Option<usize>,
}

impl MatrixProductState {
    /// Computational-basis product state; `'0'` is the +1 eigenvector of
    /// sigma^z, `'1'` the -1 eigenvector.
    pub fn product_state(bits: &str) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::InvalidArgument("bitstring must be nonempty".into()));
        }
        let vectors = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(vec![ONE, ZERO]),
                '1' => Ok(vec![ZERO, ONE]),
                other => Err(Error::InvalidArgument(format!("invalid bit {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_chain(Chain::product(&vectors, 2)?))
    }

    /// Néel state `|1010...>`.
    pub fn neel(n_sites: usize) -> Result<Self> {
        Self::product_state(&neel_bits(n_sites))
    }

    /// Product of arbitrary single-site vectors.
    pub fn product_of(vectors: &[[C64; 2]]) -> Result<Self> {
        let v: Vec<Vec<C64>> = vectors.iter().map(|x| x.to_vec()).collect();
        Ok(Self::from_chain(Chain::product(&v, 2)?))
    }

    /// Normalized state with random complex site tensors of the given bond
    /// dimension (capped by the chain's exact Schmidt ranks).
    pub fn random<R: Rng>(n_sites: usize, bond: usize, rng: &mut R) -> Result<Self> {
        if n_sites == 0 || bond == 0 {
            return Err(Error::InvalidArgument("random state needs sites and a bond".into()));
        }
        let sites = (0..n_sites)
            .map(|s| {
                let l = if s == 0 { 1 } else { bond };
                let r = if s + 1 == n_sites { 1 } else { bond };
                DenseTensor::from_fn(vec![l, 2, r], |_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            })
            .collect();
        let mut chain = Chain::from_sites(sites, 2)?;
        chain.log_scale = 0.0;
        Ok(Self::from_chain(chain))
    }

    pub(crate) fn from_chain(chain: Chain) -> Self {
        Self { chain, memory_cap: None }
    }

    pub fn with_memory_cap(mut self, cap: usize) -> Self {
        self.memory_cap = Some(cap);
        self
    }

    pub fn n_sites(&self) -> usize {
        self.chain.len()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.chain.bond_dims()
    }

    pub fn max_bond(&self) -> usize {
        self.chain.max_bond()
    }

    /// Accumulated discarded weight over every truncation so far.
    pub fn trunc_history(&self) -> f64 {
        self.chain.truncation.cumulative_weight
    }

    pub fn truncation(&self) -> &TruncationReport {
        &self.chain.truncation
    }

    pub fn log_norm(&self) -> f64 {
        self.chain.log_scale
    }

    pub fn orthogonality_center(&self) -> usize {
        self.chain.center
    }

    pub fn site_tensor(&self, site: usize) -> &DenseTensor {
        &self.chain.sites[site]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.chain.norm_sqr()
    }

    /// Stored complex entries.
    pub fn entries(&self) -> usize {
        self.chain.entries()
    }

    fn cap(&self, policy: &TruncationPolicy) -> usize {
        self.memory_cap.unwrap_or_else(|| match policy.max_bond {
            Some(chi) => 2 * self.n_sites() * chi * chi,
            None => DEFAULT_MEMORY_CAP,
        })
    }

    pub fn apply_layer(&mut self, layer: &GateLayer, policy: &TruncationPolicy) -> Result<()> {
        let ops: Vec<(usize, &[C64])> = layer.gates.iter().map(|(s, g)| (*s, &g.0[..])).collect();
        self.chain.apply_layer(&ops, policy)
    }

    pub fn apply_step(&mut self, step: &TimedStep, policy: &TruncationPolicy) -> Result<()> {
        for layer in &step.layers {
            self.apply_layer(layer, policy)?;
        }
        Ok(())
    }

    /// Apply every step of `circuit` in order, truncating after each gate.
    pub fn apply_circuit(&mut self, circuit: &TimedCircuit, policy: &TruncationPolicy) -> Result<()> {
        if circuit.n_sites != self.n_sites() {
            return Err(Error::Shape(format!(
                "circuit on {} sites applied to a {}-site state",
                circuit.n_sites,
                self.n_sites()
            )));
        }
        policy.validate()?;
        let cap = self.cap(policy);
        let mut time = 0.0;
        for (idx, step) in circuit.steps.iter().enumerate() {
            time += step.dt;
            for layer in &step.layers {
                self.apply_layer(layer, policy)?;
                let entries = self.entries();
                if entries > cap {
                    return Err(Error::MemoryCap {
                        step: idx,
                        time,
                        entries,
                        cap,
                    });
                }
            }
        }
        Ok(())
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &MatrixProductState) -> Result<C64> {
        self.chain.overlap(&other.chain)
    }

    /// `<psi|O|psi> / <psi|psi>` for a Hermitian product observable.
    pub fn expectation(&self, obs: &ObservableSpec) -> Result<f64> {
        obs.validate(self.n_sites())?;
        let mats: Vec<(usize, [C64; 4])> = obs.factors.iter().map(|(s, op)| (*s, op.matrix())).collect();
        let value = self.chain.overlap_with(&self.chain, |s| {
            mats.iter().find(|(site, _)| *site == s).map(|(_, m)| &m[..])
        })?;
        let norm = self.norm_sqr();
        let v = value / norm;
        if v.im.abs() > 1e-10 * v.norm().max(1.0) {
            return Err(Error::NotHermitian(format!("expectation has imaginary part {}", v.im)));
        }
        Ok(v.re)
    }

    /// Probability-weighted expectation of a general product of 2x2
    /// operators, without the Hermiticity check.
    pub(crate) fn product_expectation(&self, mats: &[(usize, [C64; 4])]) -> Result<C64> {
        let value = self.chain.overlap_with(&self.chain, |s| {
            mats.iter().find(|(site, _)| *site == s).map(|(_, m)| &m[..])
        })?;
        Ok(value / self.norm_sqr())
    }

    /// Von Neumann entropy (natural log) across every bond.
    pub fn entanglement_profile(&self) -> Result<Vec<f64>> {
        Ok(self
            .chain
            .bond_spectra()?
            .iter()
            .map(|spec| {
                spec.iter()
                    .map(|s| s * s)
                    .filter(|&p| p > 1e-300)
                    .map(|p| -p * p.ln())
                    .sum::<f64>()
                    .max(0.0)
            })
            .collect())
    }

    /// Dense amplitudes, site 0 as the most significant bit.
    pub fn to_amplitudes(&self) -> Result<Vec<C64>> {
        if self.n_sites() > 24 {
            return Err(Error::InvalidArgument("dense conversion limited to 24 sites".into()));
        }
        let mut acc = vec![ONE];
        let mut bond = 1usize;
        for site in &self.chain.sites {
            let r = site.shape()[2];
            let next = crate::tensor::gemm(&acc, acc.len() / bond, bond, site.data(), 2 * r);
            acc = next;
            bond = r;
        }
        let scale = self.chain.log_scale.exp();
        Ok(acc.into_iter().map(|z| z * scale).collect())
    }

    /// Versioned binary checkpoint: magic, version, site count, then each
    /// site's shape and little-endian `(re, im)` pairs.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Checkpoint(e.to_string());
        w.write_all(CHECKPOINT_MAGIC).map_err(io)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&(self.n_sites() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.chain.center as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&self.chain.log_scale.to_le_bytes()).map_err(io)?;
        w.write_all(&self.chain.truncation.cumulative_weight.to_le_bytes()).map_err(io)?;
        for s in &self.chain.sites {
            for &e in s.shape() {
                w.write_all(&(e as u64).to_le_bytes()).map_err(io)?;
            }
            for z in s.data() {
                w.write_all(&z.re.to_le_bytes()).map_err(io)?;
                w.write_all(&z.im.to_le_bytes()).map_err(io)?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let io = |e: std::io::Error| Error::Checkpoint(e.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("not an MPS checkpoint".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let n = read_u64(&mut r)? as usize;
        let center = read_u64(&mut r)? as usize;
        let log_scale = read_f64(&mut r)?;
        let trunc = read_f64(&mut r)?;
        if n == 0 || center >= n || n > 1 << 20 {
            return Err(Error::Checkpoint("corrupt header".into()));
        }
        let mut sites = Vec::with_capacity(n);
        for _ in 0..n {
            let shape = [read_u64(&mut r)? as usize, read_u64(&mut r)? as usize, read_u64(&mut r)? as usize];
            let len = shape.iter().try_fold(1usize, |a, &b| a.checked_mul(b));
            let len = len.filter(|&l| l <= 1 << 30).ok_or_else(|| Error::Checkpoint("corrupt site shape".into()))?;
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                data.push(C64::new(read_f64(&mut r)?, read_f64(&mut r)?));
            }
            sites.push(DenseTensor::new(shape.to_vec(), data)?);
        }
        let mut chain = Chain::from_sites(sites, 2)?;
        // from_sites re-canonicalizes; the stored scale is the authoritative norm
        chain.log_scale += log_scale;
        chain.move_center(center)?;
        chain.truncation.cumulative_weight = trunc;
        Ok(Self::from_chain(chain))
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::Checkpoint(e.to_string()))?;
        self.write_checkpoint(std::io::BufWriter::new(f))
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::Checkpoint(e.to_string()))?;
        Self::read_checkpoint(std::io::BufReader::new(f))
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"TNMPFMPS";
const CHECKPOINT_VERSION: u32 = 1;

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

/// `"1010..."` of the given length.
pub fn neel_bits(n_sites: usize) -> String {
    (0..n_sites).map(|i| if i % 2 == 0 { '1' } else { '0' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinchain::{bond_gate, build_hamiltonian, trotter_circuit, BondTerm, ModelKind, TrotterOrder};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn basis_convention() {
        let psi = MatrixProductState::product_state("10").unwrap();
        assert_eq!(psi.expectation(&ObservableSpec::z(0)).unwrap(), -1.0);
        assert_eq!(psi.expectation(&ObservableSpec::z(1)).unwrap(), 1.0);
    }

    #[test]
    fn product_state_shape() {
        let psi = MatrixProductState::product_state("1010").unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-15);
        assert_eq!(psi.bond_dims(), vec![1, 1, 1]);
        assert!(MatrixProductState::product_state("").is_err());
        assert!(MatrixProductState::product_state("10x").is_err());
    }

    #[test]
    fn neel_fifty_sites() {
        let psi = MatrixProductState::neel(50).unwrap();
        let total: f64 = (0..50).map(|s| psi.expectation(&ObservableSpec::z(s)).unwrap()).sum();
        assert_eq!(total, 0.0);
        // sigma^z_25 (1-based) sits on the 25th character, a '1'
        assert_eq!(psi.expectation(&ObservableSpec::z(24)).unwrap(), -1.0);
        assert_eq!(psi.expectation(&ObservableSpec::zz(23)).unwrap(), -1.0);
    }

    #[test]
    fn orthogonal_products() {
        let a = MatrixProductState::product_state("1010").unwrap();
        let b = MatrixProductState::product_state("0101").unwrap();
        assert_eq!(a.overlap(&b).unwrap(), ZERO);
        assert!((a.overlap(&a).unwrap() - ONE).norm() < 1e-15);
        let c = MatrixProductState::product_state("010").unwrap();
        assert!(a.overlap(&c).is_err());
    }

    #[test]
    fn identity_circuit_is_noop() {
        let h = build_hamiltonian(ModelKind::UniformHeisenberg, 6, 0).unwrap();
        let c = trotter_circuit(&h, 0.0, 3, TrotterOrder::Second).unwrap();
        let mut psi = MatrixProductState::neel(6).unwrap();
        let before = psi.clone();
        psi.apply_circuit(&c, &TruncationPolicy::for_states(1e-12, None)).unwrap();
        assert_eq!(psi.trunc_history(), 0.0);
        assert!((psi.overlap(&before).unwrap().norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bell_pair_bond() {
        let mut psi = MatrixProductState::product_state("10").unwrap();
        assert_eq!(psi.max_bond(), 1);
        assert_eq!(psi.entanglement_profile().unwrap(), vec![0.0]);
        // the XX+YY part swaps |10> and |01>; a quarter period gives a Bell pair
        let g = bond_gate(&BondTerm { coupling: 1.0, anisotropy: 0.0 }, std::f64::consts::FRAC_PI_2);
        let layer = GateLayer { parity: crate::spinchain::Parity::Odd, gates: vec![(0, g)] };
        psi.apply_layer(&layer, &TruncationPolicy::for_states(1e-12, None)).unwrap();
        assert_eq!(psi.max_bond(), 2);
        let s = psi.entanglement_profile().unwrap()[0];
        assert!((s - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn magnetization_and_norm_are_conserved() {
        let h = build_hamiltonian(ModelKind::UniformHeisenberg, 10, 0).unwrap();
        let c = trotter_circuit(&h, 1.5, 6, TrotterOrder::Second).unwrap();
        let mut psi = MatrixProductState::neel(10).unwrap();
        psi.apply_circuit(&c, &TruncationPolicy::for_states(0.0, None)).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-10);
        let m: f64 = (0..10).map(|s| psi.expectation(&ObservableSpec::z(s)).unwrap()).sum();
        assert!(m.abs() < 1e-8);
    }

    #[test]
    fn memory_cap_fails_fast() {
        let h = build_hamiltonian(ModelKind::UniformHeisenberg, 10, 0).unwrap();
        let c = trotter_circuit(&h, 3.0, 6, TrotterOrder::Second).unwrap();
        let mut psi = MatrixProductState::neel(10).unwrap().with_memory_cap(60);
        let err = psi.apply_circuit(&c, &TruncationPolicy::for_states(1e-12, None)).unwrap_err();
        assert!(matches!(err, Error::MemoryCap { .. }), "{err:?}");
    }

    #[test]
    fn non_hermitian_observable_rejected() {
        let psi = MatrixProductState::neel(4).unwrap();
        let raising = SiteOperator::Matrix([ZERO, ONE, ZERO, ZERO]);
        let obs = ObservableSpec::new(vec![(1, raising)]).unwrap();
        assert!(matches!(psi.expectation(&obs), Err(Error::NotHermitian(_))));
        assert!(ObservableSpec::new(vec![(2, SiteOperator::Z), (1, SiteOperator::Z)]).is_err());
        assert!(psi.expectation(&ObservableSpec::z(4)).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let psi = MatrixProductState::random(7, 3, &mut rng).unwrap();
        let mut buf = Vec::new();
        psi.write_checkpoint(&mut buf).unwrap();
        let back = MatrixProductState::read_checkpoint(&buf[..]).unwrap();
        assert_eq!(back.bond_dims(), psi.bond_dims());
        assert!((back.overlap(&psi).unwrap().norm() - 1.0).abs() < 1e-12);
        buf[0] = b'X';
        assert!(MatrixProductState::read_checkpoint(&buf[..]).is_err());
    }
}
