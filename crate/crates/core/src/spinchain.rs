//! Nearest-neighbour spin-chain Hamiltonians and their Trotter circuits.
//!
//! The chain Hamiltonian is
//! `H = -sum_i [ J_i (Sx Sx + Sy Sy) + D_i Sz Sz ]` on bonds `(i, i+1)`,
//! with `S = sigma / 2`. Circuits are stored as steps of gate layers, each
//! step tagged with the time it advances; the interleaving in
//! [`crate::mpo`] relies on those tags.

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{C64, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// All couplings `J = D = 1`.
    UniformHeisenberg,
    /// `J_i ~ U[1/4, 3/4]`, `D_i = 2 J_i`.
    DisorderedXxz,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BondTerm {
    /// XX + YY coupling `J`.
    pub coupling: f64,
    /// ZZ coupling `D`.
    pub anisotropy: f64,
}

impl BondTerm {
    /// 4x4 bond Hamiltonian in the basis `|00>, |01>, |10>, |11>` where
    /// `|0>` is the +1 eigenvector of sigma^z.
    pub fn matrix(&self) -> [C64; 16] {
        // -(J/4)(XX + YY) - (D/4) ZZ
        let j = self.coupling / 4.0;
        let d = self.anisotropy / 4.0;
        let mut h = [ZERO; 16];
        h[0] = C64::new(-d, 0.0);
        h[5] = C64::new(d, 0.0);
        h[10] = C64::new(d, 0.0);
        h[15] = C64::new(-d, 0.0);
        // XX + YY = 2 (|01><10| + |10><01|)
        h[6] = C64::new(-2.0 * j, 0.0);
        h[9] = C64::new(-2.0 * j, 0.0);
        h
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub n_sites: usize,
    pub bonds: Vec<BondTerm>,
    pub kind: ModelKind,
    pub seed: u64,
}

pub fn build_hamiltonian(kind: ModelKind, n_sites: usize, seed: u64) -> Result<HamiltonianSpec> {
    if n_sites < 2 {
        return Err(Error::InvalidArgument(format!(
            "a chain needs at least 2 sites, got {n_sites}"
        )));
    }
    let bonds = match kind {
        ModelKind::UniformHeisenberg => vec![
            BondTerm {
                coupling: 1.0,
                anisotropy: 1.0
            };
            n_sites - 1
        ],
        ModelKind::DisorderedXxz => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n_sites - 1)
                .map(|_| {
                    let j = rng.random_range(0.25..=0.75);
                    BondTerm {
                        coupling: j,
                        anisotropy: 2.0 * j,
                    }
                })
                .collect()
        }
    };
    Ok(HamiltonianSpec {
        n_sites,
        bonds,
        kind,
        seed,
    })
}

impl HamiltonianSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::InvalidArgument("n_sites must be at least 2".into()));
        }
        if self.bonds.len() != self.n_sites - 1 {
            return Err(Error::InvalidArgument(format!(
                "{} sites need {} bond terms, got {}",
                self.n_sites,
                self.n_sites - 1,
                self.bonds.len()
            )));
        }
        if let ModelKind::DisorderedXxz = self.kind {
            for (i, b) in self.bonds.iter().enumerate() {
                if !(0.25..=0.75).contains(&b.coupling) || b.anisotropy != 2.0 * b.coupling {
                    return Err(Error::InvalidArgument(format!(
                        "bond {i}: disordered couplings need J in [1/4, 3/4] and D = 2J"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A two-site unitary, row-major 4x4 over `|b_left b_right>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gate2(pub [C64; 16]);

impl Gate2 {
    pub fn identity() -> Self {
        let mut m = [ZERO; 16];
        for i in 0..4 {
            m[5 * i] = ONE;
        }
        Self(m)
    }

    pub fn adjoint(&self) -> Self {
        let mut m = [ZERO; 16];
        for r in 0..4 {
            for c in 0..4 {
                m[4 * r + c] = self.0[4 * c + r].conj();
            }
        }
        Self(m)
    }

    pub fn mul(&self, other: &Gate2) -> Gate2 {
        let mut m = [ZERO; 16];
        for r in 0..4 {
            for c in 0..4 {
                m[4 * r + c] = (0..4).map(|k| self.0[4 * r + k] * other.0[4 * k + c]).sum();
            }
        }
        Gate2(m)
    }

    /// Largest entry deviation of `G G^dagger` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.mul(&self.adjoint());
        let id = Gate2::identity();
        p.0.iter().zip(id.0.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// `exp(-i h dt)` by diagonalizing the 4x4 bond Hamiltonian.
pub fn bond_gate(term: &BondTerm, dt: f64) -> Gate2 {
    let h = term.matrix();
    let hm = Mat::<C64>::from_fn(4, 4, |r, c| h[4 * r + c]);
    let eig = hm
        .self_adjoint_eigen(Side::Lower)
        .expect("4x4 Hermitian eigendecomposition");
    let u = eig.U();
    let s = eig.S().column_vector();
    let mut g = [ZERO; 16];
    for r in 0..4 {
        for c in 0..4 {
            g[4 * r + c] = (0..4)
                .map(|k| u[(r, k)] * C64::from_polar(1.0, -s[k].re * dt) * u[(c, k)].conj())
                .sum();
        }
    }
    Gate2(g)
}

/// Bonds `(0,1), (2,3), ...` are odd (1-based `(1,2), (3,4), ...`); the
/// remaining bonds are even.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    pub fn first_site(self) -> usize {
        match self {
            Parity::Odd => 0,
            Parity::Even => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateLayer {
    pub parity: Parity,
    /// `(left site, gate)` acting on sites `(site, site + 1)`.
    pub gates: Vec<(usize, Gate2)>,
}

impl GateLayer {
    pub fn bond_layer(h: &HamiltonianSpec, parity: Parity, dt: f64) -> Self {
        let gates = (parity.first_site()..h.n_sites - 1)
            .step_by(2)
            .map(|s| (s, bond_gate(&h.bonds[s], dt)))
            .collect();
        Self { parity, gates }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            parity: self.parity,
            gates: self.gates.iter().map(|(s, g)| (*s, g.adjoint())).collect(),
        }
    }
}

/// One layer group together with the physical time it advances.
#[derive(Clone, Debug, PartialEq)]
pub struct TimedStep {
    pub layers: Vec<GateLayer>,
    pub dt: f64,
}

impl TimedStep {
    pub fn gate_count(&self) -> usize {
        self.layers.iter().map(|l| l.gates.len()).sum()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            layers: self.layers.iter().rev().map(GateLayer::adjoint).collect(),
            dt: self.dt,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimedCircuit {
    pub n_sites: usize,
    pub steps: Vec<TimedStep>,
    pub total_time: f64,
}

impl TimedCircuit {
    pub fn empty(n_sites: usize) -> Self {
        Self {
            n_sites,
            steps: Vec::new(),
            total_time: 0.0,
        }
    }

    pub fn from_steps(n_sites: usize, steps: Vec<TimedStep>) -> Self {
        let total_time = steps.iter().map(|s| s.dt).sum();
        Self {
            n_sites,
            steps,
            total_time,
        }
    }

    pub fn gate_count(&self) -> usize {
        self.steps.iter().map(TimedStep::gate_count).sum()
    }

    /// `self` followed in time by `later`.
    pub fn then(mut self, later: TimedCircuit) -> Result<Self> {
        if later.n_sites != self.n_sites {
            return Err(Error::Shape(format!(
                "cannot join circuits on {} and {} sites",
                self.n_sites, later.n_sites
            )));
        }
        self.total_time += later.total_time;
        self.steps.extend(later.steps);
        Ok(self)
    }

    /// The inverse circuit: steps and layers reversed, gates conjugated.
    pub fn inverse(&self) -> Self {
        Self {
            n_sites: self.n_sites,
            steps: self.steps.iter().rev().map(TimedStep::adjoint).collect(),
            total_time: self.total_time,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.steps.iter().map(|s| s.dt).sum();
        if (sum - self.total_time).abs() > 1e-12 * self.total_time.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "step times sum to {sum}, total_time is {}",
                self.total_time
            )));
        }
        for (i, step) in self.steps.iter().enumerate() {
            if !(step.dt >= 0.0) {
                return Err(Error::InvalidArgument(format!("step {i} has dt = {}", step.dt)));
            }
            for layer in &step.layers {
                let mut last_end = None;
                for (s, g) in &layer.gates {
                    if *s + 1 >= self.n_sites {
                        return Err(Error::Shape(format!("gate on bond {s} outside the chain")));
                    }
                    if last_end.is_some_and(|e| *s <= e) {
                        return Err(Error::InvalidArgument(format!(
                            "overlapping or unsorted gates in step {i}"
                        )));
                    }
                    last_end = Some(*s + 1);
                    if g.unitarity_error() > 1e-12 {
                        return Err(Error::InvalidArgument(format!("non-unitary gate on bond {s}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Symmetric second-order step `odd(dt/2) even(dt) odd(dt/2)`.
pub fn second_order_step(h: &HamiltonianSpec, dt: f64) -> TimedStep {
    let half = GateLayer::bond_layer(h, Parity::Odd, dt / 2.0);
    let full = GateLayer::bond_layer(h, Parity::Even, dt);
    let layers = [half.clone(), full, half]
        .into_iter()
        .filter(|l| !l.gates.is_empty())
        .collect();
    TimedStep { layers, dt }
}

/// Suzuki weight `p = 1 / (4 - 4^{1/3})` of the fourth-order recursion.
pub fn suzuki_weight() -> f64 {
    1.0 / (4.0 - 4f64.powf(1.0 / 3.0))
}

/// Fourth-order step `S2(p dt)^2 S2((1 - 4p) dt) S2(p dt)^2`.
pub fn fourth_order_step(h: &HamiltonianSpec, dt: f64) -> TimedStep {
    let p = suzuki_weight();
    let outer = second_order_step(h, p * dt);
    let middle = second_order_step(h, (1.0 - 4.0 * p) * dt);
    let mut layers = Vec::with_capacity(5 * outer.layers.len());
    for sub in [&outer, &outer, &middle, &outer, &outer] {
        layers.extend(sub.layers.iter().cloned());
    }
    TimedStep { layers, dt }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrotterOrder {
    #[serde(rename = "2")]
    Second,
    #[serde(rename = "4")]
    Fourth,
}

impl TrotterOrder {
    pub fn from_int(order: u32) -> Result<Self> {
        match order {
            2 => Ok(Self::Second),
            4 => Ok(Self::Fourth),
            other => Err(Error::InvalidArgument(format!(
                "Trotter order must be 2 or 4, got {other}"
            ))),
        }
    }

    pub fn as_int(self) -> u32 {
        match self {
            Self::Second => 2,
            Self::Fourth => 4,
        }
    }

    pub fn step(self, h: &HamiltonianSpec, dt: f64) -> TimedStep {
        match self {
            Self::Second => second_order_step(h, dt),
            Self::Fourth => fourth_order_step(h, dt),
        }
    }
}

/// `S(t/k)^k` as `k` identical steps.
pub fn trotter_circuit(h: &HamiltonianSpec, t: f64, k: usize, order: TrotterOrder) -> Result<TimedCircuit> {
    if k == 0 {
        return Err(Error::InvalidArgument("number of Trotter steps must be positive".into()));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("evolution time must be finite and >= 0, got {t}")));
    }
    let step = order.step(h, t / k as f64);
    Ok(TimedCircuit {
        n_sites: h.n_sites,
        steps: vec![step; k],
        total_time: t,
    })
}
