//! Dense statevector simulation for short chains; site 0 is the most
//! significant bit of the amplitude index.

use crate::error::{Error, Result};
use crate::mps::{MatrixProductState, ObservableSpec};
use crate::spinchain::{Gate2, TimedCircuit};
use crate::tensor::{C64, ONE, ZERO};

/// Longest chain the dense path accepts.
pub const DENSE_MAX_SITES: usize = 24;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_sites: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn product_state(bits: &str) -> Result<Self> {
        let n = bits.len();
        if n == 0 || n > DENSE_MAX_SITES {
            return Err(Error::InvalidArgument(format!("dense path supports 1..={DENSE_MAX_SITES} sites, got {n}")));
        }
        let mut index = 0usize;
        for c in bits.chars() {
            index <<= 1;
            match c {
                '0' => {}
                '1' => index |= 1,
                other => return Err(Error::InvalidArgument(format!("invalid bit {other:?}"))),
            }
        }
        let mut amps = vec![ZERO; 1 << n];
        amps[index] = ONE;
        Ok(Self { n_sites: n, amps })
    }

    pub fn from_amplitudes(n_sites: usize, amps: Vec<C64>) -> Result<Self> {
        if n_sites == 0 || n_sites > DENSE_MAX_SITES || amps.len() != 1 << n_sites {
            return Err(Error::Shape(format!("{} amplitudes for {n_sites} sites", amps.len())));
        }
        Ok(Self { n_sites, amps })
    }

    pub fn from_mps(psi: &MatrixProductState) -> Result<Self> {
        Self::from_amplitudes(psi.n_sites(), psi.to_amplitudes()?)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn apply_gate(&mut self, site: usize, gate: &Gate2) {
        assert!(site + 1 < self.n_sites, "gate on bond {site} outside the chain");
        let hi = 1usize << (self.n_sites - 1 - site);
        let lo = hi >> 1;
        let g = &gate.0;
        for base in 0..self.amps.len() {
            if base & (hi | lo) != 0 {
                continue;
            }
            let idx = [base, base | lo, base | hi, base | hi | lo];
            let v = idx.map(|i| self.amps[i]);
            for (r, &i) in idx.iter().enumerate() {
                self.amps[i] = (0..4).map(|c| g[4 * r + c] * v[c]).sum();
            }
        }
    }

    pub fn apply_circuit(&mut self, circuit: &TimedCircuit) -> Result<()> {
        if circuit.n_sites != self.n_sites {
            return Err(Error::Shape(format!(
                "circuit on {} sites applied to a {}-site state",
                circuit.n_sites, self.n_sites
            )));
        }
        for step in &circuit.steps {
            for layer in &step.layers {
                for (s, g) in &layer.gates {
                    self.apply_gate(*s, g);
                }
            }
        }
        Ok(())
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &StateVector) -> Result<C64> {
        if self.n_sites != other.n_sites {
            return Err(Error::Shape(format!("overlap of {} and {} sites", self.n_sites, other.n_sites)));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn expectation(&self, obs: &ObservableSpec) -> Result<f64> {
        obs.validate(self.n_sites)?;
        let mut applied = self.clone();
        for (s, op) in &obs.factors {
            applied.apply_single(*s, &op.matrix());
        }
        Ok((self.overlap(&applied)? / self.norm_sqr()).re)
    }

    pub fn apply_single(&mut self, site: usize, m: &[C64; 4]) {
        let bit = 1usize << (self.n_sites - 1 - site);
        for base in 0..self.amps.len() {
            if base & bit != 0 {
                continue;
            }
            let (a, b) = (self.amps[base], self.amps[base | bit]);
            self.amps[base] = m[0] * a + m[1] * b;
            self.amps[base | bit] = m[2] * a + m[3] * b;
        }
    }
}

/// `<psi0| A^dagger B |psi0>`, the dense counterpart of an interleaved F.
pub fn sandwich_dense(psi0: &StateVector, left: &TimedCircuit, right: &TimedCircuit) -> Result<C64> {
    let mut a = psi0.clone();
    a.apply_circuit(left)?;
    let mut b = psi0.clone();
    b.apply_circuit(right)?;
    a.overlap(&b)
}
