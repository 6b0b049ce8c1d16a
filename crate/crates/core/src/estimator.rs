//! Emulated measurement: exact expectations or shot-sampled estimates of
//! product observables, and their multiproduct combination.

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mpf::CoefficientSet;
use crate::mps::{MatrixProductState, ObservableSpec};
use crate::tensor::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shots {
    Exact,
    Count(u64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub value: f64,
    pub std_error: f64,
    pub shots: Shots,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinedEstimate {
    pub value: f64,
    pub std_error: f64,
    /// `sum |c_i|`.
    pub amplification: f64,
}

/// Joint outcome distribution of measuring every factor of `obs` in its
/// eigenbasis: `(product of eigenvalues, probability)` per outcome.
pub fn outcome_distribution(psi: &MatrixProductState, obs: &ObservableSpec) -> Result<Vec<(f64, f64)>> {
    obs.validate(psi.n_sites())?;
    let m = obs.factors.len();
    if m > 16 {
        return Err(Error::InvalidArgument(format!("sampling supports at most 16 factors, got {m}")));
    }
    let spectral: Vec<[(f64, [C64; 4]); 2]> = obs.factors.iter().map(|(_, op)| eigen_projectors(&op.matrix())).collect();
    let mut out = Vec::with_capacity(1 << m);
    for pattern in 0..1usize << m {
        let mut value = 1.0;
        let mats: Vec<(usize, [C64; 4])> = obs
            .factors
            .iter()
            .enumerate()
            .map(|(f, (site, _))| {
                let (lambda, proj) = spectral[f][pattern >> f & 1];
                value *= lambda;
                (*site, proj)
            })
            .collect();
        let p = psi.product_expectation(&mats)?.re.max(0.0);
        out.push((value, p));
    }
    let total: f64 = out.iter().map(|o| o.1).sum();
    out.iter_mut().for_each(|o| o.1 /= total);
    Ok(out)
}

fn eigen_projectors(m: &[C64; 4]) -> [(f64, [C64; 4]); 2] {
    let mat = Mat::<C64>::from_fn(2, 2, |r, c| m[2 * r + c]);
    let eig = mat.self_adjoint_eigen(Side::Lower).expect("2x2 Hermitian eigendecomposition");
    let (u, s) = (eig.U(), eig.S().column_vector());
    let proj = |k: usize| [0, 1, 2, 3].map(|i| u[(i / 2, k)] * u[(i % 2, k)].conj());
    [(s[0].re, proj(0)), (s[1].re, proj(1))]
}

/// Exact or shot-sampled expectation. The random stream is derived from
/// `seed` and the observable, so results do not depend on scheduling.
pub fn estimate(psi: &MatrixProductState, obs: &ObservableSpec, shots: Shots, seed: u64) -> Result<EstimateResult> {
    estimate_stream(psi, obs, shots, seed, stream_id(&obs.label()))
}

pub fn estimate_stream(
    psi: &MatrixProductState,
    obs: &ObservableSpec,
    shots: Shots,
    seed: u64,
    stream: u64,
) -> Result<EstimateResult> {
    let n = match shots {
        Shots::Exact => {
            return Ok(EstimateResult {
                value: psi.expectation(obs)?,
                std_error: 0.0,
                shots,
                seed,
            })
        }
        Shots::Count(0) => return Err(Error::InvalidArgument("shots must be >= 1".into())),
        Shots::Count(n) => n,
    };
    let dist = outcome_distribution(psi, obs)?;
    let mut cdf = Vec::with_capacity(dist.len());
    let mut acc = 0.0;
    for (_, p) in &dist {
        acc += p;
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        let u: f64 = rng.random::<f64>() * acc;
        let idx = cdf.partition_point(|&c| c <= u).min(dist.len() - 1);
        let v = dist[idx].0;
        sum += v;
        sum_sq += v * v;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 { ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    Ok(EstimateResult {
        value: mean,
        std_error: (var / nf).sqrt(),
        shots,
        seed,
    })
}

fn stream_id(label: &str) -> u64 {
    // FNV-1a
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// `sum c_i value_i` with independent errors added in quadrature.
pub fn mpf_combine(coeffs: &CoefficientSet, estimates: &[EstimateResult]) -> Result<CombinedEstimate> {
    if coeffs.c.len() != estimates.len() {
        return Err(Error::Shape(format!(
            "{} coefficients for {} estimates",
            coeffs.c.len(),
            estimates.len()
        )));
    }
    let value = coeffs.c.iter().zip(estimates).map(|(c, e)| c * e.value).sum();
    let var: f64 = coeffs.c.iter().zip(estimates).map(|(c, e)| (c * e.std_error).powi(2)).sum();
    Ok(CombinedEstimate {
        value,
        std_error: var.sqrt(),
        amplification: coeffs.c.iter().map(|c| c.abs()).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mps::SiteOperator;

    #[test]
    fn deterministic_outcome() {
        let psi = MatrixProductState::product_state("1111").unwrap();
        let e = estimate(&psi, &ObservableSpec::z(0), Shots::Count(1), 3).unwrap();
        assert_eq!(e.value, -1.0);
        assert_eq!(e.std_error, 0.0);
        let many = estimate(&psi, &ObservableSpec::zz(1), Shots::Count(100), 3).unwrap();
        assert_eq!((many.value, many.std_error), (1.0, 0.0));
        assert!(estimate(&psi, &ObservableSpec::z(0), Shots::Count(0), 3).is_err());
    }

    #[test]
    fn exact_mode_is_expectation() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = MatrixProductState::product_of(&[[C64::new(s, 0.0), C64::new(s, 0.0)], [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]]).unwrap();
        let obs = ObservableSpec::new(vec![(0, SiteOperator::X), (1, SiteOperator::Z)]).unwrap();
        let e = estimate(&psi, &obs, Shots::Exact, 0).unwrap();
        assert!((e.value - psi.expectation(&obs).unwrap()).abs() < 1e-12);
        assert_eq!(e.std_error, 0.0);
        let dist = outcome_distribution(&psi, &obs).unwrap();
        let mean: f64 = dist.iter().map(|(v, p)| v * p).sum();
        assert!((mean - e.value).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_reproducible() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = MatrixProductState::product_of(&[[C64::new(s, 0.0), C64::new(s, 0.0)]; 3]).unwrap();
        let a = estimate(&psi, &ObservableSpec::z(1), Shots::Count(1000), 9).unwrap();
        let b = estimate(&psi, &ObservableSpec::z(1), Shots::Count(1000), 9).unwrap();
        assert_eq!(a, b);
        assert!((a.std_error - (1.0f64 / 1000.0).sqrt()).abs() < 2e-3);
    }

    #[test]
    fn combine_algebra() {
        let e = |v, s| EstimateResult { value: v, std_error: s, shots: Shots::Count(10), seed: 0 };
        let one = mpf_combine(&CoefficientSet::from_vec(vec![1.0]), &[e(0.3, 0.1)]).unwrap();
        assert_eq!((one.value, one.std_error, one.amplification), (0.3, 0.1, 1.0));
        let half = mpf_combine(&CoefficientSet::from_vec(vec![0.5, 0.5]), &[e(0.2, 0.1), e(0.4, 0.1)]).unwrap();
        assert!((half.std_error - 0.1 / 2f64.sqrt()).abs() < 1e-15);
        assert!((half.value - 0.3).abs() < 1e-15);
        assert!(mpf_combine(&CoefficientSet::from_vec(vec![1.0]), &[]).is_err());
    }
}
