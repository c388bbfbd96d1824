//! Effective information of a TPM under an intervention distribution, and
//! its decomposition into determinism, degeneracy and effectiveness.
//!
//! With intervention distribution `id` and effect distribution
//! `E = Σ_i id[i]·row_i`, effective information is the `id`-weighted mean of
//! `D(row_i || E)`, which is exactly the mutual information between an input
//! drawn from `id` and the output of the matrix. Determinism and degeneracy are
//! normalized by `log2(n)` of the full state space, so that
//! `ei = size · (determinism − degeneracy)` holds for every `id`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::real::{pairwise_sum, Real};
use crate::tpm::{entropy, kl_unchecked, Distribution, TransitionMatrix};

/// Full causal decomposition of one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CausalReport<T> {
    pub ei: T,
    /// Per-state effect information; states without intervention mass report 0.
    #[serde(rename = "effect_info")]
    pub effect_info_per_state: Vec<T>,
    pub determinism: T,
    pub degeneracy: T,
    #[serde(rename = "eff")]
    pub effectiveness: T,
    pub size: T,
    pub intervention_entropy: T,
}

fn check_len<T: Real>(t: &TransitionMatrix<T>, id: &Distribution<T>) -> Result<()> {
    if id.len() != t.n() {
        return Err(Error::LengthMismatch { expected: t.n(), actual: id.len() });
    }
    Ok(())
}

/// `E_D[j] = Σ_i id[i] · row_i[j]`.
pub fn effect_distribution<T: Real>(t: &TransitionMatrix<T>, id: &Distribution<T>) -> Result<Distribution<T>> {
    check_len(t, id)?;
    Ok(effect_unchecked(t, id))
}

fn effect_unchecked<T: Real>(t: &TransitionMatrix<T>, id: &Distribution<T>) -> Distribution<T> {
    let n = t.n();
    let mut out = vec![T::zero(); n];
    let mut column = vec![T::zero(); n];
    for (j, slot) in out.iter_mut().enumerate() {
        for (i, c) in column.iter_mut().enumerate() {
            *c = id[i] * t.get(i, j);
        }
        *slot = pairwise_sum(&column);
    }
    Distribution::from_vec_unchecked(out)
}

/// `D(row_i || E_D)` for a state inside the intervention support.
pub fn effect_information<T: Real>(t: &TransitionMatrix<T>, state: usize, id: &Distribution<T>) -> Result<T> {
    check_len(t, id)?;
    if state >= t.n() {
        return Err(Error::StateOutOfRange { index: state, n: t.n() });
    }
    if id[state] <= T::zero() {
        return Err(Error::StateOutsideSupport { state });
    }
    let ed = effect_unchecked(t, id);
    Ok(kl_unchecked(t.row(state), ed.as_slice()))
}

fn weighted_effect_info<T: Real>(t: &TransitionMatrix<T>, id: &Distribution<T>, ed: &Distribution<T>) -> Vec<T> {
    (0..t.n())
        .map(|i| if id[i] > T::zero() { kl_unchecked(t.row(i), ed.as_slice()) } else { T::zero() })
        .collect()
}

fn weighted_mean<T: Real>(id: &Distribution<T>, values: &[T]) -> T {
    let terms: Vec<T> = values.iter().enumerate().map(|(i, &v)| id[i] * v).collect();
    pairwise_sum(&terms)
}

/// Effective information in bits.
pub fn ei<T: Real>(t: &TransitionMatrix<T>, id: &Distribution<T>) -> Result<T> {
    check_len(t, id)?;
    let ed = effect_unchecked(t, id);
    Ok(weighted_mean(id, &weighted_effect_info(t, id, &ed)).max(T::zero()))
}

/// Effective information under the uniform (maximum-entropy) intervention distribution.
pub fn ei_uniform<T: Real>(t: &TransitionMatrix<T>) -> T {
    ei(t, &Distribution::uniform(t.n())).expect("uniform distribution has matching length")
}

/// `id`-weighted mean of `D(row_i || uniform) / log2(n)`; 0 when `n = 1`.
pub fn determinism<T: Real>(t: &TransitionMatrix<T>, id: &Distribution<T>) -> Result<T> {
    check_len(t, id)?;
    if t.n() == 1 {
        return Ok(T::zero());
    }
    let u = Distribution::<T>::uniform(t.n());
    let per_row: Vec<T> = (0..t.n())
        .map(|i| if id[i] > T::zero() { kl_unchecked(t.row(i), u.as_slice()) } else { T::zero() })
        .collect();
    Ok(weighted_mean(id, &per_row) / t.size_bits())
}

/// `D(E_D || uniform) / log2(n)`; 0 when `n = 1`.
pub fn degeneracy<T: Real>(t: &TransitionMatrix<T>, id: &Distribution<T>) -> Result<T> {
    check_len(t, id)?;
    if t.n() == 1 {
        return Ok(T::zero());
    }
    let ed = effect_unchecked(t, id);
    let u = Distribution::<T>::uniform(t.n());
    Ok(kl_unchecked(ed.as_slice(), u.as_slice()) / t.size_bits())
}

pub fn full_report<T: Real>(t: &TransitionMatrix<T>, id: &Distribution<T>) -> Result<CausalReport<T>> {
    check_len(t, id)?;
    let ed = effect_unchecked(t, id);
    let effect_info = weighted_effect_info(t, id, &ed);
    let ei = weighted_mean(id, &effect_info).max(T::zero());
    let determinism = determinism(t, id)?;
    let degeneracy = degeneracy(t, id)?;
    let effectiveness = if t.n() == 1 { T::zero() } else { determinism - degeneracy };
    Ok(CausalReport {
        ei,
        effect_info_per_state: effect_info,
        determinism,
        degeneracy,
        effectiveness,
        size: t.size_bits(),
        intervention_entropy: entropy(id),
    })
}

/// Mutual information of input `p` through channel `t`, `I(X;Y)`; identical to [`ei`].
pub fn mutual_information<T: Real>(t: &TransitionMatrix<T>, p: &Distribution<T>) -> Result<T> {
    ei(t, p)
}

impl<T: Real> CausalReport<T> {
    /// Conditional entropy of the intervention given the effect, `H(X) − ei`.
    pub fn noise_entropy(&self) -> T {
        (self.intervention_entropy - self.ei).max(T::zero())
    }

    pub fn to_f64(&self) -> CausalReport<f64> {
        let f = |x: T| x.to_f64().unwrap_or(f64::NAN);
        CausalReport {
            ei: f(self.ei),
            effect_info_per_state: self.effect_info_per_state.iter().map(|&x| f(x)).collect(),
            determinism: f(self.determinism),
            degeneracy: f(self.degeneracy),
            effectiveness: f(self.effectiveness),
            size: f(self.size),
            intervention_entropy: f(self.intervention_entropy),
        }
    }
}
