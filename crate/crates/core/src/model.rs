//! Macroscale model choices over a state space: coarse-grainings, exogenous
//! state restriction, and the warped intervention distribution each induces.
//!
//! A macro intervention on macrostate `J` is the average of the micro
//! interventions on its members, so the macro TPM row for `J` is the
//! unweighted mean of the member rows, with columns summed per macrostate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{full_report, CausalReport};
use crate::real::{count, pairwise_sum, Real};
use crate::tpm::{entropy, Distribution, TransitionMatrix};

/// Set partition stored as a restricted-growth string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    assignment: Vec<usize>,
    blocks: usize,
}

impl Partition {
    /// Accepts only canonical restricted-growth strings.
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::InvalidPartition("empty assignment".into()));
        }
        let mut next = 0;
        for (i, &a) in assignment.iter().enumerate() {
            if a > next {
                return Err(Error::InvalidPartition(format!(
                    "position {i} uses block {a} before block {next} appears (not restricted-growth)"
                )));
            }
            if a == next {
                next += 1;
            }
        }
        Ok(Self { assignment, blocks: next })
    }

    /// Canonicalizes arbitrary block labels into restricted-growth form.
    pub fn from_labels<L: PartialEq>(labels: &[L]) -> Result<Self> {
        let mut seen: Vec<&L> = Vec::new();
        let assignment = labels
            .iter()
            .map(|l| match seen.iter().position(|s| *s == l) {
                Some(k) => k,
                None => {
                    seen.push(l);
                    seen.len() - 1
                }
            })
            .collect();
        Self::new(assignment)
    }

    pub(crate) fn from_rgs_unchecked(assignment: Vec<usize>, blocks: usize) -> Self {
        Self { assignment, blocks }
    }

    pub fn singletons(n: usize) -> Self {
        Self { assignment: (0..n).collect(), blocks: n }
    }

    pub fn whole(n: usize) -> Self {
        Self { assignment: vec![0; n], blocks: 1 }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks
    }

    pub fn block_of(&self, i: usize) -> usize {
        self.assignment[i]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn is_singletons(&self) -> bool {
        self.blocks == self.assignment.len()
    }

    /// Member positions of each block, in block order.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.blocks];
        for (i, &b) in self.assignment.iter().enumerate() {
            out[b].push(i);
        }
        out
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Partition::new(v)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.assignment
    }
}

/// A macroscale model over a TPM's state space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelChoice {
    /// Sorted micro state indices kept in the model.
    pub endogenous: Vec<usize>,
    /// Partition over `endogenous`, in index order.
    pub partition: Partition,
    #[serde(default)]
    pub description: String,
}

impl ModelChoice {
    /// The micro model itself: every state endogenous, singleton blocks.
    pub fn micro(n: usize) -> Self {
        Self { endogenous: (0..n).collect(), partition: Partition::singletons(n), description: "micro".into() }
    }

    pub fn coarse_grain(partition: Partition) -> Self {
        Self { endogenous: (0..partition.len()).collect(), partition, description: String::new() }
    }

    pub fn restricted(endogenous: Vec<usize>, partition: Partition) -> Self {
        Self { endogenous, partition, description: String::new() }
    }

    pub fn with_description(mut self, d: impl Into<String>) -> Self {
        self.description = d.into();
        self
    }

    pub fn num_macrostates(&self) -> usize {
        self.partition.num_blocks()
    }

    pub fn is_micro(&self, n: usize) -> bool {
        self.endogenous.len() == n && self.partition.is_singletons()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.endogenous.is_empty() {
            return Err(Error::EmptyEndogenous);
        }
        if let Some(&bad) = self.endogenous.iter().find(|&&i| i >= n) {
            return Err(Error::StateOutOfRange { index: bad, n });
        }
        if self.endogenous.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidChoice("endogenous states must be strictly increasing".into()));
        }
        if self.partition.len() != self.endogenous.len() {
            return Err(Error::InvalidChoice(format!(
                "partition covers {} states but {} are endogenous",
                self.partition.len(),
                self.endogenous.len()
            )));
        }
        if self.num_macrostates() >= n && !self.is_micro(n) {
            return Err(Error::InvalidChoice("macro state space must be smaller than the micro one".into()));
        }
        Ok(())
    }

    /// Micro members of each macrostate.
    pub fn macro_members(&self) -> Vec<Vec<usize>> {
        self.partition.blocks().into_iter().map(|b| b.into_iter().map(|k| self.endogenous[k]).collect()).collect()
    }

    /// `Some(macrostate)` for every endogenous micro state, `None` for exogenous ones.
    pub fn micro_to_macro(&self, n: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n];
        for (k, &i) in self.endogenous.iter().enumerate() {
            out[i] = Some(self.partition.block_of(k));
        }
        out
    }
}

/// Micro-space intervention distribution implied by a choice: mass `1/m` per
/// macrostate split evenly over its members; exogenous states get 0.
pub fn warped_intervention<T: Real>(c: &ModelChoice, n: usize) -> Result<Distribution<T>> {
    c.validate(n)?;
    let m = count::<T>(c.num_macrostates());
    let mut p = vec![T::zero(); n];
    for members in c.macro_members() {
        let share = T::one() / (m * count::<T>(members.len()));
        for i in members {
            p[i] = share;
        }
    }
    Ok(Distribution::from_vec_unchecked(p))
}

/// Aggregated, leak-checked rows: `rows[i][K] = Σ_{j∈K} row_i[j]` for every endogenous `i`.
fn aggregate_rows<T: Real>(t: &TransitionMatrix<T>, c: &ModelChoice, leak_tolerance: T) -> Result<Vec<Vec<T>>> {
    c.validate(t.n())?;
    let map = c.micro_to_macro(t.n());
    let m = c.num_macrostates();
    c.endogenous
        .iter()
        .map(|&i| {
            let mut agg = vec![T::zero(); m];
            let mut leaked = T::zero();
            for (j, &p) in t.row(i).iter().enumerate() {
                match map[j] {
                    Some(k) => agg[k] = agg[k] + p,
                    None => leaked = leaked + p,
                }
            }
            if leaked > leak_tolerance {
                return Err(Error::MassEscapesEndogenous { row: i, leaked: leaked.to_f64().unwrap_or(f64::NAN) });
            }
            if leaked > T::zero() {
                let kept = T::one() - leaked;
                agg.iter_mut().for_each(|x| *x = *x / kept);
            }
            Ok(agg)
        })
        .collect()
}

/// Macro TPM with the default leak tolerance (the scalar's stochastic tolerance).
pub fn macro_tpm<T: Real>(t: &TransitionMatrix<T>, c: &ModelChoice) -> Result<TransitionMatrix<T>> {
    macro_tpm_with_tolerance(t, c, T::stochastic_tolerance())
}

/// Macro TPM; endogenous rows may leak at most `leak_tolerance` into exogenous
/// states, and any tolerated leak is renormalized away.
pub fn macro_tpm_with_tolerance<T: Real>(
    t: &TransitionMatrix<T>,
    c: &ModelChoice,
    leak_tolerance: T,
) -> Result<TransitionMatrix<T>> {
    let agg = aggregate_rows(t, c, leak_tolerance)?;
    let m = c.num_macrostates();
    let mut data = Vec::with_capacity(m * m);
    for block in c.partition.blocks() {
        let size = count::<T>(block.len());
        for k in 0..m {
            let column: Vec<T> = block.iter().map(|&r| agg[r][k]).collect();
            data.push(pairwise_sum(&column) / size);
        }
    }
    Ok(TransitionMatrix::from_flat_unchecked(m, data))
}

/// Causal report of the macro model under a uniform macro intervention.
pub fn macro_ei<T: Real>(t: &TransitionMatrix<T>, c: &ModelChoice) -> Result<CausalReport<T>> {
    macro_ei_with_tolerance(t, c, T::stochastic_tolerance())
}

pub fn macro_ei_with_tolerance<T: Real>(
    t: &TransitionMatrix<T>,
    c: &ModelChoice,
    leak_tolerance: T,
) -> Result<CausalReport<T>> {
    let macro_t = macro_tpm_with_tolerance(t, c, leak_tolerance)?;
    full_report(&macro_t, &Distribution::uniform(macro_t.n()))
}

/// Macro EI computed in micro space: inputs drawn from the warped intervention
/// distribution, inputs and outputs aggregated by the partition, and the
/// mutual information taken from joint entropies `H(X) + H(Y) − H(X,Y)`.
pub fn macro_ei_via_warped<T: Real>(t: &TransitionMatrix<T>, c: &ModelChoice) -> Result<T> {
    let agg = aggregate_rows(t, c, T::stochastic_tolerance())?;
    let warped = warped_intervention::<T>(c, t.n())?;
    let m = c.num_macrostates();
    let mut joint = vec![T::zero(); m * m];
    for (k, &i) in c.endogenous.iter().enumerate() {
        let block = c.partition.block_of(k);
        for (col, &p) in agg[k].iter().enumerate() {
            joint[block * m + col] = joint[block * m + col] + warped[i] * p;
        }
    }
    let px: Vec<T> = joint.chunks_exact(m).map(|r| pairwise_sum(r)).collect();
    let py: Vec<T> = (0..m).map(|col| pairwise_sum(&joint.iter().skip(col).step_by(m).copied().collect::<Vec<_>>())).collect();
    let h = |v: Vec<T>| entropy(&Distribution::from_vec_unchecked(v));
    Ok((h(px) + h(py) - h(joint)).max(T::zero()))
}

/// `n − 1` states mixing uniformly among themselves plus one absorbing state,
/// with the two-macrostate grouping that separates them.
pub fn generalized_case<T: Real>(n: usize) -> Result<(TransitionMatrix<T>, ModelChoice)> {
    if n < 3 {
        return Err(Error::TooFewStates(n));
    }
    let p = T::one() / count::<T>(n - 1);
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            data.push(match (i == n - 1, j == n - 1) {
                (false, false) => p,
                (true, true) => T::one(),
                _ => T::zero(),
            });
        }
    }
    let mut rgs = vec![0; n];
    rgs[n - 1] = 1;
    let choice = ModelChoice::coarse_grain(Partition::from_rgs_unchecked(rgs, 2))
        .with_description(format!("states 0..{} | state {}", n - 2, n - 1));
    Ok((TransitionMatrix::from_flat_unchecked(n, data), choice))
}
