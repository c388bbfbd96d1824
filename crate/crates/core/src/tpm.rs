//! Transition probability matrices, distributions, and the information
//! primitives built on them. All logarithms are base 2.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{count, pairwise_sum, xlog2_ratio, Real};

/// A probability vector over a finite state set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distribution<T> {
    p: Vec<T>,
}

impl<T: Real> Distribution<T> {
    /// Validates entries in `[0, 1]` and a total within the scalar's stochastic tolerance.
    pub fn new(p: Vec<T>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Empty);
        }
        for (index, &x) in p.iter().enumerate() {
            if !x.is_finite() || x < T::zero() || x > T::one() + T::stochastic_tolerance() {
                return Err(Error::InvalidProbability { index, value: x.to_f64().unwrap_or(f64::NAN) });
            }
        }
        let sum = pairwise_sum(&p);
        if (sum - T::one()).abs() > T::stochastic_tolerance() {
            return Err(Error::DistributionSum { sum: sum.to_f64().unwrap_or(f64::NAN) });
        }
        Ok(Self { p })
    }

    pub(crate) fn from_vec_unchecked(p: Vec<T>) -> Self {
        Self { p }
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution over zero states");
        Self { p: vec![T::one() / count::<T>(n); n] }
    }

    pub fn delta(n: usize, state: usize) -> Self {
        assert!(state < n, "delta state out of range");
        let mut p = vec![T::zero(); n];
        p[state] = T::one();
        Self { p }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.p
    }

    pub fn into_vec(self) -> Vec<T> {
        self.p
    }

    /// Number of states carrying positive mass.
    pub fn support_size(&self) -> usize {
        self.p.iter().filter(|&&x| x > T::zero()).count()
    }

    pub fn is_uniform(&self) -> bool {
        let u = T::one() / count::<T>(self.p.len());
        self.p.iter().all(|&x| (x - u).abs() <= T::comparison_tolerance())
    }

    pub fn to_f64(&self) -> Distribution<f64> {
        Distribution { p: self.p.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect() }
    }
}

impl<T> std::ops::Index<usize> for Distribution<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.p[i]
    }
}

/// Square row-stochastic matrix: `row(i)[j] = p(s_j at t+1 | do(s_i) at t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix<T> {
    n: usize,
    data: Vec<T>,
    labels: Option<Vec<String>>,
}

impl<T: Real> TransitionMatrix<T> {
    /// Validates a square, finite, non-negative, row-stochastic matrix.
    ///
    /// Rows within tolerance of 1 are stored verbatim; nothing is renormalized.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        let mut data = Vec::with_capacity(n * n);
        for (row, r) in rows.into_iter().enumerate() {
            if r.len() != n {
                return Err(Error::NonSquare { row, len: r.len(), expected: n });
            }
            for (col, &x) in r.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
                if x < T::zero() {
                    return Err(Error::NegativeEntry { row, col, value: x.to_f64().unwrap_or(f64::NAN) });
                }
            }
            let sum = pairwise_sum(&r);
            if (sum - T::one()).abs() > T::stochastic_tolerance() {
                return Err(Error::RowSumOutOfTolerance { row, sum: sum.to_f64().unwrap_or(f64::NAN) });
            }
            data.extend(r);
        }
        Ok(Self { n, data, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, actual: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn identity(n: usize) -> Self {
        Self::permutation(&(0..n).collect::<Vec<_>>())
    }

    /// Deterministic matrix sending state `i` to `targets[i]`.
    pub fn permutation(targets: &[usize]) -> Self {
        let n = targets.len();
        let mut data = vec![T::zero(); n * n];
        for (i, &j) in targets.iter().enumerate() {
            data[i * n + j] = T::one();
        }
        Self { n, data, labels: None }
    }

    /// Every row uniform: transitions carry no constraint.
    pub fn uniform(n: usize) -> Self {
        Self { n, data: vec![T::one() / count::<T>(n); n * n], labels: None }
    }

    pub(crate) fn from_flat_unchecked(n: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, data, labels: None }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.n)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.rows().map(<[T]>::to_vec).collect()
    }

    pub fn column_sums(&self) -> Vec<T> {
        (0..self.n).map(|j| pairwise_sum(&(0..self.n).map(|i| self.get(i, j)).collect::<Vec<_>>())).collect()
    }

    /// Size of the state space in bits.
    pub fn size_bits(&self) -> T {
        count::<T>(self.n).log2()
    }

    pub fn is_deterministic(&self) -> bool {
        self.rows().all(|r| r.iter().all(|&x| x == T::zero() || x == T::one()))
    }

    pub fn is_permutation(&self) -> bool {
        if !self.is_deterministic() {
            return false;
        }
        let mut hit = vec![false; self.n];
        for r in self.rows() {
            let j = r.iter().position(|&x| x == T::one()).expect("deterministic row has a one");
            if hit[j] {
                return false;
            }
            hit[j] = true;
        }
        true
    }

    pub fn cast<U: Real>(&self) -> TransitionMatrix<U> {
        TransitionMatrix {
            n: self.n,
            data: self.data.iter().map(|x| U::from_f64(x.to_f64().unwrap_or(f64::NAN)).unwrap_or(U::nan())).collect(),
            labels: self.labels.clone(),
        }
    }
}

/// Shannon entropy in bits.
pub fn entropy<T: Real>(d: &Distribution<T>) -> T {
    let terms: Vec<T> = d.as_slice().iter().map(|&p| if p > T::zero() { -p * p.log2() } else { T::zero() }).collect();
    pairwise_sum(&terms).max(T::zero())
}

/// Kullback-Leibler divergence `D(p || q)` in bits.
pub fn kl_divergence<T: Real>(p: &Distribution<T>, q: &Distribution<T>) -> Result<T> {
    kl_slices(p.as_slice(), q.as_slice())
}

pub(crate) fn kl_slices<T: Real>(p: &[T], q: &[T]) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch { expected: p.len(), actual: q.len() });
    }
    if let Some(index) = p.iter().zip(q).position(|(&a, &b)| a > T::zero() && b <= T::zero()) {
        return Err(Error::AbsoluteContinuityViolation { index });
    }
    Ok(kl_unchecked(p, q))
}

/// KL where absolute continuity is structurally guaranteed by the caller.
pub(crate) fn kl_unchecked<T: Real>(p: &[T], q: &[T]) -> T {
    let terms: Vec<T> = p.iter().zip(q).map(|(&a, &b)| xlog2_ratio(a, b)).collect();
    pairwise_sum(&terms).max(T::zero())
}

/// Earth mover's distance under the unit ground metric, i.e. total variation.
pub fn emd<T: Real>(p: &Distribution<T>, q: &Distribution<T>) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch { expected: p.len(), actual: q.len() });
    }
    let diffs: Vec<T> = p.as_slice().iter().zip(q.as_slice()).map(|(&a, &b)| (a - b).abs()).collect();
    Ok((pairwise_sum(&diffs) / (T::one() + T::one())).min(T::one()))
}
