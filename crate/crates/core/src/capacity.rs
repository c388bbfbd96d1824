//! Channel capacity of a TPM read as a channel matrix, causal capacity over a
//! set of model choices, and a micro/macro channel-coding simulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{ei, ei_uniform, mutual_information};
use crate::model::{macro_ei, warped_intervention, ModelChoice};
use crate::real::{count, lit, pairwise_sum, Real};
use crate::tpm::{kl_unchecked, Distribution, TransitionMatrix};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityResult<T> {
    pub capacity: T,
    pub optimal_input: Distribution<T>,
    /// Upper bound on capacity certified at the final iterate.
    pub upper_bound: T,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Real> CapacityResult<T> {
    pub fn to_f64(&self) -> CapacityResult<f64> {
        let f = |x: T| x.to_f64().unwrap_or(f64::NAN);
        CapacityResult {
            capacity: f(self.capacity),
            optimal_input: self.optimal_input.to_f64(),
            upper_bound: f(self.upper_bound),
            iterations: self.iterations,
            converged: self.converged,
        }
    }
}

fn output_distribution<T: Real>(t: &TransitionMatrix<T>, p: &[T]) -> Vec<T> {
    let n = t.n();
    (0..n)
        .map(|j| pairwise_sum(&(0..n).map(|i| p[i] * t.get(i, j)).collect::<Vec<_>>()))
        .collect()
}

/// `D(row_i || q)` for every input; rows reaching outputs that `q` cannot are
/// given an infinite divergence.
fn divergences<T: Real>(t: &TransitionMatrix<T>, q: &[T]) -> Vec<T> {
    t.rows()
        .map(|row| {
            if row.iter().zip(q).any(|(&r, &qq)| r > T::zero() && qq <= T::zero()) {
                T::infinity()
            } else {
                kl_unchecked(row, q)
            }
        })
        .collect()
}

/// Blahut-Arimoto alternating maximization from the uniform input. Stops
/// when the gap between the upper bound `max_i D(row_i || q)` and the lower
/// bound `log2 Σ_i p_i 2^{D(row_i || q)}` falls below `tol`.
pub fn blahut_arimoto<T: Real>(t: &TransitionMatrix<T>, tol: T, max_iter: usize) -> Result<CapacityResult<T>> {
    if tol.is_nan() || tol <= T::zero() {
        return Err(Error::InvalidChoice("capacity tolerance must be positive".into()));
    }
    let n = t.n();
    let mut p = vec![T::one() / count::<T>(n); n];
    let mut gap = T::infinity();
    let mut upper = T::infinity();
    let mut iterations = 0;
    while iterations < max_iter {
        let q = output_distribution(t, &p);
        let d = divergences(t, &q);
        upper = d.iter().copied().fold(T::neg_infinity(), T::max);
        // weights 2^(D_i - upper) avoid overflow; zero-mass inputs keep zero mass
        let weights: Vec<T> = p.iter().zip(&d).map(|(&pi, &di)| pi * (di - upper).exp2()).collect();
        let total = pairwise_sum(&weights);
        let lower = total.log2() + upper;
        gap = upper - lower;
        if gap < tol {
            break;
        }
        p = weights.iter().map(|&w| w / total).collect();
        iterations += 1;
    }
    let input = Distribution::from_vec_unchecked(p);
    let capacity = mutual_information(t, &input)?;
    let result = CapacityResult { capacity, optimal_input: input, upper_bound: upper, iterations, converged: gap < tol };
    if result.converged {
        Ok(result)
    } else {
        Err(Error::NotConverged { iterations, gap: gap.to_f64().unwrap_or(f64::NAN), best: result.to_f64() })
    }
}

const BATCH: usize = 256;

fn derive_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Seeded random search over input distributions (uniform Dirichlet draws),
/// refined by a local mass-transfer hill climb. Batches are evaluated in
/// parallel with per-batch seeds; the result does not depend on thread count.
pub fn capacity_random_search<T: Real>(t: &TransitionMatrix<T>, samples: usize, seed: u64) -> CapacityResult<T> {
    let n = t.n();
    let samples = samples.max(1);
    let batches = samples.div_ceil(BATCH);
    let best_per_batch: Vec<(T, Vec<T>)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, b as u64));
            let draws = BATCH.min(samples - b * BATCH);
            let mut best: Option<(T, Vec<T>)> = None;
            for _ in 0..draws {
                let raw: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                let total: f64 = raw.iter().sum();
                let p: Vec<T> = raw.iter().map(|&x| lit(x / total)).collect();
                let value = mutual_information(t, &Distribution::from_vec_unchecked(p.clone())).unwrap_or(T::zero());
                if best.as_ref().is_none_or(|(v, _)| value > *v) {
                    best = Some((value, p));
                }
            }
            best.expect("every batch draws at least once")
        })
        .collect();
    let mut best = (ei_uniform(t), vec![T::one() / count::<T>(n); n]);
    for candidate in best_per_batch {
        if candidate.0 > best.0 {
            best = candidate;
        }
    }
    let (value, input, steps) = hill_climb(t, best.1, best.0);
    let upper = divergences(t, &output_distribution(t, input.as_slice())).into_iter().fold(T::neg_infinity(), T::max);
    CapacityResult { capacity: value, optimal_input: input, upper_bound: upper, iterations: samples + steps, converged: true }
}

/// Moves mass from the input with the smallest marginal gain to the one with
/// the largest, halving the step whenever a move fails to improve.
fn hill_climb<T: Real>(t: &TransitionMatrix<T>, mut p: Vec<T>, mut value: T) -> (T, Distribution<T>, usize) {
    let mut step: T = lit(0.25);
    let floor: T = lit(1e-12);
    let mut steps = 0;
    while step > floor && steps < 100_000 {
        steps += 1;
        let d = divergences(t, &output_distribution(t, &p));
        let (hi, _) = d.iter().enumerate().fold((0, T::neg_infinity()), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let lo = d
            .iter()
            .enumerate()
            .filter(|(i, _)| p[*i] > T::zero() && *i != hi)
            .fold(None, |acc: Option<(usize, T)>, (i, &v)| match acc {
                Some((_, best)) if best <= v => acc,
                _ => Some((i, v)),
            });
        let Some((lo, _)) = lo else { break };
        let delta = step.min(p[lo]);
        let mut trial = p.clone();
        trial[lo] = trial[lo] - delta;
        trial[hi] = trial[hi] + delta;
        let trial_value = mutual_information(t, &Distribution::from_vec_unchecked(trial.clone())).unwrap_or(T::zero());
        if trial_value > value {
            p = trial;
            value = trial_value;
        } else {
            step = step / (T::one() + T::one());
        }
    }
    (value, Distribution::from_vec_unchecked(p), steps)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CausalCapacity<T> {
    pub cc: T,
    pub choice: ModelChoice,
    pub warped: Distribution<T>,
}

/// Maximum macro EI over the supplied choices; ties keep the earliest choice.
pub fn causal_capacity<T: Real>(t: &TransitionMatrix<T>, choices: &[ModelChoice]) -> Result<CausalCapacity<T>> {
    let mut best: Option<(T, &ModelChoice)> = None;
    for c in choices {
        let value = macro_ei(t, c)?.ei;
        if best.is_none_or(|(v, _)| value > v) {
            best = Some((value, c));
        }
    }
    let (cc, choice) = best.ok_or_else(|| Error::InvalidChoice("no model choices supplied".into()))?;
    Ok(CausalCapacity { cc, choice: choice.clone(), warped: warped_intervention(choice, t.n())? })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmergenceGap<T> {
    pub micro_ei: T,
    pub cc: T,
    pub capacity: T,
    pub emergence: T,
    pub capacity_gap: T,
    pub best_choice: ModelChoice,
}

pub const DEFAULT_CAPACITY_TOL: f64 = 1e-12;
pub const DEFAULT_CAPACITY_MAX_ITER: usize = 1_000_000;

/// Micro EI, causal capacity (micro model always included) and channel capacity.
pub fn emergence_gap<T: Real>(t: &TransitionMatrix<T>, choices: &[ModelChoice]) -> Result<EmergenceGap<T>> {
    let micro = ModelChoice::micro(t.n());
    let mut all = vec![micro];
    all.extend(choices.iter().cloned());
    let cc = causal_capacity(t, &all)?;
    let micro_ei = ei_uniform(t);
    let tol = lit::<T>(DEFAULT_CAPACITY_TOL).max(T::epsilon() * lit(16.0));
    let capacity = blahut_arimoto(t, tol, DEFAULT_CAPACITY_MAX_ITER)?.capacity;
    let clamp = |x: T| if x < T::zero() && x > -T::comparison_tolerance() { T::zero() } else { x };
    Ok(EmergenceGap {
        micro_ei,
        cc: cc.cc,
        capacity,
        emergence: clamp(cc.cc - micro_ei),
        capacity_gap: clamp(capacity - cc.cc),
        best_choice: cc.choice,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodingResult {
    pub rate: f64,
    pub symbol_error_rate: f64,
    pub transitions_used: usize,
    pub bits_per_symbol: usize,
    pub symbol_errors: usize,
}

/// Code alphabet of a choice: the first `2^k` macrostates, `k = floor(log2 m)`,
/// each sent as its lowest-index member.
struct Code {
    bits: usize,
    representatives: Vec<usize>,
    decode: Vec<Option<usize>>,
}

impl Code {
    fn new(c: &ModelChoice, n: usize) -> Result<Self> {
        c.validate(n)?;
        let m = c.num_macrostates();
        let bits = usize::BITS as usize - 1 - m.leading_zeros() as usize;
        if bits == 0 {
            return Err(Error::DegenerateCode(format!("{m} macrostate(s) cannot carry a bit")));
        }
        let representatives = c.macro_members().iter().take(1 << bits).map(|b| b[0]).collect();
        Ok(Self { bits, representatives, decode: c.micro_to_macro(n) })
    }
}

/// Sends `message` through `t` with the code defined by `code` (use
/// [`ModelChoice::micro`] for the one-state-per-symbol micro code). Bits are
/// read most significant first within each symbol.
pub fn simulate_coding<T: Real>(t: &TransitionMatrix<T>, code: &ModelChoice, message: &[bool], seed: u64) -> Result<CodingResult> {
    let code = Code::new(code, t.n())?;
    if !message.len().is_multiple_of(code.bits) {
        return Err(Error::IndivisibleMessage { len: message.len(), bits_per_symbol: code.bits });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errors = 0;
    let symbols = message.len() / code.bits;
    for chunk in message.chunks_exact(code.bits) {
        let symbol = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b));
        let row = t.row(code.representatives[symbol]);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut received = row.len() - 1;
        for (j, &p) in row.iter().enumerate() {
            acc += p.to_f64().unwrap_or(0.0);
            if u < acc {
                received = j;
                break;
            }
        }
        if code.decode[received] != Some(symbol) {
            errors += 1;
        }
    }
    Ok(CodingResult {
        rate: code.bits as f64,
        symbol_error_rate: if symbols == 0 { 0.0 } else { errors as f64 / symbols as f64 },
        transitions_used: symbols,
        bits_per_symbol: code.bits,
        symbol_errors: errors,
    })
}

/// Seeded stream of uniformly random message bits.
pub fn random_message(bits: usize, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX));
    (0..bits).map(|_| rng.random()).collect()
}

/// Exact per-symbol error probability of a code for uniformly random symbols.
pub fn exact_symbol_error<T: Real>(t: &TransitionMatrix<T>, code: &ModelChoice) -> Result<T> {
    let code = Code::new(code, t.n())?;
    let errs: Vec<T> = code
        .representatives
        .iter()
        .enumerate()
        .map(|(symbol, &x)| {
            let hit: Vec<T> = t.row(x).iter().enumerate().filter(|(j, _)| code.decode[*j] == Some(symbol)).map(|(_, &p)| p).collect();
            T::one() - pairwise_sum(&hit)
        })
        .collect();
    Ok(pairwise_sum(&errs) / count::<T>(code.representatives.len()))
}

/// Rows are permutations of each other and all column sums are equal.
pub fn is_weakly_symmetric<T: Real>(t: &TransitionMatrix<T>) -> bool {
    let tol = T::comparison_tolerance();
    let sorted = |r: &[T]| {
        let mut v = r.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite entries"));
        v
    };
    let first = sorted(t.row(0));
    let rows_match = t.rows().all(|r| sorted(r).iter().zip(&first).all(|(a, b)| (*a - *b).abs() <= tol));
    let sums = t.column_sums();
    rows_match && sums.iter().all(|&s| (s - sums[0]).abs() <= tol)
}

/// Convenience: EI under the warped intervention distribution of a choice,
/// evaluated in micro space without aggregating outputs.
pub fn warped_micro_ei<T: Real>(t: &TransitionMatrix<T>, c: &ModelChoice) -> Result<T> {
    ei(t, &warped_intervention(c, t.n())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::Partition;
    use approx::assert_abs_diff_eq;

    fn bsc(flip: f64) -> TransitionMatrix<f64> {
        TransitionMatrix::from_rows(vec![vec![1.0 - flip, flip], vec![flip, 1.0 - flip]]).unwrap()
    }

    fn h2(p: f64) -> f64 {
        -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
    }

    #[test]
    fn ba_examples() {
        let r = blahut_arimoto(&TransitionMatrix::<f64>::identity(2), 1e-12, 1000).unwrap();
        assert_abs_diff_eq!(r.capacity, 1.0, epsilon = 1e-12);
        assert_eq!(r.optimal_input, Distribution::uniform(2));

        let r = blahut_arimoto(&bsc(0.25), 1e-12, 1000).unwrap();
        assert_abs_diff_eq!(r.capacity, 1.0 - h2(0.25), epsilon = 1e-10);
        assert_abs_diff_eq!(1.0 - h2(0.25), 0.18872, epsilon = 1e-5);

        let r = blahut_arimoto(&fixtures::coding4(), 1e-12, 100_000).unwrap();
        assert_abs_diff_eq!(r.capacity, 1.0, epsilon = 1e-9);
        let noisy: f64 = r.optimal_input.as_slice()[..3].iter().sum();
        assert_abs_diff_eq!(noisy, 0.5, epsilon = 1e-6);
        assert!(r.upper_bound >= r.capacity);
    }

    #[test]
    fn ba_reports_non_convergence() {
        match blahut_arimoto(&fixtures::coding4(), 1e-15, 1) {
            Err(Error::NotConverged { iterations, best, .. }) => {
                assert_eq!(iterations, 1);
                assert!(best.capacity > 0.8);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
        assert!(blahut_arimoto(&fixtures::coding4(), 0.0, 10).is_err());
    }

    #[test]
    fn random_search_examples() {
        let r = capacity_random_search(&TransitionMatrix::<f64>::identity(2), 10_000, 7);
        assert!(r.capacity >= 0.999);
        let r = capacity_random_search(&fixtures::coding4(), 2_000, 7);
        assert_abs_diff_eq!(r.capacity, 1.0, epsilon = 1e-3);
        let r = capacity_random_search(&TransitionMatrix::<f64>::uniform(5), 500, 7);
        assert_abs_diff_eq!(r.capacity, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn random_search_is_seed_deterministic() {
        let a = capacity_random_search(&fixtures::hetero8(), 1_000, 3);
        let b = capacity_random_search(&fixtures::hetero8(), 1_000, 3);
        assert_eq!(a, b);
        let ba = blahut_arimoto(&fixtures::hetero8(), 1e-12, 1_000_000).unwrap();
        assert!(a.capacity <= ba.capacity + 1e-9);
    }

    #[test]
    fn causal_capacity_examples() {
        let t = fixtures::absorbing8();
        let choices = vec![
            ModelChoice::micro(8),
            ModelChoice::coarse_grain(Partition::new(vec![0, 0, 0, 0, 0, 0, 0, 1]).unwrap()),
            ModelChoice::coarse_grain(Partition::new(vec![0, 0, 0, 0, 1, 1, 1, 1]).unwrap()),
        ];
        let cc = causal_capacity(&t, &choices).unwrap();
        assert_abs_diff_eq!(cc.cc, 1.0, epsilon = 1e-9);
        assert_eq!(cc.choice, choices[1]);

        let ex = fixtures::exogenous8();
        let restricted = ModelChoice::restricted(vec![6, 7], Partition::singletons(2));
        let cc = causal_capacity(&ex, &[ModelChoice::micro(8), restricted.clone()]).unwrap();
        assert_abs_diff_eq!(cc.cc, 1.0, epsilon = 1e-9);
        assert_eq!(cc.warped.as_slice(), &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5]);

        let perm = fixtures::m1();
        let cc = causal_capacity(&perm, &[ModelChoice::micro(4), ModelChoice::coarse_grain(Partition::new(vec![0, 0, 1, 1]).unwrap())])
            .unwrap();
        assert_abs_diff_eq!(cc.cc, 2.0, epsilon = 1e-9);
        assert!(causal_capacity::<f64>(&perm, &[]).is_err());
    }

    #[test]
    fn emergence_gap_examples() {
        let grouping = ModelChoice::coarse_grain(Partition::new(vec![0, 0, 0, 0, 0, 0, 0, 1]).unwrap());
        let g = emergence_gap(&fixtures::absorbing8(), &[grouping]).unwrap();
        assert_abs_diff_eq!(g.emergence, 0.4565, epsilon = 1e-4);
        assert_abs_diff_eq!(g.capacity_gap, 0.0, epsilon = 1e-9);

        let g = emergence_gap(&TransitionMatrix::<f64>::uniform(8), &[ModelChoice::coarse_grain(Partition::whole(8))]).unwrap();
        for v in [g.micro_ei, g.cc, g.capacity, g.emergence, g.capacity_gap] {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        }

        let code = ModelChoice::coarse_grain(Partition::new(vec![0, 0, 0, 1]).unwrap());
        let g = emergence_gap(&fixtures::coding4(), &[code]).unwrap();
        assert_abs_diff_eq!(g.micro_ei, 0.811, epsilon = 1e-3);
        assert_abs_diff_eq!(g.cc, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(g.capacity, 1.0, epsilon = 1e-9);
    }

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn coding_examples() {
        let t = fixtures::coding4();
        let message = bits("001011010011");
        let micro = simulate_coding(&t, &ModelChoice::micro(4), &message, 1).unwrap();
        assert_eq!((micro.rate, micro.transitions_used), (2.0, 6));

        let macro_code = ModelChoice::coarse_grain(Partition::new(vec![0, 0, 0, 1]).unwrap());
        let r = simulate_coding(&t, &macro_code, &message, 1).unwrap();
        assert_eq!((r.rate, r.transitions_used, r.symbol_errors), (1.0, 12, 0));
        assert_eq!(exact_symbol_error(&t, &macro_code).unwrap(), 0.0);

        let id = TransitionMatrix::<f64>::identity(4);
        assert_eq!(simulate_coding(&id, &ModelChoice::micro(4), &message, 9).unwrap().symbol_errors, 0);
        assert!(matches!(
            simulate_coding(&t, &ModelChoice::micro(4), &bits("101"), 1),
            Err(Error::IndivisibleMessage { len: 3, bits_per_symbol: 2 })
        ));
        assert!(matches!(
            simulate_coding(&t, &ModelChoice::coarse_grain(Partition::whole(4)), &message, 1),
            Err(Error::DegenerateCode(_))
        ));
    }

    #[test]
    fn micro_code_error_matches_exact_value() {
        let t = fixtures::coding4();
        let exact = exact_symbol_error(&t, &ModelChoice::micro(4)).unwrap();
        assert_abs_diff_eq!(exact, 0.5, epsilon = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let message: Vec<bool> = (0..40_000).map(|_| rng.random()).collect();
        let r = simulate_coding(&t, &ModelChoice::micro(4), &message, 5).unwrap();
        let n = r.transitions_used as f64;
        let sigma = (exact * (1.0 - exact) / n).sqrt();
        assert!((r.symbol_error_rate - exact).abs() <= 3.0 * sigma, "{} vs {exact}", r.symbol_error_rate);
        assert_eq!(simulate_coding(&t, &ModelChoice::micro(4), &message, 5).unwrap(), r);
    }

    #[test]
    fn symmetry_examples() {
        assert!(is_weakly_symmetric(&TransitionMatrix::<f64>::uniform(5)));
        assert!(is_weakly_symmetric(&bsc(0.1)));
        assert!(!is_weakly_symmetric(&fixtures::absorbing8()));
        assert!(is_weakly_symmetric(&fixtures::m1()));
        assert!(!is_weakly_symmetric(&fixtures::coding4()));
    }

    #[test]
    fn symmetric_channels_have_uniform_optimal_input() {
        let r = blahut_arimoto(&bsc(0.3), 1e-12, 1000).unwrap();
        for &x in r.optimal_input.as_slice() {
            assert_abs_diff_eq!(x, 0.5, epsilon = 1e-6);
        }
    }

    #[test]
    fn warped_micro_ei_of_restriction() {
        let c = ModelChoice::restricted(vec![6, 7], Partition::singletons(2));
        assert_abs_diff_eq!(warped_micro_ei(&fixtures::exogenous8(), &c).unwrap(), 1.0, epsilon = 1e-12);
    }
}
