use rayon::prelude::*;

use super::partitions::{bell, Partitions};
use super::{Choice, LadderLevel, Method, Scored, SearchConfig, SearchResult};
use crate::error::{Error, Result};
use crate::gates::{apply_element_choice, compile_tpm, element_choice_ei, ElementChoice, GateNetwork};
use crate::model::{macro_ei_with_tolerance, warped_intervention, ModelChoice, Partition};
use crate::real::{lit, Real};
use crate::tpm::{Distribution, TransitionMatrix};

const CHUNK: usize = 2048;

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

/// Number of model choices at `level` over `n` states (levels 0-2).
pub fn level_size(n: usize, level: LadderLevel) -> u128 {
    match level.get() {
        0 => 1,
        1 => bell(n),
        _ => (1..=n).fold(0u128, |acc, k| acc.saturating_add(binomial(n, k).saturating_mul(bell(k)))),
    }
}

/// Element-level choices added at level 3 for a network of `elements` elements:
/// every split into endogenous/frozen-0/frozen-1/black-boxed with at least one
/// endogenous and one exogenous element, times the groupings of the endogenous states.
fn element_level_size(elements: usize) -> u128 {
    (1..elements).fold(0u128, |acc, e| {
        let roles = binomial(elements, e).saturating_mul(3u128.saturating_pow((elements - e) as u32));
        acc.saturating_add(roles.saturating_mul(bell(1 << e)))
    })
}

pub(crate) fn score_model<T: Real>(t: &TransitionMatrix<T>, c: ModelChoice, leak_tolerance: T) -> Result<Scored<T>> {
    let report = macro_ei_with_tolerance(t, &c, leak_tolerance)?;
    Ok(Scored { ei: report.ei, choice: Choice::Model(c), report })
}

pub(crate) fn score_element<T: Real>(g: &GateNetwork<T>, c: ElementChoice) -> Result<Scored<T>> {
    let report = element_choice_ei(g, &c)?;
    Ok(Scored { ei: report.ei, choice: Choice::Element(c), report })
}

/// Evaluates a stream in fixed-size chunks; each chunk is scored in parallel
/// and reduced in stream order, so the winner is independent of thread count.
fn reduce_stream<T, I, F>(stream: I, score: F, best: &mut Option<Scored<T>>, evaluated: &mut u64, skipped: &mut u64) -> Result<()>
where
    T: Real,
    I: Iterator,
    I::Item: Send,
    F: Fn(I::Item) -> Result<Scored<T>> + Sync,
{
    let mut stream = stream.peekable();
    while stream.peek().is_some() {
        let chunk: Vec<I::Item> = stream.by_ref().take(CHUNK).collect();
        let scored: Vec<Result<Scored<T>>> = chunk.into_par_iter().map(&score).collect();
        for s in scored {
            match s {
                Ok(s) => {
                    *evaluated += 1;
                    Scored::keep_best(best, s);
                }
                Err(Error::MassEscapesEndogenous { .. }) => *skipped += 1,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(())
}

fn leaks<T: Real>(t: &TransitionMatrix<T>, endogenous: &[bool], tol: T) -> bool {
    (0..t.n()).filter(|&i| endogenous[i]).any(|i| {
        let out: T = t.row(i).iter().zip(endogenous).filter(|(_, &e)| !e).map(|(&p, _)| p).sum();
        out > tol
    })
}

fn search_states<T: Real>(
    t: &TransitionMatrix<T>,
    level: LadderLevel,
    config: &SearchConfig,
    best: &mut Option<Scored<T>>,
    evaluated: &mut u64,
    skipped: &mut u64,
) -> Result<()> {
    let n = t.n();
    let tol: T = lit(config.leak_tolerance);
    match level.get() {
        0 => reduce_stream(std::iter::once(ModelChoice::micro(n)), |c| score_model(t, c, tol), best, evaluated, skipped),
        1 => reduce_stream(Partitions::new(n).map(ModelChoice::coarse_grain), |c| score_model(t, c, tol), best, evaluated, skipped),
        _ => {
            if n >= usize::BITS as usize {
                return Err(Error::RefusedAboveThreshold { count: u128::MAX, budget: config.budget });
            }
            for mask in 1usize..(1 << n) {
                let members: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
                let endogenous: Vec<usize> = (0..n).filter(|&i| members[i]).collect();
                if leaks(t, &members, tol) {
                    *skipped = skipped.saturating_add(bell(endogenous.len()).min(u64::MAX as u128) as u64);
                    continue;
                }
                let stream = Partitions::new(endogenous.len()).map(|p| ModelChoice::restricted(endogenous.clone(), p));
                reduce_stream(stream, |c| score_model(t, c, tol), best, evaluated, skipped)?;
            }
            Ok(())
        }
    }
}

fn check_budget(count: u128, config: &SearchConfig) -> Result<()> {
    if count > config.budget {
        return Err(Error::RefusedAboveThreshold { count, budget: config.budget });
    }
    Ok(())
}

/// Evaluates every choice at `level` (0-2) over the states of `t`.
pub fn exhaustive_search<T: Real>(t: &TransitionMatrix<T>, level: LadderLevel, config: &SearchConfig) -> Result<SearchResult<T>> {
    if level.get() > 2 {
        return Err(Error::UnsupportedLevel(level.get()));
    }
    check_budget(level_size(t.n(), level), config)?;
    let (mut best, mut evaluated, mut skipped) = (None, 0, 0);
    search_states(t, level, config, &mut best, &mut evaluated, &mut skipped)?;
    let best = best.expect("micro model is always valid");
    let warped = match &best.choice {
        Choice::Model(c) => warped_intervention(c, t.n())?,
        Choice::Element(_) => unreachable!("state search yields state choices"),
    };
    Ok(best.into_result(warped, level, Method::Exhaustive, evaluated, skipped))
}

/// Exhaustive search over a network: levels 0-2 act on the compiled TPM,
/// level 3 adds every freezing/black-boxing assignment of elements.
pub fn exhaustive_search_network<T: Real>(g: &GateNetwork<T>, level: LadderLevel, config: &SearchConfig) -> Result<SearchResult<T>> {
    let t = compile_tpm(g)?;
    if level.get() <= 2 {
        return exhaustive_search(&t, level, config);
    }
    let elements = g.len();
    check_budget(level_size(t.n(), LadderLevel::ENDOGENOUS).saturating_add(element_level_size(elements)), config)?;
    let (mut best, mut evaluated, mut skipped) = (None, 0, 0);
    search_states(&t, LadderLevel::ENDOGENOUS, config, &mut best, &mut evaluated, &mut skipped)?;
    for roles in element_role_assignments(elements) {
        let base = roles;
        let endo_states = 1usize << base.endogenous.len();
        let stream = Partitions::new(endo_states).map(|p: Partition| ElementChoice { partition: p, ..base.clone() });
        reduce_stream(stream, |c| score_element(g, c), &mut best, &mut evaluated, &mut skipped)?;
    }
    let best = best.expect("micro model is always valid");
    let warped: Distribution<T> = match &best.choice {
        Choice::Model(c) => warped_intervention(c, t.n())?,
        Choice::Element(c) => apply_element_choice(g, c)?.1,
    };
    Ok(best.into_result(warped, level, Method::Exhaustive, evaluated, skipped))
}

/// Every element role assignment with at least one endogenous and one exogenous element.
pub(crate) fn element_role_assignments(elements: usize) -> impl Iterator<Item = ElementChoice> {
    let total = 4usize.pow(elements as u32);
    (0..total).filter_map(move |code| {
        let mut endogenous = Vec::new();
        let mut frozen = std::collections::BTreeMap::new();
        let mut blackboxed = Vec::new();
        for k in 0..elements {
            match (code >> (2 * k)) & 3 {
                0 => endogenous.push(k),
                1 => {
                    frozen.insert(k, 0u8);
                }
                2 => {
                    frozen.insert(k, 1u8);
                }
                _ => blackboxed.push(k),
            }
        }
        if endogenous.is_empty() || endogenous.len() == elements {
            return None;
        }
        let partition = Partition::singletons(1 << endogenous.len());
        Some(ElementChoice { endogenous, frozen, blackboxed, partition, description: String::new() })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::gates::and_network;
    use crate::measures::ei_uniform;
    use approx::assert_abs_diff_eq;

    fn cfg() -> SearchConfig {
        SearchConfig::default()
    }

    #[test]
    fn level_sizes() {
        assert_eq!(level_size(8, LadderLevel::MICRO), 1);
        assert_eq!(level_size(8, LadderLevel::COARSE_GRAIN), 4140);
        // Σ_k C(n,k) B(k) over k ≥ 1 equals B(n+1) − 1
        assert_eq!(level_size(8, LadderLevel::ENDOGENOUS), bell(9) - 1);
        assert_eq!(element_level_size(2), 2 * 3 * bell(2));
    }

    #[test]
    fn absorbing_level_one() {
        let r = exhaustive_search(&fixtures::absorbing8(), LadderLevel::COARSE_GRAIN, &cfg()).unwrap();
        assert_abs_diff_eq!(r.best_ei, 1.0, epsilon = 1e-9);
        match &r.best_choice {
            Choice::Model(c) => assert_eq!(c.partition.assignment(), &[0, 0, 0, 0, 0, 0, 0, 1]),
            other => panic!("{other:?}"),
        }
        assert_eq!(r.evaluated, 4140);
    }

    /// EI of the macro model that lumps the six random states and keeps the two
    /// fixed points: H([1/4, 3/8, 3/8]) - H([3/4, 1/8, 1/8]) / 3.
    fn lumped_exogenous_ei() -> f64 {
        let h = |p: &[f64]| -p.iter().map(|x| x * x.log2()).sum::<f64>();
        h(&[0.25, 0.375, 0.375]) - h(&[0.75, 0.125, 0.125]) / 3.0
    }

    #[test]
    fn exogenous_levels() {
        let t = fixtures::exogenous8();
        let l1 = exhaustive_search(&t, LadderLevel::COARSE_GRAIN, &cfg()).unwrap();
        assert_abs_diff_eq!(l1.best_ei, lumped_exogenous_ei(), epsilon = 1e-12);
        match &l1.best_choice {
            Choice::Model(c) => assert_eq!(c.partition.assignment(), &[0, 0, 0, 0, 0, 0, 1, 2]),
            other => panic!("{other:?}"),
        }
        let l2 = exhaustive_search(&t, LadderLevel::ENDOGENOUS, &cfg()).unwrap();
        assert_abs_diff_eq!(l2.best_ei, l1.best_ei, epsilon = 1e-12);
        let restricted = score_model(&t, ModelChoice::restricted(vec![6, 7], Partition::singletons(2)), 1e-9).unwrap();
        assert_abs_diff_eq!(restricted.ei, 1.0, epsilon = 1e-12);
        assert!(l2.skipped > 0);
        assert_eq!(u128::from(l2.evaluated + l2.skipped), level_size(8, LadderLevel::ENDOGENOUS));
    }

    #[test]
    fn level_zero_is_micro() {
        let t = fixtures::hetero8();
        let r = exhaustive_search(&t, LadderLevel::MICRO, &cfg()).unwrap();
        assert_eq!(r.best_ei, ei_uniform(&t));
        assert_eq!(r.evaluated, 1);
    }

    #[test]
    fn budget_refusal() {
        let small = SearchConfig { budget: 100, ..cfg() };
        assert!(matches!(
            exhaustive_search(&fixtures::absorbing8(), LadderLevel::COARSE_GRAIN, &small),
            Err(Error::RefusedAboveThreshold { count: 4140, budget: 100 })
        ));
        assert!(matches!(exhaustive_search(&fixtures::m1(), LadderLevel::ELEMENTS, &cfg()), Err(Error::UnsupportedLevel(3))));
    }

    #[test]
    fn network_level_three_finds_freezing() {
        let g = and_network::<f64>(&[vec![0, 1], vec![0, 1]]).unwrap();
        let r2 = exhaustive_search_network(&g, LadderLevel::ENDOGENOUS, &cfg()).unwrap();
        let r3 = exhaustive_search_network(&g, LadderLevel::ELEMENTS, &cfg()).unwrap();
        assert!(r3.best_ei >= r2.best_ei - 1e-12);
        assert_abs_diff_eq!(r3.best_ei, 1.0, epsilon = 1e-9);
        assert_eq!(r3.warped_id.len(), 4);
    }

    #[test]
    fn role_assignments_cover_mixed_splits() {
        // 4^2 total minus all-endogenous (1) minus no-endogenous (3^2 = 9)
        assert_eq!(element_role_assignments(2).count(), 6);
    }
}
