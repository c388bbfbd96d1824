//! Reference systems with known causal structure.

use crate::tpm::TransitionMatrix;

pub const NAMES: &[&str] = &["m1", "m2", "m3", "absorbing8", "hetero8", "exogenous8", "coding4", "uniform8", "permutation4"];

fn build(rows: Vec<Vec<f64>>) -> TransitionMatrix<f64> {
    TransitionMatrix::from_rows(rows).expect("fixture is row-stochastic")
}

fn frac(num: &[u32], den: f64) -> Vec<f64> {
    num.iter().map(|&k| f64::from(k) / den).collect()
}

/// Looks a fixture up by name.
pub fn by_name(name: &str) -> Option<TransitionMatrix<f64>> {
    Some(match name {
        "m1" => m1(),
        "m2" => m2(),
        "m3" => m3(),
        "absorbing8" => absorbing8(),
        "hetero8" => hetero8(),
        "exogenous8" => exogenous8(),
        "coding4" => coding4(),
        "uniform8" => TransitionMatrix::uniform(8),
        "permutation4" => TransitionMatrix::permutation(&[1, 2, 3, 0]),
        _ => return None,
    })
}

/// Deterministic non-degenerate 4-state chain (EI = 2 bits).
pub fn m1() -> TransitionMatrix<f64> {
    TransitionMatrix::permutation(&[2, 0, 3, 1])
}

/// Partially constrained 4-state chain (EI = 1 bit).
pub fn m2() -> TransitionMatrix<f64> {
    build(vec![frac(&[1, 1, 1, 0], 3.0), frac(&[1, 1, 1, 0], 3.0), frac(&[0, 0, 0, 1], 1.0), frac(&[0, 0, 0, 1], 1.0)])
}

/// Unconstrained 4-state chain (EI = 0).
pub fn m3() -> TransitionMatrix<f64> {
    TransitionMatrix::uniform(4)
}

/// Seven states mixing uniformly among themselves plus one absorbing state.
pub fn absorbing8() -> TransitionMatrix<f64> {
    crate::model::generalized_case(8).expect("n = 8 is valid").0
}

/// Like [`absorbing8`] but with a distinct transition profile for each of the first seven states.
pub fn hetero8() -> TransitionMatrix<f64> {
    build(vec![
        frac(&[1, 1, 1, 1, 1, 0, 0, 0], 5.0),
        frac(&[1, 3, 1, 0, 1, 0, 1, 0], 7.0),
        frac(&[0, 1, 1, 1, 1, 1, 1, 0], 6.0),
        frac(&[1, 0, 1, 1, 1, 1, 2, 0], 7.0),
        frac(&[1, 2, 2, 1, 0, 2, 1, 0], 9.0),
        frac(&[1, 1, 1, 1, 1, 1, 1, 0], 7.0),
        frac(&[1, 1, 0, 1, 1, 1, 1, 0], 6.0),
        frac(&[0, 0, 0, 0, 0, 0, 0, 1], 1.0),
    ])
}

/// Six fully random states followed by two self-looping states.
pub fn exogenous8() -> TransitionMatrix<f64> {
    let mut rows = vec![vec![0.125; 8]; 6];
    rows.push(frac(&[0, 0, 0, 0, 0, 0, 1, 0], 1.0));
    rows.push(frac(&[0, 0, 0, 0, 0, 0, 0, 1], 1.0));
    build(rows)
}

/// Three interchangeable noisy inputs and one noiseless input.
pub fn coding4() -> TransitionMatrix<f64> {
    let noisy = frac(&[1, 1, 1, 0], 3.0);
    build(vec![noisy.clone(), noisy.clone(), noisy, frac(&[0, 0, 0, 1], 1.0)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves() {
        for name in NAMES {
            assert!(by_name(name).is_some(), "{name}");
        }
        assert!(by_name("nope").is_none());
    }

    #[test]
    fn displayed_rows() {
        assert_eq!(m2().n(), 4);
        assert_eq!(hetero8().row(4), frac(&[1, 2, 2, 1, 0, 2, 1, 0], 9.0).as_slice());
        assert_eq!(coding4().row(3), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(m2().row(0), &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]);
    }
}
