//! Boolean element networks compiled to TPMs, plus element-level model
//! choices (freezing and black-boxing).
//!
//! State index encodes element values little-endian: element `k` is bit `k`.
//! Updates are synchronous. A rule is a truth table giving `p(output = 1)`
//! for each joint input state, again little-endian over the input list.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{macro_tpm, warped_intervention, ModelChoice, Partition};
use crate::real::{count, Real};
use crate::tpm::{Distribution, TransitionMatrix};

pub const MAX_ELEMENTS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Element<T> {
    pub name: String,
    pub inputs: Vec<usize>,
    /// `p(output = 1)` per joint input state; length `2^inputs.len()`.
    pub table: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateNetwork<T> {
    elements: Vec<Element<T>>,
}

/// Named logic rules available in network files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Logic {
    And,
    Or,
    Xor,
    Copy,
}

impl Logic {
    pub fn table<T: Real>(self, fan_in: usize) -> Result<Vec<T>> {
        if fan_in == 0 || (self == Logic::Copy && fan_in != 1) {
            return Err(Error::InvalidElement { element: 0, reason: format!("{self:?} cannot take {fan_in} inputs") });
        }
        let full = (1usize << fan_in) - 1;
        Ok((0..=full)
            .map(|idx| {
                let on = match self {
                    Logic::And => idx == full,
                    Logic::Or => idx != 0,
                    Logic::Xor => idx.count_ones() % 2 == 1,
                    Logic::Copy => idx == 1,
                };
                if on {
                    T::one()
                } else {
                    T::zero()
                }
            })
            .collect())
    }
}

impl<T: Real> GateNetwork<T> {
    pub fn new(elements: Vec<Element<T>>) -> Result<Self> {
        let n = elements.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        if n > MAX_ELEMENTS {
            return Err(Error::TooManyElements(n));
        }
        for (k, e) in elements.iter().enumerate() {
            if e.inputs.len() > MAX_ELEMENTS {
                return Err(Error::InvalidElement { element: k, reason: "fan-in too large".into() });
            }
            let expected = 1usize << e.inputs.len();
            if e.table.len() != expected {
                return Err(Error::FanInStateMissing { element: k, fan_in: e.inputs.len(), len: e.table.len(), expected });
            }
            if let Some(&bad) = e.inputs.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidElement { element: k, reason: format!("input {bad} out of range") });
            }
            if e.table.iter().any(|&p| !p.is_finite() || p < T::zero() || p > T::one()) {
                return Err(Error::InvalidElement { element: k, reason: "table entries must lie in [0, 1]".into() });
            }
        }
        Ok(Self { elements })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Element<T>] {
        &self.elements
    }

    pub fn num_states(&self) -> usize {
        1 << self.elements.len()
    }

    /// `p(element k = 1 at t+1)` given the full current state.
    fn fire_probability(&self, k: usize, state: usize) -> T {
        let e = &self.elements[k];
        let idx = e.inputs.iter().enumerate().fold(0usize, |acc, (bit, &src)| acc | (((state >> src) & 1) << bit));
        e.table[idx]
    }

    pub fn is_deterministic(&self) -> bool {
        self.elements.iter().all(|e| e.table.iter().all(|&p| p == T::zero() || p == T::one()))
    }
}

/// Product distribution over the joint state of independent binary variables.
fn product_distribution<T: Real>(p_on: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); 1 << p_on.len()];
    out[0] = T::one();
    for (k, &p) in p_on.iter().enumerate() {
        let half = 1 << k;
        for x in 0..half {
            let base = out[x];
            out[x | half] = base * p;
            out[x] = base * (T::one() - p);
        }
    }
    out
}

/// Full `2^N × 2^N` TPM under synchronous update.
pub fn compile_tpm<T: Real>(g: &GateNetwork<T>) -> Result<TransitionMatrix<T>> {
    if g.len() > MAX_ELEMENTS {
        return Err(Error::TooManyElements(g.len()));
    }
    let states = g.num_states();
    let rows: Vec<Vec<T>> = (0..states)
        .into_par_iter()
        .map(|s| {
            let p_on: Vec<T> = (0..g.len()).map(|k| g.fire_probability(k, s)).collect();
            product_distribution(&p_on)
        })
        .collect();
    Ok(TransitionMatrix::from_flat_unchecked(states, rows.into_iter().flatten().collect()))
}

/// Network of two-input AND gates; `wiring[k]` lists the inputs of element `k`.
pub fn and_network<T: Real>(wiring: &[Vec<usize>]) -> Result<GateNetwork<T>> {
    let elements = wiring
        .iter()
        .enumerate()
        .map(|(k, inputs)| {
            if inputs.len() != 2 {
                return Err(Error::InvalidElement {
                    element: k,
                    reason: format!("AND gate needs exactly 2 inputs, got {}", inputs.len()),
                });
            }
            Ok(Element { name: format!("n{k}"), inputs: inputs.clone(), table: Logic::And.table(2)? })
        })
        .collect::<Result<Vec<_>>>()?;
    GateNetwork::new(elements)
}

/// Element-level model choice. `endogenous`, `frozen` and `blackboxed` are
/// disjoint and cover every element; `partition` groups the joint states of
/// the endogenous elements (little-endian in `endogenous` order).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ElementChoice {
    pub endogenous: Vec<usize>,
    #[serde(default)]
    pub frozen: BTreeMap<usize, u8>,
    #[serde(default)]
    pub blackboxed: Vec<usize>,
    pub partition: Partition,
    #[serde(default)]
    pub description: String,
}

impl ElementChoice {
    pub fn micro(elements: usize) -> Self {
        Self {
            endogenous: (0..elements).collect(),
            frozen: BTreeMap::new(),
            blackboxed: Vec::new(),
            partition: Partition::singletons(1 << elements),
            description: "micro".into(),
        }
    }

    pub fn validate(&self, elements: usize) -> Result<()> {
        if self.endogenous.is_empty() {
            return Err(Error::EmptyEndogenous);
        }
        let mut role = vec![0u8; elements];
        let all = self.endogenous.iter().chain(self.frozen.keys()).chain(self.blackboxed.iter());
        for &k in all {
            if k >= elements {
                return Err(Error::InvalidChoice(format!("element {k} out of range")));
            }
            role[k] += 1;
        }
        if let Some(k) = role.iter().position(|&r| r != 1) {
            return Err(Error::InvalidChoice(format!("element {k} must have exactly one role")));
        }
        if self.endogenous.windows(2).any(|w| w[0] >= w[1]) || self.blackboxed.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidChoice("element lists must be strictly increasing".into()));
        }
        if let Some((k, v)) = self.frozen.iter().find(|(_, &v)| v > 1) {
            return Err(Error::InvalidChoice(format!("frozen element {k} has non-binary value {v}")));
        }
        let joint = 1usize << self.endogenous.len();
        if self.partition.len() != joint {
            return Err(Error::InvalidChoice(format!(
                "partition covers {} states but endogenous elements have {joint}",
                self.partition.len()
            )));
        }
        Ok(())
    }

    fn compose(&self, endo_state: usize, hidden_state: usize) -> usize {
        let mut s = 0;
        for (bit, &k) in self.endogenous.iter().enumerate() {
            s |= ((endo_state >> bit) & 1) << k;
        }
        for (bit, &k) in self.blackboxed.iter().enumerate() {
            s |= ((hidden_state >> bit) & 1) << k;
        }
        for (&k, &v) in &self.frozen {
            s |= usize::from(v) << k;
        }
        s
    }
}

/// TPM over the endogenous elements' joint states: frozen elements clamped,
/// black-boxed elements drawn uniformly at each intervention and marginalized.
fn endogenous_tpm<T: Real>(g: &GateNetwork<T>, c: &ElementChoice) -> TransitionMatrix<T> {
    let endo_states = 1usize << c.endogenous.len();
    let hidden_states = 1usize << c.blackboxed.len();
    let weight = T::one() / count::<T>(hidden_states);
    let rows: Vec<Vec<T>> = (0..endo_states)
        .into_par_iter()
        .map(|e| {
            let mut row = vec![T::zero(); endo_states];
            for h in 0..hidden_states {
                let s = c.compose(e, h);
                let p_on: Vec<T> = c.endogenous.iter().map(|&k| g.fire_probability(k, s)).collect();
                for (slot, p) in row.iter_mut().zip(product_distribution(&p_on)) {
                    *slot = *slot + weight * p;
                }
            }
            row
        })
        .collect();
    TransitionMatrix::from_flat_unchecked(endo_states, rows.into_iter().flatten().collect())
}

/// Macro TPM of an element choice together with the warped intervention
/// distribution it induces over the full `2^N` micro state space.
pub fn apply_element_choice<T: Real>(
    g: &GateNetwork<T>,
    c: &ElementChoice,
) -> Result<(TransitionMatrix<T>, Distribution<T>)> {
    c.validate(g.len())?;
    let endo = endogenous_tpm(g, c);
    let grouping = ModelChoice::coarse_grain(c.partition.clone());
    let macro_t = macro_tpm(&endo, &grouping)?;
    let endo_id: Distribution<T> = warped_intervention(&grouping, endo.n())?;
    let hidden_states = 1usize << c.blackboxed.len();
    let share = T::one() / count::<T>(hidden_states);
    let mut micro = vec![T::zero(); g.num_states()];
    for e in 0..endo.n() {
        for h in 0..hidden_states {
            micro[c.compose(e, h)] = endo_id[e] * share;
        }
    }
    Ok((macro_t, Distribution::from_vec_unchecked(micro)))
}

// --- file format -----------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RuleSpec {
    Named(String),
    Table { table: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ElementSpec {
    #[serde(default)]
    name: String,
    rule: RuleSpec,
    inputs: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetworkFile {
    elements: Vec<ElementSpec>,
}

/// Parses `{"elements": [{"name", "rule": "AND"|"OR"|"XOR"|"COPY"|{"table": [..]}, "inputs"}]}`.
pub fn network_from_json_str(s: &str) -> Result<GateNetwork<f64>> {
    let file: NetworkFile = serde_json::from_str(s)?;
    let elements = file
        .elements
        .into_iter()
        .enumerate()
        .map(|(k, spec)| {
            let table = match spec.rule {
                RuleSpec::Table { table } => table,
                RuleSpec::Named(name) => {
                    let logic = match name.to_ascii_uppercase().as_str() {
                        "AND" => Logic::And,
                        "OR" => Logic::Or,
                        "XOR" => Logic::Xor,
                        "COPY" => Logic::Copy,
                        other => return Err(Error::InvalidElement { element: k, reason: format!("unknown rule {other:?}") }),
                    };
                    logic.table(spec.inputs.len()).map_err(|e| match e {
                        Error::InvalidElement { reason, .. } => Error::InvalidElement { element: k, reason },
                        e => e,
                    })?
                }
            };
            let name = if spec.name.is_empty() { format!("n{k}") } else { spec.name };
            Ok(Element { name, inputs: spec.inputs, table })
        })
        .collect::<Result<Vec<_>>>()?;
    GateNetwork::new(elements)
}

pub fn network_to_json_value(g: &GateNetwork<f64>) -> serde_json::Value {
    let file = NetworkFile {
        elements: g
            .elements()
            .iter()
            .map(|e| ElementSpec { name: e.name.clone(), rule: RuleSpec::Table { table: e.table.clone() }, inputs: e.inputs.clone() })
            .collect(),
    };
    serde_json::to_value(file).expect("network serializes")
}

/// Macro EI of an element choice under a uniform macro intervention.
pub fn element_choice_ei<T: Real>(g: &GateNetwork<T>, c: &ElementChoice) -> Result<crate::measures::CausalReport<T>> {
    let (m, _) = apply_element_choice(g, c)?;
    crate::measures::full_report(&m, &Distribution::uniform(m.n()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{determinism, ei_uniform, full_report};
    use approx::assert_abs_diff_eq;

    /// Brute-force oracle: enumerates every current state and every joint
    /// next state and multiplies per-element outcome probabilities directly.
    fn oracle_tpm(tables: &[(Vec<usize>, Vec<f64>)]) -> Vec<Vec<f64>> {
        let n = tables.len();
        let states = 1 << n;
        let mut rows = vec![vec![0.0; states]; states];
        for (s, row) in rows.iter_mut().enumerate() {
            for (next, slot) in row.iter_mut().enumerate() {
                let mut p = 1.0;
                for (k, (inputs, table)) in tables.iter().enumerate() {
                    let mut idx = 0;
                    for (b, &src) in inputs.iter().enumerate() {
                        if s & (1 << src) != 0 {
                            idx += 1 << b;
                        }
                    }
                    let on = table[idx];
                    p *= if next & (1 << k) != 0 { on } else { 1.0 - on };
                }
                *slot = p;
            }
        }
        rows
    }

    fn two_and() -> GateNetwork<f64> {
        and_network(&[vec![0, 1], vec![0, 1]]).unwrap()
    }

    #[test]
    fn oracle_values_for_two_and_fixture() {
        let rows = oracle_tpm(&[(vec![0, 1], vec![0.0, 0.0, 0.0, 1.0]), (vec![0, 1], vec![0.0, 0.0, 0.0, 1.0])]);
        assert_eq!(rows[0], [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(rows[1], [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(rows[2], [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(rows[3], [0.0, 0.0, 0.0, 1.0]);
        let t = TransitionMatrix::from_rows(rows).unwrap();
        let expected = (3.0 * (4.0f64 / 3.0).log2() + 2.0) / 4.0;
        assert_abs_diff_eq!(ei_uniform(&t), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 0.8113, epsilon = 1e-4);
    }

    #[test]
    fn copy_self_loop_is_identity() {
        let g = GateNetwork::new(vec![Element { name: "a".into(), inputs: vec![0], table: Logic::Copy.table::<f64>(1).unwrap() }])
            .unwrap();
        let t = compile_tpm(&g).unwrap();
        assert_eq!(t, TransitionMatrix::identity(2));
        assert_abs_diff_eq!(ei_uniform(&t), 1.0, epsilon = 1e-12);
        let self_and = compile_tpm(&and_network::<f64>(&[vec![0, 0]]).unwrap()).unwrap();
        assert_eq!(self_and, TransitionMatrix::identity(2));
    }

    #[test]
    fn compile_matches_oracle() {
        let specs = vec![
            (vec![0, 1], vec![0.0, 0.0, 0.0, 1.0]),
            (vec![2], vec![0.2, 0.9]),
            (vec![0, 1, 2], vec![0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0]),
        ];
        let g = GateNetwork::new(
            specs.iter().enumerate().map(|(k, (i, t))| Element { name: format!("e{k}"), inputs: i.clone(), table: t.clone() }).collect(),
        )
        .unwrap();
        let t = compile_tpm(&g).unwrap();
        for (a, b) in t.to_rows().iter().flatten().zip(oracle_tpm(&specs).iter().flatten()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-15);
        }
        assert!(TransitionMatrix::from_rows(t.to_rows()).is_ok());
    }

    #[test]
    fn two_and_compiled() {
        let t = compile_tpm(&two_and()).unwrap();
        assert_abs_diff_eq!(ei_uniform(&t), 0.8113, epsilon = 1e-4);
        assert_eq!(determinism(&t, &Distribution::uniform(4)).unwrap(), 1.0);
    }

    #[test]
    fn identity_element_choice_reproduces_compile() {
        let g = two_and();
        let (m, id) = apply_element_choice(&g, &ElementChoice::micro(2)).unwrap();
        assert_eq!(m, compile_tpm(&g).unwrap());
        assert_eq!(id, Distribution::uniform(4));
    }

    #[test]
    fn freezing_and_black_boxing() {
        let g = two_and();
        let frozen = ElementChoice {
            endogenous: vec![0],
            frozen: BTreeMap::from([(1, 1)]),
            blackboxed: vec![],
            partition: Partition::singletons(2),
            description: String::new(),
        };
        let (m, id) = apply_element_choice(&g, &frozen).unwrap();
        assert_eq!(m, TransitionMatrix::identity(2));
        assert_abs_diff_eq!(ei_uniform(&m), 1.0, epsilon = 1e-12);
        // states with element 1 = 1 are 2 (01 -> idx 2) and 3
        assert_eq!(id.as_slice(), &[0.0, 0.0, 0.5, 0.5]);

        let boxed = ElementChoice { frozen: BTreeMap::new(), blackboxed: vec![1], ..frozen };
        let (m, id) = apply_element_choice(&g, &boxed).unwrap();
        assert_eq!(m.to_rows(), vec![vec![1.0, 0.0], vec![0.5, 0.5]]);
        let oracle = 0.5 * (4.0f64 / 3.0).log2() + 0.5 * (0.5 * (0.5f64 / 0.75).log2() + 0.5 * (0.5f64 / 0.25).log2());
        assert_abs_diff_eq!(ei_uniform(&m), oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(oracle, 0.3113, epsilon = 1e-4);
        assert_eq!(id, Distribution::uniform(4));
        let r = full_report(&m, &Distribution::uniform(2)).unwrap();
        assert_abs_diff_eq!(r.ei, oracle, epsilon = 1e-12);
    }

    #[test]
    fn choice_validation_errors() {
        let g = two_and();
        let mut c = ElementChoice::micro(2);
        c.endogenous = vec![];
        assert!(matches!(apply_element_choice(&g, &c), Err(Error::EmptyEndogenous)));
        let c = ElementChoice { blackboxed: vec![1], ..ElementChoice::micro(2) };
        assert!(apply_element_choice(&g, &c).is_err());
        let c = ElementChoice {
            endogenous: vec![0],
            frozen: BTreeMap::from([(1, 2)]),
            blackboxed: vec![],
            partition: Partition::singletons(2),
            description: String::new(),
        };
        assert!(apply_element_choice(&g, &c).is_err());
    }

    #[test]
    fn network_validation() {
        assert!(matches!(
            GateNetwork::new(vec![Element { name: "x".into(), inputs: vec![0, 0], table: vec![0.0, 1.0] }]),
            Err(Error::FanInStateMissing { element: 0, fan_in: 2, len: 2, expected: 4 })
        ));
        assert!(and_network::<f64>(&[vec![0, 1, 0]]).is_err());
        assert!(and_network::<f64>(&[vec![0, 3]]).is_err());
        let too_many: Vec<Vec<usize>> = (0..21).map(|_| vec![0, 0]).collect();
        assert!(matches!(and_network::<f64>(&too_many), Err(Error::TooManyElements(21))));
    }

    #[test]
    fn network_json() {
        let g = network_from_json_str(
            r#"{"elements":[{"name":"a","rule":"AND","inputs":[0,1]},{"name":"b","rule":{"table":[0,1]},"inputs":[0]}]}"#,
        )
        .unwrap();
        assert_eq!(g.elements()[0].table, vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(g.elements()[1].table, vec![0.0, 1.0]);
        let again = network_from_json_str(&network_to_json_value(&g).to_string()).unwrap();
        assert_eq!(again, g);
        assert!(network_from_json_str(r#"{"elements":[{"rule":"NAND","inputs":[0]}]}"#).is_err());
        assert!(network_from_json_str(r#"{"elements":[{"rule":"COPY","inputs":[0,0]}]}"#).is_err());
    }

    #[test]
    fn element_choice_json() {
        let c: ElementChoice =
            serde_json::from_str(r#"{"endogenous":[0],"frozen":{"1":0},"blackboxed":[],"partition":[0,1]}"#).unwrap();
        assert_eq!(c.frozen.get(&1), Some(&0));
        c.validate(2).unwrap();
    }
}
