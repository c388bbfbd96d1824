//! Search over macroscale model space for the choice with maximal EI.
//!
//! Ladder levels:
//! * 0: the micro model only;
//! * 1: every coarse-graining of the full state space;
//! * 2: adds restriction to an endogenous subset of states;
//! * 3: adds freezing and black-boxing of elements (element networks only).
//!
//! Ties in EI are broken by fewest macrostates, then the lexicographically
//! smallest restricted-growth string, then the smallest endogenous set.

mod anneal;
mod exhaustive;
mod ladder;
mod partitions;

use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gates::ElementChoice;
use crate::measures::CausalReport;
use crate::model::ModelChoice;
use crate::real::{lit, Real};
use crate::tpm::Distribution;

pub use anneal::{anneal_search, anneal_search_network, Schedule};
pub use exhaustive::{exhaustive_search, exhaustive_search_network, level_size};
pub use ladder::{ladder_report, ladder_report_network, ladder_to_csv, network_emergence_check, LadderRow, NetworkCheck, SearchMode};
pub use partitions::{bell, enumerate_partitions, Partitions, PARTITION_BUDGET};

/// Default cap on the number of choices an exhaustive search may evaluate.
pub const DEFAULT_BUDGET: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(into = "u8")]
pub struct LadderLevel(u8);

impl LadderLevel {
    pub const MICRO: Self = Self(0);
    pub const COARSE_GRAIN: Self = Self(1);
    pub const ENDOGENOUS: Self = Self(2);
    pub const ELEMENTS: Self = Self(3);

    pub fn new(level: u8) -> Result<Self> {
        if level > 3 {
            return Err(Error::UnsupportedLevel(level));
        }
        Ok(Self(level))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn up_to(self) -> impl Iterator<Item = LadderLevel> {
        (0..=self.0).map(LadderLevel)
    }
}

impl From<LadderLevel> for u8 {
    fn from(l: LadderLevel) -> u8 {
        l.0
    }
}

impl fmt::Display for LadderLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A model choice over states or over elements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Choice {
    Model(ModelChoice),
    Element(ElementChoice),
}

impl Choice {
    pub fn num_macrostates(&self) -> usize {
        match self {
            Choice::Model(c) => c.num_macrostates(),
            Choice::Element(c) => c.partition.num_blocks(),
        }
    }

    fn tie_key(&self) -> (usize, &[usize], &[usize], u8, Vec<(usize, u8)>, &[usize]) {
        match self {
            Choice::Model(c) => (c.num_macrostates(), c.partition.assignment(), &c.endogenous, 0, Vec::new(), &[]),
            Choice::Element(c) => (
                c.partition.num_blocks(),
                c.partition.assignment(),
                &c.endogenous,
                1,
                c.frozen.iter().map(|(&k, &v)| (k, v)).collect(),
                &c.blackboxed,
            ),
        }
    }

    /// Order used to break EI ties; `Less` wins.
    pub fn tie_break(&self, other: &Choice) -> Ordering {
        self.tie_key().cmp(&other.tie_key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exhaustive,
    Annealing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult<T> {
    pub best_choice: Choice,
    pub best_ei: T,
    pub report: CausalReport<T>,
    /// Micro-space intervention distribution induced by the best choice.
    pub warped_id: Distribution<T>,
    pub level: LadderLevel,
    pub method: Method,
    pub evaluated: u64,
    /// Choices skipped because an endogenous state leaks into exogenous ones.
    pub skipped: u64,
}

/// Search tuning shared by exhaustive and annealing searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub budget: u128,
    pub leak_tolerance: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { budget: DEFAULT_BUDGET, leak_tolerance: 1e-9 }
    }
}

/// Candidate with everything needed to report it if it wins.
#[derive(Debug, Clone)]
pub(crate) struct Scored<T> {
    pub ei: T,
    pub choice: Choice,
    pub report: CausalReport<T>,
}

fn tie_eps<T: Real>() -> T {
    lit::<T>(1e-12).max(T::epsilon() * lit(64.0))
}

impl<T: Real> Scored<T> {
    /// Strictly preferable to `other` under EI then the tie-break order.
    pub fn beats(&self, other: &Scored<T>) -> bool {
        let eps = tie_eps::<T>();
        if self.ei > other.ei + eps {
            return true;
        }
        if self.ei < other.ei - eps {
            return false;
        }
        self.choice.tie_break(&other.choice) == Ordering::Less
    }

    pub fn keep_best(slot: &mut Option<Scored<T>>, candidate: Scored<T>) {
        if slot.as_ref().is_none_or(|b| candidate.beats(b)) {
            *slot = Some(candidate);
        }
    }

    pub fn into_result(
        self,
        warped_id: Distribution<T>,
        level: LadderLevel,
        method: Method,
        evaluated: u64,
        skipped: u64,
    ) -> SearchResult<T> {
        SearchResult {
            best_choice: self.choice,
            best_ei: self.ei,
            report: self.report,
            warped_id,
            level,
            method,
            evaluated,
            skipped,
        }
    }
}

impl<T: Real> SearchResult<T> {
    pub fn to_f64(&self) -> SearchResult<f64> {
        SearchResult {
            best_choice: self.best_choice.clone(),
            best_ei: self.best_ei.to_f64().unwrap_or(f64::NAN),
            report: self.report.to_f64(),
            warped_id: self.warped_id.to_f64(),
            level: self.level,
            method: self.method,
            evaluated: self.evaluated,
            skipped: self.skipped,
        }
    }
}
