//! Set partitions as restricted-growth strings, in lexicographic order.

use crate::error::{Error, Result};
use crate::model::Partition;

/// Default cap on enumerated partitions: everything up to 13 items.
pub const PARTITION_BUDGET: u128 = 27_644_437;

/// Bell number via the Bell triangle, saturating at `u128::MAX`.
pub fn bell(n: usize) -> u128 {
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().expect("row is never empty"));
        for &x in &row {
            let prev = *next.last().expect("seeded above");
            next.push(prev.saturating_add(x));
        }
        row = next;
    }
    row[0]
}

/// Lexicographic iterator over the restricted-growth strings of length `n`.
#[derive(Debug, Clone)]
pub struct Partitions {
    rgs: Vec<usize>,
    /// `prefix_max[i] = max(rgs[..=i])`.
    prefix_max: Vec<usize>,
    done: bool,
}

impl Partitions {
    pub fn new(n: usize) -> Self {
        Self { rgs: vec![0; n], prefix_max: vec![0; n], done: n == 0 }
    }

    fn advance(&mut self) {
        let n = self.rgs.len();
        for i in (1..n).rev() {
            if self.rgs[i] <= self.prefix_max[i - 1] {
                self.rgs[i] += 1;
                self.prefix_max[i] = self.prefix_max[i - 1].max(self.rgs[i]);
                for j in i + 1..n {
                    self.rgs[j] = 0;
                    self.prefix_max[j] = self.prefix_max[i];
                }
                return;
            }
        }
        self.done = true;
    }
}

impl Iterator for Partitions {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        let blocks = self.prefix_max.last().map_or(0, |&m| m + 1);
        let out = Partition::from_rgs_unchecked(self.rgs.clone(), blocks);
        self.advance();
        Some(out)
    }
}

/// All partitions of `n` items, refusing when their count exceeds `budget`.
pub fn enumerate_partitions(n: usize, budget: u128) -> Result<Partitions> {
    if n == 0 {
        return Err(Error::InvalidPartition("cannot partition zero items".into()));
    }
    let count = bell(n);
    if count > budget {
        return Err(Error::RefusedAboveThreshold { count, budget });
    }
    Ok(Partitions::new(n))
}
