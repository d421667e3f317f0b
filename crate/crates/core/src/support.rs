use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

/// An ordered set of distinct atom indices.
///
/// Indices are 0-based inside the library; everything user-facing (CLI, CSV)
/// is 1-based and goes through [`Support::parse_one_based`] / [`Support::to_one_based`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Support {
    indices: Vec<usize>,
}

impl Support {
    /// Build from 0-based indices; rejects duplicates and anything `>= n`.
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &i in &indices {
            if i >= n {
                return Err(Error::InvalidInput(format!("atom index {} outside 1..={n}", i + 1)));
            }
            if !seen.insert(i) {
                return Err(Error::InvalidInput(format!("duplicate atom index {}", i + 1)));
            }
        }
        Ok(Support { indices })
    }

    /// Parse a comma-separated list of 1-based indices such as `"1,5,9"`.
    pub fn parse_one_based(spec: &str, n: usize) -> Result<Self> {
        let mut indices = Vec::new();
        for tok in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let i: usize = tok
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad atom index {tok:?}")))?;
            if i == 0 {
                return Err(Error::InvalidInput("atom indices are 1-based".into()));
            }
            indices.push(i - 1);
        }
        Support::new(indices, n)
    }

    pub fn empty() -> Self {
        Support { indices: Vec::new() }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.contains(&j)
    }

    /// Indices in `0..n` not in this support, ascending.
    pub fn complement(&self, n: usize) -> Vec<usize> {
        let set: BTreeSet<usize> = self.indices.iter().copied().collect();
        (0..n).filter(|j| !set.contains(j)).collect()
    }

    /// Set equality, ignoring order.
    pub fn same_set(&self, other: &[usize]) -> bool {
        if other.len() != self.indices.len() {
            return false;
        }
        let a: BTreeSet<usize> = self.indices.iter().copied().collect();
        let b: BTreeSet<usize> = other.iter().copied().collect();
        a == b
    }

    /// True when every index here also appears in `other`.
    pub fn is_subset_of(&self, other: &Support) -> bool {
        self.indices.iter().all(|i| other.contains(*i))
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i + 1).collect()
    }
}

impl fmt::Display for Support {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.to_one_based().iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}
