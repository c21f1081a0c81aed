//! Score tables and discrete structures shared by the solvers and estimators.
//!
//! A [`ScoreTable`] holds one real score per structure component, laid out so
//! that the score of a structure is the sum of the table entries its
//! indicator selects:
//!
//! - matching of size `d`: entry `(i, j)` at `i * d + j`, selected when row `i`
//!   is matched to column `j`;
//! - top-k over `n` items: entry `i`, selected when item `i` is in the subset;
//! - unstructured choice among `m` options: entry `c`, selected when `c` is
//!   the chosen option.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyKind {
    /// Perfect matchings of a balanced `d × d` bipartite graph.
    Matching { d: usize },
    /// Subsets of exactly `k` out of `n` items.
    TopK { n: usize, k: usize },
    /// A single categorical choice among `m` options.
    Choice { m: usize },
}

impl FamilyKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FamilyKind::Matching { d: 0 } => {
                Err(Error::InvalidParameter("matching size d must be >= 1".into()))
            }
            FamilyKind::TopK { n, k } if k == 0 || k > n => Err(Error::InvalidParameter(format!(
                "top-k requires 1 <= k <= n, got n={n}, k={k}"
            ))),
            FamilyKind::Choice { m: 0 } => {
                Err(Error::InvalidParameter("choice needs at least one option".into()))
            }
            _ => Ok(()),
        }
    }

    /// Number of entries of a score table for this family.
    pub fn table_len(&self) -> usize {
        match *self {
            FamilyKind::Matching { d } => d * d,
            FamilyKind::TopK { n, .. } => n,
            FamilyKind::Choice { m } => m,
        }
    }

    /// Domain size of every component of the low-dimensional perturbation.
    ///
    /// Matchings perturb each row's column choice, top-k perturbs each item's
    /// in/out bit, and a choice is a single component over all options.
    pub fn field_domain_sizes(&self) -> Vec<usize> {
        match *self {
            FamilyKind::Matching { d } => vec![d; d],
            FamilyKind::TopK { n, .. } => vec![2; n],
            FamilyKind::Choice { m } => vec![m],
        }
    }

    /// Number of structures in the family, saturating at `u128::MAX`.
    pub fn family_size(&self) -> u128 {
        match *self {
            FamilyKind::Matching { d } => (1..=d as u128).fold(1u128, |acc, v| acc.saturating_mul(v)),
            FamilyKind::TopK { n, k } => binomial(n as u128, k as u128),
            FamilyKind::Choice { m } => m as u128,
        }
    }
}

pub(crate) fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Dense table of local scores indexed by structure component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    kind: FamilyKind,
    entries: Vec<f64>,
}

impl ScoreTable {
    pub fn new(kind: FamilyKind, entries: Vec<f64>) -> Result<Self> {
        kind.validate()?;
        if entries.len() != kind.table_len() {
            return Err(Error::Shape(format!(
                "{kind:?} needs {} entries, got {}",
                kind.table_len(),
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("score entry {pos} is {}", entries[pos])));
        }
        Ok(Self { kind, entries })
    }

    pub fn matching(d: usize, entries: Vec<f64>) -> Result<Self> {
        Self::new(FamilyKind::Matching { d }, entries)
    }

    /// Build a matching table from rows.
    pub fn matching_from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("matching table must be square".into()));
        }
        Self::matching(d, rows.concat())
    }

    pub fn topk(k: usize, entries: Vec<f64>) -> Result<Self> {
        Self::new(FamilyKind::TopK { n: entries.len(), k }, entries)
    }

    pub fn choice(entries: Vec<f64>) -> Result<Self> {
        Self::new(FamilyKind::Choice { m: entries.len() }, entries)
    }

    pub fn zeros(kind: FamilyKind) -> Result<Self> {
        Self::new(kind, vec![0.0; kind.table_len()])
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Matching entry `(i, j)`. Panics on other families.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        match self.kind {
            FamilyKind::Matching { d } => self.entries[i * d + j],
            _ => panic!("ScoreTable::at is only defined for matchings"),
        }
    }

    /// `self + scale * other`, entry-wise.
    pub fn add_scaled(&self, other: &[f64], scale: f64) -> Result<Self> {
        if other.len() != self.entries.len() {
            return Err(Error::Shape(format!(
                "cannot add {} entries to a table of {}",
                other.len(),
                self.entries.len()
            )));
        }
        let entries = self
            .entries
            .iter()
            .zip(other)
            .map(|(a, b)| a + scale * b)
            .collect();
        Self::new(self.kind, entries)
    }

    /// Score of `structure`: the selected entries summed in component order.
    pub fn objective(&self, structure: &Structure) -> f64 {
        structure
            .selected_positions(self.kind)
            .into_iter()
            .map(|p| self.entries[p])
            .sum()
    }
}

/// A discrete label of one of the supported families.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Structure {
    /// `perm[i] = j` matches row `i` to column `j`.
    Matching(Vec<usize>),
    /// Sorted, distinct item indices.
    TopK(Vec<usize>),
    Choice(usize),
}

impl Structure {
    pub fn identity_matching(d: usize) -> Self {
        Structure::Matching((0..d).collect())
    }

    /// Build a top-k structure from any index set; indices are sorted.
    pub fn topk_from(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        Structure::TopK(indices)
    }

    pub fn validate(&self, kind: FamilyKind) -> Result<()> {
        match (self, kind) {
            (Structure::Matching(perm), FamilyKind::Matching { d }) => {
                if perm.len() != d {
                    return Err(Error::Shape(format!(
                        "matching of size {} used with family of size {d}",
                        perm.len()
                    )));
                }
                let mut seen = vec![false; d];
                for &j in perm {
                    if j >= d || seen[j] {
                        return Err(Error::InvalidParameter(format!(
                            "{perm:?} is not a permutation of 0..{d}"
                        )));
                    }
                    seen[j] = true;
                }
                Ok(())
            }
            (Structure::TopK(items), FamilyKind::TopK { n, k }) => {
                if items.len() != k {
                    return Err(Error::Shape(format!(
                        "subset of size {} used with k={k}",
                        items.len()
                    )));
                }
                if items.windows(2).any(|w| w[0] >= w[1]) || items.iter().any(|&i| i >= n) {
                    return Err(Error::InvalidParameter(format!(
                        "{items:?} is not a sorted set of distinct indices below {n}"
                    )));
                }
                Ok(())
            }
            (Structure::Choice(c), FamilyKind::Choice { m }) => {
                if *c >= m {
                    return Err(Error::InvalidParameter(format!("choice {c} out of range {m}")));
                }
                Ok(())
            }
            _ => Err(Error::Shape(format!("structure {self:?} does not belong to {kind:?}"))),
        }
    }

    /// Table positions selected by this structure, in component order.
    pub fn selected_positions(&self, kind: FamilyKind) -> Vec<usize> {
        match (self, kind) {
            (Structure::Matching(perm), FamilyKind::Matching { d }) => {
                perm.iter().enumerate().map(|(i, &j)| i * d + j).collect()
            }
            (Structure::TopK(items), FamilyKind::TopK { .. }) => items.clone(),
            (Structure::Choice(c), FamilyKind::Choice { .. }) => vec![*c],
            _ => panic!("structure {self:?} does not belong to {kind:?}"),
        }
    }

    /// 0/1 indicator table shaped like a [`ScoreTable`] of `kind`.
    pub fn indicator(&self, kind: FamilyKind) -> Vec<f64> {
        let mut out = vec![0.0; kind.table_len()];
        for p in self.selected_positions(kind) {
            out[p] = 1.0;
        }
        out
    }

    /// Local assignment of every perturbation component: the matched column
    /// per row, the in/out bit per item, or the chosen option.
    pub fn local_assignments(&self, kind: FamilyKind) -> Vec<usize> {
        match (self, kind) {
            (Structure::Matching(perm), FamilyKind::Matching { .. }) => perm.clone(),
            (Structure::TopK(items), FamilyKind::TopK { n, .. }) => {
                let mut bits = vec![0usize; n];
                for &i in items {
                    bits[i] = 1;
                }
                bits
            }
            (Structure::Choice(c), FamilyKind::Choice { .. }) => vec![*c],
            _ => panic!("structure {self:?} does not belong to {kind:?}"),
        }
    }

    pub fn as_permutation(&self) -> Option<&[usize]> {
        match self {
            Structure::Matching(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_subset(&self) -> Option<&[usize]> {
        match self {
            Structure::TopK(s) => Some(s),
            _ => None,
        }
    }
}
