//! Exact maximizers over structure families, loss functions and brute-force
//! oracles.
//!
//! Every solver maximizes. Among structures with exactly equal objective the
//! lexicographically smallest one wins, in the fast solvers and in the
//! enumeration oracle alike, so the two can be compared for exact equality.

mod assignment;
mod brute;
mod loss;
mod topk;

pub use assignment::solve_assignment;
pub use brute::{brute_force_maximize, enumerate_structures, BruteForce, MAX_BRUTE_MATCHING, MAX_BRUTE_SUBSETS};
pub use loss::{
    knn_linear_loss, linearize_knn_loss, linearize_matching_loss, linearize_matching_placement_loss,
    matching_placement_loss, matching_quadratic_loss, LinearLossCoefficients,
};
pub use topk::{solve_choice, solve_topk};

use serde::Serialize;

use crate::error::Result;
use crate::structure::{FamilyKind, ScoreTable, Structure};

/// An exact maximizer and its attained value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub structure: Structure,
    pub value: f64,
    /// Best minus second-best objective; infinite when the family has a
    /// single member. Zero means an exact tie was broken by the
    /// lexicographic rule.
    pub margin: f64,
}

impl Solution {
    pub fn tied(&self) -> bool {
        self.margin == 0.0
    }
}

/// Anything that returns an exact maximizer of a linear objective over a
/// structure family.
pub trait Maximizer: Send + Sync {
    fn maximize(&self, table: &ScoreTable) -> Result<Solution>;
}

/// Polynomial-time exact solvers: Hungarian assignment, sort-based top-k and
/// plain argmax for an unstructured choice.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactSolver;

impl Maximizer for ExactSolver {
    fn maximize(&self, table: &ScoreTable) -> Result<Solution> {
        match table.kind() {
            FamilyKind::Matching { .. } => solve_assignment(table),
            FamilyKind::TopK { .. } => solve_topk(table),
            FamilyKind::Choice { .. } => solve_choice(table),
        }
    }
}

impl<M: Maximizer + ?Sized> Maximizer for &M {
    fn maximize(&self, table: &ScoreTable) -> Result<Solution> {
        (**self).maximize(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table_strategy(d: usize) -> impl Strategy<Value = ScoreTable> {
        proptest::collection::vec(-5.0f64..5.0, d * d)
            .prop_map(move |e| ScoreTable::matching(d, e).unwrap())
    }

    proptest! {
        #[test]
        fn assignment_matches_enumeration(t in (1usize..=6).prop_flat_map(table_strategy)) {
            let fast = ExactSolver.maximize(&t).unwrap();
            let slow = BruteForce::default().maximize(&t).unwrap();
            prop_assert_eq!(fast.value, slow.value);
            if slow.margin > 1e-12 {
                prop_assert_eq!(&fast.structure, &slow.structure);
                prop_assert!(fast.margin == slow.margin || (fast.margin - slow.margin).abs() < 1e-9);
            }
        }

        #[test]
        fn integer_tables_with_ties_agree(e in proptest::collection::vec(0i32..3, 16)) {
            let t = ScoreTable::matching(4, e.into_iter().map(f64::from).collect()).unwrap();
            let fast = ExactSolver.maximize(&t).unwrap();
            let slow = BruteForce::default().maximize(&t).unwrap();
            prop_assert_eq!(fast, slow);
        }

        #[test]
        fn topk_matches_enumeration(
            scores in proptest::collection::vec(-3.0f64..3.0, 1..10),
            k_frac in 0.0f64..1.0,
        ) {
            let n = scores.len();
            let k = 1 + ((n - 1) as f64 * k_frac) as usize;
            let t = ScoreTable::topk(k, scores).unwrap();
            let fast = ExactSolver.maximize(&t).unwrap();
            let slow = BruteForce::default().maximize(&t).unwrap();
            prop_assert_eq!(&fast.structure, &slow.structure);
            prop_assert_eq!(fast.value, slow.value);
        }

        #[test]
        fn topk_monotone_in_selected_score(
            scores in proptest::collection::vec(-3.0f64..3.0, 2..12),
            bump in 0.0f64..5.0,
            pick in 0usize..100,
        ) {
            let n = scores.len();
            let k = 1 + pick % n;
            let t = ScoreTable::topk(k, scores.clone()).unwrap();
            let before = solve_topk(&t).unwrap();
            let chosen = before.structure.as_subset().unwrap()[pick % k];
            let mut raised = scores;
            raised[chosen] += bump;
            let after = solve_topk(&ScoreTable::topk(k, raised).unwrap()).unwrap();
            prop_assert!(after.structure.as_subset().unwrap().contains(&chosen));
        }
    }
}
