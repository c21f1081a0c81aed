use crate::error::{Error, Result};
use crate::solvers::Solution;
use crate::structure::{FamilyKind, ScoreTable, Structure};

/// Indices ordered by descending score, ties by ascending index.
fn ranked(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// The `k` highest-scoring items; ties go to the smaller index.
pub fn solve_topk(scores: &ScoreTable) -> Result<Solution> {
    let (n, k) = match scores.kind() {
        FamilyKind::TopK { n, k } => (n, k),
        other => return Err(Error::Shape(format!("top-k needs a top-k table, got {other:?}"))),
    };
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k={k} out of range for n={n}")));
    }
    let entries = scores.entries();
    let order = ranked(entries);
    let structure = Structure::topk_from(order[..k].to_vec());
    let value = scores.objective(&structure);
    let margin = if k == n { f64::INFINITY } else { entries[order[k - 1]] - entries[order[k]] };
    Ok(Solution { structure, value, margin })
}

/// Argmax of an unstructured choice; ties go to the smaller index.
pub fn solve_choice(scores: &ScoreTable) -> Result<Solution> {
    if !matches!(scores.kind(), FamilyKind::Choice { .. }) {
        return Err(Error::Shape(format!("choice solver got {:?}", scores.kind())));
    }
    let entries = scores.entries();
    let order = ranked(entries);
    let best = order[0];
    let margin = if entries.len() == 1 { f64::INFINITY } else { entries[best] - entries[order[1]] };
    Ok(Solution { structure: Structure::Choice(best), value: entries[best], margin })
}
