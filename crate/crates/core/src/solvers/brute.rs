use crate::error::{Error, Result};
use crate::solvers::{LinearLossCoefficients, Maximizer, Solution};
use crate::structure::{FamilyKind, ScoreTable, Structure};

/// Largest matching size the enumeration oracle accepts.
pub const MAX_BRUTE_MATCHING: usize = 8;
/// Largest top-k family the enumeration oracle accepts.
pub const MAX_BRUTE_SUBSETS: u128 = 1_000_000;

/// Enumeration oracle; mainly for tests and small verification runs.
#[derive(Debug, Clone, Copy)]
pub struct BruteForce {
    pub max_family: u128,
}

impl Default for BruteForce {
    fn default() -> Self {
        Self { max_family: MAX_BRUTE_SUBSETS }
    }
}

impl Maximizer for BruteForce {
    fn maximize(&self, table: &ScoreTable) -> Result<Solution> {
        check_limits(table.kind(), self.max_family)?;
        brute_force_maximize(table, None)
    }
}

fn check_limits(kind: FamilyKind, max_family: u128) -> Result<()> {
    let too_large = match kind {
        FamilyKind::Matching { d } => d > MAX_BRUTE_MATCHING,
        _ => false,
    } || kind.family_size() > max_family;
    if too_large {
        return Err(Error::FamilyTooLarge(format!(
            "{kind:?} has {} structures",
            kind.family_size()
        )));
    }
    Ok(())
}

/// All structures of `kind` in lexicographic order.
pub fn enumerate_structures(kind: FamilyKind, max_family: u128) -> Result<Vec<Structure>> {
    kind.validate()?;
    if kind.family_size() > max_family {
        return Err(Error::FamilyTooLarge(format!(
            "{kind:?} has {} structures, limit {max_family}",
            kind.family_size()
        )));
    }
    let mut out = Vec::with_capacity(kind.family_size() as usize);
    for_each_structure(kind, |s| out.push(s));
    Ok(out)
}

fn for_each_structure(kind: FamilyKind, mut visit: impl FnMut(Structure)) {
    match kind {
        FamilyKind::Matching { d } => {
            let mut perm: Vec<usize> = (0..d).collect();
            loop {
                visit(Structure::Matching(perm.clone()));
                if !next_permutation(&mut perm) {
                    break;
                }
            }
        }
        FamilyKind::TopK { n, k } => {
            let mut set: Vec<usize> = (0..k).collect();
            loop {
                visit(Structure::TopK(set.clone()));
                if !next_combination(&mut set, n) {
                    break;
                }
            }
        }
        FamilyKind::Choice { m } => (0..m).for_each(|c| visit(Structure::Choice(c))),
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Exact maximizer of `scores + extra` by enumeration.
///
/// Structures are visited in lexicographic order and only a strictly better
/// objective replaces the incumbent, which gives the shared tie rule.
pub fn brute_force_maximize(
    scores: &ScoreTable,
    extra_linear: Option<&LinearLossCoefficients>,
) -> Result<Solution> {
    let kind = scores.kind();
    check_limits(kind, MAX_BRUTE_SUBSETS)?;
    if let Some(extra) = extra_linear {
        extra.check_kind(kind)?;
    }
    let mut best: Option<(Structure, f64)> = None;
    let mut second = f64::NEG_INFINITY;
    for_each_structure(kind, |s| {
        let mut value = scores.objective(&s);
        if let Some(extra) = extra_linear {
            value += extra.evaluate(&s);
        }
        match &best {
            Some((_, b)) if value <= *b => second = second.max(value),
            Some((_, b)) => {
                second = *b;
                best = Some((s, value));
            }
            None => best = Some((s, value)),
        }
    });
    let (structure, value) = best.expect("families are non-empty");
    let margin = if second == f64::NEG_INFINITY { f64::INFINITY } else { value - second };
    Ok(Solution { structure, value, margin })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_counts_and_order() {
        let all = enumerate_structures(FamilyKind::Matching { d: 3 }, 100).unwrap();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], Structure::Matching(vec![0, 1, 2]));
        assert_eq!(all[5], Structure::Matching(vec![2, 1, 0]));
        assert!(all.windows(2).all(|w| w[0] < w[1]));

        let subsets = enumerate_structures(FamilyKind::TopK { n: 5, k: 2 }, 100).unwrap();
        assert_eq!(subsets.len(), 10);
        assert_eq!(subsets[0], Structure::TopK(vec![0, 1]));
        assert_eq!(subsets[9], Structure::TopK(vec![3, 4]));
    }

    #[test]
    fn singleton_matching() {
        let t = ScoreTable::matching(1, vec![2.0]).unwrap();
        let s = brute_force_maximize(&t, None).unwrap();
        assert_eq!(s.structure, Structure::Matching(vec![0]));
        assert!(s.margin.is_infinite());
    }

    #[test]
    fn limits() {
        let t = ScoreTable::matching(9, vec![0.0; 81]).unwrap();
        assert!(matches!(brute_force_maximize(&t, None), Err(Error::FamilyTooLarge(_))));
        let t = ScoreTable::topk(15, vec![0.0; 40]).unwrap();
        assert!(matches!(BruteForce::default().maximize(&t), Err(Error::FamilyTooLarge(_))));
    }

    #[test]
    fn ties_resolve_to_first_in_lexicographic_order() {
        let t = ScoreTable::matching(3, vec![0.0; 9]).unwrap();
        let s = brute_force_maximize(&t, None).unwrap();
        assert_eq!(s.structure, Structure::identity_matching(3));
        assert_eq!(s.margin, 0.0);
    }
}
