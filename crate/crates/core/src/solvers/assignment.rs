use crate::error::{Error, Result};
use crate::solvers::Solution;
use crate::structure::{FamilyKind, ScoreTable, Structure};

/// Maximum-score perfect matching of a dense `d × d` table in `O(d³)`.
///
/// Shortest augmenting paths with dual potentials on the negated table. The
/// final potentials give nonnegative reduced costs that vanish on the
/// matching; the cheapest alternating cycle under those costs is the
/// second-best matching, which yields the margin in another `O(d³)` pass.
pub fn solve_assignment(scores: &ScoreTable) -> Result<Solution> {
    let d = match scores.kind() {
        FamilyKind::Matching { d } => d,
        other => return Err(Error::Shape(format!("assignment needs a matching table, got {other:?}"))),
    };
    let entries = scores.entries();
    if entries.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("assignment scores".into()));
    }
    let cost: Vec<f64> = entries.iter().map(|v| -v).collect();
    let (perm, row_pot, col_pot) = hungarian(d, &cost, &[]);
    let value = scores.objective(&Structure::Matching(perm.clone()));
    if d == 1 {
        return Ok(Solution { structure: Structure::Matching(perm), value, margin: f64::INFINITY });
    }

    let second = second_best(d, &cost, &perm, &row_pot, &col_pot);
    let second_value = scores.objective(&Structure::Matching(second));
    let margin = (value - second_value).max(0.0);
    if margin > 0.0 {
        return Ok(Solution { structure: Structure::Matching(perm), value, margin });
    }
    let perm = lexicographic_optimum(d, scores, &cost, value);
    let value = scores.objective(&Structure::Matching(perm.clone()));
    Ok(Solution { structure: Structure::Matching(perm), value, margin: 0.0 })
}

/// Minimum-cost perfect matching on the rows and columns not listed in
/// `fixed`, returning the full permutation (fixed pairs kept) and the dual
/// potentials for the full index range.
fn hungarian(d: usize, cost: &[f64], fixed: &[(usize, usize)]) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let mut row_free = vec![true; d];
    let mut col_free = vec![true; d];
    for &(i, j) in fixed {
        row_free[i] = false;
        col_free[j] = false;
    }
    let rows: Vec<usize> = (0..d).filter(|&i| row_free[i]).collect();
    let cols: Vec<usize> = (0..d).filter(|&j| col_free[j]).collect();
    let n = rows.len();

    // 1-based internal indexing; column 0 is the virtual root.
    let a = |i: usize, j: usize| cost[rows[i - 1] * d + cols[j - 1]];
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = a(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![usize::MAX; d];
    for &(i, j) in fixed {
        perm[i] = j;
    }
    let mut row_pot = vec![0.0; d];
    let mut col_pot = vec![0.0; d];
    for j in 1..=n {
        perm[rows[p[j] - 1]] = cols[j - 1];
        col_pot[cols[j - 1]] = v[j];
    }
    for i in 1..=n {
        row_pot[rows[i - 1]] = u[i];
    }
    (perm, row_pot, col_pot)
}

/// Cheapest alternating cycle under reduced costs, applied to `perm`.
///
/// Node `i` is row `i`; the edge `i → k` hands row `i` the column currently
/// held by row `k` at reduced cost `r[i][perm[k]]`. Any other perfect matching
/// decomposes into such cycles, so the minimum-weight cycle is the
/// second-best matching.
fn second_best(d: usize, cost: &[f64], perm: &[usize], row_pot: &[f64], col_pot: &[f64]) -> Vec<usize> {
    let reduced = |i: usize, j: usize| (cost[i * d + j] - row_pot[i] - col_pot[j]).max(0.0);
    let mut dist = vec![f64::INFINITY; d * d];
    let mut next = vec![0usize; d * d];
    for i in 0..d {
        for k in 0..d {
            if i != k {
                dist[i * d + k] = reduced(i, perm[k]);
            }
            next[i * d + k] = k;
        }
    }
    for m in 0..d {
        for i in 0..d {
            let dim = dist[i * d + m];
            if dim == f64::INFINITY {
                continue;
            }
            for k in 0..d {
                let cand = dim + dist[m * d + k];
                if cand < dist[i * d + k] {
                    dist[i * d + k] = cand;
                    next[i * d + k] = next[i * d + m];
                }
            }
        }
    }
    let start = (0..d)
        .min_by(|&a, &b| dist[a * d + a].total_cmp(&dist[b * d + b]))
        .expect("d >= 2");

    let mut cycle = vec![start];
    let mut node = next[start * d + start];
    while node != start {
        cycle.push(node);
        node = next[node * d + start];
    }
    let mut alt = perm.to_vec();
    for w in 0..cycle.len() {
        let taker = cycle[w];
        let giver = cycle[(w + 1) % cycle.len()];
        alt[taker] = perm[giver];
    }
    alt
}

/// Lexicographically smallest matching attaining `best`, fixing one row at a
/// time to the smallest column that keeps the optimum reachable.
fn lexicographic_optimum(d: usize, scores: &ScoreTable, cost: &[f64], best: f64) -> Vec<usize> {
    let mut fixed: Vec<(usize, usize)> = Vec::with_capacity(d);
    let mut used = vec![false; d];
    let mut last = None;
    for i in 0..d {
        for j in 0..d {
            if used[j] {
                continue;
            }
            fixed.push((i, j));
            let (perm, _, _) = hungarian(d, cost, &fixed);
            if scores.objective(&Structure::Matching(perm.clone())) >= best {
                used[j] = true;
                last = Some(perm);
                break;
            }
            fixed.pop();
        }
        if fixed.len() != i + 1 {
            // rounding kept every candidate below `best`; keep the last optimum found
            break;
        }
    }
    last.unwrap_or_else(|| hungarian(d, cost, &[]).0)
}
