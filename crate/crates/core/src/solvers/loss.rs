use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::structure::{FamilyKind, Structure};

/// A loss written as `constant + Σ per_entry · ŷ` over structure indicators.
///
/// In this form the loss-perturbed objective is still a linear table, so the
/// loss-augmented prediction is a single call to the same solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearLossCoefficients {
    pub kind: FamilyKind,
    pub constant: f64,
    pub per_entry: Vec<f64>,
}

impl LinearLossCoefficients {
    pub fn zeros(kind: FamilyKind) -> Self {
        Self { kind, constant: 0.0, per_entry: vec![0.0; kind.table_len()] }
    }

    pub fn check_kind(&self, kind: FamilyKind) -> Result<()> {
        if self.kind != kind || self.per_entry.len() != kind.table_len() {
            return Err(Error::Shape(format!(
                "loss coefficients for {:?} used with {kind:?}",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn evaluate(&self, structure: &Structure) -> f64 {
        self.constant
            + structure
                .selected_positions(self.kind)
                .into_iter()
                .map(|p| self.per_entry[p])
                .sum::<f64>()
    }
}

fn matched_values(x: &[f64], y: &Structure) -> Result<Vec<f64>> {
    let perm = y
        .as_permutation()
        .ok_or_else(|| Error::Shape(format!("expected a matching, got {y:?}")))?;
    y.validate(FamilyKind::Matching { d: x.len() })?;
    Ok(perm.iter().map(|&j| x[j]).collect())
}

/// `Σ_i (Σ_j x_j y_ij − Σ_j x_j ŷ_ij)²`.
pub fn matching_quadratic_loss(x: &[f64], y: &Structure, y_hat: &Structure) -> Result<f64> {
    let target = matched_values(x, y)?;
    let predicted = matched_values(x, y_hat)?;
    Ok(target.iter().zip(&predicted).map(|(a, b)| (a - b).powi(2)).sum())
}

/// Exact linear form of [`matching_quadratic_loss`] in `ŷ`.
///
/// Each row of a matching is one-hot, so with `c_i = Σ_j x_j y_ij` the row
/// term expands to `c_i² − 2 c_i Σ_j x_j ŷ_ij + Σ_j x_j² ŷ_ij`.
pub fn linearize_matching_loss(x: &[f64], y: &Structure) -> Result<LinearLossCoefficients> {
    let d = x.len();
    let target = matched_values(x, y)?;
    let mut per_entry = Vec::with_capacity(d * d);
    for &c in &target {
        per_entry.extend(x.iter().map(|&xj| xj * xj - 2.0 * c * xj));
    }
    Ok(LinearLossCoefficients {
        kind: FamilyKind::Matching { d },
        constant: target.iter().map(|c| c * c).sum(),
        per_entry,
    })
}

/// `Σ_j (Σ_i x_i y_ij − Σ_i x_i ŷ_ij)²`: squared error between the value
/// each position should hold and the value placed there.
pub fn matching_placement_loss(x: &[f64], y: &Structure, y_hat: &Structure) -> Result<f64> {
    let target = placed_values(x, y)?;
    let placed = placed_values(x, y_hat)?;
    Ok(target.iter().zip(&placed).map(|(a, b)| (a - b).powi(2)).sum())
}

/// Exact linear form of [`matching_placement_loss`]: with `s_j` the value
/// position `j` should hold, entry `(i, j)` costs `x_i² − 2 s_j x_i`.
pub fn linearize_matching_placement_loss(x: &[f64], y: &Structure) -> Result<LinearLossCoefficients> {
    let d = x.len();
    let target = placed_values(x, y)?;
    let mut per_entry = Vec::with_capacity(d * d);
    for &xi in x {
        per_entry.extend(target.iter().map(|&s| xi * xi - 2.0 * s * xi));
    }
    Ok(LinearLossCoefficients {
        kind: FamilyKind::Matching { d },
        constant: target.iter().map(|s| s * s).sum(),
        per_entry,
    })
}

fn placed_values(x: &[f64], y: &Structure) -> Result<Vec<f64>> {
    let perm = y
        .as_permutation()
        .ok_or_else(|| Error::Shape(format!("expected a matching, got {y:?}")))?;
    y.validate(FamilyKind::Matching { d: x.len() })?;
    let mut out = vec![0.0; x.len()];
    for (i, &j) in perm.iter().enumerate() {
        out[j] = x[i];
    }
    Ok(out)
}

fn subset_of(s: &Structure, n: usize) -> Result<&[usize]> {
    let items = s
        .as_subset()
        .ok_or_else(|| Error::Shape(format!("expected a top-k subset, got {s:?}")))?;
    if items.iter().any(|&i| i >= n) || items.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!("{items:?} is not a sorted subset of 0..{n}")));
    }
    Ok(items)
}

/// `−Σ_i dist_i · y_i · ŷ_i`: minus the summed distances of the shared items.
pub fn knn_linear_loss(distances: &[f64], y: &Structure, y_hat: &Structure) -> Result<f64> {
    let n = distances.len();
    let a = subset_of(y, n)?;
    let b = subset_of(y_hat, n)?;
    if a.len() != b.len() {
        return Err(Error::Shape(format!("subset sizes {} and {} differ", a.len(), b.len())));
    }
    Ok(-a.iter().filter(|i| b.binary_search(i).is_ok()).map(|&i| distances[i]).sum::<f64>())
}

/// The top-k loss is already linear in `ŷ`: coefficient `−dist_i` on the
/// true items, zero elsewhere.
pub fn linearize_knn_loss(distances: &[f64], y: &Structure) -> Result<LinearLossCoefficients> {
    let n = distances.len();
    let items = subset_of(y, n)?;
    let mut per_entry = vec![0.0; n];
    for &i in items {
        per_entry[i] = -distances[i];
    }
    Ok(LinearLossCoefficients { kind: FamilyKind::TopK { n, k: items.len() }, constant: 0.0, per_entry })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::enumerate_structures;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_loss_hand_values() {
        let x = [0.2, 0.7];
        let id = Structure::identity_matching(2);
        let swap = Structure::Matching(vec![1, 0]);
        assert_eq!(matching_quadratic_loss(&x, &id, &id).unwrap(), 0.0);
        let l = matching_quadratic_loss(&x, &id, &swap).unwrap();
        assert!((l - 0.5).abs() < 1e-15);
        assert_eq!(l, matching_quadratic_loss(&x, &swap, &id).unwrap());
        assert!(matching_quadratic_loss(&x, &id, &Structure::identity_matching(3)).is_err());
    }

    #[test]
    fn linearization_hand_values() {
        let x = [0.2, 0.7];
        let id = Structure::identity_matching(2);
        let lin = linearize_matching_loss(&x, &id).unwrap();
        assert!(lin.evaluate(&id).abs() < 1e-15);
        assert!((lin.evaluate(&Structure::Matching(vec![1, 0])) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn linearization_is_exact_over_all_matchings() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for d in 2..=5 {
            let all = enumerate_structures(FamilyKind::Matching { d }, 1000).unwrap();
            for _ in 0..200 {
                let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
                let y = &all[rng.random_range(0..all.len())];
                let lin = linearize_matching_loss(&x, y).unwrap();
                for y_hat in &all {
                    let q = matching_quadratic_loss(&x, y, y_hat).unwrap();
                    assert!((lin.evaluate(y_hat) - q).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn placement_linearization_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for d in 2..=5 {
            let all = enumerate_structures(FamilyKind::Matching { d }, 1000).unwrap();
            for _ in 0..100 {
                let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
                let y = &all[rng.random_range(0..all.len())];
                let lin = linearize_matching_placement_loss(&x, y).unwrap();
                for y_hat in &all {
                    let q = matching_placement_loss(&x, y, y_hat).unwrap();
                    assert!((lin.evaluate(y_hat) - q).abs() < 1e-9);
                }
            }
        }
        let x = [0.2, 0.7];
        let swap = Structure::Matching(vec![1, 0]);
        let l = matching_placement_loss(&x, &Structure::identity_matching(2), &swap).unwrap();
        assert!((l - 0.5).abs() < 1e-15);
    }

    #[test]
    fn knn_loss_values() {
        let dist = [0.1, 0.2, 0.3, 0.4, 0.5];
        let y = Structure::TopK(vec![0, 1]);
        assert_eq!(knn_linear_loss(&dist, &y, &Structure::TopK(vec![2, 3])).unwrap(), 0.0);
        assert!((knn_linear_loss(&dist, &y, &y).unwrap() + 0.3).abs() < 1e-15);
        assert!((knn_linear_loss(&dist, &y, &Structure::TopK(vec![1, 2])).unwrap() + 0.2).abs() < 1e-15);
        assert!(knn_linear_loss(&dist, &y, &Structure::TopK(vec![1])).is_err());

        let lin = linearize_knn_loss(&dist, &y).unwrap();
        for s in enumerate_structures(lin.kind, 100).unwrap() {
            assert!((lin.evaluate(&s) - knn_linear_loss(&dist, &y, &s).unwrap()).abs() < 1e-15);
        }
    }
}
