use perturbed_direct::experiments::{evaluate_matching, sorting_label};
use perturbed_direct::gumbel::{perturbed_argmax, GumbelSampler};
use perturbed_direct::nn::{Activation, DenseNet};
use perturbed_direct::solvers::{
    enumerate_structures, linearize_matching_loss, linearize_matching_placement_loss,
    matching_placement_loss, matching_quadratic_loss, ExactSolver, Maximizer,
};
use perturbed_direct::structure::{FamilyKind, ScoreTable, Structure};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn permutation(d: usize) -> impl Strategy<Value = Structure> {
    Just((0..d).collect::<Vec<_>>()).prop_shuffle().prop_map(Structure::Matching)
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Structure)> {
    (2usize..=5).prop_flat_map(|d| (proptest::collection::vec(0.0f64..1.0, d), permutation(d)))
}

proptest! {
    #[test]
    fn both_matching_losses_linearize_exactly((x, y) in instance()) {
        let d = x.len();
        let row = linearize_matching_loss(&x, &y).unwrap();
        let place = linearize_matching_placement_loss(&x, &y).unwrap();
        for y_hat in enumerate_structures(FamilyKind::Matching { d }, 200).unwrap() {
            prop_assert!((row.evaluate(&y_hat) - matching_quadratic_loss(&x, &y, &y_hat).unwrap()).abs() < 1e-9);
            prop_assert!((place.evaluate(&y_hat) - matching_placement_loss(&x, &y, &y_hat).unwrap()).abs() < 1e-9);
        }
        prop_assert!(row.evaluate(&y).abs() < 1e-12);
        prop_assert!(place.evaluate(&y).abs() < 1e-12);
    }

    #[test]
    fn loss_augmented_solve_matches_enumeration((x, y) in instance(), eps in -20.0f64..20.0, seed in any::<u64>()) {
        let d = x.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores = ScoreTable::matching(d, (0..d * d).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect()).unwrap();
        let lin = linearize_matching_loss(&x, &y).unwrap();
        let fast = ExactSolver.maximize(&scores.add_scaled(&lin.per_entry, eps).unwrap()).unwrap();
        let objective = |s: &Structure| scores.objective(s) + eps * lin.evaluate(s);
        let oracle_value = enumerate_structures(scores.kind(), 200).unwrap().iter().map(objective).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((objective(&fast.structure) - oracle_value).abs() < 1e-9);
    }

    #[test]
    fn temperature_identity(d in 2usize..6, sigma in 0.01f64..50.0, seed in any::<u64>()) {
        let mut g = GumbelSampler::new(seed, 0);
        let kind = FamilyKind::Matching { d };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries: Vec<f64> = (0..d * d).map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect();
        let field = g.sample_field_for(kind).unwrap();
        let hot = perturbed_argmax(&ScoreTable::matching(d, entries.clone()).unwrap(), &field, sigma, &ExactSolver).unwrap();
        let scaled = ScoreTable::matching(d, entries.iter().map(|m| m / sigma).collect()).unwrap();
        let unit = perturbed_argmax(&scaled, &field, 1.0, &ExactSolver).unwrap();
        prop_assert_eq!(hot.structure, unit.structure);
    }

    #[test]
    fn softplus_head_is_positive(input in proptest::collection::vec(-1e3f64..1e3, 5), seed in any::<u64>()) {
        let net = DenseNet::new(&[5, 1], &[Activation::Softplus], &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let out = net.predict(&input).unwrap()[0];
        prop_assert!(out >= 0.0 && out.is_finite());
    }

    #[test]
    fn sorting_labels_are_bijections(x in proptest::collection::vec(0.0f64..1.0, 1..30)) {
        let y = sorting_label(&x);
        y.validate(FamilyKind::Matching { d: x.len() }).unwrap();
        let perm = y.as_permutation().unwrap();
        for i in 0..x.len() {
            for j in 0..x.len() {
                if x[i] < x[j] {
                    prop_assert!(perm[i] < perm[j]);
                }
            }
        }
    }

    #[test]
    fn perfect_scores_have_no_spread(ys in proptest::collection::vec(permutation(6), 1..8)) {
        let r = evaluate_matching(&ys, &ys).unwrap();
        prop_assert_eq!(r.percent_zero_prop_any_wrong, 100.0);
        prop_assert_eq!(r.prop_wrong_mean, 0.0);
        prop_assert_eq!(r.prop_wrong_std, 0.0);
    }
}
