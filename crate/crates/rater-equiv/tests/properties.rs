//! Property tests for the statistical invariants the library guarantees.

mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use rater_equiv::agreement::{
    bland_altman, icc_absolute_agreement, mean_absolute_error, quadratic_weighted_kappa,
    spearman_rho,
};
use rater_equiv::gate::{evaluate_gate_inputs, GateConfig, GateInputs};
use rater_equiv::hypothesis::{
    bonferroni, friedman_test, tost_from_summary, wilcoxon_approx_from_differences,
    wilcoxon_exact_from_differences, wilcoxon_from_differences,
};
use rater_equiv::judge::parse_rating;
use rater_equiv::ratings::{ItemId, PairedRatings, RatingScale};
use rater_equiv::topset::{jaccard, jaccard_curve, tie_inclusive_top_set, PairSide};

fn scale_1_6() -> RatingScale {
    RatingScale::new(1, 6).unwrap()
}

/// Two aligned rating vectors on the 1..=6 scale, each non-constant so
/// every statistic in the battery is defined.
fn rating_pair() -> impl Strategy<Value = (Vec<i32>, Vec<i32>)> {
    (3usize..=30)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(1..=6i32, n),
                prop::collection::vec(1..=6i32, n),
            )
        })
        .prop_filter("constant vectors leave rank statistics undefined", |(a, b)| {
            a.iter().min() != a.iter().max() && b.iter().min() != b.iter().max()
        })
}

fn pair_of(a: &[i32], b: &[i32], scale: RatingScale) -> PairedRatings {
    PairedRatings::from_values(a.to_vec(), b.to_vec(), scale).unwrap()
}

proptest! {
    // -- agreement ---------------------------------------------------------

    #[test]
    fn kappa_is_symmetric_and_at_most_one((a, b) in rating_pair()) {
        let pair = pair_of(&a, &b, scale_1_6());
        if let Ok(kappa) = quadratic_weighted_kappa(&pair) {
            let swapped = quadratic_weighted_kappa(&pair.swapped()).unwrap();
            prop_assert!((kappa - swapped).abs() <= 1e-12);
            prop_assert!(kappa <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn kappa_ignores_unused_scale_categories((a, b) in rating_pair()) {
        let narrow = pair_of(&a, &b, scale_1_6());
        let wide = pair_of(&a, &b, RatingScale::new(1, 9).unwrap());
        match (quadratic_weighted_kappa(&narrow), quadratic_weighted_kappa(&wide)) {
            (Ok(k_narrow), Ok(k_wide)) => {
                prop_assert!((k_narrow - k_wide).abs() <= 1e-12)
            }
            (Err(_), Err(_)) => {}
            (narrow, wide) => prop_assert!(
                false,
                "scale extension changed definedness: {narrow:?} vs {wide:?}"
            ),
        }
    }

    #[test]
    fn perfect_agreement_scores_perfectly((a, _) in rating_pair()) {
        let pair = pair_of(&a, &a, scale_1_6());
        prop_assert_eq!(mean_absolute_error(&pair).unwrap(), 0.0);
        let ba = bland_altman(&pair).unwrap();
        prop_assert_eq!(ba.bias, 0.0);
        prop_assert_eq!(ba.sd, 0.0);
        if let Ok(kappa) = quadratic_weighted_kappa(&pair) {
            prop_assert!((kappa - 1.0).abs() <= 1e-12);
        }
        if let Ok(icc) = icc_absolute_agreement(&pair) {
            prop_assert!((icc - 1.0).abs() <= 1e-9);
        }
        prop_assert!((spearman_rho(&pair).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn icc_is_symmetric_and_at_most_one((a, b) in rating_pair()) {
        let pair = pair_of(&a, &b, scale_1_6());
        if let Ok(icc) = icc_absolute_agreement(&pair) {
            let swapped = icc_absolute_agreement(&pair.swapped()).unwrap();
            prop_assert!((icc - swapped).abs() <= 1e-9);
            prop_assert!(icc <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn mae_is_symmetric_and_nonnegative((a, b) in rating_pair()) {
        let pair = pair_of(&a, &b, scale_1_6());
        let mae = mean_absolute_error(&pair).unwrap();
        prop_assert!(mae >= 0.0);
        prop_assert_eq!(mae, mean_absolute_error(&pair.swapped()).unwrap());
    }

    #[test]
    fn spearman_is_symmetric_bounded_and_shift_invariant((a, b) in rating_pair()) {
        let pair = pair_of(&a, &b, scale_1_6());
        let rho = spearman_rho(&pair).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&rho));
        prop_assert!((rho - spearman_rho(&pair.swapped()).unwrap()).abs() <= 1e-12);
        // Shifting one side preserves its ranking, hence rho.
        let shifted_b: Vec<i32> = b.iter().map(|v| v + 3).collect();
        let shifted = PairedRatings::from_values(
            a.clone(),
            shifted_b,
            RatingScale::new(1, 9).unwrap(),
        )
        .unwrap();
        prop_assert!((rho - spearman_rho(&shifted).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn bland_altman_band_brackets_bias_and_flips_sign((a, b) in rating_pair()) {
        let pair = pair_of(&a, &b, scale_1_6());
        let ba = bland_altman(&pair).unwrap();
        prop_assert!(ba.loa_low <= ba.bias + 1e-12);
        prop_assert!(ba.bias <= ba.loa_high + 1e-12);
        prop_assert!((ba.half_band() - 1.96 * ba.sd).abs() <= 1e-12);
        let swapped = bland_altman(&pair.swapped()).unwrap();
        prop_assert!((ba.bias + swapped.bias).abs() <= 1e-12);
        prop_assert!((ba.sd - swapped.sd).abs() <= 1e-12);
    }

    // -- hypothesis tests ----------------------------------------------------

    #[test]
    fn wilcoxon_p_is_a_probability_and_sign_symmetric(
        diffs in prop::collection::vec(-6..=6i32, 3..=40)
            .prop_filter("all-zero differences are a fixed case", |d| {
                d.iter().any(|v| *v != 0)
            })
    ) {
        let diffs: Vec<f64> = diffs.into_iter().map(f64::from).collect();
        let result = wilcoxon_from_differences(&diffs).unwrap();
        prop_assert!(result.p_value > 0.0 && result.p_value <= 1.0);
        let flipped: Vec<f64> = diffs.iter().map(|d| -d).collect();
        let mirrored = wilcoxon_from_differences(&flipped).unwrap();
        prop_assert!((result.p_value - mirrored.p_value).abs() <= 1e-12);
    }

    #[test]
    fn wilcoxon_exact_and_approx_agree_for_midsize_samples(
        magnitudes in prop::collection::btree_set(1..=200u32, 15..=25),
        sign_bits in prop::collection::vec(any::<bool>(), 25),
    ) {
        // Distinct magnitudes keep the ranking tie-free; the normal
        // approximation should then track the exact distribution closely.
        let diffs: Vec<f64> = magnitudes
            .iter()
            .zip(&sign_bits)
            .map(|(v, positive)| if *positive { *v as f64 } else { -(*v as f64) })
            .collect();
        let exact = wilcoxon_exact_from_differences(&diffs).unwrap();
        let approx = wilcoxon_approx_from_differences(&diffs).unwrap();
        prop_assert!(
            (exact.p_value - approx.p_value).abs() <= 0.02,
            "exact {} vs approx {} on m={}",
            exact.p_value,
            approx.p_value,
            diffs.len()
        );
    }

    #[test]
    fn friedman_is_nonnegative_and_column_order_free(
        table in prop::collection::vec(prop::collection::vec(1..=6i32, 5..=12), 3..=4)
            .prop_filter("columns must share a length", |cols| {
                cols.iter().map(Vec::len).min() == cols.iter().map(Vec::len).max()
            })
    ) {
        let columns: Vec<Vec<f64>> = table
            .iter()
            .map(|c| c.iter().map(|v| f64::from(*v)).collect())
            .collect();
        let result = friedman_test(&columns).unwrap();
        prop_assert!(result.statistic >= -1e-12);
        prop_assert!(result.p_value > 0.0 && result.p_value <= 1.0);
        let mut rotated = columns.clone();
        rotated.rotate_left(1);
        let same = friedman_test(&rotated).unwrap();
        prop_assert!((result.statistic - same.statistic).abs() <= 1e-9);
        prop_assert!((result.p_value - same.p_value).abs() <= 1e-9);
    }

    #[test]
    fn bonferroni_clamps_and_is_monotone(p in 0.0..=1.0f64, m in 1usize..=10) {
        let corrected = bonferroni(p, m).unwrap();
        prop_assert!((corrected - (p * m as f64).min(1.0)).abs() <= 1e-15);
        prop_assert!(bonferroni(p, m + 1).unwrap() >= corrected);
        prop_assert_eq!(bonferroni(p, 1).unwrap(), p);
    }

    #[test]
    fn tost_verdict_matches_p_value_and_margin_is_monotone(
        mean in -2.0..=2.0f64,
        sd in 0.1..=2.0f64,
        n in 5usize..=200,
        margin in 0.2..=2.0f64,
    ) {
        let alpha = 0.05;
        let result = tost_from_summary(mean, sd, n, margin, alpha).unwrap();
        prop_assert_eq!(result.equivalent, result.p_value < alpha);
        prop_assert_eq!(result.p_value, result.p_lower.max(result.p_upper));
        // A wider margin is a weaker claim: p never increases.
        let wider = tost_from_summary(mean, sd, n, margin + 0.5, alpha).unwrap();
        prop_assert!(wider.p_value <= result.p_value + 1e-12);
    }

    // -- top sets ------------------------------------------------------------

    #[test]
    fn top_sets_nest_and_respect_their_boundary(
        values in prop::collection::vec(1..=6i32, 2..=20),
        split in any::<u16>(),
    ) {
        let ratings: BTreeMap<ItemId, i32> = values
            .iter()
            .enumerate()
            .map(|(i, v)| (ItemId::new(format!("item_{i:02}")), *v))
            .collect();
        let n = ratings.len();
        let small = (split as usize % n) + 1;
        let large = small + (split as usize / n) % (n - small + 1);
        let inner = tie_inclusive_top_set(&ratings, small).unwrap();
        let outer = tie_inclusive_top_set(&ratings, large).unwrap();
        prop_assert!(inner.items.len() >= small);
        prop_assert!(inner.items.is_subset(&outer.items));
        for (item, rating) in &ratings {
            prop_assert_eq!(
                inner.items.contains(item),
                *rating >= inner.boundary_rating
            );
        }
    }

    #[test]
    fn jaccard_is_symmetric_and_bounded(
        values_a in prop::collection::vec(1..=6i32, 2..=15),
        values_b in prop::collection::vec(1..=6i32, 2..=15),
    ) {
        let set = |values: &[i32], tag: &str| {
            values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v >= 4)
                .map(|(i, _)| ItemId::new(format!("{tag}_{i}")))
                .collect::<std::collections::BTreeSet<_>>()
        };
        // Shared prefix of names creates partial overlap.
        let a = set(&values_a, "item");
        let b = set(&values_b, "item");
        if a.is_empty() && b.is_empty() {
            prop_assert!(jaccard(&a, &b).is_err());
        } else {
            let forward = jaccard(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&forward));
            prop_assert_eq!(forward, jaccard(&b, &a).unwrap());
        }
    }

    #[test]
    fn jaccard_curve_is_sorted_anchored_and_bounded((a, b) in rating_pair()) {
        let pair = pair_of(&a, &b, scale_1_6());
        let fractions: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
        let curve = jaccard_curve(&pair, PairSide::B, &fractions).unwrap();
        let last = curve.points.last().unwrap();
        prop_assert_eq!(last.actual_fraction, 1.0);
        prop_assert_eq!(last.jaccard, 1.0);
        for window in curve.points.windows(2) {
            prop_assert!(window[0].actual_fraction < window[1].actual_fraction);
        }
        for point in &curve.points {
            prop_assert!((0.0..=1.0).contains(&point.jaccard));
            prop_assert!(point.actual_fraction >= point.nominal_fraction - 1e-12);
        }
        prop_assert!((0.0..=1.0).contains(&curve.auc));
    }

    // -- gate ------------------------------------------------------------------

    #[test]
    fn gate_pass_count_grows_with_tolerance(
        seeds in prop::collection::vec(any::<u64>(), 2),
        low_t in 0.01..=0.98f64,
        extra in 0.001..=0.5f64,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seeds[0] ^ seeds[1]);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| GateInputs {
            kappa: rng.gen_range(-1.0..=1.0),
            icc: rng.gen_range(-1.0..=1.0),
            mae: rng.gen_range(0.0..=4.0),
            bias: rng.gen_range(-2.0..=2.0),
            sd_band: rng.gen_range(0.0..=5.0),
            tost_equivalent: rng.gen_bool(0.5),
            wilcoxon_p_corrected: rng.gen_range(0.0..=1.0),
            spearman_rho: rng.gen_range(-1.0..=1.0),
            jaccard_auc: rng.gen_range(0.0..=1.0),
        };
        let candidate = draw(&mut rng);
        let baseline = draw(&mut rng);
        let high_t = (low_t + extra).min(0.99);
        let passed_at = |tolerance: f64| {
            let config = GateConfig { tolerance, ..GateConfig::default() };
            evaluate_gate_inputs(&candidate, &baseline, &config).unwrap().passed
        };
        prop_assert!(passed_at(low_t) <= passed_at(high_t));
    }

    // -- judge parsing -----------------------------------------------------------

    #[test]
    fn parse_rating_finds_a_bare_in_scale_integer(value in 1..=6i32) {
        let scale = scale_1_6();
        prop_assert_eq!(parse_rating(&value.to_string(), &scale).unwrap(), value);
        prop_assert_eq!(
            parse_rating(&format!("Rating: {value}"), &scale).unwrap(),
            value
        );
        prop_assert_eq!(
            parse_rating(&format!("I would rate this a {value}."), &scale).unwrap(),
            value
        );
    }

    #[test]
    fn parse_rating_takes_the_final_standalone_candidate(
        first in 1..=6i32,
        second in 1..=6i32,
    ) {
        let scale = scale_1_6();
        let text = format!("Initially {first}, but on reflection {second}");
        prop_assert_eq!(parse_rating(&text, &scale).unwrap(), second);
    }
}
