//! Tie-inclusive top sets and Jaccard overlap curves.
//!
//! Rating ties make "top N items" ambiguous, so the top set here always
//! includes every item whose rating reaches the boundary value. Overlap
//! between two raters' top sets is measured with Jaccard similarity, swept
//! across selection fractions into a curve, and summarized by normalized
//! trapezoidal area under that curve.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::ratings::{ItemId, PairedRatings};

#[derive(Debug, Error)]
pub enum TopSetError {
    #[error("{0}")]
    Parameter(String),
    #[error("jaccard undefined: both sets empty")]
    Undefined,
    #[error("need at least {needed} items, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Items rated at or above `boundary_rating`. `actual_fraction` is the
/// realized share of items, which exceeds `nominal_fraction` whenever ties
/// straddle the cutoff.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopSet {
    pub items: BTreeSet<ItemId>,
    pub boundary_rating: i32,
    pub nominal_fraction: f64,
    pub actual_fraction: f64,
}

/// Which side of a rating pair anchors the selection fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PairSide {
    A,
    B,
}

/// One point of the overlap curve: the realized selection fraction on the
/// reference side and the Jaccard overlap at that fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub nominal_fraction: f64,
    pub actual_fraction: f64,
    pub jaccard: f64,
}

/// Overlap curve and its normalized area.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JaccardCurve {
    pub points: Vec<CurvePoint>,
    pub auc: f64,
}

/// Smallest tie-inclusive set of top-rated items containing at least
/// `n_target` items: the boundary is the largest rating whose at-or-above
/// count reaches `n_target`, and every item at or above it is included.
pub fn tie_inclusive_top_set(
    ratings: &BTreeMap<ItemId, i32>,
    n_target: usize,
) -> Result<TopSet, TopSetError> {
    let total = ratings.len();
    if total == 0 {
        return Err(TopSetError::InsufficientData { needed: 1, got: 0 });
    }
    if n_target == 0 || n_target > total {
        return Err(TopSetError::Parameter(format!(
            "n_target must be in 1..={total}, got {n_target}"
        )));
    }
    let mut values: Vec<i32> = ratings.values().copied().collect();
    values.sort_unstable_by(|x, y| y.cmp(x));
    let boundary_rating = values[n_target - 1];
    let items: BTreeSet<ItemId> = ratings
        .iter()
        .filter(|(_, r)| **r >= boundary_rating)
        .map(|(item, _)| item.clone())
        .collect();
    let actual_fraction = items.len() as f64 / total as f64;
    Ok(TopSet {
        items,
        boundary_rating,
        nominal_fraction: n_target as f64 / total as f64,
        actual_fraction,
    })
}

/// Jaccard similarity |A intersect B| / |A union B|. Undefined when both
/// sets are empty.
pub fn jaccard(set_a: &BTreeSet<ItemId>, set_b: &BTreeSet<ItemId>) -> Result<f64, TopSetError> {
    let union = set_a.union(set_b).count();
    if union == 0 {
        return Err(TopSetError::Undefined);
    }
    let intersection = set_a.intersection(set_b).count();
    Ok(intersection as f64 / union as f64)
}

/// Overlap curve across `fractions`. For each nominal fraction f the
/// reference side selects its tie-inclusive top ceil(f * n) items; the
/// other side then selects a top set with the same target size as the
/// reference set actually realized, so both sides aim at the same depth.
/// Points are deduplicated on the realized fraction (keeping the last) and
/// the anchor point (1, 1) is appended when missing.
pub fn jaccard_curve(
    pair: &PairedRatings,
    reference: PairSide,
    fractions: &[f64],
) -> Result<JaccardCurve, TopSetError> {
    let total = pair.len();
    if total == 0 {
        return Err(TopSetError::InsufficientData { needed: 1, got: 0 });
    }
    if fractions.is_empty() {
        return Err(TopSetError::Parameter("empty fraction grid".into()));
    }
    for f in fractions {
        if !(*f > 0.0 && *f <= 1.0) {
            return Err(TopSetError::Parameter(format!(
                "fractions must lie in (0, 1], got {f}"
            )));
        }
    }
    let (reference_values, candidate_values) = match reference {
        PairSide::A => (&pair.a, &pair.b),
        PairSide::B => (&pair.b, &pair.a),
    };
    let reference_map: BTreeMap<ItemId, i32> = pair
        .items
        .iter()
        .cloned()
        .zip(reference_values.iter().copied())
        .collect();
    let candidate_map: BTreeMap<ItemId, i32> = pair
        .items
        .iter()
        .cloned()
        .zip(candidate_values.iter().copied())
        .collect();

    let mut points = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let n_target = (fraction * total as f64).ceil() as usize;
        let n_target = n_target.clamp(1, total);
        let reference_set = tie_inclusive_top_set(&reference_map, n_target)?;
        let candidate_set = tie_inclusive_top_set(&candidate_map, reference_set.items.len())?;
        let overlap = jaccard(&reference_set.items, &candidate_set.items)?;
        points.push(CurvePoint {
            nominal_fraction: fraction,
            actual_fraction: reference_set.actual_fraction,
            jaccard: overlap,
        });
    }
    points.sort_by(|p, q| p.actual_fraction.total_cmp(&q.actual_fraction));
    let mut deduped: Vec<CurvePoint> = Vec::with_capacity(points.len());
    for point in points {
        match deduped.last_mut() {
            Some(last) if last.actual_fraction == point.actual_fraction => *last = point,
            _ => deduped.push(point),
        }
    }
    if deduped.last().map(|p| p.actual_fraction) != Some(1.0) {
        deduped.push(CurvePoint {
            nominal_fraction: 1.0,
            actual_fraction: 1.0,
            jaccard: 1.0,
        });
    }
    let auc = curve_auc(&deduped)?;
    Ok(JaccardCurve {
        points: deduped,
        auc,
    })
}

/// Trapezoidal area under the curve over the realized-fraction axis,
/// normalized by the spanned width so a constant curve at height c has
/// area exactly c.
pub fn curve_auc(points: &[CurvePoint]) -> Result<f64, TopSetError> {
    if points.len() < 2 {
        return Err(TopSetError::InsufficientData {
            needed: 2,
            got: points.len(),
        });
    }
    let mut area = 0.0;
    let mut width = 0.0;
    for window in points.windows(2) {
        let dx = window[1].actual_fraction - window[0].actual_fraction;
        if dx < 0.0 {
            return Err(TopSetError::Parameter(
                "curve points must be sorted by realized fraction".into(),
            ));
        }
        area += dx * ((window[0].jaccard + window[1].jaccard) / 2.0);
        width += dx;
    }
    if width == 0.0 {
        return Err(TopSetError::Parameter(
            "curve spans zero width on the realized-fraction axis".into(),
        ));
    }
    Ok(area / width)
}

/// Write a curve as CSV with header `nominal_fraction,actual_fraction,jaccard`.
pub fn write_curve_csv(curve: &JaccardCurve, path: &Path) -> Result<(), TopSetError> {
    let mut out = String::from("nominal_fraction,actual_fraction,jaccard\n");
    for point in &curve.points {
        out.push_str(&format!(
            "{:.2},{:.6},{:.6}\n",
            point.nominal_fraction, point.actual_fraction, point.jaccard
        ));
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratings::RatingScale;

    fn map(pairs: &[(&str, i32)]) -> BTreeMap<ItemId, i32> {
        pairs
            .iter()
            .map(|(name, rating)| (ItemId::from(*name), *rating))
            .collect()
    }

    fn set(names: &[&str]) -> BTreeSet<ItemId> {
        names.iter().map(|n| ItemId::from(*n)).collect()
    }

    #[test]
    fn top_set_expands_across_ties() {
        let ratings = map(&[("A", 6), ("B", 5), ("C", 5), ("D", 4)]);
        let top = tie_inclusive_top_set(&ratings, 2).unwrap();
        assert_eq!(top.items, set(&["A", "B", "C"]));
        assert_eq!(top.boundary_rating, 5);
        assert_eq!(top.nominal_fraction, 0.5);
        assert_eq!(top.actual_fraction, 0.75);
    }

    #[test]
    fn top_set_with_distinct_ratings_is_exact() {
        let ratings = map(&[("A", 6), ("B", 5), ("C", 4), ("D", 3)]);
        let top = tie_inclusive_top_set(&ratings, 2).unwrap();
        assert_eq!(top.items, set(&["A", "B"]));
        assert_eq!(top.actual_fraction, 0.5);
    }

    #[test]
    fn top_set_full_target_returns_everything() {
        let ratings = map(&[("A", 2), ("B", 5), ("C", 2)]);
        let top = tie_inclusive_top_set(&ratings, 3).unwrap();
        assert_eq!(top.items.len(), 3);
        assert_eq!(top.boundary_rating, 2);
        assert_eq!(top.actual_fraction, 1.0);
    }

    #[test]
    fn top_set_all_tied_returns_everything_at_any_target() {
        let ratings = map(&[("A", 4), ("B", 4), ("C", 4)]);
        let top = tie_inclusive_top_set(&ratings, 1).unwrap();
        assert_eq!(top.items.len(), 3);
        assert_eq!(top.actual_fraction, 1.0);
    }

    #[test]
    fn top_set_rejects_bad_targets() {
        let ratings = map(&[("A", 4)]);
        assert!(tie_inclusive_top_set(&ratings, 0).is_err());
        assert!(tie_inclusive_top_set(&ratings, 2).is_err());
        assert!(tie_inclusive_top_set(&BTreeMap::new(), 1).is_err());
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(
            jaccard(&set(&["A", "B", "C"]), &set(&["B", "C", "D"])).unwrap(),
            0.5
        );
        assert_eq!(jaccard(&set(&["A"]), &set(&["A"])).unwrap(), 1.0);
        assert_eq!(jaccard(&set(&["A"]), &set(&["B"])).unwrap(), 0.0);
        assert_eq!(jaccard(&set(&["A"]), &set(&[])).unwrap(), 0.0);
        assert!(matches!(
            jaccard(&set(&[]), &set(&[])),
            Err(TopSetError::Undefined)
        ));
    }

    #[test]
    fn curve_on_identical_raters_is_exactly_one() {
        let values = vec![4, 2, 6, 3, 5, 1, 4, 2];
        let pair =
            PairedRatings::from_values(values.clone(), values, RatingScale::default()).unwrap();
        let fractions: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
        let curve = jaccard_curve(&pair, PairSide::A, &fractions).unwrap();
        assert!(curve.points.iter().all(|p| p.jaccard == 1.0));
        assert_eq!(curve.auc, 1.0);
    }

    #[test]
    fn curve_points_are_sorted_deduped_and_anchored() {
        let pair = PairedRatings::from_values(
            vec![6, 5, 4, 3, 2, 1],
            vec![1, 2, 3, 4, 5, 6],
            RatingScale::default(),
        )
        .unwrap();
        let fractions = vec![0.5, 0.1, 0.1, 0.9];
        let curve = jaccard_curve(&pair, PairSide::A, &fractions).unwrap();
        let xs: Vec<f64> = curve.points.iter().map(|p| p.actual_fraction).collect();
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        assert_eq!(xs, sorted);
        assert_eq!(curve.points.last().unwrap().actual_fraction, 1.0);
        assert_eq!(curve.points.last().unwrap().jaccard, 1.0);
    }

    #[test]
    fn curve_matches_hand_computed_opposed_rankings() {
        // Opposed rankings on 4 distinct-valued items: at depth 1 the top
        // sets are disjoint, at depth 2 overlap is 0 (top halves disjoint),
        // at depth 3 the union is all 4 and the intersection is 2.
        let pair = PairedRatings::from_values(
            vec![6, 5, 4, 3],
            vec![3, 4, 5, 6],
            RatingScale::default(),
        )
        .unwrap();
        let curve = jaccard_curve(&pair, PairSide::A, &[0.25, 0.5, 0.75, 1.0]).unwrap();
        let overlaps: Vec<f64> = curve.points.iter().map(|p| p.jaccard).collect();
        assert_eq!(overlaps, vec![0.0, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn auc_of_two_point_ramp() {
        let points = vec![
            CurvePoint {
                nominal_fraction: 0.1,
                actual_fraction: 0.1,
                jaccard: 0.0,
            },
            CurvePoint {
                nominal_fraction: 1.0,
                actual_fraction: 1.0,
                jaccard: 1.0,
            },
        ];
        assert_eq!(curve_auc(&points).unwrap(), 0.5);
    }

    #[test]
    fn auc_of_constant_curve_is_that_constant() {
        let points: Vec<CurvePoint> = (1..=5)
            .map(|i| CurvePoint {
                nominal_fraction: i as f64 / 5.0,
                actual_fraction: i as f64 / 5.0,
                jaccard: 0.7,
            })
            .collect();
        assert!((curve_auc(&points).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn auc_rejects_degenerate_input() {
        let point = CurvePoint {
            nominal_fraction: 1.0,
            actual_fraction: 1.0,
            jaccard: 1.0,
        };
        assert!(curve_auc(&[point]).is_err());
        assert!(curve_auc(&[point, point]).is_err());
    }

    #[test]
    fn curve_csv_round_trip_format() {
        let pair = PairedRatings::from_values(
            vec![6, 5, 4, 3],
            vec![6, 5, 4, 3],
            RatingScale::default(),
        )
        .unwrap();
        let curve = jaccard_curve(&pair, PairSide::A, &[0.5, 1.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        write_curve_csv(&curve, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "nominal_fraction,actual_fraction,jaccard"
        );
        assert_eq!(lines.next().unwrap(), "0.50,0.500000,1.000000");
        assert_eq!(lines.next().unwrap(), "1.00,1.000000,1.000000");
    }
}
