//! Data model for ordinal rating studies: rating records, the rating matrix,
//! CSV ingestion, complete-case filtering, and seeded context/test splits.
//!
//! Ratings are integers on a declared [`RatingScale`]. A [`RatingMatrix`] is
//! an immutable-after-load collection of cells keyed by (item, rater, metric);
//! absent cells are explicit misses, never default values. All iteration
//! orders are lexicographic so every derived artifact is diff-stable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors produced by the data model and its file formats.
#[derive(Debug, Error)]
pub enum RatingsError {
    /// A malformed row in a CSV stream (wrong column count, bad integer, bad
    /// header, unknown partition tag). `line` is 1-based, counting the header.
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    /// A rating outside the declared scale.
    #[error("rating {rating} for item {item}, rater {rater}, metric {metric} is outside scale {scale}")]
    Range {
        item: ItemId,
        rater: RaterId,
        metric: Metric,
        rating: i64,
        scale: RatingScale,
    },
    /// Two records for the same (item, rater, metric) cell.
    #[error("duplicate cell for item {item}, rater {rater}, metric {metric}")]
    Conflict {
        item: ItemId,
        rater: RaterId,
        metric: Metric,
    },
    /// Fewer agreed items than the requested context-pool size.
    #[error("only {available} items with matching expert ratings, need {requested}")]
    InsufficientAgreement { available: usize, requested: usize },
    /// A rater did not rate an item that a paired vector requires.
    #[error("no rating for item {item} by rater {rater} on metric {metric}")]
    MissingCell {
        item: ItemId,
        rater: RaterId,
        metric: Metric,
    },
    /// An argument violated a precondition.
    #[error("{0}")]
    Parameter(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

macro_rules! id_newtype {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(
            Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }
    };
}

id_newtype!(
    /// Opaque identifier of a rated item.
    ItemId
);
id_newtype!(
    /// Opaque identifier of a rater (human or model).
    RaterId
);
id_newtype!(
    /// Name of a rating metric, e.g. `"uniqueness"`.
    Metric
);

/// Inclusive integer rating scale. Defaults to 1..=6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingScale {
    pub min: i32,
    pub max: i32,
}

impl RatingScale {
    /// Errors unless `min < max`.
    pub fn new(min: i32, max: i32) -> Result<Self, RatingsError> {
        if min >= max {
            return Err(RatingsError::Parameter(format!(
                "scale min {min} must be below max {max}"
            )));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, rating: i32) -> bool {
        (self.min..=self.max).contains(&rating)
    }

    /// Number of categories on the scale.
    pub fn len(&self) -> usize {
        (self.max - self.min) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All scale values in ascending order.
    pub fn values(&self) -> impl Iterator<Item = i32> {
        self.min..=self.max
    }

    /// Zero-based category index of an in-scale rating.
    pub(crate) fn index_of(&self, rating: i32) -> usize {
        (rating - self.min) as usize
    }
}

impl Default for RatingScale {
    fn default() -> Self {
        Self { min: 1, max: 6 }
    }
}

impl fmt::Display for RatingScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..={}", self.min, self.max)
    }
}

/// One rating: a rater's integer score for an item on a metric.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub item: ItemId,
    pub rater: RaterId,
    pub metric: Metric,
    pub rating: i32,
}

/// All ratings of a study, keyed by (metric, rater, item), plus the declared
/// scale. Immutable after construction; lookups of absent cells return `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingMatrix {
    scale: RatingScale,
    cells: BTreeMap<Metric, BTreeMap<RaterId, BTreeMap<ItemId, i32>>>,
    items: BTreeSet<ItemId>,
}

impl RatingMatrix {
    pub fn new(scale: RatingScale) -> Self {
        Self {
            scale,
            cells: BTreeMap::new(),
            items: BTreeSet::new(),
        }
    }

    /// Builds a matrix from records, enforcing scale and cell uniqueness.
    pub fn from_records(
        scale: RatingScale,
        records: impl IntoIterator<Item = RatingRecord>,
    ) -> Result<Self, RatingsError> {
        let mut matrix = Self::new(scale);
        for record in records {
            matrix.insert(record)?;
        }
        Ok(matrix)
    }

    pub fn scale(&self) -> RatingScale {
        self.scale
    }

    /// Adds one record. Any repeated (item, rater, metric) cell is a
    /// conflict, even when the value matches, so ingest surfaces duplicated
    /// source rows instead of silently absorbing them.
    pub fn insert(&mut self, record: RatingRecord) -> Result<(), RatingsError> {
        if !self.scale.contains(record.rating) {
            return Err(RatingsError::Range {
                item: record.item,
                rater: record.rater,
                metric: record.metric,
                rating: record.rating.into(),
                scale: self.scale,
            });
        }
        let per_rater = self.cells.entry(record.metric.clone()).or_default();
        let per_item = per_rater.entry(record.rater.clone()).or_default();
        if per_item.contains_key(&record.item) {
            return Err(RatingsError::Conflict {
                item: record.item,
                rater: record.rater,
                metric: record.metric,
            });
        }
        per_item.insert(record.item.clone(), record.rating);
        self.items.insert(record.item);
        Ok(())
    }

    /// The rating of `rater` for `item` on `metric`, if present.
    pub fn get(&self, item: &ItemId, rater: &RaterId, metric: &Metric) -> Option<i32> {
        self.cells.get(metric)?.get(rater)?.get(item).copied()
    }

    /// All items appearing anywhere in the matrix, ascending.
    pub fn items(&self) -> impl Iterator<Item = &ItemId> {
        self.items.iter()
    }

    pub fn item_count(&self) -> usize {
        self.items.len()
    }

    /// All raters appearing anywhere in the matrix, ascending.
    pub fn raters(&self) -> BTreeSet<RaterId> {
        self.cells
            .values()
            .flat_map(|per_rater| per_rater.keys().cloned())
            .collect()
    }

    /// All metrics present, ascending.
    pub fn metrics(&self) -> impl Iterator<Item = &Metric> {
        self.cells.keys()
    }

    /// Item-to-rating map of one rater column, restricted to `items`.
    /// Errors on the first item the rater did not rate.
    pub fn column(
        &self,
        rater: &RaterId,
        metric: &Metric,
        items: &BTreeSet<ItemId>,
    ) -> Result<BTreeMap<ItemId, i32>, RatingsError> {
        let mut column = BTreeMap::new();
        for item in items {
            let rating = self.get(item, rater, metric).ok_or_else(|| {
                RatingsError::MissingCell {
                    item: item.clone(),
                    rater: rater.clone(),
                    metric: metric.clone(),
                }
            })?;
            column.insert(item.clone(), rating);
        }
        Ok(column)
    }

    /// All records in canonical (metric, rater, item) order.
    pub fn records(&self) -> impl Iterator<Item = RatingRecord> + '_ {
        self.cells.iter().flat_map(|(metric, per_rater)| {
            per_rater.iter().flat_map(move |(rater, per_item)| {
                per_item.iter().map(move |(item, rating)| RatingRecord {
                    item: item.clone(),
                    rater: rater.clone(),
                    metric: metric.clone(),
                    rating: *rating,
                })
            })
        })
    }

    pub fn record_count(&self) -> usize {
        self.cells
            .values()
            .flat_map(|per_rater| per_rater.values())
            .map(|per_item| per_item.len())
            .sum()
    }

    /// Merges every record of `other` into `self`; duplicate cells conflict.
    pub fn merge(&mut self, other: &RatingMatrix) -> Result<(), RatingsError> {
        for record in other.records() {
            self.insert(record)?;
        }
        Ok(())
    }
}

/// Result of [`complete_case_filter`]: the filtered matrix plus retention
/// counts. An empty result is legal but should be surfaced as a warning.
#[derive(Debug, Clone)]
pub struct FilteredMatrix {
    pub matrix: RatingMatrix,
    /// Items every listed rater rated on the metric.
    pub retained: usize,
    /// Items present in the input but dropped by the filter.
    pub dropped: usize,
}

impl FilteredMatrix {
    /// True when filtering removed every item.
    pub fn is_empty(&self) -> bool {
        self.retained == 0
    }
}

/// Keeps exactly the items rated by every listed rater on `metric`. The
/// returned matrix is restricted to that metric and those raters, with
/// ratings unchanged.
pub fn complete_case_filter(
    matrix: &RatingMatrix,
    raters: &[RaterId],
    metric: &Metric,
) -> Result<FilteredMatrix, RatingsError> {
    if raters.is_empty() {
        return Err(RatingsError::Parameter(
            "complete-case filter needs at least one rater".into(),
        ));
    }
    let mut retained: BTreeSet<ItemId> = matrix.items.clone();
    for rater in raters {
        retained.retain(|item| matrix.get(item, rater, metric).is_some());
    }
    let mut filtered = RatingMatrix::new(matrix.scale);
    for item in &retained {
        for rater in raters {
            // Distinct raters only; a repeated rater in the list would
            // otherwise re-insert its own cells.
            if filtered.get(item, rater, metric).is_some() {
                continue;
            }
            let rating = matrix.get(item, rater, metric).expect("retained item is fully rated");
            filtered.insert(RatingRecord {
                item: item.clone(),
                rater: rater.clone(),
                metric: metric.clone(),
                rating,
            })?;
        }
    }
    Ok(FilteredMatrix {
        retained: retained.len(),
        dropped: matrix.item_count() - retained.len(),
        matrix: filtered,
    })
}

/// Disjoint context/test partition of the item set. Every context item has
/// identical ratings from the two designated experts on the split metric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub context_pool: BTreeSet<ItemId>,
    pub test_set: BTreeSet<ItemId>,
}

/// Reserves `pool_size` items on which both experts gave the same rating,
/// sampled uniformly without replacement from the agreed items using a
/// ChaCha8 generator seeded with `seed`; everything else becomes the test
/// set. Same seed, same data: same split.
pub fn split_context_pool(
    matrix: &RatingMatrix,
    expert_a: &RaterId,
    expert_b: &RaterId,
    metric: &Metric,
    pool_size: usize,
    seed: u64,
) -> Result<DatasetSplit, RatingsError> {
    let agreed: Vec<&ItemId> = matrix
        .items()
        .filter(|item| {
            match (
                matrix.get(item, expert_a, metric),
                matrix.get(item, expert_b, metric),
            ) {
                (Some(a), Some(b)) => a == b,
                _ => false,
            }
        })
        .collect();
    if agreed.len() < pool_size {
        return Err(RatingsError::InsufficientAgreement {
            available: agreed.len(),
            requested: pool_size,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, agreed.len(), pool_size);
    let context_pool: BTreeSet<ItemId> = chosen.iter().map(|i| agreed[i].clone()).collect();
    let test_set = matrix
        .items()
        .filter(|item| !context_pool.contains(*item))
        .cloned()
        .collect();
    Ok(DatasetSplit {
        context_pool,
        test_set,
    })
}

/// Two aligned rating vectors over the same items in ascending item order.
/// By convention `a` holds the candidate rater and `b` the reference rater;
/// difference-based statistics use d = b - a.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairedRatings {
    pub items: Vec<ItemId>,
    pub a: Vec<i32>,
    pub b: Vec<i32>,
    pub scale: RatingScale,
}

impl PairedRatings {
    /// Validates alignment and scale membership. Empty pairs are allowed
    /// here; statistics reject them with insufficient-data errors.
    pub fn new(
        items: Vec<ItemId>,
        a: Vec<i32>,
        b: Vec<i32>,
        scale: RatingScale,
    ) -> Result<Self, RatingsError> {
        if items.len() != a.len() || a.len() != b.len() {
            return Err(RatingsError::Parameter(format!(
                "paired ratings misaligned: {} items, {} candidate ratings, {} reference ratings",
                items.len(),
                a.len(),
                b.len()
            )));
        }
        for (&ra, &rb) in a.iter().zip(&b) {
            for rating in [ra, rb] {
                if !scale.contains(rating) {
                    return Err(RatingsError::Parameter(format!(
                        "rating {rating} outside scale {scale}"
                    )));
                }
            }
        }
        Ok(Self { items, a, b, scale })
    }

    /// Builds a pair from bare vectors, synthesizing item ids `i0001`,
    /// `i0002`, ... Convenient for tests and examples.
    pub fn from_values(a: Vec<i32>, b: Vec<i32>, scale: RatingScale) -> Result<Self, RatingsError> {
        let items = (1..=a.len()).map(|i| ItemId::new(format!("i{i:04}"))).collect();
        Self::new(items, a, b, scale)
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Differences d_i = b_i - a_i (reference minus candidate).
    pub fn differences(&self) -> Vec<f64> {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(&a, &b)| f64::from(b) - f64::from(a))
            .collect()
    }

    /// The pair with candidate and reference swapped.
    pub fn swapped(&self) -> Self {
        Self {
            items: self.items.clone(),
            a: self.b.clone(),
            b: self.a.clone(),
            scale: self.scale,
        }
    }
}

/// Aligned rating vectors for `rater_a` (candidate slot) and `rater_b`
/// (reference slot) over `items` in ascending item order.
pub fn paired_vector(
    matrix: &RatingMatrix,
    rater_a: &RaterId,
    rater_b: &RaterId,
    metric: &Metric,
    items: &BTreeSet<ItemId>,
) -> Result<PairedRatings, RatingsError> {
    let mut ordered = Vec::with_capacity(items.len());
    let mut a = Vec::with_capacity(items.len());
    let mut b = Vec::with_capacity(items.len());
    for item in items {
        for (rater, column) in [(rater_a, &mut a), (rater_b, &mut b)] {
            let rating =
                matrix
                    .get(item, rater, metric)
                    .ok_or_else(|| RatingsError::MissingCell {
                        item: item.clone(),
                        rater: rater.clone(),
                        metric: metric.clone(),
                    })?;
            column.push(rating);
        }
        ordered.push(item.clone());
    }
    PairedRatings::new(ordered, a, b, matrix.scale)
}

const RATINGS_HEADER: [&str; 4] = ["item_id", "rater_id", "metric", "rating"];

/// Parses the ratings CSV schema (`item_id,rater_id,metric,rating`) into a
/// matrix, rejecting malformed rows, out-of-scale ratings, and duplicates.
pub fn load_ratings(source: impl io::Read, scale: RatingScale) -> Result<RatingMatrix, RatingsError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.iter().ne(RATINGS_HEADER) {
        return Err(RatingsError::Parse {
            line: 1,
            msg: format!(
                "expected header {}, found {}",
                RATINGS_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut matrix = RatingMatrix::new(scale);
    for (index, row) in reader.records().enumerate() {
        let line = index as u64 + 2;
        let row = row?;
        if row.len() != RATINGS_HEADER.len() {
            return Err(RatingsError::Parse {
                line,
                msg: format!("expected {} columns, found {}", RATINGS_HEADER.len(), row.len()),
            });
        }
        let rating_text = row[3].trim();
        let rating: i64 = rating_text.parse().map_err(|_| RatingsError::Parse {
            line,
            msg: format!("rating {rating_text:?} is not an integer"),
        })?;
        let item = ItemId::new(&row[0]);
        let rater = RaterId::new(&row[1]);
        let metric = Metric::new(&row[2]);
        let narrowed = i32::try_from(rating).map_err(|_| RatingsError::Range {
            item: item.clone(),
            rater: rater.clone(),
            metric: metric.clone(),
            rating,
            scale,
        })?;
        matrix.insert(RatingRecord {
            item,
            rater,
            metric,
            rating: narrowed,
        })?;
    }
    Ok(matrix)
}

/// [`load_ratings`] over a file path.
pub fn load_ratings_path(path: impl AsRef<Path>, scale: RatingScale) -> Result<RatingMatrix, RatingsError> {
    load_ratings(std::fs::File::open(path)?, scale)
}

/// Writes the matrix back to the ratings CSV schema in canonical
/// (metric, rater, item) order; loading the output reproduces the matrix.
pub fn write_ratings_csv(matrix: &RatingMatrix, sink: impl io::Write) -> Result<(), RatingsError> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(RATINGS_HEADER)?;
    for record in matrix.records() {
        writer.write_record([
            record.item.as_str(),
            record.rater.as_str(),
            record.metric.as_str(),
            &record.rating.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

const SPLIT_HEADER: [&str; 2] = ["item_id", "partition"];

/// Writes a split as `item_id,partition` rows (partition is `context` or
/// `test`), items ascending within each partition, context first.
pub fn write_split_manifest(split: &DatasetSplit, sink: impl io::Write) -> Result<(), RatingsError> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(SPLIT_HEADER)?;
    for (items, tag) in [(&split.context_pool, "context"), (&split.test_set, "test")] {
        for item in items {
            writer.write_record([item.as_str(), tag])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Parses a split manifest written by [`write_split_manifest`].
pub fn load_split_manifest(source: impl io::Read) -> Result<DatasetSplit, RatingsError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.iter().ne(SPLIT_HEADER) {
        return Err(RatingsError::Parse {
            line: 1,
            msg: format!(
                "expected header {}, found {}",
                SPLIT_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut split = DatasetSplit {
        context_pool: BTreeSet::new(),
        test_set: BTreeSet::new(),
    };
    for (index, row) in reader.records().enumerate() {
        let line = index as u64 + 2;
        let row = row?;
        if row.len() != SPLIT_HEADER.len() {
            return Err(RatingsError::Parse {
                line,
                msg: format!("expected {} columns, found {}", SPLIT_HEADER.len(), row.len()),
            });
        }
        let item = ItemId::new(&row[0]);
        let inserted = match &row[1] {
            "context" => split.context_pool.insert(item.clone()),
            "test" => split.test_set.insert(item.clone()),
            other => {
                return Err(RatingsError::Parse {
                    line,
                    msg: format!("partition must be context or test, found {other:?}"),
                })
            }
        };
        if !inserted || (split.context_pool.contains(&item) && split.test_set.contains(&item)) {
            return Err(RatingsError::Parse {
                line,
                msg: format!("item {item} listed twice"),
            });
        }
    }
    Ok(split)
}
