//! Core data model: courier timelines, the 14-feature schema, min-max
//! normalization statistics, churn labeling, and user-level dataset splits.

use std::collections::BTreeSet;

use chrono::NaiveDate;

use crate::{Error, Result};

/// Number of behavioral features per day.
pub const FEATURE_COUNT: usize = 14;

/// One day's feature vector.
pub type FeatureVec = [f64; FEATURE_COUNT];

/// Canonical feature order. Radar axis `k` always carries feature `k`, so the
/// order is fixed and part of every serialized artifact.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "avg_orders_7d",
    "avg_earnings_7d",
    "delta_orders",
    "acceptance_rate",
    "activity_score",
    "b2v_distance",
    "lunch_trips",
    "assigns",
    "avg_ride_time",
    "batch_trips",
    "ltv",
    "avg_dist_per_delivery",
    "avg_daily_trips",
    "avg_daily_income",
];

/// Index of `avg_daily_trips`, the per-day trip count. A day with trips > 0
/// must appear in the timeline's active-date set.
pub const TRIPS_FEATURE: usize = 12;

/// Default churn horizon: a courier inactive for 45 consecutive days is
/// considered churned.
pub const DEFAULT_HORIZON_DAYS: i64 = 45;

/// The feature schema: canonical names plus free-text units, mostly useful
/// for axis legends next to Grad-CAM output.
#[derive(Debug, Clone)]
pub struct FeatureSchema {
    names: Vec<&'static str>,
    units: Vec<&'static str>,
}

impl FeatureSchema {
    pub fn canonical() -> Self {
        FeatureSchema {
            names: FEATURE_NAMES.to_vec(),
            units: vec![
                "orders/day",
                "currency/day",
                "orders/week",
                "ratio",
                "ratio",
                "km",
                "trips/day",
                "orders/day",
                "minutes",
                "trips/day",
                "currency",
                "km",
                "trips/day",
                "currency/day",
            ],
        }
    }

    pub fn names(&self) -> &[&'static str] {
        &self.names
    }

    pub fn unit(&self, k: usize) -> &'static str {
        self.units[k]
    }

    /// Index of a feature name, if present.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| *n == name)
    }
}

/// One courier's dated history: a strictly increasing sequence of daily
/// feature rows plus the set of days with any platform activity.
#[derive(Debug, Clone)]
pub struct CourierTimeline {
    pub courier_id: String,
    pub days: Vec<(NaiveDate, FeatureVec)>,
    pub active_dates: BTreeSet<NaiveDate>,
}

impl CourierTimeline {
    /// Validate the timeline invariants: strictly increasing dates, finite
    /// feature values, and active-date consistency with the trip count.
    pub fn validate(&self) -> Result<()> {
        for pair in self.days.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::data(format!(
                    "courier {}: days not strictly increasing at {}",
                    self.courier_id, pair[1].0
                )));
            }
        }
        for (date, features) in &self.days {
            for (k, v) in features.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::data(format!(
                        "courier {}: non-finite value for {} on {}",
                        self.courier_id, FEATURE_NAMES[k], date
                    )));
                }
            }
            if features[TRIPS_FEATURE] > 0.0 && !self.active_dates.contains(date) {
                return Err(Error::data(format!(
                    "courier {}: {} has trips but is not an active date",
                    self.courier_id, date
                )));
            }
        }
        Ok(())
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.days.first().map(|(d, _)| *d)
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.days.last().map(|(d, _)| *d)
    }

    /// Last day with platform activity, if any.
    pub fn last_active_date(&self) -> Option<NaiveDate> {
        self.active_dates.iter().next_back().copied()
    }
}

/// Per-feature min/max fitted on the training split. Radar radii must live in
/// [0,1], hence min-max rather than z-score.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub ranges: [(f64, f64); FEATURE_COUNT],
    /// Split the stats were fitted on. Anything other than "train" is
    /// rejected by the modeling pipeline (leakage guard).
    pub fitted_on: String,
}

impl NormStats {
    /// A feature whose train-split min equals its max carries no information;
    /// `normalize` maps it to the axis midpoint.
    pub fn is_degenerate(&self, k: usize) -> bool {
        self.ranges[k].0 == self.ranges[k].1
    }

    pub fn degenerate_features(&self) -> Vec<usize> {
        (0..FEATURE_COUNT).filter(|&k| self.is_degenerate(k)).collect()
    }

    pub fn assert_train_fitted(&self) -> Result<()> {
        if self.fitted_on != "train" {
            return Err(Error::invalid(format!(
                "normalization stats fitted on '{}', expected 'train'",
                self.fitted_on
            )));
        }
        Ok(())
    }
}

/// Fit per-feature min/max over every day of the given (train-split) timelines.
pub fn fit_norm_stats(timelines: &[CourierTimeline]) -> Result<NormStats> {
    if timelines.iter().all(|t| t.days.is_empty()) {
        return Err(Error::invalid("no training data"));
    }
    let mut ranges = [(f64::INFINITY, f64::NEG_INFINITY); FEATURE_COUNT];
    for timeline in timelines {
        for (_, features) in &timeline.days {
            for (k, &v) in features.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::data(format!(
                        "courier {}: non-finite value for {}",
                        timeline.courier_id, FEATURE_NAMES[k]
                    )));
                }
                if v < ranges[k].0 {
                    ranges[k].0 = v;
                }
                if v > ranges[k].1 {
                    ranges[k].1 = v;
                }
            }
        }
    }
    Ok(NormStats {
        ranges,
        fitted_on: "train".to_owned(),
    })
}

/// Min-max normalize one day's features into [0,1]. Out-of-range values
/// (possible at val/test time) clamp; degenerate features map to 0.5.
pub fn normalize(features: &FeatureVec, stats: &NormStats) -> FeatureVec {
    let mut out = [0.0; FEATURE_COUNT];
    for k in 0..FEATURE_COUNT {
        let (min, max) = stats.ranges[k];
        out[k] = if min == max {
            0.5
        } else {
            ((features[k] - min) / (max - min)).clamp(0.0, 1.0)
        };
    }
    out
}

/// Churn label relative to a reference day: churned means no platform
/// activity in the interval `(reference_date, reference_date + horizon_days]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChurnLabel {
    pub churned: bool,
    pub reference_date: NaiveDate,
    pub horizon_days: i64,
}

impl ChurnLabel {
    pub fn class(&self) -> u8 {
        self.churned as u8
    }
}

/// Labeling outcome once the dataset's global end date is taken into account.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelOutcome {
    Labeled(ChurnLabel),
    /// The horizon extends past the last observed date, so the label cannot
    /// be established. Censored windows are excluded from supervised sets.
    Censored,
}

/// Label a courier at `reference_date`: 1 iff no active date falls in
/// `(reference_date, reference_date + horizon]`.
pub fn assign_label(
    timeline: &CourierTimeline,
    reference_date: NaiveDate,
    horizon_days: i64,
) -> Result<ChurnLabel> {
    let first = timeline
        .first_date()
        .ok_or_else(|| Error::invalid(format!("courier {}: empty timeline", timeline.courier_id)))?;
    if reference_date < first {
        return Err(Error::invalid(format!(
            "courier {}: reference date {} precedes first timeline date {}",
            timeline.courier_id, reference_date, first
        )));
    }
    if horizon_days <= 0 {
        return Err(Error::invalid("horizon must be positive"));
    }
    let horizon_end = reference_date + chrono::Duration::days(horizon_days);
    let active_in_horizon = timeline
        .active_dates
        .range((
            std::ops::Bound::Excluded(reference_date),
            std::ops::Bound::Included(horizon_end),
        ))
        .next()
        .is_some();
    Ok(ChurnLabel {
        churned: !active_in_horizon,
        reference_date,
        horizon_days,
    })
}

/// Like [`assign_label`] but censors windows whose horizon crosses the
/// dataset's last observed date.
pub fn assign_label_censored(
    timeline: &CourierTimeline,
    reference_date: NaiveDate,
    horizon_days: i64,
    dataset_end: NaiveDate,
) -> Result<LabelOutcome> {
    if reference_date + chrono::Duration::days(horizon_days) > dataset_end {
        return Ok(LabelOutcome::Censored);
    }
    Ok(LabelOutcome::Labeled(assign_label(
        timeline,
        reference_date,
        horizon_days,
    )?))
}

/// Dataset split of one courier. Every window of a courier inherits the
/// courier's split, so identities never leak across splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Split> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::data(format!("unknown split '{other}'"))),
        }
    }
}

/// Courier-level 80/10/10 split assignment.
#[derive(Debug, Clone)]
pub struct SplitAssignment {
    pub seed: u64,
    assignments: Vec<(String, Split)>,
}

impl SplitAssignment {
    pub fn split_of(&self, courier_id: &str) -> Option<Split> {
        self.assignments
            .binary_search_by(|(id, _)| id.as_str().cmp(courier_id))
            .ok()
            .map(|i| self.assignments[i].1)
    }

    /// Assignments sorted by courier id.
    pub fn entries(&self) -> &[(String, Split)] {
        &self.assignments
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for (_, split) in &self.assignments {
            match split {
                Split::Train => counts.0 += 1,
                Split::Val => counts.1 += 1,
                Split::Test => counts.2 += 1,
            }
        }
        counts
    }
}

// FNV-1a over the id bytes, then a splitmix64 round mixing in the seed.
// Stable across platforms and rustc versions, unlike `DefaultHasher`.
fn stable_hash(courier_id: &str, seed: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in courier_id.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic courier-level 80/10/10 split. Couriers are ranked by a
/// stable hash of (id, seed) and the ranking is cut at exact 80%/90%
/// boundaries, so the assignment depends on id content only — permuting the
/// input order changes nothing — while proportions stay within one courier
/// of 80/10/10.
pub fn make_splits(courier_ids: &[String], seed: u64) -> Result<SplitAssignment> {
    if courier_ids.len() < 10 {
        return Err(Error::invalid("too few users to split"));
    }
    let mut unique: BTreeSet<&str> = BTreeSet::new();
    for id in courier_ids {
        if !unique.insert(id.as_str()) {
            return Err(Error::invalid(format!("duplicate courier id '{id}'")));
        }
    }

    let mut ranked: Vec<(u64, &str)> = courier_ids
        .iter()
        .map(|id| (stable_hash(id, seed), id.as_str()))
        .collect();
    ranked.sort_unstable_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));

    let n = ranked.len();
    let n_train = (0.8 * n as f64).round() as usize;
    let n_val = (0.1 * n as f64).round() as usize;

    let mut assignments: Vec<(String, Split)> = ranked
        .iter()
        .enumerate()
        .map(|(rank, (_, id))| {
            let split = if rank < n_train {
                Split::Train
            } else if rank < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
            ((*id).to_owned(), split)
        })
        .collect();
    assignments.sort_unstable_by(|a, b| a.0.cmp(&b.0));

    Ok(SplitAssignment { seed, assignments })
}
