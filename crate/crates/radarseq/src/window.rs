//! Fixed-length image-sequence assembly: sliding windows over courier
//! timelines, leading padding for short histories, and label alignment.
//!
//! Windows slide over calendar days, not row indices. A calendar day inside
//! the window with no feature row renders as an all-zero feature vector
//! ("on platform but idle" — a center dot), which is distinct from the
//! all-white padding charts that stand for days before the courier existed.

use std::collections::HashMap;
use std::sync::Arc;

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::domain::{
    assign_label, normalize, CourierTimeline, FeatureVec, NormStats, Split, SplitAssignment,
    DEFAULT_HORIZON_DAYS, FEATURE_COUNT,
};
use crate::render::{render_chart, render_padding, RadarGeometry, RadarImage};
use crate::{Error, Result};

/// Sequence length: every emitted window holds exactly this many charts.
pub const WINDOW_LEN: usize = 50;

/// Coarse stride, used for training-set augmentation.
pub const COARSE_STRIDE: usize = 5;

/// Fine stride, used for the final evaluation sweep.
pub const FINE_STRIDE: usize = 1;

/// Windowing strategy.
#[derive(Debug, Clone, Copy)]
pub struct WindowPlan {
    pub stride: usize,
    /// Keep windows whose label horizon crosses the dataset end. Off by
    /// default; censored windows carry no trustworthy label.
    pub include_censored: bool,
}

impl WindowPlan {
    pub fn coarse() -> Self {
        WindowPlan { stride: COARSE_STRIDE, include_censored: false }
    }

    pub fn fine() -> Self {
        WindowPlan { stride: FINE_STRIDE, include_censored: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::invalid("stride must be positive"));
        }
        Ok(())
    }
}

/// One model input: exactly [`WINDOW_LEN`] charts, the leading `pad_count` of
/// which are padding, plus the churn label anchored at the window's last day.
#[derive(Debug, Clone)]
pub struct WindowedSequence {
    pub courier_id: String,
    pub images: Vec<Arc<RadarImage>>,
    /// Normalized per-day features aligned with `images`; padding slots are
    /// all-zero. Kept for the raw-feature ablation and permutation
    /// importance.
    pub day_features: Vec<[f32; FEATURE_COUNT]>,
    pub pad_count: usize,
    pub end_date: NaiveDate,
    pub label: crate::domain::ChurnLabel,
    pub censored: bool,
    pub split: Split,
}

impl WindowedSequence {
    pub fn assert_invariants(&self) {
        assert_eq!(self.images.len(), WINDOW_LEN, "sequence length must be {WINDOW_LEN}");
        assert_eq!(self.day_features.len(), WINDOW_LEN);
        assert_eq!(self.label.reference_date, self.end_date);
        assert!(self.pad_count <= WINDOW_LEN);
    }
}

/// Enumerate window index ranges over a history of `len` days.
///
/// For `len >= window_len` the windows end at `window_len-1`,
/// `window_len-1+stride`, ... up to `len-1`; for shorter histories exactly
/// one window covers everything and padding is applied downstream.
pub fn enumerate_windows(len: usize, window_len: usize, stride: usize) -> Vec<(usize, usize)> {
    if len == 0 {
        return Vec::new();
    }
    if len < window_len {
        return vec![(0, len - 1)];
    }
    (0..)
        .map(|i| window_len - 1 + i * stride)
        .take_while(|&end| end <= len - 1)
        .map(|end| (end + 1 - window_len, end))
        .collect()
}

/// Per-day render cache for one courier: normalized features and chart for
/// every calendar offset in the timeline's span.
struct DayCache {
    first_date: NaiveDate,
    charts: Vec<Arc<RadarImage>>,
    features: Vec<[f32; FEATURE_COUNT]>,
}

impl DayCache {
    fn build(
        timeline: &CourierTimeline,
        stats: &NormStats,
        geometry: &RadarGeometry,
    ) -> Result<DayCache> {
        let first = timeline
            .first_date()
            .ok_or_else(|| Error::data(format!("courier {}: empty timeline", timeline.courier_id)))?;
        let last = timeline.last_date().expect("nonempty");
        let span = (last - first).num_days() as usize + 1;

        let mut rows: HashMap<usize, &FeatureVec> = HashMap::with_capacity(timeline.days.len());
        for (date, features) in &timeline.days {
            rows.insert((*date - first).num_days() as usize, features);
        }

        let zero: FeatureVec = [0.0; FEATURE_COUNT];
        let mut charts = Vec::with_capacity(span);
        let mut features = Vec::with_capacity(span);
        for offset in 0..span {
            let raw = rows.get(&offset).copied().unwrap_or(&zero);
            let normalized = normalize(raw, stats);
            let chart = render_chart(&normalized, geometry).map_err(|e| {
                Error::data(format!("courier {} day {offset}: {e}", timeline.courier_id))
            })?;
            let mut f32s = [0.0f32; FEATURE_COUNT];
            for (dst, src) in f32s.iter_mut().zip(normalized.iter()) {
                *dst = *src as f32;
            }
            charts.push(Arc::new(chart));
            features.push(f32s);
        }
        Ok(DayCache { first_date: first, charts, features })
    }
}

/// Assemble one window into a [`WindowedSequence`]. Returns `Ok(None)` when
/// the label is censored and the plan excludes censored windows.
fn build_from_cache(
    timeline: &CourierTimeline,
    cache: &DayCache,
    window: (usize, usize),
    padding: &Arc<RadarImage>,
    split: Split,
    dataset_end: NaiveDate,
    include_censored: bool,
) -> Result<Option<WindowedSequence>> {
    let (start, end) = window;
    let end_date = cache.first_date + chrono::Duration::days(end as i64);
    let real_days = end - start + 1;
    assert!(real_days <= WINDOW_LEN, "window longer than {WINDOW_LEN}");
    let pad_count = WINDOW_LEN - real_days;

    let label = assign_label(timeline, end_date, DEFAULT_HORIZON_DAYS)?;
    let censored =
        end_date + chrono::Duration::days(DEFAULT_HORIZON_DAYS) > dataset_end;
    if censored && !include_censored {
        return Ok(None);
    }

    let mut images = Vec::with_capacity(WINDOW_LEN);
    let mut day_features = Vec::with_capacity(WINDOW_LEN);
    for _ in 0..pad_count {
        images.push(Arc::clone(padding));
        day_features.push([0.0f32; FEATURE_COUNT]);
    }
    for offset in start..=end {
        images.push(Arc::clone(&cache.charts[offset]));
        day_features.push(cache.features[offset]);
    }

    let sequence = WindowedSequence {
        courier_id: timeline.courier_id.clone(),
        images,
        day_features,
        pad_count,
        end_date,
        label,
        censored,
        split,
    };
    sequence.assert_invariants();
    Ok(Some(sequence))
}

/// Build a single window of a timeline (used directly by tests and the
/// explain tools; [`build_dataset`] is the bulk path).
pub fn build_sequence(
    timeline: &CourierTimeline,
    window: (usize, usize),
    stats: &NormStats,
    geometry: &RadarGeometry,
    split: Split,
    dataset_end: NaiveDate,
    include_censored: bool,
) -> Result<Option<WindowedSequence>> {
    stats.assert_train_fitted()?;
    let cache = DayCache::build(timeline, stats, geometry)?;
    let padding = Arc::new(render_padding(geometry));
    build_from_cache(timeline, &cache, window, &padding, split, dataset_end, include_censored)
}

/// A fully windowed cohort, ordered by (courier_id, end_date).
#[derive(Debug, Default)]
pub struct WindowDataset {
    pub windows: Vec<WindowedSequence>,
    pub censored_dropped: usize,
}

impl WindowDataset {
    pub fn of_split(&self, split: Split) -> Vec<&WindowedSequence> {
        self.windows.iter().filter(|w| w.split == split).collect()
    }

    /// (window count, positive count) per split.
    pub fn summary(&self) -> Vec<(Split, usize, usize)> {
        [Split::Train, Split::Val, Split::Test]
            .iter()
            .map(|&split| {
                let windows = self.of_split(split);
                let positives = windows.iter().filter(|w| w.label.churned).count();
                (split, windows.len(), positives)
            })
            .collect()
    }
}

/// Window every timeline under the plan. Windows inherit the courier's
/// split; per-courier work fans out across the rayon pool but the output
/// ordering is deterministic.
pub fn build_dataset(
    timelines: &[CourierTimeline],
    assignment: &SplitAssignment,
    plan: WindowPlan,
    stats: &NormStats,
    geometry: &RadarGeometry,
) -> Result<WindowDataset> {
    plan.validate()?;
    stats.assert_train_fitted()?;
    let dataset_end = timelines
        .iter()
        .filter_map(|t| t.last_date())
        .max()
        .ok_or_else(|| Error::invalid("no timelines to window"))?;
    let padding = Arc::new(render_padding(geometry));

    let per_courier: Vec<Result<(Vec<WindowedSequence>, usize)>> = timelines
        .par_iter()
        .map(|timeline| {
            let split = assignment.split_of(&timeline.courier_id).ok_or_else(|| {
                Error::data(format!("courier {} missing from split assignment", timeline.courier_id))
            })?;
            let cache = DayCache::build(timeline, stats, geometry)?;
            let span = cache.charts.len();
            let mut sequences = Vec::new();
            let mut censored = 0usize;
            for window in enumerate_windows(span, WINDOW_LEN, plan.stride) {
                match build_from_cache(
                    timeline,
                    &cache,
                    window,
                    &padding,
                    split,
                    dataset_end,
                    plan.include_censored,
                )? {
                    Some(sequence) => sequences.push(sequence),
                    None => censored += 1,
                }
            }
            Ok((sequences, censored))
        })
        .collect();

    let mut dataset = WindowDataset::default();
    for item in per_courier {
        let (sequences, censored) = item?;
        dataset.windows.extend(sequences);
        dataset.censored_dropped += censored;
    }
    dataset
        .windows
        .sort_by(|a, b| a.courier_id.cmp(&b.courier_id).then(a.end_date.cmp(&b.end_date)));
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_splits;
    use std::collections::BTreeSet;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn enumerate_exact_fit() {
        assert_eq!(enumerate_windows(50, 50, 5), vec![(0, 49)]);
    }

    #[test]
    fn enumerate_longer_history() {
        // floor((64-50)/5)+1 = 3 windows ending at 49, 54, 59.
        assert_eq!(enumerate_windows(64, 50, 5), vec![(0, 49), (5, 54), (10, 59)]);
    }

    #[test]
    fn enumerate_short_history_single_window() {
        for stride in [1, 3, 5, 17] {
            assert_eq!(enumerate_windows(30, 50, stride), vec![(0, 29)]);
        }
        assert!(enumerate_windows(0, 50, 1).is_empty());
    }

    #[test]
    fn enumerate_matches_bruteforce_counts() {
        for len in 1..=130 {
            for stride in [1usize, 5] {
                let got = enumerate_windows(len, 50, stride).len();
                let expect = if len < 50 { 1 } else { (len - 50) / stride + 1 };
                assert_eq!(got, expect, "len={len} stride={stride}");
            }
        }
    }

    fn flat_timeline(id: &str, start: NaiveDate, len: usize, level: f64) -> CourierTimeline {
        let mut days = Vec::new();
        let mut active = BTreeSet::new();
        for i in 0..len {
            let d = start + chrono::Duration::days(i as i64);
            let mut f = [level; FEATURE_COUNT];
            f[crate::domain::TRIPS_FEATURE] = level;
            days.push((d, f));
            if level > 0.0 {
                active.insert(d);
            }
        }
        CourierTimeline { courier_id: id.into(), days, active_dates: active }
    }

    fn test_stats() -> NormStats {
        NormStats { ranges: [(0.0, 10.0); FEATURE_COUNT], fitted_on: "train".into() }
    }

    #[test]
    fn full_window_has_no_padding() {
        let t = flat_timeline("c1", date("2024-01-01"), 50, 5.0);
        let geometry = RadarGeometry::default_chart();
        let end = date("2024-01-01") + chrono::Duration::days(200);
        let w = build_sequence(&t, (0, 49), &test_stats(), &geometry, Split::Train, end, false)
            .unwrap()
            .unwrap();
        assert_eq!(w.pad_count, 0);
        assert_eq!(w.images.len(), 50);
        assert!(w.images.iter().all(|img| img.ink_count() > 0));
    }

    #[test]
    fn short_history_pads_in_date_order() {
        let t = flat_timeline("c1", date("2024-01-01"), 30, 5.0);
        let geometry = RadarGeometry::default_chart();
        let end = date("2024-01-01") + chrono::Duration::days(200);
        let w = build_sequence(&t, (0, 29), &test_stats(), &geometry, Split::Train, end, false)
            .unwrap()
            .unwrap();
        assert_eq!(w.pad_count, 20);
        assert_eq!(w.end_date, date("2024-01-30"));
        for i in 0..20 {
            assert_eq!(w.images[i].ink_count(), 0, "slot {i} must be white padding");
        }
        for i in 20..50 {
            assert!(w.images[i].ink_count() > 0, "slot {i} must be a rendered chart");
        }
    }

    #[test]
    fn intra_window_gap_renders_center_dot() {
        // Rows for days 0..10 and 20..50, gap in between.
        let start = date("2024-01-01");
        let mut t = flat_timeline("c1", start, 50, 5.0);
        t.days.retain(|(d, _)| {
            let off = (*d - start).num_days();
            !(10..20).contains(&off)
        });
        let keep: BTreeSet<_> = t.days.iter().map(|(d, _)| *d).collect();
        t.active_dates = keep;
        let geometry = RadarGeometry::default_chart();
        let end = start + chrono::Duration::days(200);
        let w = build_sequence(&t, (0, 49), &test_stats(), &geometry, Split::Train, end, false)
            .unwrap()
            .unwrap();
        assert_eq!(w.pad_count, 0);
        // Gap days carry the rendered all-zero chart: exactly the center dot.
        for i in 10..20 {
            assert_eq!(w.images[i].ink_count(), 1, "gap day {i}");
        }
        assert!(w.images[0].ink_count() > 1);
    }

    #[test]
    fn censored_window_dropped_unless_requested() {
        let t = flat_timeline("c1", date("2024-01-01"), 50, 5.0);
        let geometry = RadarGeometry::default_chart();
        // Dataset ends the same day the window does: the 45-day horizon is
        // unobservable.
        let end = date("2024-01-01") + chrono::Duration::days(49);
        let dropped =
            build_sequence(&t, (0, 49), &test_stats(), &geometry, Split::Train, end, false).unwrap();
        assert!(dropped.is_none());
        let kept =
            build_sequence(&t, (0, 49), &test_stats(), &geometry, Split::Train, end, true)
                .unwrap()
                .unwrap();
        assert!(kept.censored);
    }

    #[test]
    fn leakage_guard_rejects_non_train_stats() {
        let t = flat_timeline("c1", date("2024-01-01"), 50, 5.0);
        let geometry = RadarGeometry::default_chart();
        let stats = NormStats { ranges: [(0.0, 1.0); FEATURE_COUNT], fitted_on: "test".into() };
        let end = date("2024-12-01");
        assert!(build_sequence(&t, (0, 49), &stats, &geometry, Split::Train, end, false).is_err());
    }

    #[test]
    fn dataset_counts_follow_enumeration() {
        let start = date("2024-01-01");
        let timelines: Vec<CourierTimeline> = (0..12)
            .map(|i| flat_timeline(&format!("c{i:03}"), start, 50 + 7 * i, 5.0))
            .collect();
        let ids: Vec<String> = timelines.iter().map(|t| t.courier_id.clone()).collect();
        let assignment = make_splits(&ids, 1).unwrap();
        let geometry = RadarGeometry::default_chart();
        let stats = test_stats();

        for stride in [1usize, 5] {
            let plan = WindowPlan { stride, include_censored: true };
            let dataset = build_dataset(&timelines, &assignment, plan, &stats, &geometry).unwrap();
            let expected: usize = timelines
                .iter()
                .map(|t| enumerate_windows(t.days.len(), WINDOW_LEN, stride).len())
                .sum();
            assert_eq!(dataset.windows.len(), expected);
        }

        // Fine stride yields at least as many windows as coarse.
        let coarse = build_dataset(
            &timelines,
            &assignment,
            WindowPlan { stride: 5, include_censored: true },
            &stats,
            &geometry,
        )
        .unwrap();
        let fine = build_dataset(
            &timelines,
            &assignment,
            WindowPlan { stride: 1, include_censored: true },
            &stats,
            &geometry,
        )
        .unwrap();
        assert!(fine.windows.len() >= coarse.windows.len());
    }

    #[test]
    fn windows_inherit_courier_split() {
        let start = date("2024-01-01");
        let timelines: Vec<CourierTimeline> = (0..15)
            .map(|i| flat_timeline(&format!("c{i:03}"), start, 60, 5.0))
            .collect();
        let ids: Vec<String> = timelines.iter().map(|t| t.courier_id.clone()).collect();
        let assignment = make_splits(&ids, 2).unwrap();
        let dataset = build_dataset(
            &timelines,
            &assignment,
            WindowPlan { stride: 5, include_censored: true },
            &test_stats(),
            &RadarGeometry::default_chart(),
        )
        .unwrap();
        for w in &dataset.windows {
            assert_eq!(Some(w.split), assignment.split_of(&w.courier_id));
        }
    }
}
