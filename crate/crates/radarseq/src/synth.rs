//! Seeded synthetic courier-behavior generator.
//!
//! Produces cohorts of [`CourierTimeline`]s with controllable churn-precursor
//! dynamics, standing in for platform data:
//!
//! * retainers behave stationarily — weekly seasonality, occasional idle
//!   days and short vacations (both only when `noise_scale > 0`), activity
//!   through the end of the simulated span;
//! * most churners fade out along a multiplicative ramp from 1.0 down to
//!   [`RAMP_FLOOR`] over the final `precursor_days`, with idle days growing
//!   more frequent, then go permanently inactive;
//! * a configurable subpopulation of "hard" churners stops abruptly with no
//!   ramp at all, so no single late-window day gives churn away;
//! * after the last active day the platform keeps logging zero-activity rows
//!   for a short grace period before the courier drops out of the feed.
//!
//! Every courier is generated from a seed derived from the cohort seed and
//! the courier index, so parallel generation reproduces serial output
//! byte for byte.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::{CourierTimeline, FeatureVec, FEATURE_COUNT};
use crate::{Error, Result};

/// First simulated calendar day.
pub fn cohort_start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date")
}

/// Ramp floor: a ramping churner's final-day behavior level relative to
/// their baseline.
pub const RAMP_FLOOR: f64 = 0.15;

/// Longest idle run the generator permits before a churner's final day;
/// keeps every pre-churn 45-day interval labeled retained.
const MAX_IDLE_RUN: usize = 30;

// History-span profile. Retainers need ≥ 95 observed days before any of
// their windows clears the 45-day label horizon, so their histories are drawn
// long; churner spans are set by the churn day draw below.
const RETAINER_SPAN: (usize, usize) = (95, 125);
const CHURNER_ACTIVE_SPAN: (usize, usize) = (55, 90);
const SHORT_QUITTER_SPAN: (usize, usize) = (20, 45);
const SHORT_QUITTER_PROB: f64 = 0.12;

/// Cohort generation parameters.
#[derive(Debug, Clone)]
pub struct CohortConfig {
    pub n_couriers: usize,
    /// Total simulated span in days.
    pub horizon_days: usize,
    pub churn_fraction: f64,
    /// Length of the behavioral decline ramp preceding churn.
    pub precursor_days: usize,
    pub noise_scale: f64,
    pub seed: u64,
    /// Fraction of churners that stop abruptly with no ramp.
    pub hard_churn_fraction: f64,
    /// Weekly seasonality amplitude.
    pub weekly_amplitude: f64,
    /// Zero-activity rows logged after the last active day before the
    /// courier leaves the feed.
    pub post_churn_observe_days: usize,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig {
            n_couriers: 800,
            horizon_days: 200,
            churn_fraction: 0.16,
            precursor_days: 21,
            noise_scale: 0.25,
            seed: 1,
            hard_churn_fraction: 0.3,
            weekly_amplitude: 0.2,
            post_churn_observe_days: 12,
        }
    }
}

impl CohortConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_couriers == 0 {
            return Err(Error::invalid("n_couriers must be positive"));
        }
        if !(0.0..1.0).contains(&self.churn_fraction) {
            return Err(Error::invalid("churn_fraction must be in [0, 1)"));
        }
        if self.precursor_days == 0 || self.precursor_days >= self.horizon_days {
            return Err(Error::invalid("precursor_days must be in (0, horizon_days)"));
        }
        if !(0.0..=1.0).contains(&self.hard_churn_fraction) {
            return Err(Error::invalid("hard_churn_fraction must be in [0, 1]"));
        }
        if self.noise_scale < 0.0 || !self.noise_scale.is_finite() {
            return Err(Error::invalid("noise_scale must be nonnegative"));
        }
        if self.weekly_amplitude < 0.0 || self.weekly_amplitude > 1.0 {
            return Err(Error::invalid("weekly_amplitude must be in [0, 1]"));
        }
        let needed = 46 + self.post_churn_observe_days + self.precursor_days + 40;
        if self.horizon_days < needed {
            return Err(Error::invalid(format!(
                "horizon_days = {} too short; need at least {needed} for labelable windows",
                self.horizon_days
            )));
        }
        Ok(())
    }

    fn churner_count(&self) -> usize {
        if self.churn_fraction == 0.0 {
            return 0;
        }
        let raw = (self.n_couriers as f64 * self.churn_fraction).round() as usize;
        raw.clamp(1, self.n_couriers.saturating_sub(1).max(1))
    }
}

/// Ground truth for one courier: the last active day for churners, `None`
/// for retainers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub courier_id: String,
    pub churn_date: Option<NaiveDate>,
}

fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fate {
    Retain,
    RampChurn,
    HardChurn,
}

/// Stable per-courier traits drawn once.
struct CourierProfile {
    trips_base: f64,
    pay_per_trip: f64,
    accept_base: f64,
    ride_base: f64,
    dist_base: f64,
    lunch_share: f64,
    batch_share: f64,
    /// Static courier-zone attribute, drawn independently of churn status —
    /// a deliberately signal-free axis.
    b2v_static: f64,
    /// Static lifetime-value attribute; kept constant so retainer feature
    /// means stay stationary over the simulated span.
    ltv_static: f64,
    week_phase: usize,
}

impl CourierProfile {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        CourierProfile {
            trips_base: rng.gen_range(6.0..14.0),
            pay_per_trip: rng.gen_range(4.0..7.0),
            accept_base: rng.gen_range(0.75..0.95),
            ride_base: rng.gen_range(15.0..30.0),
            dist_base: rng.gen_range(2.0..6.0),
            lunch_share: rng.gen_range(0.2..0.4),
            batch_share: rng.gen_range(0.1..0.3),
            b2v_static: rng.gen_range(1.0..5.0),
            ltv_static: rng.gen_range(500.0..5000.0),
            week_phase: rng.gen_range(0..7),
        }
    }
}

/// Truncated multiplicative noise: `max(floor, 1 + scale·ε)`, ε ~ N(0,1)
/// approximated by a sum of uniforms (Irwin–Hall), keeping features
/// nonnegative.
fn noise_mult(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    if scale == 0.0 {
        return 1.0;
    }
    let eps: f64 = (0..12).map(|_| rng.gen_range(0.0..1.0)).sum::<f64>() - 6.0;
    (1.0 + scale * eps).max(0.05)
}

struct DayState {
    active: bool,
    trips: f64,
    assigns: f64,
    acceptance_rate: f64,
    completion_rate: f64,
    earnings: f64,
    ride_time: f64,
    dist_per_delivery: f64,
    lunch_trips: f64,
    batch_trips: f64,
}

fn generate_courier(
    index: usize,
    fate: Fate,
    config: &CohortConfig,
) -> (CourierTimeline, GroundTruth) {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, index as u64 + 1));
    let profile = CourierProfile::draw(&mut rng);
    let courier_id = format!("c{index:06}");
    let horizon = config.horizon_days;
    let grace = config.post_churn_observe_days;

    // Placement: join day, last active day, last observed row.
    let (join, churn_day): (usize, Option<usize>) = match fate {
        Fate::Retain => {
            let span = rng.gen_range(RETAINER_SPAN.0..=RETAINER_SPAN.1).min(horizon);
            (horizon - span, None)
        }
        Fate::RampChurn | Fate::HardChurn => {
            let c_max = horizon - 46 - grace - 1;
            let active_span = if rng.gen_bool(SHORT_QUITTER_PROB) {
                rng.gen_range(SHORT_QUITTER_SPAN.0..=SHORT_QUITTER_SPAN.1)
            } else {
                rng.gen_range(CHURNER_ACTIVE_SPAN.0..=CHURNER_ACTIVE_SPAN.1)
            };
            let c_min = (active_span - 1).min(c_max);
            let c = rng.gen_range(c_min..=c_max);
            (c + 1 - active_span.min(c + 1), Some(c))
        }
    };
    let last_row = match churn_day {
        Some(c) => (c + grace).min(horizon - 1),
        None => horizon - 1,
    };

    let ramp_start = churn_day.map(|c| c + 1 - config.precursor_days.min(c + 1));

    // Pass 1: per-day activity and instantaneous quantities.
    let noise = config.noise_scale;
    let noise_on = noise > 0.0;
    let mut days_state: Vec<DayState> = Vec::with_capacity(last_row - join + 1);
    let mut idle_run = 0usize;
    let mut vacation_left = 0usize;
    for t in join..=last_row {
        let after_churn = churn_day.map_or(false, |c| t > c);
        let in_ramp = match (fate, ramp_start, churn_day) {
            (Fate::RampChurn, Some(rs), Some(c)) => t >= rs && t <= c,
            _ => false,
        };
        let ramp = if in_ramp {
            let rs = ramp_start.expect("ramp start");
            let c = churn_day.expect("churn day");
            let span = (c - rs).max(1) as f64;
            1.0 - (1.0 - RAMP_FLOOR) * ((t - rs) as f64 / span)
        } else {
            1.0
        };

        // Activity decision.
        let forced_active = churn_day == Some(t);
        let mut active = !after_churn;
        if active && !forced_active && noise_on {
            if vacation_left > 0 {
                vacation_left -= 1;
                active = false;
            } else if fate == Fate::Retain || !in_ramp {
                let dow = (t + profile.week_phase) % 7;
                let weekend = dow >= 5;
                let idle_prob = if weekend { 0.18 } else { 0.05 };
                if rng.gen_bool(0.008) {
                    vacation_left = rng.gen_range(3..=10) - 1;
                    active = false;
                } else if rng.gen_bool(idle_prob) {
                    active = false;
                }
            } else {
                // Disengagement: idle days grow more frequent as the ramp
                // deepens.
                if rng.gen_bool(((1.0 - ramp) * 0.45).clamp(0.0, 0.9)) {
                    active = false;
                }
            }
        }
        if !active && !after_churn {
            idle_run += 1;
            if idle_run > MAX_IDLE_RUN {
                active = true;
            }
        }
        if active {
            idle_run = 0;
        }

        let state = if !active {
            DayState {
                active: false,
                trips: 0.0,
                assigns: 0.0,
                acceptance_rate: 0.0,
                completion_rate: 0.0,
                earnings: 0.0,
                ride_time: 0.0,
                dist_per_delivery: 0.0,
                lunch_trips: 0.0,
                batch_trips: 0.0,
            }
        } else {
            // Seasonality is suppressed inside the ramp: disengaging couriers
            // lose their weekly rhythm along with their volume.
            let season = if in_ramp {
                1.0
            } else {
                let dow = (t + profile.week_phase) % 7;
                1.0 + config.weekly_amplitude
                    * (2.0 * std::f64::consts::PI * dow as f64 / 7.0).sin()
            };
            let trips =
                (profile.trips_base * season * ramp * noise_mult(&mut rng, noise)).round().max(1.0);
            let acceptance = (profile.accept_base
                * (0.55 + 0.45 * ramp)
                * noise_mult(&mut rng, 0.3 * noise))
            .clamp(0.05, 1.0);
            let assigns = (trips / acceptance).round().max(trips);
            let acceptance_rate = trips / assigns;
            let completion_rate =
                (0.97 * (0.75 + 0.25 * ramp) * noise_mult(&mut rng, 0.1 * noise)).clamp(0.0, 1.0);
            let earnings = trips * profile.pay_per_trip * noise_mult(&mut rng, 0.2 * noise);
            let ride_time = profile.ride_base * noise_mult(&mut rng, 0.1 * noise);
            let dist = profile.dist_base * noise_mult(&mut rng, 0.1 * noise);
            let lunch =
                (trips * profile.lunch_share * noise_mult(&mut rng, 0.3 * noise)).round().clamp(0.0, trips);
            let batch =
                (trips * profile.batch_share * noise_mult(&mut rng, 0.3 * noise)).round().clamp(0.0, trips);
            DayState {
                active: true,
                trips,
                assigns,
                acceptance_rate,
                completion_rate,
                earnings,
                ride_time,
                dist_per_delivery: dist,
                lunch_trips: lunch,
                batch_trips: batch,
            }
        };
        days_state.push(state);
    }

    // Pass 2: trailing aggregates and the final feature rows.
    let start_date = cohort_start_date();
    let mut days = Vec::with_capacity(days_state.len());
    let mut active_dates = std::collections::BTreeSet::new();
    let mut trips_prefix: Vec<f64> = Vec::with_capacity(days_state.len() + 1);
    let mut earn_prefix: Vec<f64> = Vec::with_capacity(days_state.len() + 1);
    trips_prefix.push(0.0);
    earn_prefix.push(0.0);
    for (i, state) in days_state.iter().enumerate() {
        trips_prefix.push(trips_prefix[i] + state.trips);
        earn_prefix.push(earn_prefix[i] + state.earnings);

        let window = |prefix: &[f64], hi: usize, len: usize| -> (f64, usize) {
            let lo = hi.saturating_sub(len);
            (prefix[hi] - prefix[lo], hi - lo)
        };
        let (trips_7, n_7) = window(&trips_prefix, i + 1, 7);
        let (earn_7, _) = window(&earn_prefix, i + 1, 7);
        let (trips_prev_7, _) = {
            let hi = (i + 1).saturating_sub(7);
            window(&trips_prefix, hi, 7)
        };

        let login = if state.active { 1.0 } else { 0.0 };
        let activity_score =
            (login + state.acceptance_rate + state.completion_rate) / 3.0;

        let mut features: FeatureVec = [0.0; FEATURE_COUNT];
        features[0] = trips_7 / n_7 as f64; // avg_orders_7d
        features[1] = earn_7 / n_7 as f64; // avg_earnings_7d
        features[2] = trips_7 - trips_prev_7; // delta_orders
        features[3] = state.acceptance_rate; // acceptance_rate
        features[4] = activity_score; // activity_score
        features[5] = profile.b2v_static; // b2v_distance
        features[6] = state.lunch_trips; // lunch_trips
        features[7] = state.assigns; // assigns
        features[8] = state.ride_time; // avg_ride_time
        features[9] = state.batch_trips; // batch_trips
        features[10] = profile.ltv_static; // ltv
        features[11] = state.dist_per_delivery; // avg_dist_per_delivery
        features[12] = state.trips; // avg_daily_trips
        features[13] = state.earnings; // avg_daily_income

        let date = start_date + chrono::Duration::days((join + i) as i64);
        if state.active {
            active_dates.insert(date);
        }
        days.push((date, features));
    }

    let timeline = CourierTimeline { courier_id: courier_id.clone(), days, active_dates };
    let truth = GroundTruth {
        courier_id,
        churn_date: churn_day.map(|c| start_date + chrono::Duration::days(c as i64)),
    };
    (timeline, truth)
}

/// Generate a full cohort. Deterministic for a fixed config; per-courier
/// work is independent, so the parallel fan-out reproduces serial output
/// exactly.
pub fn generate_cohort(config: &CohortConfig) -> Result<(Vec<CourierTimeline>, Vec<GroundTruth>)> {
    config.validate()?;

    let n = config.n_couriers;
    let n_churn = config.churner_count();
    let mut fates = vec![Fate::Retain; n];
    if n_churn > 0 {
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0));
        // Fisher–Yates over courier indices; the first n_churn become churners.
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let n_hard = (n_churn as f64 * config.hard_churn_fraction).round() as usize;
        for (rank, &idx) in order.iter().take(n_churn).enumerate() {
            fates[idx] = if rank < n_hard { Fate::HardChurn } else { Fate::RampChurn };
        }
    }

    let mut results: Vec<(CourierTimeline, GroundTruth)> = (0..n)
        .into_par_iter()
        .map(|i| generate_courier(i, fates[i], config))
        .collect();
    results.sort_by(|a, b| a.0.courier_id.cmp(&b.0.courier_id));

    let mut timelines = Vec::with_capacity(n);
    let mut truths = Vec::with_capacity(n);
    for (timeline, truth) in results {
        timeline.validate()?;
        timelines.push(timeline);
        truths.push(truth);
    }
    Ok((timelines, truths))
}
