//! Synthetic benchmark generator with planted subspace patterns.
//!
//! Records are generated as raw call events whose timestamps realize the
//! planted calendar and hour constraints, then pushed through the regular
//! augmentation path, so the in-memory dataset is exactly what re-reading
//! the emitted raw file would produce. Pattern records take their planted
//! values on the relevant features; everything else falls out of the
//! timestamp arithmetic or uniform draws.
//!
//! Calendar-constrained patterns emit their records in same-day bursts of
//! a few calls, the way a weekly habit looks in real traffic. The burst
//! leader pays the jump to the next matching day while the followers sit
//! minutes to hours apart, so the free elapsed-time values of a pattern
//! spread over the bins instead of concentrating at the cap.
//!
//! One elapsed-time caveat remains: a pattern constraining both the hour
//! (or calendar) and the elapsed time cannot honor both exactly, because
//! the elapsed time is whatever the realized timestamps imply. Exact
//! elapsed-time plants need the calendar and hour left free.

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cdr::{augment, Dataset, DayPeriod, RawCdr, WeekDay};
use crate::error::{Error, Result};
use crate::ldabcd::jaccard;

/// One planted recurrent pattern. Unset fields are free; the set fields,
/// together with the ones they imply (a week day fixes the working-day
/// flag, an exact hour fixes the day period), form the relevant feature
/// set of the pattern.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedPattern {
    pub name: String,
    pub count: usize,
    #[serde(default)]
    pub subref: Option<u16>,
    #[serde(default)]
    pub week_day: Option<WeekDay>,
    #[serde(default)]
    pub work_day: Option<bool>,
    #[serde(default)]
    pub conn_time: Option<u8>,
    #[serde(default)]
    pub day_period: Option<DayPeriod>,
    #[serde(default)]
    pub prev_call: Option<u32>,
    /// Jitter applied to a planted hour, in whole hours around the value.
    #[serde(default)]
    pub conn_jitter_hours: u8,
    /// Jitter applied to a planted elapsed time, in minutes.
    #[serde(default)]
    pub prev_jitter_minutes: u32,
}

impl PlantedPattern {
    pub fn new(name: impl Into<String>, count: usize) -> Self {
        PlantedPattern {
            name: name.into(),
            count,
            subref: None,
            week_day: None,
            work_day: None,
            conn_time: None,
            day_period: None,
            prev_call: None,
            conn_jitter_hours: 0,
            prev_jitter_minutes: 0,
        }
    }
}

/// Pattern with implied fields filled in and validated.
#[derive(Debug, Clone)]
struct ResolvedPattern {
    pattern: PlantedPattern,
    relevant: Vec<usize>,
}

fn resolve(pattern: &PlantedPattern) -> Result<ResolvedPattern> {
    let mut p = pattern.clone();
    if p.count == 0 {
        return Err(Error::InvalidPattern(format!(
            "pattern {:?} has zero records",
            p.name
        )));
    }
    if let Some(subref) = p.subref {
        if !(1..=255).contains(&subref) {
            return Err(Error::InvalidPattern(format!(
                "subref {subref} outside [1, 255]"
            )));
        }
    }
    if let Some(prev) = p.prev_call {
        if prev > 1440 {
            return Err(Error::InvalidPattern(format!(
                "prev_call {prev} above the 1440 minute cap"
            )));
        }
    }
    if let Some(hour) = p.conn_time {
        if hour > 23 {
            return Err(Error::InvalidPattern(format!(
                "hour {hour} outside [0, 23]"
            )));
        }
        // Every hour the jitter can produce must stay inside the planted
        // period, if one is declared.
        if let Some(period) = p.day_period {
            let j = i16::from(p.conn_jitter_hours);
            for offset in -j..=j {
                let jittered = (i16::from(hour) + offset).rem_euclid(24) as u8;
                if DayPeriod::from_hour(jittered) != period {
                    return Err(Error::InvalidPattern(format!(
                        "hour {hour} (jitter {}) leaves period {}",
                        p.conn_jitter_hours,
                        period.label()
                    )));
                }
            }
        } else if p.conn_jitter_hours == 0 {
            p.day_period = Some(DayPeriod::from_hour(hour));
        }
    }
    if let Some(week) = p.week_day {
        match p.work_day {
            Some(work) if work == week.is_weekend() => {
                return Err(Error::InvalidPattern(format!(
                    "week day {} contradicts work_day {}",
                    week.label(),
                    p.work_day.unwrap()
                )));
            }
            _ => p.work_day = Some(!week.is_weekend()),
        }
    }
    let mut relevant = Vec::new();
    if p.subref.is_some() {
        relevant.push(0);
    }
    if p.week_day.is_some() {
        relevant.push(1);
    }
    if p.work_day.is_some() {
        relevant.push(2);
    }
    if p.conn_time.is_some() {
        relevant.push(3);
    }
    if p.day_period.is_some() {
        relevant.push(4);
    }
    if p.prev_call.is_some() {
        relevant.push(5);
    }
    if relevant.len() < 2 {
        return Err(Error::InvalidPattern(format!(
            "pattern {:?} constrains fewer than two features",
            p.name
        )));
    }
    Ok(ResolvedPattern {
        pattern: p,
        relevant,
    })
}

/// Per-pattern ground-truth facts.
#[derive(Debug, Clone, Serialize)]
pub struct PatternInfo {
    pub name: String,
    /// Relevant section indices in the fixed section order.
    pub relevant: Vec<usize>,
    pub count: usize,
}

/// Ground truth of a generated dataset.
#[derive(Debug, Clone, Serialize)]
pub struct GroundTruth {
    /// Pattern index per record, `None` for noise.
    pub labels: Vec<Option<usize>>,
    pub patterns: Vec<PatternInfo>,
}

impl GroundTruth {
    /// Sorted record indices of one pattern.
    pub fn members_of(&self, pattern: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|&(_, label)| *label == Some(pattern))
            .map(|(i, _)| i)
            .collect()
    }
}

/// A generated benchmark: the dataset, the raw events it was derived
/// from, and the labels.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub raw: Vec<RawCdr>,
    pub truth: GroundTruth,
}

const SYNTH_USER: &str = "synthetic";

fn base_time() -> NaiveDateTime {
    // A Monday at the start of the reference observation window.
    NaiveDate::from_ymd_opt(2011, 12, 5)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap()
}

/// Generates the planted patterns plus uniform noise, shuffled
/// deterministically by the seed, and runs the result through the regular
/// augmentation so dataset and raw file always agree.
pub fn generate(patterns: &[PlantedPattern], noise_count: usize, seed: u64) -> Result<SynthOutput> {
    let resolved: Vec<ResolvedPattern> = patterns.iter().map(resolve).collect::<Result<_>>()?;
    let total: usize = resolved.iter().map(|r| r.pattern.count).sum::<usize>() + noise_count;
    if total < 10 {
        return Err(Error::InvalidPattern(format!(
            "benchmark needs at least 10 records, got {total}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Slot plan: a shuffled list of bursts. Calendar-constrained patterns
    // come in same-day bursts of a few calls; everything else is a
    // singleton.
    let mut bursts: Vec<Vec<Option<usize>>> = Vec::new();
    for (index, r) in resolved.iter().enumerate() {
        let bursty = (r.pattern.week_day.is_some() || r.pattern.work_day.is_some())
            && r.pattern.prev_call.is_none();
        let mut remaining = r.pattern.count;
        while remaining > 0 {
            let size = if bursty {
                rng.random_range(2..=4).min(remaining)
            } else {
                1
            };
            bursts.push(vec![Some(index); size]);
            remaining -= size;
        }
    }
    bursts.extend(std::iter::repeat_n(vec![None], noise_count));
    bursts.shuffle(&mut rng);

    // The first record always gets the capped elapsed-time sentinel, so a
    // slot whose pattern plants an elapsed time should not sit there.
    if let Some(first) = bursts.first().and_then(|b| b[0]) {
        if resolved[first].pattern.prev_call.is_some() {
            if let Some(swap) = bursts
                .iter()
                .position(|burst| burst[0].is_none_or(|p| resolved[p].pattern.prev_call.is_none()))
            {
                bursts.swap(0, swap);
            }
        }
    }
    let plan: Vec<(Option<usize>, bool)> = bursts
        .iter()
        .flat_map(|burst| {
            burst
                .iter()
                .enumerate()
                .map(|(i, &label)| (label, i > 0))
                .collect::<Vec<_>>()
        })
        .collect();

    let draw_hour = |pattern: &PlantedPattern, rng: &mut ChaCha8Rng| -> Option<u8> {
        match (pattern.conn_time, pattern.day_period) {
            (Some(hour), _) => {
                let j = i16::from(pattern.conn_jitter_hours);
                let offset = rng.random_range(-j..=j);
                Some((i16::from(hour) + offset).rem_euclid(24) as u8)
            }
            (None, Some(period)) => {
                let hours = period.hours();
                Some(hours[rng.random_range(0..hours.len())])
            }
            (None, None) => None,
        }
    };

    let mut raw: Vec<RawCdr> = Vec::with_capacity(total);
    let mut previous = base_time();
    for &(label, continues_burst) in &plan {
        let pattern = label.map(|p| &resolved[p].pattern);
        let subref = match pattern.and_then(|p| p.subref) {
            Some(s) => s,
            None => rng.random_range(1..=255),
        };

        // A burst follower stays on the same day, minutes to hours after
        // its predecessor; when the planted hour window cannot accommodate
        // that, it falls back to the leader path.
        let follower = if continues_burst {
            let p = pattern.expect("burst followers belong to a pattern");
            let gap = rng.random_range(5..=180);
            let tentative = previous + Duration::minutes(gap);
            let candidate = match draw_hour(p, &mut rng) {
                Some(hour) => {
                    let minute = rng.random_range(0..60);
                    tentative
                        .date()
                        .and_hms_opt(u32::from(hour), minute, 0)
                        .unwrap()
                }
                None => tentative,
            };
            (candidate > previous && candidate.date() == previous.date()).then_some(candidate)
        } else {
            None
        };

        let timestamp = match follower {
            Some(t) => t,
            None => {
                let gap_minutes: i64 = match pattern.and_then(|p| p.prev_call) {
                    Some(gap) => {
                        let jitter = pattern.unwrap().prev_jitter_minutes;
                        let low = gap.saturating_sub(jitter);
                        let high = (gap + jitter).min(1440);
                        i64::from(rng.random_range(low..=high))
                    }
                    None => rng.random_range(0..=1440),
                };
                let mut t = previous + Duration::minutes(gap_minutes);
                if let Some(p) = pattern {
                    if let Some(hour) = draw_hour(p, &mut rng) {
                        let minute = rng.random_range(0..60);
                        t = t.date().and_hms_opt(u32::from(hour), minute, 0).unwrap();
                        while t < previous {
                            t += Duration::days(1);
                        }
                    }
                    let target_week = match (p.week_day, p.work_day) {
                        (Some(week), _) => Some(week),
                        (None, Some(work)) => {
                            let choices: Vec<WeekDay> = WeekDay::ALL
                                .iter()
                                .copied()
                                .filter(|w| w.is_weekend() != work)
                                .collect();
                            Some(choices[rng.random_range(0..choices.len())])
                        }
                        (None, None) => None,
                    };
                    if let Some(week) = target_week {
                        while WeekDay::from(chrono::Datelike::weekday(&t)) != week {
                            t += Duration::days(1);
                        }
                    }
                }
                t
            }
        };

        raw.push(RawCdr {
            user_id: SYNTH_USER.to_string(),
            timestamp,
            subref_id: subref,
        });
        previous = timestamp;
    }

    let records = augment(&raw)?;
    let dataset = Dataset::from_records(records)?;
    let truth = GroundTruth {
        labels: plan.iter().map(|&(label, _)| label).collect(),
        patterns: resolved
            .iter()
            .map(|r| PatternInfo {
                name: r.pattern.name.clone(),
                relevant: r.relevant.clone(),
                count: r.pattern.count,
            })
            .collect(),
    };
    Ok(SynthOutput {
        dataset,
        raw,
        truth,
    })
}

/// Writes raw events in the ingestion format: three tab-separated columns
/// with a leading comment header.
pub fn emit_raw<W: std::io::Write>(raw: &[RawCdr], mut writer: W) -> std::io::Result<()> {
    writeln!(writer, "# user_id\tconn_datetime\tsubref_id")?;
    for record in raw {
        writeln!(
            writer,
            "{}\t{}\t{}",
            record.user_id,
            record.timestamp.format(crate::cdr::TIMESTAMP_FORMAT),
            record.subref_id
        )?;
    }
    Ok(())
}

/// The reference benchmark: four zero-jitter planted patterns of 100
/// records each, typically paired with 100 noise records.
pub fn benchmark_patterns() -> Vec<PlantedPattern> {
    let mut saturday = PlantedPattern::new("sat-60-morning", 100);
    saturday.subref = Some(60);
    saturday.week_day = Some(WeekDay::Sat);
    saturday.day_period = Some(DayPeriod::Mor);

    let mut tuesday = PlantedPattern::new("tue-61-afternoon", 100);
    tuesday.subref = Some(61);
    tuesday.week_day = Some(WeekDay::Tue);
    tuesday.day_period = Some(DayPeriod::Aft);

    let mut sunday = PlantedPattern::new("sun-64-evening", 100);
    sunday.subref = Some(64);
    sunday.week_day = Some(WeekDay::Sun);
    sunday.day_period = Some(DayPeriod::Eve);

    let mut thursday = PlantedPattern::new("thu-138-morning", 100);
    thursday.subref = Some(138);
    thursday.week_day = Some(WeekDay::Thu);
    thursday.day_period = Some(DayPeriod::Mor);

    vec![saturday, tuesday, sunday, thursday]
}

/// Recovery score of one planted pattern.
#[derive(Debug, Clone, Serialize)]
pub struct PatternRecovery {
    pub name: String,
    /// Index of the best-matching found cluster, if any were offered.
    pub best_match: Option<usize>,
    pub best_jaccard: f64,
    /// Fraction of the planted relevant features present in the best
    /// match's feature set.
    pub feature_recovery: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryReport {
    pub per_pattern: Vec<PatternRecovery>,
}

impl RecoveryReport {
    pub fn min_jaccard(&self) -> f64 {
        self.per_pattern
            .iter()
            .map(|p| p.best_jaccard)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_feature_recovery(&self) -> f64 {
        self.per_pattern
            .iter()
            .map(|p| p.feature_recovery)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Scores found clusters against the ground truth: per pattern, the best
/// Jaccard over the found member sets and the feature recovery of that
/// best match. `found_features` gives the feature set claimed by each
/// found cluster (the top PC's sections, or a medoid's dimensions).
pub fn score_recovery(
    found_members: &[Vec<usize>],
    found_features: &[Vec<usize>],
    truth: &GroundTruth,
) -> RecoveryReport {
    let per_pattern = truth
        .patterns
        .iter()
        .enumerate()
        .map(|(index, info)| {
            let members = truth.members_of(index);
            let mut best_match = None;
            let mut best_jaccard = 0.0;
            for (f, found) in found_members.iter().enumerate() {
                let overlap = jaccard(&members, found);
                if best_match.is_none() || overlap > best_jaccard {
                    best_match = Some(f);
                    best_jaccard = overlap;
                }
            }
            let feature_recovery = match best_match {
                Some(f) if !info.relevant.is_empty() => {
                    let hits = info
                        .relevant
                        .iter()
                        .filter(|section| found_features[f].contains(section))
                        .count();
                    hits as f64 / info.relevant.len() as f64
                }
                _ => 0.0,
            };
            PatternRecovery {
                name: info.name.clone(),
                best_match,
                best_jaccard,
                feature_recovery,
            }
        })
        .collect();
    RecoveryReport { per_pattern }
}

/// Convenience accessor used in tests and reports: the planted feature
/// sets per pattern, as section index lists.
pub fn relevant_sections(truth: &GroundTruth) -> Vec<Vec<usize>> {
    truth.patterns.iter().map(|p| p.relevant.clone()).collect()
}
