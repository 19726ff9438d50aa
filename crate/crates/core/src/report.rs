//! Report-side descriptions: per-user value distributions, per-cluster
//! value pies and the equivalent-PC table.

use serde::Serialize;

use crate::cdr::{CdrRecord, DayPeriod, WeekDay, SECTION_NAMES};
use crate::error::{Error, Result};
use crate::ldabcd::MetaCluster;

/// Elapsed-time bin upper edges in minutes. Values at or above the last
/// edge fall into the "> 24 h" bin, which is where the capped sentinel of
/// the augmentation lands.
pub const PREV_CALL_BIN_EDGES: [u32; 8] = [5, 15, 30, 60, 120, 360, 720, 1440];
pub const PREV_CALL_BIN_LABELS: [&str; 9] =
    ["5m", "15m", "30m", "1h", "2h", "6h", "12h", "24h", ">24h"];

/// Bin index of an elapsed-time value.
pub fn prev_call_bin(minutes: u32) -> usize {
    for (i, &edge) in PREV_CALL_BIN_EDGES.iter().enumerate() {
        if minutes < edge || (minutes == edge && edge != 1440) {
            return i;
        }
    }
    PREV_CALL_BIN_LABELS.len() - 1
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramBin {
    pub label: String,
    pub fraction: f64,
}

/// The four normalized distributions describing one user's records.
#[derive(Debug, Clone, Serialize)]
pub struct UserSummary {
    pub total_records: usize,
    /// Calls per prefecture, ascending by identifier.
    pub per_prefecture: Vec<HistogramBin>,
    pub prev_call: Vec<HistogramBin>,
    pub per_week_day: Vec<HistogramBin>,
    pub per_day_period: Vec<HistogramBin>,
}

/// Builds the four distributions, each normalized by the total number of
/// records.
pub fn summarize_user(records: &[CdrRecord]) -> Result<UserSummary> {
    if records.is_empty() {
        return Err(Error::EmptyDataset("no records to summarize".into()));
    }
    let total = records.len() as f64;

    let mut prefectures: Vec<u16> = records.iter().map(|r| r.subref_id).collect();
    prefectures.sort_unstable();
    prefectures.dedup();
    let per_prefecture = prefectures
        .iter()
        .map(|&p| HistogramBin {
            label: p.to_string(),
            fraction: records.iter().filter(|r| r.subref_id == p).count() as f64 / total,
        })
        .collect();

    let mut bins = [0usize; PREV_CALL_BIN_LABELS.len()];
    for record in records {
        bins[prev_call_bin(record.prev_call)] += 1;
    }
    let prev_call = PREV_CALL_BIN_LABELS
        .iter()
        .zip(bins)
        .map(|(label, count)| HistogramBin {
            label: (*label).to_string(),
            fraction: count as f64 / total,
        })
        .collect();

    let per_week_day = WeekDay::ALL
        .iter()
        .map(|&day| HistogramBin {
            label: day.label().to_string(),
            fraction: records.iter().filter(|r| r.week_day == day).count() as f64 / total,
        })
        .collect();

    let per_day_period = DayPeriod::ALL
        .iter()
        .map(|&period| HistogramBin {
            label: period.label().to_string(),
            fraction: records.iter().filter(|r| r.day_period == period).count() as f64 / total,
        })
        .collect();

    Ok(UserSummary {
        total_records: records.len(),
        per_prefecture,
        prev_call,
        per_week_day,
        per_day_period,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PieSlice {
    pub label: String,
    pub fraction: f64,
}

/// Value-frequency pie of one attribute over a member set; only the
/// largest slice is meant to be labeled in the rendering.
#[derive(Debug, Clone, Serialize)]
pub struct PieChart {
    pub attribute: String,
    pub slices: Vec<PieSlice>,
    pub largest: String,
}

fn pie_from_counts(attribute: &str, counts: Vec<(String, usize)>, total: usize) -> PieChart {
    let slices: Vec<PieSlice> = counts
        .into_iter()
        .filter(|(_, count)| *count > 0)
        .map(|(label, count)| PieSlice {
            label,
            fraction: count as f64 / total as f64,
        })
        .collect();
    let largest = slices
        .iter()
        .max_by(|a, b| a.fraction.partial_cmp(&b.fraction).unwrap())
        .map(|slice| slice.label.clone())
        .unwrap_or_default();
    PieChart {
        attribute: attribute.to_string(),
        slices,
        largest,
    }
}

/// One pie per attribute over a cluster's members, in the fixed section
/// order. Hours keep their own slice; elapsed times reuse the histogram
/// bins.
pub fn render_metacluster_charts(
    members: &[usize],
    records: &[CdrRecord],
) -> Result<Vec<PieChart>> {
    if members.is_empty() {
        return Err(Error::EmptyDataset("cluster has no members".into()));
    }
    let selected: Vec<&CdrRecord> = members.iter().map(|&m| &records[m]).collect();
    let total = selected.len();

    let mut prefectures: Vec<u16> = selected.iter().map(|r| r.subref_id).collect();
    prefectures.sort_unstable();
    prefectures.dedup();
    let subref = pie_from_counts(
        SECTION_NAMES[0],
        prefectures
            .iter()
            .map(|&p| {
                (
                    p.to_string(),
                    selected.iter().filter(|r| r.subref_id == p).count(),
                )
            })
            .collect(),
        total,
    );

    let week = pie_from_counts(
        SECTION_NAMES[1],
        WeekDay::ALL
            .iter()
            .map(|&d| {
                (
                    d.label().to_string(),
                    selected.iter().filter(|r| r.week_day == d).count(),
                )
            })
            .collect(),
        total,
    );

    let work = pie_from_counts(
        SECTION_NAMES[2],
        [(false, "0"), (true, "1")]
            .iter()
            .map(|&(value, label)| {
                (
                    label.to_string(),
                    selected.iter().filter(|r| r.work_day == value).count(),
                )
            })
            .collect(),
        total,
    );

    let conn = pie_from_counts(
        SECTION_NAMES[3],
        (0u8..24)
            .map(|h| {
                (
                    format!("{h:02}:00"),
                    selected.iter().filter(|r| r.conn_time == h).count(),
                )
            })
            .collect(),
        total,
    );

    let period = pie_from_counts(
        SECTION_NAMES[4],
        DayPeriod::ALL
            .iter()
            .map(|&p| {
                (
                    p.label().to_string(),
                    selected.iter().filter(|r| r.day_period == p).count(),
                )
            })
            .collect(),
        total,
    );

    let prev = pie_from_counts(
        SECTION_NAMES[5],
        PREV_CALL_BIN_LABELS
            .iter()
            .enumerate()
            .map(|(bin, label)| {
                (
                    (*label).to_string(),
                    selected
                        .iter()
                        .filter(|r| prev_call_bin(r.prev_call) == bin)
                        .count(),
                )
            })
            .collect(),
        total,
    );

    Ok(vec![subref, week, work, conn, period, prev])
}

#[derive(Debug, Clone, Serialize)]
pub struct PcTableRow {
    pub bits: String,
    pub cq: f64,
}

/// The equivalent-PC table of a meta-cluster: one row per PC plus the
/// per-section selection averages.
#[derive(Debug, Clone, Serialize)]
pub struct PcTable {
    pub rows: Vec<PcTableRow>,
    /// Mean of each bit across the rows, in section order.
    pub averages: Vec<f64>,
}

pub fn render_pc_table(meta: &MetaCluster) -> PcTable {
    let rows: Vec<PcTableRow> = meta
        .pc_list
        .iter()
        .map(|entry| PcTableRow {
            bits: entry.bits.bits_string(),
            cq: entry.cq,
        })
        .collect();
    let sections = meta.pc_list.first().map_or(0, |entry| entry.bits.len());
    let averages = (0..sections)
        .map(|section| {
            meta.pc_list
                .iter()
                .filter(|entry| entry.bits.is_selected(section))
                .count() as f64
                / meta.pc_list.len() as f64
        })
        .collect();
    PcTable { rows, averages }
}
