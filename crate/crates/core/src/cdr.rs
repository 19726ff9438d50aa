//! Raw call-record parsing and feature derivation.
//!
//! A raw record carries only `{user_id, conn_datetime, subref_id}`. The
//! augmented record explicits the information hidden in the timestamp:
//! day of the week, working-day flag, hour of the call, period of the day
//! and minutes elapsed since the previous call of the same user.

use std::collections::BTreeSet;
use std::io::BufRead;

use chrono::{Datelike, NaiveDateTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of sections in an augmented record.
pub const SECTION_COUNT: usize = 6;

/// Elapsed-time cap in minutes; the value also acts as the "more than one
/// day" sentinel assigned to the first record of a user.
pub const PREV_CALL_CAP: u32 = 1440;

/// Fixed section order of the augmented record.
pub const SECTION_NAMES: [&str; SECTION_COUNT] = [
    "subref_id",
    "week_day",
    "work_day",
    "conn_time",
    "day_period",
    "prev_call",
];

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WeekDay {
    Mon,
    Tue,
    Wed,
    Thu,
    Fri,
    Sat,
    Sun,
}

impl WeekDay {
    pub const ALL: [WeekDay; 7] = [
        WeekDay::Mon,
        WeekDay::Tue,
        WeekDay::Wed,
        WeekDay::Thu,
        WeekDay::Fri,
        WeekDay::Sat,
        WeekDay::Sun,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            WeekDay::Mon => "Mon",
            WeekDay::Tue => "Tue",
            WeekDay::Wed => "Wed",
            WeekDay::Thu => "Thu",
            WeekDay::Fri => "Fri",
            WeekDay::Sat => "Sat",
            WeekDay::Sun => "Sun",
        }
    }

    pub fn is_weekend(self) -> bool {
        matches!(self, WeekDay::Sat | WeekDay::Sun)
    }
}

impl From<Weekday> for WeekDay {
    fn from(day: Weekday) -> Self {
        match day {
            Weekday::Mon => WeekDay::Mon,
            Weekday::Tue => WeekDay::Tue,
            Weekday::Wed => WeekDay::Wed,
            Weekday::Thu => WeekDay::Thu,
            Weekday::Fri => WeekDay::Fri,
            Weekday::Sat => WeekDay::Sat,
            Weekday::Sun => WeekDay::Sun,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DayPeriod {
    Mor,
    Aft,
    Eve,
}

impl DayPeriod {
    pub const ALL: [DayPeriod; 3] = [DayPeriod::Mor, DayPeriod::Aft, DayPeriod::Eve];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            DayPeriod::Mor => "Mor",
            DayPeriod::Aft => "Aft",
            DayPeriod::Eve => "Eve",
        }
    }

    /// Hours covered by this period; the three periods tile the full day.
    pub fn hours(self) -> Vec<u8> {
        match self {
            DayPeriod::Mor => (7..=13).collect(),
            DayPeriod::Aft => (14..=19).collect(),
            DayPeriod::Eve => (20..=23).chain(0..=6).collect(),
        }
    }

    /// Period an hour of the day falls in: [7, 13] morning, [14, 19]
    /// afternoon, the rest evening/night.
    pub fn from_hour(hour: u8) -> DayPeriod {
        match hour {
            7..=13 => DayPeriod::Mor,
            14..=19 => DayPeriod::Aft,
            _ => DayPeriod::Eve,
        }
    }
}

/// One raw call event as found in the input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCdr {
    pub user_id: String,
    pub timestamp: NaiveDateTime,
    pub subref_id: u16,
}

/// Counters reported by [`parse_raw`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ParseStats {
    /// Records kept after filtering.
    pub parsed: usize,
    /// Lines that did not match the 3-column schema.
    pub malformed: usize,
    /// Valid records rejected by the user filter.
    pub filtered_out: usize,
}

fn parse_line(line: &str) -> Option<RawCdr> {
    let fields: Vec<&str> = if line.contains('\t') {
        line.split('\t').collect()
    } else {
        line.split(',').collect()
    };
    if fields.len() != 3 {
        return None;
    }
    let user_id = fields[0].trim();
    if user_id.is_empty() {
        return None;
    }
    let timestamp = NaiveDateTime::parse_from_str(fields[1].trim(), TIMESTAMP_FORMAT).ok()?;
    let subref_id: u16 = fields[2].trim().parse().ok()?;
    if !(1..=255).contains(&subref_id) {
        return None;
    }
    Some(RawCdr {
        user_id: user_id.to_string(),
        timestamp,
        subref_id,
    })
}

/// Parses a 3-column delimited stream (tab or comma separated) of
/// `{user_id, conn_datetime, subref_id}` lines. Lines starting with `#`
/// are treated as header/comment lines. Malformed lines are counted but
/// not fatal; the records of the selected user are returned sorted by
/// timestamp, ties keeping input order.
pub fn parse_raw<R: BufRead>(
    reader: R,
    user_filter: Option<&str>,
) -> Result<(Vec<RawCdr>, ParseStats)> {
    let mut stats = ParseStats::default();
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        match parse_line(trimmed) {
            Some(record) => {
                if let Some(user) = user_filter {
                    if record.user_id != user {
                        stats.filtered_out += 1;
                        continue;
                    }
                }
                records.push(record);
                stats.parsed += 1;
            }
            None => stats.malformed += 1,
        }
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset(match user_filter {
            Some(user) => format!("no valid records for user {user}"),
            None => "no valid records in input".to_string(),
        }));
    }
    records.sort_by_key(|r| r.timestamp);
    Ok((records, stats))
}

/// Distinct user ids present in a raw stream, in first-seen order.
pub fn list_users<R: BufRead>(reader: R) -> Result<Vec<String>> {
    let mut seen = BTreeSet::new();
    let mut users = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(record) = parse_line(trimmed) {
            if seen.insert(record.user_id.clone()) {
                users.push(record.user_id);
            }
        }
    }
    Ok(users)
}

/// One augmented call event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CdrRecord {
    pub subref_id: u16,
    pub week_day: WeekDay,
    pub work_day: bool,
    /// Hour of the call, resolution of one hour.
    pub conn_time: u8,
    pub day_period: DayPeriod,
    /// Minutes elapsed since the previous call, capped at [`PREV_CALL_CAP`].
    pub prev_call: u32,
}

impl CdrRecord {
    /// Numeric sectioned-vector form, one value per section in the fixed
    /// order of [`SECTION_NAMES`].
    pub fn to_vector(&self) -> [f64; SECTION_COUNT] {
        [
            f64::from(self.subref_id),
            self.week_day.index() as f64,
            if self.work_day { 1.0 } else { 0.0 },
            f64::from(self.conn_time),
            self.day_period.index() as f64,
            f64::from(self.prev_call),
        ]
    }
}

/// Derives the implicit attributes from a timestamp-sorted run of raw
/// records belonging to one user. The first record gets
/// `prev_call = PREV_CALL_CAP` since it has no predecessor.
pub fn augment(records: &[RawCdr]) -> Result<Vec<CdrRecord>> {
    if records.is_empty() {
        return Err(Error::EmptyDataset("no records to augment".to_string()));
    }
    for (index, pair) in records.windows(2).enumerate() {
        if pair[1].timestamp < pair[0].timestamp {
            return Err(Error::UnsortedInput { index: index + 1 });
        }
    }
    let mut out = Vec::with_capacity(records.len());
    let mut previous: Option<NaiveDateTime> = None;
    for raw in records {
        let week_day = WeekDay::from(raw.timestamp.weekday());
        let hour = raw.timestamp.hour() as u8;
        let prev_call = match previous {
            None => PREV_CALL_CAP,
            Some(prev) => {
                let minutes = (raw.timestamp - prev).num_minutes().max(0) as u64;
                minutes.min(u64::from(PREV_CALL_CAP)) as u32
            }
        };
        out.push(CdrRecord {
            subref_id: raw.subref_id,
            week_day,
            work_day: !week_day.is_weekend(),
            conn_time: hour,
            day_period: DayPeriod::from_hour(hour),
            prev_call,
        });
        previous = Some(raw.timestamp);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainKind {
    Nominal,
    Ordinal,
    Circular,
}

/// One section of the schema: its domain kind plus the normalization
/// constants observed over the dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Section {
    pub name: &'static str,
    pub kind: DomainKind,
    pub min: f64,
    pub max: f64,
}

impl Section {
    /// A degenerate section where every record holds the same value. It
    /// carries no information and contributes zero dissimilarity.
    pub fn is_constant(&self) -> bool {
        self.min == self.max
    }
}

/// Structure of the sectioned vectors: the six sections in fixed order,
/// each one-dimensional, so the total dimension equals the section count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSchema {
    pub sections: Vec<Section>,
}

impl DatasetSchema {
    pub fn section_count(&self) -> usize {
        self.sections.len()
    }

    pub fn total_dim(&self) -> usize {
        self.sections.len()
    }
}

const SECTION_KINDS: [DomainKind; SECTION_COUNT] = [
    DomainKind::Nominal,
    DomainKind::Nominal,
    DomainKind::Nominal,
    DomainKind::Circular,
    DomainKind::Nominal,
    DomainKind::Ordinal,
];

/// Scans the records and emits the six sections in fixed order with their
/// observed per-section extrema.
pub fn build_schema(records: &[CdrRecord]) -> Result<DatasetSchema> {
    if records.is_empty() {
        return Err(Error::EmptyDataset("no records for schema".to_string()));
    }
    let mut mins = [f64::INFINITY; SECTION_COUNT];
    let mut maxs = [f64::NEG_INFINITY; SECTION_COUNT];
    for record in records {
        let vector = record.to_vector();
        for (i, value) in vector.iter().enumerate() {
            mins[i] = mins[i].min(*value);
            maxs[i] = maxs[i].max(*value);
        }
    }
    let sections = (0..SECTION_COUNT)
        .map(|i| Section {
            name: SECTION_NAMES[i],
            kind: SECTION_KINDS[i],
            min: mins[i],
            max: maxs[i],
        })
        .collect();
    Ok(DatasetSchema { sections })
}

/// An immutable dataset: augmented records, their vector forms and the
/// schema computed over them.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub schema: DatasetSchema,
    pub records: Vec<CdrRecord>,
    pub vectors: Vec<[f64; SECTION_COUNT]>,
}

impl Dataset {
    pub fn from_records(records: Vec<CdrRecord>) -> Result<Self> {
        let schema = build_schema(&records)?;
        let vectors = records.iter().map(CdrRecord::to_vector).collect();
        Ok(Dataset {
            schema,
            records,
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn ts(s: &str) -> NaiveDateTime {
        NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT).unwrap()
    }

    #[test]
    fn parses_tab_separated_line() {
        let input = "4\t2011-12-05 08:00:00\t60\n";
        let (records, stats) = parse_raw(Cursor::new(input), None).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(stats.parsed, 1);
        assert_eq!(records[0].user_id, "4");
        assert_eq!(records[0].subref_id, 60);
        assert_eq!(records[0].timestamp, ts("2011-12-05 08:00:00"));
        // 2011-12-05 was a Monday.
        assert_eq!(WeekDay::from(records[0].timestamp.weekday()), WeekDay::Mon);
    }

    #[test]
    fn parses_comma_separated_and_header() {
        let input = "# user,datetime,subref\n4,2011-12-05 08:00:00,60\n";
        let (records, stats) = parse_raw(Cursor::new(input), None).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(stats.malformed, 0);
    }

    #[test]
    fn empty_input_is_an_error() {
        let err = parse_raw(Cursor::new(""), None).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset(_)));
    }

    #[test]
    fn two_field_line_counts_as_malformed() {
        let input = "4\t2011-12-05 08:00:00\t60\nbroken line\t5\n";
        let (records, stats) = parse_raw(Cursor::new(input), None).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(stats.malformed, 1);
    }

    #[test]
    fn subref_out_of_range_is_malformed() {
        let input =
            "4\t2011-12-05 08:00:00\t0\n4\t2011-12-05 09:00:00\t256\n4\t2011-12-05 10:00:00\t255\n";
        let (records, stats) = parse_raw(Cursor::new(input), None).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].subref_id, 255);
        assert_eq!(stats.malformed, 2);
    }

    #[test]
    fn user_filter_drops_other_users() {
        let input = "4\t2011-12-05 08:00:00\t60\n7\t2011-12-05 09:00:00\t61\n";
        let (records, stats) = parse_raw(Cursor::new(input), Some("4")).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(stats.filtered_out, 1);
    }

    #[test]
    fn records_come_back_in_timestamp_order() {
        let input = "4\t2011-12-06 08:00:00\t60\n4\t2011-12-05 08:00:00\t61\n";
        let (records, _) = parse_raw(Cursor::new(input), None).unwrap();
        assert_eq!(records[0].subref_id, 61);
        assert_eq!(records[1].subref_id, 60);
    }

    #[test]
    fn augment_computes_prev_call_gap() {
        let raw = vec![
            RawCdr {
                user_id: "4".into(),
                timestamp: ts("2011-12-05 08:00:00"),
                subref_id: 60,
            },
            RawCdr {
                user_id: "4".into(),
                timestamp: ts("2011-12-05 09:30:00"),
                subref_id: 60,
            },
        ];
        let records = augment(&raw).unwrap();
        assert_eq!(records[0].prev_call, PREV_CALL_CAP);
        assert_eq!(records[1].prev_call, 90);
        assert_eq!(records[0].week_day, WeekDay::Mon);
        assert!(records[0].work_day);
    }

    #[test]
    fn afternoon_hours_map_to_aft() {
        assert_eq!(DayPeriod::from_hour(15), DayPeriod::Aft);
        assert_eq!(DayPeriod::from_hour(14), DayPeriod::Aft);
        assert_eq!(DayPeriod::from_hour(19), DayPeriod::Aft);
    }

    #[test]
    fn period_mapping_covers_every_hour() {
        for hour in 0u8..24 {
            let period = DayPeriod::from_hour(hour);
            match hour {
                7..=13 => assert_eq!(period, DayPeriod::Mor),
                14..=19 => assert_eq!(period, DayPeriod::Aft),
                _ => assert_eq!(period, DayPeriod::Eve),
            }
            assert!(period.hours().contains(&hour));
        }
    }

    #[test]
    fn single_record_gets_the_cap() {
        let raw = vec![RawCdr {
            user_id: "4".into(),
            timestamp: ts("2012-02-29 12:00:00"),
            subref_id: 60,
        }];
        let records = augment(&raw).unwrap();
        assert_eq!(records[0].prev_call, PREV_CALL_CAP);
        // 2012-02-29 (leap day) was a Wednesday.
        assert_eq!(records[0].week_day, WeekDay::Wed);
    }

    #[test]
    fn long_gaps_clamp_to_cap() {
        let raw = vec![
            RawCdr {
                user_id: "4".into(),
                timestamp: ts("2011-12-05 08:00:00"),
                subref_id: 60,
            },
            RawCdr {
                user_id: "4".into(),
                timestamp: ts("2011-12-09 08:00:00"),
                subref_id: 60,
            },
        ];
        let records = augment(&raw).unwrap();
        assert_eq!(records[1].prev_call, PREV_CALL_CAP);
    }

    #[test]
    fn unsorted_input_is_rejected() {
        let raw = vec![
            RawCdr {
                user_id: "4".into(),
                timestamp: ts("2011-12-06 08:00:00"),
                subref_id: 60,
            },
            RawCdr {
                user_id: "4".into(),
                timestamp: ts("2011-12-05 08:00:00"),
                subref_id: 60,
            },
        ];
        assert!(matches!(
            augment(&raw),
            Err(Error::UnsortedInput { index: 1 })
        ));
    }

    #[test]
    fn augment_is_deterministic() {
        let raw: Vec<RawCdr> = (0..50)
            .map(|i| RawCdr {
                user_id: "4".into(),
                timestamp: ts("2011-12-05 08:00:00") + chrono::Duration::minutes(i * 37),
                subref_id: 60 + (i % 3) as u16,
            })
            .collect();
        assert_eq!(augment(&raw).unwrap(), augment(&raw).unwrap());
    }

    #[test]
    fn derived_fields_are_consistent() {
        let raw: Vec<RawCdr> = (0..200)
            .map(|i| RawCdr {
                user_id: "4".into(),
                timestamp: ts("2011-12-01 00:00:00") + chrono::Duration::minutes(i * 311),
                subref_id: 1 + (i % 255) as u16,
            })
            .collect();
        for record in augment(&raw).unwrap() {
            assert_eq!(record.day_period, DayPeriod::from_hour(record.conn_time));
            assert_eq!(record.work_day, !record.week_day.is_weekend());
            assert!(record.prev_call <= PREV_CALL_CAP);
        }
    }

    #[test]
    fn schema_tracks_prev_call_extrema() {
        let records = vec![
            CdrRecord {
                subref_id: 60,
                week_day: WeekDay::Mon,
                work_day: true,
                conn_time: 8,
                day_period: DayPeriod::Mor,
                prev_call: 0,
            },
            CdrRecord {
                subref_id: 60,
                week_day: WeekDay::Tue,
                work_day: true,
                conn_time: 9,
                day_period: DayPeriod::Mor,
                prev_call: 90,
            },
            CdrRecord {
                subref_id: 60,
                week_day: WeekDay::Wed,
                work_day: true,
                conn_time: 10,
                day_period: DayPeriod::Mor,
                prev_call: 1440,
            },
        ];
        let schema = build_schema(&records).unwrap();
        assert_eq!(schema.section_count(), SECTION_COUNT);
        let prev = &schema.sections[5];
        assert_eq!(prev.kind, DomainKind::Ordinal);
        assert_eq!(prev.min, 0.0);
        assert_eq!(prev.max, 1440.0);
        // Every record came from prefecture 60: degenerate section.
        assert!(schema.sections[0].is_constant());
        let names: Vec<&str> = schema.sections.iter().map(|s| s.name).collect();
        assert_eq!(names, SECTION_NAMES);
    }

    #[test]
    fn schema_of_empty_input_is_an_error() {
        assert!(matches!(build_schema(&[]), Err(Error::EmptyDataset(_))));
    }
}
