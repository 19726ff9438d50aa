//! Parametric composite dissimilarity over sectioned vectors.
//!
//! Each section carries its own measure: normalized Manhattan distance on
//! ordinal sections, the Delta (0/1) function on nominal sections, and a
//! wrap-around distance on the circular hour-of-day section. A Boolean
//! parameter configuration (PC) selects which sections count in the
//! composite sum; a cluster discovered under a PC is similar exactly with
//! respect to the selected sections.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cdr::{DatasetSchema, DomainKind, Section, SECTION_COUNT};
use crate::error::{Error, Result};

/// Period of the circular hour domain.
pub const CIRCULAR_PERIOD: f64 = 24.0;
/// Largest possible circular offset, used as the normalizer.
pub const CIRCULAR_HALF_PERIOD: f64 = 12.0;

/// Boolean weight vector selecting the sections that enter the composite
/// dissimilarity. At least two sections must be selected, which rules out
/// trivial single-feature clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParameterConfig {
    bits: u8,
    len: usize,
}

impl ParameterConfig {
    pub fn new(selected: &[bool]) -> Result<Self> {
        if selected.len() > 8 {
            return Err(Error::InvalidPc(format!(
                "at most 8 sections supported, got {}",
                selected.len()
            )));
        }
        let mut bits = 0u8;
        for (i, &on) in selected.iter().enumerate() {
            if on {
                bits |= 1 << i;
            }
        }
        Self::from_bits(bits, selected.len())
    }

    pub fn from_bits(bits: u8, len: usize) -> Result<Self> {
        if bits.count_ones() < 2 {
            return Err(Error::InvalidPc(
                "a parameter configuration needs at least two selected sections".to_string(),
            ));
        }
        if len < 2 || (u32::from(bits) >> len) != 0 {
            return Err(Error::InvalidPc(format!(
                "bit mask {bits:#b} does not fit {len} sections"
            )));
        }
        Ok(ParameterConfig { bits, len })
    }

    /// Parses the textual form, e.g. `"110100"`, first character being the
    /// first section.
    pub fn parse(text: &str) -> Result<Self> {
        let mut selected = Vec::with_capacity(text.len());
        for ch in text.chars() {
            match ch {
                '0' => selected.push(false),
                '1' => selected.push(true),
                other => {
                    return Err(Error::InvalidPc(format!(
                        "unexpected character {other:?} in PC string"
                    )))
                }
            }
        }
        Self::new(&selected)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_selected(&self, section: usize) -> bool {
        section < self.len && (self.bits >> section) & 1 == 1
    }

    /// Number of selected sections.
    pub fn weight(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn selected_sections(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.is_selected(i)).collect()
    }

    pub fn bits_string(&self) -> String {
        (0..self.len)
            .map(|i| if self.is_selected(i) { '1' } else { '0' })
            .collect()
    }

    /// Every valid PC for `section_count` sections, in ascending mask order.
    pub fn all_valid(section_count: usize) -> Vec<ParameterConfig> {
        let total = 1u16 << section_count;
        (0..total)
            .filter(|mask| mask.count_ones() >= 2)
            .map(|mask| ParameterConfig {
                bits: mask as u8,
                len: section_count,
            })
            .collect()
    }
}

impl fmt::Display for ParameterConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.bits_string())
    }
}

impl Serialize for ParameterConfig {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.bits_string())
    }
}

impl<'de> Deserialize<'de> for ParameterConfig {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        ParameterConfig::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// Normalized Manhattan distance on an ordinal section. A constant section
/// (min = max) carries no information and contributes 0.
pub fn manhattan(a: f64, b: f64, min: f64, max: f64) -> f64 {
    if max <= min {
        return 0.0;
    }
    (a - b).abs() / (max - min)
}

/// Delta dissimilarity on a nominal section: 0 iff equal, 1 otherwise.
pub fn delta(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        1.0
    }
}

/// Wrap-around distance on the circular hour domain, normalized so the
/// 12-hour offset maps to 1.
pub fn circular(a: f64, b: f64) -> Result<f64> {
    if !(0.0..CIRCULAR_PERIOD).contains(&a) {
        return Err(Error::Domain {
            domain: "circular hour",
            value: a,
        });
    }
    if !(0.0..CIRCULAR_PERIOD).contains(&b) {
        return Err(Error::Domain {
            domain: "circular hour",
            value: b,
        });
    }
    Ok(circular_unchecked(a, b))
}

pub(crate) fn circular_unchecked(a: f64, b: f64) -> f64 {
    let t1 = (a - b).abs();
    let t2 = (CIRCULAR_PERIOD - b + a)
        .abs()
        .min((CIRCULAR_PERIOD - a + b).abs());
    t1.min(t2) / CIRCULAR_HALF_PERIOD
}

/// Dissimilarity of two values drawn from one section.
pub fn section_dissimilarity(a: f64, b: f64, section: &Section) -> f64 {
    match section.kind {
        DomainKind::Nominal => delta(a, b),
        DomainKind::Ordinal => manhattan(a, b, section.min, section.max),
        DomainKind::Circular => circular_unchecked(a, b),
    }
}

/// Composite dissimilarity of two sectioned vectors under a Boolean PC:
/// the sum of per-section dissimilarities over the selected sections.
pub fn composite(
    a: &[f64; SECTION_COUNT],
    b: &[f64; SECTION_COUNT],
    pc: &ParameterConfig,
    schema: &DatasetSchema,
) -> Result<f64> {
    if pc.len() != schema.section_count() {
        return Err(Error::SchemaMismatch(format!(
            "PC has {} sections, schema has {}",
            pc.len(),
            schema.section_count()
        )));
    }
    let mut total = 0.0;
    for (i, section) in schema.sections.iter().enumerate() {
        if pc.is_selected(i) {
            total += section_dissimilarity(a[i], b[i], section);
        }
    }
    Ok(total)
}

/// Real-weighted variant of the composite sum. The Boolean PC is the
/// special case with weights in {0, 1}; the projected-clustering engine
/// reuses this path for its averaged segmental distance.
pub fn composite_weighted(
    a: &[f64; SECTION_COUNT],
    b: &[f64; SECTION_COUNT],
    weights: &[f64],
    schema: &DatasetSchema,
) -> Result<f64> {
    if weights.len() != schema.section_count() {
        return Err(Error::SchemaMismatch(format!(
            "{} weights for {} sections",
            weights.len(),
            schema.section_count()
        )));
    }
    let mut total = 0.0;
    for (i, section) in schema.sections.iter().enumerate() {
        if weights[i] != 0.0 {
            total += weights[i] * section_dissimilarity(a[i], b[i], section);
        }
    }
    Ok(total)
}

/// Draws a PC uniformly among the valid configurations not present in the
/// exclusion set, or `None` once the space is exhausted.
pub fn sample_pc<R: Rng>(
    rng: &mut R,
    section_count: usize,
    exclusions: &HashSet<ParameterConfig>,
) -> Option<ParameterConfig> {
    let candidates: Vec<ParameterConfig> = ParameterConfig::all_valid(section_count)
        .into_iter()
        .filter(|pc| !exclusions.contains(pc))
        .collect();
    if candidates.is_empty() {
        return None;
    }
    let index = rng.random_range(0..candidates.len());
    Some(candidates[index])
}
