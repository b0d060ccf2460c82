use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Days per week, for converting step counts to reported durations.
pub const DAYS_PER_WEEK: f64 = 7.0;

/// The nine survey summaries, in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SummaryKey {
    FracPaired,
    FracConcurrent,
    MeanSteadyDuration,
    MeanCasualGapSingle,
    MeanCasualGapPaired,
    FracSingleCasualLastweek,
    FracPairedCasualLastweek,
    FracRetainedNodes,
    FracRetainedEdges,
}

impl SummaryKey {
    pub const COUNT: usize = 9;

    pub const ALL: [SummaryKey; 9] = [
        SummaryKey::FracPaired,
        SummaryKey::FracConcurrent,
        SummaryKey::MeanSteadyDuration,
        SummaryKey::MeanCasualGapSingle,
        SummaryKey::MeanCasualGapPaired,
        SummaryKey::FracSingleCasualLastweek,
        SummaryKey::FracPairedCasualLastweek,
        SummaryKey::FracRetainedNodes,
        SummaryKey::FracRetainedEdges,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SummaryKey::FracPaired => "frac_paired",
            SummaryKey::FracConcurrent => "frac_concurrent",
            SummaryKey::MeanSteadyDuration => "mean_steady_duration",
            SummaryKey::MeanCasualGapSingle => "mean_casual_gap_single",
            SummaryKey::MeanCasualGapPaired => "mean_casual_gap_paired",
            SummaryKey::FracSingleCasualLastweek => "frac_single_casual_lastweek",
            SummaryKey::FracPairedCasualLastweek => "frac_paired_casual_lastweek",
            SummaryKey::FracRetainedNodes => "frac_retained_nodes",
            SummaryKey::FracRetainedEdges => "frac_retained_edges",
        }
    }

    pub fn from_name(name: &str) -> Option<SummaryKey> {
        SummaryKey::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Durations are reported in days; everything else is a fraction.
    pub fn is_duration(self) -> bool {
        matches!(
            self,
            SummaryKey::MeanSteadyDuration
                | SummaryKey::MeanCasualGapSingle
                | SummaryKey::MeanCasualGapPaired
        )
    }

    pub fn is_longitudinal(self) -> bool {
        matches!(self, SummaryKey::FracRetainedNodes | SummaryKey::FracRetainedEdges)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    fn bit(self) -> u16 {
        1 << self.index()
    }
}

impl fmt::Display for SummaryKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which summaries are present, as a bit set over [`SummaryKey`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct SummaryLayout(u16);

impl SummaryLayout {
    pub const EMPTY: SummaryLayout = SummaryLayout(0);
    pub const FULL: SummaryLayout = SummaryLayout((1 << SummaryKey::COUNT) - 1);

    pub fn from_keys(keys: impl IntoIterator<Item = SummaryKey>) -> Self {
        SummaryLayout(keys.into_iter().fold(0, |acc, k| acc | k.bit()))
    }

    pub fn contains(self, key: SummaryKey) -> bool {
        self.0 & key.bit() != 0
    }

    pub fn intersect(self, other: SummaryLayout) -> SummaryLayout {
        SummaryLayout(self.0 & other.0)
    }

    pub fn keys(self) -> impl Iterator<Item = SummaryKey> {
        SummaryKey::ALL.into_iter().filter(move |k| self.contains(*k))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn bits(self) -> u16 {
        self.0
    }
}

impl fmt::Display for SummaryLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.keys().map(SummaryKey::name).collect();
        write!(f, "[{}]", names.join(", "))
    }
}

/// Groups of summaries compared in the lag study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummarySet {
    /// Binary questions only: fraction paired, fraction concurrent, casual
    /// contact in the last week (singles and partnered) and the two
    /// retention fractions.
    Longitudinal,
    /// Timeline follow-back diary: fraction paired, fraction concurrent,
    /// steady duration and the two casual gaps.
    Tlfb,
    /// All nine summaries.
    All,
}

impl SummarySet {
    pub const ALL: [SummarySet; 3] = [SummarySet::Longitudinal, SummarySet::Tlfb, SummarySet::All];

    pub fn layout(self) -> SummaryLayout {
        use SummaryKey::*;
        match self {
            SummarySet::Longitudinal => SummaryLayout::from_keys([
                FracPaired,
                FracConcurrent,
                FracSingleCasualLastweek,
                FracPairedCasualLastweek,
                FracRetainedNodes,
                FracRetainedEdges,
            ]),
            SummarySet::Tlfb => SummaryLayout::from_keys([
                FracPaired,
                FracConcurrent,
                MeanSteadyDuration,
                MeanCasualGapSingle,
                MeanCasualGapPaired,
            ]),
            SummarySet::All => SummaryLayout::FULL,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SummarySet::Longitudinal => "longitudinal",
            SummarySet::Tlfb => "tlfb",
            SummarySet::All => "all",
        }
    }
}

impl FromStr for SummarySet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SummarySet::ALL
            .into_iter()
            .find(|set| set.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown summary set {s:?}")))
    }
}

impl fmt::Display for SummarySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Survey summaries in natural units (fractions, days). Entries a design
/// cannot produce are absent rather than zero; `counts` records how many
/// respondents (or relationships) stand behind each entry.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SummaryVector {
    values: [Option<f64>; SummaryKey::COUNT],
    counts: [u64; SummaryKey::COUNT],
}

impl SummaryVector {
    pub fn get(&self, key: SummaryKey) -> Option<f64> {
        self.values[key.index()]
    }

    pub fn count(&self, key: SummaryKey) -> u64 {
        self.counts[key.index()]
    }

    pub fn set(&mut self, key: SummaryKey, value: f64, count: u64) {
        self.values[key.index()] = Some(value);
        self.counts[key.index()] = count;
    }

    pub fn clear(&mut self, key: SummaryKey) {
        self.values[key.index()] = None;
        self.counts[key.index()] = 0;
    }

    /// Builds a vector from `(key, value)` pairs with unit counts.
    pub fn from_values(values: impl IntoIterator<Item = (SummaryKey, f64)>) -> Self {
        let mut out = SummaryVector::default();
        for (k, v) in values {
            out.set(k, v, 1);
        }
        out
    }

    pub fn layout(&self) -> SummaryLayout {
        SummaryLayout::from_keys(SummaryKey::ALL.into_iter().filter(|k| self.get(*k).is_some()))
    }

    pub fn present(&self) -> impl Iterator<Item = (SummaryKey, f64)> + '_ {
        SummaryKey::ALL
            .into_iter()
            .filter_map(|k| self.get(k).map(|v| (k, v)))
    }

    /// Keeps only the entries in `layout`.
    pub fn restricted(&self, layout: SummaryLayout) -> SummaryVector {
        let mut out = *self;
        for k in SummaryKey::ALL {
            if !layout.contains(k) {
                out.clear(k);
            }
        }
        out
    }

    /// Count-weighted average of several vectors, entry by entry. Entries
    /// absent everywhere (or with zero total weight) stay absent.
    pub fn weighted_mean<'a>(parts: impl IntoIterator<Item = &'a SummaryVector>) -> SummaryVector {
        let mut sum = [0.0f64; SummaryKey::COUNT];
        let mut weight = [0u64; SummaryKey::COUNT];
        for part in parts {
            for k in SummaryKey::ALL {
                if let Some(v) = part.get(k) {
                    let w = part.count(k);
                    sum[k.index()] += v * w as f64;
                    weight[k.index()] += w;
                }
            }
        }
        let mut out = SummaryVector::default();
        for k in SummaryKey::ALL {
            let w = weight[k.index()];
            if w > 0 {
                out.set(k, sum[k.index()] / w as f64, w);
            }
        }
        out
    }

    /// Flat `key = value` record; absent entries are listed explicitly.
    pub fn to_record(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.present() {
            let _ = writeln!(s, "{} = {}", k.name(), fmt_f64(v));
        }
        let absent: Vec<String> = SummaryKey::ALL
            .into_iter()
            .filter(|k| self.get(*k).is_none())
            .map(|k| format!("\"{}\"", k.name()))
            .collect();
        let _ = writeln!(s, "absent = [{}]", absent.join(", "));
        s.push_str("\n[counts]\n");
        for (k, _) in self.present() {
            let _ = writeln!(s, "{} = {}", k.name(), self.count(k));
        }
        s
    }

    /// Parses a record written by [`SummaryVector::to_record`] or a
    /// hand-written observed-summaries file. Keys not mentioned are absent.
    pub fn from_record(text: &str) -> std::result::Result<SummaryVector, String> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
        let mut out = SummaryVector::default();
        let counts = table.get("counts").and_then(|c| c.as_table());
        for (name, value) in &table {
            if name == "counts" || name == "absent" {
                continue;
            }
            let key = SummaryKey::from_name(name).ok_or_else(|| format!("unknown summary {name:?}"))?;
            let v = value
                .as_float()
                .or_else(|| value.as_integer().map(|i| i as f64))
                .ok_or_else(|| format!("summary {name:?} is not a number"))?;
            if !v.is_finite() {
                return Err(format!("summary {name:?} is not finite"));
            }
            let count = counts
                .and_then(|c| c.get(name))
                .and_then(|c| c.as_integer())
                .unwrap_or(1)
                .max(0) as u64;
            out.set(key, v, count);
        }
        if let Some(absent) = table.get("absent").and_then(|a| a.as_array()) {
            for name in absent {
                let name = name.as_str().ok_or("absent list must hold strings")?;
                let key = SummaryKey::from_name(name).ok_or_else(|| format!("unknown summary {name:?}"))?;
                if out.get(key).is_some() {
                    return Err(format!("summary {name:?} both present and absent"));
                }
            }
        }
        Ok(out)
    }

    /// Summaries reported for the Stockholm MSM survey (403 respondents).
    pub fn stockholm_observed() -> SummaryVector {
        let mut out = SummaryVector::default();
        out.set(SummaryKey::FracPaired, 0.64, 403);
        out.set(SummaryKey::FracConcurrent, 0.146, 403);
        out.set(SummaryKey::MeanSteadyDuration, 203.0, 403);
        out.set(SummaryKey::MeanCasualGapSingle, 23.1, 403);
        out.set(SummaryKey::MeanCasualGapPaired, 36.3, 403);
        out
    }
}

/// Shortest decimal representation that round-trips.
pub(crate) fn fmt_f64(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}
