//! Publisher ratings, admission and priority tiers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::domain::Priority;
use crate::gateway::digest_json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactualityRating {
    VeryHigh,
    High,
    MostlyFactual,
    Mixed,
    Low,
    VeryLow,
}

impl FactualityRating {
    pub const ALL: [FactualityRating; 6] = [
        FactualityRating::VeryHigh,
        FactualityRating::High,
        FactualityRating::MostlyFactual,
        FactualityRating::Mixed,
        FactualityRating::Low,
        FactualityRating::VeryLow,
    ];

    /// 5 for very high down to 0 for very low.
    pub fn level(self) -> u8 {
        5 - FactualityRating::ALL.iter().position(|&f| f == self).unwrap() as u8
    }

    pub fn label(self) -> &'static str {
        match self {
            FactualityRating::VeryHigh => "very high",
            FactualityRating::High => "high",
            FactualityRating::MostlyFactual => "mostly factual",
            FactualityRating::Mixed => "mixed",
            FactualityRating::Low => "low",
            FactualityRating::VeryLow => "very low",
        }
    }
}

impl Ord for FactualityRating {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.level().cmp(&other.level())
    }
}

impl PartialOrd for FactualityRating {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasRating {
    LeastBiased,
    LeftCenter,
    RightCenter,
    Left,
    Right,
    ExtremeLeft,
    ExtremeRight,
    ProScience,
    Questionable,
    Satire,
    ConspiracyPseudoscience,
}

impl BiasRating {
    pub const ALL: [BiasRating; 11] = [
        BiasRating::LeastBiased,
        BiasRating::LeftCenter,
        BiasRating::RightCenter,
        BiasRating::Left,
        BiasRating::Right,
        BiasRating::ExtremeLeft,
        BiasRating::ExtremeRight,
        BiasRating::ProScience,
        BiasRating::Questionable,
        BiasRating::Satire,
        BiasRating::ConspiracyPseudoscience,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BiasRating::LeastBiased => "least biased",
            BiasRating::LeftCenter => "left-center",
            BiasRating::RightCenter => "right-center",
            BiasRating::Left => "left",
            BiasRating::Right => "right",
            BiasRating::ExtremeLeft => "extremely left",
            BiasRating::ExtremeRight => "extremely right",
            BiasRating::ProScience => "pro-science",
            BiasRating::Questionable => "questionable",
            BiasRating::Satire => "satire",
            BiasRating::ConspiracyPseudoscience => "conspiracy-pseudoscience",
        }
    }
}

/// Lowercased label with everything but letters removed, so "Left-Center",
/// "left center" and "LEFT_CENTER" compare equal.
fn squash(label: &str) -> String {
    label
        .chars()
        .filter(char::is_ascii_alphabetic)
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

impl FromStr for FactualityRating {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = squash(s);
        FactualityRating::ALL
            .into_iter()
            .find(|f| squash(f.label()) == key)
            .ok_or_else(|| format!("unknown factuality category {s:?}"))
    }
}

impl FromStr for BiasRating {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = squash(s);
        let key = match key.as_str() {
            "extremeleft" => "extremelyleft".to_string(),
            "extremeright" => "extremelyright".to_string(),
            _ => key,
        };
        BiasRating::ALL
            .into_iter()
            .find(|b| squash(b.label()) == key)
            .ok_or_else(|| format!("unknown bias category {s:?}"))
    }
}

impl fmt::Display for FactualityRating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl fmt::Display for BiasRating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublisherRecord {
    pub domain: String,
    pub factuality: FactualityRating,
    pub bias: BiasRating,
}

const ADMITTED_FACTUALITY: [FactualityRating; 3] = [
    FactualityRating::VeryHigh,
    FactualityRating::High,
    FactualityRating::MostlyFactual,
];

const ADMITTED_BIAS: [BiasRating; 4] = [
    BiasRating::LeastBiased,
    BiasRating::LeftCenter,
    BiasRating::RightCenter,
    BiasRating::ProScience,
];

pub fn admit(factuality: FactualityRating, bias: BiasRating) -> bool {
    ADMITTED_FACTUALITY.contains(&factuality) && ADMITTED_BIAS.contains(&bias)
}

pub fn priority(factuality: FactualityRating, bias: BiasRating) -> Priority {
    if !admit(factuality, bias) {
        Priority::Excluded
    } else if factuality == FactualityRating::VeryHigh
        && matches!(bias, BiasRating::LeastBiased | BiasRating::ProScience)
    {
        Priority::High
    } else if factuality >= FactualityRating::High {
        Priority::Medium
    } else {
        Priority::Low
    }
}

impl PublisherRecord {
    pub fn admitted(&self) -> bool {
        admit(self.factuality, self.bias)
    }

    pub fn priority(&self) -> Priority {
        priority(self.factuality, self.bias)
    }
}

/// Suffixes of a host from longest to shortest: `a.b.org`, `b.org`, `org`.
fn host_suffixes(host: &str) -> impl Iterator<Item = &str> {
    std::iter::successors(Some(host), |h| h.split_once('.').map(|(_, rest)| rest))
}

fn url_host(url: &Url) -> Option<String> {
    url.host_str()
        .map(|h| h.trim_end_matches('.').to_ascii_lowercase())
}

/// Reduces a registry cell like `https://www.Example.org/` to `example.org`.
pub fn normalize_domain(raw: &str) -> String {
    let mut d = raw.trim().to_ascii_lowercase();
    for prefix in ["https://", "http://"] {
        if let Some(rest) = d.strip_prefix(prefix) {
            d = rest.to_string();
        }
    }
    if let Some((host, _)) = d.split_once('/') {
        d = host.to_string();
    }
    d.strip_prefix("www.").map(str::to_string).unwrap_or(d).trim_end_matches('.').to_string()
}

/// Set of publisher domains a search may return.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Scope {
    domains: BTreeSet<String>,
    digest: String,
}

impl Scope {
    pub fn from_domains<I, S>(domains: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let domains: BTreeSet<String> = domains.into_iter().map(|d| normalize_domain(d.as_ref())).collect();
        let digest = if domains.is_empty() {
            String::new()
        } else {
            digest_json(&domains)
        };
        Self { domains, digest }
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        self.domains.iter().map(String::as_str)
    }

    pub fn contains_url(&self, url: &Url) -> bool {
        url_host(url).is_some_and(|host| host_suffixes(&host).any(|s| self.domains.contains(s)))
    }
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("reading registry {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed registry at {location}: {message}")]
    Malformed { location: String, message: String },
}

fn malformed(location: String, message: impl Into<String>) -> RegistryError {
    RegistryError::Malformed {
        location,
        message: message.into(),
    }
}

#[derive(Deserialize)]
struct RawRecord {
    domain: String,
    factuality: String,
    bias: String,
}

/// Immutable set of rated publishers.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    records: BTreeMap<String, PublisherRecord>,
    snapshot: String,
}

impl Registry {
    /// Loads CSV, or JSON when the file ends in `.json`.
    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        let text = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_csv_str(&text)
        }
    }

    /// CSV with a header row naming `domain`, `factuality` and `bias`.
    pub fn from_csv_str(text: &str) -> Result<Self, RegistryError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let location = |pos: Option<&csv::Position>| format!("line {}", pos.map_or(0, |p| p.line()));
        let headers = reader
            .headers()
            .map_err(|e| malformed(location(e.position()), e.to_string()))?
            .clone();
        let mut rows = Vec::new();
        for result in reader.records() {
            let record = result.map_err(|e| malformed(location(e.position()), e.to_string()))?;
            let raw: RawRecord = record
                .deserialize(Some(&headers))
                .map_err(|e| malformed(location(record.position()), e.to_string()))?;
            rows.push((location(record.position()), raw));
        }
        Self::from_rows(rows)
    }

    pub fn from_json_str(text: &str) -> Result<Self, RegistryError> {
        let raws: Vec<RawRecord> = serde_json::from_str(text)
            .map_err(|e| malformed(format!("line {}", e.line()), e.to_string()))?;
        Self::from_rows(
            raws.into_iter()
                .enumerate()
                .map(|(i, raw)| (format!("entry {}", i + 1), raw))
                .collect(),
        )
    }

    fn from_rows(rows: Vec<(String, RawRecord)>) -> Result<Self, RegistryError> {
        let mut records = BTreeMap::new();
        for (location, raw) in rows {
            let domain = normalize_domain(&raw.domain);
            if domain.is_empty() || !domain.contains('.') {
                return Err(malformed(location, format!("invalid domain {:?}", raw.domain)));
            }
            let factuality = raw.factuality.parse().map_err(|m: String| malformed(location.clone(), m))?;
            let bias = raw.bias.parse().map_err(|m: String| malformed(location.clone(), m))?;
            let record = PublisherRecord {
                domain: domain.clone(),
                factuality,
                bias,
            };
            if records.insert(domain.clone(), record).is_some() {
                return Err(malformed(location, format!("duplicate domain {domain}")));
            }
        }
        Ok(Self::from_records_map(records))
    }

    /// Builds a registry from already-typed records; later duplicates lose.
    pub fn from_records(records: impl IntoIterator<Item = PublisherRecord>) -> Self {
        let mut map = BTreeMap::new();
        for mut record in records {
            record.domain = normalize_domain(&record.domain);
            map.entry(record.domain.clone()).or_insert(record);
        }
        Self::from_records_map(map)
    }

    fn from_records_map(records: BTreeMap<String, PublisherRecord>) -> Self {
        let snapshot = digest_json(&records.values().collect::<Vec<_>>());
        Self { records, snapshot }
    }

    /// Content hash of the ratings, independent of file order and format.
    pub fn snapshot_hash(&self) -> &str {
        &self.snapshot
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &PublisherRecord> {
        self.records.values()
    }

    /// Record for the most specific registered suffix of the URL's host.
    pub fn lookup(&self, url: &Url) -> Option<&PublisherRecord> {
        let host = url_host(url)?;
        let found = host_suffixes(&host).find_map(|s| self.records.get(s));
        found
    }

    /// Unrated publishers are excluded.
    pub fn priority_of(&self, url: &Url) -> Priority {
        self.lookup(url).map_or(Priority::Excluded, PublisherRecord::priority)
    }

    /// Admitted publishers, the search scope.
    pub fn scope(&self) -> Scope {
        Scope::from_domains(self.records.values().filter(|r| r.admitted()).map(|r| r.domain.as_str()))
    }
}
