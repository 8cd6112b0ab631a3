//! Temporal expression recognition and resolution against publication time.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Days, NaiveDate, TimeZone, Utc, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, Sentence, TokenSpan};

const DEFAULT_GRAMMAR: &str = include_str!("../data/temporal_grammar.tsv");

#[derive(Debug, Error)]
pub enum TemporalError {
    #[error("cannot resolve `{raw}`: {reason}")]
    UnresolvableExpression { raw: String, reason: String },
    #[error("grammar line {line}: {reason}")]
    Grammar { line: usize, reason: String },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unparsable time anchor `{0}`")]
    UnparsableAnchor(String),
}

impl TemporalError {
    pub fn kind(&self) -> &'static str {
        match self {
            TemporalError::UnresolvableExpression { .. } => "UnresolvableExpression",
            TemporalError::Grammar { .. } => "GrammarError",
            TemporalError::Io { .. } => "Io",
            TemporalError::UnparsableAnchor(_) => "UnparsableAnchor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnchorKind {
    Instant,
    Day,
    Interval,
}

/// The resolved time a message refers to.
///
/// Day anchors store `end == start` (midnight) and cover the whole calendar
/// day; interval anchors cover `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeAnchor {
    pub kind: AnchorKind,
    #[serde(with = "corpus::rfc3339")]
    pub start: DateTime<Utc>,
    #[serde(with = "corpus::rfc3339")]
    pub end: DateTime<Utc>,
}

impl TimeAnchor {
    pub fn instant(t: DateTime<Utc>) -> Self {
        let t = corpus::truncate_to_minute(t);
        TimeAnchor {
            kind: AnchorKind::Instant,
            start: t,
            end: t,
        }
    }

    pub fn day(date: NaiveDate) -> Self {
        let midnight = Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).expect("midnight exists"));
        TimeAnchor {
            kind: AnchorKind::Day,
            start: midnight,
            end: midnight,
        }
    }

    pub fn interval(start: DateTime<Utc>, end: DateTime<Utc>) -> Option<Self> {
        let (start, end) = (corpus::truncate_to_minute(start), corpus::truncate_to_minute(end));
        (start <= end).then_some(TimeAnchor {
            kind: AnchorKind::Interval,
            start,
            end,
        })
    }

    /// First covered minute, counted from the Unix epoch.
    pub fn first_minute(&self) -> i64 {
        self.start.timestamp().div_euclid(60)
    }

    /// Last covered minute (inclusive).
    pub fn last_minute(&self) -> i64 {
        match self.kind {
            AnchorKind::Day => self.first_minute() + 24 * 60 - 1,
            _ => self.end.timestamp().div_euclid(60),
        }
    }

    pub fn date(&self) -> NaiveDate {
        self.start.date_naive()
    }

    /// Parses `YYYY-MM-DD` as a day anchor or an RFC 3339 timestamp as an instant.
    pub fn parse(raw: &str) -> Result<Self, TemporalError> {
        let raw = raw.trim();
        if let Ok(date) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
            return Ok(TimeAnchor::day(date));
        }
        corpus::parse_timestamp(raw)
            .map(TimeAnchor::instant)
            .ok_or_else(|| TemporalError::UnparsableAnchor(raw.to_string()))
    }
}

impl fmt::Display for TimeAnchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            AnchorKind::Day => write!(f, "{}", self.date()),
            AnchorKind::Instant => f.write_str(&corpus::format_timestamp(&self.start)),
            AnchorKind::Interval => write!(
                f,
                "{}/{}",
                corpus::format_timestamp(&self.start),
                corpus::format_timestamp(&self.end)
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resolution {
    AbsoluteDate,
    IsoDate,
    RelativeDay,
    CountAgo,
    PreviousWeekday,
    NextWeekday,
    RecentWeekday,
    Unresolvable,
}

impl FromStr for Resolution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "absolute-date" => Resolution::AbsoluteDate,
            "iso-date" => Resolution::IsoDate,
            "relative-day" => Resolution::RelativeDay,
            "count-ago" => Resolution::CountAgo,
            "previous-weekday" => Resolution::PreviousWeekday,
            "next-weekday" => Resolution::NextWeekday,
            "recent-weekday" => Resolution::RecentWeekday,
            "unresolvable" => Resolution::Unresolvable,
            other => return Err(format!("unknown resolution rule `{other}`")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TokenClass {
    Count,
    Number,
    Day,
    Month,
    Year,
    Weekday,
    IsoDate,
}

impl TokenClass {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "count" => TokenClass::Count,
            "number" => TokenClass::Number,
            "day" => TokenClass::Day,
            "month" => TokenClass::Month,
            "year" => TokenClass::Year,
            "weekday" => TokenClass::Weekday,
            "iso-date" => TokenClass::IsoDate,
            _ => return None,
        })
    }

    fn matches(self, word: &str) -> bool {
        match self {
            TokenClass::Count => count_value(word).is_some(),
            TokenClass::Number => !word.is_empty() && word.chars().all(|c| c.is_ascii_digit()),
            TokenClass::Day => day_value(word).is_some(),
            TokenClass::Month => month_value(word).is_some(),
            TokenClass::Year => year_value(word).is_some(),
            TokenClass::Weekday => weekday_value(word).is_some(),
            TokenClass::IsoDate => NaiveDate::parse_from_str(word, "%Y-%m-%d").is_ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Element {
    Words(Vec<String>),
    Class(TokenClass),
}

impl Element {
    fn matches(&self, word: &str) -> bool {
        match self {
            Element::Words(alts) => alts.iter().any(|a| a == word),
            Element::Class(c) => c.matches(word),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternRule {
    pub id: String,
    elements: Vec<Element>,
    pub resolution: Resolution,
}

/// Ordered list of token patterns. Earlier rules win ties between equally
/// long matches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalGrammar {
    rules: Vec<PatternRule>,
}

impl Default for TemporalGrammar {
    fn default() -> Self {
        TemporalGrammar::parse(DEFAULT_GRAMMAR).expect("bundled grammar is valid")
    }
}

impl TemporalGrammar {
    pub fn parse(text: &str) -> Result<Self, TemporalError> {
        let mut rules = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let bad = |reason: String| TemporalError::Grammar { line: n + 1, reason };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(bad("expected `pattern_id<TAB>pattern<TAB>rule`".into()));
            }
            let elements = fields[1]
                .split_whitespace()
                .map(|el| {
                    if let Some(class) = el.strip_prefix('<').and_then(|e| e.strip_suffix('>')) {
                        TokenClass::parse(class)
                            .map(Element::Class)
                            .ok_or_else(|| bad(format!("unknown token class `{el}`")))
                    } else {
                        Ok(Element::Words(el.split('|').map(str::to_lowercase).collect()))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            if elements.is_empty() {
                return Err(bad("empty pattern".into()));
            }
            let resolution = fields[2].trim().parse().map_err(bad)?;
            rules.push(PatternRule {
                id: fields[0].trim().to_string(),
                elements,
                resolution,
            });
        }
        Ok(TemporalGrammar { rules })
    }

    pub fn load(path: &Path) -> Result<Self, TemporalError> {
        let text = fs::read_to_string(path).map_err(|source| TemporalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn rules(&self) -> &[PatternRule] {
        &self.rules
    }

    fn longest_match(&self, words: &[String], at: usize) -> Option<(&PatternRule, usize)> {
        let mut best: Option<(&PatternRule, usize)> = None;
        for rule in &self.rules {
            let len = rule.elements.len();
            if at + len > words.len() {
                continue;
            }
            if rule.elements.iter().zip(&words[at..]).all(|(e, w)| e.matches(w)) && best.is_none_or(|(_, l)| len > l) {
                best = Some((rule, len));
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalExpression {
    pub sentence_index: usize,
    pub span: TokenSpan,
    pub pattern_id: String,
    pub raw: String,
    pub resolution: Resolution,
    /// Lowercased surfaces of the matched tokens.
    pub words: Vec<String>,
}

/// Non-overlapping matches, scanned left to right with the longest match
/// taken at each position.
pub fn find_temporal_expressions(sentence: &Sentence, grammar: &TemporalGrammar) -> Vec<TemporalExpression> {
    let words: Vec<String> = sentence.tokens.iter().map(|t| t.surface.to_lowercase()).collect();
    let mut found = Vec::new();
    let mut i = 0;
    while i < words.len() {
        match grammar.longest_match(&words, i) {
            Some((rule, len)) => {
                let span = TokenSpan::new(i, i + len);
                found.push(TemporalExpression {
                    sentence_index: sentence.index,
                    span,
                    pattern_id: rule.id.clone(),
                    raw: sentence.span_text(span).to_string(),
                    resolution: rule.resolution,
                    words: words[i..i + len].to_vec(),
                });
                i += len;
            }
            None => i += 1,
        }
    }
    found
}

/// Resolves an expression against the publication time of its document.
pub fn resolve(expr: &TemporalExpression, publish_time: DateTime<Utc>) -> Result<TimeAnchor, TemporalError> {
    let fail = |reason: &str| TemporalError::UnresolvableExpression {
        raw: expr.raw.clone(),
        reason: reason.to_string(),
    };
    let pub_day = publish_time.date_naive();
    let words = &expr.words;
    let weekday = || {
        words
            .iter()
            .find_map(|w| weekday_value(w))
            .ok_or_else(|| fail("no weekday"))
    };
    let date = match expr.resolution {
        Resolution::AbsoluteDate => {
            let month = words
                .iter()
                .find_map(|w| month_value(w))
                .ok_or_else(|| fail("no month"))?;
            let year = words
                .iter()
                .find_map(|w| year_value(w))
                .ok_or_else(|| fail("no year"))?;
            let day = words
                .iter()
                .filter(|w| year_value(w).is_none())
                .find_map(|w| day_value(w))
                .ok_or_else(|| fail("no day of month"))?;
            NaiveDate::from_ymd_opt(year, month, day).ok_or_else(|| fail("not a calendar date"))?
        }
        Resolution::IsoDate => words
            .iter()
            .find_map(|w| NaiveDate::parse_from_str(w, "%Y-%m-%d").ok())
            .ok_or_else(|| fail("no ISO date"))?,
        Resolution::RelativeDay => {
            let offset: i64 = match words.first().map(String::as_str) {
                Some("today") => 0,
                Some("yesterday") => -1,
                Some("tomorrow") => 1,
                _ => return Err(fail("unknown relative day")),
            };
            shift_days(pub_day, offset).ok_or_else(|| fail("date out of range"))?
        }
        Resolution::CountAgo => {
            let count = words
                .iter()
                .find_map(|w| count_value(w))
                .ok_or_else(|| fail("no count"))?;
            let unit: i64 = if words.iter().any(|w| w.starts_with("week")) {
                7
            } else {
                1
            };
            shift_days(pub_day, -(count as i64) * unit).ok_or_else(|| fail("date out of range"))?
        }
        Resolution::PreviousWeekday => step_to_weekday(
            pub_day.pred_opt().ok_or_else(|| fail("date out of range"))?,
            weekday()?,
            -1,
        ),
        Resolution::NextWeekday => step_to_weekday(
            pub_day.succ_opt().ok_or_else(|| fail("date out of range"))?,
            weekday()?,
            1,
        ),
        Resolution::RecentWeekday => step_to_weekday(pub_day, weekday()?, -1),
        Resolution::Unresolvable => return Err(fail("expression has no resolution rule")),
    };
    Ok(TimeAnchor::day(date))
}

/// Time anchor of a message: the resolvable expression nearest the trigger
/// (leftmost on ties), or the publication day when there is none.
pub fn message_time(
    sentence: &Sentence,
    trigger: Option<TokenSpan>,
    publish_time: DateTime<Utc>,
    grammar: &TemporalGrammar,
) -> TimeAnchor {
    let focus = trigger.unwrap_or(TokenSpan::new(0, 0));
    find_temporal_expressions(sentence, grammar)
        .iter()
        .filter_map(|expr| match resolve(expr, publish_time) {
            Ok(anchor) => Some((expr.span.distance(&focus), expr.span.start, anchor)),
            Err(e) => {
                log::debug!("sentence {}: {e}", sentence.index);
                None
            }
        })
        .min_by_key(|(d, start, _)| (*d, *start))
        .map(|(_, _, anchor)| anchor)
        .unwrap_or_else(|| TimeAnchor::day(publish_time.date_naive()))
}

fn shift_days(date: NaiveDate, offset: i64) -> Option<NaiveDate> {
    if offset >= 0 {
        date.checked_add_days(Days::new(offset as u64))
    } else {
        date.checked_sub_days(Days::new(offset.unsigned_abs()))
    }
}

/// Walks from `from` (inclusive) in `step` direction until `target`.
fn step_to_weekday(from: NaiveDate, target: Weekday, step: i64) -> NaiveDate {
    let mut d = from;
    while d.weekday() != target {
        d = shift_days(d, step).expect("within a week of a valid date");
    }
    d
}

fn count_value(word: &str) -> Option<u32> {
    if !word.is_empty() && word.len() <= 4 && word.chars().all(|c| c.is_ascii_digit()) {
        return word.parse().ok();
    }
    const WORDS: [&str; 21] = [
        "zero",
        "one",
        "two",
        "three",
        "four",
        "five",
        "six",
        "seven",
        "eight",
        "nine",
        "ten",
        "eleven",
        "twelve",
        "thirteen",
        "fourteen",
        "fifteen",
        "sixteen",
        "seventeen",
        "eighteen",
        "nineteen",
        "twenty",
    ];
    match word {
        "a" | "an" => Some(1),
        _ => WORDS.iter().position(|w| *w == word).map(|p| p as u32),
    }
}

fn day_value(word: &str) -> Option<u32> {
    let digits = word
        .strip_suffix("st")
        .or_else(|| word.strip_suffix("nd"))
        .or_else(|| word.strip_suffix("rd"))
        .or_else(|| word.strip_suffix("th"))
        .unwrap_or(word);
    if digits.is_empty() || digits.len() > 2 || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok().filter(|d| (1..=31).contains(d))
}

fn year_value(word: &str) -> Option<i32> {
    if word.len() == 4 && word.chars().all(|c| c.is_ascii_digit()) {
        word.parse().ok().filter(|y| *y >= 1000)
    } else {
        None
    }
}

fn month_value(word: &str) -> Option<u32> {
    const MONTHS: [&str; 12] = [
        "january",
        "february",
        "march",
        "april",
        "may",
        "june",
        "july",
        "august",
        "september",
        "october",
        "november",
        "december",
    ];
    if let Some(p) = MONTHS.iter().position(|m| *m == word) {
        return Some(p as u32 + 1);
    }
    let abbrev = match word {
        "jan" => 1,
        "feb" => 2,
        "mar" => 3,
        "apr" => 4,
        "jun" => 6,
        "jul" => 7,
        "aug" => 8,
        "sep" | "sept" => 9,
        "oct" => 10,
        "nov" => 11,
        "dec" => 12,
        _ => return None,
    };
    Some(abbrev)
}

fn weekday_value(word: &str) -> Option<Weekday> {
    Some(match word {
        "monday" | "mon" => Weekday::Mon,
        "tuesday" | "tue" | "tues" => Weekday::Tue,
        "wednesday" | "wed" => Weekday::Wed,
        "thursday" | "thu" | "thur" | "thurs" => Weekday::Thu,
        "friday" | "fri" => Weekday::Fri,
        "saturday" | "sat" => Weekday::Sat,
        "sunday" | "sun" => Weekday::Sun,
        _ => return None,
    })
}
