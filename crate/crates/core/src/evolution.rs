//! How an event unfolds over time: linear vs non-linear evolution,
//! synchronous vs asynchronous emission, and synthetic report streams.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, Analyzer, Corpus, CorpusError, Document, Sentence};

pub const DEFAULT_RESIDUAL_THRESHOLD: f64 = 0.1;
pub const DEFAULT_EMISSION_TOLERANCE_MINUTES: i64 = 60;

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("need at least 3 timestamps, got {0}")]
    TooFewPoints(usize),
    #[error("timestamps must be strictly increasing (position {0})")]
    NotStrictlyIncreasing(usize),
    #[error("need at least 2 sources, got {0}")]
    TooFewSources(usize),
    #[error("invalid stream parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("failed to write plot data: {0}")]
    Csv(#[from] csv::Error),
}

impl EvolutionError {
    pub fn kind(&self) -> &'static str {
        match self {
            EvolutionError::TooFewPoints(_) => "TooFewPoints",
            EvolutionError::NotStrictlyIncreasing(_) => "NotStrictlyIncreasing",
            EvolutionError::TooFewSources(_) => "TooFewSources",
            EvolutionError::InvalidParams(_) => "InvalidParams",
            EvolutionError::Corpus(e) => e.kind(),
            EvolutionError::Csv(_) => "Io",
        }
    }
}

/// `t_n = t0 + n * period`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    #[serde(with = "corpus::rfc3339")]
    pub t0: DateTime<Utc>,
    pub period_minutes: f64,
    /// Largest deviation from the model, as a fraction of the period.
    pub residual: f64,
}

impl LinearModel {
    pub fn predict(&self, n: usize) -> DateTime<Utc> {
        self.t0 + Duration::seconds((n as f64 * self.period_minutes * 60.0).round() as i64)
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len().is_multiple_of(2) {
        (values[mid - 1] + values[mid]) / 2.0
    } else {
        values[mid]
    }
}

/// Fits on offsets in minutes from the first point. The period is the
/// median of the cumulative slopes `(t_n - t_0) / n`, which keeps jitter
/// from accumulating along the stream.
pub fn fit_linear_minutes(minutes: &[f64]) -> Result<(f64, f64), EvolutionError> {
    if minutes.len() < 3 {
        return Err(EvolutionError::TooFewPoints(minutes.len()));
    }
    if let Some(i) = minutes.windows(2).position(|w| w[1] <= w[0]) {
        return Err(EvolutionError::NotStrictlyIncreasing(i + 1));
    }
    let t0 = minutes[0];
    let mut slopes: Vec<f64> = minutes[1..]
        .iter()
        .enumerate()
        .map(|(i, t)| (t - t0) / (i + 1) as f64)
        .collect();
    let period = median(&mut slopes);
    let residual = minutes
        .iter()
        .enumerate()
        .map(|(n, t)| (t - (t0 + n as f64 * period)).abs())
        .fold(0.0, f64::max)
        / period;
    Ok((period, residual))
}

pub fn fit_linear(timestamps: &[DateTime<Utc>]) -> Result<LinearModel, EvolutionError> {
    let t0 = *timestamps.first().ok_or(EvolutionError::TooFewPoints(0))?;
    let minutes: Vec<f64> = timestamps
        .iter()
        .map(|t| (*t - t0).num_seconds() as f64 / 60.0)
        .collect();
    let (period_minutes, residual) = fit_linear_minutes(&minutes)?;
    Ok(LinearModel {
        t0,
        period_minutes,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Linearity {
    Linear,
    NonLinear,
}

pub fn classify_linearity(timestamps: &[DateTime<Utc>], residual_threshold: f64) -> Result<Linearity, EvolutionError> {
    let model = fit_linear(timestamps)?;
    Ok(if model.residual <= residual_threshold {
        Linearity::Linear
    } else {
        Linearity::NonLinear
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emission {
    Synchronous,
    Asynchronous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceProfile {
    pub source: String,
    pub report_count: usize,
    /// Minutes between this source's first report and the earliest report
    /// of any source.
    pub first_report_lag_minutes: i64,
    #[serde(with = "timestamps")]
    pub timestamps: Vec<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionProfile {
    pub sources: Vec<SourceProfile>,
}

impl EmissionProfile {
    pub fn from_streams(streams: &BTreeMap<String, Vec<DateTime<Utc>>>) -> Self {
        let earliest = streams.values().filter_map(|ts| ts.first()).min().copied();
        let sources = streams
            .iter()
            .map(|(source, ts)| SourceProfile {
                source: source.clone(),
                report_count: ts.len(),
                first_report_lag_minutes: match (ts.first(), earliest) {
                    (Some(first), Some(e)) => (*first - e).num_minutes(),
                    _ => 0,
                },
                timestamps: ts.clone(),
            })
            .collect();
        EmissionProfile { sources }
    }

    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut streams: BTreeMap<String, Vec<DateTime<Utc>>> = BTreeMap::new();
        for doc in &corpus.documents {
            streams.entry(doc.source.clone()).or_default().push(doc.publish_time);
        }
        for ts in streams.values_mut() {
            ts.sort();
        }
        Self::from_streams(&streams)
    }
}

/// Synchronous iff all sources have the same report count and, for every
/// k, the k-th reports span at most `tolerance_minutes`.
pub fn classify_emission(profile: &EmissionProfile, tolerance_minutes: i64) -> Result<Emission, EvolutionError> {
    let sources = &profile.sources;
    if sources.len() < 2 {
        return Err(EvolutionError::TooFewSources(sources.len()));
    }
    let count = sources[0].timestamps.len();
    if sources.iter().any(|s| s.timestamps.len() != count) {
        return Ok(Emission::Asynchronous);
    }
    for k in 0..count {
        let kth = sources.iter().map(|s| s.timestamps[k]);
        let (lo, hi) = (kth.clone().min().unwrap(), kth.max().unwrap());
        if (hi - lo).num_seconds() > tolerance_minutes * 60 {
            return Ok(Emission::Asynchronous);
        }
    }
    Ok(Emission::Synchronous)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzeParams {
    pub residual_threshold: f64,
    pub emission_tolerance_minutes: i64,
}

impl Default for AnalyzeParams {
    fn default() -> Self {
        AnalyzeParams {
            residual_threshold: DEFAULT_RESIDUAL_THRESHOLD,
            emission_tolerance_minutes: DEFAULT_EMISSION_TOLERANCE_MINUTES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceFit {
    pub source: String,
    pub model: LinearModel,
    pub linearity: Linearity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionReport {
    pub event_id: String,
    pub linearity: Linearity,
    /// Fitted on the source with the most reports; present when linear.
    pub model: Option<LinearModel>,
    pub model_source: Option<String>,
    pub emission: Emission,
    pub residual_threshold: f64,
    pub emission_tolerance_minutes: i64,
    /// Sources with at least 3 reports.
    pub fits: Vec<SourceFit>,
    pub profile: EmissionProfile,
}

/// An event is linear iff every source with at least 3 reports publishes
/// linearly.
pub fn analyze(corpus: &Corpus, params: &AnalyzeParams) -> Result<EvolutionReport, EvolutionError> {
    let profile = EmissionProfile::from_corpus(corpus);
    let emission = classify_emission(&profile, params.emission_tolerance_minutes)?;
    let mut fits = Vec::new();
    for s in profile.sources.iter().filter(|s| s.timestamps.len() >= 3) {
        let model = fit_linear(&s.timestamps)?;
        let linearity = if model.residual <= params.residual_threshold {
            Linearity::Linear
        } else {
            Linearity::NonLinear
        };
        fits.push(SourceFit {
            source: s.source.clone(),
            model,
            linearity,
        });
    }
    let longest = profile
        .sources
        .iter()
        .max_by(|a, b| {
            a.report_count
                .cmp(&b.report_count)
                .then_with(|| b.source.cmp(&a.source))
        })
        .expect("at least two sources");
    if longest.report_count < 3 {
        return Err(EvolutionError::TooFewPoints(longest.report_count));
    }
    let linear = fits.iter().all(|f| f.linearity == Linearity::Linear);
    let (model, model_source) = if linear {
        let fit = fits
            .iter()
            .find(|f| f.source == longest.source)
            .expect("longest source was fitted");
        (Some(fit.model.clone()), Some(fit.source.clone()))
    } else {
        (None, None)
    };
    Ok(EvolutionReport {
        event_id: corpus.event_id.clone(),
        linearity: if linear {
            Linearity::Linear
        } else {
            Linearity::NonLinear
        },
        model,
        model_source,
        emission,
        residual_threshold: params.residual_threshold,
        emission_tolerance_minutes: params.emission_tolerance_minutes,
        fits,
        profile,
    })
}

#[derive(Serialize)]
struct PlotRow<'a> {
    source: &'a str,
    report_index: usize,
    minutes: i64,
}

/// CSV `source,report_index,minutes`, minutes counted from the Unix epoch,
/// one row per document.
pub fn plot_data<W: Write>(corpus: &Corpus, out: W) -> Result<(), EvolutionError> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(["source", "report_index", "minutes"])?;
    for doc in &corpus.documents {
        writer.serialize(PlotRow {
            source: &doc.source,
            report_index: doc.report_index,
            minutes: doc.publish_time.timestamp().div_euclid(60),
        })?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamKind {
    Linear,
    NonLinear,
}

impl std::str::FromStr for StreamKind {
    type Err = EvolutionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(StreamKind::Linear),
            "non-linear" | "nonlinear" | "bursty" => Ok(StreamKind::NonLinear),
            other => Err(EvolutionError::InvalidParams(format!("unknown stream kind `{other}`"))),
        }
    }
}

/// Gap mixture for non-linear streams: each gap is exponential with mean
/// `burst_gap_minutes` with probability `burst_prob`, otherwise with mean
/// `quiet_gap_minutes`. Documented range: `burst_prob` in [0.3, 0.7],
/// burst gaps of 1 to 4 hours, quiet gaps of 1 to 2 days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BurstParams {
    pub burst_prob: f64,
    pub burst_gap_minutes: f64,
    pub quiet_gap_minutes: f64,
}

impl Default for BurstParams {
    fn default() -> Self {
        BurstParams {
            burst_prob: 0.5,
            burst_gap_minutes: 180.0,
            quiet_gap_minutes: 2880.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamParams {
    pub kind: StreamKind,
    pub sources: usize,
    pub seed: u64,
    #[serde(with = "corpus::rfc3339")]
    pub start: DateTime<Utc>,
    pub horizon_minutes: i64,
    pub period_minutes: i64,
    /// Uniform jitter as a fraction of the period, below 0.5.
    pub jitter: f64,
    /// Per-source start offsets; missing entries are 0.
    pub offsets_minutes: Vec<i64>,
    pub burst: BurstParams,
}

impl Default for StreamParams {
    fn default() -> Self {
        StreamParams {
            kind: StreamKind::Linear,
            sources: 3,
            seed: 0,
            start: Utc.with_ymd_and_hms(2004, 9, 1, 0, 0, 0).unwrap(),
            horizon_minutes: 10 * 10080,
            period_minutes: 10080,
            jitter: 0.0,
            offsets_minutes: Vec::new(),
            burst: BurstParams::default(),
        }
    }
}

impl StreamParams {
    fn validate(&self) -> Result<(), EvolutionError> {
        let bad = |m: &str| Err(EvolutionError::InvalidParams(m.to_string()));
        if self.sources == 0 {
            return bad("sources must be at least 1");
        }
        if self.horizon_minutes < 0 {
            return bad("horizon must be non-negative");
        }
        match self.kind {
            StreamKind::Linear => {
                if self.period_minutes <= 0 {
                    return bad("period must be positive");
                }
                if !(0.0..0.5).contains(&self.jitter) {
                    return bad("jitter must lie in [0, 0.5)");
                }
            }
            StreamKind::NonLinear => {
                let b = &self.burst;
                if !(0.0..=1.0).contains(&b.burst_prob) {
                    return bad("burst_prob must lie in [0, 1]");
                }
                if !(b.burst_gap_minutes > 0.0 && b.quiet_gap_minutes > 0.0) {
                    return bad("gap means must be positive");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceStream {
    pub source: String,
    #[serde(with = "timestamps")]
    pub timestamps: Vec<DateTime<Utc>>,
}

/// Report timestamps per source, without text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamSkeleton {
    pub streams: Vec<SourceStream>,
}

impl StreamSkeleton {
    pub fn as_map(&self) -> BTreeMap<String, Vec<DateTime<Utc>>> {
        self.streams
            .iter()
            .map(|s| (s.source.clone(), s.timestamps.clone()))
            .collect()
    }

    fn records(&self) -> impl Iterator<Item = (String, &str, &DateTime<Utc>, String)> {
        self.streams.iter().flat_map(|s| {
            s.timestamps.iter().enumerate().map(move |(n, t)| {
                (
                    format!("{}-{n:03}", s.source),
                    s.source.as_str(),
                    t,
                    format!("Report {n} from {}.", s.source),
                )
            })
        })
    }

    /// Raw corpus lines that `load_corpus` accepts.
    pub fn write_raw_corpus<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (doc_id, source, t, text) in self.records() {
            let line = serde_json::json!({
                "doc_id": doc_id,
                "source": source,
                "publish_time": corpus::format_timestamp(t),
                "text": [text],
            });
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn into_corpus(&self, event_id: &str) -> Result<Corpus, CorpusError> {
        let analyzer = Analyzer::default();
        let documents = self
            .records()
            .map(|(doc_id, source, t, text)| Document {
                doc_id,
                source: source.to_string(),
                publish_time: *t,
                report_index: 0,
                sentences: vec![Sentence::new(0, &text, &analyzer)],
            })
            .collect();
        Corpus::new(event_id, documents)
    }
}

/// Deterministic in `params.seed`. Linear streams place report `n` at
/// `start + offset + n * period` plus uniform jitter, up to the horizon.
/// Non-linear streams are bursty renewal processes from `start + offset`;
/// they run to the horizon and always hold at least 3 reports.
pub fn generate_stream(params: &StreamParams) -> Result<StreamSkeleton, EvolutionError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut streams = Vec::with_capacity(params.sources);
    for k in 0..params.sources {
        let offset = params.offsets_minutes.get(k).copied().unwrap_or(0);
        let origin = params.start + Duration::minutes(offset);
        let mut minutes: Vec<i64> = Vec::new();
        match params.kind {
            StreamKind::Linear => {
                let period = params.period_minutes;
                let mut n = 0;
                while n * period <= params.horizon_minutes {
                    let noise = if params.jitter > 0.0 {
                        rng.gen_range(-params.jitter..=params.jitter) * period as f64
                    } else {
                        0.0
                    };
                    minutes.push(n * period + noise.round() as i64);
                    n += 1;
                }
            }
            StreamKind::NonLinear => {
                let b = &params.burst;
                let mut t = 0i64;
                minutes.push(t);
                loop {
                    let mean = if rng.gen_bool(b.burst_prob) {
                        b.burst_gap_minutes
                    } else {
                        b.quiet_gap_minutes
                    };
                    let u: f64 = 1.0 - rng.gen::<f64>();
                    t += ((-u.ln() * mean).round() as i64).max(1);
                    if t > params.horizon_minutes && minutes.len() >= 3 {
                        break;
                    }
                    minutes.push(t);
                }
            }
        }
        streams.push(SourceStream {
            source: format!("source{:02}", k + 1),
            timestamps: minutes.into_iter().map(|m| origin + Duration::minutes(m)).collect(),
        });
    }
    Ok(StreamSkeleton { streams })
}

mod timestamps {
    use chrono::{DateTime, Utc};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::corpus;

    pub fn serialize<S: Serializer>(ts: &[DateTime<Utc>], s: S) -> Result<S::Ok, S::Error> {
        ts.iter().map(corpus::format_timestamp).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DateTime<Utc>>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|raw| {
                corpus::parse_timestamp(raw)
                    .ok_or_else(|| serde::de::Error::custom(format!("unparsable timestamp `{raw}`")))
            })
            .collect()
    }
}
