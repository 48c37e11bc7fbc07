// SPDX-License-Identifier: MIT OR Apache-2.0

//! Labeled event streams: CSV ingestion, chronological splits,
//! standardization and synthetic generators.

use std::cmp::Ordering;
use std::io::{Read, Write};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FeatureVector;

/// One labeled observation. `label` is 1 for attack traffic.
#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub t: u64,
    pub features: FeatureVector,
    pub label: u8,
}

/// An event after detection.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredEvent {
    pub t: u64,
    pub features: FeatureVector,
    /// Posterior incident probability.
    pub score: f64,
    pub alert: bool,
    pub label: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitFractions {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        for (name, f) in [("train", train), ("validation", validation), ("test", test)] {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::invalid(format!("{name} fraction must be > 0; got {f}")));
            }
        }
        let sum = train + validation + test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("split fractions must sum to 1; got {sum}")));
        }
        Ok(Self {
            train,
            validation,
            test,
        })
    }
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.5,
            validation: 0.2,
            test: 0.3,
        }
    }
}

impl TryFrom<[f64; 3]> for SplitFractions {
    type Error = Error;

    fn try_from(f: [f64; 3]) -> Result<Self> {
        Self::new(f[0], f[1], f[2])
    }
}

impl From<SplitFractions> for [f64; 3] {
    fn from(f: SplitFractions) -> Self {
        [f.train, f.validation, f.test]
    }
}

/// Chronologically contiguous train / validation / test segments.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Segments {
    pub train: Vec<Event>,
    pub validation: Vec<Event>,
    pub test: Vec<Event>,
}

impl Segments {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Splits at `floor(n * f)` cumulative boundaries; the remainder goes to test.
pub fn split_chronological(events: Vec<Event>, fractions: SplitFractions) -> Segments {
    let n = events.len() as f64;
    // The epsilon keeps e.g. 10 * 0.7 from landing just under 7.
    let train_end = ((n * fractions.train) + 1e-9).floor() as usize;
    let val_end = ((n * (fractions.train + fractions.validation)) + 1e-9).floor() as usize;
    let val_end = val_end.clamp(train_end, events.len());
    let mut events = events;
    let test = events.split_off(val_end);
    let validation = events.split_off(train_end.min(events.len()));
    Segments {
        train: events,
        validation,
        test,
    }
}

pub const DEFAULT_BENIGN_LABELS: [&str; 4] = ["0", "benign", "BENIGN", "normal"];

fn default_benign_labels() -> Vec<String> {
    DEFAULT_BENIGN_LABELS.iter().map(|s| s.to_string()).collect()
}

fn default_label_column() -> String {
    "label".into()
}

/// Where events come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamSource {
    Csv(PathBuf),
    Synthetic(SyntheticConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub source: StreamSource,
    /// Feature columns in order; empty means every column other than the
    /// label and timestamp columns.
    #[serde(default)]
    pub feature_columns: Vec<String>,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    #[serde(default)]
    pub timestamp_column: Option<String>,
    #[serde(default)]
    pub split: SplitFractions,
    /// Label values read as benign; everything else is an attack.
    #[serde(default = "default_benign_labels")]
    pub benign_labels: Vec<String>,
}

impl StreamSpec {
    pub fn csv(path: impl Into<PathBuf>) -> Self {
        Self {
            source: StreamSource::Csv(path.into()),
            feature_columns: Vec::new(),
            label_column: default_label_column(),
            timestamp_column: None,
            split: SplitFractions::default(),
            benign_labels: default_benign_labels(),
        }
    }

    pub fn synthetic(config: SyntheticConfig) -> Self {
        Self {
            source: StreamSource::Synthetic(config),
            ..Self::csv("")
        }
    }
}

/// Reads the stream named by `spec` and splits it chronologically.
pub fn load_stream(spec: &StreamSpec) -> Result<Segments> {
    let events = match &spec.source {
        StreamSource::Csv(path) => {
            let file = std::fs::File::open(path)?;
            read_events(file, spec)?
        }
        StreamSource::Synthetic(config) => generate_synthetic(config)?,
    };
    Ok(split_chronological(events, spec.split))
}

/// Parses headered CSV into events using the column layout in `spec`.
pub fn read_events<R: Read>(reader: R, spec: &StreamSpec) -> Result<Vec<Event>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let label_idx = find(&spec.label_column)?;
    let ts_idx = spec.timestamp_column.as_deref().map(find).transpose()?;
    let feature_idx: Vec<(usize, String)> = if spec.feature_columns.is_empty() {
        headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != label_idx && Some(*i) != ts_idx)
            .map(|(i, h)| (i, h.trim().to_string()))
            .collect()
    } else {
        spec.feature_columns
            .iter()
            .map(|c| Ok((find(c)?, c.clone())))
            .collect::<Result<_>>()?
    };
    if feature_idx.is_empty() {
        return Err(Error::Empty("no feature columns".into()));
    }

    let mut rows: Vec<(Option<String>, Event)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        // 1-based data row numbers, header excluded
        let row = i + 1;
        let mut values = Vec::with_capacity(feature_idx.len());
        for (idx, name) in &feature_idx {
            let cell = record.get(*idx).unwrap_or("").trim();
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: name.clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: name.clone(),
                    value: cell.to_string(),
                });
            }
            values.push(v);
        }
        let label_cell = record.get(label_idx).unwrap_or("").trim();
        let label = u8::from(!spec.benign_labels.iter().any(|b| b == label_cell));
        let ts = ts_idx.map(|i| record.get(i).unwrap_or("").trim().to_string());
        rows.push((
            ts,
            Event {
                t: 0,
                features: FeatureVector::new(values)?,
                label,
            },
        ));
    }
    if rows.is_empty() {
        return Err(Error::Empty("stream has no rows".into()));
    }
    if ts_idx.is_some() {
        sort_by_timestamp(&mut rows);
    }
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(i, (_, mut e))| {
            e.t = i as u64;
            e
        })
        .collect())
}

/// Stable sort; numeric when every timestamp parses as a number, lexicographic
/// otherwise (ISO-8601 strings sort correctly that way).
fn sort_by_timestamp(rows: &mut [(Option<String>, Event)]) {
    let numeric: Option<Vec<f64>> = rows
        .iter()
        .map(|(ts, _)| ts.as_deref().and_then(|s| s.parse::<f64>().ok()))
        .collect();
    match numeric {
        Some(keys) => {
            let mut order: Vec<usize> = (0..rows.len()).collect();
            order.sort_by(|&a, &b| keys[a].partial_cmp(&keys[b]).unwrap_or(Ordering::Equal));
            let sorted: Vec<_> = order.iter().map(|&i| rows[i].clone()).collect();
            rows.clone_from_slice(&sorted);
        }
        None => rows.sort_by(|a, b| a.0.cmp(&b.0)),
    }
}

/// Writes events as `t,f0..f{d-1},label`.
pub fn write_events<W: Write>(writer: W, events: &[Event]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let d = events.first().map_or(0, |e| e.features.dimension());
    let mut header = vec!["t".to_string()];
    header.extend((0..d).map(|j| format!("f{j}")));
    header.push("label".into());
    w.write_record(&header)?;
    for e in events {
        let mut rec = Vec::with_capacity(d + 2);
        rec.push(e.t.to_string());
        rec.extend(e.features.values().iter().map(|v| v.to_string()));
        rec.push(e.label.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-feature affine map fitted on the training segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Features with (numerically) zero training variance; mapped to 0.
    pub degenerate: Vec<bool>,
}

const MIN_STD: f64 = 1e-12;

impl Standardizer {
    pub fn fit(train: &[Event]) -> Result<Self> {
        let first = train
            .first()
            .ok_or_else(|| Error::Empty("cannot standardize an empty training segment".into()))?;
        let d = first.features.dimension();
        let n = train.len() as f64;
        let mut means = vec![0.0; d];
        for e in train {
            check_dim(e, d)?;
            for (m, v) in means.iter_mut().zip(e.features.values()) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut vars = vec![0.0; d];
        for e in train {
            for ((s, v), m) in vars.iter_mut().zip(e.features.values()).zip(&means) {
                *s += (v - m).powi(2);
            }
        }
        let stds: Vec<f64> = vars.iter().map(|s| (s / n).sqrt()).collect();
        let degenerate = stds
            .iter()
            .zip(&means)
            .map(|(s, m)| *s <= MIN_STD * m.abs().max(1.0))
            .collect();
        Ok(Self {
            means,
            stds,
            degenerate,
        })
    }

    pub fn transform(&self, e: &Event) -> Result<Event> {
        check_dim(e, self.means.len())?;
        let values = e
            .features
            .values()
            .iter()
            .enumerate()
            .map(|(j, v)| {
                if self.degenerate[j] {
                    0.0
                } else {
                    (v - self.means[j]) / self.stds[j]
                }
            })
            .collect();
        Ok(Event {
            t: e.t,
            features: FeatureVector::new(values)?,
            label: e.label,
        })
    }

    pub fn transform_all(&self, events: &[Event]) -> Result<Vec<Event>> {
        events.iter().map(|e| self.transform(e)).collect()
    }
}

fn check_dim(e: &Event, d: usize) -> Result<()> {
    if e.features.dimension() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: e.features.dimension(),
        });
    }
    Ok(())
}

/// Fits the transform on the training segment alone, then applies it to all
/// three segments.
pub fn standardize(segments: &Segments) -> Result<(Standardizer, Segments)> {
    let s = Standardizer::fit(&segments.train)?;
    let out = Segments {
        train: s.transform_all(&segments.train)?,
        validation: s.transform_all(&segments.validation)?,
        test: s.transform_all(&segments.test)?,
    };
    Ok((s, out))
}

fn default_regime_spread() -> f64 {
    1.0
}

/// Drifting benign traffic with rare, bursty attacks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub dimension: usize,
    pub length: usize,
    /// Standard deviation of the per-step random-walk increment of the benign mean.
    pub benign_mean_drift_rate: f64,
    /// Expected fraction of attack events, in [0, 0.5).
    pub attack_rate: f64,
    /// Attack offset from the benign mean, in benign noise units.
    pub attack_shift: f64,
    pub burst_length_mean: f64,
    /// Per-step probability that the benign regime mean jumps.
    pub changepoint_hazard: f64,
    pub seed: u64,
    /// Standard deviation of each coordinate of a regime jump, added to the
    /// current mean.
    pub regime_spread: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            dimension: 4,
            length: 20_000,
            benign_mean_drift_rate: 0.01,
            attack_rate: 0.01,
            attack_shift: 6.0,
            burst_length_mean: 20.0,
            changepoint_hazard: 1e-3,
            seed: 0,
            regime_spread: default_regime_spread(),
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::invalid("synthetic dimension must be positive"));
        }
        if !(self.attack_rate >= 0.0 && self.attack_rate < 0.5) {
            return Err(Error::invalid(format!(
                "attack_rate must lie in [0, 0.5); got {}",
                self.attack_rate
            )));
        }
        if !(self.burst_length_mean.is_finite() && self.burst_length_mean >= 1.0) {
            return Err(Error::invalid("burst_length_mean must be >= 1"));
        }
        if !(self.changepoint_hazard >= 0.0 && self.changepoint_hazard < 1.0) {
            return Err(Error::invalid("changepoint_hazard must lie in [0, 1)"));
        }
        for (name, v) in [
            ("benign_mean_drift_rate", self.benign_mean_drift_rate),
            ("attack_shift", self.attack_shift),
            ("regime_spread", self.regime_spread),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0; got {v}")));
            }
        }
        Ok(())
    }
}

fn standard_normal_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

fn random_unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v = standard_normal_vec(rng, d);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Benign events follow `mean + N(0, I)`; the mean random-walks with step
/// `benign_mean_drift_rate` and jumps by `N(0, regime_spread^2 I)` at
/// hazard-driven changepoints. Attacks arrive in bursts of geometric length,
/// each burst offset by `attack_shift` along its own random direction.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Vec<Event>> {
    config.validate()?;
    let d = config.dimension;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let burst_start = if config.attack_rate > 0.0 {
        config.attack_rate / (config.burst_length_mean * (1.0 - config.attack_rate))
    } else {
        0.0
    };
    let burst_len =
        Geometric::new(1.0 / config.burst_length_mean).map_err(|e| Error::invalid(format!("burst length: {e}")))?;

    let mut mean = vec![0.0; d];
    let mut remaining = 0u64;
    let mut direction = vec![0.0; d];
    let mut events = Vec::with_capacity(config.length);
    for t in 0..config.length {
        if rng.gen::<f64>() < config.changepoint_hazard {
            for (m, z) in mean.iter_mut().zip(standard_normal_vec(&mut rng, d)) {
                *m += z * config.regime_spread;
            }
        } else if config.benign_mean_drift_rate > 0.0 {
            for (m, z) in mean.iter_mut().zip(standard_normal_vec(&mut rng, d)) {
                *m += config.benign_mean_drift_rate * z;
            }
        }
        if remaining == 0 && rng.gen::<f64>() < burst_start {
            remaining = burst_len.sample(&mut rng) + 1;
            direction = random_unit_vector(&mut rng, d);
        }
        let attack = remaining > 0;
        let noise = standard_normal_vec(&mut rng, d);
        let values: Vec<f64> = (0..d)
            .map(|j| {
                let offset = if attack {
                    config.attack_shift * direction[j]
                } else {
                    0.0
                };
                mean[j] + offset + noise[j]
            })
            .collect();
        if attack {
            remaining -= 1;
        }
        events.push(Event {
            t: t as u64,
            features: FeatureVector::new(values)?,
            label: u8::from(attack),
        });
    }
    Ok(events)
}

/// Independent draws from a two-component Gaussian mixture with known
/// parameters: benign `N(0, I)` with probability `1 - malicious_fraction`,
/// otherwise `N(malicious_mean, malicious_sd^2 I)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureStreamConfig {
    pub dimension: usize,
    pub length: usize,
    pub malicious_fraction: f64,
    pub malicious_mean: f64,
    pub malicious_sd: f64,
    pub seed: u64,
}

pub fn generate_mixture(config: &MixtureStreamConfig) -> Result<Vec<Event>> {
    if !(config.malicious_fraction > 0.0 && config.malicious_fraction < 1.0) {
        return Err(Error::invalid("malicious_fraction must lie in (0, 1)"));
    }
    if config.dimension == 0 || config.malicious_sd.is_nan() || config.malicious_sd <= 0.0 {
        return Err(Error::invalid("mixture stream needs a dimension and a positive sd"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.length)
        .map(|t| {
            let attack = rng.gen::<f64>() < config.malicious_fraction;
            let values = standard_normal_vec(&mut rng, config.dimension)
                .into_iter()
                .map(|z| {
                    if attack {
                        config.malicious_mean + config.malicious_sd * z
                    } else {
                        z
                    }
                })
                .collect();
            Ok(Event {
                t: t as u64,
                features: FeatureVector::new(values)?,
                label: u8::from(attack),
            })
        })
        .collect()
}
