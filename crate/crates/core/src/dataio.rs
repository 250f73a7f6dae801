//! Series schema, CSV ingestion/export, standard scaling, and the per-phase
//! train/test split.
//!
//! A dataset is a flat CSV, one row per minute, with fixed column names
//! (`phase, step, flag, sp_ec3, sp_sb43, sp_b46, sp_sb47, minute, target` and
//! an optional `label`). Rows are grouped into 240-minute series keyed by
//! (phase, step). All types are immutable after construction.

use crate::error::{Error, Result};
use crate::labeling::TrendClass;
use crate::seeds::derive_seed;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// Samples per series: four hours at one sample per minute.
pub const SERIES_LEN: usize = 240;

/// Acquisition campaign identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    P1 = 1,
    P2 = 2,
    P3 = 3,
    P4 = 4,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::P1, Phase::P2, Phase::P3, Phase::P4];

    pub fn from_u8(v: u8) -> Result<Phase> {
        match v {
            1 => Ok(Phase::P1),
            2 => Ok(Phase::P2),
            3 => Ok(Phase::P3),
            4 => Ok(Phase::P4),
            _ => Err(Error::InvalidArgument(format!("phase {v} outside 1..=4"))),
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }
}

/// One four-hour acquisition series of the target channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub phase: Phase,
    pub step: u32,
    /// true = included in analysis, false = excluded.
    pub included: bool,
    /// Actuator target temperatures (degC) in column order
    /// (sp_ec3, sp_sb43, sp_b46, sp_sb47); disabled actuators record 0.
    pub setpoints: [f64; 4],
    /// Exactly [`SERIES_LEN`] finite target-channel samples (degC).
    pub values: Vec<f64>,
    pub label: Option<TrendClass>,
}

impl SeriesRecord {
    pub fn new(
        phase: Phase,
        step: u32,
        included: bool,
        setpoints: [f64; 4],
        values: Vec<f64>,
        label: Option<TrendClass>,
    ) -> Result<Self> {
        if values.len() != SERIES_LEN {
            return Err(Error::RaggedSeries {
                phase: phase.as_u8(),
                step,
                rows: values.len(),
                expected: SERIES_LEN,
            });
        }
        if let Some(minute) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                phase: phase.as_u8(),
                step,
                minute,
            });
        }
        Ok(SeriesRecord {
            phase,
            step,
            included,
            setpoints,
            values,
            label,
        })
    }

    /// Unique key within a dataset.
    pub fn key(&self) -> (u8, u32) {
        (self.phase.as_u8(), self.step)
    }
}

/// Per-channel standardization parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    pub mean: f64,
    pub std: f64,
}

impl StandardScaler {
    /// Fit mean and population standard deviation over every sample value of
    /// the given series. Errors with [`Error::DegenerateData`] on zero
    /// variance.
    pub fn fit(train: &[SeriesRecord]) -> Result<Self> {
        let n: usize = train.iter().map(|r| r.values.len()).sum();
        if n < 2 {
            return Err(Error::EmptyDataset);
        }
        let sum: f64 = train.iter().flat_map(|r| &r.values).sum();
        let mean = sum / n as f64;
        let ssq: f64 = train
            .iter()
            .flat_map(|r| &r.values)
            .map(|v| (v - mean) * (v - mean))
            .sum();
        let var = ssq / n as f64;
        if var <= f64::EPSILON * mean.abs().max(1.0) {
            return Err(Error::DegenerateData);
        }
        Ok(StandardScaler {
            mean,
            std: var.sqrt(),
        })
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }

    pub fn apply_series(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|v| self.apply(*v)).collect()
    }

    pub fn invert_series(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|v| self.invert(*v)).collect()
    }
}

/// How series are ordered before the test tail is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Seeded per-phase shuffle, then tail selection.
    #[default]
    Shuffled,
    /// Step order within each phase; the highest steps become the test set.
    Chronological,
}

/// Immutable train/test partition with the scaler fitted on train only.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<SeriesRecord>,
    pub test: Vec<SeriesRecord>,
    pub scaler: StandardScaler,
    pub split_seed: u64,
}

/// Number of test series for a phase of size `n`: round(fraction * n),
/// at least 1 whenever the phase is non-empty.
pub fn test_count(n: usize, fraction: f64) -> usize {
    if n == 0 {
        return 0;
    }
    ((fraction * n as f64).round() as usize).clamp(1, n)
}

/// Partition the included series into per-phase train/test lists without
/// fitting a scaler.
pub fn partition_by_phase(
    records: &[SeriesRecord],
    fraction: f64,
    seed: u64,
    mode: SplitMode,
) -> Result<(Vec<SeriesRecord>, Vec<SeriesRecord>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction {fraction} outside (0, 1)"
        )));
    }
    let mut by_phase: BTreeMap<Phase, Vec<&SeriesRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.included) {
        by_phase.entry(r.phase).or_default().push(r);
    }
    if by_phase.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (phase, mut group) in by_phase {
        group.sort_by_key(|r| r.step);
        if mode == SplitMode::Shuffled {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(seed, "split", phase.as_u8() as u64, 0));
            group.shuffle(&mut rng);
        }
        let n_test = test_count(group.len(), fraction);
        let cut = group.len() - n_test;
        train.extend(group[..cut].iter().map(|r| (*r).clone()));
        test.extend(group[cut..].iter().map(|r| (*r).clone()));
    }
    Ok((train, test))
}

/// Partition the included series into train/test per phase and fit the
/// scaler on the training portion.
pub fn split_by_phase(
    records: &[SeriesRecord],
    fraction: f64,
    seed: u64,
    mode: SplitMode,
) -> Result<DatasetSplit> {
    let (train, test) = partition_by_phase(records, fraction, seed, mode)?;
    let scaler = StandardScaler::fit(&train)?;
    Ok(DatasetSplit {
        train,
        test,
        scaler,
        split_seed: seed,
    })
}

/// Stride subsampling: elements at indices 0, factor, 2*factor, ...
pub fn subsample(values: &[f64], factor: usize) -> Result<Vec<f64>> {
    if factor == 0 || values.len() % factor != 0 {
        return Err(Error::NonDivisibleFactor {
            factor,
            len: values.len(),
        });
    }
    Ok(values.iter().copied().step_by(factor).collect())
}

/// Mean-pooling alternative: average of each consecutive `factor`-block.
pub fn subsample_mean(values: &[f64], factor: usize) -> Result<Vec<f64>> {
    if factor == 0 || values.len() % factor != 0 {
        return Err(Error::NonDivisibleFactor {
            factor,
            len: values.len(),
        });
    }
    Ok(values
        .chunks_exact(factor)
        .map(|c| c.iter().sum::<f64>() / factor as f64)
        .collect())
}

/// Fixed CSV column names; remappable for foreign files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    pub phase: String,
    pub step: String,
    pub flag: String,
    pub setpoints: [String; 4],
    pub minute: String,
    pub target: String,
    pub label: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            phase: "phase".into(),
            step: "step".into(),
            flag: "flag".into(),
            setpoints: [
                "sp_ec3".into(),
                "sp_sb43".into(),
                "sp_b46".into(),
                "sp_sb47".into(),
            ],
            minute: "minute".into(),
            target: "target".into(),
            label: "label".into(),
        }
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

/// Read a dataset CSV into series records. Rows must be sorted by
/// (phase, step, minute) with exactly [`SERIES_LEN`] rows per series.
pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<Vec<SeriesRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let phase_i = column_index(&headers, &schema.phase)?;
    let step_i = column_index(&headers, &schema.step)?;
    let flag_i = column_index(&headers, &schema.flag)?;
    let sp_i: [usize; 4] = [
        column_index(&headers, &schema.setpoints[0])?,
        column_index(&headers, &schema.setpoints[1])?,
        column_index(&headers, &schema.setpoints[2])?,
        column_index(&headers, &schema.setpoints[3])?,
    ];
    let minute_i = column_index(&headers, &schema.minute)?;
    let target_i = column_index(&headers, &schema.target)?;
    let label_i = headers.iter().position(|h| h == schema.label);

    struct Group {
        phase: Phase,
        step: u32,
        included: bool,
        setpoints: [f64; 4],
        label: Option<TrendClass>,
        values: Vec<f64>,
    }

    let parse_f64 = |field: &str, name: &str| -> Result<f64> {
        field
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidArgument(format!("bad value `{field}` in column {name}")))
    };

    let mut records = Vec::new();
    let mut seen: Vec<(u8, u32)> = Vec::new();
    let mut current: Option<Group> = None;

    let flush = |group: Group, records: &mut Vec<SeriesRecord>| -> Result<()> {
        if group.values.len() != SERIES_LEN {
            return Err(Error::RaggedSeries {
                phase: group.phase.as_u8(),
                step: group.step,
                rows: group.values.len(),
                expected: SERIES_LEN,
            });
        }
        records.push(SeriesRecord::new(
            group.phase,
            group.step,
            group.included,
            group.setpoints,
            group.values,
            group.label,
        )?);
        Ok(())
    };

    for row in reader.records() {
        let row = row?;
        let phase = Phase::from_u8(parse_f64(&row[phase_i], &schema.phase)? as u8)?;
        let step = parse_f64(&row[step_i], &schema.step)? as u32;
        let included = parse_f64(&row[flag_i], &schema.flag)? != 0.0;
        let minute = parse_f64(&row[minute_i], &schema.minute)? as usize;
        let target = parse_f64(&row[target_i], &schema.target)?;
        if !target.is_finite() {
            return Err(Error::NonFinite {
                phase: phase.as_u8(),
                step,
                minute,
            });
        }
        let key = (phase.as_u8(), step);

        let start_new = current.as_ref().is_none_or(|g| (g.phase.as_u8(), g.step) != key);
        if start_new {
            if let Some(group) = current.take() {
                flush(group, &mut records)?;
            }
            if seen.contains(&key) {
                return Err(Error::DuplicateKey {
                    phase: key.0,
                    step: key.1,
                });
            }
            seen.push(key);
            let label = match label_i {
                Some(i) => {
                    let field = row[i].trim();
                    if field.is_empty() {
                        None
                    } else {
                        Some(TrendClass::from_u8(parse_f64(field, &schema.label)? as u8)?)
                    }
                }
                None => None,
            };
            current = Some(Group {
                phase,
                step,
                included,
                setpoints: [
                    parse_f64(&row[sp_i[0]], &schema.setpoints[0])?,
                    parse_f64(&row[sp_i[1]], &schema.setpoints[1])?,
                    parse_f64(&row[sp_i[2]], &schema.setpoints[2])?,
                    parse_f64(&row[sp_i[3]], &schema.setpoints[3])?,
                ],
                label,
                values: Vec::with_capacity(SERIES_LEN),
            });
        }
        let group = current.as_mut().expect("group exists");
        if minute != group.values.len() {
            return Err(Error::RaggedSeries {
                phase: key.0,
                step: key.1,
                rows: group.values.len(),
                expected: SERIES_LEN,
            });
        }
        group.values.push(target);
    }
    if let Some(group) = current.take() {
        flush(group, &mut records)?;
    }
    Ok(records)
}

/// Write series records to the dataset CSV schema. Values round-trip
/// bit-identically through [`ingest_csv`].
pub fn write_csv(path: &Path, records: &[SeriesRecord], schema: &CsvSchema) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        schema.phase.as_str(),
        schema.step.as_str(),
        schema.flag.as_str(),
        schema.setpoints[0].as_str(),
        schema.setpoints[1].as_str(),
        schema.setpoints[2].as_str(),
        schema.setpoints[3].as_str(),
        schema.minute.as_str(),
        schema.target.as_str(),
        schema.label.as_str(),
    ])?;
    for r in records {
        let label = r.label.map(|l| (l.as_u8()).to_string()).unwrap_or_default();
        for (minute, v) in r.values.iter().enumerate() {
            writer.write_record([
                r.phase.as_u8().to_string(),
                r.step.to_string(),
                u8::from(r.included).to_string(),
                r.setpoints[0].to_string(),
                r.setpoints[1].to_string(),
                r.setpoints[2].to_string(),
                r.setpoints[3].to_string(),
                minute.to_string(),
                v.to_string(),
                label.clone(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Sidecar manifest for a split, with scaler parameters at full precision.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub fraction: f64,
    pub mode: SplitMode,
    pub per_phase_counts: Vec<PhaseCount>,
    pub train_count: usize,
    pub test_count: usize,
    pub scaler_mean: f64,
    pub scaler_std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseCount {
    pub phase: u8,
    pub included: usize,
    pub train: usize,
    pub test: usize,
}

impl DatasetManifest {
    pub fn describe(split: &DatasetSplit, fraction: f64, mode: SplitMode) -> Self {
        let mut per_phase = BTreeMap::new();
        for r in &split.train {
            per_phase.entry(r.phase).or_insert((0usize, 0usize)).0 += 1;
        }
        for r in &split.test {
            per_phase.entry(r.phase).or_insert((0usize, 0usize)).1 += 1;
        }
        DatasetManifest {
            seed: split.split_seed,
            fraction,
            mode,
            per_phase_counts: per_phase
                .into_iter()
                .map(|(phase, (train, test))| PhaseCount {
                    phase: phase.as_u8(),
                    included: train + test,
                    train,
                    test,
                })
                .collect(),
            train_count: split.train.len(),
            test_count: split.test.len(),
            scaler_mean: split.scaler.mean,
            scaler_std: split.scaler.std,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        writeln!(f, "{body}")?;
        Ok(())
    }
}
