//! Downstream utility model: a one-layer LSTM plus an affine head that maps
//! the last hidden state to the next three subsampled points (thirty
//! minutes). Windows are built one per series by default: the first 210
//! minutes (21 points at 10-minute resolution) predict the final 30 (3
//! points). All values are in scaled units.
//!
//! The checkpoint layout is a fixed little-endian binary: magic `TAFC`,
//! format version u32, then hidden size, window length, and horizon as u32,
//! then every parameter as f64 in flat layout order (LSTM block, then head).

use crate::dataio::{subsample, subsample_mean, DatasetSplit, SeriesRecord, StandardScaler};
use crate::error::{Error, Result};
use crate::nn::{Adam, DenseSpec, LstmSpec};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

/// Subsampling factor from minutes to model resolution.
pub const SUBSAMPLE_FACTOR: usize = 10;
/// Input length in subsampled points (210 minutes).
pub const INPUT_LEN: usize = 21;
/// Forecast horizon in subsampled points (30 minutes).
pub const HORIZON: usize = 3;

/// One training/evaluation sample.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPair {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

/// How minute-resolution series become model-resolution points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SubsampleMode {
    #[default]
    Stride,
    MeanPool,
}

/// How windows are cut from each series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowMode {
    /// One window per series, subsampled from offset 0.
    #[default]
    PerSeries,
    /// One window per subsample offset (factor windows per series).
    Sliding,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Fraction of training windows held out for early stopping.
    pub validation_fraction: f64,
    pub subsample_mode: SubsampleMode,
    pub window_mode: WindowMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 64,
            learning_rate: 1e-3,
            batch_size: 16,
            max_epochs: 300,
            patience: 20,
            validation_fraction: 0.1,
            subsample_mode: SubsampleMode::Stride,
            window_mode: WindowMode::PerSeries,
        }
    }
}

/// Cut windows from one scaled series.
pub fn windows_from_scaled(
    scaled: &[f64],
    mode: SubsampleMode,
    window_mode: WindowMode,
) -> Result<Vec<WindowPair>> {
    let offsets: Vec<usize> = match window_mode {
        WindowMode::PerSeries => vec![0],
        WindowMode::Sliding => (0..SUBSAMPLE_FACTOR).collect(),
    };
    let mut out = Vec::with_capacity(offsets.len());
    for off in offsets {
        let shifted: Vec<f64> = match window_mode {
            WindowMode::PerSeries => scaled.to_vec(),
            WindowMode::Sliding => {
                // rotate so offset o samples minutes o, o+10, ...
                let mut v = scaled[off..].to_vec();
                v.extend_from_slice(&scaled[..off]);
                v
            }
        };
        let points = match mode {
            SubsampleMode::Stride => subsample(&shifted, SUBSAMPLE_FACTOR)?,
            SubsampleMode::MeanPool => subsample_mean(&shifted, SUBSAMPLE_FACTOR)?,
        };
        debug_assert_eq!(points.len(), INPUT_LEN + HORIZON);
        out.push(WindowPair {
            input: points[..INPUT_LEN].to_vec(),
            target: points[INPUT_LEN..].to_vec(),
        });
    }
    Ok(out)
}

fn windows_from_records(
    records: &[SeriesRecord],
    scaler: &StandardScaler,
    mode: SubsampleMode,
    window_mode: WindowMode,
) -> Result<Vec<WindowPair>> {
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        out.extend(windows_from_scaled(
            &scaler.apply_series(&r.values),
            mode,
            window_mode,
        )?);
    }
    Ok(out)
}

/// Build train and test windows from a split, scaling with the split's
/// train-fitted scaler.
pub fn make_windows(
    split: &DatasetSplit,
    mode: SubsampleMode,
    window_mode: WindowMode,
) -> Result<(Vec<WindowPair>, Vec<WindowPair>)> {
    Ok((
        windows_from_records(&split.train, &split.scaler, mode, window_mode)?,
        windows_from_records(&split.test, &split.scaler, mode, window_mode)?,
    ))
}

/// Trained forecaster: LSTM block followed by the affine head, all in one
/// flat parameter vector.
#[derive(Debug, Clone)]
pub struct ForecastModel {
    pub hidden: usize,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub selected_epoch: usize,
    pub wall_time_s: f64,
}

impl TrainReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["epoch", "train_loss", "val_loss", "selected"])?;
        for (e, (tl, vl)) in self.train_loss.iter().zip(&self.val_loss).enumerate() {
            w.write_record([
                e.to_string(),
                tl.to_string(),
                vl.to_string(),
                u8::from(e == self.selected_epoch).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl ForecastModel {
    fn lstm_spec(&self) -> LstmSpec {
        LstmSpec {
            input: 1,
            hidden: self.hidden,
        }
    }

    fn head_spec(&self) -> DenseSpec {
        DenseSpec {
            input: self.hidden,
            output: HORIZON,
        }
    }

    pub fn n_params(hidden: usize) -> usize {
        let lstm = LstmSpec { input: 1, hidden };
        let head = DenseSpec { input: hidden, output: HORIZON };
        lstm.n_params() + head.n_params()
    }

    /// Deterministic random initialization.
    pub fn init(hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lstm = LstmSpec { input: 1, hidden };
        let head = DenseSpec { input: hidden, output: HORIZON };
        let mut params = lstm.init(&mut rng);
        params.extend(head.init(&mut rng));
        ForecastModel { hidden, params }
    }

    /// Forward pass on one input window.
    pub fn predict(&self, input: &[f64]) -> Vec<f64> {
        let lstm = self.lstm_spec();
        let head = self.head_spec();
        let xs: Vec<Vec<f64>> = input.iter().map(|v| vec![*v]).collect();
        let trace = lstm.forward(&self.params[..lstm.n_params()], &xs);
        head.forward(
            &self.params[lstm.n_params()..],
            trace.hiddens.last().expect("non-empty window"),
        )
    }

    /// Mean squared error over the window set.
    pub fn loss(&self, windows: &[WindowPair]) -> f64 {
        let mut total = 0.0;
        for w in windows {
            let y = self.predict(&w.input);
            total += y
                .iter()
                .zip(&w.target)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / HORIZON as f64;
        }
        total / windows.len() as f64
    }

    /// Accumulate the gradient of the per-window MSE into `grad`; returns
    /// the window's loss.
    pub fn accumulate_gradient(&self, window: &WindowPair, grad: &mut [f64]) -> f64 {
        let lstm = self.lstm_spec();
        let head = self.head_spec();
        let (lstm_params, head_params) = self.params.split_at(lstm.n_params());
        let xs: Vec<Vec<f64>> = window.input.iter().map(|v| vec![*v]).collect();
        let trace = lstm.forward(lstm_params, &xs);
        let h_last = trace.hiddens.last().expect("non-empty window");
        let y = head.forward(head_params, h_last);
        let loss = y
            .iter()
            .zip(&window.target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / HORIZON as f64;
        let d_y: Vec<f64> = y
            .iter()
            .zip(&window.target)
            .map(|(a, b)| 2.0 * (a - b) / HORIZON as f64)
            .collect();
        let (g_lstm, g_head) = grad.split_at_mut(lstm.n_params());
        let d_h_last = head.backward(head_params, h_last, &d_y, g_head);
        let mut d_hiddens = vec![vec![0.0; self.hidden]; xs.len()];
        *d_hiddens.last_mut().unwrap() = d_h_last;
        lstm.backward(lstm_params, &trace, &d_hiddens, g_lstm);
        loss
    }

    /// Save to the documented binary checkpoint format.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(b"TAFC")?;
        for v in [1u32, self.hidden as u32, INPUT_LEN as u32, HORIZON as u32] {
            f.write_all(&v.to_le_bytes())?;
        }
        f.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for p in &self.params {
            f.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::fs::File::open(path)?;
        let mut magic = [0u8; 4];
        f.read_exact(&mut magic)?;
        if &magic != b"TAFC" {
            return Err(Error::BadCheckpoint("wrong magic".into()));
        }
        let mut u32buf = [0u8; 4];
        let mut read_u32 = |f: &mut std::fs::File| -> Result<u32> {
            f.read_exact(&mut u32buf)?;
            Ok(u32::from_le_bytes(u32buf))
        };
        let version = read_u32(&mut f)?;
        if version != 1 {
            return Err(Error::BadCheckpoint(format!("unknown version {version}")));
        }
        let hidden = read_u32(&mut f)? as usize;
        let input_len = read_u32(&mut f)? as usize;
        let horizon = read_u32(&mut f)? as usize;
        if input_len != INPUT_LEN || horizon != HORIZON {
            return Err(Error::BadCheckpoint(format!(
                "window {input_len}/{horizon} does not match {INPUT_LEN}/{HORIZON}"
            )));
        }
        let mut u64buf = [0u8; 8];
        f.read_exact(&mut u64buf)?;
        let n = u64::from_le_bytes(u64buf) as usize;
        if n != Self::n_params(hidden) {
            return Err(Error::BadCheckpoint(format!(
                "parameter count {n} does not match hidden size {hidden}"
            )));
        }
        let mut params = Vec::with_capacity(n);
        for _ in 0..n {
            f.read_exact(&mut u64buf)?;
            params.push(f64::from_le_bytes(u64buf));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::BadCheckpoint("non-finite parameter".into()));
        }
        Ok(ForecastModel { hidden, params })
    }
}

/// Train a forecaster with Adam, minibatches, and early stopping on a
/// held-out slice of the training windows. Deterministic for a fixed seed.
pub fn train_forecaster(
    windows: &[WindowPair],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(ForecastModel, TrainReport)> {
    if windows.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 windows to train".into(),
        ));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = ForecastModel::init(cfg.hidden, seed);
    let mut adam = Adam::new(model.params.len(), cfg.learning_rate);

    let mut order: Vec<usize> = (0..windows.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((windows.len() as f64 * cfg.validation_fraction).round() as usize)
        .clamp(1, windows.len() - 1);
    let val_idx = &order[..n_val];
    let train_idx = order[n_val..].to_vec();
    let val: Vec<&WindowPair> = val_idx.iter().map(|&i| &windows[i]).collect();

    let mut report = TrainReport {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        selected_epoch: 0,
        wall_time_s: 0.0,
    };
    let mut best = f64::INFINITY;
    let mut best_params = model.params.clone();
    let mut since_best = 0usize;

    let mut grad = vec![0.0; model.params.len()];
    let mut epoch_order = train_idx;
    for epoch in 0..cfg.max_epochs {
        epoch_order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in epoch_order.chunks(cfg.batch_size.max(1)) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for &i in batch {
                batch_loss += model.accumulate_gradient(&windows[i], &mut grad);
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.step(&mut model.params, &grad);
            epoch_loss += batch_loss;
        }
        epoch_loss /= epoch_order.len().max(1) as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        let val_loss = {
            let owned: Vec<WindowPair> = val.iter().map(|w| (*w).clone()).collect();
            model.loss(&owned)
        };
        report.train_loss.push(epoch_loss);
        report.val_loss.push(val_loss);
        if val_loss < best {
            best = val_loss;
            best_params.copy_from_slice(&model.params);
            report.selected_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    model.params = best_params;
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((model, report))
}
