//! Class-conditional series synthesizers behind one interface.
//!
//! The vector-quantized model is the primary synthesizer; bootstrap and
//! jitter-scale resamplers are the classical baselines. All of them fit on
//! scaled series with trend labels and sample scaled series of length 240,
//! deterministically per seed. New synthesizer families plug in by
//! implementing [`Synthesizer`].
//!
//! Checkpoint format (`TASY`): little-endian binary with a magic/version
//! header, a kind byte, the dataset scaler, then the kind-specific payload
//! (dimension header plus 64-bit parameter floats for the VQ model; pools
//! for the baselines).

mod baseline;
pub mod prior;
mod vq;

pub use baseline::{BaselineKind, BaselineSynth};
pub use vq::{
    quantize, train_prior, train_vqvae, Codebook, QuantizeMode, VqConfig, VqSynth,
    TOKENS_PER_SERIES,
};

use crate::dataio::StandardScaler;
use crate::error::{Error, Result};
use crate::labeling::TrendClass;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Outcome diagnostics of a fit.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FitReport {
    /// Fewer than two codes in use after stage 1 (VQ only; reported, not fatal).
    pub codebook_collapsed: bool,
    /// Final mean reconstruction MSE on the training series (VQ only).
    pub reconstruction_mse: Option<f64>,
    /// Final prior cross-entropy in nats per token (VQ only).
    pub prior_cross_entropy: Option<f64>,
}

/// Common synthesizer interface: fit on labeled scaled series, sample
/// scaled series. Sampling must be deterministic given (model, seed, n,
/// class).
pub trait Synthesizer {
    fn fit(&mut self, series: &[Vec<f64>], labels: &[TrendClass], seed: u64) -> Result<FitReport>;
    fn sample(&self, n: usize, class: Option<TrendClass>, seed: u64) -> Result<Vec<Vec<f64>>>;
}

impl Synthesizer for VqSynth {
    fn fit(&mut self, series: &[Vec<f64>], labels: &[TrendClass], seed: u64) -> Result<FitReport> {
        self.fit_autoencoder(series, seed)?;
        self.fit_prior(series, labels, seed)?;
        Ok(FitReport {
            codebook_collapsed: self.codebook_collapsed,
            reconstruction_mse: Some(self.reconstruction_mse(series, QuantizeMode::Codebook)),
            prior_cross_entropy: Some({
                let seqs: Vec<Vec<usize>> = series.iter().map(|s| self.encode_tokens(s)).collect();
                self.prior.cross_entropy(&seqs, labels)
            }),
        })
    }

    fn sample(&self, n: usize, class: Option<TrendClass>, seed: u64) -> Result<Vec<Vec<f64>>> {
        VqSynth::sample(self, n, class, seed)
    }
}

impl Synthesizer for BaselineSynth {
    fn fit(&mut self, series: &[Vec<f64>], labels: &[TrendClass], _seed: u64) -> Result<FitReport> {
        BaselineSynth::fit(self, series, labels)?;
        Ok(FitReport::default())
    }

    fn sample(&self, n: usize, class: Option<TrendClass>, seed: u64) -> Result<Vec<Vec<f64>>> {
        BaselineSynth::sample(self, n, class, seed)
    }
}

/// Synthesizer family selector used by configs and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    #[default]
    Vq,
    Bootstrap,
    Jitter,
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vq" => Ok(SynthKind::Vq),
            "bootstrap" => Ok(SynthKind::Bootstrap),
            "jitter" => Ok(SynthKind::Jitter),
            other => Err(Error::InvalidArgument(format!(
                "unknown synthesizer kind `{other}` (expected vq|bootstrap|jitter)"
            ))),
        }
    }
}

/// Concrete synthesizer carrier, checkpointable together with the dataset
/// scaler so sampled series can be exported back to raw units.
#[derive(Debug, Clone)]
pub enum SynthModel {
    Vq(Box<VqSynth>),
    Baseline(BaselineSynth),
}

impl SynthModel {
    pub fn new(kind: SynthKind, vq_cfg: &VqConfig, seed: u64) -> Result<Self> {
        Ok(match kind {
            SynthKind::Vq => SynthModel::Vq(Box::new(VqSynth::new(vq_cfg.clone(), seed)?)),
            SynthKind::Bootstrap => {
                SynthModel::Baseline(BaselineSynth::new(BaselineKind::BootstrapResample))
            }
            SynthKind::Jitter => SynthModel::Baseline(BaselineSynth::new(BaselineKind::JitterScale)),
        })
    }

    pub fn kind(&self) -> SynthKind {
        match self {
            SynthModel::Vq(_) => SynthKind::Vq,
            SynthModel::Baseline(b) => match b.kind {
                BaselineKind::BootstrapResample => SynthKind::Bootstrap,
                BaselineKind::JitterScale => SynthKind::Jitter,
            },
        }
    }
}

impl Synthesizer for SynthModel {
    fn fit(&mut self, series: &[Vec<f64>], labels: &[TrendClass], seed: u64) -> Result<FitReport> {
        match self {
            SynthModel::Vq(m) => m.as_mut().fit(series, labels, seed),
            SynthModel::Baseline(m) => Synthesizer::fit(m, series, labels, seed),
        }
    }

    fn sample(&self, n: usize, class: Option<TrendClass>, seed: u64) -> Result<Vec<Vec<f64>>> {
        match self {
            SynthModel::Vq(m) => Synthesizer::sample(m.as_ref(), n, class, seed),
            SynthModel::Baseline(m) => Synthesizer::sample(m, n, class, seed),
        }
    }
}

// --- checkpoint plumbing ---------------------------------------------------

struct Sink<W: Write>(W);

impl<W: Write> Sink<W> {
    fn u8(&mut self, v: u8) -> Result<()> {
        self.0.write_all(&[v])?;
        Ok(())
    }
    fn u32(&mut self, v: u32) -> Result<()> {
        self.0.write_all(&v.to_le_bytes())?;
        Ok(())
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        self.0.write_all(&v.to_le_bytes())?;
        Ok(())
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        self.0.write_all(&v.to_le_bytes())?;
        Ok(())
    }
    fn f64s(&mut self, vs: &[f64]) -> Result<()> {
        self.u64(vs.len() as u64)?;
        for v in vs {
            self.f64(*v)?;
        }
        Ok(())
    }
}

struct Source<R: Read>(R);

impl<R: Read> Source<R> {
    fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.0.read_exact(&mut b)?;
        Ok(b[0])
    }
    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.0.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
    fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        if n > (1 << 30) {
            return Err(Error::BadCheckpoint(format!(
                "implausible vector length {n}"
            )));
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }
}

/// Write a synthesizer checkpoint with the scaler it samples under.
pub fn save_synth(path: &Path, model: &SynthModel, scaler: &StandardScaler) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut s = Sink(std::io::BufWriter::new(file));
    s.0.write_all(b"TASY")?;
    s.u32(1)?;
    s.f64(scaler.mean)?;
    s.f64(scaler.std)?;
    match model {
        SynthModel::Vq(m) => {
            s.u8(0)?;
            let cfg = &m.cfg;
            s.u32(cfg.codebook_size as u32)?;
            s.u32(cfg.code_dim as u32)?;
            s.u32(TOKENS_PER_SERIES as u32)?;
            s.u32(cfg.enc_channels.0 as u32)?;
            s.u32(cfg.enc_channels.1 as u32)?;
            s.u32(cfg.prior.embed_dim as u32)?;
            s.u32(cfg.prior.hidden as u32)?;
            s.u32(cfg.stage1_epochs as u32)?;
            s.u32(cfg.stage2_epochs as u32)?;
            s.u32(cfg.batch_size as u32)?;
            s.f64(cfg.beta)?;
            s.f64(cfg.ema_decay)?;
            s.f64(cfg.learning_rate)?;
            s.f64(cfg.prior.learning_rate)?;
            s.u8(u8::from(m.autoencoder_trained))?;
            s.u8(u8::from(m.prior_trained))?;
            s.u8(u8::from(m.codebook_collapsed))?;
            s.f64s(&m.codebook.codes)?;
            s.f64s(&m.codebook.ema_count)?;
            s.f64s(&m.codebook.ema_sum)?;
            s.u64(m.codebook.usage.len() as u64)?;
            for u in &m.codebook.usage {
                s.u64(*u)?;
            }
            s.f64s(&m.enc_params)?;
            s.f64s(&m.dec_params)?;
            s.f64s(&m.prior.embeddings)?;
            s.f64s(&m.prior.lstm_params)?;
            s.f64s(&m.prior.head_params)?;
            for c in m.prior.class_counts {
                s.u64(c)?;
            }
        }
        SynthModel::Baseline(b) => {
            s.u8(match b.kind {
                BaselineKind::BootstrapResample => 1,
                BaselineKind::JitterScale => 2,
            })?;
            s.f64(b.noise_std)?;
            s.f64(b.scale_amplitude)?;
            for pool in &b.pools {
                s.u64(pool.len() as u64)?;
                for series in pool {
                    s.f64s(series)?;
                }
            }
        }
    }
    s.0.flush()?;
    Ok(())
}

/// Load a synthesizer checkpoint with its scaler.
pub fn load_synth(path: &Path) -> Result<(SynthModel, StandardScaler)> {
    let file = std::fs::File::open(path)?;
    let mut s = Source(std::io::BufReader::new(file));
    let mut magic = [0u8; 4];
    s.0.read_exact(&mut magic)?;
    if &magic != b"TASY" {
        return Err(Error::BadCheckpoint("wrong magic".into()));
    }
    let version = s.u32()?;
    if version != 1 {
        return Err(Error::BadCheckpoint(format!("unknown version {version}")));
    }
    let scaler = StandardScaler {
        mean: s.f64()?,
        std: s.f64()?,
    };
    let kind = s.u8()?;
    let model = match kind {
        0 => {
            let codebook_size = s.u32()? as usize;
            let code_dim = s.u32()? as usize;
            let tokens = s.u32()? as usize;
            if tokens != TOKENS_PER_SERIES {
                return Err(Error::BadCheckpoint(format!(
                    "token count {tokens} does not match {TOKENS_PER_SERIES}"
                )));
            }
            let enc_channels = (s.u32()? as usize, s.u32()? as usize);
            let prior_embed = s.u32()? as usize;
            let prior_hidden = s.u32()? as usize;
            let stage1_epochs = s.u32()? as usize;
            let stage2_epochs = s.u32()? as usize;
            let batch_size = s.u32()? as usize;
            let beta = s.f64()?;
            let ema_decay = s.f64()?;
            let learning_rate = s.f64()?;
            let prior_lr = s.f64()?;
            let autoencoder_trained = s.u8()? != 0;
            let prior_trained = s.u8()? != 0;
            let codebook_collapsed = s.u8()? != 0;
            let cfg = VqConfig {
                codebook_size,
                code_dim,
                enc_channels,
                beta,
                ema_decay,
                stage1_epochs,
                stage2_epochs,
                batch_size,
                learning_rate,
                prior: prior::PriorConfig {
                    embed_dim: prior_embed,
                    hidden: prior_hidden,
                    learning_rate: prior_lr,
                },
            };
            let mut m = VqSynth::new(cfg, 0)?;
            let codes = s.f64s()?;
            if codes.len() != codebook_size * code_dim {
                return Err(Error::BadCheckpoint("codebook size mismatch".into()));
            }
            m.codebook.codes = codes;
            m.codebook.ema_count = s.f64s()?;
            m.codebook.ema_sum = s.f64s()?;
            let n_usage = s.u64()? as usize;
            let mut usage = Vec::with_capacity(n_usage);
            for _ in 0..n_usage {
                usage.push(s.u64()?);
            }
            m.codebook.usage = usage;
            let enc = s.f64s()?;
            let dec = s.f64s()?;
            if enc.len() != m.enc_params.len() || dec.len() != m.dec_params.len() {
                return Err(Error::BadCheckpoint("parameter count mismatch".into()));
            }
            m.enc_params = enc;
            m.dec_params = dec;
            m.prior.embeddings = s.f64s()?;
            m.prior.lstm_params = s.f64s()?;
            m.prior.head_params = s.f64s()?;
            for c in &mut m.prior.class_counts {
                *c = s.u64()?;
            }
            m.autoencoder_trained = autoencoder_trained;
            m.prior_trained = prior_trained;
            m.codebook_collapsed = codebook_collapsed;
            SynthModel::Vq(Box::new(m))
        }
        1 | 2 => {
            let mut b = BaselineSynth::new(if kind == 1 {
                BaselineKind::BootstrapResample
            } else {
                BaselineKind::JitterScale
            });
            let noise_std = s.f64()?;
            let scale_amplitude = s.f64()?;
            let mut series = Vec::new();
            let mut labels = Vec::new();
            for class in 0..3u8 {
                let n = s.u64()? as usize;
                for _ in 0..n {
                    series.push(s.f64s()?);
                    labels.push(TrendClass::from_u8(class)?);
                }
            }
            if !series.is_empty() {
                b.fit(&series, &labels)?;
            }
            b.noise_std = noise_std;
            b.scale_amplitude = scale_amplitude;
            SynthModel::Baseline(b)
        }
        other => {
            return Err(Error::BadCheckpoint(format!("unknown kind {other}")));
        }
    };
    Ok((model, scaler))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("synth.bin");
        let series: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..240).map(|t| i as f64 + 0.01 * t as f64).collect())
            .collect();
        let labels = vec![
            TrendClass::MonotonicPositive,
            TrendClass::MonotonicPositive,
            TrendClass::MonotonicNegative,
            TrendClass::NonMonotonic,
        ];
        let mut model = SynthModel::new(SynthKind::Bootstrap, &VqConfig::default(), 1).unwrap();
        model.fit(&series, &labels, 7).unwrap();
        let scaler = StandardScaler { mean: 21.5, std: 3.25 };
        save_synth(&path, &model, &scaler).unwrap();
        let (back, back_scaler) = load_synth(&path).unwrap();
        assert_eq!(back_scaler, scaler);
        assert_eq!(
            model.sample(5, None, 11).unwrap(),
            back.sample(5, None, 11).unwrap()
        );
    }

    #[test]
    fn vq_checkpoint_round_trip_preserves_sampling() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vq.bin");
        let cfg = VqConfig {
            codebook_size: 8,
            code_dim: 8,
            enc_channels: (6, 8),
            stage1_epochs: 15,
            stage2_epochs: 15,
            ..VqConfig::default()
        };
        let series: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                (0..240)
                    .map(|t| ((0.03 + 0.002 * i as f64) * t as f64).sin())
                    .collect()
            })
            .collect();
        let labels: Vec<TrendClass> = (0..10)
            .map(|i| TrendClass::from_u8((i % 3) as u8).unwrap())
            .collect();
        let mut model = SynthModel::new(SynthKind::Vq, &cfg, 3).unwrap();
        model.fit(&series, &labels, 3).unwrap();
        let scaler = StandardScaler { mean: 0.0, std: 1.0 };
        save_synth(&path, &model, &scaler).unwrap();
        let (back, _) = load_synth(&path).unwrap();
        assert_eq!(
            model.sample(3, Some(TrendClass::NonMonotonic), 5).unwrap(),
            back.sample(3, Some(TrendClass::NonMonotonic), 5).unwrap()
        );
    }

    #[test]
    fn truncated_checkpoint_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"TASY\x01\x00\x00\x00").unwrap();
        assert!(load_synth(&path).is_err());
    }
}
