//! Vector-quantized autoencoder for series synthesis.
//!
//! A three-stage strided conv encoder maps a 240-sample series to 30 latent
//! tokens (downsample factor 8); each token vector is snapped to its nearest
//! codebook entry, and a mirrored transposed-conv decoder reconstructs the
//! series. The codebook learns by exponential-moving-average updates, the
//! autoencoder by reconstruction MSE plus a commitment term with the
//! straight-through estimator across the quantization step. A class-
//! conditional autoregressive prior over the token sequences is trained
//! afterwards and drives sampling.

use crate::dataio::SERIES_LEN;
use crate::error::{Error, Result};
use crate::labeling::TrendClass;
use crate::nn::{tanh_act, tanh_backward, Adam, Conv1dSpec, ConvT1dSpec, Signal};
use crate::seeds::derive_seed;
use crate::synth::prior::{PriorConfig, TokenPrior};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Latent tokens per series: three stride-2 stages halve 240 three times.
pub const TOKENS_PER_SERIES: usize = 30;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct VqConfig {
    /// Codebook size K.
    pub codebook_size: usize,
    /// Code vector dimension d.
    pub code_dim: usize,
    /// Channel widths of the two hidden conv stages.
    pub enc_channels: (usize, usize),
    /// Commitment loss weight.
    pub beta: f64,
    /// EMA decay for codebook updates.
    pub ema_decay: f64,
    pub stage1_epochs: usize,
    pub stage2_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub prior: PriorConfig,
}

impl Default for VqConfig {
    fn default() -> Self {
        VqConfig {
            codebook_size: 64,
            code_dim: 32,
            enc_channels: (16, 32),
            beta: 0.25,
            ema_decay: 0.99,
            // one tenth of the reference budget, keeping the 1:5 ratio
            stage1_epochs: 200,
            stage2_epochs: 1000,
            batch_size: 16,
            learning_rate: 1e-3,
            prior: PriorConfig::default(),
        }
    }
}

/// Finite set of latent code vectors with EMA accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub size: usize,
    pub dim: usize,
    /// Row-major code vectors, `size x dim`.
    pub codes: Vec<f64>,
    /// EMA of assignment counts.
    pub ema_count: Vec<f64>,
    /// EMA of assigned-vector sums, `size x dim`.
    pub ema_sum: Vec<f64>,
    /// Lifetime assignment counts (diagnostic).
    pub usage: Vec<u64>,
}

impl Codebook {
    pub fn new(size: usize, dim: usize, codes: Vec<f64>) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidArgument("codebook size must be >= 2".into()));
        }
        if codes.len() != size * dim || codes.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("bad codebook initializer".into()));
        }
        let ema_sum = codes.clone();
        Ok(Codebook {
            size,
            dim,
            codes,
            ema_count: vec![1.0; size],
            ema_sum,
            usage: vec![0; size],
        })
    }

    pub fn code(&self, k: usize) -> &[f64] {
        &self.codes[k * self.dim..(k + 1) * self.dim]
    }

    /// One EMA update from a batch of assignments. `decay = 1` leaves the
    /// codebook unchanged.
    pub fn ema_update(&mut self, assignments: &[(usize, &[f64])], decay: f64, epsilon: f64) {
        let mut counts = vec![0.0; self.size];
        let mut sums = vec![0.0; self.size * self.dim];
        for (k, z) in assignments {
            counts[*k] += 1.0;
            for (s, zv) in sums[k * self.dim..(k + 1) * self.dim].iter_mut().zip(*z) {
                *s += zv;
            }
        }
        for k in 0..self.size {
            self.ema_count[k] = decay * self.ema_count[k] + (1.0 - decay) * counts[k];
            for d in 0..self.dim {
                let i = k * self.dim + d;
                self.ema_sum[i] = decay * self.ema_sum[i] + (1.0 - decay) * sums[i];
            }
        }
        // Laplace-smoothed counts keep rarely used codes finite
        let total: f64 = self.ema_count.iter().sum();
        for k in 0..self.size {
            let n = (self.ema_count[k] + epsilon) / (total + self.size as f64 * epsilon) * total;
            for d in 0..self.dim {
                self.codes[k * self.dim + d] = self.ema_sum[k * self.dim + d] / n;
            }
        }
    }
}

/// Nearest code by squared Euclidean distance, ties to the smallest index.
/// Uses the expanded form `|z|^2 - 2 z.e + |e|^2`.
pub fn quantize(z: &[f64], codebook: &Codebook) -> (usize, Vec<f64>) {
    debug_assert_eq!(z.len(), codebook.dim);
    let z_sq: f64 = z.iter().map(|v| v * v).sum();
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for k in 0..codebook.size {
        let e = codebook.code(k);
        let mut dot = 0.0;
        let mut e_sq = 0.0;
        for (zv, ev) in z.iter().zip(e) {
            dot += zv * ev;
            e_sq += ev * ev;
        }
        let d = z_sq - 2.0 * dot + e_sq;
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    (best, codebook.code(best).to_vec())
}

/// Whether the quantization bottleneck is active. `Identity` bypasses the
/// codebook, used by gradient checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantizeMode {
    Codebook,
    Identity,
}

/// Trained or in-training VQ synthesizer.
#[derive(Debug, Clone)]
pub struct VqSynth {
    pub cfg: VqConfig,
    pub codebook: Codebook,
    pub enc_params: Vec<f64>,
    pub dec_params: Vec<f64>,
    pub prior: TokenPrior,
    pub autoencoder_trained: bool,
    pub prior_trained: bool,
    /// Set when fewer than two codes were in use at the end of stage 1.
    pub codebook_collapsed: bool,
}

struct EncoderSpecs {
    c1: Conv1dSpec,
    c2: Conv1dSpec,
    c3: Conv1dSpec,
}

struct DecoderSpecs {
    t1: ConvT1dSpec,
    t2: ConvT1dSpec,
    t3: ConvT1dSpec,
}


/// Fixed triangular smoothing kernel applied as the decoder's final stage.
/// The target curves are smooth exponentials; constraining the output to the
/// smooth subspace removes transposed-conv ripple that the quantized latents
/// cannot control.
const SMOOTH_KERNEL: [f64; 9] = {
    let w = [1.0, 2.0, 3.0, 4.0, 5.0, 4.0, 3.0, 2.0, 1.0];
    let mut out = [0.0; 9];
    let mut i = 0;
    while i < 9 {
        out[i] = w[i] / 25.0;
        i += 1;
    }
    out
};

/// Depthwise fixed-kernel smoothing with edge-replicate padding.
fn smooth_signal(x: &Signal) -> Signal {
    let half = SMOOTH_KERNEL.len() / 2;
    let n = x.len;
    let mut out = Signal::zeros(x.channels, n);
    for ch in 0..x.channels {
        for j in 0..n {
            let mut acc = 0.0;
            for (t, k) in SMOOTH_KERNEL.iter().enumerate() {
                let src = (j + t).saturating_sub(half).min(n - 1);
                acc += k * x.at(ch, src);
            }
            out.data[ch * n + j] = acc;
        }
    }
    out
}

/// Transpose of [`smooth_signal`] for the backward pass.
fn smooth_signal_backward(d_out: &Signal) -> Signal {
    let half = SMOOTH_KERNEL.len() / 2;
    let n = d_out.len;
    let mut d_x = Signal::zeros(d_out.channels, n);
    for ch in 0..d_out.channels {
        for j in 0..n {
            let g = d_out.at(ch, j);
            for (t, k) in SMOOTH_KERNEL.iter().enumerate() {
                let src = (j + t).saturating_sub(half).min(n - 1);
                d_x.data[ch * n + src] += k * g;
            }
        }
    }
    d_x
}

struct EncoderTrace {
    x: Signal,
    a1: Signal,
    m1: Vec<f64>,
    a2: Signal,
    m2: Vec<f64>,
    z: Signal,
}

struct DecoderTrace {
    zq: Signal,
    a1: Signal,
    m1: Vec<f64>,
    a2: Signal,
    m2: Vec<f64>,
    pre: Signal,
    out: Signal,
}

impl VqSynth {
    pub fn new(cfg: VqConfig, seed: u64) -> Result<Self> {
        if cfg.codebook_size < 2 || cfg.code_dim == 0 {
            return Err(Error::InvalidArgument("bad codebook dimensions".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "vq-init", 0, 0));
        let enc = Self::encoder_specs(&cfg);
        let dec = Self::decoder_specs(&cfg);
        let mut enc_params = enc.c1.init(&mut rng);
        enc_params.extend(enc.c2.init(&mut rng));
        enc_params.extend(enc.c3.init(&mut rng));
        let mut dec_params = dec.t1.init(&mut rng);
        dec_params.extend(dec.t2.init(&mut rng));
        dec_params.extend(dec.t3.init(&mut rng));
        let codes: Vec<f64> = (0..cfg.codebook_size * cfg.code_dim)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let codebook = Codebook::new(cfg.codebook_size, cfg.code_dim, codes)?;
        let prior = TokenPrior::new(cfg.prior.clone(), cfg.codebook_size, seed);
        Ok(VqSynth {
            cfg,
            codebook,
            enc_params,
            dec_params,
            prior,
            autoencoder_trained: false,
            prior_trained: false,
            codebook_collapsed: false,
        })
    }

    fn encoder_specs(cfg: &VqConfig) -> EncoderSpecs {
        let (c1, c2) = cfg.enc_channels;
        EncoderSpecs {
            c1: Conv1dSpec { in_ch: 1, out_ch: c1, kernel: 4, stride: 2, pad: 1 },
            c2: Conv1dSpec { in_ch: c1, out_ch: c2, kernel: 4, stride: 2, pad: 1 },
            c3: Conv1dSpec { in_ch: c2, out_ch: cfg.code_dim, kernel: 4, stride: 2, pad: 1 },
        }
    }

    fn decoder_specs(cfg: &VqConfig) -> DecoderSpecs {
        let (c1, c2) = cfg.enc_channels;
        DecoderSpecs {
            t1: ConvT1dSpec { in_ch: cfg.code_dim, out_ch: c2, kernel: 4, stride: 2, pad: 1 },
            t2: ConvT1dSpec { in_ch: c2, out_ch: c1, kernel: 4, stride: 2, pad: 1 },
            t3: ConvT1dSpec { in_ch: c1, out_ch: 1, kernel: 4, stride: 2, pad: 1 },
        }
    }

    fn enc_param_splits(&self) -> (usize, usize) {
        let specs = Self::encoder_specs(&self.cfg);
        (specs.c1.n_params(), specs.c1.n_params() + specs.c2.n_params())
    }

    fn dec_param_splits(&self) -> (usize, usize) {
        let specs = Self::decoder_specs(&self.cfg);
        (specs.t1.n_params(), specs.t1.n_params() + specs.t2.n_params())
    }

    fn encode_trace(&self, series: &[f64]) -> EncoderTrace {
        let specs = Self::encoder_specs(&self.cfg);
        let (s1, s2) = self.enc_param_splits();
        let x = Signal::from_vec(1, series.len(), series.to_vec());
        let mut a1 = specs.c1.forward(&self.enc_params[..s1], &x);
        let m1 = tanh_act(&mut a1);
        let mut a2 = specs.c2.forward(&self.enc_params[s1..s2], &a1);
        let m2 = tanh_act(&mut a2);
        let z = specs.c3.forward(&self.enc_params[s2..], &a2);
        EncoderTrace { x, a1, m1, a2, m2, z }
    }

    fn decode_trace(&self, zq: Signal) -> DecoderTrace {
        let specs = Self::decoder_specs(&self.cfg);
        let (s1, s2) = self.dec_param_splits();
        let mut a1 = specs.t1.forward(&self.dec_params[..s1], &zq);
        let m1 = tanh_act(&mut a1);
        let mut a2 = specs.t2.forward(&self.dec_params[s1..s2], &a1);
        let m2 = tanh_act(&mut a2);
        let pre = specs.t3.forward(&self.dec_params[s2..], &a2);
        let out = smooth_signal(&pre);
        DecoderTrace { zq, a1, m1, a2, m2, pre, out }
    }

    /// Token vector at position `t` of an encoder output.
    fn token<'a>(z: &'a Signal, t: usize, dim: usize) -> Vec<f64> {
        (0..dim).map(|d| z.at(d, t)).collect::<Vec<f64>>()
    }

    /// Encode a scaled series to its token index sequence.
    pub fn encode_tokens(&self, series: &[f64]) -> Vec<usize> {
        let trace = self.encode_trace(series);
        (0..trace.z.len)
            .map(|t| quantize(&Self::token(&trace.z, t, self.cfg.code_dim), &self.codebook).0)
            .collect()
    }

    /// Decode a token index sequence to a scaled series.
    pub fn decode_tokens(&self, tokens: &[usize]) -> Vec<f64> {
        let dim = self.cfg.code_dim;
        let mut zq = Signal::zeros(dim, tokens.len());
        for (t, k) in tokens.iter().enumerate() {
            let code = self.codebook.code(*k);
            for d in 0..dim {
                zq.data[d * tokens.len() + t] = code[d];
            }
        }
        self.decode_trace(zq).out.data
    }

    /// Reconstruct one scaled series through the quantization bottleneck.
    pub fn reconstruct(&self, series: &[f64], mode: QuantizeMode) -> Vec<f64> {
        let trace = self.encode_trace(series);
        let zq = match mode {
            QuantizeMode::Identity => trace.z.clone(),
            QuantizeMode::Codebook => {
                let mut zq = Signal::zeros(self.cfg.code_dim, trace.z.len);
                for t in 0..trace.z.len {
                    let (_, q) = quantize(&Self::token(&trace.z, t, self.cfg.code_dim), &self.codebook);
                    for d in 0..self.cfg.code_dim {
                        zq.data[d * trace.z.len + t] = q[d];
                    }
                }
                zq
            }
        };
        self.decode_trace(zq).out.data
    }

    /// Mean reconstruction MSE over a dataset.
    pub fn reconstruction_mse(&self, data: &[Vec<f64>], mode: QuantizeMode) -> f64 {
        let mut total = 0.0;
        for series in data {
            let y = self.reconstruct(series, mode);
            total += y
                .iter()
                .zip(series)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / series.len() as f64;
        }
        total / data.len() as f64
    }

    /// Forward + backward of one series. Accumulates encoder/decoder
    /// gradients, records token assignments for the EMA update, and returns
    /// (reconstruction loss, commitment loss).
    #[allow(clippy::too_many_arguments)]
    fn accumulate_series(
        &self,
        series: &[f64],
        mode: QuantizeMode,
        g_enc: &mut [f64],
        g_dec: &mut [f64],
        assignments: &mut Vec<(usize, Vec<f64>)>,
    ) -> (f64, f64) {
        let enc_specs = Self::encoder_specs(&self.cfg);
        let dec_specs = Self::decoder_specs(&self.cfg);
        let (es1, es2) = self.enc_param_splits();
        let (ds1, ds2) = self.dec_param_splits();
        let dim = self.cfg.code_dim;

        let enc_trace = self.encode_trace(series);
        let t_len = enc_trace.z.len;

        let mut zq = Signal::zeros(dim, t_len);
        let mut commit = 0.0;
        match mode {
            QuantizeMode::Identity => {
                zq.data.copy_from_slice(&enc_trace.z.data);
            }
            QuantizeMode::Codebook => {
                for t in 0..t_len {
                    let zt = Self::token(&enc_trace.z, t, dim);
                    let (k, q) = quantize(&zt, &self.codebook);
                    for d in 0..dim {
                        zq.data[d * t_len + t] = q[d];
                        let diff = zt[d] - q[d];
                        commit += diff * diff;
                    }
                    assignments.push((k, zt));
                }
                commit /= (t_len * dim) as f64;
            }
        }

        let dec_trace = self.decode_trace(zq);
        let n = series.len() as f64;
        let recon = dec_trace
            .out
            .data
            .iter()
            .zip(series)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n;

        // reconstruction gradient through the decoder
        let d_out = Signal::from_vec(
            1,
            series.len(),
            dec_trace
                .out
                .data
                .iter()
                .zip(series)
                .map(|(a, b)| 2.0 * (a - b) / n)
                .collect(),
        );
        let d_pre = smooth_signal_backward(&d_out);
        let mut d_a2 = dec_specs
            .t3
            .backward(&self.dec_params[ds2..], &dec_trace.a2, &d_pre, &mut g_dec[ds2..]);
        tanh_backward(&mut d_a2, &dec_trace.m2);
        let mut d_a1 = dec_specs.t2.backward(
            &self.dec_params[ds1..ds2],
            &dec_trace.a1,
            &d_a2,
            &mut g_dec[ds1..ds2],
        );
        tanh_backward(&mut d_a1, &dec_trace.m1);
        let d_zq = dec_specs
            .t1
            .backward(&self.dec_params[..ds1], &dec_trace.zq, &d_a1, &mut g_dec[..ds1]);

        // straight-through into the encoder, plus the commitment pull
        let mut d_z = d_zq;
        if mode == QuantizeMode::Codebook {
            let scale = self.cfg.beta * 2.0 / (t_len * dim) as f64;
            for t in 0..t_len {
                for d in 0..dim {
                    let idx = d * t_len + t;
                    let diff = enc_trace.z.data[idx] - dec_trace.zq.data[idx];
                    d_z.data[idx] += scale * diff;
                }
            }
        }

        let mut d_e2 = enc_specs
            .c3
            .backward(&self.enc_params[es2..], &enc_trace.a2, &d_z, &mut g_enc[es2..]);
        tanh_backward(&mut d_e2, &enc_trace.m2);
        let mut d_e1 = enc_specs.c2.backward(
            &self.enc_params[es1..es2],
            &enc_trace.a1,
            &d_e2,
            &mut g_enc[es1..es2],
        );
        tanh_backward(&mut d_e1, &enc_trace.m1);
        enc_specs
            .c1
            .backward(&self.enc_params[..es1], &enc_trace.x, &d_e1, &mut g_enc[..es1]);

        (recon, commit)
    }

    /// Stage 1: fit encoder, decoder, and codebook. Deterministic per seed.
    pub fn fit_autoencoder(&mut self, data: &[Vec<f64>], seed: u64) -> Result<()> {
        if data.len() < 8 {
            return Err(Error::InvalidArgument(format!(
                "autoencoder training needs >= 8 series, got {}",
                data.len()
            )));
        }
        if data.iter().any(|s| s.len() != SERIES_LEN) {
            return Err(Error::InvalidArgument("series length mismatch".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "vq-stage1", 0, 0));

        // seed the codebook from encoder outputs of the initial network
        let mut pool: Vec<Vec<f64>> = Vec::new();
        for series in data.iter().take(16) {
            let trace = self.encode_trace(series);
            for t in 0..trace.z.len {
                pool.push(Self::token(&trace.z, t, self.cfg.code_dim));
            }
        }
        pool.shuffle(&mut rng);
        for k in 0..self.codebook.size {
            let src = &pool[k % pool.len()];
            for d in 0..self.cfg.code_dim {
                let jitter = if k < pool.len() { 0.0 } else { rng.gen_range(-0.01..0.01) };
                self.codebook.codes[k * self.cfg.code_dim + d] = src[d] + jitter;
            }
        }
        self.codebook.ema_sum.copy_from_slice(&self.codebook.codes);
        self.codebook.ema_count = vec![1.0; self.codebook.size];

        let mut adam_enc = Adam::new(self.enc_params.len(), self.cfg.learning_rate);
        let mut adam_dec = Adam::new(self.dec_params.len(), self.cfg.learning_rate);
        let mut g_enc = vec![0.0; self.enc_params.len()];
        let mut g_dec = vec![0.0; self.dec_params.len()];
        let mut order: Vec<usize> = (0..data.len()).collect();

        for epoch in 0..self.cfg.stage1_epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(self.cfg.batch_size.max(1)) {
                g_enc.iter_mut().for_each(|g| *g = 0.0);
                g_dec.iter_mut().for_each(|g| *g = 0.0);
                let mut assignments: Vec<(usize, Vec<f64>)> = Vec::new();
                let mut batch_loss = 0.0;
                for &i in batch {
                    let (recon, commit) = self.accumulate_series(
                        &data[i],
                        QuantizeMode::Codebook,
                        &mut g_enc,
                        &mut g_dec,
                        &mut assignments,
                    );
                    batch_loss += recon + self.cfg.beta * commit;
                }
                let scale = 1.0 / batch.len() as f64;
                g_enc.iter_mut().for_each(|g| *g *= scale);
                g_dec.iter_mut().for_each(|g| *g *= scale);
                adam_enc.step(&mut self.enc_params, &g_enc);
                adam_dec.step(&mut self.dec_params, &g_dec);
                let refs: Vec<(usize, &[f64])> =
                    assignments.iter().map(|(k, z)| (*k, z.as_slice())).collect();
                for (k, _) in &refs {
                    self.codebook.usage[*k] += 1;
                }
                self.codebook.ema_update(&refs, self.cfg.ema_decay, 1e-5);
                epoch_loss += batch_loss;
            }
            epoch_loss /= data.len() as f64;
            if !epoch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            // revive dead codes from live encoder outputs during the first
            // three quarters of training
            if epoch < self.cfg.stage1_epochs * 3 / 4 {
                self.revive_dead_codes(data, &mut rng);
            }
        }

        // collapse diagnostic: codes used by the final assignment pass
        let mut used = vec![false; self.codebook.size];
        for series in data {
            for k in self.encode_tokens(series) {
                used[k] = true;
            }
        }
        self.codebook_collapsed = used.iter().filter(|u| **u).count() < 2;
        self.autoencoder_trained = true;
        Ok(())
    }

    fn revive_dead_codes(&mut self, data: &[Vec<f64>], rng: &mut ChaCha8Rng) {
        let dead: Vec<usize> = (0..self.codebook.size)
            .filter(|&k| self.codebook.ema_count[k] < 0.01)
            .collect();
        if dead.is_empty() {
            return;
        }
        for k in dead {
            let series = &data[rng.gen_range(0..data.len())];
            let trace = self.encode_trace(series);
            let t = rng.gen_range(0..trace.z.len);
            let z = Self::token(&trace.z, t, self.cfg.code_dim);
            for d in 0..self.cfg.code_dim {
                self.codebook.codes[k * self.cfg.code_dim + d] = z[d];
                self.codebook.ema_sum[k * self.cfg.code_dim + d] = z[d];
            }
            self.codebook.ema_count[k] = 1.0;
        }
    }

    /// Stage 2: fit the class-conditional token prior on the encoded corpus.
    pub fn fit_prior(
        &mut self,
        data: &[Vec<f64>],
        labels: &[TrendClass],
        seed: u64,
    ) -> Result<()> {
        if !self.autoencoder_trained {
            return Err(Error::UnfittedModel);
        }
        if data.len() != labels.len() {
            return Err(Error::InvalidArgument(
                "labels must match series one-to-one".into(),
            ));
        }
        let sequences: Vec<Vec<usize>> = data.iter().map(|s| self.encode_tokens(s)).collect();
        self.prior.fit(
            &sequences,
            labels,
            self.cfg.stage2_epochs,
            self.cfg.batch_size,
            derive_seed(seed, "vq-stage2", 0, 0),
        )?;
        self.prior_trained = true;
        Ok(())
    }

    /// Ancestral sampling: draw token sequences from the prior, decode.
    pub fn sample(
        &self,
        n: usize,
        class: Option<TrendClass>,
        seed: u64,
    ) -> Result<Vec<Vec<f64>>> {
        if !self.autoencoder_trained || !self.prior_trained {
            return Err(Error::UnfittedModel);
        }
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(seed, "vq-sample", i as u64, 0));
            let tokens = self
                .prior
                .sample_sequence(TOKENS_PER_SERIES, class, &mut rng)?;
            let series = self.decode_tokens(&tokens);
            if series.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch: 0 });
            }
            out.push(series);
        }
        Ok(out)
    }
}

/// Stage-1 convenience wrapper: build and fit the autoencoder.
pub fn train_vqvae(data: &[Vec<f64>], cfg: &VqConfig, seed: u64) -> Result<VqSynth> {
    let mut model = VqSynth::new(cfg.clone(), seed)?;
    model.fit_autoencoder(data, seed)?;
    Ok(model)
}

/// Stage-2 convenience wrapper.
pub fn train_prior(
    model: &mut VqSynth,
    data: &[Vec<f64>],
    labels: &[TrendClass],
    seed: u64,
) -> Result<()> {
    model.fit_prior(data, labels, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> VqConfig {
        VqConfig {
            codebook_size: 8,
            code_dim: 8,
            enc_channels: (8, 12),
            stage1_epochs: 60,
            stage2_epochs: 60,
            ..VqConfig::default()
        }
    }

    fn wave(freq: f64, amp: f64, phase: f64) -> Vec<f64> {
        (0..SERIES_LEN)
            .map(|t| amp * (freq * t as f64 + phase).sin())
            .collect()
    }

    #[test]
    fn quantize_exact_match_and_hand_example() {
        let codes = vec![
            0.0, 0.0, // e0
            1.0, 1.0, // e1
            -2.0, 0.5, // e2
        ];
        let cb = Codebook::new(3, 2, codes).unwrap();
        assert_eq!(quantize(&[-2.0, 0.5], &cb).0, 2);
        // distances 1.45 vs 0.05
        let (k, q) = quantize(&[0.9, 0.8], &cb);
        assert_eq!(k, 1);
        assert_eq!(q, vec![1.0, 1.0]);
    }

    #[test]
    fn quantize_tie_breaks_to_smallest_index() {
        let cb = Codebook::new(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(quantize(&[0.5, 0.5], &cb).0, 0);
    }

    #[test]
    fn quantize_matches_brute_force_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let k = rng.gen_range(2..=64);
            let d = rng.gen_range(1..=32);
            let codes: Vec<f64> = (0..k * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let cb = Codebook::new(k, d, codes).unwrap();
            for _ in 0..20 {
                let z: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.5..2.5)).collect();
                let (fast, _) = quantize(&z, &cb);
                // independent naive scan
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for kk in 0..k {
                    let dist: f64 = cb
                        .code(kk)
                        .iter()
                        .zip(&z)
                        .map(|(e, zv)| (zv - e) * (zv - e))
                        .sum();
                    if dist < best_d {
                        best_d = dist;
                        best = kk;
                    }
                }
                assert_eq!(fast, best);
            }
        }
    }

    #[test]
    fn ema_decay_one_leaves_codebook_unchanged() {
        let mut cb = Codebook::new(2, 2, vec![0.5, -0.5, 1.5, 2.5]).unwrap();
        let before = cb.codes.clone();
        let z = [10.0, 10.0];
        cb.ema_update(&[(0, &z)], 1.0, 1e-5);
        for (a, b) in cb.codes.iter().zip(&before) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_round_trip_240_30_240() {
        let model = VqSynth::new(tiny_cfg(), 1).unwrap();
        let series = wave(0.05, 1.0, 0.3);
        let tokens = model.encode_tokens(&series);
        assert_eq!(tokens.len(), TOKENS_PER_SERIES);
        let back = model.decode_tokens(&tokens);
        assert_eq!(back.len(), SERIES_LEN);
        let recon = model.reconstruct(&series, QuantizeMode::Codebook);
        assert_eq!(recon.len(), SERIES_LEN);
    }

    #[test]
    fn straight_through_identity_gradients_match_finite_differences() {
        let mut model = VqSynth::new(tiny_cfg(), 3).unwrap();
        let series = wave(0.07, 0.8, 1.1);
        let loss = |m: &VqSynth| -> f64 {
            let y = m.reconstruct(&series, QuantizeMode::Identity);
            y.iter()
                .zip(&series)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / series.len() as f64
        };
        let mut g_enc = vec![0.0; model.enc_params.len()];
        let mut g_dec = vec![0.0; model.dec_params.len()];
        let mut assignments = Vec::new();
        model.accumulate_series(
            &series,
            QuantizeMode::Identity,
            &mut g_enc,
            &mut g_dec,
            &mut assignments,
        );
        let h = 1e-4;
        let ne = model.enc_params.len();
        let nd = model.dec_params.len();
        for idx in [0, ne / 3, ne / 2, ne - 1] {
            let orig = model.enc_params[idx];
            model.enc_params[idx] = orig + h;
            let up = loss(&model);
            model.enc_params[idx] = orig - h;
            let down = loss(&model);
            model.enc_params[idx] = orig;
            let num = (up - down) / (2.0 * h);
            let denom = g_enc[idx].abs().max(num.abs()).max(1e-6);
            assert!(
                (g_enc[idx] - num).abs() / denom <= 1e-4,
                "enc {idx}: {} vs {num}",
                g_enc[idx]
            );
        }
        for idx in [0, nd / 2, nd - 1] {
            let orig = model.dec_params[idx];
            model.dec_params[idx] = orig + h;
            let up = loss(&model);
            model.dec_params[idx] = orig - h;
            let down = loss(&model);
            model.dec_params[idx] = orig;
            let num = (up - down) / (2.0 * h);
            let denom = g_dec[idx].abs().max(num.abs()).max(1e-6);
            assert!(
                (g_dec[idx] - num).abs() / denom <= 1e-4,
                "dec {idx}: {} vs {num}",
                g_dec[idx]
            );
        }
    }

    #[test]
    fn single_series_corpus_is_memorized() {
        let series = wave(0.05, 1.2, 0.0);
        let data: Vec<Vec<f64>> = (0..8).map(|_| series.clone()).collect();
        let cfg = VqConfig {
            stage1_epochs: 200,
            ..tiny_cfg()
        };
        let model = train_vqvae(&data, &cfg, 5).unwrap();
        let mse = model.reconstruction_mse(&data, QuantizeMode::Codebook);
        assert!(mse < 1e-3, "memorization mse {mse}");
    }

    #[test]
    fn doubling_codebook_never_hurts_reconstruction() {
        let data: Vec<Vec<f64>> = (0..12)
            .map(|i| wave(0.04 + 0.004 * i as f64, 1.0, 0.4 * i as f64))
            .collect();
        let small = train_vqvae(&data, &tiny_cfg(), 9)
            .unwrap()
            .reconstruction_mse(&data, QuantizeMode::Codebook);
        let big_cfg = VqConfig {
            codebook_size: 16,
            ..tiny_cfg()
        };
        let big = train_vqvae(&data, &big_cfg, 9)
            .unwrap()
            .reconstruction_mse(&data, QuantizeMode::Codebook);
        assert!(
            big <= small,
            "doubling codebook hurt reconstruction: {small} -> {big}"
        );
    }
}
