//! Minimal dense/recurrent/convolutional building blocks with exact
//! analytic gradients, used by the forecaster and the synthesizer.
//!
//! Models keep every parameter in one flat `Vec<f64>`; each layer spec knows
//! its parameter count and reads a contiguous slice. That layout makes
//! finite-difference checking, checkpointing, and optimizer state trivial.
//! All arithmetic is f64 and sequential, so results are bit-reproducible.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Xavier-uniform initialization for a fan-in/fan-out pair.
pub fn xavier_uniform(rng: &mut ChaCha8Rng, n: usize, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-a..a)).collect()
}

/// Adam optimizer over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

/// Single-layer LSTM over sequences. Parameter block layout:
/// `[w_x (4H x I), w_h (4H x H), b (4H)]`, gate row order i, f, g, o.
#[derive(Debug, Clone, Copy)]
pub struct LstmSpec {
    pub input: usize,
    pub hidden: usize,
}

/// Cached forward pass of one sequence.
pub struct LstmTrace {
    pub xs: Vec<Vec<f64>>,
    /// Per step: activated gates [i, f, g, o], each H wide.
    gates: Vec<Vec<f64>>,
    cells: Vec<Vec<f64>>,
    pub hiddens: Vec<Vec<f64>>,
}

impl LstmSpec {
    pub fn n_params(&self) -> usize {
        4 * self.hidden * (self.input + self.hidden + 1)
    }

    pub fn init(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let h = self.hidden;
        let mut p = Vec::with_capacity(self.n_params());
        p.extend(xavier_uniform(rng, 4 * h * self.input, self.input, h));
        p.extend(xavier_uniform(rng, 4 * h * h, h, h));
        p.extend(vec![0.0; 4 * h]);
        // forget-gate bias starts at 1 to keep early gradients alive
        let (wx, wh) = (4 * h * self.input, 4 * h * h);
        for j in h..2 * h {
            p[wx + wh + j] = 1.0;
        }
        p
    }

    fn split<'a>(&self, params: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let h = self.hidden;
        let wx_len = 4 * h * self.input;
        let wh_len = 4 * h * h;
        (
            &params[..wx_len],
            &params[wx_len..wx_len + wh_len],
            &params[wx_len + wh_len..wx_len + wh_len + 4 * h],
        )
    }

    /// Activated gates `[i, f, g, o]` for one timestep.
    fn gates(&self, params: &[f64], x: &[f64], h_prev: &[f64]) -> Vec<f64> {
        let h = self.hidden;
        let (wx, wh, b) = self.split(params);
        let mut pre = b.to_vec();
        for (row, pre_j) in pre.iter_mut().enumerate() {
            let wx_row = &wx[row * self.input..(row + 1) * self.input];
            for (w, xv) in wx_row.iter().zip(x) {
                *pre_j += w * xv;
            }
            let wh_row = &wh[row * h..(row + 1) * h];
            for (w, hv) in wh_row.iter().zip(h_prev) {
                *pre_j += w * hv;
            }
        }
        let mut gate = vec![0.0; 4 * h];
        for j in 0..h {
            gate[j] = sigmoid(pre[j]);
            gate[h + j] = sigmoid(pre[h + j]);
            gate[2 * h + j] = pre[2 * h + j].tanh();
            gate[3 * h + j] = sigmoid(pre[3 * h + j]);
        }
        gate
    }

    /// Advance one timestep in place; used for incremental decoding.
    pub fn step(&self, params: &[f64], x: &[f64], h_state: &mut [f64], c_state: &mut [f64]) {
        let h = self.hidden;
        let gate = self.gates(params, x, h_state);
        for j in 0..h {
            c_state[j] = gate[h + j] * c_state[j] + gate[j] * gate[2 * h + j];
            h_state[j] = gate[3 * h + j] * c_state[j].tanh();
        }
    }

    /// Run the sequence from zero initial state, caching activations.
    pub fn forward(&self, params: &[f64], xs: &[Vec<f64>]) -> LstmTrace {
        let h = self.hidden;
        let mut gates = Vec::with_capacity(xs.len());
        let mut cells = Vec::with_capacity(xs.len());
        let mut hiddens = Vec::with_capacity(xs.len());
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        for x in xs {
            debug_assert_eq!(x.len(), self.input);
            let gate = self.gates(params, x, &h_prev);
            let mut c = vec![0.0; h];
            let mut h_new = vec![0.0; h];
            for j in 0..h {
                c[j] = gate[h + j] * c_prev[j] + gate[j] * gate[2 * h + j];
                h_new[j] = gate[3 * h + j] * c[j].tanh();
            }
            gates.push(gate);
            cells.push(c.clone());
            hiddens.push(h_new.clone());
            h_prev = h_new;
            c_prev = c;
        }
        LstmTrace {
            xs: xs.to_vec(),
            gates,
            cells,
            hiddens,
        }
    }

    /// Backpropagate through time. `d_hiddens[t]` is the loss gradient
    /// flowing into `h_t` from outside the recurrence (zero vectors where a
    /// step has no direct loss). Accumulates parameter gradients into
    /// `d_params` and returns per-step input gradients.
    pub fn backward(
        &self,
        params: &[f64],
        trace: &LstmTrace,
        d_hiddens: &[Vec<f64>],
        d_params: &mut [f64],
    ) -> Vec<Vec<f64>> {
        let h = self.hidden;
        let steps = trace.xs.len();
        debug_assert_eq!(d_hiddens.len(), steps);
        let (wx, wh, _) = self.split(params);
        let wx_len = 4 * h * self.input;
        let wh_len = 4 * h * h;

        let mut d_xs = vec![vec![0.0; self.input]; steps];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];

        for t in (0..steps).rev() {
            let gate = &trace.gates[t];
            let c = &trace.cells[t];
            let c_prev = if t == 0 {
                None
            } else {
                Some(&trace.cells[t - 1])
            };
            let h_prev = if t == 0 {
                None
            } else {
                Some(&trace.hiddens[t - 1])
            };

            let mut d_pre = vec![0.0; 4 * h];
            for j in 0..h {
                let dh = d_hiddens[t][j] + dh_next[j];
                let tanh_c = c[j].tanh();
                let o = gate[3 * h + j];
                let dc = dh * o * (1.0 - tanh_c * tanh_c) + dc_next[j];
                let i = gate[j];
                let f = gate[h + j];
                let g = gate[2 * h + j];
                let cp = c_prev.map_or(0.0, |v| v[j]);
                d_pre[j] = dc * g * i * (1.0 - i);
                d_pre[h + j] = dc * cp * f * (1.0 - f);
                d_pre[2 * h + j] = dc * i * (1.0 - g * g);
                d_pre[3 * h + j] = dh * tanh_c * o * (1.0 - o);
                dc_next[j] = dc * f;
            }

            let x = &trace.xs[t];
            for row in 0..4 * h {
                let dp = d_pre[row];
                if dp == 0.0 {
                    continue;
                }
                let wx_off = row * self.input;
                for (k, xv) in x.iter().enumerate() {
                    d_params[wx_off + k] += dp * xv;
                }
                if let Some(hp) = h_prev {
                    let wh_off = wx_len + row * h;
                    for (k, hv) in hp.iter().enumerate() {
                        d_params[wh_off + k] += dp * hv;
                    }
                }
                d_params[wx_len + wh_len + row] += dp;
            }

            // gradients to x_t and h_{t-1}
            for row in 0..4 * h {
                let dp = d_pre[row];
                if dp == 0.0 {
                    continue;
                }
                let wx_row = &wx[row * self.input..(row + 1) * self.input];
                for (k, w) in wx_row.iter().enumerate() {
                    d_xs[t][k] += dp * w;
                }
            }
            let mut dh_prev = vec![0.0; h];
            for row in 0..4 * h {
                let dp = d_pre[row];
                if dp == 0.0 {
                    continue;
                }
                let wh_row = &wh[row * h..(row + 1) * h];
                for (k, w) in wh_row.iter().enumerate() {
                    dh_prev[k] += dp * w;
                }
            }
            dh_next = dh_prev;
        }
        d_xs
    }
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

/// Affine map `y = W x + b`; parameters `[W (out x in), b (out)]`.
#[derive(Debug, Clone, Copy)]
pub struct DenseSpec {
    pub input: usize,
    pub output: usize,
}

impl DenseSpec {
    pub fn n_params(&self) -> usize {
        self.output * (self.input + 1)
    }

    pub fn init(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut p = xavier_uniform(rng, self.output * self.input, self.input, self.output);
        p.extend(vec![0.0; self.output]);
        p
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let w = &params[..self.output * self.input];
        let b = &params[self.output * self.input..];
        (0..self.output)
            .map(|o| {
                b[o]
                    + w[o * self.input..(o + 1) * self.input]
                        .iter()
                        .zip(x)
                        .map(|(wv, xv)| wv * xv)
                        .sum::<f64>()
            })
            .collect()
    }

    /// Returns the gradient w.r.t. `x`; accumulates into `d_params`.
    pub fn backward(
        &self,
        params: &[f64],
        x: &[f64],
        d_out: &[f64],
        d_params: &mut [f64],
    ) -> Vec<f64> {
        let w = &params[..self.output * self.input];
        let mut d_x = vec![0.0; self.input];
        for o in 0..self.output {
            let g = d_out[o];
            if g == 0.0 {
                continue;
            }
            for k in 0..self.input {
                d_params[o * self.input + k] += g * x[k];
                d_x[k] += g * w[o * self.input + k];
            }
            d_params[self.output * self.input + o] += g;
        }
        d_x
    }
}

// ---------------------------------------------------------------------------
// 1-D convolutions
// ---------------------------------------------------------------------------

/// Channel-major 1-D signal: `data[ch * len + t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub channels: usize,
    pub len: usize,
    pub data: Vec<f64>,
}

impl Signal {
    pub fn zeros(channels: usize, len: usize) -> Self {
        Signal {
            channels,
            len,
            data: vec![0.0; channels * len],
        }
    }

    pub fn from_vec(channels: usize, len: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), channels * len);
        Signal {
            channels,
            len,
            data,
        }
    }

    pub fn at(&self, ch: usize, t: usize) -> f64 {
        self.data[ch * self.len + t]
    }
}

/// Strided 1-D convolution. Parameters `[w (out_ch x in_ch x k), b (out_ch)]`.
#[derive(Debug, Clone, Copy)]
pub struct Conv1dSpec {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv1dSpec {
    pub fn n_params(&self) -> usize {
        self.out_ch * self.in_ch * self.kernel + self.out_ch
    }

    pub fn out_len(&self, in_len: usize) -> usize {
        (in_len + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn init(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let fan_in = self.in_ch * self.kernel;
        let fan_out = self.out_ch * self.kernel;
        let mut p = xavier_uniform(rng, self.out_ch * self.in_ch * self.kernel, fan_in, fan_out);
        p.extend(vec![0.0; self.out_ch]);
        p
    }

    pub fn forward(&self, params: &[f64], x: &Signal) -> Signal {
        debug_assert_eq!(x.channels, self.in_ch);
        let out_len = self.out_len(x.len);
        let w_len = self.out_ch * self.in_ch * self.kernel;
        let (w, b) = params.split_at(w_len);
        let mut out = Signal::zeros(self.out_ch, out_len);
        for oc in 0..self.out_ch {
            for j in 0..out_len {
                let mut acc = b[oc];
                for ic in 0..self.in_ch {
                    let w_off = (oc * self.in_ch + ic) * self.kernel;
                    for t in 0..self.kernel {
                        let src = j * self.stride + t;
                        if src < self.pad || src - self.pad >= x.len {
                            continue;
                        }
                        acc += w[w_off + t] * x.at(ic, src - self.pad);
                    }
                }
                out.data[oc * out_len + j] = acc;
            }
        }
        out
    }

    pub fn backward(
        &self,
        params: &[f64],
        x: &Signal,
        d_out: &Signal,
        d_params: &mut [f64],
    ) -> Signal {
        let out_len = self.out_len(x.len);
        let w_len = self.out_ch * self.in_ch * self.kernel;
        let w = &params[..w_len];
        let mut d_x = Signal::zeros(self.in_ch, x.len);
        for oc in 0..self.out_ch {
            for j in 0..out_len {
                let g = d_out.data[oc * out_len + j];
                if g == 0.0 {
                    continue;
                }
                d_params[w_len + oc] += g;
                for ic in 0..self.in_ch {
                    let w_off = (oc * self.in_ch + ic) * self.kernel;
                    for t in 0..self.kernel {
                        let src = j * self.stride + t;
                        if src < self.pad || src - self.pad >= x.len {
                            continue;
                        }
                        let xi = src - self.pad;
                        d_params[w_off + t] += g * x.at(ic, xi);
                        d_x.data[ic * x.len + xi] += g * w[w_off + t];
                    }
                }
            }
        }
        d_x
    }
}

/// Strided transposed 1-D convolution (fractionally-strided upsampling).
/// Parameters `[w (in_ch x out_ch x k), b (out_ch)]`.
#[derive(Debug, Clone, Copy)]
pub struct ConvT1dSpec {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvT1dSpec {
    pub fn n_params(&self) -> usize {
        self.in_ch * self.out_ch * self.kernel + self.out_ch
    }

    pub fn out_len(&self, in_len: usize) -> usize {
        (in_len - 1) * self.stride + self.kernel - 2 * self.pad
    }

    pub fn init(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let fan_in = self.in_ch * self.kernel;
        let fan_out = self.out_ch * self.kernel;
        let mut p = xavier_uniform(rng, self.in_ch * self.out_ch * self.kernel, fan_in, fan_out);
        p.extend(vec![0.0; self.out_ch]);
        p
    }

    pub fn forward(&self, params: &[f64], x: &Signal) -> Signal {
        debug_assert_eq!(x.channels, self.in_ch);
        let out_len = self.out_len(x.len);
        let w_len = self.in_ch * self.out_ch * self.kernel;
        let (w, b) = params.split_at(w_len);
        let mut out = Signal::zeros(self.out_ch, out_len);
        for oc in 0..self.out_ch {
            for j in 0..out_len {
                out.data[oc * out_len + j] = b[oc];
            }
        }
        for ic in 0..self.in_ch {
            for i in 0..x.len {
                let xv = x.at(ic, i);
                if xv == 0.0 {
                    continue;
                }
                for oc in 0..self.out_ch {
                    let w_off = (ic * self.out_ch + oc) * self.kernel;
                    for t in 0..self.kernel {
                        let j = i * self.stride + t;
                        if j < self.pad || j - self.pad >= out_len {
                            continue;
                        }
                        out.data[oc * out_len + (j - self.pad)] += w[w_off + t] * xv;
                    }
                }
            }
        }
        out
    }

    pub fn backward(
        &self,
        params: &[f64],
        x: &Signal,
        d_out: &Signal,
        d_params: &mut [f64],
    ) -> Signal {
        let out_len = self.out_len(x.len);
        let w_len = self.in_ch * self.out_ch * self.kernel;
        let w = &params[..w_len];
        let mut d_x = Signal::zeros(self.in_ch, x.len);
        for oc in 0..self.out_ch {
            for j in 0..out_len {
                d_params[w_len + oc] += d_out.data[oc * out_len + j];
            }
        }
        for ic in 0..self.in_ch {
            for i in 0..x.len {
                let xv = x.at(ic, i);
                for oc in 0..self.out_ch {
                    let w_off = (ic * self.out_ch + oc) * self.kernel;
                    for t in 0..self.kernel {
                        let j = i * self.stride + t;
                        if j < self.pad || j - self.pad >= out_len {
                            continue;
                        }
                        let g = d_out.data[oc * out_len + (j - self.pad)];
                        d_params[w_off + t] += g * xv;
                        d_x.data[ic * x.len + i] += g * w[w_off + t];
                    }
                }
            }
        }
        d_x
    }
}

/// In-place tanh; returns the outputs needed by the backward pass. Smooth
/// everywhere, so finite-difference gradient checks hold at any point.
pub fn tanh_act(x: &mut Signal) -> Vec<f64> {
    x.data
        .iter_mut()
        .map(|v| {
            *v = v.tanh();
            *v
        })
        .collect()
}

pub fn tanh_backward(d: &mut Signal, outputs: &[f64]) {
    for (g, y) in d.data.iter_mut().zip(outputs) {
        *g *= 1.0 - y * y;
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|v| v / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    /// Central finite-difference gradient of `f` w.r.t. `params[idx]`.
    fn fd_grad(params: &mut [f64], idx: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let h = 1e-4;
        let orig = params[idx];
        params[idx] = orig + h;
        let up = f(params);
        params[idx] = orig - h;
        let down = f(params);
        params[idx] = orig;
        (up - down) / (2.0 * h)
    }

    fn assert_close(analytic: f64, numeric: f64, what: &str) {
        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        assert!(
            (analytic - numeric).abs() / denom <= 1e-4,
            "{what}: analytic {analytic} vs numeric {numeric}"
        );
    }

    #[test]
    fn lstm_gradients_match_finite_differences() {
        let spec = LstmSpec { input: 2, hidden: 5 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = spec.init(&mut rng);
        let xs: Vec<Vec<f64>> = (0..7)
            .map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        // loss: sum of squares of every hidden output
        let loss = |p: &[f64]| -> f64 {
            let tr = spec.forward(p, &xs);
            tr.hiddens.iter().flatten().map(|v| v * v).sum()
        };
        let trace = spec.forward(&params, &xs);
        let d_h: Vec<Vec<f64>> = trace.hiddens.iter().map(|h| h.iter().map(|v| 2.0 * v).collect()).collect();
        let mut d_params = vec![0.0; spec.n_params()];
        spec.backward(&params, &trace, &d_h, &mut d_params);
        let n = spec.n_params();
        for idx in [0, 1, n / 3, n / 2, 2 * n / 3, n - 1, n - 5] {
            let num = fd_grad(&mut params, idx, loss);
            assert_close(d_params[idx], num, &format!("lstm param {idx}"));
        }
    }

    #[test]
    fn lstm_input_gradients_match_finite_differences() {
        let spec = LstmSpec { input: 3, hidden: 4 };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let params = spec.init(&mut rng);
        let mut xs: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let loss = |xs: &[Vec<f64>]| -> f64 {
            let tr = spec.forward(&params, xs);
            tr.hiddens.last().unwrap().iter().map(|v| v * v).sum()
        };
        let trace = spec.forward(&params, &xs);
        let mut d_h = vec![vec![0.0; 4]; 5];
        d_h[4] = trace.hiddens[4].iter().map(|v| 2.0 * v).collect();
        let mut d_params = vec![0.0; spec.n_params()];
        let d_xs = spec.backward(&params, &trace, &d_h, &mut d_params);
        for (t, k) in [(0, 0), (2, 1), (4, 2)] {
            let h = 1e-4;
            let orig = xs[t][k];
            xs[t][k] = orig + h;
            let up = loss(&xs);
            xs[t][k] = orig - h;
            let down = loss(&xs);
            xs[t][k] = orig;
            assert_close(d_xs[t][k], (up - down) / (2.0 * h), &format!("input ({t},{k})"));
        }
    }

    #[test]
    fn dense_gradients_match_finite_differences() {
        let spec = DenseSpec { input: 4, output: 3 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut params = spec.init(&mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |p: &[f64]| spec.forward(p, &x).iter().map(|v| v * v).sum::<f64>();
        let y = spec.forward(&params, &x);
        let d_out: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        let mut d_params = vec![0.0; spec.n_params()];
        let d_x = spec.backward(&params, &x, &d_out, &mut d_params);
        for idx in 0..spec.n_params() {
            let num = fd_grad(&mut params, idx, loss);
            assert_close(d_params[idx], num, &format!("dense param {idx}"));
        }
        // input gradient via perturbation
        let mut x2 = x.clone();
        let h = 1e-4;
        x2[1] += h;
        let up: f64 = spec.forward(&params, &x2).iter().map(|v| v * v).sum();
        x2[1] -= 2.0 * h;
        let down: f64 = spec.forward(&params, &x2).iter().map(|v| v * v).sum();
        assert_close(d_x[1], (up - down) / (2.0 * h), "dense input 1");
    }

    #[test]
    fn conv_shapes_halve_and_double() {
        let conv = Conv1dSpec { in_ch: 1, out_ch: 3, kernel: 4, stride: 2, pad: 1 };
        assert_eq!(conv.out_len(240), 120);
        let convt = ConvT1dSpec { in_ch: 3, out_ch: 1, kernel: 4, stride: 2, pad: 1 };
        assert_eq!(convt.out_len(120), 240);
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let spec = Conv1dSpec { in_ch: 2, out_ch: 3, kernel: 4, stride: 2, pad: 1 };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut params = spec.init(&mut rng);
        let x = Signal::from_vec(2, 12, (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let loss = |p: &[f64]| spec.forward(p, &x).data.iter().map(|v| v * v).sum::<f64>();
        let out = spec.forward(&params, &x);
        let d_out = Signal::from_vec(3, out.len, out.data.iter().map(|v| 2.0 * v).collect());
        let mut d_params = vec![0.0; spec.n_params()];
        let d_x = spec.backward(&params, &x, &d_out, &mut d_params);
        for idx in 0..spec.n_params() {
            let num = fd_grad(&mut params, idx, loss);
            assert_close(d_params[idx], num, &format!("conv param {idx}"));
        }
        // spot-check input gradient
        let mut x2 = x.clone();
        let h = 1e-4;
        x2.data[5] += h;
        let up: f64 = spec.forward(&params, &x2).data.iter().map(|v| v * v).sum();
        x2.data[5] -= 2.0 * h;
        let down: f64 = spec.forward(&params, &x2).data.iter().map(|v| v * v).sum();
        assert_close(d_x.data[5], (up - down) / (2.0 * h), "conv input 5");
    }

    #[test]
    fn convt_gradients_match_finite_differences() {
        let spec = ConvT1dSpec { in_ch: 3, out_ch: 2, kernel: 4, stride: 2, pad: 1 };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut params = spec.init(&mut rng);
        let x = Signal::from_vec(3, 6, (0..18).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let loss = |p: &[f64]| spec.forward(p, &x).data.iter().map(|v| v * v).sum::<f64>();
        let out = spec.forward(&params, &x);
        let d_out = Signal::from_vec(2, out.len, out.data.iter().map(|v| 2.0 * v).collect());
        let mut d_params = vec![0.0; spec.n_params()];
        let d_x = spec.backward(&params, &x, &d_out, &mut d_params);
        for idx in 0..spec.n_params() {
            let num = fd_grad(&mut params, idx, loss);
            assert_close(d_params[idx], num, &format!("convt param {idx}"));
        }
        let mut x2 = x.clone();
        let h = 1e-4;
        x2.data[7] += h;
        let up: f64 = spec.forward(&params, &x2).data.iter().map(|v| v * v).sum();
        x2.data[7] -= 2.0 * h;
        let down: f64 = spec.forward(&params, &x2).data.iter().map(|v| v * v).sum();
        assert_close(d_x.data[7], (up - down) / (2.0 * h), "convt input 7");
    }

    #[test]
    fn adam_converges_on_quadratic() {
        let mut params = vec![5.0, -3.0];
        let mut adam = Adam::new(2, 0.05);
        for _ in 0..2000 {
            let grads: Vec<f64> = params.iter().map(|p| 2.0 * (p - 1.0)).collect();
            adam.step(&mut params, &grads);
        }
        assert!((params[0] - 1.0).abs() < 1e-3);
        assert!((params[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1.0, -2.0, 0.5, 3.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|v| *v > 0.0));
    }
}
