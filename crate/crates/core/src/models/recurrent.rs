//! Recurrent networks: plain tanh RNN and LSTM, with hand-derived
//! backpropagation through time.
//!
//! Both families process the window one year at a time and feed the final
//! timestep's top-layer hidden state into a single linear output unit.
//! Parameters live in one flat vector. Per layer the layout is the
//! input-to-hidden matrix, the hidden-to-hidden matrix, then the bias; the
//! LSTM stacks its four gates row-blockwise in i, f, g, o order. The output
//! head (weights then bias) sits at the end.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::trainer::GradientNet;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// out += W x, with W stored row-major as rows x cols.
fn mv_acc(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (wv, xv) in row.iter().zip(x) {
            acc += wv * xv;
        }
        *o += acc;
    }
}

/// out += W^T d.
fn mtv_acc(w: &[f64], cols: usize, d: &[f64], out: &mut [f64]) {
    for (r, dv) in d.iter().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        for (o, wv) in out.iter_mut().zip(row) {
            *o += dv * wv;
        }
    }
}

/// g += d (outer) x.
fn outer_acc(g: &mut [f64], cols: usize, d: &[f64], x: &[f64]) {
    for (r, dv) in d.iter().enumerate() {
        let row = &mut g[r * cols..(r + 1) * cols];
        for (gv, xv) in row.iter_mut().zip(x) {
            *gv += dv * xv;
        }
    }
}

fn add_acc(g: &mut [f64], d: &[f64]) {
    for (gv, dv) in g.iter_mut().zip(d) {
        *gv += dv;
    }
}

// ---------------------------------------------------------------------------
// Plain RNN
// ---------------------------------------------------------------------------

/// Tanh recurrence `h_t = tanh(Wx x_t + Wh h_{t-1} + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnModel {
    pub input_size: usize,
    pub hidden_size: usize,
    pub n_layers: usize,
    pub params: Vec<f64>,
}

impl RnnModel {
    fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_size
        } else {
            self.hidden_size
        }
    }

    fn layer_len(&self, layer: usize) -> usize {
        let h = self.hidden_size;
        h * self.layer_input(layer) + h * h + h
    }

    fn layer_offset(&self, layer: usize) -> usize {
        (0..layer).map(|l| self.layer_len(l)).sum()
    }

    fn head_offset(&self) -> usize {
        self.layer_offset(self.n_layers)
    }

    pub fn new(input_size: usize, n_layers: usize, hidden_size: usize) -> Self {
        let mut model = Self {
            input_size,
            hidden_size,
            n_layers,
            params: Vec::new(),
        };
        let total = model.head_offset() + hidden_size + 1;
        model.params = vec![0.0; total];
        model
    }

    pub fn init_weights<R: Rng>(&mut self, rng: &mut R) {
        let h = self.hidden_size;
        for layer in 0..self.n_layers {
            let i_l = self.layer_input(layer);
            let offset = self.layer_offset(layer);
            let bx = 1.0 / (i_l as f64).sqrt();
            for p in &mut self.params[offset..offset + h * i_l] {
                *p = rng.random_range(-bx..bx);
            }
            let bh = 1.0 / (h as f64).sqrt();
            for p in &mut self.params[offset + h * i_l..offset + h * i_l + h * h] {
                *p = rng.random_range(-bh..bh);
            }
            // biases stay zero
        }
        let head = self.head_offset();
        let bo = 1.0 / (h as f64).sqrt();
        for p in &mut self.params[head..head + h] {
            *p = rng.random_range(-bo..bo);
        }
    }

    /// Hidden states for every (timestep, layer), plus the scalar output.
    fn forward_traced(&self, window: &[Vec<f64>]) -> (Vec<Vec<Vec<f64>>>, f64) {
        let h = self.hidden_size;
        let t_len = window.len();
        let mut states = vec![vec![vec![0.0; h]; self.n_layers]; t_len];
        let zeros = vec![0.0; h];
        for t in 0..t_len {
            for layer in 0..self.n_layers {
                let i_l = self.layer_input(layer);
                let offset = self.layer_offset(layer);
                let w_x = &self.params[offset..offset + h * i_l];
                let w_h = &self.params[offset + h * i_l..offset + h * i_l + h * h];
                let bias = &self.params[offset + h * i_l + h * h..offset + h * i_l + h * h + h];
                let h_prev = if t == 0 { &zeros } else { &states[t - 1][layer] };

                let mut z = bias.to_vec();
                if layer == 0 {
                    mv_acc(w_x, i_l, &window[t], &mut z);
                } else {
                    let below = states[t][layer - 1].clone();
                    mv_acc(w_x, i_l, &below, &mut z);
                }
                mv_acc(w_h, h, h_prev, &mut z);
                for v in &mut z {
                    *v = v.tanh();
                }
                states[t][layer] = z;
            }
        }
        let head = self.head_offset();
        let w_out = &self.params[head..head + h];
        let b_out = self.params[head + h];
        let last = &states[t_len - 1][self.n_layers - 1];
        let out = b_out
            + w_out
                .iter()
                .zip(last)
                .map(|(w, v)| w * v)
                .sum::<f64>();
        (states, out)
    }
}

impl GradientNet for RnnModel {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn predict_window(&self, window: &[Vec<f64>]) -> f64 {
        self.forward_traced(window).1
    }

    fn batch_loss_grad(&self, batch: &[(&[Vec<f64>], f64)], grad: &mut [f64]) -> f64 {
        let h = self.hidden_size;
        let batch_n = batch.len() as f64;
        let head = self.head_offset();
        let mut loss = 0.0;

        for (window, target) in batch {
            let t_len = window.len();
            let (states, out) = self.forward_traced(window);
            let err = out - target;
            loss += err * err / batch_n;
            let d_out = 2.0 * err / batch_n;

            let w_out = &self.params[head..head + h];
            let last = &states[t_len - 1][self.n_layers - 1];
            let (g_head, g_rest) = grad[head..].split_at_mut(h);
            for (g, v) in g_head.iter_mut().zip(last) {
                *g += d_out * v;
            }
            g_rest[0] += d_out;

            let mut dh = vec![vec![vec![0.0; h]; self.n_layers]; t_len];
            for (d, w) in dh[t_len - 1][self.n_layers - 1].iter_mut().zip(w_out) {
                *d = d_out * w;
            }

            let zeros = vec![0.0; h];
            for t in (0..t_len).rev() {
                for layer in (0..self.n_layers).rev() {
                    let i_l = self.layer_input(layer);
                    let offset = self.layer_offset(layer);
                    let w_x = &self.params[offset..offset + h * i_l];
                    let w_h = &self.params[offset + h * i_l..offset + h * i_l + h * h];

                    // dz = dh * (1 - h^2)
                    let state = &states[t][layer];
                    let mut dz = vec![0.0; h];
                    for i in 0..h {
                        dz[i] = dh[t][layer][i] * (1.0 - state[i] * state[i]);
                    }

                    let below_owned;
                    let below: &[f64] = if layer == 0 {
                        &window[t]
                    } else {
                        below_owned = states[t][layer - 1].clone();
                        &below_owned
                    };
                    let h_prev: &[f64] = if t == 0 { &zeros } else { &states[t - 1][layer] };

                    let g_layer = &mut grad[offset..offset + h * i_l + h * h + h];
                    let (g_wx, tail) = g_layer.split_at_mut(h * i_l);
                    let (g_wh, g_b) = tail.split_at_mut(h * h);
                    outer_acc(g_wx, i_l, &dz, below);
                    outer_acc(g_wh, h, &dz, h_prev);
                    add_acc(g_b, &dz);

                    if t > 0 {
                        let mut carry = vec![0.0; h];
                        mtv_acc(w_h, h, &dz, &mut carry);
                        add_acc(&mut dh[t - 1][layer], &carry);
                    }
                    if layer > 0 {
                        let mut down = vec![0.0; i_l];
                        mtv_acc(w_x, i_l, &dz, &mut down);
                        add_acc(&mut dh[t][layer - 1], &down);
                    }
                }
            }
        }
        loss
    }
}

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

/// Borrowed single-layer LSTM cell parameters.
///
/// `w_x` is `4H x input_size`, `w_h` is `4H x H`, `bias` is `4H`, with the
/// gate rows blocked in i, f, g, o order.
#[derive(Debug, Clone, Copy)]
pub struct LstmCellView<'a> {
    pub w_x: &'a [f64],
    pub w_h: &'a [f64],
    pub bias: &'a [f64],
    pub input_size: usize,
    pub hidden_size: usize,
}

struct GateTrace {
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

fn cell_forward(cell: &LstmCellView<'_>, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> GateTrace {
    let h = cell.hidden_size;
    let mut z = cell.bias.to_vec();
    mv_acc(cell.w_x, cell.input_size, x, &mut z);
    mv_acc(cell.w_h, h, h_prev, &mut z);

    let mut trace = GateTrace {
        i: vec![0.0; h],
        f: vec![0.0; h],
        g: vec![0.0; h],
        o: vec![0.0; h],
        c: vec![0.0; h],
        tanh_c: vec![0.0; h],
        h: vec![0.0; h],
    };
    for k in 0..h {
        trace.i[k] = sigmoid(z[k]);
        trace.f[k] = sigmoid(z[h + k]);
        trace.g[k] = z[2 * h + k].tanh();
        trace.o[k] = sigmoid(z[3 * h + k]);
        trace.c[k] = trace.f[k] * c_prev[k] + trace.i[k] * trace.g[k];
        trace.tanh_c[k] = trace.c[k].tanh();
        trace.h[k] = trace.o[k] * trace.tanh_c[k];
    }
    trace
}

/// One step of the standard forget/input/output-gate LSTM cell:
/// `c_t = f . c_prev + i . g`, `h_t = o . tanh(c_t)` with
/// `i, f, o = sigmoid(affine(x, h_prev))` and `g = tanh(affine(x, h_prev))`.
pub fn lstm_cell_step(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    cell: &LstmCellView<'_>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = cell.hidden_size;
    if x.len() != cell.input_size
        || h_prev.len() != h
        || c_prev.len() != h
        || cell.w_x.len() != 4 * h * cell.input_size
        || cell.w_h.len() != 4 * h * h
        || cell.bias.len() != 4 * h
    {
        return Err(Error::ShapeMismatch {
            expected: format!(
                "x[{}], h[{h}], c[{h}], w_x[{}], w_h[{}], bias[{}]",
                cell.input_size,
                4 * h * cell.input_size,
                4 * h * h,
                4 * h
            ),
            actual: format!(
                "x[{}], h[{}], c[{}], w_x[{}], w_h[{}], bias[{}]",
                x.len(),
                h_prev.len(),
                c_prev.len(),
                cell.w_x.len(),
                cell.w_h.len(),
                cell.bias.len()
            ),
        });
    }
    let trace = cell_forward(cell, x, h_prev, c_prev);
    Ok((trace.h, trace.c))
}

/// Gated recurrence with a constant error carousel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub input_size: usize,
    pub hidden_size: usize,
    pub n_layers: usize,
    pub params: Vec<f64>,
}

impl LstmModel {
    fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_size
        } else {
            self.hidden_size
        }
    }

    fn layer_len(&self, layer: usize) -> usize {
        let h = self.hidden_size;
        4 * h * self.layer_input(layer) + 4 * h * h + 4 * h
    }

    fn layer_offset(&self, layer: usize) -> usize {
        (0..layer).map(|l| self.layer_len(l)).sum()
    }

    fn head_offset(&self) -> usize {
        self.layer_offset(self.n_layers)
    }

    pub fn new(input_size: usize, n_layers: usize, hidden_size: usize) -> Self {
        let mut model = Self {
            input_size,
            hidden_size,
            n_layers,
            params: Vec::new(),
        };
        let total = model.head_offset() + hidden_size + 1;
        model.params = vec![0.0; total];
        model
    }

    pub fn init_weights<R: Rng>(&mut self, rng: &mut R) {
        let h = self.hidden_size;
        for layer in 0..self.n_layers {
            let i_l = self.layer_input(layer);
            let offset = self.layer_offset(layer);
            let bx = 1.0 / (i_l as f64).sqrt();
            for p in &mut self.params[offset..offset + 4 * h * i_l] {
                *p = rng.random_range(-bx..bx);
            }
            let bh = 1.0 / (h as f64).sqrt();
            for p in &mut self.params[offset + 4 * h * i_l..offset + 4 * h * i_l + 4 * h * h] {
                *p = rng.random_range(-bh..bh);
            }
        }
        let head = self.head_offset();
        let bo = 1.0 / (h as f64).sqrt();
        for p in &mut self.params[head..head + h] {
            *p = rng.random_range(-bo..bo);
        }
    }

    /// Cell parameter views for one layer.
    pub fn cell_view(&self, layer: usize) -> LstmCellView<'_> {
        let h = self.hidden_size;
        let i_l = self.layer_input(layer);
        let offset = self.layer_offset(layer);
        LstmCellView {
            w_x: &self.params[offset..offset + 4 * h * i_l],
            w_h: &self.params[offset + 4 * h * i_l..offset + 4 * h * i_l + 4 * h * h],
            bias: &self.params
                [offset + 4 * h * i_l + 4 * h * h..offset + 4 * h * i_l + 4 * h * h + 4 * h],
            input_size: i_l,
            hidden_size: h,
        }
    }

    fn forward_traced(&self, window: &[Vec<f64>]) -> (Vec<Vec<GateTrace>>, f64) {
        let h = self.hidden_size;
        let t_len = window.len();
        let zeros = vec![0.0; h];
        let mut traces: Vec<Vec<GateTrace>> = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let mut layer_traces: Vec<GateTrace> = Vec::with_capacity(self.n_layers);
            for layer in 0..self.n_layers {
                let cell = self.cell_view(layer);
                let h_prev: &[f64] = if t == 0 { &zeros } else { &traces[t - 1][layer].h };
                let c_prev: &[f64] = if t == 0 { &zeros } else { &traces[t - 1][layer].c };
                let trace = if layer == 0 {
                    cell_forward(&cell, &window[t], h_prev, c_prev)
                } else {
                    let below = layer_traces[layer - 1].h.clone();
                    cell_forward(&cell, &below, h_prev, c_prev)
                };
                layer_traces.push(trace);
            }
            traces.push(layer_traces);
        }
        let head = self.head_offset();
        let w_out = &self.params[head..head + h];
        let b_out = self.params[head + h];
        let last = &traces[t_len - 1][self.n_layers - 1].h;
        let out = b_out
            + w_out
                .iter()
                .zip(last)
                .map(|(w, v)| w * v)
                .sum::<f64>();
        (traces, out)
    }
}

impl GradientNet for LstmModel {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn predict_window(&self, window: &[Vec<f64>]) -> f64 {
        self.forward_traced(window).1
    }

    fn batch_loss_grad(&self, batch: &[(&[Vec<f64>], f64)], grad: &mut [f64]) -> f64 {
        let h = self.hidden_size;
        let batch_n = batch.len() as f64;
        let head = self.head_offset();
        let mut loss = 0.0;

        for (window, target) in batch {
            let t_len = window.len();
            let (traces, out) = self.forward_traced(window);
            let err = out - target;
            loss += err * err / batch_n;
            let d_out = 2.0 * err / batch_n;

            let w_out = &self.params[head..head + h];
            let last = &traces[t_len - 1][self.n_layers - 1].h;
            let (g_head, g_rest) = grad[head..].split_at_mut(h);
            for (g, v) in g_head.iter_mut().zip(last) {
                *g += d_out * v;
            }
            g_rest[0] += d_out;

            let mut dh = vec![vec![vec![0.0; h]; self.n_layers]; t_len];
            let mut dc = vec![vec![vec![0.0; h]; self.n_layers]; t_len];
            for (d, w) in dh[t_len - 1][self.n_layers - 1].iter_mut().zip(w_out) {
                *d = d_out * w;
            }

            let zeros = vec![0.0; h];
            for t in (0..t_len).rev() {
                for layer in (0..self.n_layers).rev() {
                    let i_l = self.layer_input(layer);
                    let offset = self.layer_offset(layer);
                    let trace = &traces[t][layer];
                    let c_prev: &[f64] = if t == 0 { &zeros } else { &traces[t - 1][layer].c };

                    let mut dz = vec![0.0; 4 * h];
                    let mut dc_prev = vec![0.0; h];
                    for k in 0..h {
                        let dh_k = dh[t][layer][k];
                        let dc_total = dc[t][layer][k]
                            + dh_k * trace.o[k] * (1.0 - trace.tanh_c[k] * trace.tanh_c[k]);
                        let d_o = dh_k * trace.tanh_c[k];
                        let d_i = dc_total * trace.g[k];
                        let d_f = dc_total * c_prev[k];
                        let d_g = dc_total * trace.i[k];
                        dc_prev[k] = dc_total * trace.f[k];
                        dz[k] = d_i * trace.i[k] * (1.0 - trace.i[k]);
                        dz[h + k] = d_f * trace.f[k] * (1.0 - trace.f[k]);
                        dz[2 * h + k] = d_g * (1.0 - trace.g[k] * trace.g[k]);
                        dz[3 * h + k] = d_o * trace.o[k] * (1.0 - trace.o[k]);
                    }

                    let below_owned;
                    let below: &[f64] = if layer == 0 {
                        &window[t]
                    } else {
                        below_owned = traces[t][layer - 1].h.clone();
                        &below_owned
                    };
                    let h_prev: &[f64] = if t == 0 { &zeros } else { &traces[t - 1][layer].h };

                    let g_layer = &mut grad[offset..offset + 4 * h * i_l + 4 * h * h + 4 * h];
                    let (g_wx, tail) = g_layer.split_at_mut(4 * h * i_l);
                    let (g_wh, g_b) = tail.split_at_mut(4 * h * h);
                    outer_acc(g_wx, i_l, &dz, below);
                    outer_acc(g_wh, h, &dz, h_prev);
                    add_acc(g_b, &dz);

                    let w_x = &self.params[offset..offset + 4 * h * i_l];
                    let w_h = &self.params[offset + 4 * h * i_l..offset + 4 * h * i_l + 4 * h * h];
                    if t > 0 {
                        let mut carry = vec![0.0; h];
                        mtv_acc(w_h, h, &dz, &mut carry);
                        add_acc(&mut dh[t - 1][layer], &carry);
                        add_acc(&mut dc[t - 1][layer], &dc_prev);
                    }
                    if layer > 0 {
                        let mut down = vec![0.0; i_l];
                        mtv_acc(w_x, i_l, &dz, &mut down);
                        add_acc(&mut dh[t][layer - 1], &down);
                    }
                }
            }
        }
        loss
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_cell_halves_cell_state() {
        let h = 3;
        let w_x = vec![0.0; 4 * h * 2];
        let w_h = vec![0.0; 4 * h * h];
        let bias = vec![0.0; 4 * h];
        let cell = LstmCellView {
            w_x: &w_x,
            w_h: &w_h,
            bias: &bias,
            input_size: 2,
            hidden_size: h,
        };
        let c_prev = vec![1.0, -2.0, 0.5];
        let (h_t, c_t) = lstm_cell_step(&[0.3, -0.7], &vec![0.0; h], &c_prev, &cell).unwrap();
        for k in 0..h {
            assert!((c_t[k] - 0.5 * c_prev[k]).abs() < 1e-12);
            assert!((h_t[k] - 0.5 * (0.5 * c_prev[k]).tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_forget_gate_preserves_cell_state() {
        let h = 2;
        let w_x = vec![0.0; 4 * h];
        let w_h = vec![0.0; 4 * h * h];
        let mut bias = vec![0.0; 4 * h];
        for k in 0..h {
            bias[h + k] = 100.0; // forget-gate block
        }
        let cell = LstmCellView {
            w_x: &w_x,
            w_h: &w_h,
            bias: &bias,
            input_size: 1,
            hidden_size: h,
        };
        let c_prev = vec![0.8, -1.4];
        let (_, c_t) = lstm_cell_step(&[0.0], &vec![0.0; h], &c_prev, &cell).unwrap();
        // f ~= 1, i = 0.5, g = 0, so c_t ~= c_prev.
        for k in 0..h {
            assert!((c_t[k] - c_prev[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn cell_step_rejects_bad_shapes() {
        let h = 2;
        let w_x = vec![0.0; 4 * h];
        let w_h = vec![0.0; 4 * h * h];
        let bias = vec![0.0; 4 * h];
        let cell = LstmCellView {
            w_x: &w_x,
            w_h: &w_h,
            bias: &bias,
            input_size: 1,
            hidden_size: h,
        };
        assert!(matches!(
            lstm_cell_step(&[0.0, 1.0], &vec![0.0; h], &vec![0.0; h], &cell),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(
            lstm_cell_step(&[0.0], &[0.0], &vec![0.0; h], &cell),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    fn gradient_check<N: GradientNet>(net: &mut N, window: &[Vec<f64>], target: f64) {
        let batch = [(window, target)];
        let n_params = net.params().len();
        let mut grad = vec![0.0; n_params];
        net.batch_loss_grad(&batch, &mut grad);
        let step = 1e-5;
        let mut scratch = vec![0.0; n_params];
        for p in 0..n_params {
            let orig = net.params()[p];
            net.params_mut()[p] = orig + step;
            let up = net.batch_loss_grad(&batch, &mut scratch);
            net.params_mut()[p] = orig - step;
            let down = net.batch_loss_grad(&batch, &mut scratch);
            net.params_mut()[p] = orig;
            let numeric = (up - down) / (2.0 * step);
            let denom = grad[p].abs().max(numeric.abs()).max(1e-6);
            assert!(
                (numeric - grad[p]).abs() / denom < 1e-4,
                "param {p}: analytic {} vs numeric {numeric}",
                grad[p]
            );
        }
    }

    #[test]
    fn rnn_gradients_match_finite_differences() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let mut net = RnnModel::new(3, 2, 5);
        net.init_weights(&mut rng);
        let window: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..3).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        gradient_check(&mut net, &window, 0.37);
    }

    #[test]
    fn lstm_gradients_match_finite_differences() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(18);
        let mut net = LstmModel::new(3, 2, 4);
        net.init_weights(&mut rng);
        let window: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..3).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        gradient_check(&mut net, &window, -0.8);
    }

    #[test]
    fn model_forward_matches_cell_steps() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let mut model = LstmModel::new(3, 1, 4);
        model.init_weights(&mut rng);
        let window: Vec<Vec<f64>> = (0..5)
            .map(|t| vec![t as f64 * 0.1, 0.5 - t as f64 * 0.05, 1.0])
            .collect();

        let cell = model.cell_view(0);
        let mut h = vec![0.0; 4];
        let mut c = vec![0.0; 4];
        for x in &window {
            let (nh, nc) = lstm_cell_step(x, &h, &c, &cell).unwrap();
            h = nh;
            c = nc;
        }
        let head = model.head_offset();
        let manual = model.params[head + 4]
            + model.params[head..head + 4]
                .iter()
                .zip(&h)
                .map(|(w, v)| w * v)
                .sum::<f64>();
        let out = model.predict_window(&window);
        assert!((out - manual).abs() < 1e-12);
    }
}
