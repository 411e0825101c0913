//! Bidirectional LSTM: forward pass, backpropagation through time, and
//! momentum SGD updates.
//!
//! Each direction owns its gate weights; the two hidden streams are
//! concatenated and fed through one shared linear projection, followed by a
//! row softmax so every timestep emits a distribution over the C concept
//! channels plus the blank channel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{softmax_rows, Matrix};
use crate::rng::Rng;

/// Weights for one gate: input projection, recurrent projection, bias.
#[derive(Clone, Debug)]
pub struct GateBlock {
    pub w_x: Matrix, // hidden x input_dim
    pub w_h: Matrix, // hidden x hidden
    pub b: Matrix,   // 1 x hidden
}

impl GateBlock {
    fn zeros(input_dim: usize, hidden: usize) -> Self {
        GateBlock {
            w_x: Matrix::zeros(hidden, input_dim),
            w_h: Matrix::zeros(hidden, hidden),
            b: Matrix::zeros(1, hidden),
        }
    }
}

/// Gate weights for one scan direction.
#[derive(Clone, Debug)]
pub struct DirectionParams {
    pub input_gate: GateBlock,
    pub forget_gate: GateBlock,
    pub output_gate: GateBlock,
    pub cell_gate: GateBlock,
}

impl DirectionParams {
    fn zeros(input_dim: usize, hidden: usize) -> Self {
        DirectionParams {
            input_gate: GateBlock::zeros(input_dim, hidden),
            forget_gate: GateBlock::zeros(input_dim, hidden),
            output_gate: GateBlock::zeros(input_dim, hidden),
            cell_gate: GateBlock::zeros(input_dim, hidden),
        }
    }

    fn gates(&self) -> [&GateBlock; 4] {
        [
            &self.input_gate,
            &self.forget_gate,
            &self.output_gate,
            &self.cell_gate,
        ]
    }

    fn gates_mut(&mut self) -> [&mut GateBlock; 4] {
        [
            &mut self.input_gate,
            &mut self.forget_gate,
            &mut self.output_gate,
            &mut self.cell_gate,
        ]
    }
}

const GATE_TAGS: [&str; 4] = ["i", "f", "o", "g"];

/// All parameters of one bidirectional network, including the shared output
/// projection. Gradients use the same shape family.
#[derive(Clone, Debug)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden: usize,
    /// Output channels: C concept channels plus the trailing blank.
    pub classes: usize,
    pub fwd: DirectionParams,
    pub rev: DirectionParams,
    pub w_hz: Matrix, // classes x 2*hidden
    pub b_z: Matrix,  // 1 x classes
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize, classes: usize) -> Self {
        LstmParams {
            input_dim,
            hidden,
            classes,
            fwd: DirectionParams::zeros(input_dim, hidden),
            rev: DirectionParams::zeros(input_dim, hidden),
            w_hz: Matrix::zeros(classes, 2 * hidden),
            b_z: Matrix::zeros(1, classes),
        }
    }

    pub fn same_dims(&self, other: &LstmParams) -> bool {
        self.input_dim == other.input_dim
            && self.hidden == other.hidden
            && self.classes == other.classes
    }

    /// Every tensor, weights and biases, in a fixed order. The order is part
    /// of the checkpoint format and of the initialization draw sequence.
    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut out = Vec::with_capacity(26);
        for dir in [&self.fwd, &self.rev] {
            for g in dir.gates() {
                out.push(&g.w_x);
                out.push(&g.w_h);
                out.push(&g.b);
            }
        }
        out.push(&self.w_hz);
        out.push(&self.b_z);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::with_capacity(26);
        let (fwd, rev, w_hz, b_z) = (
            &mut self.fwd,
            &mut self.rev,
            &mut self.w_hz,
            &mut self.b_z,
        );
        for dir in [fwd, rev] {
            for g in dir.gates_mut() {
                out.push(&mut g.w_x);
                out.push(&mut g.w_h);
                out.push(&mut g.b);
            }
        }
        out.push(w_hz);
        out.push(b_z);
        out
    }

    /// Tensor names matching [`tensors`](Self::tensors) order, used for
    /// checkpoint files.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(26);
        for dir in ["fwd", "rev"] {
            for gate in GATE_TAGS {
                out.push(format!("{dir}_w_x{gate}"));
                out.push(format!("{dir}_w_h{gate}"));
                out.push(format!("{dir}_b_{gate}"));
            }
        }
        out.push("w_hz".to_string());
        out.push("b_z".to_string());
        out
    }
}

/// Weights uniform in (-0.1, 0.1), biases zero. The draw order is the
/// weight-tensor order of [`LstmParams::tensors`], filled row-major.
pub fn init_params(rng: &mut Rng, input_dim: usize, hidden: usize, classes: usize) -> LstmParams {
    let mut params = LstmParams::zeros(input_dim, hidden, classes);
    for m in params.tensors_mut() {
        if m.rows() == 1 {
            continue; // bias rows stay zero
        }
        for v in m.data_mut() {
            *v = rng.uniform(-0.1, 0.1);
        }
    }
    params
}

/// Per-timestep activations of one direction, indexed by input timestep.
#[derive(Clone, Debug)]
pub struct DirectionCache {
    pub i: Matrix,
    pub f: Matrix,
    pub o: Matrix,
    pub g: Matrix,
    pub c: Matrix,
    pub h: Matrix,
}

impl DirectionCache {
    fn zeros(t_len: usize, hidden: usize) -> Self {
        DirectionCache {
            i: Matrix::zeros(t_len, hidden),
            f: Matrix::zeros(t_len, hidden),
            o: Matrix::zeros(t_len, hidden),
            g: Matrix::zeros(t_len, hidden),
            c: Matrix::zeros(t_len, hidden),
            h: Matrix::zeros(t_len, hidden),
        }
    }
}

/// Everything the backward pass needs: gate activations per direction, the
/// input sequence, and the pre-softmax projection outputs.
#[derive(Clone, Debug)]
pub struct LstmCache {
    pub fwd: DirectionCache,
    pub rev: DirectionCache,
    pub x: Matrix,
    pub pre_activation: Matrix,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// out[k] = b[k] + w_x[k]·x + w_h[k]·h
fn gate_affine(gate: &GateBlock, x: &[f64], h: &[f64], out: &mut [f64]) {
    for (k, slot) in out.iter_mut().enumerate() {
        let mut acc = gate.b.get(0, k);
        for (w, xv) in gate.w_x.row(k).iter().zip(x) {
            acc += w * xv;
        }
        for (w, hv) in gate.w_h.row(k).iter().zip(h) {
            acc += w * hv;
        }
        *slot = acc;
    }
}

fn run_direction(params: &DirectionParams, x: &Matrix, reverse: bool) -> DirectionCache {
    let t_len = x.rows();
    let hidden = params.input_gate.w_h.rows();
    let mut cache = DirectionCache::zeros(t_len, hidden);
    let mut h_prev = vec![0.0; hidden];
    let mut c_prev = vec![0.0; hidden];
    let mut a_i = vec![0.0; hidden];
    let mut a_f = vec![0.0; hidden];
    let mut a_o = vec![0.0; hidden];
    let mut a_g = vec![0.0; hidden];

    let mut scan = |t: usize| {
        let xt = x.row(t);
        gate_affine(&params.input_gate, xt, &h_prev, &mut a_i);
        gate_affine(&params.forget_gate, xt, &h_prev, &mut a_f);
        gate_affine(&params.output_gate, xt, &h_prev, &mut a_o);
        gate_affine(&params.cell_gate, xt, &h_prev, &mut a_g);
        for k in 0..hidden {
            let i = sigmoid(a_i[k]);
            let f = sigmoid(a_f[k]);
            let o = sigmoid(a_o[k]);
            let g = a_g[k].tanh();
            let c = f * c_prev[k] + i * g;
            let h = o * c.tanh();
            cache.i.set(t, k, i);
            cache.f.set(t, k, f);
            cache.o.set(t, k, o);
            cache.g.set(t, k, g);
            cache.c.set(t, k, c);
            cache.h.set(t, k, h);
            h_prev[k] = h;
            c_prev[k] = c;
        }
    };

    if reverse {
        for t in (0..t_len).rev() {
            scan(t);
        }
    } else {
        for t in 0..t_len {
            scan(t);
        }
    }
    cache
}

/// Forward pass. Returns per-timestep channel distributions (softmax over
/// the shared projection of both directions' hidden states) and the cache
/// for backpropagation.
pub fn lstm_forward(params: &LstmParams, x: &Matrix) -> Result<(Matrix, LstmCache)> {
    if x.cols() != params.input_dim {
        return Err(Error::ShapeMismatch(format!(
            "input has {} features, network expects {}",
            x.cols(),
            params.input_dim
        )));
    }
    if x.rows() == 0 {
        return Err(Error::EmptyInput("lstm_forward: zero timesteps"));
    }
    if !x.all_finite() {
        return Err(Error::NonFinite("lstm_forward input"));
    }

    let fwd = run_direction(&params.fwd, x, false);
    let rev = run_direction(&params.rev, x, true);

    let t_len = x.rows();
    let hidden = params.hidden;
    let mut pre = Matrix::zeros(t_len, params.classes);
    for t in 0..t_len {
        let hf = fwd.h.row(t);
        let hr = rev.h.row(t);
        let out = pre.row_mut(t);
        for (c, slot) in out.iter_mut().enumerate() {
            let w = params.w_hz.row(c);
            let mut acc = params.b_z.get(0, c);
            for (j, &hv) in hf.iter().enumerate() {
                acc += w[j] * hv;
            }
            for (j, &hv) in hr.iter().enumerate() {
                acc += w[hidden + j] * hv;
            }
            *slot = acc;
        }
    }
    let z = softmax_rows(&pre)?;
    Ok((
        z,
        LstmCache {
            fwd,
            rev,
            x: x.clone(),
            pre_activation: pre,
        },
    ))
}

fn backprop_direction(
    params: &DirectionParams,
    cache: &DirectionCache,
    x: &Matrix,
    dh_ext: &Matrix,
    reverse: bool,
    grads: &mut DirectionParams,
) {
    let t_len = x.rows();
    let hidden = dh_ext.cols();
    // Scan order used by the forward pass; BPTT walks it backwards, so the
    // "previous" step of timestep t is t-1 for the forward direction and
    // t+1 for the reverse direction.
    let order: Vec<usize> = if reverse {
        (0..t_len).rev().collect()
    } else {
        (0..t_len).collect()
    };

    let mut dh_carry = vec![0.0; hidden];
    let mut dc_carry = vec![0.0; hidden];
    let mut dpre = [
        vec![0.0; hidden],
        vec![0.0; hidden],
        vec![0.0; hidden],
        vec![0.0; hidden],
    ];

    for s in (0..t_len).rev() {
        let t = order[s];
        let prev = if s == 0 { None } else { Some(order[s - 1]) };
        for k in 0..hidden {
            let i = cache.i.get(t, k);
            let f = cache.f.get(t, k);
            let o = cache.o.get(t, k);
            let g = cache.g.get(t, k);
            let tanh_c = cache.c.get(t, k).tanh();
            let dh = dh_ext.get(t, k) + dh_carry[k];
            let dc = dc_carry[k] + dh * o * (1.0 - tanh_c * tanh_c);
            let c_prev = prev.map_or(0.0, |tp| cache.c.get(tp, k));
            dpre[0][k] = dc * g * i * (1.0 - i);
            dpre[1][k] = dc * c_prev * f * (1.0 - f);
            dpre[2][k] = dh * tanh_c * o * (1.0 - o);
            dpre[3][k] = dc * i * (1.0 - g * g);
            dc_carry[k] = dc * f;
        }
        let xt = x.row(t);
        dh_carry.iter_mut().for_each(|v| *v = 0.0);
        for (gate_idx, (gate_grads, gate_params)) in
            grads.gates_mut().into_iter().zip(params.gates()).enumerate()
        {
            let d = &dpre[gate_idx];
            for k in 0..hidden {
                let dk = d[k];
                gate_grads.b.row_mut(0)[k] += dk;
                for (w, xv) in gate_grads.w_x.row_mut(k).iter_mut().zip(xt) {
                    *w += dk * xv;
                }
                if let Some(tp) = prev {
                    let hp = cache.h.row(tp);
                    for (w, hv) in gate_grads.w_h.row_mut(k).iter_mut().zip(hp) {
                        *w += dk * hv;
                    }
                }
                for (carry, w) in dh_carry.iter_mut().zip(gate_params.w_h.row(k)) {
                    *carry += w * dk;
                }
            }
        }
    }
}

/// Exact BPTT through the softmax projection and both directions.
///
/// `delta` is the loss derivative with respect to the pre-softmax
/// activations, i.e. `z - y` for a distribution target `y`.
pub fn lstm_backward(params: &LstmParams, cache: &LstmCache, delta: &Matrix) -> Result<LstmParams> {
    let t_len = cache.x.rows();
    if cache.x.cols() != params.input_dim
        || cache.fwd.h.cols() != params.hidden
        || cache.rev.h.cols() != params.hidden
        || cache.fwd.h.rows() != t_len
    {
        return Err(Error::ShapeMismatch(
            "cache does not match network dimensions".to_string(),
        ));
    }
    if delta.rows() != t_len || delta.cols() != params.classes {
        return Err(Error::ShapeMismatch(format!(
            "delta is {}x{}, expected {}x{}",
            delta.rows(),
            delta.cols(),
            t_len,
            params.classes
        )));
    }

    let hidden = params.hidden;
    let mut grads = LstmParams::zeros(params.input_dim, hidden, params.classes);
    let mut dh_fwd = Matrix::zeros(t_len, hidden);
    let mut dh_rev = Matrix::zeros(t_len, hidden);

    for t in 0..t_len {
        let d = delta.row(t);
        let hf = cache.fwd.h.row(t);
        let hr = cache.rev.h.row(t);
        let dhf = dh_fwd.row_mut(t);
        let dhr = dh_rev.row_mut(t);
        for (c, &dv) in d.iter().enumerate() {
            grads.b_z.row_mut(0)[c] += dv;
            let wg = grads.w_hz.row_mut(c);
            for (j, &hv) in hf.iter().enumerate() {
                wg[j] += dv * hv;
            }
            for (j, &hv) in hr.iter().enumerate() {
                wg[hidden + j] += dv * hv;
            }
            let w = params.w_hz.row(c);
            for j in 0..hidden {
                dhf[j] += dv * w[j];
                dhr[j] += dv * w[hidden + j];
            }
        }
    }

    backprop_direction(&params.fwd, &cache.fwd, &cache.x, &dh_fwd, false, &mut grads.fwd);
    backprop_direction(&params.rev, &cache.rev, &cache.x, &dh_rev, true, &mut grads.rev);
    Ok(grads)
}

/// velocity <- momentum * velocity - lr * grad; params <- params + velocity
pub fn apply_momentum_sgd(
    params: &mut LstmParams,
    grads: &LstmParams,
    velocity: &mut LstmParams,
    lr: f64,
    momentum: f64,
) -> Result<()> {
    if !params.same_dims(grads) || !params.same_dims(velocity) {
        return Err(Error::ShapeMismatch(
            "params, grads and velocity must share dimensions".to_string(),
        ));
    }
    for ((p, g), v) in params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(velocity.tensors_mut())
    {
        for ((pv, gv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
            *vv = momentum * *vv - lr * gv;
            *pv += *vv;
        }
    }
    Ok(())
}

/// Hyperparameters of the two networks and the concept-vector step size.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub hidden_visual: usize,
    pub hidden_audio: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub concept_learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_visual: 40,
            hidden_audio: 100,
            learning_rate: 1e-4,
            momentum: 0.9,
            concept_learning_rate: 1e-3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_visual == 0 || self.hidden_audio == 0 {
            return Err(Error::Config("hidden sizes must be positive".to_string()));
        }
        if self.learning_rate <= 0.0 || self.concept_learning_rate <= 0.0 {
            return Err(Error::Config("learning rates must be positive".to_string()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".to_string()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_input(rng: &mut Rng, t_len: usize, dim: usize) -> Matrix {
        let mut x = Matrix::zeros(t_len, dim);
        for v in x.data_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
        x
    }

    #[test]
    fn zero_params_fixed_point() {
        let params = LstmParams::zeros(3, 4, 5);
        let x = tiny_input(&mut Rng::new(0), 6, 3);
        let (z, cache) = lstm_forward(&params, &x).unwrap();
        for t in 0..6 {
            for k in 0..4 {
                assert_eq!(cache.fwd.i.get(t, k), 0.5);
                assert_eq!(cache.fwd.f.get(t, k), 0.5);
                assert_eq!(cache.fwd.o.get(t, k), 0.5);
                assert_eq!(cache.fwd.g.get(t, k), 0.0);
                assert_eq!(cache.fwd.c.get(t, k), 0.0);
                assert_eq!(cache.fwd.h.get(t, k), 0.0);
            }
            for c in 0..5 {
                assert!((z.get(t, c) - 0.2).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn scalar_hand_trace() {
        // n=1, H=1, two classes; T=1 so recurrent terms drop out.
        let mut p = LstmParams::zeros(1, 1, 2);
        p.fwd.input_gate.w_x.set(0, 0, 0.3);
        p.fwd.input_gate.b.set(0, 0, 0.05);
        p.fwd.forget_gate.w_x.set(0, 0, -0.2);
        p.fwd.output_gate.w_x.set(0, 0, 0.5);
        p.fwd.output_gate.b.set(0, 0, -0.1);
        p.fwd.cell_gate.w_x.set(0, 0, 0.8);
        p.rev.input_gate.w_x.set(0, 0, -0.4);
        p.rev.output_gate.w_x.set(0, 0, 0.25);
        p.rev.cell_gate.w_x.set(0, 0, -0.6);
        p.w_hz = Matrix::from_vec(2, 2, vec![1.0, -0.5, 0.3, 0.7]).unwrap();
        p.b_z = Matrix::from_vec(1, 2, vec![0.1, -0.2]).unwrap();

        let xv = 0.7;
        let x = Matrix::from_vec(1, 1, vec![xv]).unwrap();
        let (z, cache) = lstm_forward(&p, &x).unwrap();

        // direct evaluation of the gate equations, one scalar at a time
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let i_f = sig(0.3 * xv + 0.05);
        let f_f = sig(-0.2 * xv);
        let o_f = sig(0.5 * xv - 0.1);
        let g_f = (0.8 * xv).tanh();
        let c_f = f_f * 0.0 + i_f * g_f;
        let h_f = o_f * c_f.tanh();
        let i_r = sig(-0.4 * xv);
        let o_r = sig(0.25 * xv);
        let g_r = (-0.6 * xv).tanh();
        let c_r = sig(0.0) * 0.0 + i_r * g_r;
        let h_r = o_r * c_r.tanh();
        let u0 = 0.1 + 1.0 * h_f - 0.5 * h_r;
        let u1 = -0.2 + 0.3 * h_f + 0.7 * h_r;
        let e0 = (u0 - u0.max(u1)).exp();
        let e1 = (u1 - u0.max(u1)).exp();

        assert!((cache.fwd.h.get(0, 0) - h_f).abs() < 1e-15);
        assert!((cache.rev.h.get(0, 0) - h_r).abs() < 1e-15);
        assert!((z.get(0, 0) - e0 / (e0 + e1)).abs() < 1e-14);
        assert!((z.get(0, 1) - e1 / (e0 + e1)).abs() < 1e-14);
    }

    #[test]
    fn reverse_stream_mirrors_reversed_input() {
        let mut rng = Rng::new(11);
        let mut params = init_params(&mut rng, 2, 3, 3);
        // make both directions identical so the mirror identity is visible
        params.rev = params.fwd.clone();
        let x = tiny_input(&mut rng, 5, 2);
        let mut x_rev = Matrix::zeros(5, 2);
        for t in 0..5 {
            x_rev.row_mut(t).copy_from_slice(x.row(4 - t));
        }
        let (_, cache) = lstm_forward(&params, &x).unwrap();
        let (_, cache_rev) = lstm_forward(&params, &x_rev).unwrap();
        for t in 0..5 {
            for k in 0..3 {
                assert!((cache.fwd.h.get(t, k) - cache_rev.rev.h.get(4 - t, k)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_delta_zero_grads() {
        let mut rng = Rng::new(5);
        let params = init_params(&mut rng, 2, 3, 4);
        let x = tiny_input(&mut rng, 4, 2);
        let (_, cache) = lstm_forward(&params, &x).unwrap();
        let delta = Matrix::zeros(4, 4);
        let grads = lstm_backward(&params, &cache, &delta).unwrap();
        for t in grads.tensors() {
            assert!(t.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn backward_deterministic() {
        let mut rng = Rng::new(6);
        let params = init_params(&mut rng, 2, 3, 3);
        let x = tiny_input(&mut rng, 4, 2);
        let (z, cache) = lstm_forward(&params, &x).unwrap();
        let mut delta = z.clone();
        delta.set(0, 0, delta.get(0, 0) - 1.0);
        let a = lstm_backward(&params, &cache, &delta).unwrap();
        let b = lstm_backward(&params, &cache, &delta).unwrap();
        for (ta, tb) in a.tensors().into_iter().zip(b.tensors()) {
            assert_eq!(ta, tb);
        }
    }

    /// Cross-entropy surrogate used by the finite-difference oracle:
    /// L = -sum_t sum_c y[t,c] ln z[t,c] with y row-normalized, so the
    /// derivative w.r.t. the pre-softmax activations is exactly z - y,
    /// matching the delta convention of `lstm_backward`.
    fn surrogate_loss(params: &LstmParams, x: &Matrix, y: &Matrix) -> f64 {
        let (z, _) = lstm_forward(params, x).unwrap();
        let mut loss = 0.0;
        for t in 0..z.rows() {
            for c in 0..z.cols() {
                loss -= y.get(t, c) * z.get(t, c).ln();
            }
        }
        loss
    }

    fn random_target(rng: &mut Rng, t_len: usize, classes: usize) -> Matrix {
        let mut y = Matrix::zeros(t_len, classes);
        for t in 0..t_len {
            let row = y.row_mut(t);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = rng.uniform(0.05, 1.0);
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        y
    }

    #[test]
    fn gradient_check_vs_central_differences() {
        // Max relative error over all components and 5 random configs must
        // be tiny; denominator floored at 1e-3 to keep near-zero components
        // from dominating the ratio.
        let mut worst: f64 = 0.0;
        for seed in 0..5u64 {
            let mut rng = Rng::new(seed * 31 + 1);
            let mut params = init_params(&mut rng, 2, 3, 3);
            // larger weights exercise saturation regions too
            for m in params.tensors_mut() {
                for v in m.data_mut() {
                    *v *= 5.0;
                }
            }
            let x = tiny_input(&mut rng, 4, 2);
            let y = random_target(&mut rng, 4, 3);
            let (z, cache) = lstm_forward(&params, &x).unwrap();
            let mut delta = Matrix::zeros(4, 3);
            for t in 0..4 {
                for c in 0..3 {
                    delta.set(t, c, z.get(t, c) - y.get(t, c));
                }
            }
            let grads = lstm_backward(&params, &cache, &delta).unwrap();

            let h = 1e-5;
            let n_tensors = params.tensors().len();
            for ti in 0..n_tensors {
                for idx in 0..params.tensors()[ti].data().len() {
                    let orig = params.tensors()[ti].data()[idx];
                    params.tensors_mut()[ti].data_mut()[idx] = orig + h;
                    let hi = surrogate_loss(&params, &x, &y);
                    params.tensors_mut()[ti].data_mut()[idx] = orig - h;
                    let lo = surrogate_loss(&params, &x, &y);
                    params.tensors_mut()[ti].data_mut()[idx] = orig;
                    let numeric = (hi - lo) / (2.0 * h);
                    let analytic = grads.tensors()[ti].data()[idx];
                    let rel = (analytic - numeric).abs()
                        / analytic.abs().max(numeric.abs()).max(1e-3);
                    worst = worst.max(rel);
                }
            }
        }
        assert!(worst < 1e-5, "worst relative gradient error {worst}");
    }

    #[test]
    fn momentum_sgd_steps() {
        let mk = |v: f64| {
            let mut p = LstmParams::zeros(1, 1, 2);
            for t in p.tensors_mut() {
                for x in t.data_mut() {
                    *x = v;
                }
            }
            p
        };
        // momentum 0: plain descent
        let mut params = mk(1.0);
        let grads = mk(0.5);
        let mut vel = mk(0.0);
        apply_momentum_sgd(&mut params, &grads, &mut vel, 0.1, 0.0).unwrap();
        assert!((params.w_hz.get(0, 0) - (1.0 - 0.05)).abs() < 1e-15);

        // zero grad: drift by momentum * velocity
        let mut params = mk(1.0);
        let mut vel = mk(0.2);
        apply_momentum_sgd(&mut params, &mk(0.0), &mut vel, 0.1, 0.9).unwrap();
        assert!((params.w_hz.get(0, 0) - 1.18).abs() < 1e-12);

        // two steps, constant grad g, momentum 0.9: total delta = -lr*g*(1+1.9)
        let mut params = mk(0.0);
        let mut vel = mk(0.0);
        let grads = mk(1.0);
        apply_momentum_sgd(&mut params, &grads, &mut vel, 0.01, 0.9).unwrap();
        apply_momentum_sgd(&mut params, &grads, &mut vel, 0.01, 0.9).unwrap();
        assert!((params.w_hz.get(0, 0) - (-0.01 * 2.9)).abs() < 1e-12);
    }

    #[test]
    fn init_reproducible_and_bounded() {
        let a = init_params(&mut Rng::new(9), 4, 5, 6);
        let b = init_params(&mut Rng::new(9), 4, 5, 6);
        for (ta, tb) in a.tensors().into_iter().zip(b.tensors()) {
            assert_eq!(ta, tb);
        }
        for t in a.tensors() {
            assert!(t.data().iter().all(|v| v.abs() <= 0.1));
        }
        let c = init_params(&mut Rng::new(10), 4, 5, 6);
        assert_ne!(a.w_hz, c.w_hz);
    }

    #[test]
    fn gates_bounded_and_cell_growth_limited() {
        let mut rng = Rng::new(21);
        let params = init_params(&mut rng, 3, 4, 4);
        let x = tiny_input(&mut rng, 10, 3);
        let (_, cache) = lstm_forward(&params, &x).unwrap();
        for t in 0..10 {
            for k in 0..4 {
                for gate in [&cache.fwd.i, &cache.fwd.f, &cache.fwd.o] {
                    let v = gate.get(t, k);
                    assert!(v > 0.0 && v < 1.0);
                }
                // |c_t| <= t+1 when |i*g| <= 1 at every step
                assert!(cache.fwd.c.get(t, k).abs() <= (t + 1) as f64);
            }
        }
    }
}
