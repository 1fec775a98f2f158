//! LSTM forward pass and backpropagation through time.
//!
//! Standard LSTM cell: `i, f, o = logistic(Wx + Uh + b)`, `g = tanh(...)`,
//! `c' = f⊙c + i⊙g`, `h' = o⊙tanh(c')`. The dense head `y = w_d·h² + b_d`
//! shares its parameters across all time steps. Gradients are exact;
//! backpropagation truncates at the sequence start (the zero initial state
//! receives no gradient).

use super::{r, LayerView, NetworkParams, Real};

/// Hidden and cell activations of one LSTM layer.
#[derive(Clone, Debug)]
pub struct LstmState<T> {
    pub hidden: Vec<T>,
    pub cell: Vec<T>,
}

impl<T: Real> LstmState<T> {
    pub fn zeros(hidden_dim: usize) -> Self {
        Self {
            hidden: vec![T::zero(); hidden_dim],
            cell: vec![T::zero(); hidden_dim],
        }
    }
}

/// Dot product with four-way unrolled accumulators, which the compiler can
/// map onto SIMD lanes. The summation order is fixed, so results are
/// reproducible bit-for-bit across runs regardless of thread count.
#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let chunks = n / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (T::zero(), T::zero(), T::zero(), T::zero());
    for c in 0..chunks {
        let i = 4 * c;
        s0 = s0 + a[i] * b[i];
        s1 = s1 + a[i + 1] * b[i + 1];
        s2 = s2 + a[i + 2] * b[i + 2];
        s3 = s3 + a[i + 3] * b[i + 3];
    }
    let mut s = (s0 + s1) + (s2 + s3);
    for i in 4 * chunks..n {
        s = s + a[i] * b[i];
    }
    s
}

#[inline]
fn logistic<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// One step of one layer, writing gate activations and the new state into
/// caller-provided slices. `pre` is a 4H scratch buffer.
#[allow(clippy::too_many_arguments)]
fn step_layer<T: Real>(
    layer: &LayerView<'_, T>,
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    gate_i: &mut [T],
    gate_f: &mut [T],
    gate_g: &mut [T],
    gate_o: &mut [T],
    cell: &mut [T],
    tanh_cell: &mut [T],
    hidden: &mut [T],
    pre: &mut [T],
) {
    let h = layer.hidden_dim;
    let in_dim = layer.input_dim;
    for row in 0..4 * h {
        let wrow = &layer.w[row * in_dim..(row + 1) * in_dim];
        let urow = &layer.u[row * h..(row + 1) * h];
        pre[row] = layer.b[row] + dot(wrow, x) + dot(urow, h_prev);
    }
    for j in 0..h {
        let i = logistic(pre[j]);
        let f = logistic(pre[h + j]);
        let g = pre[2 * h + j].tanh();
        let o = logistic(pre[3 * h + j]);
        let c = f * c_prev[j] + i * g;
        let tc = c.tanh();
        gate_i[j] = i;
        gate_f[j] = f;
        gate_g[j] = g;
        gate_o[j] = o;
        cell[j] = c;
        tanh_cell[j] = tc;
        hidden[j] = o * tc;
    }
}

/// Single LSTM cell step for one layer. Returns the new hidden vector and the
/// updated state. Deterministic; non-finite inputs trip a debug assertion.
pub fn lstm_cell_step<T: Real>(
    layer: &LayerView<'_, T>,
    x: &[T],
    state: &LstmState<T>,
) -> (Vec<T>, LstmState<T>) {
    assert_eq!(x.len(), layer.input_dim, "input dimension mismatch");
    assert_eq!(state.hidden.len(), layer.hidden_dim, "state dimension mismatch");
    debug_assert!(
        x.iter().all(|v| v.is_finite()),
        "non-finite input to lstm_cell_step"
    );
    let h = layer.hidden_dim;
    let mut gi = vec![T::zero(); h];
    let mut gf = vec![T::zero(); h];
    let mut gg = vec![T::zero(); h];
    let mut go = vec![T::zero(); h];
    let mut cell = vec![T::zero(); h];
    let mut tc = vec![T::zero(); h];
    let mut hidden = vec![T::zero(); h];
    let mut pre = vec![T::zero(); 4 * h];
    step_layer(
        layer,
        x,
        &state.hidden,
        &state.cell,
        &mut gi,
        &mut gf,
        &mut gg,
        &mut go,
        &mut cell,
        &mut tc,
        &mut hidden,
        &mut pre,
    );
    let new_state = LstmState {
        hidden: hidden.clone(),
        cell,
    };
    (hidden, new_state)
}

/// Activations of one layer across a whole sequence, step-major.
struct LayerSeq<T> {
    gate_i: Vec<T>,
    gate_f: Vec<T>,
    gate_g: Vec<T>,
    gate_o: Vec<T>,
    cell: Vec<T>,
    tanh_cell: Vec<T>,
    hidden: Vec<T>,
}

impl<T: Real> LayerSeq<T> {
    fn zeros(len: usize, h: usize) -> Self {
        Self {
            gate_i: vec![T::zero(); len * h],
            gate_f: vec![T::zero(); len * h],
            gate_g: vec![T::zero(); len * h],
            gate_o: vec![T::zero(); len * h],
            cell: vec![T::zero(); len * h],
            tanh_cell: vec![T::zero(); len * h],
            hidden: vec![T::zero(); len * h],
        }
    }
}

/// Everything `backward` needs from a matching `forward` call.
pub struct ForwardCache<T> {
    len: usize,
    input: Vec<T>,
    l1: LayerSeq<T>,
    l2: LayerSeq<T>,
    predictions: Vec<T>,
}

impl<T> ForwardCache<T> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn predictions(&self) -> &[T] {
        &self.predictions
    }
}

/// Run the network over a sequence from zero initial state, retaining all
/// activations for backpropagation. `input` is step-major with
/// `dims.input` values per step.
pub fn forward<T: Real>(params: &NetworkParams<T>, input: &[T]) -> (Vec<T>, ForwardCache<T>) {
    let dims = params.dims();
    assert_eq!(
        input.len() % dims.input,
        0,
        "input length must be a multiple of the input dimension"
    );
    let len = input.len() / dims.input;
    let (h1, h2) = (dims.hidden1, dims.hidden2);
    let layer1 = params.layer1();
    let layer2 = params.layer2();
    let wd = params.dense_w();
    let bd = params.dense_b();

    let mut l1 = LayerSeq::zeros(len, h1);
    let mut l2 = LayerSeq::zeros(len, h2);
    let mut preds = vec![T::zero(); len];
    let mut pre1 = vec![T::zero(); 4 * h1];
    let mut pre2 = vec![T::zero(); 4 * h2];
    let zeros1 = vec![T::zero(); h1];
    let zeros2 = vec![T::zero(); h2];

    for t in 0..len {
        let x_t = &input[t * dims.input..(t + 1) * dims.input];
        {
            let (h_done, h_rest) = l1.hidden.split_at_mut(t * h1);
            let (c_done, c_rest) = l1.cell.split_at_mut(t * h1);
            let (h1_prev, c1_prev) = if t == 0 {
                (&zeros1[..], &zeros1[..])
            } else {
                (&h_done[(t - 1) * h1..], &c_done[(t - 1) * h1..])
            };
            let s = t * h1..(t + 1) * h1;
            step_layer(
                &layer1,
                x_t,
                h1_prev,
                c1_prev,
                &mut l1.gate_i[s.clone()],
                &mut l1.gate_f[s.clone()],
                &mut l1.gate_g[s.clone()],
                &mut l1.gate_o[s.clone()],
                &mut c_rest[..h1],
                &mut l1.tanh_cell[s],
                &mut h_rest[..h1],
                &mut pre1,
            );
        }
        let h1_t = &l1.hidden[t * h1..(t + 1) * h1];
        {
            let (h_done, h_rest) = l2.hidden.split_at_mut(t * h2);
            let (c_done, c_rest) = l2.cell.split_at_mut(t * h2);
            let (h2_prev, c2_prev) = if t == 0 {
                (&zeros2[..], &zeros2[..])
            } else {
                (&h_done[(t - 1) * h2..], &c_done[(t - 1) * h2..])
            };
            let s = t * h2..(t + 1) * h2;
            step_layer(
                &layer2,
                h1_t,
                h2_prev,
                c2_prev,
                &mut l2.gate_i[s.clone()],
                &mut l2.gate_f[s.clone()],
                &mut l2.gate_g[s.clone()],
                &mut l2.gate_o[s.clone()],
                &mut c_rest[..h2],
                &mut l2.tanh_cell[s],
                &mut h_rest[..h2],
                &mut pre2,
            );
        }
        preds[t] = bd + dot(wd, &l2.hidden[t * h2..(t + 1) * h2]);
    }

    let cache = ForwardCache {
        len,
        input: input.to_vec(),
        l1,
        l2,
        predictions: preds.clone(),
    };
    (preds, cache)
}

/// Forward pass without retaining activations. Used for validation and
/// inference.
pub fn predict<T: Real>(params: &NetworkParams<T>, input: &[T]) -> Vec<T> {
    let dims = params.dims();
    assert_eq!(input.len() % dims.input, 0);
    let len = input.len() / dims.input;
    let (h1, h2) = (dims.hidden1, dims.hidden2);
    let layer1 = params.layer1();
    let layer2 = params.layer2();
    let wd = params.dense_w();
    let bd = params.dense_b();

    let mut state1 = LstmState::zeros(h1);
    let mut state2 = LstmState::zeros(h2);
    let mut next1 = LstmState::zeros(h1);
    let mut next2 = LstmState::zeros(h2);
    let mut gi1 = vec![T::zero(); h1];
    let mut gf1 = vec![T::zero(); h1];
    let mut gg1 = vec![T::zero(); h1];
    let mut go1 = vec![T::zero(); h1];
    let mut tc1 = vec![T::zero(); h1];
    let mut pre1 = vec![T::zero(); 4 * h1];
    let mut gi2 = vec![T::zero(); h2];
    let mut gf2 = vec![T::zero(); h2];
    let mut gg2 = vec![T::zero(); h2];
    let mut go2 = vec![T::zero(); h2];
    let mut tc2 = vec![T::zero(); h2];
    let mut pre2 = vec![T::zero(); 4 * h2];
    let mut preds = vec![T::zero(); len];

    for t in 0..len {
        let x_t = &input[t * dims.input..(t + 1) * dims.input];
        step_layer(
            &layer1,
            x_t,
            &state1.hidden,
            &state1.cell,
            &mut gi1,
            &mut gf1,
            &mut gg1,
            &mut go1,
            &mut next1.cell,
            &mut tc1,
            &mut next1.hidden,
            &mut pre1,
        );
        step_layer(
            &layer2,
            &next1.hidden,
            &state2.hidden,
            &state2.cell,
            &mut gi2,
            &mut gf2,
            &mut gg2,
            &mut go2,
            &mut next2.cell,
            &mut tc2,
            &mut next2.hidden,
            &mut pre2,
        );
        preds[t] = bd + dot(wd, &next2.hidden);
        std::mem::swap(&mut state1, &mut next1);
        std::mem::swap(&mut state2, &mut next2);
    }
    preds
}

/// BPTT for one layer. `dh_above` carries the gradient flowing into each
/// step's hidden output; returns the gradient w.r.t. the layer inputs.
#[allow(clippy::too_many_arguments)]
fn layer_backward<T: Real>(
    layer: &LayerView<'_, T>,
    inputs: &[T],
    seq: &LayerSeq<T>,
    dh_above: &[T],
    grad_w: &mut [T],
    grad_u: &mut [T],
    grad_b: &mut [T],
) -> Vec<T> {
    let h = layer.hidden_dim;
    let in_dim = layer.input_dim;
    let len = dh_above.len() / h;

    let mut dh_next = vec![T::zero(); h];
    let mut dc_next = vec![T::zero(); h];
    let mut dpre = vec![T::zero(); 4 * h];
    let mut dx = vec![T::zero(); len * in_dim];

    for t in (0..len).rev() {
        let s = t * h..(t + 1) * h;
        let gi = &seq.gate_i[s.clone()];
        let gf = &seq.gate_f[s.clone()];
        let gg = &seq.gate_g[s.clone()];
        let go = &seq.gate_o[s.clone()];
        let tc = &seq.tanh_cell[s.clone()];
        let x_t = &inputs[t * in_dim..(t + 1) * in_dim];

        for j in 0..h {
            let dh = dh_above[t * h + j] + dh_next[j];
            let dc = dh * go[j] * (T::one() - tc[j] * tc[j]) + dc_next[j];
            let c_prev = if t == 0 {
                T::zero()
            } else {
                seq.cell[(t - 1) * h + j]
            };
            dpre[j] = dc * gg[j] * gi[j] * (T::one() - gi[j]);
            dpre[h + j] = dc * c_prev * gf[j] * (T::one() - gf[j]);
            dpre[2 * h + j] = dc * gi[j] * (T::one() - gg[j] * gg[j]);
            dpre[3 * h + j] = dh * tc[j] * go[j] * (T::one() - go[j]);
            dc_next[j] = dc * gf[j];
        }

        for v in dh_next.iter_mut() {
            *v = T::zero();
        }
        let dx_t = &mut dx[t * in_dim..(t + 1) * in_dim];
        for row in 0..4 * h {
            let d = dpre[row];
            grad_b[row] += d;
            let gw_row = &mut grad_w[row * in_dim..(row + 1) * in_dim];
            for k in 0..in_dim {
                gw_row[k] += d * x_t[k];
                dx_t[k] += layer.w[row * in_dim + k] * d;
            }
            let gu_row = &mut grad_u[row * h..(row + 1) * h];
            let u_row = &layer.u[row * h..(row + 1) * h];
            if t > 0 {
                let h_prev = &seq.hidden[(t - 1) * h..t * h];
                for k in 0..h {
                    gu_row[k] += d * h_prev[k];
                    dh_next[k] += u_row[k] * d;
                }
            } else {
                // Zero initial state: no recurrent-kernel contribution; the
                // gradient w.r.t. the initial state is discarded.
                for k in 0..h {
                    dh_next[k] += u_row[k] * d;
                }
            }
        }
    }
    dx
}

/// Exact gradient of the sequence MSE loss w.r.t. every parameter.
pub fn backward<T: Real>(
    params: &NetworkParams<T>,
    cache: &ForwardCache<T>,
    targets: &[T],
) -> NetworkParams<T> {
    let dims = params.dims();
    assert_eq!(
        targets.len(),
        cache.len,
        "targets do not match the cached forward pass"
    );
    assert_eq!(cache.input.len(), cache.len * dims.input);
    let h2 = dims.hidden2;
    let len = cache.len;

    let mut grads = NetworkParams::zeros(dims);
    let (o_w1, o_u1, o_b1, o_w2, o_u2, o_b2, o_wd, o_bd) = grads.layout_offsets();
    let data = grads.data_mut();
    // Non-overlapping group views over the flat gradient buffer.
    let (gw1, rest) = data.split_at_mut(o_u1 - o_w1);
    let (gu1, rest) = rest.split_at_mut(o_b1 - o_u1);
    let (gb1, rest) = rest.split_at_mut(o_w2 - o_b1);
    let (gw2, rest) = rest.split_at_mut(o_u2 - o_w2);
    let (gu2, rest) = rest.split_at_mut(o_b2 - o_u2);
    let (gb2, rest) = rest.split_at_mut(o_wd - o_b2);
    let (gwd, gbd) = rest.split_at_mut(o_bd - o_wd);

    let wd = params.dense_w();
    let two_over_len = r::<T>(2.0 / len as f64);

    // Head gradient and the gradient flowing into layer 2's hidden outputs.
    let mut dh2 = vec![T::zero(); len * h2];
    for t in 0..len {
        let dy = two_over_len * (cache.predictions[t] - targets[t]);
        gbd[0] += dy;
        let h2_t = &cache.l2.hidden[t * h2..(t + 1) * h2];
        for k in 0..h2 {
            gwd[k] += dy * h2_t[k];
            dh2[t * h2 + k] = dy * wd[k];
        }
    }

    let dh1 = layer_backward(
        &params.layer2(),
        &cache.l1.hidden,
        &cache.l2,
        &dh2,
        gw2,
        gu2,
        gb2,
    );
    let _ = layer_backward(
        &params.layer1(),
        &cache.input,
        &cache.l1,
        &dh1,
        gw1,
        gu1,
        gb1,
    );
    grads
}
