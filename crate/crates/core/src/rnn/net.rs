//! Parameter layout, LSTM forward pass and backpropagation through time.
//!
//! All parameters live in one flat array so the optimizer, the checkpoint
//! format and the gradient check can treat them uniformly. Gate blocks are
//! ordered input, forget, candidate, output.

use std::ops::Range;

use num_traits::Float;

use super::RnnConfig;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Layout {
    pub vocab: usize,
    pub embed: usize,
    pub width: usize,
    pub layers: usize,
    /// Start of each layer's `[W | U | b]` block.
    layer_start: Vec<usize>,
    out_start: usize,
}

impl Layout {
    pub fn new(cfg: &RnnConfig, vocab: usize) -> Self {
        let mut layer_start = Vec::with_capacity(cfg.layers);
        let mut off = vocab * cfg.embed_dim;
        for l in 0..cfg.layers {
            layer_start.push(off);
            let input = if l == 0 { cfg.embed_dim } else { cfg.width };
            off += 4 * cfg.width * (input + cfg.width + 1);
        }
        Layout {
            vocab,
            embed: cfg.embed_dim,
            width: cfg.width,
            layers: cfg.layers,
            layer_start,
            out_start: off,
        }
    }

    pub fn input_dim(&self, layer: usize) -> usize {
        if layer == 0 {
            self.embed
        } else {
            self.width
        }
    }

    pub fn embedding(&self) -> Range<usize> {
        0..self.vocab * self.embed
    }

    pub fn w(&self, l: usize) -> Range<usize> {
        let s = self.layer_start[l];
        s..s + 4 * self.width * self.input_dim(l)
    }

    pub fn u(&self, l: usize) -> Range<usize> {
        let s = self.w(l).end;
        s..s + 4 * self.width * self.width
    }

    pub fn b(&self, l: usize) -> Range<usize> {
        let s = self.u(l).end;
        s..s + 4 * self.width
    }

    pub fn out_w(&self) -> Range<usize> {
        self.out_start..self.out_start + self.vocab * self.width
    }

    pub fn out_b(&self) -> Range<usize> {
        let s = self.out_w().end;
        s..s + self.vocab
    }

    pub fn total(&self) -> usize {
        self.out_b().end
    }

    /// Recurrent state size: `h` then `c` for every layer.
    pub fn state_len(&self) -> usize {
        2 * self.layers * self.width
    }

    pub fn groups(&self) -> Vec<(String, Range<usize>)> {
        let mut g = vec![("embedding".to_string(), self.embedding())];
        for l in 0..self.layers {
            g.push((format!("layer{l}.input"), self.w(l)));
            g.push((format!("layer{l}.recurrent"), self.u(l)));
            g.push((format!("layer{l}.bias"), self.b(l)));
        }
        g.push(("output.weight".to_string(), self.out_w()));
        g.push(("output.bias".to_string(), self.out_b()));
        g
    }
}

#[inline]
fn sigmoid<T: Float>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Activations of one layer at one time step.
#[derive(Clone, Debug)]
pub(crate) struct LayerTrace<T> {
    x: Vec<T>,
    h_prev: Vec<T>,
    c_prev: Vec<T>,
    /// Activated gates `[i | f | g | o]`.
    gates: Vec<T>,
    tanh_c: Vec<T>,
}

/// One LSTM cell update; writes the new `h` and `c` and the activated gates.
#[allow(clippy::too_many_arguments)]
fn cell<T: Float>(
    lay: &Layout,
    p: &[T],
    l: usize,
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    gates: &mut [T],
    h: &mut [T],
    c: &mut [T],
) {
    let n = lay.width;
    let din = lay.input_dim(l);
    let (w, u, b) = (&p[lay.w(l)], &p[lay.u(l)], &p[lay.b(l)]);
    for j in 0..4 * n {
        let mut z = b[j];
        let wr = &w[j * din..(j + 1) * din];
        for k in 0..din {
            z = z + wr[k] * x[k];
        }
        let ur = &u[j * n..(j + 1) * n];
        for k in 0..n {
            z = z + ur[k] * h_prev[k];
        }
        gates[j] = if (2 * n..3 * n).contains(&j) {
            z.tanh()
        } else {
            sigmoid(z)
        };
    }
    for k in 0..n {
        let (i, f, g, o) = (gates[k], gates[n + k], gates[2 * n + k], gates[3 * n + k]);
        c[k] = f * c_prev[k] + i * g;
        h[k] = o * c[k].tanh();
    }
}

/// Feeds `token` through the stack, updating `state` in place.
pub(crate) fn step<T: Float>(lay: &Layout, p: &[T], state: &mut [T], token: usize) {
    let n = lay.width;
    let mut x: Vec<T> = p[token * lay.embed..(token + 1) * lay.embed].to_vec();
    let mut gates = vec![T::zero(); 4 * n];
    let mut h = vec![T::zero(); n];
    let mut c = vec![T::zero(); n];
    for l in 0..lay.layers {
        let (hs, cs) = state[2 * l * n..2 * (l + 1) * n].split_at(n);
        cell(lay, p, l, &x, hs, cs, &mut gates, &mut h, &mut c);
        state[2 * l * n..(2 * l + 1) * n].copy_from_slice(&h);
        state[(2 * l + 1) * n..2 * (l + 1) * n].copy_from_slice(&c);
        x.clone_from(&h);
    }
}

/// Output logits for the top layer's `h` in `state`.
pub(crate) fn logits<T: Float>(lay: &Layout, p: &[T], state: &[T], out: &mut [T]) {
    let n = lay.width;
    let top = &state[2 * (lay.layers - 1) * n..(2 * lay.layers - 1) * n];
    let (w, b) = (&p[lay.out_w()], &p[lay.out_b()]);
    for v in 0..lay.vocab {
        let row = &w[v * n..(v + 1) * n];
        let mut z = b[v];
        for k in 0..n {
            z = z + row[k] * top[k];
        }
        out[v] = z;
    }
}

pub(crate) fn log_softmax<T: Float>(z: &mut [T]) {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for &v in z.iter() {
        sum = sum + (v - max).exp();
    }
    let lse = max + sum.ln();
    for v in z.iter_mut() {
        *v = *v - lse;
    }
}

/// Forward and backward pass over one truncated chunk.
///
/// `state` is the carried recurrent state; it is reset to zero whenever the
/// input is `pad` and is left holding the state after the last input.
/// Gradients of `scale * Σ loss` are accumulated into `grad`; gradients do
/// not flow into the incoming state. Returns the unscaled summed loss.
#[allow(clippy::too_many_arguments)]
pub(crate) fn chunk_grad<T: Float>(
    lay: &Layout,
    p: &[T],
    state: &mut [T],
    inputs: &[usize],
    targets: &[usize],
    pad: usize,
    scale: T,
    grad: &mut [T],
) -> T {
    assert_eq!(inputs.len(), targets.len());
    let n = lay.width;
    let steps = inputs.len();
    let mut traces: Vec<Vec<LayerTrace<T>>> = Vec::with_capacity(steps);
    let mut resets = Vec::with_capacity(steps);
    let mut probs: Vec<Vec<T>> = Vec::with_capacity(steps);
    let mut tops: Vec<Vec<T>> = Vec::with_capacity(steps);
    let mut loss = T::zero();
    let mut z = vec![T::zero(); lay.vocab];

    for t in 0..steps {
        let reset = inputs[t] == pad;
        if reset {
            state.iter_mut().for_each(|v| *v = T::zero());
        }
        resets.push(reset);
        let tok = inputs[t];
        let mut x: Vec<T> = p[tok * lay.embed..(tok + 1) * lay.embed].to_vec();
        let mut layer_traces = Vec::with_capacity(lay.layers);
        for l in 0..lay.layers {
            let h_prev = state[2 * l * n..(2 * l + 1) * n].to_vec();
            let c_prev = state[(2 * l + 1) * n..2 * (l + 1) * n].to_vec();
            let mut gates = vec![T::zero(); 4 * n];
            let mut h = vec![T::zero(); n];
            let mut c = vec![T::zero(); n];
            cell(lay, p, l, &x, &h_prev, &c_prev, &mut gates, &mut h, &mut c);
            state[2 * l * n..(2 * l + 1) * n].copy_from_slice(&h);
            state[(2 * l + 1) * n..2 * (l + 1) * n].copy_from_slice(&c);
            let tanh_c = c.iter().map(|v| v.tanh()).collect();
            layer_traces.push(LayerTrace {
                x: std::mem::replace(&mut x, h),
                h_prev,
                c_prev,
                gates,
                tanh_c,
            });
        }
        logits(lay, p, state, &mut z);
        log_softmax(&mut z);
        loss = loss - z[targets[t]];
        probs.push(z.iter().map(|v| v.exp()).collect());
        tops.push(x);
        traces.push(layer_traces);
    }

    // backward
    let mut dh_next = vec![vec![T::zero(); n]; lay.layers];
    let mut dc_next = vec![vec![T::zero(); n]; lay.layers];
    let mut dz = vec![T::zero(); 4 * n];
    let out_w = lay.out_w();
    let out_b = lay.out_b();
    for t in (0..steps).rev() {
        // softmax cross-entropy
        let mut dh_above = vec![T::zero(); n];
        let top = &tops[t];
        for v in 0..lay.vocab {
            let mut d = probs[t][v];
            if v == targets[t] {
                d = d - T::one();
            }
            let d = d * scale;
            grad[out_b.start + v] = grad[out_b.start + v] + d;
            let row = out_w.start + v * n;
            for k in 0..n {
                grad[row + k] = grad[row + k] + d * top[k];
                dh_above[k] = dh_above[k] + d * p[row + k];
            }
        }
        for l in (0..lay.layers).rev() {
            let tr = &traces[t][l];
            let din = lay.input_dim(l);
            let (wr, ur, br) = (lay.w(l), lay.u(l), lay.b(l));
            for k in 0..n {
                let dh = dh_above[k] + dh_next[l][k];
                let (i, f, g, o) = (tr.gates[k], tr.gates[n + k], tr.gates[2 * n + k], tr.gates[3 * n + k]);
                let tc = tr.tanh_c[k];
                let d_o = dh * tc;
                let dc = dc_next[l][k] + dh * o * (T::one() - tc * tc);
                dz[k] = dc * g * i * (T::one() - i);
                dz[n + k] = dc * tr.c_prev[k] * f * (T::one() - f);
                dz[2 * n + k] = dc * i * (T::one() - g * g);
                dz[3 * n + k] = d_o * o * (T::one() - o);
                dc_next[l][k] = dc * f;
            }
            let mut dx = vec![T::zero(); din];
            let mut dh_prev = vec![T::zero(); n];
            for j in 0..4 * n {
                let d = dz[j];
                if d == T::zero() {
                    continue;
                }
                grad[br.start + j] = grad[br.start + j] + d;
                let w0 = wr.start + j * din;
                for k in 0..din {
                    grad[w0 + k] = grad[w0 + k] + d * tr.x[k];
                    dx[k] = dx[k] + d * p[w0 + k];
                }
                let u0 = ur.start + j * n;
                for k in 0..n {
                    grad[u0 + k] = grad[u0 + k] + d * tr.h_prev[k];
                    dh_prev[k] = dh_prev[k] + d * p[u0 + k];
                }
            }
            dh_next[l] = dh_prev;
            dh_above = dx;
        }
        // embedding
        let e0 = inputs[t] * lay.embed;
        for k in 0..lay.embed {
            grad[e0 + k] = grad[e0 + k] + dh_above[k];
        }
        if resets[t] {
            for l in 0..lay.layers {
                dh_next[l].iter_mut().for_each(|v| *v = T::zero());
                dc_next[l].iter_mut().for_each(|v| *v = T::zero());
            }
        }
    }
    loss
}

/// Summed loss of a chunk without gradients (same arithmetic as
/// [`chunk_grad`]'s forward pass).
pub(crate) fn chunk_loss<T: Float>(
    lay: &Layout,
    p: &[T],
    state: &mut [T],
    inputs: &[usize],
    targets: &[usize],
    pad: usize,
) -> T {
    let mut z = vec![T::zero(); lay.vocab];
    let mut loss = T::zero();
    for (&tok, &target) in inputs.iter().zip(targets) {
        if tok == pad {
            state.iter_mut().for_each(|v| *v = T::zero());
        }
        step(lay, p, state, tok);
        logits(lay, p, state, &mut z);
        log_softmax(&mut z);
        loss = loss - z[target];
    }
    loss
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(layers: usize, width: usize, embed_dim: usize) -> RnnConfig {
        RnnConfig {
            layers,
            width,
            embed_dim,
            ..RnnConfig::default()
        }
    }

    #[test]
    fn layout_is_contiguous() {
        let lay = Layout::new(&cfg(2, 3, 4), 7);
        let groups = lay.groups();
        let mut end = 0;
        for (_, r) in &groups {
            assert_eq!(r.start, end);
            end = r.end;
        }
        assert_eq!(end, lay.total());
        assert_eq!(lay.total(), 7 * 4 + 12 * (4 + 3 + 1) + 12 * (3 + 3 + 1) + 7 * 3 + 7);
    }

    #[test]
    fn forward_matches_between_paths() {
        let lay = Layout::new(&cfg(2, 5, 3), 11);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p: Vec<f64> = (0..lay.total()).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let inputs = [0, 4, 7, 0, 2, 9];
        let targets = [4, 7, 0, 2, 9, 1];
        let mut s1 = vec![0.0; lay.state_len()];
        let mut s2 = s1.clone();
        let mut g = vec![0.0; lay.total()];
        let a = chunk_grad(&lay, &p, &mut s1, &inputs, &targets, 0, 1.0, &mut g);
        let b = chunk_loss(&lay, &p, &mut s2, &inputs, &targets, 0);
        assert_eq!(a, b);
        assert_eq!(s1, s2);
    }
}
