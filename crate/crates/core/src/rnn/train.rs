use serde::Serialize;

use crate::error::{Error, Result};
use crate::vocab::TokenId;

use super::model::{byte_tokenize, RnnModel};
use super::net::{self, Layout};
use super::RnnConfig;

const PAD: usize = 0;

/// Token stream `PAD l_1 PAD l_2 … PAD l_k PAD` for training.
pub fn line_stream<S: AsRef<[u8]>>(lines: &[S]) -> Vec<usize> {
    let mut out = vec![PAD];
    for l in lines {
        out.extend(byte_tokenize(l.as_ref()).into_iter().map(TokenId::index));
        out.push(PAD);
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrainReport {
    /// Mean loss (nats per predicted byte) over each epoch.
    pub epoch_losses: Vec<f64>,
    /// Mean loss of every update.
    pub step_losses: Vec<f64>,
}

impl TrainReport {
    pub fn steps(&self) -> usize {
        self.step_losses.len()
    }
}

struct Adam {
    m: Vec<f32>,
    v: Vec<f32>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn update(&mut self, cfg: &RnnConfig, params: &mut [f32], grad: &[f32]) {
        self.t += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let lr = (cfg.learning_rate * c2.sqrt() / c1) as f32;
        let eps = (cfg.epsilon * c2.sqrt()) as f32;
        let (b1, b2) = (b1 as f32, b2 as f32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            params[i] -= lr * self.m[i] / (self.v[i].sqrt() + eps);
        }
    }
}

/// Trains a fresh model on `corpus` (one line per element) with truncated
/// backpropagation through time and Adam.
///
/// The token stream is cut into `batch_size` contiguous pieces processed
/// side by side; each update covers the next `rho` positions of every piece,
/// carrying the recurrent state forward but not its gradient.
pub fn tbptt_train<S: AsRef<[u8]>>(corpus: &[S], config: &RnnConfig) -> Result<(RnnModel, TrainReport)> {
    config.validate()?;
    let stream = line_stream(corpus);
    if stream.len() < 2 || corpus.is_empty() {
        return Err(Error::input("training corpus is empty"));
    }
    let mut model = RnnModel::new(config.clone())?;
    let lay = model.layout.clone();
    let batch = config.batch_size.min(stream.len() - 1);
    let piece = (stream.len() - 1) / batch;
    let mut adam = Adam::new(lay.total());
    let mut grad = vec![0.0f32; lay.total()];
    let mut report = TrainReport::default();
    let max_steps = config.max_steps.unwrap_or(usize::MAX);

    'epochs: for _ in 0..config.epochs {
        let mut states = vec![vec![0.0f32; lay.state_len()]; batch];
        let (mut epoch_loss, mut epoch_n) = (0.0f64, 0usize);
        let mut start = 0;
        while start < piece {
            if report.steps() >= max_steps {
                if epoch_n > 0 {
                    report.epoch_losses.push(epoch_loss / epoch_n as f64);
                }
                break 'epochs;
            }
            let end = (start + config.rho).min(piece);
            let n_tok = batch * (end - start);
            let scale = 1.0 / n_tok as f32;
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut loss = 0.0f64;
            for (b, state) in states.iter_mut().enumerate() {
                let base = b * piece;
                let inputs = &stream[base + start..base + end];
                let targets = &stream[base + start + 1..base + end + 1];
                loss += f64::from(net::chunk_grad(
                    &lay,
                    &model.params,
                    state,
                    inputs,
                    targets,
                    PAD,
                    scale,
                    &mut grad,
                ));
            }
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Training(format!(
                    "non-finite loss or gradient at update {}; try a lower learning rate",
                    report.steps() + 1
                )));
            }
            if config.clip_norm > 0.0 {
                let norm = grad.iter().map(|&g| f64::from(g) * f64::from(g)).sum::<f64>().sqrt();
                if norm > config.clip_norm {
                    let k = (config.clip_norm / norm) as f32;
                    grad.iter_mut().for_each(|g| *g *= k);
                }
            }
            adam.update(config, &mut model.params, &grad);
            report.step_losses.push(loss / n_tok as f64);
            epoch_loss += loss;
            epoch_n += n_tok;
            start = end;
        }
        report.epoch_losses.push(epoch_loss / epoch_n as f64);
    }
    if model.params.iter().any(|v| !v.is_finite()) {
        return Err(Error::Training("parameters diverged to non-finite values".into()));
    }
    let params = std::mem::take(&mut model.params);
    let model = RnnModel::from_params(config.clone(), params)?;
    Ok((model, report))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheck {
    /// Largest relative error per parameter group.
    pub groups: Vec<(String, f64)>,
    pub max_relative_error: f64,
    pub checked: usize,
}

/// Compares backpropagated gradients with central finite differences, in
/// double precision, for every parameter of a freshly initialised model.
///
/// The loss is the summed cross-entropy of predicting `tokens[1..]` from
/// `tokens[..len-1]`, starting from a zero state. Relative error is
/// `|a - n| / max(|a|, |n|, floor)`: below `floor` the difference quotient
/// is dominated by rounding (about `eps * loss / step`), so tiny gradients
/// are compared on an absolute scale.
pub fn gradient_check(config: &RnnConfig, tokens: &[usize], step: f64, floor: f64) -> Result<GradCheck> {
    if tokens.len() < 2 {
        return Err(Error::input("gradient check needs at least two tokens"));
    }
    let model = RnnModel::new(config.clone())?;
    let lay: Layout = model.layout.clone();
    let mut p: Vec<f64> = model.params.iter().map(|&v| f64::from(v)).collect();
    let (inputs, targets) = (&tokens[..tokens.len() - 1], &tokens[1..]);
    let mut analytic = vec![0.0f64; lay.total()];
    let mut state = vec![0.0f64; lay.state_len()];
    net::chunk_grad(&lay, &p, &mut state, inputs, targets, PAD, 1.0, &mut analytic);

    let loss_at = |p: &[f64]| {
        let mut s = vec![0.0f64; lay.state_len()];
        net::chunk_loss(&lay, p, &mut s, inputs, targets, PAD)
    };
    let mut groups = Vec::new();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (name, range) in lay.groups() {
        let mut gmax = 0.0f64;
        for i in range {
            let orig = p[i];
            p[i] = orig + step;
            let up = loss_at(&p);
            p[i] = orig - step;
            let down = loss_at(&p);
            p[i] = orig;
            let numeric = (up - down) / (2.0 * step);
            let a = analytic[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            gmax = gmax.max(rel);
            checked += 1;
        }
        worst = worst.max(gmax);
        groups.push((name, gmax));
    }
    Ok(GradCheck {
        groups,
        max_relative_error: worst,
        checked,
    })
}
