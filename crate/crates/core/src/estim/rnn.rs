use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CateEstimate, EstimError, SequenceView};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RnnOptions {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Arms with fewer training sequences are skipped.
    pub min_sequences: usize,
}

impl Default for RnnOptions {
    fn default() -> Self {
        Self { hidden: 16, epochs: 500, learning_rate: 0.01, seed: 0, min_sequences: 10 }
    }
}

/// Elman network `h_t = tanh(W_x x_t + W_h h_{t-1} + b)`, `ŷ = w·h_T + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentRegressor {
    pub input: usize,
    pub hidden: usize,
    /// Layout: `W_x` (row-major `hidden × input`), `W_h`, `b`, `w`, `c`.
    pub params: Vec<f64>,
}

impl RecurrentRegressor {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let n = hidden * input + hidden * hidden + 2 * hidden + 1;
        let s = 1.0 / (hidden as f64).sqrt();
        let params = (0..n).map(|_| rng.random_range(-s..s)).collect();
        Self { input, hidden, params }
    }

    fn offsets(&self) -> (usize, usize, usize, usize) {
        let (h, d) = (self.hidden, self.input);
        let wh = h * d;
        let b = wh + h * h;
        let w = b + h;
        (wh, b, w, w + h)
    }

    fn states(&self, seq: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let (h, d) = (self.hidden, self.input);
        let (wh, b, _, _) = self.offsets();
        let p = &self.params;
        let mut hs: Vec<Vec<f64>> = Vec::with_capacity(seq.len());
        for x in seq {
            let prev = hs.last();
            let mut cur = vec![0.0; h];
            for (i, c) in cur.iter_mut().enumerate() {
                let mut acc = p[b + i];
                acc += p[i * d..(i + 1) * d].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                if let Some(prev) = prev {
                    acc += p[wh + i * h..wh + (i + 1) * h].iter().zip(prev).map(|(w, v)| w * v).sum::<f64>();
                }
                *c = acc.tanh();
            }
            hs.push(cur);
        }
        hs
    }

    pub fn predict(&self, seq: &[Vec<f64>]) -> f64 {
        let (_, _, w, c) = self.offsets();
        let hs = self.states(seq);
        let last = hs.last().expect("non-empty sequence");
        self.params[c] + self.params[w..c].iter().zip(last).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Mean squared error over the batch and its gradient by
    /// backpropagation through time.
    pub fn loss_and_grad(&self, seqs: &[Vec<Vec<f64>>], ys: &[f64]) -> (f64, Vec<f64>) {
        let (h, d) = (self.hidden, self.input);
        let (wh, b, w, c) = self.offsets();
        let p = &self.params;
        let n = seqs.len() as f64;
        let mut grad = vec![0.0; p.len()];
        let mut loss = 0.0;
        for (seq, y) in seqs.iter().zip(ys) {
            let hs = self.states(seq);
            let last = hs.last().expect("non-empty sequence");
            let pred = p[c] + p[w..c].iter().zip(last).map(|(a, b)| a * b).sum::<f64>();
            let r = pred - y;
            loss += r * r / n;
            let g = 2.0 * r / n;
            grad[c] += g;
            for i in 0..h {
                grad[w + i] += g * last[i];
            }
            let mut dh: Vec<f64> = p[w..c].iter().map(|v| g * v).collect();
            for t in (0..seq.len()).rev() {
                let da: Vec<f64> = dh.iter().zip(&hs[t]).map(|(g, v)| g * (1.0 - v * v)).collect();
                for i in 0..h {
                    grad[b + i] += da[i];
                    for (j, x) in seq[t].iter().enumerate() {
                        grad[i * d + j] += da[i] * x;
                    }
                    if t > 0 {
                        for (j, v) in hs[t - 1].iter().enumerate() {
                            grad[wh + i * h + j] += da[i] * v;
                        }
                    }
                }
                if t > 0 {
                    dh = (0..h).map(|j| (0..h).map(|i| p[wh + i * h + j] * da[i]).sum()).collect();
                }
            }
        }
        (loss, grad)
    }

    /// Full-batch gradient descent. Returns the loss before each epoch.
    pub fn train(
        &mut self,
        seqs: &[Vec<Vec<f64>>],
        ys: &[f64],
        epochs: usize,
        learning_rate: f64,
        arm: usize,
    ) -> Result<Vec<f64>, EstimError> {
        let mut history = Vec::with_capacity(epochs);
        for epoch in 0..epochs {
            let (loss, grad) = self.loss_and_grad(seqs, ys);
            if !loss.is_finite() {
                return Err(EstimError::DivergedLoss { arm, epoch });
            }
            history.push(loss);
            for (p, g) in self.params.iter_mut().zip(&grad) {
                *p -= learning_rate * g;
            }
        }
        Ok(history)
    }
}

struct Standardizer {
    mean: Vec<f64>,
    sd: Vec<f64>,
}

impl Standardizer {
    fn fit(seqs: &[Vec<Vec<f64>>]) -> Self {
        let d = seqs[0][0].len();
        let mut n = 0.0;
        let mut mean = vec![0.0; d];
        for x in seqs.iter().flatten() {
            n += 1.0;
            mean.iter_mut().zip(x).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut sd = vec![0.0; d];
        for x in seqs.iter().flatten() {
            sd.iter_mut().zip(x).zip(&mean).for_each(|((s, v), m)| *s += (v - m).powi(2));
        }
        sd.iter_mut().for_each(|s| {
            *s = (*s / n).sqrt();
            if s.is_nan() || *s <= 1e-12 {
                *s = 1.0;
            }
        });
        Self { mean, sd }
    }

    fn apply(&self, seq: &[Vec<f64>]) -> Vec<Vec<f64>> {
        seq.iter().map(|x| x.iter().zip(&self.mean).zip(&self.sd).map(|((v, m), s)| (v - m) / s).collect()).collect()
    }
}

/// Sequential T-learner: one recurrent outcome model per action over the
/// patient history, `τ̂(a | H) = μ̂_a(H) - μ̂_0(H)`.
pub fn seq_t_learner(view: &SequenceView, opts: &RnnOptions) -> Result<CateEstimate, EstimError> {
    if view.sequences.is_empty() {
        return Err(EstimError::InsufficientData("no sequences".into()));
    }
    let scaler = Standardizer::fit(&view.sequences);
    let inputs: Vec<Vec<Vec<f64>>> = view.sequences.iter().map(|s| scaler.apply(s)).collect();
    let counts = (0..view.n_actions).map(|a| view.actions.iter().filter(|b| **b == a).count()).collect::<Vec<_>>();
    if counts[0] < opts.min_sequences {
        return Err(EstimError::ArmStarved(vec![0]));
    }
    let predictions: Vec<Option<Vec<f64>>> = (0..view.n_actions)
        .into_par_iter()
        .map(|a| {
            if counts[a] < opts.min_sequences {
                log::warn!("seq-t learner: arm {a} has {} sequences; skipped", counts[a]);
                return Ok(None);
            }
            let (xs, ys): (Vec<Vec<Vec<f64>>>, Vec<f64>) = inputs
                .iter()
                .zip(&view.actions)
                .zip(&view.outcomes)
                .filter(|((_, b), _)| **b == a)
                .map(|((x, _), y)| (x.clone(), *y))
                .unzip();
            let my = ys.iter().sum::<f64>() / ys.len() as f64;
            let mut sy = (ys.iter().map(|y| (y - my).powi(2)).sum::<f64>() / ys.len() as f64).sqrt();
            if sy.is_nan() || sy <= 1e-12 {
                sy = 1.0;
            }
            let ys: Vec<f64> = ys.iter().map(|y| (y - my) / sy).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(a as u64);
            let mut net = RecurrentRegressor::new(view.names.len(), opts.hidden, &mut rng);
            net.train(&xs, &ys, opts.epochs, opts.learning_rate, a)?;
            Ok(Some(inputs.iter().map(|s| my + sy * net.predict(s)).collect()))
        })
        .collect::<Result<_, EstimError>>()?;
    let mu0 = predictions[0].as_ref().expect("arm 0 checked");
    let mut arms = Vec::new();
    let mut skipped = Vec::new();
    let mut tau_hat = Vec::new();
    for (a, p) in predictions.iter().enumerate().skip(1) {
        match p {
            Some(p) => {
                arms.push(a);
                tau_hat.push(p.iter().zip(mu0).map(|(x, y)| x - y).collect());
            }
            None => skipped.push(a),
        }
    }
    if arms.is_empty() {
        return Err(EstimError::ArmStarved(skipped));
    }
    Ok(CateEstimate { units: view.units.clone(), n_actions: view.n_actions, arms, tau_hat, skipped })
}
