//! One-hidden-layer perceptron trained with mini-batch gradient descent on
//! softmax cross-entropy. The hidden activations serve as embeddings.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use super::EmbedError;
use crate::seeding::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    /// no nonlinearity; makes the network a linear softmax model
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    fn grad(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Weights are row-major: `w1` is H×D, `w2` is C×H.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_classes: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpHyper {
    pub hidden_dim: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

/// Gradients in the same layout as the model parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    fn zeros(m: &MlpModel) -> Self {
        Self {
            w1: vec![0.0; m.w1.len()],
            b1: vec![0.0; m.b1.len()],
            w2: vec![0.0; m.w2.len()],
            b2: vec![0.0; m.b2.len()],
        }
    }
}

fn softmax_in_place(v: &mut [f64]) {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - m).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

impl MlpModel {
    /// He initialization (`N(0, 2/fan_in)` weights, zero biases).
    pub fn init(input_dim: usize, hidden_dim: usize, n_classes: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, "mlp-init", &[]);
        let n1 = Normal::new(0.0, (2.0 / input_dim as f64).sqrt()).expect("positive scale");
        let n2 = Normal::new(0.0, (2.0 / hidden_dim as f64).sqrt()).expect("positive scale");
        let w1 = (0..hidden_dim * input_dim).map(|_| n1.sample(&mut rng)).collect();
        let w2 = (0..n_classes * hidden_dim).map(|_| n2.sample(&mut rng)).collect();
        Self {
            input_dim,
            hidden_dim,
            n_classes,
            w1,
            b1: vec![0.0; hidden_dim],
            w2,
            b2: vec![0.0; n_classes],
            activation: Activation::Relu,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), EmbedError> {
        if x.len() != self.input_dim {
            return Err(EmbedError::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Pre-activations and activations of the hidden layer.
    fn hidden(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.input_dim;
        let z: Vec<f64> = (0..self.hidden_dim)
            .map(|j| {
                let row = &self.w1[j * d..(j + 1) * d];
                self.b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        let h = z.iter().map(|&v| self.activation.apply(v)).collect();
        (z, h)
    }

    fn logits(&self, h: &[f64]) -> Vec<f64> {
        let hd = self.hidden_dim;
        (0..self.n_classes)
            .map(|c| {
                self.b2[c]
                    + self.w2[c * hd..(c + 1) * hd]
                        .iter()
                        .zip(h)
                        .map(|(w, v)| w * v)
                        .sum::<f64>()
            })
            .collect()
    }

    /// Hidden-layer activation vector.
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>, EmbedError> {
        self.check_dim(x)?;
        Ok(self.hidden(x).1)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, EmbedError> {
        self.check_dim(x)?;
        let mut p = self.logits(&self.hidden(x).1);
        softmax_in_place(&mut p);
        Ok(p)
    }

    /// Cross-entropy of one sample, accumulating `scale`-weighted gradients
    /// into `g` when given.
    #[allow(clippy::needless_range_loop)]
    fn loss_and_grad(&self, x: &[f64], label: usize, scale: f64, g: Option<&mut Gradients>) -> f64 {
        let (z, h) = self.hidden(x);
        let mut p = self.logits(&h);
        softmax_in_place(&mut p);
        let loss = -p[label].max(f64::MIN_POSITIVE).ln();
        if let Some(g) = g {
            let hd = self.hidden_dim;
            let d = self.input_dim;
            let mut dh = vec![0.0; hd];
            for c in 0..self.n_classes {
                let dl = (p[c] - if c == label { 1.0 } else { 0.0 }) * scale;
                g.b2[c] += dl;
                let wrow = &self.w2[c * hd..(c + 1) * hd];
                let grow = &mut g.w2[c * hd..(c + 1) * hd];
                for j in 0..hd {
                    grow[j] += dl * h[j];
                    dh[j] += dl * wrow[j];
                }
            }
            for j in 0..hd {
                let dz = dh[j] * self.activation.grad(z[j]);
                if dz == 0.0 {
                    continue;
                }
                g.b1[j] += dz;
                for (gw, &xv) in g.w1[j * d..(j + 1) * d].iter_mut().zip(x) {
                    *gw += dz * xv;
                }
            }
        }
        loss
    }

    /// Mean cross-entropy over a labeled set.
    pub fn loss(&self, xs: &[Vec<f64>], labels: &[usize]) -> f64 {
        xs.iter()
            .zip(labels)
            .map(|(x, &y)| self.loss_and_grad(x, y, 0.0, None))
            .sum::<f64>()
            / xs.len().max(1) as f64
    }

    pub fn accuracy(&self, xs: &[Vec<f64>], labels: &[usize]) -> f64 {
        let hits = xs
            .iter()
            .zip(labels)
            .filter(|(x, &y)| {
                let p = self.logits(&self.hidden(x).1);
                let arg = (0..p.len())
                    .max_by(|&a, &b| p[a].total_cmp(&p[b]).then(b.cmp(&a)))
                    .unwrap();
                arg == y
            })
            .count();
        hits as f64 / xs.len().max(1) as f64
    }

    /// Analytic gradient of a single sample's loss.
    pub fn gradient(&self, x: &[f64], label: usize) -> Gradients {
        let mut g = Gradients::zeros(self);
        self.loss_and_grad(x, label, 1.0, Some(&mut g));
        g
    }

    fn params_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    const MAGIC: &'static [u8; 8] = b"ECGMLP01";

    /// Magic, `u32` dims (D, H, C), activation byte, then W1, b1, W2, b2 as
    /// little-endian `f64`, row-major.
    pub fn save(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(Self::MAGIC)?;
        for d in [self.input_dim, self.hidden_dim, self.n_classes] {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        w.write_all(&[match self.activation {
            Activation::Relu => 0u8,
            Activation::Identity => 1u8,
        }])?;
        for v in [&self.w1, &self.b1, &self.w2, &self.b2] {
            for x in v.iter() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(mut r: impl Read) -> Result<Self, EmbedError> {
        let bad = |e: std::io::Error| EmbedError::BadModelFile(e.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(bad)?;
        if &magic != Self::MAGIC {
            return Err(EmbedError::BadModelFile("bad magic".into()));
        }
        let mut dims = [0usize; 3];
        for d in dims.iter_mut() {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(bad)?;
            *d = u32::from_le_bytes(b) as usize;
        }
        let mut act = [0u8; 1];
        r.read_exact(&mut act).map_err(bad)?;
        let activation = match act[0] {
            0 => Activation::Relu,
            1 => Activation::Identity,
            a => return Err(EmbedError::BadModelFile(format!("unknown activation {a}"))),
        };
        let [d, h, c] = dims;
        let mut read_vec = |n: usize| -> Result<Vec<f64>, EmbedError> {
            let mut buf = vec![0u8; n * 8];
            r.read_exact(&mut buf).map_err(bad)?;
            Ok(buf
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect())
        };
        Ok(Self {
            input_dim: d,
            hidden_dim: h,
            n_classes: c,
            w1: read_vec(h * d)?,
            b1: read_vec(h)?,
            w2: read_vec(c * h)?,
            b2: read_vec(c)?,
            activation,
        })
    }
}

/// Trains from He initialization. Returns the model and the mean training
/// loss after each epoch.
pub fn mlp_train(xs: &[Vec<f64>], labels: &[usize], hp: &MlpHyper) -> Result<(MlpModel, Vec<f64>), EmbedError> {
    if xs.len() != labels.len() || xs.is_empty() {
        return Err(EmbedError::InvalidSettings(
            "need equal, non-empty inputs and labels".into(),
        ));
    }
    let d = xs[0].len();
    if let Some(bad) = xs.iter().find(|x| x.len() != d) {
        return Err(EmbedError::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let distinct = {
        let mut l = labels.to_vec();
        l.sort_unstable();
        l.dedup();
        l.len()
    };
    if distinct < 2 {
        return Err(EmbedError::SingleClass);
    }
    if hp.hidden_dim == 0 || hp.batch == 0 || !(hp.lr > 0.0) {
        return Err(EmbedError::InvalidSettings(
            "hidden_dim, batch and lr must be positive".into(),
        ));
    }
    let mut model = MlpModel::init(d, hp.hidden_dim, n_classes, hp.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut losses = Vec::with_capacity(hp.epochs);
    for epoch in 0..hp.epochs {
        let mut rng = rng_for(hp.seed, "mlp-shuffle", &[epoch as u64]);
        order.sort_unstable();
        order.shuffle(&mut rng);
        for batch in order.chunks(hp.batch) {
            let mut g = Gradients::zeros(&model);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                model.loss_and_grad(&xs[i], labels[i], scale, Some(&mut g));
            }
            let grads = [&g.w1, &g.b1, &g.w2, &g.b2];
            for (p, gv) in model.params_mut().into_iter().zip(grads) {
                for (w, dw) in p.iter_mut().zip(gv.iter()) {
                    *w -= hp.lr * dw;
                }
            }
        }
        losses.push(model.loss(xs, labels));
    }
    Ok((model, losses))
}

/// Largest relative difference between analytic gradients and central
/// finite differences over every parameter.
pub fn gradient_check(model: &MlpModel, x: &[f64], label: usize, fd_step: f64) -> f64 {
    let analytic = model.gradient(x, label);
    let ga = [&analytic.w1, &analytic.b1, &analytic.w2, &analytic.b2];
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (k, grad) in ga.iter().enumerate() {
        for i in 0..grad.len() {
            let orig = probe.params_mut()[k][i];
            probe.params_mut()[k][i] = orig + fd_step;
            let up = probe.loss_and_grad(x, label, 0.0, None);
            probe.params_mut()[k][i] = orig - fd_step;
            let down = probe.loss_and_grad(x, label, 0.0, None);
            probe.params_mut()[k][i] = orig;
            let numeric = (up - down) / (2.0 * fd_step);
            let a = grad[i];
            let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-12);
            worst = worst.max(err);
        }
    }
    worst
}
