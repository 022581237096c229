use rand::Rng;
use serde::{Deserialize, Serialize};

/// Affine → tanh → affine encoder. Weights are row-major `(out, in)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tower {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct Activations {
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
}

impl Tower {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, output: usize, rng: &mut R) -> Self {
        let glorot = |fan_in: usize, fan_out: usize, rng: &mut R| -> Vec<f64> {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..=limit))
                .collect()
        };
        let w1 = glorot(input, hidden, rng);
        let w2 = glorot(hidden, output, rng);
        Self {
            input,
            hidden,
            output,
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: vec![0.0; output],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            input: self.input,
            hidden: self.hidden,
            output: self.output,
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.b2.len()],
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Parameters in checkpoint order: w1, b1, w2, b2.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
    }

    pub(crate) fn shape_is_consistent(&self) -> bool {
        self.w1.len() == self.input * self.hidden
            && self.b1.len() == self.hidden
            && self.w2.len() == self.hidden * self.output
            && self.b2.len() == self.output
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).output
    }

    pub(crate) fn forward_cached(&self, x: &[f64]) -> Activations {
        debug_assert_eq!(x.len(), self.input);
        let hidden: Vec<f64> = self
            .w1
            .chunks_exact(self.input)
            .zip(&self.b1)
            .map(|(row, b)| (dot(row, x) + b).tanh())
            .collect();
        let output = self
            .w2
            .chunks_exact(self.hidden)
            .zip(&self.b2)
            .map(|(row, b)| dot(row, &hidden) + b)
            .collect();
        Activations { hidden, output }
    }

    /// Accumulates parameter gradients into `grad` given `d loss / d output`.
    pub(crate) fn backward(&self, x: &[f64], acts: &Activations, d_out: &[f64], grad: &mut Tower) {
        let mut d_hidden = vec![0.0; self.hidden];
        for (o, &g) in d_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.b2[o] += g;
            let row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
            let grow = &mut grad.w2[o * self.hidden..(o + 1) * self.hidden];
            for j in 0..self.hidden {
                grow[j] += g * acts.hidden[j];
                d_hidden[j] += g * row[j];
            }
        }
        for (j, dh) in d_hidden.iter().enumerate() {
            let h = acts.hidden[j];
            let d_pre = dh * (1.0 - h * h);
            if d_pre == 0.0 {
                continue;
            }
            grad.b1[j] += d_pre;
            let grow = &mut grad.w1[j * self.input..(j + 1) * self.input];
            for (g, xi) in grow.iter_mut().zip(x) {
                *g += d_pre * xi;
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
