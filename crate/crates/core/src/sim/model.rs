//! Toy split network with hand-derived backprop.
//!
//! Client front: `a = tanh(x W1 + b1)`. Server back:
//! `h = tanh(a W2 + b2)`, `logits = h W3 + b3`, softmax cross-entropy averaged
//! over the batch. Activations are batch-major (`batch x features`).

use crate::tensor::{gaussian, Mat, RngSeed};

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `inputs x outputs`.
    pub w: Mat,
    pub b: Vec<f64>,
}

impl Dense {
    /// Gaussian weights with variance `1 / inputs`, zero bias.
    pub fn init(inputs: usize, outputs: usize, seed: RngSeed) -> Dense {
        Dense {
            w: gaussian(inputs, outputs, seed).scale(1.0 / (inputs as f64).sqrt()),
            b: vec![0.0; outputs],
        }
    }

    pub fn affine(&self, x: &Mat) -> Mat {
        let mut z = x.matmul(&self.w).expect("layer input width");
        let cols = z.cols();
        for (i, v) in z.as_mut_slice().iter_mut().enumerate() {
            *v += self.b[i % cols];
        }
        z
    }

    /// Gradients of `(x W + b)` given the upstream gradient `dz`.
    fn grads(&self, x: &Mat, dz: &Mat) -> DenseGrad {
        DenseGrad {
            w: x.t_matmul(dz).expect("layer grad shapes"),
            b: column_sums(dz),
        }
    }

    pub fn sgd(&mut self, g: &DenseGrad, lr: f64) {
        self.w.axpy(-lr, &g.w).expect("grad shape");
        for (b, gb) in self.b.iter_mut().zip(&g.b) {
            *b -= lr * gb;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub w: Mat,
    pub b: Vec<f64>,
}

fn column_sums(m: &Mat) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (o, v) in out.iter_mut().zip(m.row(i)) {
            *o += v;
        }
    }
    out
}

/// `grad ⊙ (1 - y^2)` for `y = tanh(z)`.
fn tanh_backward(grad: &Mat, y: &Mat) -> Mat {
    Mat::from_fn(grad.rows(), grad.cols(), |i, j| {
        let t = y.get(i, j);
        grad.get(i, j) * (1.0 - t * t)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientFront {
    pub layer: Dense,
}

impl ClientFront {
    pub fn init(d_in: usize, hidden: usize, seed: RngSeed) -> ClientFront {
        ClientFront {
            layer: Dense::init(d_in, hidden, seed),
        }
    }

    pub fn forward(&self, x: &Mat) -> Mat {
        self.layer.affine(x).map(f64::tanh)
    }

    /// Parameter gradients from the (possibly reconstructed) gradient with
    /// respect to the activations `a = forward(x)`.
    pub fn backward(&self, x: &Mat, a: &Mat, grad_a: &Mat) -> DenseGrad {
        self.layer.grads(x, &tanh_backward(grad_a, a))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerBack {
    pub hidden: Dense,
    pub out: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerGrad {
    pub hidden: DenseGrad,
    pub out: DenseGrad,
}

#[derive(Debug, Clone)]
pub struct ServerStep {
    pub loss: f64,
    /// Gradient of the loss with respect to the received activations.
    pub grad_a: Mat,
    pub grads: ServerGrad,
}

impl ServerBack {
    pub fn init(hidden: usize, hidden2: usize, classes: usize, seed: RngSeed) -> ServerBack {
        ServerBack {
            hidden: Dense::init(hidden, hidden2, seed.derive(0)),
            out: Dense::init(hidden2, classes, seed.derive(1)),
        }
    }

    pub fn logits(&self, a: &Mat) -> Mat {
        let h = self.hidden.affine(a).map(f64::tanh);
        self.out.affine(&h)
    }

    pub fn loss(&self, a: &Mat, labels: &[usize]) -> f64 {
        let probs = softmax(&self.logits(a));
        cross_entropy(&probs, labels)
    }

    pub fn forward_backward(&self, a: &Mat, labels: &[usize]) -> ServerStep {
        let h = self.hidden.affine(a).map(f64::tanh);
        let probs = softmax(&self.out.affine(&h));
        let loss = cross_entropy(&probs, labels);

        let batch = a.rows() as f64;
        let mut dlogits = probs;
        for (i, &y) in labels.iter().enumerate() {
            let v = dlogits.get(i, y);
            dlogits.set(i, y, v - 1.0);
        }
        dlogits.scale_in_place(1.0 / batch);

        let out = self.out.grads(&h, &dlogits);
        let dh = dlogits.matmul_t(&self.out.w).expect("out layer shapes");
        let dz2 = tanh_backward(&dh, &h);
        let hidden = self.hidden.grads(a, &dz2);
        let grad_a = dz2.matmul_t(&self.hidden.w).expect("hidden layer shapes");
        ServerStep {
            loss,
            grad_a,
            grads: ServerGrad { hidden, out },
        }
    }

    pub fn sgd(&mut self, g: &ServerGrad, lr: f64) {
        self.hidden.sgd(&g.hidden, lr);
        self.out.sgd(&g.out, lr);
    }
}

fn softmax(logits: &Mat) -> Mat {
    let mut p = logits.clone();
    let cols = p.cols();
    for row in p.as_mut_slice().chunks_mut(cols) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    p
}

fn cross_entropy(probs: &Mat, labels: &[usize]) -> f64 {
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -probs.get(i, y).max(1e-300).ln())
        .sum();
    total / labels.len() as f64
}

/// Index of the largest logit per row; ties go to the lower class.
pub fn argmax_rows(logits: &Mat) -> Vec<usize> {
    (0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            (0..row.len())
                .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
                .unwrap_or(0)
        })
        .collect()
}

pub fn accuracy(logits: &Mat, labels: &[usize]) -> f64 {
    let hits = argmax_rows(logits).iter().zip(labels).filter(|(p, y)| p == y).count();
    hits as f64 / labels.len() as f64
}

/// Client front and server back composed, used for evaluation, the unsplit
/// reference trainer and gradient checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub client: ClientFront,
    pub server: ServerBack,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyGradients {
    pub client: DenseGrad,
    pub server: ServerGrad,
}

impl ToyModel {
    pub fn loss(&self, x: &Mat, labels: &[usize]) -> f64 {
        self.server.loss(&self.client.forward(x), labels)
    }

    pub fn gradients(&self, x: &Mat, labels: &[usize]) -> (f64, ToyGradients) {
        let a = self.client.forward(x);
        let step = self.server.forward_backward(&a, labels);
        let client = self.client.backward(x, &a, &step.grad_a);
        (
            step.loss,
            ToyGradients {
                client,
                server: step.grads,
            },
        )
    }

    pub fn predict(&self, x: &Mat) -> Vec<usize> {
        argmax_rows(&self.server.logits(&self.client.forward(x)))
    }

    pub fn accuracy(&self, x: &Mat, labels: &[usize]) -> f64 {
        accuracy(&self.server.logits(&self.client.forward(x)), labels)
    }

    /// Mutable views of every parameter block, in the order
    /// `W1, b1, W2, b2, W3, b3`.
    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.client.layer.w.as_mut_slice(),
            &mut self.client.layer.b,
            self.server.hidden.w.as_mut_slice(),
            &mut self.server.hidden.b,
            self.server.out.w.as_mut_slice(),
            &mut self.server.out.b,
        ]
    }
}

impl ToyGradients {
    /// Gradient blocks in the order of [`ToyModel::param_blocks_mut`].
    pub fn blocks(&self) -> Vec<&[f64]> {
        vec![
            self.client.w.as_slice(),
            &self.client.b,
            self.server.hidden.w.as_slice(),
            &self.server.hidden.b,
            self.server.out.w.as_slice(),
            &self.server.out.b,
        ]
    }
}
