//! Synthetic classification data: Gaussian class clusters, split IID.

use rand::seq::SliceRandom;

use crate::tensor::{gaussian, Mat, RngSeed};

#[derive(Debug, Clone, PartialEq)]
pub struct Shard {
    /// `samples x d_in`.
    pub x: Mat,
    pub y: Vec<usize>,
}

impl Shard {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Mini-batch `index` of size `batch`, wrapping around the shard.
    pub fn batch(&self, index: usize, batch: usize) -> Shard {
        let n = self.len();
        let idx: Vec<usize> = (0..batch).map(|i| (index * batch + i) % n).collect();
        Shard {
            x: self.x.select_rows(&idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }

    pub fn label_histogram(&self, classes: usize) -> Vec<usize> {
        let mut h = vec![0; classes];
        for &y in &self.y {
            h[y] += 1;
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskSpec {
    pub seed: RngSeed,
    pub n_clients: usize,
    pub samples_per_client: usize,
    pub eval_samples: usize,
    pub d_in: usize,
    pub classes: usize,
    /// Norm of each class mean; noise is unit-variance per coordinate.
    pub separation: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub shards: Vec<Shard>,
    pub eval: Shard,
    pub classes: usize,
}

/// Class means are random directions scaled to `separation`; samples add
/// standard normal noise. Labels are balanced and dealt round-robin per
/// class, so every client sees the global label mix.
pub fn make_synthetic_task(spec: &TaskSpec) -> SyntheticTask {
    assert!(spec.classes >= 2, "need at least two classes");
    let means = gaussian(spec.classes, spec.d_in, spec.seed.derive(0));
    let means = Mat::from_fn(spec.classes, spec.d_in, |c, j| {
        let norm = means.row(c).iter().map(|v| v * v).sum::<f64>().sqrt();
        means.get(c, j) * spec.separation / norm
    });

    let total = spec.n_clients * spec.samples_per_client;
    let train = draw(&means, total, spec.seed.derive(1));
    let eval = draw(&means, spec.eval_samples, spec.seed.derive(2));

    let mut rng = spec.seed.derive(3).rng();
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); spec.classes];
    for (i, &y) in train.y.iter().enumerate() {
        per_class[y].push(i);
    }
    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); spec.n_clients];
    let mut next = 0;
    for idx in per_class.iter_mut() {
        idx.shuffle(&mut rng);
        for &i in idx.iter() {
            assigned[next % spec.n_clients].push(i);
            next += 1;
        }
    }
    let shards = assigned
        .into_iter()
        .map(|mut idx| {
            idx.shuffle(&mut rng);
            Shard {
                x: train.x.select_rows(&idx),
                y: idx.iter().map(|&i| train.y[i]).collect(),
            }
        })
        .collect();
    SyntheticTask {
        shards,
        eval,
        classes: spec.classes,
    }
}

fn draw(means: &Mat, n: usize, seed: RngSeed) -> Shard {
    let d = means.cols();
    let noise = gaussian(n, d, seed);
    let y: Vec<usize> = (0..n).map(|i| i % means.rows()).collect();
    let x = Mat::from_fn(n, d, |i, j| means.get(y[i], j) + noise.get(i, j));
    Shard { x, y }
}
