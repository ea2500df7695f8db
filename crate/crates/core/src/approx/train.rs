//! Deterministic full-batch training of small ReLU networks.

use log::info;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::relu::{Layer, ReluNetwork};
use super::{Domain, FunctionHandle};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Plain gradient descent.
    Gd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Hidden layer widths.
    pub layout: Vec<usize>,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Approximate number of training points on a uniform grid.
    pub grid_points: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            layout: vec![4],
            iterations: 2000,
            learning_rate: 1e-2,
            grid_points: 1000,
            optimizer: Optimizer::Adam,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean squared error on the standardised targets.
    pub final_loss: f64,
    /// Maximum absolute error over the training grid, original units.
    pub sampled_max_error: f64,
    pub samples: usize,
}

fn training_grid(domain: &Domain, points: usize) -> Vec<Vec<f64>> {
    match domain.dim() {
        1 => domain.grid_axes(points.max(2))[0].iter().map(|&x| vec![x]).collect(),
        _ => {
            let per_axis = ((points as f64).sqrt().ceil() as usize).max(2);
            let axes = domain.grid_axes(per_axis);
            let mut out = Vec::with_capacity(per_axis * per_axis);
            for &y in &axes[1] {
                for &x in &axes[0] {
                    out.push(vec![x, y]);
                }
            }
            out
        }
    }
}

struct Adam {
    m: Vec<(DMatrix<f64>, DVector<f64>)>,
    v: Vec<(DMatrix<f64>, DVector<f64>)>,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(layers: &[Layer]) -> Self {
        let zeros: Vec<_> = layers
            .iter()
            .map(|l| (DMatrix::zeros(l.w.nrows(), l.w.ncols()), DVector::zeros(l.b.len())))
            .collect();
        Adam {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(&mut self, layers: &mut [Layer], grads: &[(DMatrix<f64>, DVector<f64>)], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for (k, (gw, gb)) in grads.iter().enumerate() {
            let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
            };
            let (mw, mb) = &mut self.m[k];
            let (vw, vb) = &mut self.v[k];
            for i in 0..gw.len() {
                update(&mut layers[k].w[i], &mut mw[i], &mut vw[i], gw[i]);
            }
            for i in 0..gb.len() {
                update(&mut layers[k].b[i], &mut mb[i], &mut vb[i], gb[i]);
            }
        }
    }
}

/// Fit a ReLU network to `f` on a uniform grid over `domain`.
///
/// Inputs are rescaled to `[-1, 1]` and targets standardised during
/// training; both transforms are folded back into the first and last layers.
/// The result depends only on the configuration.
pub fn train_relu(f: &FunctionHandle, domain: &Domain, cfg: &TrainConfig) -> Result<(ReluNetwork, TrainReport)> {
    let d = f.arity();
    if domain.dim() != d {
        return Err(Error::dim("train_relu", d, domain.dim()));
    }
    if cfg.layout.is_empty() || cfg.layout.contains(&0) {
        return Err(Error::InvalidInput("layout needs at least one nonempty hidden layer".into()));
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(Error::InvalidInput("learning rate must be positive".into()));
    }
    let pts = training_grid(domain, cfg.grid_points);
    let n = pts.len();
    let targets = pts.iter().map(|p| f.try_eval(p)).collect::<Result<Vec<_>>>()?;
    let mid: Vec<f64> = (0..d).map(|i| 0.5 * (domain.lo[i] + domain.hi[i])).collect();
    let half: Vec<f64> = (0..d).map(|i| 0.5 * (domain.hi[i] - domain.lo[i])).collect();
    let x = DMatrix::from_fn(d, n, |i, j| (pts[j][i] - mid[i]) / half[i]);
    let mean = targets.iter().sum::<f64>() / n as f64;
    let var = targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n as f64;
    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    let y = DMatrix::from_fn(1, n, |_, j| (targets[j] - mean) / scale);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dims = vec![d];
    dims.extend(&cfg.layout);
    dims.push(1);
    let mut layers: Vec<Layer> = dims
        .windows(2)
        .map(|w| Layer {
            w: DMatrix::from_fn(w[1], w[0], |_, _| rng.gen_range(-0.5..0.5)),
            b: DVector::from_fn(w[1], |_, _| rng.gen_range(-0.5..0.5)),
        })
        .collect();
    let mut adam = Adam::new(&layers);
    let last = layers.len() - 1;
    let mut loss = f64::NAN;
    for it in 0..cfg.iterations {
        // Forward pass, keeping pre-activations.
        let mut acts = vec![x.clone()];
        let mut pre = Vec::with_capacity(layers.len());
        for (k, l) in layers.iter().enumerate() {
            let mut z = &l.w * &acts[k];
            for mut col in z.column_iter_mut() {
                col += &l.b;
            }
            let a = if k < last { z.map(|v| v.max(0.0)) } else { z.clone() };
            pre.push(z);
            acts.push(a);
        }
        let resid = &acts[last + 1] - &y;
        loss = resid.iter().map(|r| r * r).sum::<f64>() / n as f64;
        if !loss.is_finite() {
            return Err(Error::Training(format!("non-finite loss at iteration {it}")));
        }
        let mut delta = resid * (2.0 / n as f64);
        let mut grads = vec![(DMatrix::zeros(0, 0), DVector::zeros(0)); layers.len()];
        for k in (0..layers.len()).rev() {
            if k < last {
                delta.zip_apply(&pre[k], |g, z| {
                    if z <= 0.0 {
                        *g = 0.0
                    }
                });
            }
            let gw = &delta * acts[k].transpose();
            let gb = DVector::from_iterator(delta.nrows(), delta.row_iter().map(|r| r.sum()));
            let next = layers[k].w.transpose() * &delta;
            grads[k] = (gw, gb);
            delta = next;
        }
        match cfg.optimizer {
            Optimizer::Gd => {
                for (l, (gw, gb)) in layers.iter_mut().zip(&grads) {
                    l.w -= gw * cfg.learning_rate;
                    l.b -= gb * cfg.learning_rate;
                }
            }
            Optimizer::Adam => adam.step(&mut layers, &grads, cfg.learning_rate),
        }
    }

    // Undo the normalisation.
    let first = &mut layers[0];
    for j in 0..d {
        let shift = mid[j] / half[j];
        for i in 0..first.w.nrows() {
            first.b[i] -= first.w[(i, j)] * shift;
        }
        first.w.column_mut(j).scale_mut(1.0 / half[j]);
    }
    let out = &mut layers[last];
    out.w.scale_mut(scale);
    out.b.scale_mut(scale);
    out.b.add_scalar_mut(mean);

    let net = ReluNetwork::new(layers)?;
    let sampled_max_error = pts
        .iter()
        .zip(&targets)
        .map(|(p, t)| (net.forward(p)[0] - t).abs())
        .fold(0.0, f64::max);
    if !sampled_max_error.is_finite() {
        return Err(Error::Training("network output is not finite".into()));
    }
    info!(
        "trained {:?} network on {} points: loss {:.3e}, max error {:.3e}",
        cfg.layout, n, loss, sampled_max_error
    );
    Ok((
        net,
        TrainReport {
            final_loss: loss,
            sampled_max_error,
            samples: n,
        },
    ))
}
