//! Fully connected ReLU networks and their exact hybrid-zonotope graphs.

use std::path::Path;

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Domain, IOSet, Surrogate};
use crate::error::{Error, Result};
use crate::hybzono::{matrix_from_rows, HybridZonotope};
use crate::solver::MiSolver;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// Hidden layers use `max(0, .)`; the last layer is affine.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluNetwork {
    layers: Vec<Layer>,
}

impl ReluNetwork {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::InvalidInput("network needs at least one hidden layer".into()));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.w.nrows() != l.b.len() {
                return Err(Error::InvalidInput(format!(
                    "layer {k}: weight has {} rows but bias has {} entries",
                    l.w.nrows(),
                    l.b.len()
                )));
            }
            if l.w.nrows() == 0 || l.w.ncols() == 0 {
                return Err(Error::InvalidInput(format!("layer {k} is empty")));
            }
            if l.w.iter().chain(l.b.iter()).any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("layer {k} has non-finite parameters")));
            }
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[1].w.ncols() != pair[0].w.nrows() {
                return Err(Error::InvalidInput(format!(
                    "layer {} expects {} inputs but layer {k} has {} outputs",
                    k + 1,
                    pair[1].w.ncols(),
                    pair[0].w.nrows()
                )));
            }
        }
        Ok(ReluNetwork { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].w.nrows()
    }

    /// Hidden layer widths.
    pub fn layout(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.w.nrows()).collect()
    }

    pub fn forward(&self, p: &[f64]) -> DVector<f64> {
        let mut a = DVector::from_column_slice(p);
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            a = &l.w * a + &l.b;
            if k < last {
                a.apply(|v| *v = v.max(0.0));
            }
        }
        a
    }

    /// Product of the layer spectral norms.
    pub fn lipschitz_bound(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.w.singular_values().iter().copied().fold(0.0, f64::max))
            .product()
    }
}

impl Surrogate for ReluNetwork {
    fn arity(&self) -> usize {
        self.input_dim()
    }

    fn eval(&self, p: &[f64]) -> f64 {
        self.forward(p)[0]
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz_bound()
    }
}

/// Graph of `max(0, z)` over `[l, u]` with `l < 0 < u`, in `(z, y)`.
///
/// The binary factor selects the active (`+1`) or inactive (`-1`) segment.
fn neuron_graph(l: f64, u: f64) -> HybridZonotope {
    let gc = DMatrix::from_row_slice(2, 4, &[0.5 * l, 0.5 * u, 0.0, 0.0, 0.0, 0.5 * u, 0.0, 0.0]);
    let gb = DMatrix::zeros(2, 1);
    let c = DVector::from_column_slice(&[0.5 * (l + u), 0.5 * u]);
    let ac = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
    let ab = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
    let b = DVector::from_column_slice(&[-1.0, -1.0]);
    HybridZonotope::new(gc, gb, c, ac, ab, b).expect("consistent neuron graph")
}

/// Interval image of the box `[lo, hi]` under `x -> W x + b`.
fn affine_bounds(w: &DMatrix<f64>, b: &DVector<f64>, lo: &[f64], hi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut out_lo = Vec::with_capacity(w.nrows());
    let mut out_hi = Vec::with_capacity(w.nrows());
    for i in 0..w.nrows() {
        let mut mid = b[i];
        let mut rad = 0.0;
        for j in 0..w.ncols() {
            mid += w[(i, j)] * 0.5 * (lo[j] + hi[j]);
            rad += w[(i, j)].abs() * 0.5 * (hi[j] - lo[j]);
        }
        let (l, u) = (mid - rad, mid + rad);
        if !l.is_finite() || !u.is_finite() {
            return Err(Error::InvalidInput(format!("pre-activation bound overflow in neuron {i}")));
        }
        out_lo.push(l);
        out_hi.push(u);
    }
    Ok((out_lo, out_hi))
}

/// How pre-activation bounds are obtained during conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreactivationBounds {
    /// Interval arithmetic, layer by layer.
    #[default]
    Interval,
    /// Support queries on the exact graph of the preceding layers. Tighter,
    /// so fewer neurons need a binary factor, at the cost of solving two
    /// mixed-integer programs per neuron.
    Exact,
}

/// Exact graph `{(p, net(p)) | p in domain}`.
///
/// Pre-activation bounds come from interval arithmetic. Neurons whose sign
/// is certified on the domain are linear and need no binary factor.
pub fn relu_to_ioset(net: &ReluNetwork, domain: &Domain) -> Result<IOSet> {
    relu_to_ioset_with(net, domain, PreactivationBounds::Interval)
}

pub fn relu_to_ioset_with(net: &ReluNetwork, domain: &Domain, bounds: PreactivationBounds) -> Result<IOSet> {
    let np = net.input_dim();
    if domain.dim() != np {
        return Err(Error::dim("relu_to_ioset", np, domain.dim()));
    }
    let dset = domain.to_set();
    // Activations start as the input itself: (p, a) with a = p.
    let mut set = dset.linear_map(&DMatrix::from_fn(2 * np, np, |i, j| if i % np == j { 1.0 } else { 0.0 }))?;
    let (mut lo, mut hi) = (domain.lo.clone(), domain.hi.clone());
    let last = net.layers.len() - 1;
    for (k, layer) in net.layers.iter().enumerate() {
        let width = layer.w.nrows();
        let cur = set.n() - np;
        // (p, a) -> (p, W a + b)
        let mut lift = DMatrix::zeros(np + width, np + cur);
        lift.view_mut((0, 0), (np, np)).fill_with_identity();
        lift.view_mut((np, np), (width, cur)).copy_from(&layer.w);
        let mut offset = DVector::zeros(np + width);
        offset.rows_mut(np, width).copy_from(&layer.b);
        set = set.linear_map(&lift)?.translate(&offset)?;
        let (mut zl, mut zu) = affine_bounds(&layer.w, &layer.b, &lo, &hi)?;
        if bounds == PreactivationBounds::Exact && k > 0 && k < last {
            let solver = MiSolver::default();
            let n = set.n();
            for j in 0..width {
                let mut d = vec![0.0; n];
                d[np + j] = 1.0;
                zu[j] = zu[j].min(solver.support(&set, &d)?);
                d[np + j] = -1.0;
                zl[j] = zl[j].max(-solver.support(&set, &d)?);
            }
        }
        if k == last {
            break;
        }
        let unstable: Vec<usize> = (0..width).filter(|&j| zl[j] < 0.0 && zu[j] > 0.0).collect();
        debug!(
            "layer {k}: {} of {width} neurons need a binary factor",
            unstable.len()
        );
        let base = set.n();
        if !unstable.is_empty() {
            let mut graphs = neuron_graph(zl[unstable[0]], zu[unstable[0]]);
            for &j in &unstable[1..] {
                graphs = graphs.cartesian_product(&neuron_graph(zl[j], zu[j]));
            }
            let joined = set.cartesian_product(&graphs);
            let mut r = DMatrix::zeros(unstable.len(), joined.n());
            for (t, &j) in unstable.iter().enumerate() {
                r[(t, np + j)] = 1.0;
                r[(t, base + 2 * t)] = -1.0;
            }
            set = joined.generalized_intersection(&r, &HybridZonotope::point(&vec![0.0; unstable.len()]))?;
        }
        // (p, z, [z_u, y_u]...) -> (p, relu(z))
        let mut act = DMatrix::zeros(np + width, set.n());
        act.view_mut((0, 0), (np, np)).fill_with_identity();
        for j in 0..width {
            if zl[j] >= 0.0 {
                act[(np + j, np + j)] = 1.0;
            }
        }
        for (t, &j) in unstable.iter().enumerate() {
            act[(np + j, base + 2 * t + 1)] = 1.0;
        }
        set = set.linear_map(&act)?;
        lo = zl.iter().map(|v| v.max(0.0)).collect();
        hi = zu.iter().map(|v| v.max(0.0)).collect();
    }
    IOSet::new(set, np, dset)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawNetwork {
    layers: Vec<RawLayer>,
}

impl Serialize for ReluNetwork {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RawNetwork {
            layers: self
                .layers
                .iter()
                .map(|l| RawLayer {
                    w: l.w.row_iter().map(|r| r.iter().copied().collect()).collect(),
                    b: l.b.iter().copied().collect(),
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ReluNetwork {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawNetwork::deserialize(deserializer)?;
        let mut layers = Vec::with_capacity(raw.layers.len());
        for (k, l) in raw.layers.into_iter().enumerate() {
            let rows = l.w.len();
            let cols = l.w.first().map_or(0, Vec::len);
            let w = matrix_from_rows(&l.w, rows, cols)
                .map_err(|e| D::Error::custom(format!("layer {k}: {e}")))?;
            layers.push(Layer {
                w,
                b: DVector::from_vec(l.b),
            });
        }
        ReluNetwork::new(layers).map_err(D::Error::custom)
    }
}

pub fn load_relu(path: &Path) -> Result<ReluNetwork> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_relu(net: &ReluNetwork, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(net)?)?;
    Ok(())
}
