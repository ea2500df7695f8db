//! Over-approximating input-output sets of nonlinear maps.
//!
//! A surrogate `psi` of a scalar function `phi` is either a piecewise-linear
//! interpolant over breakpoints ([`sos`]) or a ReLU network ([`relu`]). Both
//! convert exactly to hybrid zonotopes; the input-output set of `phi` is then
//! covered by taking the Minkowski sum with `[-eps, eps]` on the output axis,
//! where `eps` bounds `|psi - phi|` over the domain.

pub mod relu;
pub mod sos;
pub mod train;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybzono::HybridZonotope;

pub use relu::{load_relu, relu_to_ioset, save_relu, ReluNetwork};
pub use sos::{build_m1, optimize_breakpoints, sos_to_ioset, Breakpoints, SOSApprox};
pub use train::{train_relu, Optimizer, TrainConfig, TrainReport};

/// Axis-aligned box domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidInput("domain bounds must be nonempty and of equal length".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::InvalidInput("domain needs finite bounds with lo < hi".into()));
        }
        Ok(Domain { lo, hi })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn to_set(&self) -> HybridZonotope {
        HybridZonotope::interval_box(&self.lo, &self.hi).expect("validated domain")
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (l, h))| *x >= l - tol && *x <= h + tol)
    }

    /// Uniform grid with `per_axis` points per axis, endpoints included.
    /// Returns the axis coordinates.
    pub fn grid_axes(&self, per_axis: usize) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| linspace(self.lo[i], self.hi[i], per_axis))
            .collect()
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type LipschitzFn = Arc<dyn Fn(&Domain) -> Option<f64> + Send + Sync>;

/// A scalar nonlinear map of one or two arguments.
#[derive(Clone)]
pub struct FunctionHandle {
    name: String,
    arity: usize,
    eval: Evaluator,
    lipschitz: Option<LipschitzFn>,
    affine: bool,
}

impl fmt::Debug for FunctionHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionHandle")
            .field("name", &self.name)
            .field("arity", &self.arity)
            .field("affine", &self.affine)
            .finish()
    }
}

/// Centres of the four sources in the signal-strength map.
pub const SOURCES: [[f64; 2]; 4] = [[1.0, 3.0], [-2.0, 2.0], [3.0, 0.0], [-1.0, -4.0]];

/// `sum_i 1 / (|x - s_i|^2 + 1)`.
pub fn four_sources(x: &[f64]) -> f64 {
    SOURCES
        .iter()
        .map(|s| {
            let dx = x[0] - s[0];
            let dy = x[1] - s[1];
            1.0 / (dx * dx + dy * dy + 1.0)
        })
        .sum()
}

impl FunctionHandle {
    pub fn new<F>(name: impl Into<String>, arity: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        FunctionHandle {
            name: name.into(),
            arity,
            eval: Arc::new(f),
            lipschitz: None,
            affine: false,
        }
    }

    /// Lipschitz constant (Euclidean) valid on every domain.
    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(Arc::new(move |_| Some(l)));
        self
    }

    pub fn with_lipschitz_fn<F>(mut self, f: F) -> Self
    where
        F: Fn(&Domain) -> Option<f64> + Send + Sync + 'static,
    {
        self.lipschitz = Some(Arc::new(f));
        self
    }

    pub fn affine(coeffs: Vec<f64>, offset: f64) -> Self {
        let l = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        let arity = coeffs.len();
        let mut h = FunctionHandle::new("affine", arity, move |x: &[f64]| {
            coeffs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + offset
        })
        .with_lipschitz(l);
        h.affine = true;
        h
    }

    /// `1 / x`, Lipschitz `1 / lo^2` on domains with `lo > 0`.
    pub fn inverse() -> Self {
        FunctionHandle::new("inv", 1, |x: &[f64]| 1.0 / x[0]).with_lipschitz_fn(|d| {
            (d.lo[0] > 0.0).then(|| 1.0 / (d.lo[0] * d.lo[0]))
        })
    }

    pub fn square() -> Self {
        FunctionHandle::new("square", 1, |x: &[f64]| x[0] * x[0])
            .with_lipschitz_fn(|d| Some(2.0 * d.lo[0].abs().max(d.hi[0].abs())))
    }

    /// The four-source signal map. Each term has gradient norm at most
    /// `9 / (8 sqrt 3)`.
    pub fn sources() -> Self {
        let l = 4.0 * 9.0 / (8.0 * 3f64.sqrt());
        FunctionHandle::new("sources", 2, four_sources).with_lipschitz(l)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn is_affine(&self) -> bool {
        self.affine
    }

    pub fn lipschitz_on(&self, d: &Domain) -> Option<f64> {
        self.lipschitz.as_ref().and_then(|f| f(d))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    /// Evaluate, rejecting non-finite results.
    pub fn try_eval(&self, x: &[f64]) -> Result<f64> {
        let v = self.eval(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidInput(format!(
                "{} evaluated to {v} at {x:?}",
                self.name
            )))
        }
    }
}

/// A scalar approximation `psi` of a function, with a Lipschitz bound.
pub trait Surrogate {
    fn arity(&self) -> usize;
    fn eval(&self, p: &[f64]) -> f64;
    /// Euclidean Lipschitz constant of the surrogate.
    fn lipschitz(&self) -> f64;
    /// True when `psi` is affine on each cell of a mesh and equals the
    /// target at the mesh vertices.
    fn interpolates_on_mesh(&self) -> bool {
        false
    }
}

/// Settings for the dense grid behind [`max_error_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorGrid {
    pub per_axis_1d: usize,
    pub per_axis_2d: usize,
}

impl Default for ErrorGrid {
    fn default() -> Self {
        ErrorGrid {
            per_axis_1d: 10_000,
            per_axis_2d: 1_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBound {
    pub eps: f64,
    pub sampled_max: f64,
    /// False when no Lipschitz constant was available and `eps` is only the
    /// sampled maximum.
    pub certified: bool,
    pub samples: usize,
}

/// Bound `sup |psi - phi|` over the domain.
///
/// The error is sampled on a uniform grid and padded by `L r`, where `L` is
/// the sum of the Lipschitz constants of `phi` and `psi` and `r` is the
/// largest distance from a domain point to the grid. For an affine `phi`
/// interpolated on a mesh the error vanishes identically and the bound is
/// exact.
pub fn max_error_bound<S: Surrogate + ?Sized>(
    f: &FunctionHandle,
    s: &S,
    domain: &Domain,
    grid: ErrorGrid,
) -> Result<ErrorBound> {
    if f.arity() != s.arity() || domain.dim() != f.arity() {
        return Err(Error::dim("max_error_bound", f.arity(), s.arity()));
    }
    if f.is_affine() && s.interpolates_on_mesh() {
        return Ok(ErrorBound {
            eps: 0.0,
            sampled_max: 0.0,
            certified: true,
            samples: 0,
        });
    }
    let per_axis = match f.arity() {
        1 => grid.per_axis_1d,
        2 => grid.per_axis_2d,
        a => return Err(Error::InvalidInput(format!("unsupported arity {a}"))),
    }
    .max(2);
    let axes = domain.grid_axes(per_axis);
    let mut worst = 0.0f64;
    let mut samples = 0usize;
    let mut visit = |p: &[f64]| -> Result<()> {
        let e = (s.eval(p) - f.try_eval(p)?).abs();
        if !e.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite surrogate error at {p:?}")));
        }
        worst = worst.max(e);
        samples += 1;
        Ok(())
    };
    if axes.len() == 1 {
        for &x in &axes[0] {
            visit(&[x])?;
        }
    } else {
        for &y in &axes[1] {
            for &x in &axes[0] {
                visit(&[x, y])?;
            }
        }
    }
    let radius = (0..domain.dim())
        .map(|i| {
            let h = (domain.hi[i] - domain.lo[i]) / (per_axis - 1) as f64;
            0.25 * h * h
        })
        .sum::<f64>()
        .sqrt();
    Ok(match f.lipschitz_on(domain) {
        Some(lf) => ErrorBound {
            eps: worst + (lf + s.lipschitz()) * radius,
            sampled_max: worst,
            certified: true,
            samples,
        },
        None => ErrorBound {
            eps: worst,
            sampled_max: worst,
            certified: false,
            samples,
        },
    })
}

/// The graph of a set-valued map over stacked `(input, output)` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IOSet {
    pub set: HybridZonotope,
    pub np: usize,
    pub nq: usize,
    /// Domain `D(Phi)` over the input coordinates.
    pub domain: HybridZonotope,
    /// Output inflation already applied to `set`.
    pub eps: f64,
    pub certified: bool,
}

impl IOSet {
    pub fn new(set: HybridZonotope, np: usize, domain: HybridZonotope) -> Result<Self> {
        if set.n() < np {
            return Err(Error::dim("IOSet", np, set.n()));
        }
        if domain.n() != np {
            return Err(Error::dim("IOSet domain", np, domain.n()));
        }
        let nq = set.n() - np;
        Ok(IOSet {
            set,
            np,
            nq,
            domain,
            eps: 0.0,
            certified: true,
        })
    }

    /// Exact graph `{(p, M p + v) | p in domain}` of an affine map.
    pub fn affine_graph(m: &DMatrix<f64>, v: &DVector<f64>, domain: &Domain) -> Result<Self> {
        let np = domain.dim();
        if m.ncols() != np || m.nrows() != v.len() {
            return Err(Error::dim("affine_graph", np, m.ncols()));
        }
        let nq = m.nrows();
        let dset = domain.to_set();
        let mut lift = DMatrix::zeros(np + nq, np);
        lift.view_mut((0, 0), (np, np)).fill_with_identity();
        lift.view_mut((np, 0), (nq, np)).copy_from(m);
        let mut offset = DVector::zeros(np + nq);
        offset.rows_mut(np, nq).copy_from(v);
        let set = dset.linear_map(&lift)?.translate(&offset)?;
        IOSet::new(set, np, dset)
    }

    /// Minkowski sum with `[-eps, eps]` on every output coordinate.
    pub fn inflate(&self, eps: f64, certified: bool) -> Result<Self> {
        if eps < 0.0 || !eps.is_finite() {
            return Err(Error::InvalidInput(format!("invalid inflation {eps}")));
        }
        let mut out = self.clone();
        if eps > 0.0 {
            let n = self.set.n();
            let mut g = DMatrix::zeros(n, self.nq);
            for j in 0..self.nq {
                g[(self.np + j, j)] = eps;
            }
            let w = HybridZonotope::zonotope(g, DVector::zeros(n))?;
            out.set = self.set.minkowski_sum(&w)?;
        }
        out.eps = self.eps + eps;
        out.certified = self.certified && certified;
        Ok(out)
    }

    /// Combine two maps of the same input into one with stacked outputs.
    pub fn stack_outputs(&self, other: &IOSet) -> Result<Self> {
        if self.np != other.np {
            return Err(Error::dim("stack_outputs", self.np, other.np));
        }
        let (np, nq1, nq2) = (self.np, self.nq, other.nq);
        let prod = self.set.cartesian_product(&other.set);
        let mut r = DMatrix::zeros(np, prod.n());
        for i in 0..np {
            r[(i, i)] = 1.0;
            r[(i, np + nq1 + i)] = -1.0;
        }
        let tied = prod.generalized_intersection(&r, &HybridZonotope::point(&vec![0.0; np]))?;
        let keep: Vec<usize> = (0..np + nq1)
            .chain((2 * np + nq1)..(2 * np + nq1 + nq2))
            .collect();
        let set = tied.project(&keep)?;
        Ok(IOSet {
            set,
            np,
            nq: nq1 + nq2,
            domain: self.domain.clone(),
            eps: self.eps.max(other.eps),
            certified: self.certified && other.certified,
        })
    }

    /// The domain as an axis-aligned box when it is one.
    pub fn domain_box(&self) -> Option<Domain> {
        let d = &self.domain;
        if !d.is_zonotope() {
            return None;
        }
        for j in 0..d.ng() {
            if d.gc().column(j).iter().filter(|v| **v != 0.0).count() > 1 {
                return None;
            }
        }
        let (lo, hi) = d.interval_hull();
        Some(Domain { lo, hi })
    }

    pub fn to_json_file(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        let io: IOSet = serde_json::from_str(&s)?;
        if io.set.n() != io.np + io.nq || io.domain.n() != io.np {
            return Err(Error::InvalidInput("IOSet file has inconsistent dimensions".into()));
        }
        Ok(io)
    }
}
