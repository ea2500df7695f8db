//! Piecewise-linear (special ordered set) interpolants over breakpoints.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{linspace, max_error_bound, Domain, ErrorBound, ErrorGrid, FunctionHandle, IOSet, Surrogate};
use crate::error::{Error, Result};
use crate::hybzono::{matrix_from_rows, matrix_rows, sos_to_hybzono, VPolyUnion};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Breakpoints {
    /// Sorted breakpoints of a univariate function.
    Line(Vec<f64>),
    /// Rectangular grid; every cell is split along its lower-left to
    /// upper-right diagonal.
    Grid { x: Vec<f64>, y: Vec<f64> },
}

impl Breakpoints {
    pub fn domain(&self) -> Domain {
        match self {
            Breakpoints::Line(xs) => Domain {
                lo: vec![xs[0]],
                hi: vec![xs[xs.len() - 1]],
            },
            Breakpoints::Grid { x, y } => Domain {
                lo: vec![x[0], y[0]],
                hi: vec![x[x.len() - 1], y[y.len() - 1]],
            },
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Breakpoints::Line(_) => 1,
            Breakpoints::Grid { .. } => 2,
        }
    }
}

/// A piecewise-linear interpolant together with its error bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SOSApprox {
    pub breakpoints: Breakpoints,
    /// Vertices `(x_i, f(x_i))` with one polytope per segment or triangle.
    pub union: VPolyUnion,
    pub error: ErrorBound,
}

fn segment(xs: &[f64], x: f64) -> usize {
    let k = xs.partition_point(|&v| v <= x);
    k.clamp(1, xs.len() - 1) - 1
}

impl SOSApprox {
    /// Interpolant through `f` at the breakpoints, with a zero error bound
    /// until [`SOSApprox::with_error`] is applied.
    pub fn interpolate(f: &FunctionHandle, breakpoints: Breakpoints) -> Result<Self> {
        if f.arity() != breakpoints.arity() {
            return Err(Error::dim("SOS arity", f.arity(), breakpoints.arity()));
        }
        let union = match &breakpoints {
            Breakpoints::Line(xs) => {
                if xs.len() < 2 {
                    return Err(Error::InvalidInput("need at least 2 breakpoints".into()));
                }
                if xs.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidInput("breakpoints must be strictly increasing".into()));
                }
                let nv = xs.len();
                let mut v = DMatrix::zeros(2, nv);
                for (j, &x) in xs.iter().enumerate() {
                    v[(0, j)] = x;
                    v[(1, j)] = f.try_eval(&[x])?;
                }
                let cells: Vec<Vec<usize>> = (0..nv - 1).map(|i| vec![i, i + 1]).collect();
                VPolyUnion::from_cells(v, &cells)?
            }
            Breakpoints::Grid { x, y } => {
                if x.len() < 2 || y.len() < 2 {
                    return Err(Error::InvalidInput("need at least 2 grid points per axis".into()));
                }
                if x.windows(2).chain(y.windows(2)).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidInput("grid axes must be strictly increasing".into()));
                }
                let (nx, ny) = (x.len(), y.len());
                let mut v = DMatrix::zeros(3, nx * ny);
                for iy in 0..ny {
                    for ix in 0..nx {
                        let j = iy * nx + ix;
                        v[(0, j)] = x[ix];
                        v[(1, j)] = y[iy];
                        v[(2, j)] = f.try_eval(&[x[ix], y[iy]])?;
                    }
                }
                let mut cells = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
                for iy in 0..ny - 1 {
                    for ix in 0..nx - 1 {
                        let v00 = iy * nx + ix;
                        let v10 = v00 + 1;
                        let v01 = v00 + nx;
                        let v11 = v01 + 1;
                        cells.push(vec![v00, v10, v11]);
                        cells.push(vec![v00, v11, v01]);
                    }
                }
                VPolyUnion::from_cells(v, &cells)?
            }
        };
        Ok(SOSApprox {
            breakpoints,
            union,
            error: ErrorBound {
                eps: 0.0,
                sampled_max: 0.0,
                certified: true,
                samples: 0,
            },
        })
    }

    pub fn with_error(mut self, f: &FunctionHandle, grid: ErrorGrid) -> Result<Self> {
        self.error = max_error_bound(f, &self, &self.domain(), grid)?;
        Ok(self)
    }

    pub fn eps(&self) -> f64 {
        self.error.eps
    }

    pub fn domain(&self) -> Domain {
        self.breakpoints.domain()
    }

    /// Number of segments or triangles.
    pub fn num_cells(&self) -> usize {
        self.union.num_polytopes()
    }

    fn value(&self, j: usize) -> f64 {
        let v = self.union.vertices();
        v[(v.nrows() - 1, j)]
    }
}

impl Surrogate for SOSApprox {
    fn arity(&self) -> usize {
        self.breakpoints.arity()
    }

    fn eval(&self, p: &[f64]) -> f64 {
        match &self.breakpoints {
            Breakpoints::Line(xs) => {
                let i = segment(xs, p[0]);
                let t = (p[0] - xs[i]) / (xs[i + 1] - xs[i]);
                self.value(i) + t * (self.value(i + 1) - self.value(i))
            }
            Breakpoints::Grid { x, y } => {
                let nx = x.len();
                let ix = segment(x, p[0]);
                let iy = segment(y, p[1]);
                let tx = (p[0] - x[ix]) / (x[ix + 1] - x[ix]);
                let ty = (p[1] - y[iy]) / (y[iy + 1] - y[iy]);
                let v00 = iy * nx + ix;
                let (f00, f10, f01, f11) = (
                    self.value(v00),
                    self.value(v00 + 1),
                    self.value(v00 + nx),
                    self.value(v00 + nx + 1),
                );
                if tx >= ty {
                    f00 + tx * (f10 - f00) + ty * (f11 - f10)
                } else {
                    f00 + ty * (f01 - f00) + tx * (f11 - f01)
                }
            }
        }
    }

    fn lipschitz(&self) -> f64 {
        match &self.breakpoints {
            Breakpoints::Line(xs) => (0..xs.len() - 1)
                .map(|i| ((self.value(i + 1) - self.value(i)) / (xs[i + 1] - xs[i])).abs())
                .fold(0.0, f64::max),
            Breakpoints::Grid { x, y } => {
                let nx = x.len();
                let mut l = 0.0f64;
                for iy in 0..y.len() - 1 {
                    for ix in 0..nx - 1 {
                        let hx = x[ix + 1] - x[ix];
                        let hy = y[iy + 1] - y[iy];
                        let v00 = iy * nx + ix;
                        let (f00, f10, f01, f11) = (
                            self.value(v00),
                            self.value(v00 + 1),
                            self.value(v00 + nx),
                            self.value(v00 + nx + 1),
                        );
                        let lower = ((f10 - f00) / hx).hypot((f11 - f10) / hy);
                        let upper = ((f11 - f01) / hx).hypot((f01 - f00) / hy);
                        l = l.max(lower).max(upper);
                    }
                }
                l
            }
        }
    }

    fn interpolates_on_mesh(&self) -> bool {
        true
    }
}

/// Uniformly spaced breakpoints: `counts = [n]` for a univariate function,
/// `[nx, ny]` for a bivariate one.
pub fn build_m1(f: &FunctionHandle, domain: &Domain, counts: &[usize]) -> Result<SOSApprox> {
    build_m1_with(f, domain, counts, ErrorGrid::default())
}

pub fn build_m1_with(
    f: &FunctionHandle,
    domain: &Domain,
    counts: &[usize],
    grid: ErrorGrid,
) -> Result<SOSApprox> {
    if f.arity() != domain.dim() || counts.len() != domain.dim() {
        return Err(Error::dim("build_m1", f.arity(), counts.len().max(domain.dim())));
    }
    if counts.iter().any(|&c| c < 2) {
        return Err(Error::InvalidInput("need at least 2 breakpoints per axis".into()));
    }
    let bp = match domain.dim() {
        1 => Breakpoints::Line(linspace(domain.lo[0], domain.hi[0], counts[0])),
        2 => Breakpoints::Grid {
            x: linspace(domain.lo[0], domain.hi[0], counts[0]),
            y: linspace(domain.lo[1], domain.hi[1], counts[1]),
        },
        d => return Err(Error::InvalidInput(format!("unsupported arity {d}"))),
    };
    SOSApprox::interpolate(f, bp)?.with_error(f, grid)
}

/// Maximum interpolation error per segment, measured on a fixed dense grid.
struct SegmentError<'a> {
    f: &'a FunctionHandle,
    xs: Vec<f64>,
    fx: Vec<f64>,
}

impl<'a> SegmentError<'a> {
    fn new(f: &'a FunctionHandle, d: &Domain, samples: usize) -> Result<Self> {
        let xs = linspace(d.lo[0], d.hi[0], samples);
        let fx = xs.iter().map(|&x| f.try_eval(&[x])).collect::<Result<Vec<_>>>()?;
        Ok(SegmentError { f, xs, fx })
    }

    fn err(&self, a: f64, b: f64) -> Result<f64> {
        let fa = self.f.try_eval(&[a])?;
        let fb = self.f.try_eval(&[b])?;
        let i0 = self.xs.partition_point(|&x| x < a);
        let i1 = self.xs.partition_point(|&x| x <= b);
        let slope = (fb - fa) / (b - a);
        let mut worst = 0.0f64;
        for i in i0..i1 {
            worst = worst.max((fa + (self.xs[i] - a) * slope - self.fx[i]).abs());
        }
        Ok(worst)
    }

    fn total(&self, bp: &[f64]) -> Result<f64> {
        let mut worst = 0.0f64;
        for w in bp.windows(2) {
            worst = worst.max(self.err(w[0], w[1])?);
        }
        Ok(worst)
    }
}

const GOLDEN_ITERS: usize = 40;
const MAX_SWEEPS: usize = 100;
const RESTARTS: usize = 20;
const RESTART_SEED: u64 = 0x5eed_b4ea;

fn coordinate_descent(obj: &SegmentError<'_>, bp: &mut [f64]) -> Result<f64> {
    let n = bp.len();
    let mut current = obj.total(bp)?;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..MAX_SWEEPS {
        let before = current;
        for i in 1..n - 1 {
            let (a, b) = (bp[i - 1], bp[i + 1]);
            let margin = 1e-9 * (b - a);
            let local = |t: f64| -> Result<f64> { Ok(obj.err(a, t)?.max(obj.err(t, b)?)) };
            let (mut lo, mut hi) = (a + margin, b - margin);
            let mut x1 = hi - inv_phi * (hi - lo);
            let mut x2 = lo + inv_phi * (hi - lo);
            let mut f1 = local(x1)?;
            let mut f2 = local(x2)?;
            for _ in 0..GOLDEN_ITERS {
                if f1 <= f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - inv_phi * (hi - lo);
                    f1 = local(x1)?;
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + inv_phi * (hi - lo);
                    f2 = local(x2)?;
                }
            }
            let (t, ft) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
            if ft < local(bp[i])? {
                bp[i] = t;
            }
        }
        current = obj.total(bp)?;
        if before - current <= 1e-14 * (1.0 + before) {
            break;
        }
    }
    Ok(current)
}

/// Place interior breakpoints to reduce the maximum interpolation error.
///
/// Coordinate descent with golden-section line searches, started from the
/// uniform spacing and from a fixed set of random restarts. The result never
/// has a larger error bound than [`build_m1`] with the same count.
pub fn optimize_breakpoints(f: &FunctionHandle, domain: &Domain, n_break: usize) -> Result<SOSApprox> {
    optimize_breakpoints_with(f, domain, n_break, ErrorGrid::default())
}

pub fn optimize_breakpoints_with(
    f: &FunctionHandle,
    domain: &Domain,
    n_break: usize,
    grid: ErrorGrid,
) -> Result<SOSApprox> {
    if f.arity() != 1 || domain.dim() != 1 {
        return Err(Error::InvalidInput("breakpoint optimisation needs a univariate function".into()));
    }
    if n_break < 3 {
        return Err(Error::InvalidInput("breakpoint optimisation needs at least 3 breakpoints".into()));
    }
    let uniform = build_m1_with(f, domain, &[n_break], grid)?;
    if f.is_affine() {
        return Ok(uniform);
    }
    let obj = SegmentError::new(f, domain, grid.per_axis_1d.max(2))?;
    let (lo, hi) = (domain.lo[0], domain.hi[0]);
    let mut best = linspace(lo, hi, n_break);
    let mut best_val = coordinate_descent(&obj, &mut best)?;
    let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
    for _ in 0..RESTARTS {
        let mut interior: Vec<f64> = (0..n_break - 2).map(|_| rng.gen_range(lo..hi)).collect();
        interior.sort_by(f64::total_cmp);
        let mut bp = Vec::with_capacity(n_break);
        bp.push(lo);
        bp.extend(interior);
        bp.push(hi);
        if bp.windows(2).any(|w| !(w[0] < w[1])) {
            continue;
        }
        let val = coordinate_descent(&obj, &mut bp)?;
        if val < best_val {
            best_val = val;
            best = bp;
        }
    }
    let optimized = SOSApprox::interpolate(f, Breakpoints::Line(best))?.with_error(f, grid)?;
    if optimized.eps() <= uniform.eps() {
        Ok(optimized)
    } else {
        Ok(uniform)
    }
}

/// Exact hybrid zonotope of the interpolant, inflated by its error bound on
/// the output coordinate.
pub fn sos_to_ioset(s: &SOSApprox) -> Result<IOSet> {
    let set = sos_to_hybzono(&s.union)?;
    let np = s.breakpoints.arity();
    IOSet::new(set, np, s.domain().to_set())?.inflate(s.error.eps, s.error.certified)
}

#[derive(Serialize, Deserialize)]
struct RawSos {
    breakpoints: Breakpoints,
    vertices: Vec<Vec<f64>>,
    incidence: Vec<Vec<f64>>,
    eps: f64,
    sampled_max: f64,
    certified: bool,
    samples: usize,
}

impl Serialize for SOSApprox {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RawSos {
            breakpoints: self.breakpoints.clone(),
            vertices: matrix_rows(self.union.vertices()),
            incidence: matrix_rows(self.union.incidence()),
            eps: self.error.eps,
            sampled_max: self.error.sampled_max,
            certified: self.error.certified,
            samples: self.error.samples,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SOSApprox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawSos::deserialize(deserializer)?;
        let nr = raw.vertices.len();
        let nv = raw.vertices.first().map_or(0, Vec::len);
        let v = matrix_from_rows(&raw.vertices, nr, nv).map_err(D::Error::custom)?;
        let np = raw.incidence.first().map_or(0, Vec::len);
        let m = matrix_from_rows(&raw.incidence, nv, np).map_err(D::Error::custom)?;
        let union = VPolyUnion::new(v, m).map_err(D::Error::custom)?;
        Ok(SOSApprox {
            breakpoints: raw.breakpoints,
            union,
            error: ErrorBound {
                eps: raw.eps,
                sampled_max: raw.sampled_max,
                certified: raw.certified,
                samples: raw.samples,
            },
        })
    }
}
