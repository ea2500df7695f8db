//! File formats tying the pieces together: approximation requests and
//! estimation scenarios.

use std::path::{Path, PathBuf};

use log::info;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::approx::{
    load_relu, optimize_breakpoints, relu::relu_to_ioset_with, relu::PreactivationBounds, sos::build_m1_with,
    sos::optimize_breakpoints_with, sos::Breakpoints,
    sos_to_ioset, train_relu, Domain, ErrorBound, ErrorGrid, FunctionHandle, IOSet, ReluNetwork, SOSApprox,
    TrainConfig, TrainReport, max_error_bound,
};
use crate::error::{Error, Result};
use crate::hybzono::{Complexity, HybridZonotope};
use crate::svse::{EstimatorConfig, MeasurementModel, PlantModel, System};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Uniform breakpoints.
    M1,
    /// Optimised breakpoints (univariate only).
    M2,
    /// ReLU network, converted exactly.
    M3,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m1" => Ok(Method::M1),
            "m2" => Ok(Method::M2),
            "m3" => Ok(Method::M3),
            _ => Err(Error::InvalidInput(format!("unknown method {s:?}; expected m1, m2 or m3"))),
        }
    }
}

/// The function being approximated: a builtin name or `net:<path>`.
#[derive(Debug, Clone)]
pub enum Target {
    Builtin(FunctionHandle),
    Network(ReluNetwork),
}

impl Target {
    pub fn resolve(name: &str, base: &Path) -> Result<Self> {
        if let Some(path) = name.strip_prefix("net:") {
            let p = base.join(path);
            return Ok(Target::Network(load_relu(&p)?));
        }
        builtin_function(name).map(Target::Builtin)
    }

    /// The target as a plain function; a network gets its Lipschitz bound.
    pub fn handle(&self) -> FunctionHandle {
        match self {
            Target::Builtin(f) => f.clone(),
            Target::Network(net) => {
                let n = net.clone();
                FunctionHandle::new("net", net.input_dim(), move |x: &[f64]| n.forward(x)[0])
                    .with_lipschitz(net.lipschitz_bound())
            }
        }
    }
}

pub fn builtin_function(name: &str) -> Result<FunctionHandle> {
    match name {
        "inv" => Ok(FunctionHandle::inverse()),
        "sources" => Ok(FunctionHandle::sources()),
        "square" => Ok(FunctionHandle::square()),
        _ => Err(Error::InvalidInput(format!(
            "unknown function {name:?}; expected inv, sources, square or net:<path>"
        ))),
    }
}

/// A request for an input-output set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxSpec {
    pub method: Method,
    pub function: String,
    pub domain: Domain,
    /// Breakpoint count for univariate functions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<usize>,
    /// Grid counts `[nx, ny]` for bivariate functions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<[usize; 2]>,
    /// Explicit M1 breakpoints, one sorted list per input axis spanning the
    /// domain; overrides `breakpoints` and `grid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axes: Option<Vec<Vec<f64>>>,
    /// Hidden layer widths for M3.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<usize>>,
    /// Pre-activation bounds used by the M3 conversion.
    #[serde(default)]
    pub bounds: PreactivationBounds,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_grid: Option<ErrorGrid>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproxReport {
    pub method: Method,
    pub function: String,
    pub eps: f64,
    pub sampled_max: f64,
    pub certified: bool,
    /// Sizes before the error inflation.
    pub exact_complexity: Complexity,
    pub complexity: Complexity,
    /// Segments or triangles for M1/M2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainReport>,
}

/// Everything produced by [`build_ioset`].
#[derive(Debug, Clone)]
pub struct Approximation {
    pub ioset: IOSet,
    pub report: ApproxReport,
    pub sos: Option<SOSApprox>,
    pub network: Option<ReluNetwork>,
}

impl ApproxSpec {
    fn error_grid(&self) -> ErrorGrid {
        self.error_grid.unwrap_or_default()
    }

    fn explicit_breakpoints(&self, axes: &[Vec<f64>]) -> Result<Breakpoints> {
        if axes.len() != self.domain.dim() {
            return Err(Error::dim("breakpoint axes", self.domain.dim(), axes.len()));
        }
        for (i, a) in axes.iter().enumerate() {
            let spans = a.first() == Some(&self.domain.lo[i]) && a.last() == Some(&self.domain.hi[i]);
            if a.len() < 2 || !spans || a.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidInput(format!(
                    "breakpoints on axis {i} must increase strictly from the domain's lower to upper end"
                )));
            }
        }
        Ok(match axes {
            [x] => Breakpoints::Line(x.clone()),
            [x, y] => Breakpoints::Grid { x: x.clone(), y: y.clone() },
            _ => return Err(Error::InvalidInput("explicit breakpoints need a 1-D or 2-D domain".into())),
        })
    }

    fn counts(&self) -> Result<Vec<usize>> {
        match (self.domain.dim(), self.breakpoints, self.grid) {
            (1, Some(n), _) => Ok(vec![n]),
            (2, _, Some([nx, ny])) => Ok(vec![nx, ny]),
            (1, None, _) => Err(Error::InvalidInput("univariate M1/M2 needs `breakpoints`".into())),
            _ => Err(Error::InvalidInput("bivariate M1 needs `grid`".into())),
        }
    }
}

/// Build the inflated input-output set described by `spec`. Relative
/// `net:` paths resolve against `base`.
pub fn build_ioset(spec: &ApproxSpec, base: &Path) -> Result<Approximation> {
    let target = Target::resolve(&spec.function, base)?;
    let f = target.handle();
    if f.arity() != spec.domain.dim() {
        return Err(Error::dim("approximation domain", f.arity(), spec.domain.dim()));
    }
    let grid = spec.error_grid();
    let (exact, bound, sos, network, training) = match spec.method {
        Method::M1 | Method::M2 => {
            let counts = if spec.axes.is_some() { Vec::new() } else { spec.counts()? };
            let s = if let (Method::M1, Some(axes)) = (spec.method, &spec.axes) {
                SOSApprox::interpolate(&f, spec.explicit_breakpoints(axes)?)?.with_error(&f, grid)?
            } else if spec.method == Method::M1 {
                build_m1_with(&f, &spec.domain, &counts, grid)?
            } else if grid == ErrorGrid::default() {
                optimize_breakpoints(&f, &spec.domain, counts[0])?
            } else {
                optimize_breakpoints_with(&f, &spec.domain, counts[0], grid)?
            };
            let exact = sos_to_ioset(&SOSApprox {
                error: ErrorBound { eps: 0.0, ..s.error },
                ..s.clone()
            })?;
            (exact, s.error, Some(s), None, None)
        }
        Method::M3 => {
            let (net, report) = match &target {
                Target::Network(net) => (net.clone(), None),
                Target::Builtin(_) => {
                    let mut cfg = spec.training.clone().unwrap_or_default();
                    if let Some(l) = &spec.layers {
                        cfg.layout = l.clone();
                    }
                    cfg.seed = spec.seed;
                    let (net, report) = train_relu(&f, &spec.domain, &cfg)?;
                    (net, Some(report))
                }
            };
            let bound = match &target {
                Target::Network(_) => ErrorBound {
                    eps: 0.0,
                    sampled_max: 0.0,
                    certified: true,
                    samples: 0,
                },
                Target::Builtin(_) => max_error_bound(&f, &net, &spec.domain, grid)?,
            };
            (relu_to_ioset_with(&net, &spec.domain, spec.bounds)?, bound, None, Some(net), report)
        }
    };
    let ioset = exact.inflate(bound.eps, bound.certified)?;
    info!(
        "{:?} approximation of {}: eps {:.4e} ({}), {:?}",
        spec.method,
        f.name(),
        bound.eps,
        if bound.certified { "certified" } else { "sampled" },
        ioset.set.complexity()
    );
    let report = ApproxReport {
        method: spec.method,
        function: spec.function.clone(),
        eps: bound.eps,
        sampled_max: bound.sampled_max,
        certified: bound.certified,
        exact_complexity: exact.set.complexity(),
        complexity: ioset.set.complexity(),
        cells: sos.as_ref().map(SOSApprox::num_cells),
        breakpoints: sos.as_ref().and_then(|s| match &s.breakpoints {
            crate::approx::Breakpoints::Line(xs) => Some(xs.clone()),
            _ => None,
        }),
        training,
    };
    Ok(Approximation {
        ioset,
        report,
        sos,
        network,
    })
}

/// Either a stored input-output set or a request to build one.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IoSource {
    File { ioset: PathBuf },
    Build { approx: ApproxSpec },
}

impl IoSource {
    pub fn load(&self, base: &Path) -> Result<IOSet> {
        match self {
            IoSource::File { ioset } => IOSet::from_json_file(&base.join(ioset)),
            IoSource::Build { approx } => Ok(build_ioset(approx, base)?.ioset),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PlantSpec {
    Affine {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
    },
    Ioset {
        #[serde(flatten)]
        source: IoSource,
        nu: usize,
        /// Affine dynamics used to simulate the true system.
        truth: AffineTruth,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffineTruth {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasurementSpec {
    #[serde(flatten)]
    pub source: IoSource,
    /// Function producing the true measurements.
    pub function: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<Domain>,
}

fn default_tol() -> f64 {
    1e-6
}

fn default_leaf_cap() -> usize {
    25
}

fn default_subset_samples() -> usize {
    20
}

/// An estimation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub plant: PlantSpec,
    pub measurement: MeasurementSpec,
    pub x0_set: Domain,
    pub true_x0: Vec<f64>,
    #[serde(default)]
    pub inputs: Vec<Vec<f64>>,
    /// Steps to run; defaults to the number of inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    /// Noise realisation added to each synthesised measurement.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub noise: Vec<Vec<f64>>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_leaf_cap")]
    pub leaf_cap: usize,
    #[serde(default = "default_subset_samples")]
    pub subset_samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Substitute out binary factors fixed by each measurement.
    #[serde(default = "default_reduce")]
    pub reduce: bool,
}

fn default_reduce() -> bool {
    true
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    crate::hybzono::matrix_from_rows(rows, r, c).map_err(|e| Error::InvalidInput(format!("{what}: {e}")))
}

/// A scenario with every file resolved.
pub struct LoadedScenario {
    pub plant: PlantModel,
    pub measurement: MeasurementModel,
    pub x0_set: HybridZonotope,
    pub system: System,
    pub config: EstimatorConfig,
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Resolve the models. Relative paths are taken from `base`.
    pub fn load(&self, base: &Path) -> Result<LoadedScenario> {
        let horizon = self.horizon.unwrap_or(self.inputs.len());
        if horizon > self.inputs.len() {
            return Err(Error::InvalidInput(format!(
                "horizon {horizon} needs {horizon} inputs, found {}",
                self.inputs.len()
            )));
        }
        let inputs = self.inputs[..horizon].to_vec();
        let (plant, a, b) = match &self.plant {
            PlantSpec::Affine { a, b } => {
                let (a, b) = (matrix(a, "plant a")?, matrix(b, "plant b")?);
                (PlantModel::affine(a.clone(), b.clone())?, a, b)
            }
            PlantSpec::Ioset { source, nu, truth } => {
                let (a, b) = (matrix(&truth.a, "truth a")?, matrix(&truth.b, "truth b")?);
                (PlantModel::ioset(source.load(base)?, *nu)?, a, b)
            }
        };
        if a.nrows() != plant.nx() || b.ncols() != plant.nu() || b.nrows() != a.nrows() {
            return Err(Error::InvalidInput("true dynamics do not match the plant dimensions".into()));
        }
        let phi = self.measurement.source.load(base)?;
        let noise = match &self.measurement.noise {
            Some(d) => HybridZonotope::interval_box(&d.lo, &d.hi)?,
            None => HybridZonotope::point(&vec![0.0; phi.nq]),
        };
        let measurement = MeasurementModel::new(phi, noise)?;
        let observe = Target::resolve(&self.measurement.function, base)?.handle();
        if observe.arity() != measurement.nx() || measurement.ny() != 1 {
            return Err(Error::InvalidInput(
                "measurement function must map the state to a scalar".into(),
            ));
        }
        let dynamics = move |x: &[f64], u: &[f64]| -> Vec<f64> {
            let next = &a * DVector::from_column_slice(x) + &b * DVector::from_column_slice(u);
            next.iter().copied().collect()
        };
        let mut system = System::new(
            self.true_x0.clone(),
            inputs,
            Box::new(dynamics),
            Box::new(move |x: &[f64]| vec![observe.eval(x)]),
        );
        system.noise = self.noise.clone();
        let mut config = EstimatorConfig {
            tol: self.tol,
            subset_samples: self.subset_samples,
            seed: self.seed,
            reduce: self.reduce,
            ..EstimatorConfig::default()
        };
        config.solver.leaf_cap = self.leaf_cap;
        Ok(LoadedScenario {
            plant,
            x0_set: self.x0_set.to_set(),
            measurement,
            system,
            config,
        })
    }
}
