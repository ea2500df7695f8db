//! Input-output set identities and the set-valued estimator recursion.
//!
//! With `Phi` an input-output set over `(p, q)`:
//!
//! * outputs of inputs `P`: `[0 I] (Phi cap_[I 0] P)`,
//! * inputs producing outputs in `Q`: `[I 0] (Phi cap_[0 I] Q)`.
//!
//! The estimator alternates a measurement update (intersection with the
//! measurement-consistent set) and a dynamic update (successor set).

use std::time::Instant;

use log::{debug, info, warn};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::approx::IOSet;
use crate::error::{Error, Result};
use crate::hybzono::{Complexity, HybridZonotope};
use crate::solver::{MiSolver, SolverOptions};

fn selector(rows: usize, cols: usize, offset: usize) -> DMatrix<f64> {
    let mut r = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        r[(i, offset + i)] = 1.0;
    }
    r
}

/// `[0 I] (Phi cap_[I 0] P)`.
///
/// The result over-approximates the image of `P` only when `P` lies inside
/// the domain of `Phi`; see [`domain_precondition`].
pub fn output_set(phi: &IOSet, p: &HybridZonotope) -> Result<HybridZonotope> {
    if p.n() != phi.np {
        return Err(Error::dim("output_set", phi.np, p.n()));
    }
    let n = phi.np + phi.nq;
    phi.set
        .generalized_intersection(&selector(phi.np, n, 0), p)?
        .linear_map(&selector(phi.nq, n, phi.np))
}

/// `[I 0] (Phi cap_[0 I] Q)`, the inputs in the domain mapped into `Q`.
pub fn input_set(phi: &IOSet, q: &HybridZonotope) -> Result<HybridZonotope> {
    if q.n() != phi.nq {
        return Err(Error::dim("input_set", phi.nq, q.n()));
    }
    let n = phi.np + phi.nq;
    phi.set
        .generalized_intersection(&selector(phi.nq, n, phi.np), q)?
        .linear_map(&selector(phi.np, n, 0))
}

/// Outcome of checking `P ⊆ D(Phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainCheck {
    /// The interval hull of `P` lies in the domain box.
    Certified,
    /// Every sampled member of `P` lies in the domain.
    Sampled,
    Violated,
}

/// Check `P ⊆ D(Phi)`, first through interval hulls and otherwise on
/// `samples` members of `P`.
pub fn domain_precondition(
    phi: &IOSet,
    p: &HybridZonotope,
    solver: &MiSolver,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<DomainCheck> {
    if p.n() != phi.np {
        return Err(Error::dim("domain_precondition", phi.np, p.n()));
    }
    let (lo, hi) = p.interval_hull();
    if let Some(d) = phi.domain_box() {
        if d.contains(&lo, tol) && d.contains(&hi, tol) {
            return Ok(DomainCheck::Certified);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in solver.sample_members(p, samples, &mut rng)? {
            if !d.contains(x.as_slice(), tol) {
                return Ok(DomainCheck::Violated);
            }
        }
        return Ok(DomainCheck::Sampled);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for x in solver.sample_members(p, samples, &mut rng)? {
        if !solver.contains_point(&phi.domain, x.as_slice(), tol)? {
            return Ok(DomainCheck::Violated);
        }
    }
    Ok(DomainCheck::Sampled)
}

#[derive(Debug, Clone)]
pub enum PlantModel {
    /// `x+ = A x + B u`.
    Affine { a: DMatrix<f64>, b: DMatrix<f64> },
    /// Input-output set over `(x, u, x+)`, or `(x, x+)` when `nu = 0`.
    IoSet { phi: IOSet, nu: usize },
}

impl PlantModel {
    pub fn affine(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidInput("plant A must be square".into()));
        }
        if b.nrows() != a.nrows() {
            return Err(Error::dim("plant B rows", a.nrows(), b.nrows()));
        }
        Ok(PlantModel::Affine { a, b })
    }

    /// `x+ = x + u`.
    pub fn integrator(nx: usize) -> Self {
        PlantModel::Affine {
            a: DMatrix::identity(nx, nx),
            b: DMatrix::identity(nx, nx),
        }
    }

    pub fn ioset(phi: IOSet, nu: usize) -> Result<Self> {
        if phi.np < nu || phi.np - nu != phi.nq {
            return Err(Error::InvalidInput(format!(
                "plant input-output set splits {}+{}, expected np = nx + {nu} with nq = nx",
                phi.np, phi.nq
            )));
        }
        Ok(PlantModel::IoSet { phi, nu })
    }

    pub fn nx(&self) -> usize {
        match self {
            PlantModel::Affine { a, .. } => a.nrows(),
            PlantModel::IoSet { phi, .. } => phi.nq,
        }
    }

    pub fn nu(&self) -> usize {
        match self {
            PlantModel::Affine { b, .. } => b.ncols(),
            PlantModel::IoSet { nu, .. } => *nu,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeasurementModel {
    pub phi: IOSet,
    /// Additive measurement noise set `V`.
    pub noise: HybridZonotope,
}

impl MeasurementModel {
    pub fn new(phi: IOSet, noise: HybridZonotope) -> Result<Self> {
        if noise.n() != phi.nq {
            return Err(Error::dim("measurement noise", phi.nq, noise.n()));
        }
        Ok(MeasurementModel { phi, noise })
    }

    pub fn noiseless(phi: IOSet) -> Self {
        let noise = HybridZonotope::point(&vec![0.0; phi.nq]);
        MeasurementModel { phi, noise }
    }

    pub fn nx(&self) -> usize {
        self.phi.np
    }

    pub fn ny(&self) -> usize {
        self.phi.nq
    }
}

/// States consistent with measuring `y` under `y in g(x) (+) V`:
/// the inputs of `Phi` mapped into `{y} (+) (-V)`.
pub fn measurement_consistent_set(m: &MeasurementModel, y: &[f64]) -> Result<HybridZonotope> {
    if y.len() != m.ny() {
        return Err(Error::dim("measurement", m.ny(), y.len()));
    }
    let ny = m.ny();
    let q = m
        .noise
        .linear_map(&(-DMatrix::identity(ny, ny)))?
        .translate(&DVector::from_column_slice(y))?;
    input_set(&m.phi, &q)
}

/// Successor set of `est` under inputs `u`.
pub fn dynamic_update(p: &PlantModel, est: &HybridZonotope, u: &HybridZonotope) -> Result<HybridZonotope> {
    if est.n() != p.nx() {
        return Err(Error::dim("dynamic_update state", p.nx(), est.n()));
    }
    if u.n() != p.nu() {
        return Err(Error::dim("dynamic_update input", p.nu(), u.n()));
    }
    match p {
        PlantModel::Affine { a, b } => {
            let ax = est.linear_map(a)?;
            if u.is_zonotope() && u.ng() == 0 && u.nb() == 0 {
                // Point input: a translation keeps the representation size.
                ax.translate(&(b * u.c()))
            } else {
                ax.minkowski_sum(&u.linear_map(b)?)
            }
        }
        PlantModel::IoSet { phi, nu } => {
            let arg = if *nu == 0 { est.clone() } else { est.cartesian_product(u) };
            output_set(phi, &arg)
        }
    }
}

/// Intersection of the prior with the measurement-consistent set; an empty
/// result means model and measurement contradict each other.
pub fn measurement_update(
    prior: &HybridZonotope,
    consistent: &HybridZonotope,
    step: usize,
    solver: &MiSolver,
) -> Result<HybridZonotope> {
    if prior.n() != consistent.n() {
        return Err(Error::dim("measurement_update", prior.n(), consistent.n()));
    }
    let post = prior.intersection(consistent)?;
    if solver.is_empty(&post)? {
        return Err(Error::Inconsistent { step });
    }
    Ok(post)
}

/// [`measurement_update`] followed by [`MiSolver::reduce`]: binary factors
/// whose value is forced are substituted out. The set is unchanged.
pub fn measurement_update_reduced(
    prior: &HybridZonotope,
    consistent: &HybridZonotope,
    step: usize,
    solver: &MiSolver,
) -> Result<HybridZonotope> {
    if prior.n() != consistent.n() {
        return Err(Error::dim("measurement_update", prior.n(), consistent.n()));
    }
    let post = prior.intersection(consistent)?;
    let post = solver.reduce(&post)?.ok_or(Error::Inconsistent { step })?;
    if solver.without_probing().is_empty(&post)? {
        return Err(Error::Inconsistent { step });
    }
    Ok(post)
}

type StepFn = Box<dyn Fn(&[f64], &[f64]) -> Vec<f64>>;
type ObserveFn = Box<dyn Fn(&[f64]) -> Vec<f64>>;

/// The true system used to synthesise measurements.
pub struct System {
    pub x0: Vec<f64>,
    pub inputs: Vec<Vec<f64>>,
    pub dynamics: StepFn,
    pub observe: ObserveFn,
    /// Optional noise realisation per measurement; zero when absent.
    pub noise: Vec<Vec<f64>>,
}

impl System {
    pub fn new(x0: Vec<f64>, inputs: Vec<Vec<f64>>, dynamics: StepFn, observe: ObserveFn) -> Self {
        System {
            x0,
            inputs,
            dynamics,
            observe,
            noise: Vec::new(),
        }
    }

    /// State trajectory `x_0 .. x_H` with `H = inputs.len()`.
    pub fn trajectory(&self) -> Vec<Vec<f64>> {
        let mut xs = vec![self.x0.clone()];
        for u in &self.inputs {
            let next = (self.dynamics)(xs.last().expect("nonempty"), u);
            xs.push(next);
        }
        xs
    }

    pub fn measurement(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let mut y = (self.observe)(x);
        if let Some(v) = self.noise.get(k) {
            for (yi, vi) in y.iter_mut().zip(v) {
                *yi += vi;
            }
        }
        y
    }
}

#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    pub solver: SolverOptions,
    /// Membership tolerance for the containment checks.
    pub tol: f64,
    /// Accept input-output sets whose error bound is only sampled.
    pub allow_uncertified: bool,
    /// Members of each posterior tested for membership in its prior.
    pub subset_samples: usize,
    /// Samples for the plant domain precondition.
    pub domain_samples: usize,
    pub compute_bounds: bool,
    /// Enumerate leaves and connected regions of each posterior when
    /// `nb <= solver.leaf_cap`.
    pub count_regions: bool,
    /// Substitute out binary factors fixed by the measurement; exact, but
    /// the posterior no longer grows by the identity-predicted sizes.
    pub reduce: bool,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            solver: SolverOptions::default(),
            tol: 1e-6,
            allow_uncertified: false,
            subset_samples: 20,
            domain_samples: 1000,
            compute_bounds: true,
            count_regions: false,
            reduce: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub k: usize,
    pub true_state: Vec<f64>,
    pub measurement: Vec<f64>,
    #[serde(skip)]
    pub prior: HybridZonotope,
    #[serde(skip)]
    pub posterior: HybridZonotope,
    pub prior_complexity: Complexity,
    pub posterior_complexity: Complexity,
    pub contains_truth: bool,
    /// Sampled posterior members found outside the prior.
    pub subset_violations: usize,
    pub subset_samples: usize,
    pub domain_check: Option<DomainCheck>,
    pub bounds: Option<Vec<(f64, f64)>>,
    pub leaves: Option<usize>,
    pub regions: Option<usize>,
    #[serde(skip)]
    pub update_seconds: f64,
    #[serde(skip)]
    pub bounds_seconds: f64,
    #[serde(skip)]
    pub leaves_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct EstimatorState {
    pub estimate: HybridZonotope,
    pub k: usize,
    pub log: Vec<StepRecord>,
}

impl EstimatorState {
    pub fn all_contain_truth(&self) -> bool {
        self.log.iter().all(|r| r.contains_truth)
    }

    /// Total time spent in the set recursion itself.
    pub fn update_seconds(&self) -> f64 {
        self.log.iter().map(|r| r.update_seconds).sum()
    }

    pub fn bounds_seconds(&self) -> f64 {
        self.log.iter().map(|r| r.bounds_seconds).sum()
    }
}

fn require_certified(phi: &IOSet, allow: bool) -> Result<()> {
    if !phi.certified {
        if allow {
            warn!("using an input-output set with a sampled error bound (eps = {})", phi.eps);
        } else {
            return Err(Error::Uncertified { eps: phi.eps });
        }
    }
    Ok(())
}

/// Run the recursion for `inputs.len() + 1` measurements starting from the
/// prior `x0_set`.
pub fn run_estimator(
    plant: &PlantModel,
    meas: &MeasurementModel,
    x0_set: &HybridZonotope,
    system: &System,
    cfg: &EstimatorConfig,
) -> Result<EstimatorState> {
    let nx = plant.nx();
    if meas.nx() != nx || x0_set.n() != nx || system.x0.len() != nx {
        return Err(Error::dim("run_estimator", nx, meas.nx()));
    }
    if let Some(u) = system.inputs.iter().find(|u| u.len() != plant.nu()) {
        return Err(Error::dim("run_estimator input", plant.nu(), u.len()));
    }
    require_certified(&meas.phi, cfg.allow_uncertified)?;
    if let PlantModel::IoSet { phi, .. } = plant {
        require_certified(phi, cfg.allow_uncertified)?;
    }
    let solver = MiSolver::new(cfg.solver);
    // Reduced posteriors gain little from probing.
    let reduced = solver.without_probing();
    let xs = system.trajectory();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = Vec::with_capacity(xs.len());
    let mut prior = x0_set.clone();
    let mut domain_check = None;
    let mut posterior = prior.clone();
    for (k, x) in xs.iter().enumerate() {
        let start = Instant::now();
        if k > 0 {
            let u = HybridZonotope::point(&system.inputs[k - 1]);
            if let PlantModel::IoSet { phi, nu } = plant {
                let arg = if *nu == 0 { posterior.clone() } else { posterior.cartesian_product(&u) };
                let check = domain_precondition(phi, &arg, &solver, cfg.domain_samples, cfg.seed, cfg.tol)?;
                if check == DomainCheck::Violated {
                    warn!("step {k}: estimate leaves the plant domain; the successor set may not be sound");
                }
                domain_check = Some(check);
            }
            prior = dynamic_update(plant, &posterior, &u)?;
        }
        let y = system.measurement(k, x);
        let consistent = measurement_consistent_set(meas, &y)?;
        posterior = if cfg.reduce {
            measurement_update_reduced(&prior, &consistent, k, &solver)?
        } else {
            measurement_update(&prior, &consistent, k, &solver)?
        };
        let update_seconds = start.elapsed().as_secs_f64();

        let contains_truth = reduced.contains_point(&posterior, x, cfg.tol)?;
        if !contains_truth {
            log::error!("step {k}: true state {x:?} is not in the posterior");
        }
        let mut subset_violations = 0;
        let members = reduced.sample_members(&posterior, cfg.subset_samples, &mut rng)?;
        for m in &members {
            if !reduced.contains_point(&prior, m.as_slice(), cfg.tol)? {
                subset_violations += 1;
            }
        }

        let start = Instant::now();
        let bounds = if cfg.compute_bounds { Some(reduced.bounds(&posterior)?) } else { None };
        let bounds_seconds = start.elapsed().as_secs_f64();

        let start = Instant::now();
        let (leaves, regions) = if cfg.count_regions && posterior.nb() <= cfg.solver.leaf_cap {
            let leaves = solver.enumerate_leaves(&posterior)?;
            let regions = solver.connected_regions(&leaves, cfg.tol)?;
            (Some(leaves.len()), Some(regions.len()))
        } else {
            (None, None)
        };
        let leaves_seconds = start.elapsed().as_secs_f64();

        info!(
            "step {k}: posterior {:?}, truth contained: {contains_truth}{}",
            posterior.complexity(),
            regions.map_or(String::new(), |r| format!(", {r} region(s)"))
        );
        debug!("step {k}: bounds {bounds:?}");
        log.push(StepRecord {
            k,
            true_state: x.clone(),
            measurement: y,
            prior_complexity: prior.complexity(),
            posterior_complexity: posterior.complexity(),
            prior: prior.clone(),
            posterior: posterior.clone(),
            contains_truth,
            subset_violations,
            subset_samples: members.len(),
            domain_check,
            bounds,
            leaves,
            regions,
            update_seconds,
            bounds_seconds,
            leaves_seconds,
        });
    }
    Ok(EstimatorState {
        estimate: posterior,
        k: xs.len() - 1,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::Domain;
    use crate::solver::contains_point;

    fn identity_graph(lo: f64, hi: f64) -> IOSet {
        IOSet::affine_graph(
            &DMatrix::identity(1, 1),
            &DVector::zeros(1),
            &Domain::interval(lo, hi).unwrap(),
        )
        .unwrap()
    }

    fn hull(z: &HybridZonotope) -> Vec<(f64, f64)> {
        crate::solver::bounds(z).unwrap()
    }

    #[test]
    fn identity_output_and_input() {
        let phi = identity_graph(-1.0, 1.0);
        let p = HybridZonotope::interval_box(&[-0.5], &[0.5]).unwrap();
        let b = hull(&output_set(&phi, &p).unwrap());
        assert!((b[0].0 + 0.5).abs() < 1e-9 && (b[0].1 - 0.5).abs() < 1e-9);
        let q = HybridZonotope::interval_box(&[0.0], &[1.0]).unwrap();
        let b = hull(&input_set(&phi, &q).unwrap());
        assert!(b[0].0.abs() < 1e-9 && (b[0].1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn noise_is_reflected() {
        let noise = HybridZonotope::interval_box(&[-0.1], &[0.1]).unwrap();
        let m = MeasurementModel::new(identity_graph(-1.0, 1.0), noise).unwrap();
        let b = hull(&measurement_consistent_set(&m, &[0.0]).unwrap());
        assert!((b[0].0 + 0.1).abs() < 1e-9 && (b[0].1 - 0.1).abs() < 1e-9);
        // An asymmetric noise set V = [0, 0.2] gives x in [y - 0.2, y].
        let noise = HybridZonotope::interval_box(&[0.0], &[0.2]).unwrap();
        let m = MeasurementModel::new(identity_graph(-1.0, 1.0), noise).unwrap();
        let b = hull(&measurement_consistent_set(&m, &[0.5]).unwrap());
        assert!((b[0].0 - 0.3).abs() < 1e-9 && (b[0].1 - 0.5).abs() < 1e-9);
    }

    #[test]
    fn integrator_translation() {
        let p = PlantModel::integrator(2);
        let est = HybridZonotope::interval_box(&[-5.0, -5.0], &[5.0, 5.0]).unwrap();
        let next = dynamic_update(&p, &est, &HybridZonotope::point(&[-1.0, 1.0])).unwrap();
        assert_eq!(next.complexity(), est.complexity());
        assert_eq!(next.interval_hull(), (vec![-6.0, -4.0], vec![4.0, 6.0]));
        let zero = PlantModel::affine(DMatrix::zeros(2, 2), DMatrix::identity(2, 2)).unwrap();
        let next = dynamic_update(&zero, &est, &HybridZonotope::point(&[2.0, 3.0])).unwrap();
        assert_eq!(next.interval_hull(), (vec![2.0, 3.0], vec![2.0, 3.0]));
    }

    #[test]
    fn ioset_plant_matches_affine() {
        let d = Domain::interval(-4.0, 4.0).unwrap();
        let half = IOSet::affine_graph(&DMatrix::from_element(1, 1, 0.5), &DVector::zeros(1), &d).unwrap();
        let p = PlantModel::ioset(half, 0).unwrap();
        let est = HybridZonotope::interval_box(&[-2.0], &[2.0]).unwrap();
        let next = dynamic_update(&p, &est, &HybridZonotope::point(&[])).unwrap();
        let b = hull(&next);
        assert!((b[0].0 + 1.0).abs() < 1e-9 && (b[0].1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn disjoint_update_is_inconsistent() {
        let a = HybridZonotope::interval_box(&[0.0], &[1.0]).unwrap();
        let b = HybridZonotope::interval_box(&[2.0], &[3.0]).unwrap();
        let err = measurement_update(&a, &b, 3, &MiSolver::default()).unwrap_err();
        assert!(matches!(err, Error::Inconsistent { step: 3 }));
    }

    #[test]
    fn exact_identity_measurement_collapses() {
        let d = Domain::new(vec![-10.0, -10.0], vec![10.0, 10.0]).unwrap();
        let phi = IOSet::affine_graph(&DMatrix::identity(2, 2), &DVector::zeros(2), &d).unwrap();
        let meas = MeasurementModel::noiseless(phi);
        let plant = PlantModel::integrator(2);
        let system = System::new(
            vec![1.0, 0.0],
            vec![vec![-1.0, 1.0], vec![-2.0, -1.0]],
            Box::new(|x, u| vec![x[0] + u[0], x[1] + u[1]]),
            Box::new(|x| x.to_vec()),
        );
        let x0 = HybridZonotope::interval_box(&[-5.0, -5.0], &[5.0, 5.0]).unwrap();
        let state = run_estimator(&plant, &meas, &x0, &system, &EstimatorConfig::default()).unwrap();
        assert!(state.all_contain_truth());
        for r in &state.log {
            for (i, (lo, hi)) in r.bounds.as_ref().unwrap().iter().enumerate() {
                assert!((lo - r.true_state[i]).abs() < 1e-6 && (hi - r.true_state[i]).abs() < 1e-6);
            }
        }
        assert!(contains_point(&state.estimate, &[-2.0, 0.0], 1e-6).unwrap());
    }

    #[test]
    fn uncertified_measurement_is_refused() {
        let mut phi = identity_graph(-1.0, 1.0);
        phi.certified = false;
        let meas = MeasurementModel::noiseless(phi);
        let plant = PlantModel::integrator(1);
        let system = System::new(vec![0.0], vec![], Box::new(|x, _| x.to_vec()), Box::new(|x| x.to_vec()));
        let x0 = HybridZonotope::interval_box(&[-1.0], &[1.0]).unwrap();
        let mut cfg = EstimatorConfig::default();
        assert!(matches!(
            run_estimator(&plant, &meas, &x0, &system, &cfg),
            Err(Error::Uncertified { .. })
        ));
        cfg.allow_uncertified = true;
        assert!(run_estimator(&plant, &meas, &x0, &system, &cfg).is_ok());
    }
}
