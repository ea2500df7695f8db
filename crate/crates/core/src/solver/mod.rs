//! Emptiness, containment, support and leaf queries on hybrid zonotopes.
//!
//! Every query is a mixed-integer feasibility or optimisation problem over
//! the factors `(xi_c, xi_b)`. Binary factors are relaxed to `[-1, 1]` and
//! fixed to `-1` or `+1` by branching; the node LPs are solved by the dual
//! simplex in [`lp`], re-optimised in place as bounds change. Optimisation
//! dives depth-first and otherwise expands the open node with the best bound;
//! rows forcing exactly one binary of a group to `+1` are branched on by
//! halving the group, other binaries by most-fractional value. Results
//! depend only on the input.

pub mod lp;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Polygon;
use crate::hybzono::{hstack, FactorAssignment, HybridZonotope};

pub use lp::{lp_solve, LpProblem, LpResult, LpStatus, Simplex, FEAS_TOL, PIVOT_TOL};

/// Branch-and-bound prunes a node whose relaxation cannot beat the incumbent
/// by more than this.
pub const BOUND_TOL: f64 = 1e-9;
const INT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Largest `nb` accepted by leaf enumeration.
    pub leaf_cap: usize,
    /// Node budget for a single branch-and-bound search.
    pub max_nodes: usize,
    /// Rounds of root probing before a search; 0 disables it.
    pub probe_rounds: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            leaf_cap: 25,
            max_nodes: 2_000_000,
            probe_rounds: 2,
        }
    }
}

/// A member of a set together with the factors producing it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Member {
    pub xi_c: Vec<f64>,
    pub xi_b: Vec<f64>,
    pub point: Vec<f64>,
}

/// A nonempty constrained zonotope selected by one binary assignment.
#[derive(Debug, Clone)]
pub struct LeafSet {
    pub assignment: FactorAssignment,
    pub leaf: HybridZonotope,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SearchStats {
    pub nodes: usize,
    pub lp_solves: usize,
    pub pivots: usize,
    pub refactors: usize,
}

fn factor_lp(z: &HybridZonotope, cost: Vec<f64>) -> LpProblem {
    let nv = z.ng() + z.nb();
    LpProblem {
        objective: cost,
        a: hstack(z.ac(), z.ab()),
        b: z.b().iter().copied().collect(),
        lo: vec![-1.0; nv],
        hi: vec![1.0; nv],
    }
}

/// Binary groups constrained to exactly one `+1`: rows `a 1' xi_G = a (2 - |G|)`
/// with no continuous part. Unions of polytopes carry one such row each.
fn one_hot_groups(z: &HybridZonotope) -> Vec<Vec<usize>> {
    let mut taken = vec![false; z.nb()];
    let mut groups = Vec::new();
    for i in 0..z.nc() {
        if z.ac().row(i).iter().any(|v| *v != 0.0) {
            continue;
        }
        let members: Vec<usize> = (0..z.nb()).filter(|&k| z.ab()[(i, k)] != 0.0).collect();
        if members.len() < 2 || members.iter().any(|&k| taken[k]) {
            continue;
        }
        let a = z.ab()[(i, members[0])];
        if members.iter().any(|&k| z.ab()[(i, k)] != a) {
            continue;
        }
        let want = a * (2.0 - members.len() as f64);
        if (z.b()[i] - want).abs() > 1e-12 * (1.0 + want.abs()) {
            continue;
        }
        for &k in &members {
            taken[k] = true;
        }
        groups.push(members);
    }
    groups
}

struct Pending {
    bound: f64,
    seq: u64,
    fix: Vec<(usize, i8)>,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    // Max-heap order: lowest bound first, then most recent.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(self.seq.cmp(&other.seq))
    }
}

/// Open nodes: the child being dived into, then the best bound. With a
/// constant objective all bounds tie and the order is depth-first.
#[derive(Default)]
struct Frontier {
    dive: Option<Vec<(usize, i8)>>,
    dive_bound: f64,
    heap: BinaryHeap<Pending>,
    seq: u64,
}

impl Frontier {
    fn push(&mut self, bound: f64, fix: Vec<(usize, i8)>) {
        self.seq += 1;
        self.dive_bound = bound;
        self.heap.push(Pending { bound, seq: self.seq, fix });
    }

    fn pop(&mut self) -> Option<(f64, Vec<(usize, i8)>)> {
        if let Some(fix) = self.dive.take() {
            return Some((self.dive_bound, fix));
        }
        self.heap.pop().map(|p| (p.bound, p.fix))
    }
}

struct BranchAndBound<'a> {
    z: &'a HybridZonotope,
    lp: Simplex,
    fixed: Vec<Option<i8>>,
    // Values forced by probing; part of every node.
    base: Vec<Option<i8>>,
    groups: Vec<Vec<usize>>,
    opts: SolverOptions,
    stats: SearchStats,
}

impl<'a> BranchAndBound<'a> {
    fn new(z: &'a HybridZonotope, cost: Vec<f64>, opts: SolverOptions) -> Result<Self> {
        let lp = Simplex::new(&factor_lp(z, cost))?;
        Ok(BranchAndBound {
            z,
            lp,
            fixed: vec![None; z.nb()],
            base: vec![None; z.nb()],
            groups: one_hot_groups(z),
            opts,
            stats: SearchStats::default(),
        })
    }

    fn apply(&mut self, fix: &[(usize, i8)]) {
        let ng = self.z.ng();
        let mut want = self.base.clone();
        for &(k, v) in fix {
            want[k] = Some(v);
        }
        for (k, w) in want.into_iter().enumerate() {
            if self.fixed[k] != w {
                match w {
                    Some(v) => self.lp.set_bounds(ng + k, f64::from(v), f64::from(v)),
                    None => self.lp.set_bounds(ng + k, -1.0, 1.0),
                }
                self.fixed[k] = w;
            }
        }
    }

    fn solve(&mut self) -> Result<bool> {
        self.stats.lp_solves += 1;
        let status = self.lp.solve()?;
        (self.stats.pivots, self.stats.refactors) = self.lp.work();
        Ok(status == LpStatus::Optimal)
    }

    fn member(&self) -> Member {
        let ng = self.z.ng();
        let x = self.lp.point();
        let xi_c = DVector::from_column_slice(&x[..ng]);
        let xi_b = DVector::from_iterator(
            self.z.nb(),
            (0..self.z.nb()).map(|k| match self.fixed[k] {
                Some(v) => f64::from(v),
                None => x[ng + k].signum(),
            }),
        );
        let point = self.z.point_at(&xi_c, &xi_b);
        Member {
            xi_c: xi_c.iter().copied().collect(),
            xi_b: xi_b.iter().copied().collect(),
            point: point.iter().copied().collect(),
        }
    }

    fn count_node(&mut self) -> Result<()> {
        self.stats.nodes += 1;
        if self.stats.nodes > self.opts.max_nodes {
            return Err(Error::ResourceCap {
                what: "branch-and-bound node budget",
                count: self.stats.nodes,
                cap: self.opts.max_nodes,
            });
        }
        Ok(())
    }

    /// The free members of the least decided fractional one-hot group, split
    /// in index order at the median of the relaxed selection weights.
    fn split_group(&self, x: &[f64]) -> Option<(Vec<usize>, Vec<usize>)> {
        let ng = self.z.ng();
        let mut best: Option<(f64, &Vec<usize>)> = None;
        for g in &self.groups {
            if g.iter().any(|&k| self.fixed[k] == Some(1)) {
                continue;
            }
            let top = g
                .iter()
                .filter(|&&k| self.fixed[k].is_none())
                .map(|&k| 0.5 * (x[ng + k] + 1.0))
                .fold(0.0, f64::max);
            if top < 1.0 - INT_TOL && best.map_or(true, |(t, _)| top < t) {
                best = Some((top, g));
            }
        }
        let (_, g) = best?;
        let free: Vec<usize> = g.iter().copied().filter(|&k| self.fixed[k].is_none()).collect();
        let weights: Vec<f64> = free.iter().map(|&k| (0.5 * (x[ng + k] + 1.0)).max(0.0)).collect();
        let total: f64 = weights.iter().sum();
        let first = weights.iter().position(|&w| w > INT_TOL)?;
        let last = weights.iter().rposition(|&w| w > INT_TOL)?;
        if first == last {
            return None;
        }
        let mut acc = 0.0;
        let mut cut = first + 1;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if acc >= 0.5 * total {
                cut = i + 1;
                break;
            }
        }
        let cut = cut.clamp(first + 1, last);
        Some((free[..cut].to_vec(), free[cut..].to_vec()))
    }

    /// Minimise the LP objective over the mixed-integer set. With
    /// `first_feasible` the search stops at the first integral solution.
    /// Fix every binary whose other value makes the relaxation infeasible.
    /// Returns `false` when the relaxation itself is infeasible, which proves
    /// the set empty.
    fn probe(&mut self) -> Result<bool> {
        let ng = self.z.ng();
        let nb = self.z.nb();
        self.apply(&[]);
        if !self.solve()? {
            return Ok(false);
        }
        // Binary values attained by a relaxed solution under the current
        // fixings are known to be feasible.
        let mut seen = vec![[false; 2]; nb];
        let record = |seen: &mut Vec<[bool; 2]>, x: &[f64]| {
            for (k, s) in seen.iter_mut().enumerate() {
                let v = x[ng + k];
                s[0] |= v <= -1.0 + INT_TOL;
                s[1] |= v >= 1.0 - INT_TOL;
            }
        };
        record(&mut seen, &self.lp.point());
        for _ in 0..self.opts.probe_rounds {
            let mut changed = false;
            for k in 0..nb {
                if self.base[k].is_some() {
                    continue;
                }
                let mut ok = [true; 2];
                for (side, v) in [(0, -1i8), (1, 1i8)] {
                    if seen[k][side] {
                        continue;
                    }
                    self.fixed[k] = Some(v);
                    self.lp.set_bounds(ng + k, f64::from(v), f64::from(v));
                    self.stats.nodes += 1;
                    ok[side] = self.solve()?;
                    if ok[side] {
                        record(&mut seen, &self.lp.point());
                    }
                }
                let forced = match ok {
                    [false, false] => return Ok(false),
                    [true, false] => Some(-1),
                    [false, true] => Some(1),
                    [true, true] => None,
                };
                match forced {
                    Some(v) => {
                        self.base[k] = Some(v);
                        self.fixed[k] = Some(v);
                        self.lp.set_bounds(ng + k, f64::from(v), f64::from(v));
                        // Earlier witnesses may violate the new fixing.
                        seen = vec![[false; 2]; nb];
                        changed = true;
                    }
                    None => {
                        self.fixed[k] = None;
                        self.lp.set_bounds(ng + k, -1.0, 1.0);
                    }
                }
            }
            if !changed {
                break;
            }
        }
        Ok(true)
    }

    fn minimize(&mut self, first_feasible: bool) -> Result<Option<(f64, Member)>> {
        let ng = self.z.ng();
        let nb = self.z.nb();
        let mut best: Option<(f64, Member)> = None;
        if self.opts.probe_rounds > 0 && !self.probe()? {
            return Ok(None);
        }
        let mut frontier = Frontier::default();
        frontier.dive = Some(Vec::new());
        while let Some((parent, fix)) = frontier.pop() {
            if best.as_ref().is_some_and(|(b, _)| parent >= b - BOUND_TOL) {
                continue;
            }
            self.count_node()?;
            self.apply(&fix);
            if !self.solve()? {
                continue;
            }
            let value = self.lp.objective_value();
            if let Some((incumbent, _)) = &best {
                if value >= incumbent - BOUND_TOL {
                    continue;
                }
            }
            let x = self.lp.point();
            if let Some((left, right)) = self.split_group(&x) {
                // Dichotomy on a one-hot group: one child excludes each half.
                let mass = |part: &[usize]| part.iter().map(|&k| 0.5 * (x[ng + k] + 1.0)).sum::<f64>();
                let (keep_first, keep_second) = if mass(&left) >= mass(&right) {
                    (left, right)
                } else {
                    (right, left)
                };
                let mut other = fix.clone();
                other.extend(keep_first.iter().map(|&k| (k, -1)));
                frontier.push(value, other);
                let mut preferred = fix;
                preferred.extend(keep_second.iter().map(|&k| (k, -1)));
                frontier.dive = Some(preferred);
                continue;
            }
            let mut pick: Option<(usize, f64)> = None;
            for k in 0..nb {
                if self.fixed[k].is_some() {
                    continue;
                }
                let frac = 1.0 - x[ng + k].abs();
                if frac > INT_TOL && pick.map_or(true, |(_, f)| frac > f) {
                    pick = Some((k, frac));
                }
            }
            let k = match pick {
                Some((k, _)) => k,
                None => {
                    // Integral relaxation: confirm with every binary fixed.
                    let mut full = fix.clone();
                    for k in 0..nb {
                        if self.fixed[k].is_none() {
                            full.push((k, if x[ng + k] >= 0.0 { 1 } else { -1 }));
                        }
                    }
                    let free = (0..nb).find(|&k| self.fixed[k].is_none());
                    self.apply(&full);
                    if self.solve()? {
                        let value = self.lp.objective_value();
                        if best.as_ref().map_or(true, |(b, _)| value < *b) {
                            best = Some((value, self.member()));
                        }
                        if first_feasible {
                            return Ok(best);
                        }
                        continue;
                    }
                    match free {
                        Some(k) => k,
                        None => continue,
                    }
                }
            };
            let first: i8 = if x[ng + k] >= 0.0 { 1 } else { -1 };
            let mut other = fix.clone();
            other.push((k, -first));
            frontier.push(value, other);
            let mut preferred = fix;
            preferred.push((k, first));
            frontier.dive = Some(preferred);
        }
        Ok(best)
    }
}

/// Mixed-integer queries with configurable limits.
#[derive(Debug, Clone, Copy, Default)]
pub struct MiSolver {
    pub opts: SolverOptions,
}

impl MiSolver {
    pub fn new(opts: SolverOptions) -> Self {
        MiSolver { opts }
    }

    /// The same solver without root probing, for sets already passed
    /// through [`MiSolver::reduce`].
    pub fn without_probing(&self) -> Self {
        MiSolver {
            opts: SolverOptions {
                probe_rounds: 0,
                ..self.opts
            },
        }
    }

    /// Some member of `z`, or `None` when it is empty.
    pub fn find_member(&self, z: &HybridZonotope) -> Result<Option<Member>> {
        let nv = z.ng() + z.nb();
        let mut bb = BranchAndBound::new(z, vec![0.0; nv], self.opts)?;
        Ok(bb.minimize(true)?.map(|(_, m)| m))
    }

    /// An equivalent set with every binary that probing fixes substituted
    /// out and constraint rows left empty by the substitution dropped, or
    /// `None` when probing proves `z` empty.
    pub fn reduce(&self, z: &HybridZonotope) -> Result<Option<HybridZonotope>> {
        let nv = z.ng() + z.nb();
        let opts = SolverOptions {
            probe_rounds: self.opts.probe_rounds.max(1),
            ..self.opts
        };
        let mut bb = BranchAndBound::new(z, vec![0.0; nv], opts)?;
        if !bb.probe()? {
            return Ok(None);
        }
        let mut c = z.c().clone();
        let mut b = z.b().clone();
        let mut keep = Vec::new();
        for (k, fixed) in bb.base.iter().enumerate() {
            match fixed {
                Some(v) => {
                    let v = f64::from(*v);
                    c += z.gb().column(k) * v;
                    b -= z.ab().column(k) * v;
                }
                None => keep.push(k),
            }
        }
        let gb = z.gb().select_columns(&keep);
        let ab = z.ab().select_columns(&keep);
        let rows: Vec<usize> = (0..z.nc())
            .filter(|&i| {
                let empty = z.ac().row(i).iter().chain(ab.row(i).iter()).all(|v| *v == 0.0);
                !(empty && b[i].abs() <= FEAS_TOL)
            })
            .collect();
        let reduced = HybridZonotope::new(
            z.gc().clone(),
            gb,
            c,
            z.ac().select_rows(&rows),
            ab.select_rows(&rows),
            b.select_rows(&rows),
        )?;
        log::debug!("probing fixed {} of {} binaries", z.nb() - reduced.nb(), z.nb());
        Ok(Some(reduced))
    }

    pub fn is_empty(&self, z: &HybridZonotope) -> Result<bool> {
        Ok(self.find_member(z)?.is_none())
    }

    /// Membership of `x` up to `tol` in the infinity norm, with the factors
    /// of a witness when it holds.
    pub fn contains_point_witness(
        &self,
        z: &HybridZonotope,
        x: &[f64],
        tol: f64,
    ) -> Result<Option<Member>> {
        if x.len() != z.n() {
            return Err(Error::dim("contains_point", z.n(), x.len()));
        }
        let lo: Vec<f64> = x.iter().map(|v| v - tol).collect();
        let hi: Vec<f64> = x.iter().map(|v| v + tol).collect();
        let probe = z.intersection(&HybridZonotope::interval_box(&lo, &hi)?)?;
        let ng = z.ng();
        Ok(self.find_member(&probe)?.map(|m| {
            let xi_c = DVector::from_column_slice(&m.xi_c[..ng]);
            let xi_b = DVector::from_column_slice(&m.xi_b);
            let point = z.point_at(&xi_c, &xi_b);
            Member {
                xi_c: xi_c.iter().copied().collect(),
                xi_b: m.xi_b,
                point: point.iter().copied().collect(),
            }
        }))
    }

    pub fn contains_point(&self, z: &HybridZonotope, x: &[f64], tol: f64) -> Result<bool> {
        Ok(self.contains_point_witness(z, x, tol)?.is_some())
    }

    /// `max { d'z | z in Z }` and a maximiser.
    pub fn support_point(&self, z: &HybridZonotope, d: &[f64]) -> Result<(f64, Member)> {
        let (value, member, _) = self.support_with_stats(z, d)?;
        Ok((value, member))
    }

    /// [`MiSolver::support_point`] with search statistics.
    pub fn support_with_stats(&self, z: &HybridZonotope, d: &[f64]) -> Result<(f64, Member, SearchStats)> {
        if d.len() != z.n() {
            return Err(Error::dim("support", z.n(), d.len()));
        }
        let dv = DVector::from_column_slice(d);
        let wc = z.gc().tr_mul(&dv);
        let wb = z.gb().tr_mul(&dv);
        let cost: Vec<f64> = wc.iter().chain(wb.iter()).map(|v| -v).collect();
        let mut bb = BranchAndBound::new(z, cost, self.opts)?;
        let (value, member) = bb.minimize(false)?.ok_or(Error::EmptySet)?;
        Ok((dv.dot(z.c()) - value, member, bb.stats))
    }

    pub fn support(&self, z: &HybridZonotope, d: &[f64]) -> Result<f64> {
        Ok(self.support_point(z, d)?.0)
    }

    /// Axis-aligned bounds from `2n` support evaluations.
    pub fn bounds(&self, z: &HybridZonotope) -> Result<Vec<(f64, f64)>> {
        let n = z.n();
        (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                let hi = self.support(z, &e)?;
                e[i] = -1.0;
                let lo = -self.support(z, &e)?;
                Ok((lo, hi))
            })
            .collect()
    }

    /// Every binary assignment whose leaf is nonempty, in lexicographic
    /// order with `-1 < +1`.
    pub fn enumerate_leaves(&self, z: &HybridZonotope) -> Result<Vec<LeafSet>> {
        Ok(self.enumerate_leaves_with_stats(z)?.0)
    }

    pub fn enumerate_leaves_with_stats(
        &self,
        z: &HybridZonotope,
    ) -> Result<(Vec<LeafSet>, SearchStats)> {
        let nb = z.nb();
        if nb > self.opts.leaf_cap {
            return Err(Error::ResourceCap {
                what: "leaf enumeration",
                count: nb,
                cap: self.opts.leaf_cap,
            });
        }
        let nv = z.ng() + nb;
        let mut bb = BranchAndBound::new(z, vec![0.0; nv], self.opts)?;
        let mut leaves = Vec::new();
        let mut stack: Vec<Vec<(usize, i8)>> = vec![Vec::new()];
        while let Some(fix) = stack.pop() {
            bb.count_node()?;
            bb.apply(&fix);
            if !bb.solve()? {
                continue;
            }
            if fix.len() == nb {
                let assignment = FactorAssignment(fix.iter().map(|&(_, v)| v).collect());
                let leaf = z.leaf(&assignment)?;
                leaves.push(LeafSet { assignment, leaf });
                continue;
            }
            let k = fix.len();
            let mut up = fix.clone();
            up.push((k, 1));
            stack.push(up);
            let mut down = fix;
            down.push((k, -1));
            stack.push(down);
        }
        Ok((leaves, bb.stats))
    }

    /// Outer polygon of a 2-D leaf from support halfplanes every
    /// `angular_resolution` degrees.
    pub fn leaf_polygon_2d(&self, leaf: &LeafSet, angular_resolution: f64) -> Result<Polygon> {
        polygon_2d(&leaf.leaf, angular_resolution)
    }

    /// Group leaves into connected regions: two leaves are linked when their
    /// `tol`-neighbourhoods intersect.
    pub fn connected_regions(&self, leaves: &[LeafSet], tol: f64) -> Result<Vec<Vec<usize>>> {
        let m = leaves.len();
        let mut parent: Vec<usize> = (0..m).collect();
        fn root(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for i in 0..m {
            for j in (i + 1)..m {
                if root(&mut parent, i) == root(&mut parent, j) {
                    continue;
                }
                let a = &leaves[i].leaf;
                let b = &leaves[j].leaf;
                let n = a.n();
                let pad = HybridZonotope::interval_box(&vec![-tol; n], &vec![tol; n])?;
                let probe = a.intersection(&b.minkowski_sum(&pad)?)?;
                if !self.is_empty(&probe)? {
                    let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut index = vec![usize::MAX; m];
        for i in 0..m {
            let r = root(&mut parent, i);
            if index[r] == usize::MAX {
                index[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[index[r]].push(i);
        }
        Ok(groups)
    }

    /// Members of `z` for sampled checks. Each round solves one support
    /// problem in a random direction, then mixes random vertices of the
    /// maximiser's leaf, so every returned point is a member.
    pub fn sample_members<R: Rng>(
        &self,
        z: &HybridZonotope,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<DVector<f64>>> {
        let n = z.n();
        let mut out = Vec::with_capacity(count);
        if count == 0 {
            return Ok(out);
        }
        if z.nc() == 0 {
            while out.len() < count {
                let xc = DVector::from_fn(z.ng(), |_, _| rng.gen_range(-1.0..=1.0));
                let xb = DVector::from_fn(z.nb(), |_, _| if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
                out.push(z.point_at(&xc, &xb));
            }
            return Ok(out);
        }
        const PER_LEAF: usize = 6;
        while out.len() < count {
            let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let (_, m) = self.support_point(z, &d)?;
            let assignment =
                FactorAssignment(m.xi_b.iter().map(|&v| if v > 0.0 { 1 } else { -1 }).collect());
            let leaf = z.leaf(&assignment)?;
            let mut vertices = vec![DVector::from_vec(m.point.clone())];
            for _ in 1..PER_LEAF {
                let w: Vec<f64> = (0..leaf.ng()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                let r = lp_solve(&factor_lp(&leaf, w))?;
                if r.status == LpStatus::Optimal {
                    let xc = DVector::from_vec(r.point);
                    vertices.push(leaf.point_at(&xc, &DVector::zeros(0)));
                }
            }
            for _ in 0..PER_LEAF {
                if out.len() == count {
                    break;
                }
                let weights: Vec<f64> = (0..vertices.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
                let total: f64 = weights.iter().sum::<f64>().max(1e-12);
                let mut p = DVector::zeros(n);
                for (v, w) in vertices.iter().zip(&weights) {
                    p += v * (w / total);
                }
                out.push(p);
            }
        }
        Ok(out)
    }
}

fn polygon_2d(leaf: &HybridZonotope, angular_resolution: f64) -> Result<Polygon> {
    if leaf.n() != 2 {
        return Err(Error::dim("leaf_polygon_2d", 2, leaf.n()));
    }
    if leaf.nb() != 0 {
        return Err(Error::InvalidInput("polygon extraction expects a leaf without binary factors".into()));
    }
    if !(angular_resolution > 0.0 && angular_resolution <= 90.0) {
        return Err(Error::InvalidInput(format!(
            "angular resolution must lie in (0, 90] degrees, got {angular_resolution}"
        )));
    }
    let steps = (360.0 / angular_resolution).ceil() as usize;
    let (lo, hi) = leaf.interval_hull();
    let mut poly = Polygon::rectangle([lo[0] - 1.0, lo[1] - 1.0], [hi[0] + 1.0, hi[1] + 1.0]);
    let a = hstack(leaf.ac(), leaf.ab());
    let support = |d: [f64; 2]| -> Result<(f64, [f64; 2])> {
        let dv = DVector::from_column_slice(&d);
        let w = leaf.gc().tr_mul(&dv);
        let p = LpProblem {
            objective: w.iter().map(|v| -v).collect(),
            a: a.clone(),
            b: leaf.b().iter().copied().collect(),
            lo: vec![-1.0; leaf.ng()],
            hi: vec![1.0; leaf.ng()],
        };
        let r = lp_solve(&p)?;
        if r.status == LpStatus::Infeasible {
            return Err(Error::EmptySet);
        }
        let x = leaf.point_at(&DVector::from_vec(r.point), &DVector::zeros(0));
        Ok((dv.dot(leaf.c()) - r.value, [x[0], x[1]]))
    };
    let mut witnesses = Vec::with_capacity(steps);
    for k in 0..steps {
        let theta = (k as f64 * angular_resolution).to_radians();
        let d = [theta.cos(), theta.sin()];
        // Snap axis directions so 90-degree sampling is exact.
        let d = [snap(d[0]), snap(d[1])];
        let (h, x) = support(d)?;
        poly = poly.clip(d, h);
        witnesses.push(x);
    }
    // Refine between the outer polygon and the hull of the support points:
    // every inner edge normal also cuts the outer polygon, and one that
    // reaches further exposes a new face. When no edge improves, the inner
    // hull is the leaf's outline and the outer polygon has been cut to it.
    let scale = 1.0 + (0..2).map(|i| lo[i].abs().max(hi[i].abs())).fold(0.0, f64::max);
    let mut budget = 4 * steps + 64;
    'refine: while budget > 0 {
        let inner = Polygon::hull(&witnesses);
        let m = inner.vertices.len();
        if m < 3 {
            break;
        }
        for i in 0..m {
            let (p, q) = (inner.vertices[i], inner.vertices[(i + 1) % m]);
            let e = [q[0] - p[0], q[1] - p[1]];
            let len = e[0].hypot(e[1]);
            if len <= 1e-9 * scale {
                continue;
            }
            let n = [e[1] / len, -e[0] / len];
            let (h, x) = support(n)?;
            poly = poly.clip(n, h);
            if h - (n[0] * p[0] + n[1] * p[1]) > 1e-9 * scale {
                witnesses.push(x);
                budget -= 1;
                continue 'refine;
            }
        }
        break;
    }
    Ok(poly)
}

fn snap(v: f64) -> f64 {
    if v.abs() < 1e-12 {
        0.0
    } else if (v.abs() - 1.0).abs() < 1e-12 {
        v.signum()
    } else {
        v
    }
}

pub fn is_empty(z: &HybridZonotope) -> Result<bool> {
    MiSolver::default().is_empty(z)
}

pub fn contains_point(z: &HybridZonotope, x: &[f64], tol: f64) -> Result<bool> {
    MiSolver::default().contains_point(z, x, tol)
}

pub fn support(z: &HybridZonotope, d: &[f64]) -> Result<f64> {
    MiSolver::default().support(z, d)
}

pub fn bounds(z: &HybridZonotope) -> Result<Vec<(f64, f64)>> {
    MiSolver::default().bounds(z)
}

pub fn enumerate_leaves(z: &HybridZonotope) -> Result<Vec<LeafSet>> {
    MiSolver::default().enumerate_leaves(z)
}

pub fn leaf_polygon_2d(leaf: &LeafSet, angular_resolution: f64) -> Result<Polygon> {
    polygon_2d(&leaf.leaf, angular_resolution)
}

/// Polygon of a constrained zonotope given directly.
pub fn polygon_of(z: &HybridZonotope, angular_resolution: f64) -> Result<Polygon> {
    polygon_2d(z, angular_resolution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybzono::HybridZonotope as Hz;
    use nalgebra::DMatrix;

    fn unit_square() -> Hz {
        Hz::zonotope(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap()
    }

    fn two_point() -> Hz {
        Hz::new(
            DMatrix::zeros(1, 0),
            DMatrix::from_element(1, 1, 2.0),
            DVector::zeros(1),
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
        )
        .unwrap()
    }

    #[test]
    fn infeasible_constraint_is_empty() {
        let z = Hz::constrained(
            DMatrix::from_element(1, 1, 1.0),
            DVector::zeros(1),
            DMatrix::from_element(1, 1, 0.0),
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        assert!(is_empty(&z).unwrap());
        assert!(!is_empty(&unit_square()).unwrap());
    }

    #[test]
    fn interval_intersections() {
        let a = Hz::interval_box(&[0.0], &[1.0]).unwrap();
        let b = Hz::interval_box(&[2.0], &[3.0]).unwrap();
        let c = Hz::interval_box(&[0.5], &[3.0]).unwrap();
        assert!(is_empty(&a.intersection(&b).unwrap()).unwrap());
        assert!(!is_empty(&a.intersection(&c).unwrap()).unwrap());
    }

    #[test]
    fn support_values() {
        assert!((support(&unit_square(), &[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        let s = two_point().minkowski_sum(&Hz::interval_box(&[-1.0], &[1.0]).unwrap()).unwrap();
        assert!((support(&s, &[1.0]).unwrap() - 3.0).abs() < 1e-12);
        let b = Hz::interval_box(&[-1.0, -2.0], &[3.0, 4.0]).unwrap();
        assert!((support(&b, &[0.0, 1.0]).unwrap() - 4.0).abs() < 1e-12);
        let empty = Hz::interval_box(&[0.0], &[1.0])
            .unwrap()
            .intersection(&Hz::point(&[5.0]))
            .unwrap();
        assert!(matches!(support(&empty, &[1.0]), Err(Error::EmptySet)));
    }

    #[test]
    fn containment() {
        let z = unit_square().translate(&DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert!(contains_point(&z, &[1.0, 2.0], 1e-9).unwrap());
        assert!(!contains_point(&z, &[3.5, 2.0], 1e-9).unwrap());
        assert!(contains_point(&z, &[2.0, 3.0], 1e-9).unwrap());
    }

    #[test]
    fn leaf_counts() {
        assert_eq!(enumerate_leaves(&unit_square()).unwrap().len(), 1);
        let s = two_point().minkowski_sum(&Hz::interval_box(&[-1.0], &[1.0]).unwrap()).unwrap();
        assert_eq!(enumerate_leaves(&s).unwrap().len(), 2);
    }

    #[test]
    fn leaf_cap_is_enforced() {
        let s = MiSolver::new(SolverOptions {
            leaf_cap: 0,
            ..Default::default()
        });
        assert!(matches!(
            s.enumerate_leaves(&two_point()),
            Err(Error::ResourceCap { .. })
        ));
    }

    #[test]
    fn square_polygon_at_right_angles() {
        let leaves = enumerate_leaves(&unit_square()).unwrap();
        let p = leaf_polygon_2d(&leaves[0], 90.0).unwrap();
        assert_eq!(p.vertices.len(), 4);
        for v in &p.vertices {
            assert!((v[0].abs() - 1.0).abs() < 1e-12 && (v[1].abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn segment_polygon_is_thin() {
        let seg = Hz::zonotope(DMatrix::from_column_slice(2, 1, &[1.0, 1.0]), DVector::zeros(2)).unwrap();
        let leaves = enumerate_leaves(&seg).unwrap();
        let p = leaf_polygon_2d(&leaves[0], 1.0).unwrap();
        assert!(p.width() <= FEAS_TOL, "width {}", p.width());
    }

    #[test]
    fn regions_merge_touching_leaves() {
        // Two unit intervals meeting at 0 form one region; a third apart forms another.
        let a = Hz::interval_box(&[-1.0], &[0.0]).unwrap();
        let b = Hz::interval_box(&[0.0], &[1.0]).unwrap();
        let c = Hz::interval_box(&[3.0], &[4.0]).unwrap();
        let leaves: Vec<LeafSet> = [a, b, c]
            .into_iter()
            .map(|leaf| LeafSet {
                assignment: FactorAssignment(vec![]),
                leaf,
            })
            .collect();
        let groups = MiSolver::default().connected_regions(&leaves, 1e-9).unwrap();
        assert_eq!(groups, vec![vec![0, 1], vec![2]]);
    }
}
