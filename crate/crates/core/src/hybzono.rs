//! Hybrid zonotopes and their closed set operations.
//!
//! A hybrid zonotope `<Gc, Gb, c, Ac, Ab, b>` is the set
//!
//! ```text
//! { Gc xi_c + Gb xi_b + c  |  xi_c in [-1, 1]^ng,  xi_b in {-1, 1}^nb,  Ac xi_c + Ab xi_b = b }
//! ```
//!
//! It is a union of up to `2^nb` constrained zonotopes, one per binary
//! assignment. Dropping the binary factors gives a constrained zonotope and
//! dropping the constraints as well gives a plain zonotope. All operations
//! here are symbolic: they never decide emptiness, which is the job of
//! [`crate::solver`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Representation size `(ng, nb, nc)` of a hybrid zonotope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Complexity {
    pub ng: usize,
    pub nb: usize,
    pub nc: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridZonotope {
    gc: DMatrix<f64>,
    gb: DMatrix<f64>,
    c: DVector<f64>,
    ac: DMatrix<f64>,
    ab: DMatrix<f64>,
    b: DVector<f64>,
}

/// One value in `{-1, 1}` per binary factor, naming a leaf of the set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FactorAssignment(pub Vec<i8>);

impl FactorAssignment {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.0.len(), self.0.iter().map(|&v| f64::from(v)))
    }
}

pub(crate) fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

pub(crate) fn vstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.ncols());
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

pub(crate) fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut(a.shape(), b.shape()).copy_from(b);
    out
}

pub(crate) fn vcat(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

impl HybridZonotope {
    pub fn new(
        gc: DMatrix<f64>,
        gb: DMatrix<f64>,
        c: DVector<f64>,
        ac: DMatrix<f64>,
        ab: DMatrix<f64>,
        b: DVector<f64>,
    ) -> Result<Self> {
        let n = c.len();
        let nc = b.len();
        let check = |what: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!(
                    "inconsistent hybrid zonotope shapes: {what}"
                )))
            }
        };
        check("Gc rows", gc.nrows() == n)?;
        check("Gb rows", gb.nrows() == n)?;
        check("Ac rows", ac.nrows() == nc)?;
        check("Ab rows", ab.nrows() == nc)?;
        check("Ac columns", ac.ncols() == gc.ncols())?;
        check("Ab columns", ab.ncols() == gb.ncols())?;
        Ok(HybridZonotope { gc, gb, c, ac, ab, b })
    }

    /// Plain zonotope `<G, c>`.
    pub fn zonotope(g: DMatrix<f64>, c: DVector<f64>) -> Result<Self> {
        let (n, ng) = g.shape();
        Self::new(
            g,
            DMatrix::zeros(n, 0),
            c,
            DMatrix::zeros(0, ng),
            DMatrix::zeros(0, 0),
            DVector::zeros(0),
        )
    }

    /// Constrained zonotope `<G, c, A, b>`.
    pub fn constrained(
        g: DMatrix<f64>,
        c: DVector<f64>,
        a: DMatrix<f64>,
        b: DVector<f64>,
    ) -> Result<Self> {
        let n = g.nrows();
        let nc = a.nrows();
        Self::new(g, DMatrix::zeros(n, 0), c, a, DMatrix::zeros(nc, 0), b)
    }

    /// The singleton `{p}`.
    pub fn point(p: &[f64]) -> Self {
        let n = p.len();
        HybridZonotope {
            gc: DMatrix::zeros(n, 0),
            gb: DMatrix::zeros(n, 0),
            c: DVector::from_column_slice(p),
            ac: DMatrix::zeros(0, 0),
            ab: DMatrix::zeros(0, 0),
            b: DVector::zeros(0),
        }
    }

    /// Axis-aligned box `[lo, hi]`. Degenerate axes get no generator.
    pub fn interval_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::dim("interval_box", lo.len(), hi.len()));
        }
        if let Some(i) = (0..lo.len()).find(|&i| !(lo[i] <= hi[i])) {
            return Err(Error::InvalidInput(format!(
                "box lower bound {} exceeds upper bound {} on axis {i}",
                lo[i], hi[i]
            )));
        }
        let n = lo.len();
        let axes: Vec<usize> = (0..n).filter(|&i| hi[i] > lo[i]).collect();
        let mut g = DMatrix::zeros(n, axes.len());
        for (j, &i) in axes.iter().enumerate() {
            g[(i, j)] = 0.5 * (hi[i] - lo[i]);
        }
        let c = DVector::from_iterator(n, (0..n).map(|i| 0.5 * (lo[i] + hi[i])));
        Self::zonotope(g, c)
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn ng(&self) -> usize {
        self.gc.ncols()
    }

    pub fn nb(&self) -> usize {
        self.gb.ncols()
    }

    pub fn nc(&self) -> usize {
        self.b.len()
    }

    pub fn complexity(&self) -> Complexity {
        Complexity {
            ng: self.ng(),
            nb: self.nb(),
            nc: self.nc(),
        }
    }

    pub fn gc(&self) -> &DMatrix<f64> {
        &self.gc
    }

    pub fn gb(&self) -> &DMatrix<f64> {
        &self.gb
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn ac(&self) -> &DMatrix<f64> {
        &self.ac
    }

    pub fn ab(&self) -> &DMatrix<f64> {
        &self.ab
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// True when there are no binary factors and no constraints.
    pub fn is_zonotope(&self) -> bool {
        self.nb() == 0 && self.nc() == 0
    }

    /// Image of a factor assignment. Does not check the constraints.
    pub fn point_at(&self, xi_c: &DVector<f64>, xi_b: &DVector<f64>) -> DVector<f64> {
        &self.gc * xi_c + &self.gb * xi_b + &self.c
    }

    /// Largest constraint residual `|Ac xi_c + Ab xi_b - b|_inf`.
    pub fn constraint_residual(&self, xi_c: &DVector<f64>, xi_b: &DVector<f64>) -> f64 {
        if self.nc() == 0 {
            return 0.0;
        }
        (&self.ac * xi_c + &self.ab * xi_b - &self.b).amax()
    }

    /// Interval hull obtained by interval arithmetic over the factor
    /// hypercube. Constraints are ignored, so the box is sound but loose.
    pub fn interval_hull(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n();
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for i in 0..n {
            let rad: f64 = self.gc.row(i).iter().map(|v| v.abs()).sum::<f64>()
                + self.gb.row(i).iter().map(|v| v.abs()).sum::<f64>();
            lo[i] = self.c[i] - rad;
            hi[i] = self.c[i] + rad;
        }
        (lo, hi)
    }

    /// The constrained zonotope selected by fixing the binary factors.
    pub fn leaf(&self, assignment: &FactorAssignment) -> Result<HybridZonotope> {
        if assignment.len() != self.nb() {
            return Err(Error::dim("leaf", self.nb(), assignment.len()));
        }
        let xb = assignment.as_vector();
        let c = &self.c + &self.gb * &xb;
        let b = &self.b - &self.ab * &xb;
        Self::constrained(self.gc.clone(), c, self.ac.clone(), b)
    }

    /// `R Z = { R z | z in Z }`.
    pub fn linear_map(&self, r: &DMatrix<f64>) -> Result<HybridZonotope> {
        if r.ncols() != self.n() {
            return Err(Error::dim("linear_map", self.n(), r.ncols()));
        }
        Ok(HybridZonotope {
            gc: r * &self.gc,
            gb: r * &self.gb,
            c: r * &self.c,
            ac: self.ac.clone(),
            ab: self.ab.clone(),
            b: self.b.clone(),
        })
    }

    /// Keep the listed coordinates, in order.
    pub fn project(&self, coords: &[usize]) -> Result<HybridZonotope> {
        let mut r = DMatrix::zeros(coords.len(), self.n());
        for (i, &k) in coords.iter().enumerate() {
            if k >= self.n() {
                return Err(Error::dim("project", self.n(), k + 1));
            }
            r[(i, k)] = 1.0;
        }
        self.linear_map(&r)
    }

    pub fn translate(&self, offset: &DVector<f64>) -> Result<HybridZonotope> {
        if offset.len() != self.n() {
            return Err(Error::dim("translate", self.n(), offset.len()));
        }
        let mut out = self.clone();
        out.c += offset;
        Ok(out)
    }

    /// `Z (+) W = { z + w }`.
    pub fn minkowski_sum(&self, w: &HybridZonotope) -> Result<HybridZonotope> {
        if w.n() != self.n() {
            return Err(Error::dim("minkowski_sum", self.n(), w.n()));
        }
        Ok(HybridZonotope {
            gc: hstack(&self.gc, &w.gc),
            gb: hstack(&self.gb, &w.gb),
            c: &self.c + &w.c,
            ac: block_diag(&self.ac, &w.ac),
            ab: block_diag(&self.ab, &w.ab),
            b: vcat(&self.b, &w.b),
        })
    }

    /// `Z cap_R Y = { z in Z | R z in Y }`. Emptiness is not checked.
    pub fn generalized_intersection(
        &self,
        r: &DMatrix<f64>,
        y: &HybridZonotope,
    ) -> Result<HybridZonotope> {
        if r.ncols() != self.n() {
            return Err(Error::dim("generalized_intersection", self.n(), r.ncols()));
        }
        if r.nrows() != y.n() {
            return Err(Error::dim("generalized_intersection", y.n(), r.nrows()));
        }
        let ng_y = y.ng();
        let nb_y = y.nb();
        let gc = hstack(&self.gc, &DMatrix::zeros(self.n(), ng_y));
        let gb = hstack(&self.gb, &DMatrix::zeros(self.n(), nb_y));
        let ac = vstack(
            &block_diag(&self.ac, &y.ac),
            &hstack(&(r * &self.gc), &(-&y.gc)),
        );
        let ab = vstack(
            &block_diag(&self.ab, &y.ab),
            &hstack(&(r * &self.gb), &(-&y.gb)),
        );
        let b = vcat(&vcat(&self.b, &y.b), &(&y.c - r * &self.c));
        Ok(HybridZonotope {
            gc,
            gb,
            c: self.c.clone(),
            ac,
            ab,
            b,
        })
    }

    /// Plain intersection, `R = I`.
    pub fn intersection(&self, y: &HybridZonotope) -> Result<HybridZonotope> {
        if y.n() != self.n() {
            return Err(Error::dim("intersection", self.n(), y.n()));
        }
        self.generalized_intersection(&DMatrix::identity(self.n(), self.n()), y)
    }

    /// `Z x Y`.
    pub fn cartesian_product(&self, y: &HybridZonotope) -> HybridZonotope {
        HybridZonotope {
            gc: block_diag(&self.gc, &y.gc),
            gb: block_diag(&self.gb, &y.gb),
            c: vcat(&self.c, &y.c),
            ac: block_diag(&self.ac, &y.ac),
            ab: block_diag(&self.ab, &y.ab),
            b: vcat(&self.b, &y.b),
        }
    }

    /// `{ z in Z | R z <= h_max }`, one slack generator per row.
    ///
    /// For row `r` with interval lower bound `l` of `r z` over the factor
    /// hypercube, the slack `s = f - r z` lies in `[0, f - l]` and is
    /// parametrised as `(f - l)/2 (xi_s + 1)`. A row with `f < l` gets a zero
    /// slack, which leaves the infeasible equality `r z = f`.
    pub fn halfspace_intersection(
        &self,
        r: &DMatrix<f64>,
        h_max: &DVector<f64>,
    ) -> Result<HybridZonotope> {
        if r.ncols() != self.n() {
            return Err(Error::dim("halfspace_intersection", self.n(), r.ncols()));
        }
        if r.nrows() != h_max.len() {
            return Err(Error::dim("halfspace_intersection", r.nrows(), h_max.len()));
        }
        let m = r.nrows();
        let rgc = r * &self.gc;
        let rgb = r * &self.gb;
        let rc = r * &self.c;
        let mut slack = DMatrix::zeros(m, m);
        let mut rhs = DVector::zeros(m);
        for i in 0..m {
            let rad: f64 = rgc.row(i).iter().map(|v| v.abs()).sum::<f64>()
                + rgb.row(i).iter().map(|v| v.abs()).sum::<f64>();
            let lower = rc[i] - rad;
            let coef = (0.5 * (h_max[i] - lower)).max(0.0);
            slack[(i, i)] = coef;
            rhs[i] = h_max[i] - rc[i] - coef;
        }
        let gc = hstack(&self.gc, &DMatrix::zeros(self.n(), m));
        let ac = vstack(&hstack(&self.ac, &DMatrix::zeros(self.nc(), m)), &hstack(&rgc, &slack));
        let ab = vstack(&self.ab, &rgb);
        let b = vcat(&self.b, &rhs);
        Ok(HybridZonotope {
            gc,
            gb: self.gb.clone(),
            c: self.c.clone(),
            ac,
            ab,
            b,
        })
    }
}

/// Union of `N` V-rep polytopes over a shared vertex list.
///
/// Column `i` of the incidence matrix marks the vertices of polytope `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct VPolyUnion {
    vertices: DMatrix<f64>,
    incidence: DMatrix<f64>,
}

impl VPolyUnion {
    pub fn new(vertices: DMatrix<f64>, incidence: DMatrix<f64>) -> Result<Self> {
        let nv = vertices.ncols();
        if nv == 0 {
            return Err(Error::InvalidInput("vertex matrix has no vertices".into()));
        }
        if incidence.nrows() != nv {
            return Err(Error::dim("VPolyUnion incidence rows", nv, incidence.nrows()));
        }
        if incidence.ncols() == 0 {
            return Err(Error::InvalidInput("incidence matrix has no polytopes".into()));
        }
        if incidence.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidInput("incidence entries must be 0 or 1".into()));
        }
        if let Some(i) = (0..incidence.ncols()).find(|&i| incidence.column(i).sum() == 0.0) {
            return Err(Error::InvalidInput(format!("polytope {i} has no vertices")));
        }
        Ok(VPolyUnion { vertices, incidence })
    }

    /// Build from a vertex matrix and, per polytope, its vertex indices.
    pub fn from_cells(vertices: DMatrix<f64>, cells: &[Vec<usize>]) -> Result<Self> {
        let nv = vertices.ncols();
        let mut incidence = DMatrix::zeros(nv, cells.len());
        for (i, cell) in cells.iter().enumerate() {
            for &j in cell {
                if j >= nv {
                    return Err(Error::InvalidInput(format!(
                        "polytope {i} references vertex {j} of {nv}"
                    )));
                }
                incidence[(j, i)] = 1.0;
            }
        }
        Self::new(vertices, incidence)
    }

    pub fn vertices(&self) -> &DMatrix<f64> {
        &self.vertices
    }

    pub fn incidence(&self) -> &DMatrix<f64> {
        &self.incidence
    }

    pub fn dim(&self) -> usize {
        self.vertices.nrows()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.ncols()
    }

    pub fn num_polytopes(&self) -> usize {
        self.incidence.ncols()
    }

    /// Vertex indices of polytope `i`.
    pub fn cell(&self, i: usize) -> Vec<usize> {
        (0..self.num_vertices())
            .filter(|&j| self.incidence[(j, i)] == 1.0)
            .collect()
    }
}

/// Convert a union of V-rep polytopes to an equivalent hybrid zonotope.
///
/// The set `Q` puts convex weights `lambda` on continuous factors and one
/// indicator per polytope on binary factors. The halfspace intersection
/// `lambda <= M mu` switches off vertices outside the selected polytope and
/// `[V 0]` maps the weights to points. The result has exactly
/// `ng = 2 nv`, `nb = N` and `nc = nv + 2`.
pub fn sos_to_hybzono(union: &VPolyUnion) -> Result<HybridZonotope> {
    let nv = union.num_vertices();
    let np = union.num_polytopes();
    let dim = nv + np;

    let mut gc = DMatrix::zeros(dim, nv);
    gc.view_mut((0, 0), (nv, nv)).fill_with_identity();
    let mut gb = DMatrix::zeros(dim, np);
    gb.view_mut((nv, 0), (np, np)).fill_with_identity();
    let c = DVector::from_element(dim, 1.0);
    let mut ac = DMatrix::zeros(2, nv);
    ac.row_mut(0).fill(1.0);
    let mut ab = DMatrix::zeros(2, np);
    ab.row_mut(1).fill(1.0);
    let b = DVector::from_vec(vec![2.0 - nv as f64, 2.0 - np as f64]);
    let q = HybridZonotope::new(gc * 0.5, gb * 0.5, c * 0.5, ac, ab, b)?;

    let selector = hstack(&DMatrix::identity(nv, nv), &(-union.incidence()));
    let d = q.halfspace_intersection(&selector, &DVector::zeros(nv))?;

    let map = hstack(union.vertices(), &DMatrix::zeros(union.dim(), np));
    d.linear_map(&map)
}

#[derive(Serialize, Deserialize)]
struct RawHybridZonotope {
    n: usize,
    ng: usize,
    nb: usize,
    nc: usize,
    #[serde(rename = "Gc")]
    gc: Vec<Vec<f64>>,
    #[serde(rename = "Gb")]
    gb: Vec<Vec<f64>>,
    c: Vec<f64>,
    #[serde(rename = "Ac")]
    ac: Vec<Vec<f64>>,
    #[serde(rename = "Ab")]
    ab: Vec<Vec<f64>>,
    b: Vec<f64>,
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn matrix_from_rows(
    rows: &[Vec<f64>],
    nrows: usize,
    ncols: usize,
) -> std::result::Result<DMatrix<f64>, String> {
    if rows.len() != nrows {
        return Err(format!("expected {nrows} rows, found {}", rows.len()));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != ncols) {
        return Err(format!("expected {ncols} columns, found a row of {}", r.len()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl Serialize for HybridZonotope {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RawHybridZonotope {
            n: self.n(),
            ng: self.ng(),
            nb: self.nb(),
            nc: self.nc(),
            gc: matrix_rows(&self.gc),
            gb: matrix_rows(&self.gb),
            c: self.c.iter().copied().collect(),
            ac: matrix_rows(&self.ac),
            ab: matrix_rows(&self.ab),
            b: self.b.iter().copied().collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for HybridZonotope {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawHybridZonotope::deserialize(deserializer)?;
        let wrap = |what: &str, e: String| D::Error::custom(format!("{what}: {e}"));
        let gc = matrix_from_rows(&raw.gc, raw.n, raw.ng).map_err(|e| wrap("Gc", e))?;
        let gb = matrix_from_rows(&raw.gb, raw.n, raw.nb).map_err(|e| wrap("Gb", e))?;
        let ac = matrix_from_rows(&raw.ac, raw.nc, raw.ng).map_err(|e| wrap("Ac", e))?;
        let ab = matrix_from_rows(&raw.ab, raw.nc, raw.nb).map_err(|e| wrap("Ab", e))?;
        if raw.c.len() != raw.n {
            return Err(D::Error::custom("c length does not match n"));
        }
        if raw.b.len() != raw.nc {
            return Err(D::Error::custom("b length does not match nc"));
        }
        HybridZonotope::new(
            gc,
            gb,
            DVector::from_vec(raw.c),
            ac,
            ab,
            DVector::from_vec(raw.b),
        )
        .map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> HybridZonotope {
        HybridZonotope::zonotope(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap()
    }

    #[test]
    fn operation_bookkeeping() {
        let z = unit_square();
        let two_point = HybridZonotope::new(
            DMatrix::zeros(2, 0),
            DMatrix::from_column_slice(2, 1, &[2.0, 0.0]),
            DVector::zeros(2),
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
        )
        .unwrap();
        let s = z.minkowski_sum(&two_point).unwrap();
        assert_eq!(s.complexity(), Complexity { ng: 2, nb: 1, nc: 0 });

        let r = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let y = HybridZonotope::interval_box(&[0.5], &[2.0]).unwrap();
        let gi = s.generalized_intersection(&r, &y).unwrap();
        assert_eq!(gi.complexity(), Complexity { ng: 3, nb: 1, nc: 1 });
        assert_eq!(gi.n(), 2);

        let cp = gi.cartesian_product(&z);
        assert_eq!(cp.n(), 4);
        assert_eq!(cp.complexity(), Complexity { ng: 5, nb: 1, nc: 1 });
    }

    #[test]
    fn dimension_errors() {
        let z = unit_square();
        assert!(z.linear_map(&DMatrix::identity(3, 3)).is_err());
        assert!(z.minkowski_sum(&HybridZonotope::point(&[0.0])).is_err());
        let r = DMatrix::identity(2, 2);
        assert!(z
            .generalized_intersection(&r, &HybridZonotope::point(&[0.0]))
            .is_err());
        assert!(z
            .halfspace_intersection(&DMatrix::zeros(1, 3), &DVector::zeros(1))
            .is_err());
        assert!(HybridZonotope::interval_box(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn zero_sized_sets_are_legal() {
        let p = HybridZonotope::point(&[]);
        assert_eq!(p.n(), 0);
        let q = p.cartesian_product(&p);
        assert_eq!(q.n(), 0);
        let box0 = HybridZonotope::interval_box(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(box0.ng(), 0);
        assert_eq!(box0, HybridZonotope::point(&[0.0, 0.0]));
    }

    #[test]
    fn box_support_by_interval_hull() {
        let b = HybridZonotope::interval_box(&[-1.0, -2.0], &[3.0, 4.0]).unwrap();
        let (lo, hi) = b.interval_hull();
        assert_eq!(lo, vec![-1.0, -2.0]);
        assert_eq!(hi, vec![3.0, 4.0]);
    }

    #[test]
    fn linear_map_sum_of_square() {
        let z = unit_square();
        let m = z.linear_map(&DMatrix::from_row_slice(1, 2, &[1.0, 1.0])).unwrap();
        assert_eq!(m.interval_hull(), (vec![-2.0], vec![2.0]));
    }

    #[test]
    fn union_counts_small() {
        let v = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0]);
        let u = VPolyUnion::from_cells(v, &[vec![0, 1]]).unwrap();
        let z = sos_to_hybzono(&u).unwrap();
        assert_eq!(z.complexity(), Complexity { ng: 4, nb: 1, nc: 4 });
    }

    #[test]
    fn incidence_validation() {
        let v = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        assert!(VPolyUnion::new(v.clone(), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0])).is_err());
        assert!(VPolyUnion::new(v.clone(), DMatrix::from_row_slice(2, 1, &[2.0, 1.0])).is_err());
        assert!(VPolyUnion::from_cells(v, &[vec![0, 5]]).is_err());
    }

    #[test]
    fn json_shape_and_errors() {
        let z = unit_square().minkowski_sum(&HybridZonotope::point(&[1.0, 2.0])).unwrap();
        let s = serde_json::to_string(&z).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["n"], 2);
        assert_eq!(v["Gc"][0][0], 1.0);
        assert_eq!(v["c"][1], 2.0);
        let back: HybridZonotope = serde_json::from_str(&s).unwrap();
        assert_eq!(back, z);

        let bad = s.replace("\"ng\":2", "\"ng\":3");
        assert!(serde_json::from_str::<HybridZonotope>(&bad).is_err());
    }
}
