#![allow(dead_code)]

use hzsvse::geometry::Polygon;
use hzsvse::solver::{lp_solve, LpProblem, LpStatus};
use hzsvse::{FactorAssignment, HybridZonotope as Hz};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn interval(lo: f64, hi: f64) -> Hz {
    Hz::interval_box(&[lo], &[hi]).unwrap()
}

pub fn unit_square() -> Hz {
    Hz::zonotope(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap()
}

/// `{-2, 2}` as one binary generator.
pub fn two_points() -> Hz {
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

pub fn all_assignments(nb: usize) -> Vec<Vec<i8>> {
    (0..1usize << nb)
        .map(|m| (0..nb).map(|i| if m >> i & 1 == 1 { 1 } else { -1 }).collect())
        .collect()
}

/// LP over the continuous factors of one leaf, minimising `cost . xi_c`.
pub fn leaf_lp(z: &Hz, xb: &[i8], cost: Vec<f64>) -> Option<(f64, Vec<f64>)> {
    let xbv = DVector::from_iterator(xb.len(), xb.iter().map(|&v| v as f64));
    let rhs = z.b() - z.ab() * &xbv;
    let p = LpProblem {
        objective: cost,
        a: z.ac().clone(),
        b: rhs.iter().copied().collect(),
        lo: vec![-1.0; z.ng()],
        hi: vec![1.0; z.ng()],
    };
    let r = lp_solve(&p).unwrap();
    (r.status == LpStatus::Optimal).then_some((r.value, r.point))
}

pub fn brute_nonempty(z: &Hz) -> Vec<Vec<i8>> {
    all_assignments(z.nb())
        .into_iter()
        .filter(|xb| leaf_lp(z, xb, vec![0.0; z.ng()]).is_some())
        .collect()
}

/// `max d'z` by enumerating every leaf.
pub fn brute_support(z: &Hz, d: &[f64]) -> Option<f64> {
    let dv = DVector::from_column_slice(d);
    let wc = z.gc().tr_mul(&dv);
    let wb = z.gb().tr_mul(&dv);
    all_assignments(z.nb())
        .iter()
        .filter_map(|xb| {
            let (v, _) = leaf_lp(z, xb, wc.iter().map(|w| -w).collect())?;
            let fixed: f64 = xb.iter().zip(wb.iter()).map(|(&s, w)| s as f64 * w).sum();
            Some(-v + fixed + dv.dot(z.c()))
        })
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
}

/// A random member: random leaf among the nonempty ones, then an average of
/// a few LP vertices of that leaf.
pub fn random_member<R: Rng>(z: &Hz, rng: &mut R) -> Option<DVector<f64>> {
    let leaves = brute_nonempty(z);
    if leaves.is_empty() {
        return None;
    }
    let xb = &leaves[rng.gen_range(0..leaves.len())];
    let mut acc = DVector::zeros(z.ng());
    let k = 3;
    for _ in 0..k {
        let cost: Vec<f64> = (0..z.ng()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, xc) = leaf_lp(z, xb, cost)?;
        acc += DVector::from_vec(xc) / k as f64;
    }
    let xbv = DVector::from_iterator(xb.len(), xb.iter().map(|&v| v as f64));
    Some(z.point_at(&acc, &xbv))
}

/// Random factors of a set without constraints.
pub fn random_factors<R: Rng>(z: &Hz, rng: &mut R) -> (DVector<f64>, DVector<f64>) {
    assert_eq!(z.nc(), 0);
    let xc = DVector::from_fn(z.ng(), |_, _| rng.gen_range(-1.0..=1.0));
    let xb = DVector::from_fn(z.nb(), |_, _| if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
    (xc, xb)
}

/// A random unconstrained hybrid zonotope.
pub fn random_free<R: Rng>(rng: &mut R, n: usize, ng: usize, nb: usize) -> Hz {
    let gc = DMatrix::from_fn(n, ng, |_, _| rng.gen_range(-1.0..1.0));
    let gb = DMatrix::from_fn(n, nb, |_, _| rng.gen_range(-2.0..2.0));
    let c = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    Hz::new(gc, gb, c, DMatrix::zeros(0, ng), DMatrix::zeros(0, nb), DVector::zeros(0)).unwrap()
}

/// A random hybrid zonotope with constraints built around a known feasible
/// factor vector, so it is usually (not always) nonempty.
pub fn random_constrained<R: Rng>(rng: &mut R, n: usize, ng: usize, nb: usize, nc: usize) -> Hz {
    let gc = DMatrix::from_fn(n, ng, |_, _| rng.gen_range(-1.0..1.0));
    let gb = DMatrix::from_fn(n, nb, |_, _| rng.gen_range(-1.0..1.0));
    let c = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let ac = DMatrix::from_fn(nc, ng, |_, _| rng.gen_range(-1.0..1.0));
    let ab = DMatrix::from_fn(nc, nb, |_, _| rng.gen_range(-1.0..1.0));
    let xc = DVector::from_fn(ng, |_, _| rng.gen_range(-0.9..0.9));
    let xb = DVector::from_fn(nb, |_, _| if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
    let mut b = &ac * xc + &ab * xb;
    if rng.gen_bool(0.2) {
        // Occasionally push the right-hand side away so some sets are empty.
        for v in b.iter_mut() {
            *v += rng.gen_range(-3.0..3.0);
        }
    }
    Hz::new(gc, gb, c, ac, ab, b).unwrap()
}

/// Convex hull (counter-clockwise) of planar points.
pub fn hull(mut pts: Vec<[f64; 2]>) -> Polygon {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    if pts.len() < 3 {
        return Polygon::new(pts);
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 1e-12 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 1e-12 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    Polygon::new(lower)
}

/// Vertices of an unconstrained leaf: every sign pattern of the continuous
/// factors.
pub fn zonotope_vertices(z: &Hz, xb: &[i8]) -> Vec<[f64; 2]> {
    assert_eq!(z.nc(), 0);
    let xbv = DVector::from_iterator(xb.len(), xb.iter().map(|&v| v as f64));
    all_assignments(z.ng())
        .iter()
        .map(|s| {
            let xc = DVector::from_iterator(s.len(), s.iter().map(|&v| v as f64));
            let p = z.point_at(&xc, &xbv);
            [p[0], p[1]]
        })
        .collect()
}

pub fn assignment(v: &[i8]) -> FactorAssignment {
    FactorAssignment(v.to_vec())
}

/// Barycentric membership in a triangle.
pub fn in_triangle(p: [f64; 2], t: [[f64; 2]; 3], tol: f64) -> bool {
    let [a, b, c] = t;
    let det = (b[1] - c[1]) * (a[0] - c[0]) + (c[0] - b[0]) * (a[1] - c[1]);
    if det.abs() < 1e-14 {
        return false;
    }
    let l1 = ((b[1] - c[1]) * (p[0] - c[0]) + (c[0] - b[0]) * (p[1] - c[1])) / det;
    let l2 = ((c[1] - a[1]) * (p[0] - c[0]) + (a[0] - c[0]) * (p[1] - c[1])) / det;
    let l3 = 1.0 - l1 - l2;
    l1 >= -tol && l2 >= -tol && l3 >= -tol
}

/// Piecewise-linear function through `(xs[i], ys[i])`.
pub fn pw_eval(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1) - 1;
    let t = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] + t * (ys[k + 1] - ys[k])
}

/// Image of `[a, b]` segment by segment: on each segment the map is affine,
/// so the image of the clipped interval is the hull of its endpoint values.
pub fn pw_image(xs: &[f64], ys: &[f64], a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for k in 0..xs.len() - 1 {
        let lo = a.max(xs[k]);
        let hi = b.min(xs[k + 1]);
        if lo > hi {
            continue;
        }
        let (u, v) = (pw_eval(xs, ys, lo), pw_eval(xs, ys, hi));
        out.push((u.min(v), u.max(v)));
    }
    merge(out)
}

/// Preimage of `[c, d]` segment by segment.
pub fn pw_preimage(xs: &[f64], ys: &[f64], c: f64, d: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for k in 0..xs.len() - 1 {
        let (x0, x1, y0, y1) = (xs[k], xs[k + 1], ys[k], ys[k + 1]);
        let slope = (y1 - y0) / (x1 - x0);
        if slope.abs() < 1e-14 {
            if c <= y0 && y0 <= d {
                out.push((x0, x1));
            }
            continue;
        }
        let (ta, tb) = (x0 + (c - y0) / slope, x0 + (d - y0) / slope);
        let lo = ta.min(tb).max(x0);
        let hi = ta.max(tb).min(x1);
        if lo <= hi {
            out.push((lo, hi));
        }
    }
    merge(out)
}

/// Sort and merge overlapping (or touching) closed intervals.
pub fn merge(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in v {
        match out.last_mut() {
            Some(last) if lo <= last.1 + 1e-9 => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

fn dist_to(x: f64, set: &[(f64, f64)]) -> f64 {
    set.iter()
        .map(|&(lo, hi)| if x < lo { lo - x } else if x > hi { x - hi } else { 0.0 })
        .fold(f64::INFINITY, f64::min)
}

/// `sup_{a in A} dist(a, B)` for finite unions of closed intervals. The
/// distance is piecewise linear on each interval of `A`, peaking at its
/// endpoints or at the midpoint of a gap of `B`.
fn excess(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut mids: Vec<f64> = b.windows(2).map(|w| 0.5 * (w[0].1 + w[1].0)).collect();
    if let (Some(f), Some(l)) = (b.first(), b.last()) {
        mids.push(f.0 - 1e9);
        mids.push(l.1 + 1e9);
    }
    let mut worst: f64 = 0.0;
    for &(lo, hi) in a {
        worst = worst.max(dist_to(lo, b)).max(dist_to(hi, b));
        for &m in &mids {
            worst = worst.max(dist_to(m.clamp(lo, hi), b));
        }
    }
    worst
}

pub fn hausdorff_1d(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { f64::INFINITY };
    }
    excess(a, b).max(excess(b, a))
}

/// A 1-D set as merged intervals, one per nonempty leaf.
pub fn leaf_intervals(solver: &hzsvse::MiSolver, z: &Hz) -> Vec<(f64, f64)> {
    assert_eq!(z.n(), 1);
    let leaves = solver.enumerate_leaves(z).unwrap();
    merge(
        leaves
            .iter()
            .map(|l| solver.bounds(&l.leaf).unwrap()[0])
            .collect(),
    )
}
