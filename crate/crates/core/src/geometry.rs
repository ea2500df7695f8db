//! Convex polygons for plotting and leaf comparisons.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    /// Counter-clockwise vertices.
    pub vertices: Vec<[f64; 2]>,
}

fn dist_to_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * ab[0] - p[0], a[1] + t * ab[1] - p[1]];
    (q[0] * q[0] + q[1] * q[1]).sqrt()
}

impl Polygon {
    pub fn new(vertices: Vec<[f64; 2]>) -> Self {
        Polygon { vertices }
    }

    pub fn rectangle(lo: [f64; 2], hi: [f64; 2]) -> Self {
        Polygon {
            vertices: vec![lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]],
        }
    }

    /// Convex hull of a point cloud, counter-clockwise.
    pub fn hull(points: &[[f64; 2]]) -> Polygon {
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        pts.dedup();
        if pts.len() < 3 {
            return Polygon { vertices: pts };
        }
        let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
            (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
        };
        let mut out: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
        for pass in 0..2 {
            let start = out.len();
            let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
                if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
            for &p in iter {
                while out.len() >= start + 2 && cross(out[out.len() - 2], out[out.len() - 1], p) <= 0.0 {
                    out.pop();
                }
                out.push(p);
            }
            out.pop();
        }
        Polygon { vertices: out }
    }

    /// Intersection with the halfplane `d . x <= h`.
    pub fn clip(&self, d: [f64; 2], h: f64) -> Polygon {
        let m = self.vertices.len();
        let mut out: Vec<[f64; 2]> = Vec::with_capacity(m + 1);
        let side = |p: [f64; 2]| d[0] * p[0] + d[1] * p[1] - h;
        for i in 0..m {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % m];
            let (sp, sq) = (side(p), side(q));
            if sp <= 0.0 {
                out.push(p);
            }
            if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
                let t = sp / (sp - sq);
                out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
        out.dedup_by(|a, b| (a[0] - b[0]).abs() <= 1e-13 && (a[1] - b[1]).abs() <= 1e-13);
        if out.len() > 1 {
            let (f, l) = (out[0], out[out.len() - 1]);
            if (f[0] - l[0]).abs() <= 1e-13 && (f[1] - l[1]).abs() <= 1e-13 {
                out.pop();
            }
        }
        Polygon { vertices: out }
    }

    pub fn area(&self) -> f64 {
        let m = self.vertices.len();
        let mut s = 0.0;
        for i in 0..m {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % m];
            s += p[0] * q[1] - q[0] * p[1];
        }
        0.5 * s
    }

    /// Smallest extent over directions sampled every half degree.
    pub fn width(&self) -> f64 {
        (0..360)
            .map(|k| {
                let t = (k as f64 * 0.5).to_radians();
                let (c, s) = (t.cos(), t.sin());
                let proj = self.vertices.iter().map(|v| c * v[0] + s * v[1]);
                let (lo, hi) = proj.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
                hi - lo
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        self.distance(p) <= tol
    }

    /// Euclidean distance from `p` to the polygon, zero inside.
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        let m = self.vertices.len();
        if m == 0 {
            return f64::INFINITY;
        }
        if m == 1 {
            return dist_to_segment(p, self.vertices[0], self.vertices[0]);
        }
        let mut inside = m >= 3;
        let mut best = f64::INFINITY;
        for i in 0..m {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % m];
            let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
            if cross < 0.0 {
                inside = false;
            }
            best = best.min(dist_to_segment(p, a, b));
        }
        if inside {
            0.0
        } else {
            best
        }
    }

    /// Hausdorff distance between convex polygons; attained at vertices.
    pub fn hausdorff(&self, other: &Polygon) -> f64 {
        let one = |a: &Polygon, b: &Polygon| {
            a.vertices.iter().map(|&v| b.distance(v)).fold(0.0, f64::max)
        };
        one(self, other).max(one(other, self))
    }
}
