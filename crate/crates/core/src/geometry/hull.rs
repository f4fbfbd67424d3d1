//! Convex hulls and the measurements taken on them: area, diameter,
//! minimum width (rotating calipers) and longest chord along a direction.

use crate::geometry::polygon::signed_area;
use crate::linalg::{Point2, Vec2};
use crate::scalar::Real;

/// Counter-clockwise hull without collinear vertices (Andrew's monotone
/// chain). Degenerate inputs return one or two points.
pub fn convex_hull<T: Real>(points: &[Point2<T>]) -> Vec<Point2<T>> {
    let mut pts: Vec<Point2<T>> = points.iter().copied().filter(|p| p.is_finite()).collect();
    pts.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut hull: Vec<Point2<T>> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point2<T>>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                if (b - a).cross(p - a) <= T::zero() {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull.pop();
    }
    if hull.len() < 2 {
        // All points collinear: keep the extremes.
        return vec![pts[0], pts[pts.len() - 1]];
    }
    hull
}

pub fn hull_area<T: Real>(hull: &[Point2<T>]) -> T {
    signed_area(hull).abs()
}

pub fn diameter<T: Real>(points: &[Point2<T>]) -> T {
    let mut d = T::zero();
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            d = d.max(points[i].dist(points[j]));
        }
    }
    d
}

/// Minimum width of a convex polygon and the unit normal realizing it.
/// For a segment the width is 0 and the normal is perpendicular to it.
pub fn min_width<T: Real>(hull: &[Point2<T>]) -> (T, Vec2<T>) {
    let n = hull.len();
    match n {
        0 | 1 => return (T::zero(), Vec2::new(T::one(), T::zero())),
        2 => {
            let d = hull[1] - hull[0];
            let l = d.norm();
            let nrm = if l > T::zero() { d.perp() / l } else { Vec2::new(T::one(), T::zero()) };
            return (T::zero(), nrm);
        }
        _ => {}
    }
    let mut best = (T::infinity(), Vec2::new(T::one(), T::zero()));
    let mut k = 1usize;
    for i in 0..n {
        let a = hull[i];
        let b = hull[(i + 1) % n];
        let e = b - a;
        let l = e.norm();
        if l == T::zero() {
            continue;
        }
        // Antipodal pointer advances monotonically around the hull.
        while e.cross(hull[(k + 1) % n] - a) >= e.cross(hull[k] - a) && (k + 1) % n != i {
            k = (k + 1) % n;
        }
        let w = e.cross(hull[k] - a) / l;
        if w < best.0 {
            best = (w, -e.perp() / l);
        }
    }
    best
}

/// Longest segment inside the convex polygon parallel to the unit vector `dir`.
/// The chord length is concave in the lateral coordinate, so its maximum is
/// attained on a line through a vertex.
pub fn longest_chord<T: Real>(hull: &[Point2<T>], dir: Vec2<T>) -> T {
    if hull.len() < 3 {
        if hull.len() == 2 {
            let d = hull[1] - hull[0];
            if d.cross(dir).abs() <= T::epsilon() * d.norm() * T::of(16.0) {
                return d.norm();
            }
        }
        return T::zero();
    }
    let lateral = dir.perp();
    let n = hull.len();
    let mut best = T::zero();
    for &v in hull {
        let s = lateral.dot(v);
        let mut tmin = T::infinity();
        let mut tmax = T::neg_infinity();
        for i in 0..n {
            let a = hull[i];
            let b = hull[(i + 1) % n];
            let (sa, sb) = (lateral.dot(a), lateral.dot(b));
            if (sa - s) * (sb - s) > T::zero() {
                continue;
            }
            let ts = if sa == sb {
                [dir.dot(a), dir.dot(b)]
            } else {
                let t = dir.dot(a.lerp(b, (s - sa) / (sb - sa)));
                [t, t]
            };
            for t in ts {
                tmin = tmin.min(t);
                tmax = tmax.max(t);
            }
        }
        if tmax > tmin {
            best = best.max(tmax - tmin);
        }
    }
    best
}

/// Distance from `p` to the line `{q : n·q = c}` with unit `n`.
pub fn line_distance<T: Real>(p: Point2<T>, n: Vec2<T>, c: T) -> T {
    (n.dot(p) - c).abs()
}

/// Whether `p` is inside the convex counter-clockwise polygon, and its
/// distance to the boundary (negative outside).
pub fn signed_depth<T: Real>(hull: &[Point2<T>], p: Point2<T>) -> T {
    if hull.len() < 3 {
        return -hull.iter().map(|q| q.dist(p)).fold(T::infinity(), T::min);
    }
    let n = hull.len();
    let mut depth = T::infinity();
    for i in 0..n {
        let a = hull[i];
        let e = hull[(i + 1) % n] - a;
        depth = depth.min(e.cross(p - a) / e.norm());
    }
    depth
}
