//! Planar polygons and the convex clipping primitives used by rasterization
//! and by the Laguerre cell integrator.

use crate::linalg::Point2;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Polygon<T> {
    pub vertices: Vec<Point2<T>>,
}

impl<T: Real> Polygon<T> {
    pub fn new(vertices: Vec<Point2<T>>) -> Self {
        Self { vertices }
    }

    pub fn rect(x0: T, y0: T, x1: T, y1: T) -> Self {
        Self::new(vec![Point2::new(x0, y0), Point2::new(x1, y0), Point2::new(x1, y1), Point2::new(x0, y1)])
    }

    /// Regular `n`-gon inscribed in the circle of radius `r`, counter-clockwise.
    pub fn circle(center: Point2<T>, r: T, n: usize) -> Self {
        let verts = (0..n)
            .map(|k| {
                let a = T::TAU() * T::of_usize(k) / T::of_usize(n);
                center + Point2::new(a.cos(), a.sin()) * r
            })
            .collect();
        Self::new(verts)
    }

    pub fn signed_area(&self) -> T {
        signed_area(&self.vertices)
    }

    pub fn reversed(mut self) -> Self {
        self.vertices.reverse();
        self
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2<T>, Point2<T>)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn bbox(&self) -> (Point2<T>, Point2<T>) {
        bbox(&self.vertices)
    }

    /// Winding number of the polygon around `p` (crossing-number form).
    pub fn winding(&self, p: Point2<T>) -> i32 {
        let mut w = 0;
        for (a, b) in self.edges() {
            if a.y <= p.y {
                if b.y > p.y && (b - a).cross(p - a) > T::zero() {
                    w += 1;
                }
            } else if b.y <= p.y && (b - a).cross(p - a) < T::zero() {
                w -= 1;
            }
        }
        w
    }

    pub fn on_boundary(&self, p: Point2<T>, eps: T) -> bool {
        self.edges().any(|(a, b)| point_segment_distance(p, a, b) <= eps)
    }

    /// Whether any two non-adjacent edges intersect.
    pub fn is_simple(&self) -> bool {
        let e: Vec<_> = self.edges().collect();
        let n = e.len();
        for i in 0..n {
            for j in (i + 1)..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                if segments_intersect(e[i].0, e[i].1, e[j].0, e[j].1) {
                    return false;
                }
            }
        }
        true
    }
}

pub fn signed_area<T: Real>(v: &[Point2<T>]) -> T {
    let n = v.len();
    if n < 3 {
        return T::zero();
    }
    let mut s = T::zero();
    for i in 0..n {
        s = s + v[i].cross(v[(i + 1) % n]);
    }
    s * T::of(0.5)
}

/// Area-weighted centroid; `None` for degenerate input.
pub fn centroid<T: Real>(v: &[Point2<T>]) -> Option<(T, Point2<T>)> {
    let n = v.len();
    if n < 3 {
        return None;
    }
    // Shift to the first vertex to limit cancellation.
    let o = v[0];
    let mut a = T::zero();
    let mut c = Point2::zero();
    for i in 1..n - 1 {
        let p = v[i] - o;
        let q = v[i + 1] - o;
        let cr = p.cross(q);
        a = a + cr;
        c += (p + q) * cr;
    }
    if a == T::zero() {
        return None;
    }
    Some((a * T::of(0.5), o + c / (a * T::of(3.0))))
}

pub fn bbox<T: Real>(v: &[Point2<T>]) -> (Point2<T>, Point2<T>) {
    let mut lo = Point2::new(T::infinity(), T::infinity());
    let mut hi = Point2::new(T::neg_infinity(), T::neg_infinity());
    for p in v {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    (lo, hi)
}

pub fn point_segment_distance<T: Real>(p: Point2<T>, a: Point2<T>, b: Point2<T>) -> T {
    let d = b - a;
    let l2 = d.norm2();
    if l2 == T::zero() {
        return p.dist(a);
    }
    let t = ((p - a).dot(d) / l2).max(T::zero()).min(T::one());
    p.dist(a + d * t)
}

fn orient<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>) -> T {
    (b - a).cross(c - a)
}

pub fn segments_intersect<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>, d: Point2<T>) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    let z = T::zero();
    if ((o1 > z && o2 < z) || (o1 < z && o2 > z)) && ((o3 > z && o4 < z) || (o3 < z && o4 > z)) {
        return true;
    }
    let on = |p: Point2<T>, q: Point2<T>, r: Point2<T>| {
        r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    (o1 == z && on(a, b, c)) || (o2 == z && on(a, b, d)) || (o3 == z && on(c, d, a)) || (o4 == z && on(c, d, b))
}

/// Keeps the part of `poly` where `f(p) = n·p + c ≥ 0` (Sutherland–Hodgman step).
/// Works on any polygon; the output of a non-convex input may contain
/// degenerate bridges, which leave signed areas intact.
pub fn clip_halfplane<T: Real>(poly: &[Point2<T>], f: impl Fn(Point2<T>) -> T, out: &mut Vec<Point2<T>>) {
    out.clear();
    let n = poly.len();
    if n == 0 {
        return;
    }
    let mut prev = poly[n - 1];
    let mut fp = f(prev);
    for &cur in poly {
        let fc = f(cur);
        if fc >= T::zero() {
            if fp < T::zero() {
                out.push(prev.lerp(cur, fp / (fp - fc)));
            }
            out.push(cur);
        } else if fp > T::zero() {
            out.push(prev.lerp(cur, fp / (fp - fc)));
        }
        prev = cur;
        fp = fc;
    }
}

/// Clips `poly` to the axis-aligned rectangle `[lo, hi]`.
pub fn clip_rect<T: Real>(poly: &[Point2<T>], lo: Point2<T>, hi: Point2<T>) -> Vec<Point2<T>> {
    let mut a = poly.to_vec();
    let mut b = Vec::with_capacity(poly.len() + 4);
    clip_halfplane(&a, |p| p.x - lo.x, &mut b);
    clip_halfplane(&b, |p| hi.x - p.x, &mut a);
    clip_halfplane(&a, |p| p.y - lo.y, &mut b);
    clip_halfplane(&b, |p| hi.y - p.y, &mut a);
    a
}

/// Whether the closed segment `ab` meets the closed rectangle `[lo, hi]`
/// (Liang–Barsky).
pub fn segment_meets_rect<T: Real>(a: Point2<T>, b: Point2<T>, lo: Point2<T>, hi: Point2<T>) -> bool {
    let d = b - a;
    let mut t0 = T::zero();
    let mut t1 = T::one();
    for (p, q) in [(-d.x, a.x - lo.x), (d.x, hi.x - a.x), (-d.y, a.y - lo.y), (d.y, hi.y - a.y)] {
        if p == T::zero() {
            if q < T::zero() {
                return false;
            }
        } else {
            let r = q / p;
            if p < T::zero() {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}
