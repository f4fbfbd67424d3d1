//! Sections `S_h = {u ≤ m₀ + h}` of the dual potential against a c-affine
//! function `m₀` with focus `x̄₀` touching `u` at the base point, and the
//! contact set of a supporting c-affine function.

use crate::error::{OtError, Result};
use crate::geometry::cconvex::{image_convexity, ConvexityReport, Side};
use crate::geometry::hull::{convex_hull, longest_chord, min_width};
use crate::linalg::{CoVec2, Point2, Vec2};
use crate::scalar::Real;
use crate::transport::laguerre::scan_pixels;
use crate::transport::{DualPotential, SourceDensity};

/// Hull excess tolerated for the coordinate image of a section.
pub const SECTION_CONVEXITY_TOL: f64 = 2e-2;

#[derive(Clone, Debug)]
pub struct Section<T> {
    pub focus: Point2<T>,
    pub base: Point2<T>,
    /// Offset making `m₀(x₀) = u(x₀)`.
    pub lambda0: T,
    pub height: T,
    pub h_mesh: T,
    /// Support pixels whose centers lie in the section, raster order.
    pub pixels: Vec<usize>,
    /// `u` at the centers of `pixels`.
    pub values: Vec<T>,
    /// Section pixels with a 4-neighbour outside the section.
    pub boundary: Vec<usize>,
    /// Covered area of the section pixels.
    pub volume: T,
    /// Pixel centers mapped by `-D̄c(·, x̄₀)`.
    pub coord_image: Vec<CoVec2<T>>,
    pub hull: Vec<CoVec2<T>>,
    /// Unit normal of the supporting pair `Π±`, the minimum-width direction.
    pub normal: Vec2<T>,
    /// `Π- = {n·q = planes.0}`, `Π+ = {n·q = planes.1}`.
    pub planes: (T, T),
    /// Longest segment orthogonal to `Π±` inside the hull.
    pub ell: T,
    /// `-D̄c(x₀, x̄₀)`.
    pub p0: CoVec2<T>,
    /// `m₀(x₀) + h - u(x₀)`.
    pub gap: T,
    pub convexity: Option<ConvexityReport<T>>,
    /// Whether the section reaches the edge of the source support.
    pub touches_boundary: bool,
}

impl<T: Real> Section<T> {
    /// The c-affine function bounding the section from above.
    pub fn top(&self, phi: &DualPotential<T>, x: Point2<T>) -> T {
        -phi.cost.eval(x, self.focus) + self.lambda0 + self.height
    }

    /// Distances from `p₀` to `Π-` and `Π+`.
    pub fn plane_distances(&self) -> (T, T) {
        let s = self.normal.dot(self.p0);
        (s - self.planes.0, self.planes.1 - s)
    }

    pub fn is_convex(&self) -> bool {
        self.convexity.is_none_or(|c| c.convex_at(T::of(SECTION_CONVEXITY_TOL)))
    }

    pub fn diameter(&self, mu: &SourceDensity<T>) -> T {
        let pts: Vec<Point2<T>> = self.pixels.iter().map(|&p| mu.region.grid.center(p)).collect();
        crate::geometry::hull::diameter(&convex_hull(&pts))
    }

    pub fn contains_pixel(&self, p: usize) -> bool {
        self.pixels.binary_search(&p).is_ok()
    }
}

/// Relative slack for the section inequality at pixel centers.
fn slack<T: Real>(scale: T) -> T {
    T::of(1e-10) * (T::one() + scale.abs())
}

pub fn build_section<T: Real>(phi: &DualPotential<T>, mu: &SourceDensity<T>, focus: Point2<T>, x0: Point2<T>, height: T) -> Result<Section<T>> {
    if height < T::zero() {
        return Err(OtError::Invalid("section height must be non-negative".into()));
    }
    let cost = phi.cost;
    let g = mu.region.grid;
    let (u0, _) = phi.value(x0);
    let lambda0 = u0 + cost.eval(x0, focus);
    let tol = slack(u0);
    let hits = scan_pixels(phi, mu, |cands, p| {
        let x = g.center(p);
        let u = cands.iter().map(|&j| phi.support(j, x)).fold(T::neg_infinity(), T::max);
        let top = -cost.eval(x, focus) + lambda0 + height;
        (u <= top + tol).then_some(u)
    });
    if hits.is_empty() {
        return Err(OtError::EmptySection);
    }
    let (pixels, values): (Vec<usize>, Vec<T>) = hits.into_iter().unzip();
    let inside = |p: usize| pixels.binary_search(&p).is_ok();
    let mut nb = Vec::with_capacity(4);
    let mut boundary = Vec::new();
    let mut touches_boundary = false;
    for &p in &pixels {
        g.neighbors(p, false, &mut nb);
        if nb.len() < 4 || nb.iter().any(|&q| !inside(q)) {
            boundary.push(p);
        }
        if mu.region.coverage[p] < T::one() || nb.len() < 4 || nb.iter().any(|&q| mu.mass[q] <= T::zero()) {
            touches_boundary = true;
        }
    }
    let coord_image: Vec<CoVec2<T>> = pixels.iter().map(|&p| -cost.grad_xbar(g.center(p), focus)).collect();
    let hull = convex_hull(&coord_image);
    let (_, normal) = min_width(&hull);
    let proj = |q: &CoVec2<T>| normal.dot(*q);
    let lo = hull.iter().map(proj).fold(T::infinity(), T::min);
    let hi = hull.iter().map(proj).fold(T::neg_infinity(), T::max);
    let ell = longest_chord(&hull, normal);
    let convexity = if pixels.len() >= 3 {
        let px: Vec<(Point2<T>, T, bool)> = pixels.iter().map(|&p| (g.center(p), T::one(), true)).collect();
        Some(image_convexity(cost, &px, g.h, focus, Side::SourceSet)?)
    } else {
        None
    };
    Ok(Section {
        focus,
        base: x0,
        lambda0,
        height,
        h_mesh: g.h,
        volume: pixels.iter().fold(T::zero(), |a, &p| a + mu.region.coverage[p]) * g.pixel_area(),
        pixels,
        values,
        boundary,
        coord_image,
        hull,
        normal,
        planes: (lo, hi),
        ell,
        p0: -cost.grad_xbar(x0, focus),
        gap: height,
        convexity,
        touches_boundary,
    })
}

/// Pixels where `u` touches `m(x) = -c(x, x̄₀) + c(x₀, x̄₀) + u(x₀)`,
/// `x̄₀ = c-Exp_{x₀}(p̄₀)`: the first-order model of `u - m` at the pixel
/// center reaches zero inside the pixel square.
pub fn contact_set<T: Real>(phi: &DualPotential<T>, mu: &SourceDensity<T>, x0: Point2<T>, p0: CoVec2<T>) -> Result<Vec<usize>> {
    let cost = phi.cost;
    let g = mu.region.grid;
    let focus = cost.c_exp(x0, p0)?;
    let (u0, _) = phi.value(x0);
    let lambda = u0 + cost.eval(x0, focus);
    let half = g.h * T::of(0.5);
    let tol = slack(u0);
    let hits = scan_pixels(phi, mu, |cands, p| {
        let x = g.center(p);
        let (u, j) = cands
            .iter()
            .map(|&j| (phi.support(j, x), j))
            .fold((T::neg_infinity(), 0), |a, b| if b.0 > a.0 { b } else { a });
        let m = -cost.eval(x, focus) + lambda;
        let dm = -cost.grad_x(x, focus);
        (u - m <= (phi.covector(j, x) - dm).l1() * half + tol).then_some(())
    });
    Ok(hits.into_iter().map(|(p, _)| p).collect())
}
