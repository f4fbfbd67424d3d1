//! c-cones over sections and the modified Aleksandrov ratio.
//!
//! The cone over `S` with vertex `x₀` is the supremum of the c-affine
//! functions `m_p̄(x) = -c(x, c-Exp_{x₀} p̄) + λ` lying below the section's top
//! function on `∂S` and below `u(x₀)` at the vertex. Co-vectors `p̄` are taken
//! from a square grid centered at `-Dc(x₀, x̄₀)`; `∂K(x₀)` is approximated by
//! the grid points whose vertex constraint binds.

use rayon::prelude::*;

use crate::error::{OtError, Result};
use crate::geometry::hull::{convex_hull, signed_depth};
use crate::geometry::polygon::point_segment_distance;
use crate::linalg::{CoVec2, Point2};
use crate::scalar::Real;
use crate::singular::subdifferential_at;
use crate::transport::{DualPotential, SourceDensity};

use super::section::Section;

/// Grid points per side are capped at this count.
const MAX_GRID_SIDE: usize = 401;
const BISECTION_STEPS: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CConeOptions<T> {
    /// Build the cone even when the section reaches the support boundary.
    pub allow_boundary: bool,
    /// Co-vector grid spacing; defaults to `h·|D²_{x x̄}c(x₀, x̄₀)|`.
    pub spacing: Option<T>,
}

impl<T> Default for CConeOptions<T> {
    fn default() -> Self {
        Self { allow_boundary: false, spacing: None }
    }
}

#[derive(Clone, Debug)]
pub struct CConeFn<T> {
    pub vertex: Point2<T>,
    /// `u(x₀)`.
    pub vertex_value: T,
    /// `-Dc(x₀, x̄₀)` for the section focus.
    pub center: CoVec2<T>,
    pub spacing: T,
    /// Admissible supports `(p̄, x̄, λ)`.
    pub supports: Vec<(CoVec2<T>, Point2<T>, T)>,
    /// Indices of supports touching the cone at the vertex.
    pub binding: Vec<usize>,
    /// Counter-clockwise hull of the binding co-vectors.
    pub hull: Vec<CoVec2<T>>,
    /// `C = max_{x∈∂S} |∂_p̄ m_p̄(x)|` at the center.
    pub lipschitz: T,
}

impl<T: Real> CConeFn<T> {
    pub fn value(&self, phi: &DualPotential<T>, x: Point2<T>) -> T {
        self.supports
            .iter()
            .map(|&(_, xb, l)| -phi.cost.eval(x, xb) + l)
            .fold(T::neg_infinity(), T::max)
    }

    /// Co-vector grid approximation of `∂K(x₀)`.
    pub fn subdifferential(&self) -> Vec<CoVec2<T>> {
        self.binding.iter().map(|&k| self.supports[k].0).collect()
    }

    /// Depth of the center inside the hull of `∂K(x₀)`; negative outside.
    pub fn interior_margin(&self) -> T {
        signed_depth(&self.hull, self.center)
    }

    /// Radius `gap / C` of the ball the proof places inside `∂K(x₀)`.
    pub fn predicted_radius(&self, gap: T) -> T {
        if self.lipschitz > T::zero() {
            gap / self.lipschitz
        } else {
            T::infinity()
        }
    }
}

/// Spectral norm of a 2×2 matrix.
pub(crate) fn spectral_norm<T: Real>(m: crate::linalg::Mat2<T>) -> T {
    let f2 = m.frobenius() * m.frobenius();
    let d = m.det();
    ((f2 + (f2 * f2 - T::of(4.0) * d * d).max(T::zero()).sqrt()) * T::of(0.5)).sqrt()
}

/// Points of `∂S` with their `top` values: on each edge from a boundary pixel
/// to an outside neighbour in the support, the zero of `u - top` by
/// bisection. Pixels next to the support edge contribute their own center.
fn boundary_points<T: Real>(phi: &DualPotential<T>, mu: &SourceDensity<T>, section: &Section<T>) -> Vec<(Point2<T>, T)> {
    let g = mu.region.grid;
    let f = |x: Point2<T>| phi.value(x).0 - section.top(phi, x);
    section
        .boundary
        .par_iter()
        .flat_map_iter(|&p| {
            let b = g.center(p);
            let mut nb = Vec::with_capacity(4);
            g.neighbors(p, false, &mut nb);
            let mut out = Vec::with_capacity(4);
            if nb.len() < 4 || nb.iter().any(|&q| mu.mass[q] <= T::zero()) {
                out.push((b, section.top(phi, b)));
            }
            for q in nb.into_iter().filter(|&q| mu.mass[q] > T::zero() && !section.contains_pixel(q)) {
                let (mut lo, mut hi) = (b, g.center(q));
                for _ in 0..BISECTION_STEPS {
                    let mid = lo.lerp(hi, T::of(0.5));
                    if f(mid) <= T::zero() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                out.push((lo, section.top(phi, lo)));
            }
            out
        })
        .collect()
}

pub fn build_c_cone<T: Real>(phi: &DualPotential<T>, mu: &SourceDensity<T>, section: &Section<T>, opts: &CConeOptions<T>) -> Result<CConeFn<T>> {
    if section.touches_boundary && !opts.allow_boundary {
        return Err(OtError::BoundaryTouching);
    }
    let cost = phi.cost;
    let g = mu.region.grid;
    let x0 = section.base;
    let u0 = section.top(phi, x0) - section.gap;
    let center = -cost.grad_x(x0, section.focus);
    let bdry = boundary_points(phi, mu, section);
    let tol = T::of(1e-12) * (T::one() + u0.abs());
    // λ(p̄) and whether the vertex constraint binds.
    let support = |p: CoVec2<T>| -> Option<(Point2<T>, T, bool)> {
        let xb = cost.c_exp(x0, p).ok()?;
        let at_vertex = u0 + cost.eval(x0, xb);
        let on_boundary = bdry.iter().map(|&(b, top)| top + cost.eval(b, xb)).fold(T::infinity(), T::min);
        Some((xb, at_vertex.min(on_boundary), at_vertex <= on_boundary + tol))
    };
    let base_spacing = opts
        .spacing
        .unwrap_or_else(|| g.h * spectral_norm(cost.cross_hessian(x0, section.focus)));
    // Find a box containing every binding co-vector, then fill it.
    let r_min = bdry.iter().map(|&(b, _)| b.dist(x0)).fold(T::infinity(), T::min).max(g.h);
    let mut radius = (T::of(2.0) * section.gap / r_min).max(base_spacing * T::of(4.0));
    for _ in 0..8 {
        let probe = T::of(16.0);
        let step = radius / probe;
        let edge_binds = (-16i32..=16).any(|i| {
            [(i, -16), (i, 16), (-16, i), (16, i)].iter().any(|&(a, b)| {
                let p = center + CoVec2::new(T::of(a as f64), T::of(b as f64)) * step;
                matches!(support(p), Some((_, _, true)))
            })
        });
        if !edge_binds {
            break;
        }
        radius = radius * T::of(2.0);
    }
    let side = ((T::of(2.0) * radius / base_spacing).ceil().to_usize().unwrap_or(MAX_GRID_SIDE) | 1).clamp(33, MAX_GRID_SIDE);
    let spacing = T::of(2.0) * radius / T::of_usize(side - 1);
    let half = (side / 2) as i64;
    let grid: Vec<CoVec2<T>> = (-half..=half)
        .flat_map(|j| (-half..=half).map(move |i| (i, j)))
        .map(|(i, j)| center + CoVec2::new(T::of(i as f64), T::of(j as f64)) * spacing)
        .collect();
    let evaluated: Vec<Option<(Point2<T>, T, bool)>> = grid.par_iter().map(|&p| support(p)).collect();
    let mut supports = Vec::new();
    let mut binding = Vec::new();
    for (p, e) in grid.into_iter().zip(evaluated) {
        if let Some((xb, l, binds)) = e {
            if binds {
                binding.push(supports.len());
            }
            supports.push((p, xb, l));
        }
    }
    let pts: Vec<CoVec2<T>> = binding.iter().map(|&k| supports[k].0).collect();
    let hull = convex_hull(&pts);
    // C from central differences of p̄ ↦ -c(b, x̄(p̄)) + c(x₀, x̄(p̄)).
    let eps = spacing * T::of(1e-3);
    let m = |b: Point2<T>, p: CoVec2<T>| -> Option<T> {
        let xb = cost.c_exp(x0, p).ok()?;
        Some(-cost.eval(b, xb) + cost.eval(x0, xb))
    };
    let mut lipschitz = T::zero();
    for &(b, _) in &bdry {
        let ex = CoVec2::new(eps, T::zero());
        let ey = CoVec2::new(T::zero(), eps);
        if let (Some(a), Some(c), Some(d), Some(e)) = (m(b, center + ex), m(b, center - ex), m(b, center + ey), m(b, center - ey)) {
            let gr = CoVec2::new(a - c, d - e) * (T::one() / (T::of(2.0) * eps));
            lipschitz = lipschitz.max(gr.norm());
        }
    }
    Ok(CConeFn { vertex: x0, vertex_value: u0, center, spacing, supports, binding, hull, lipschitz })
}

/// Distance from `q` to a convex polygon (zero inside).
pub fn hull_distance<T: Real>(hull: &[CoVec2<T>], q: CoVec2<T>) -> T {
    match hull.len() {
        0 => T::infinity(),
        1 => hull[0].dist(q),
        2 => point_segment_distance(q, hull[0], hull[1]),
        n => {
            if signed_depth(hull, q) >= T::zero() {
                return T::zero();
            }
            (0..n).map(|i| point_segment_distance(q, hull[i], hull[(i + 1) % n])).fold(T::infinity(), T::min)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeInclusion<T> {
    pub checked: usize,
    /// Largest distance from a co-vector of `∂K(x₀)`, transported to its
    /// touching point, to the subdifferential of `u` there.
    pub max_excess: T,
    pub slack: T,
}

impl<T: Real> ConeInclusion<T> {
    pub fn holds(&self) -> bool {
        self.max_excess <= self.slack
    }
}

/// Checks `∂_c K(x₀) ⊂ ∂_c u(S)`: each binding support, lowered onto `u`
/// over the section, touches at some `x*` with `-Dc(x*, x̄) ∈ ∂u(x*)` up to
/// one co-grid cell. `x*` is known to raster precision only, so the best of
/// the candidate pixels counts.
pub fn cone_inclusion<T: Real>(phi: &DualPotential<T>, mu: &SourceDensity<T>, section: &Section<T>, cone: &CConeFn<T>) -> Result<ConeInclusion<T>> {
    let cost = phi.cost;
    let g = mu.region.grid;
    // Gradient of u at each section pixel center.
    let du: Vec<CoVec2<T>> = section.pixels.iter().map(|&p| phi.covector(phi.value(g.center(p)).1, g.center(p))).collect();
    let half_diag = g.h * T::of(std::f64::consts::FRAC_1_SQRT_2);
    // For each binding support, the pixels that may hold its touching point:
    // the true minimizer of u + c(·, x̄) lies in the square of a pixel whose
    // center value is within Lip·h/√2 of the raster minimum.
    let touching: Vec<Vec<(usize, CoVec2<T>)>> = cone
        .binding
        .par_iter()
        .map(|&k| {
            let xb = cone.supports[k].1;
            let mut vals = Vec::with_capacity(section.pixels.len());
            let (mut best, mut lip) = (T::infinity(), T::zero());
            for (i, (&p, &u)) in section.pixels.iter().zip(&section.values).enumerate() {
                let x = g.center(p);
                let v = u + cost.eval(x, xb);
                lip = lip.max(du[i].dist(-cost.grad_x(x, xb)));
                best = best.min(v);
                vals.push(v);
            }
            let cut = best + lip * half_diag * T::of(1.0 + 1e-9);
            section
                .pixels
                .iter()
                .zip(&vals)
                .filter(|(_, &v)| v <= cut)
                .map(|(&p, _)| (p, -cost.grad_x(g.center(p), xb)))
                .collect()
        })
        .collect();
    let mut at: Vec<usize> = touching.iter().flatten().map(|t| t.0).collect();
    at.sort_unstable();
    at.dedup();
    let hulls: Vec<Vec<CoVec2<T>>> = at.par_iter().map(|&p| subdifferential_at(phi, g.center(p), g.h).hull).collect();
    let excess: Vec<T> = touching
        .par_iter()
        .map(|cands| {
            cands
                .iter()
                .map(|&(p, q)| hull_distance(&hulls[at.binary_search(&p).expect("collected")], q))
                .fold(T::infinity(), T::min)
        })
        .collect();
    Ok(ConeInclusion {
        checked: excess.len(),
        max_excess: excess.into_iter().fold(T::zero(), T::max),
        // One co-grid cell plus the co-vector error of a one-pixel location error.
        slack: cone.spacing,
    })
}

/// A co-vector `p̄_δ ∈ ∂u(x₀)` whose c-exponential lies in the target support
/// at coordinate distance at least `δ` from its boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Witness<T> {
    pub p: CoVec2<T>,
    pub delta: T,
}

/// Coordinate distance at `x₀` from `p` to the boundary pixels of the target
/// support.
pub fn boundary_distance<T: Real>(phi: &DualPotential<T>, x0: Point2<T>, p: CoVec2<T>) -> T {
    let r = &phi.target.parent;
    let g = &r.grid;
    let mut nb = Vec::with_capacity(4);
    let mut best = T::infinity();
    for q in r.support_cells() {
        g.neighbors(q, false, &mut nb);
        let edge = r.coverage[q] < T::one() || nb.len() < 4 || nb.iter().any(|&n| r.coverage[n] <= T::zero());
        if edge {
            best = best.min(p.dist(-phi.cost.grad_x(x0, g.center(q))));
        }
    }
    best
}

pub fn validate_witness<T: Real>(phi: &DualPotential<T>, x0: Point2<T>, h: T, w: &Witness<T>) -> Result<()> {
    let sd = subdifferential_at(phi, x0, h);
    let off = hull_distance(&sd.hull, w.p);
    if off > h {
        return Err(OtError::InvalidWitness(format!("p̄ lies {off:?} outside ∂u(x₀)")));
    }
    let xb = phi.cost.c_exp(x0, w.p)?;
    if !phi.target.parent.contains(xb) {
        return Err(OtError::InvalidWitness("c-Exp(x₀, p̄) is outside the target support".into()));
    }
    let d = boundary_distance(phi, x0, w.p);
    if d < w.delta {
        return Err(OtError::InvalidWitness(format!("boundary distance {d:?} below δ = {:?}", w.delta)));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AleksandrovRow<T> {
    pub height: T,
    pub gap: T,
    pub volume: T,
    pub ell: T,
    pub d_minus: T,
    pub d_plus: T,
    /// `gap² · ℓ / (min(d-, d+) · |S|²)`.
    pub ratio: T,
}

pub fn aleksandrov_check<T: Real>(phi: &DualPotential<T>, sections: &[Section<T>], witness: &Witness<T>) -> Result<Vec<AleksandrovRow<T>>> {
    let mut rows = Vec::with_capacity(sections.len());
    let mut validated = Vec::new();
    for s in sections {
        let (d_minus, d_plus) = s.plane_distances();
        let mut row = AleksandrovRow { height: s.height, gap: s.gap, volume: s.volume, ell: s.ell, d_minus, d_plus, ratio: T::zero() };
        if s.gap > T::zero() {
            if !validated.contains(&s.base) {
                validate_witness(phi, s.base, s.h_mesh, witness)?;
                validated.push(s.base);
            }
            if s.touches_boundary {
                return Err(OtError::BoundaryTouching);
            }
            if s.ell < T::of(2.0) * s.h_mesh {
                return Err(OtError::DegenerateSection { ell: s.ell.to_f64_lossy() });
            }
            let d = d_minus.min(d_plus);
            row.ratio = if d > T::zero() { s.gap * s.gap * s.ell / (d * s.volume * s.volume) } else { T::infinity() };
        }
        rows.push(row);
    }
    Ok(rows)
}
