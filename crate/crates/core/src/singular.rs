//! Subdifferentials of the dual potential, its singular set and the
//! isolation / propagation analysis of singular points.
//!
//! A raster pixel is *raw singular* when at least two cells cover part of
//! it. Semi-discrete potentials are non-differentiable along every cell
//! boundary, so a raw pixel only counts as *significant* when the co-vectors
//! that meet at one of its partition vertices spread over more than
//! `10·h` — the same scale that decides `affine_dim ≥ 1` — and over more than
//! `2.5` target sampling steps (mapped to co-vectors by `D̄Dc`). Boundaries
//! between neighbouring target samples stay below it at every raster
//! resolution; jumps of `u`'s gradient that survive refinement of the target
//! sampling exceed it.

use crate::error::{OtError, Result};
use crate::estimates::cone::spectral_norm;
use crate::geometry::hull::{convex_hull, diameter, hull_area};
use crate::geometry::{detect_holes, Grid, Region};
use crate::linalg::{CoVec2, Point2};
use crate::scalar::Real;
use crate::transport::laguerre::{pixel_candidates, pixel_cells, scan_pixels, square_cells, tile_candidates};
use crate::transport::{DualPotential, SourceDensity};

/// Multiple of the raster step above which a subdifferential is considered
/// one- or two-dimensional.
pub const DIM_SCALE: f64 = 10.0;
/// Multiple of the target sampling step below which a gradient jump is
/// attributed to the sampling.
pub const SAMPLING_SCALE: f64 = 2.5;
/// Isolation radius in pixels.
pub const ISOLATION_RADIUS: f64 = 3.0;
/// Largest component still counted as a point.
pub const ISOLATED_MAX_PIXELS: usize = 2;

#[derive(Clone, Debug)]
pub struct SubdifferentialPolytope<T> {
    pub base: Point2<T>,
    /// Active target indices, sorted.
    pub indices: Vec<usize>,
    /// `-Dc(x₀, ȳ_j)` for each active `j`.
    pub vertices: Vec<CoVec2<T>>,
    /// Counter-clockwise convex hull of the vertices.
    pub hull: Vec<CoVec2<T>>,
    pub area: T,
    pub diameter: T,
    pub affine_dim: u8,
    pub image_points: Vec<Point2<T>>,
}

impl<T: Real> SubdifferentialPolytope<T> {
    /// Builds the polytope from active indices; `h` sets the dimension scale.
    pub fn from_active(phi: &DualPotential<T>, x0: Point2<T>, indices: Vec<usize>, h: T) -> Self {
        let vertices: Vec<CoVec2<T>> = indices.iter().map(|&j| phi.covector(j, x0)).collect();
        let hull = convex_hull(&vertices);
        let area = hull_area(&hull);
        let diameter = diameter(&hull);
        let scale = T::of(DIM_SCALE) * h;
        let affine_dim = if area > scale * scale {
            2
        } else if diameter > scale {
            1
        } else {
            0
        };
        let image_points = indices.iter().map(|&j| phi.target.points[j]).collect();
        Self { base: x0, indices, vertices, hull, area, diameter, affine_dim, image_points }
    }
}

/// `∂u(x₀)` from the cells meeting the pixel-sized square centered at `x₀`.
pub fn subdifferential_at<T: Real>(phi: &DualPotential<T>, x0: Point2<T>, h: T) -> SubdifferentialPolytope<T> {
    let half = h * T::of(0.5);
    let mut cands = Vec::new();
    tile_candidates(phi, x0, h * T::of(0.75), &mut cands);
    let mut active: Vec<usize> = square_cells(phi, x0, half, usize::MAX, &cands).cells().collect();
    active.sort_unstable();
    SubdifferentialPolytope::from_active(phi, x0, active, h)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SingularPixel<T> {
    pub pixel: usize,
    /// Largest co-vector spread at a partition vertex inside the pixel.
    pub jump: T,
    /// Diameter of the co-vectors of all cells meeting the pixel.
    pub diameter: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SingularComponent<T> {
    /// Indices into [`SingularSet::pixels`].
    pub members: Vec<usize>,
    pub diameter: T,
    /// Pixel with the largest subdifferential diameter.
    pub representative: usize,
}

#[derive(Clone, Debug)]
pub struct SingularSet<T> {
    pub grid: Grid<T>,
    /// Number of pixels shared by at least two cells.
    pub raw_count: usize,
    /// Significant pixels, raster order.
    pub pixels: Vec<SingularPixel<T>>,
    pub components: Vec<SingularComponent<T>>,
    pub threshold: T,
}

impl<T: Real> SingularSet<T> {
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Component id of each significant pixel, aligned with `pixels`.
    pub fn labels(&self) -> Vec<usize> {
        let mut l = vec![0; self.pixels.len()];
        for (c, comp) in self.components.iter().enumerate() {
            for &m in &comp.members {
                l[m] = c;
            }
        }
        l
    }
}

pub fn singular_set<T: Real>(phi: &DualPotential<T>, mu: &SourceDensity<T>) -> SingularSet<T> {
    let g = mu.region.grid;
    let threshold = T::of(DIM_SCALE) * g.h;
    let sampling = T::of(SAMPLING_SCALE) * phi.target.spacing;
    let scanned = scan_pixels(phi, mu, |cands, p| {
        let pc = pixel_cells(phi, &g, p, cands);
        if pc.pieces.len() < 2 {
            return None;
        }
        let jump = pc.jump();
        let gs: Vec<CoVec2<T>> = pc.cells().map(|j| phi.covector(j, pc.center)).collect();
        let stretch = pc.cells().map(|j| spectral_norm(phi.cost.cross_hessian(pc.center, phi.target.points[j]))).fold(T::zero(), |a, b| a.max(b));
        let significant = jump > threshold && jump > sampling * stretch;
        Some((SingularPixel { pixel: p, jump, diameter: diameter(&convex_hull(&gs)) }, significant))
    });
    let raw_count = scanned.len();
    let pixels: Vec<SingularPixel<T>> = scanned.into_iter().filter(|(_, (_, sig))| *sig).map(|(_, (s, _))| s).collect();
    let components = components(&g, &pixels);
    SingularSet { grid: g, raw_count, pixels, components, threshold }
}

fn components<T: Real>(g: &Grid<T>, pixels: &[SingularPixel<T>]) -> Vec<SingularComponent<T>> {
    let mut slot = vec![usize::MAX; g.len()];
    for (k, s) in pixels.iter().enumerate() {
        slot[s.pixel] = k;
    }
    let mut seen = vec![false; pixels.len()];
    let mut out = Vec::new();
    let mut nb = Vec::with_capacity(8);
    let mut stack = Vec::new();
    for start in 0..pixels.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut members = Vec::new();
        while let Some(k) = stack.pop() {
            members.push(k);
            g.neighbors(pixels[k].pixel, true, &mut nb);
            for &q in &nb {
                let m = slot[q];
                if m != usize::MAX && !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
        members.sort_unstable();
        let centers: Vec<Point2<T>> = members.iter().map(|&k| g.center(pixels[k].pixel)).collect();
        let diameter = diameter(&convex_hull(&centers));
        let representative = members
            .iter()
            .copied()
            .fold(members[0], |b, k| if pixels[k].diameter > pixels[b].diameter { k } else { b });
        out.push(SingularComponent { members, diameter, representative: pixels[representative].pixel });
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComponentVerdict<T> {
    pub size: usize,
    pub representative: Point2<T>,
    pub is_isolated: bool,
    pub affine_dim: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsolationReport<T> {
    pub components: Vec<ComponentVerdict<T>>,
    pub holes: usize,
    /// False when an isolated point with a 2-dimensional subdifferential
    /// appears although the target support has no hole.
    pub consistent: bool,
}

impl<T: Real> IsolationReport<T> {
    pub fn isolated(&self) -> impl Iterator<Item = &ComponentVerdict<T>> {
        self.components.iter().filter(|c| c.is_isolated)
    }

    pub fn isolated_count(&self) -> usize {
        self.isolated().count()
    }
}

pub fn isolation_report<T: Real>(s: &SingularSet<T>, phi: &DualPotential<T>) -> Result<IsolationReport<T>> {
    isolation_report_with_target(s, phi, &phi.target.parent)
}

pub fn isolation_report_with_target<T: Real>(s: &SingularSet<T>, phi: &DualPotential<T>, target: &Region<T>) -> Result<IsolationReport<T>> {
    let g = &s.grid;
    let radius = T::of(ISOLATION_RADIUS) * g.h * (T::one() + T::of(1e-9));
    let holes = detect_holes(target)?.count();
    let mut verdicts = Vec::new();
    let labels = s.labels();
    for (c, comp) in s.components.iter().enumerate() {
        let mut is_isolated = comp.members.len() <= ISOLATED_MAX_PIXELS;
        if is_isolated {
            let mine: Vec<Point2<T>> = comp.members.iter().map(|&k| g.center(s.pixels[k].pixel)).collect();
            'outer: for (k, sp) in s.pixels.iter().enumerate() {
                if labels[k] == c {
                    continue;
                }
                let q = g.center(sp.pixel);
                for &p in &mine {
                    if p.dist(q) <= radius {
                        is_isolated = false;
                        break 'outer;
                    }
                }
            }
        }
        let rep = g.center(comp.representative);
        let affine_dim = subdifferential_at(phi, rep, g.h).affine_dim;
        verdicts.push(ComponentVerdict { size: comp.members.len(), representative: rep, is_isolated, affine_dim });
    }
    let consistent = !verdicts.iter().any(|v| v.is_isolated && v.affine_dim == 2) || holes >= 1;
    Ok(IsolationReport { components: verdicts, holes, consistent })
}

/// For every hull vertex `p` of `∂u(x₀)`, the distance from `p` to the
/// gradients `Du(x_k)` at differentiability points within `radius`, and the
/// maximum of those distances over vertices.
///
/// Differentiability points are the centroids of the pieces of every pixel in
/// the ball other than `x₀` itself, with `Du = -Dc(x_k, ȳ_j)` for the piece's
/// cell. Pieces inside `x₀`'s own pixel count: a cell may reach `x₀` only there.
pub fn propagation_check<T: Real>(phi: &DualPotential<T>, mu: &SourceDensity<T>, x0: Point2<T>, radius: T) -> Result<T> {
    let g = mu.region.grid;
    let sd = subdifferential_at(phi, x0, g.h);
    if sd.indices.len() < 2 {
        return Err(OtError::NotSingular);
    }
    let mut grads: Vec<CoVec2<T>> = Vec::new();
    let mut cands = Vec::new();
    let r_pix = (radius / g.h).ceil().to_i64().unwrap_or(0);
    let c = g.locate(x0).map(|p| g.coords(p));
    let (cx, cy) = match c {
        Some((x, y)) => (x as i64, y as i64),
        None => return Err(OtError::NoPuncturedNeighborhood),
    };
    for iy in (cy - r_pix).max(0)..=(cy + r_pix).min(g.ny as i64 - 1) {
        for ix in (cx - r_pix).max(0)..=(cx + r_pix).min(g.nx as i64 - 1) {
            let p = g.index(ix as usize, iy as usize);
            if mu.mass[p] <= T::zero() || g.center(p).dist(x0) > radius {
                continue;
            }
            pixel_candidates(phi, &g, p, &mut cands);
            let pc = pixel_cells(phi, &g, p, &cands);
            for piece in &pc.pieces {
                if piece.centroid == x0 {
                    continue;
                }
                grads.push(-phi.cost.grad_x(piece.centroid, phi.target.points[piece.cell as usize]));
            }
        }
    }
    if grads.is_empty() {
        return Err(OtError::NoPuncturedNeighborhood);
    }
    let mut worst = T::zero();
    for &v in &sd.hull {
        let d = grads.iter().map(|q| q.dist(v)).fold(T::infinity(), T::min);
        worst = worst.max(d);
    }
    Ok(worst)
}
