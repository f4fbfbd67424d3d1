//! Hole detection on the raster: bounded components of the complement.

use crate::costs::CostFunction;
use crate::error::{OtError, Result};
use crate::geometry::cconvex::{image_convexity, ConvexityReport, Side};
use crate::geometry::region::Region;
use crate::linalg::Point2;
use crate::scalar::Real;

/// Smallest complement component accepted as a hole.
pub const MIN_HOLE_PIXELS: usize = 4;

#[derive(Clone, Debug)]
pub struct Hole<T> {
    /// Complement pixels (4-connected), raster order.
    pub pixels: Vec<usize>,
    /// Area including the uncovered parts of the adjacent boundary pixels.
    pub area: T,
    /// Midpoints of the pixel edges separating the hole from the region.
    pub boundary: Vec<Point2<T>>,
}

#[derive(Clone, Debug, Default)]
pub struct HoleReport<T> {
    pub holes: Vec<Hole<T>>,
}

impl<T: Real> HoleReport<T> {
    pub fn count(&self) -> usize {
        self.holes.len()
    }
}

impl<T: Real> Hole<T> {
    /// Convexity of the hole's image in co-vector coordinates at `focus`.
    pub fn convexity_wrt(&self, cost: CostFunction, region: &Region<T>, focus: Point2<T>, side: Side) -> Result<ConvexityReport<T>> {
        let g = &region.grid;
        let weights: Vec<_> = self.pixels.iter().map(|&i| (g.center(i), T::one() - region.coverage[i], true)).collect();
        image_convexity(cost, &weights, g.h, focus, side)
    }

    pub fn c_convex_wrt(&self, cost: CostFunction, region: &Region<T>, focus: Point2<T>, side: Side) -> Result<bool> {
        Ok(self.convexity_wrt(cost, region, focus, side)?.convex)
    }
}

/// Flood-fills the complement of the raster with 4-connectivity (dual to the
/// 8-connectivity used for the region itself). The component touching the
/// padding frame is unbounded and dropped; the rest are holes.
pub fn detect_holes<T: Real>(region: &Region<T>) -> Result<HoleReport<T>> {
    let g = &region.grid;
    let n = g.len();
    let mut label = vec![usize::MAX; n];
    let mut comps: Vec<(Vec<usize>, bool)> = Vec::new();
    let mut stack = Vec::new();
    let mut nb = Vec::with_capacity(8);
    for start in 0..n {
        if region.mask[start] || label[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut pixels = Vec::new();
        let mut unbounded = false;
        label[start] = id;
        stack.push(start);
        while let Some(p) = stack.pop() {
            pixels.push(p);
            let (ix, iy) = g.coords(p);
            if ix == 0 || iy == 0 || ix + 1 == g.nx || iy + 1 == g.ny {
                unbounded = true;
            }
            g.neighbors(p, false, &mut nb);
            for &q in &nb {
                if !region.mask[q] && label[q] == usize::MAX {
                    label[q] = id;
                    stack.push(q);
                }
            }
        }
        pixels.sort_unstable();
        comps.push((pixels, unbounded));
    }
    let pa = g.pixel_area();
    let mut holes = Vec::new();
    for (id, (pixels, unbounded)) in comps.into_iter().enumerate() {
        if unbounded {
            continue;
        }
        if pixels.len() < MIN_HOLE_PIXELS {
            return Err(OtError::ResolutionTooCoarse { pixels: pixels.len() });
        }
        let mut area = T::zero();
        let mut ring = Vec::new();
        let mut boundary = Vec::new();
        for &p in &pixels {
            area = area + (T::one() - region.coverage[p]) * pa;
            g.neighbors(p, true, &mut nb);
            for &q in &nb {
                if label[q] != id && region.mask[q] {
                    ring.push(q);
                }
            }
            g.neighbors(p, false, &mut nb);
            let c = g.center(p);
            for &q in &nb {
                if region.mask[q] {
                    boundary.push(c.lerp(g.center(q), T::of(0.5)));
                }
            }
        }
        ring.sort_unstable();
        ring.dedup();
        for q in ring {
            area = area + (T::one() - region.coverage[q]) * pa;
        }
        holes.push(Hole { pixels, area, boundary });
    }
    Ok(HoleReport { holes })
}
