//! Source densities on the raster and discrete target measures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{OtError, Result};
use crate::geometry::polygon::{centroid, clip_rect};
use crate::geometry::region::{Region, Shape};
use crate::linalg::Point2;
use crate::scalar::Real;

/// Side of the checkerboard used by [`DensitySpec::Checkerboard`].
pub const CHECKER_CELLS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DensitySpec {
    Uniform,
    /// Two-valued 4×4 board over the bounding box with ratio `contrast`.
    Checkerboard(f64),
}

impl std::str::FromStr for DensitySpec {
    type Err = OtError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "uniform" {
            return Ok(DensitySpec::Uniform);
        }
        if let Some(arg) = s.strip_prefix("checkerboard(").and_then(|r| r.strip_suffix(')')) {
            let c: f64 = arg.trim().parse().map_err(|_| OtError::Invalid(format!("bad contrast in `{s}`")))?;
            if !(c >= 1.0 && c.is_finite()) {
                return Err(OtError::Invalid("checkerboard contrast must be ≥ 1".into()));
            }
            return Ok(DensitySpec::Checkerboard(c));
        }
        Err(OtError::Invalid(format!("unknown density `{s}`")))
    }
}

/// `μ = f dx` on the raster of `region`. Pixel `p` carries mass
/// `mass[p] = f[p]·coverage[p]·h²`, spread uniformly over its square.
#[derive(Clone, Debug)]
pub struct SourceDensity<T> {
    pub region: Region<T>,
    pub f: Vec<T>,
    pub mass: Vec<T>,
    /// Pixels with positive mass, raster order.
    pub support: Vec<usize>,
    /// Smallest `Λ` with `Λ⁻¹ ≤ f ≤ Λ` on the support.
    pub lambda: T,
}

impl<T: Real> SourceDensity<T> {
    pub fn uniform(region: Region<T>) -> Result<Self> {
        Self::new(region, DensitySpec::Uniform)
    }

    pub fn new(region: Region<T>, spec: DensitySpec) -> Result<Self> {
        let g = region.grid;
        let (lo, hi) = region.bbox;
        let mut f = vec![T::zero(); g.len()];
        for (i, fi) in f.iter_mut().enumerate() {
            if region.coverage[i] <= T::zero() {
                continue;
            }
            *fi = match spec {
                DensitySpec::Uniform => T::one(),
                DensitySpec::Checkerboard(c) => {
                    let p = g.center(i);
                    let cells = T::of_usize(CHECKER_CELLS);
                    let cx = ((p.x - lo.x) / (hi.x - lo.x) * cells).floor().max(T::zero()).min(cells - T::one());
                    let cy = ((p.y - lo.y) / (hi.y - lo.y) * cells).floor().max(T::zero()).min(cells - T::one());
                    let parity = (cx.to_i64().unwrap() + cy.to_i64().unwrap()) % 2;
                    if parity == 0 {
                        T::one()
                    } else {
                        T::of(c)
                    }
                }
            };
        }
        let pa = g.pixel_area();
        let total: T = (0..g.len()).map(|i| f[i] * region.coverage[i] * pa).sum();
        if !(total > T::zero()) {
            return Err(OtError::EmptySet);
        }
        for v in f.iter_mut() {
            *v = *v / total;
        }
        let mass: Vec<T> = (0..g.len()).map(|i| f[i] * region.coverage[i] * pa).collect();
        let support: Vec<usize> = (0..g.len()).filter(|&i| mass[i] > T::zero()).collect();
        let (fmin, fmax) = support
            .iter()
            .fold((T::infinity(), T::zero()), |(a, b), &i| (a.min(f[i]), b.max(f[i])));
        let lambda = fmax.max(T::one() / fmin);
        let s = SourceDensity { region, f, mass, support, lambda };
        let comps = s.support_components();
        if comps != 1 {
            return Err(OtError::DisconnectedSupport { components: comps });
        }
        Ok(s)
    }

    pub fn grid(&self) -> &crate::geometry::Grid<T> {
        &self.region.grid
    }

    pub fn h(&self) -> T {
        self.region.grid.h
    }

    /// 8-connected components of the positive-mass pixels.
    pub fn support_components(&self) -> usize {
        let g = &self.region.grid;
        let mut seen = vec![false; g.len()];
        let mut nb = Vec::with_capacity(8);
        let mut stack = Vec::new();
        let mut comps = 0;
        for &s in &self.support {
            if seen[s] {
                continue;
            }
            comps += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(p) = stack.pop() {
                g.neighbors(p, true, &mut nb);
                for &q in &nb {
                    if !seen[q] && self.mass[q] > T::zero() {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        comps
    }
}

/// How a target region is discretized into weighted points (uniform `g`).
#[derive(Clone, Debug, PartialEq)]
pub enum TargetSampling {
    /// Centroids of the square blocks `[ms,(m+1)s]×[ns,(n+1)s]` clipped to the region.
    Lattice { spacing: f64 },
    /// About `count` lattice points (spacing `√(area/count)`).
    Count(usize),
    /// Analytic annular sectors; annulus presets only. The first ring has
    /// thickness `s/4` and rings grow by `growth` up to `s`.
    Polar { spacing: f64, growth: f64 },
    /// `count` uniform random points with equal weights.
    Random { count: usize, seed: u64 },
    /// Explicit points and (unnormalized) weights.
    Explicit(Vec<(f64, f64, f64)>),
}

#[derive(Clone, Debug)]
pub struct DiscreteTarget<T> {
    pub points: Vec<Point2<T>>,
    pub weights: Vec<T>,
    pub parent: Region<T>,
    /// Sampling step when the points discretize the parent region, zero for
    /// explicit lists. Gradient jumps below this scale are sampling artifacts.
    pub spacing: T,
}

impl<T: Real> DiscreteTarget<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Normalizes the weights and validates positivity, containment and
    /// distinctness.
    pub fn new(points: Vec<Point2<T>>, weights: Vec<T>, parent: Region<T>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(OtError::Invalid("target needs as many positive weights as points".into()));
        }
        if weights.iter().any(|w| !(*w > T::zero())) {
            return Err(OtError::Invalid("target weights must be positive".into()));
        }
        for p in &points {
            if !parent.contains(*p) {
                return Err(OtError::Invalid(format!("target point ({}, {}) lies outside its region", p.x, p.y)));
            }
        }
        let mut sorted: Vec<Point2<T>> = points.clone();
        sorted.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(OtError::Invalid("target points must be distinct".into()));
        }
        let total: T = weights.iter().copied().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { points, weights, parent, spacing: T::zero() })
    }

    pub fn sample(parent: Region<T>, sampling: &TargetSampling) -> Result<Self> {
        let ((points, weights), spacing) = match sampling {
            TargetSampling::Lattice { spacing } => (lattice(&parent, T::of(*spacing))?, T::of(*spacing)),
            TargetSampling::Count(n) => {
                if *n == 0 {
                    return Err(OtError::Invalid("target count must be positive".into()));
                }
                let s = (parent.area() / T::of_usize(*n)).sqrt();
                (lattice(&parent, s)?, s)
            }
            TargetSampling::Polar { spacing, growth } => (polar(&parent, T::of(*spacing), T::of(*growth))?, T::of(*spacing)),
            TargetSampling::Random { count, seed } => {
                let s = (parent.area() / T::of_usize((*count).max(1))).sqrt();
                (random(&parent, *count, *seed)?, s)
            }
            TargetSampling::Explicit(list) => (list.iter().map(|&(x, y, w)| (Point2::new(T::of(x), T::of(y)), T::of(w))).unzip(), T::zero()),
        };
        let mut t = Self::new(points, weights, parent)?;
        t.spacing = spacing;
        Ok(t)
    }
}

fn lattice<T: Real>(region: &Region<T>, s: T) -> Result<(Vec<Point2<T>>, Vec<T>)> {
    if !(s > T::zero()) {
        return Err(OtError::Invalid("lattice spacing must be positive".into()));
    }
    let (lo, hi) = region.bbox;
    let m0 = (lo.x / s).floor().to_i64().unwrap();
    let n0 = (lo.y / s).floor().to_i64().unwrap();
    let m1 = (hi.x / s).ceil().to_i64().unwrap();
    let n1 = (hi.y / s).ceil().to_i64().unwrap();
    let (nm, nn) = ((m1 - m0) as usize, (n1 - n0) as usize);
    // (area, area·centroid) per block
    let mut blocks: Vec<(T, Point2<T>)> = vec![(T::zero(), Point2::zero()); nm * nn];
    for bn in 0..nn {
        for bm in 0..nm {
            let blo = Point2::new(T::from_i64(m0 + bm as i64).unwrap() * s, T::from_i64(n0 + bn as i64).unwrap() * s);
            let bhi = blo + Point2::new(s, s);
            let mut a = T::zero();
            let mut m = Point2::zero();
            for poly in &region.polygons {
                if let Some((pa, pc)) = centroid(&clip_rect(&poly.vertices, blo, bhi)) {
                    a = a + pa;
                    m += pc * pa;
                }
            }
            blocks[bn * nm + bm] = (a, m);
        }
    }
    let tiny = s * s * T::of(1e-12);
    let small = s * s * T::of(0.2);
    let area: Vec<T> = blocks.iter().map(|b| b.0).collect();
    for b in 0..blocks.len() {
        if area[b] <= tiny || area[b] >= small {
            continue;
        }
        let (bm, bn) = ((b % nm) as i64, (b / nm) as i64);
        // Edge neighbours take precedence over diagonal ones.
        let mut best: Option<usize> = None;
        for ring in [[(0, -1), (-1, 0), (1, 0), (0, 1)], [(-1, -1), (1, -1), (-1, 1), (1, 1)]] {
            for (dm, dn) in ring {
                let (x, y) = (bm + dm, bn + dn);
                if x < 0 || y < 0 || x >= nm as i64 || y >= nn as i64 {
                    continue;
                }
                let q = y as usize * nm + x as usize;
                if area[q] >= small && best.is_none_or(|k| area[q] > area[k]) {
                    best = Some(q);
                }
            }
            if best.is_some() {
                break;
            }
        }
        if let Some(q) = best {
            let moved = blocks[b];
            blocks[q].0 = blocks[q].0 + moved.0;
            blocks[q].1 += moved.1;
            blocks[b] = (T::zero(), Point2::zero());
        }
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (a, m) in blocks {
        if a <= tiny {
            continue;
        }
        let mut c = m / a;
        if !region.contains(c) {
            let i = region.nearest_inside(c).ok_or(OtError::EmptySet)?;
            c = region.grid.center(i);
        }
        points.push(c);
        weights.push(a);
    }
    Ok((points, weights))
}

fn polar<T: Real>(region: &Region<T>, s: T, growth: T) -> Result<(Vec<Point2<T>>, Vec<T>)> {
    let Shape::Annulus { center, r_in, r_out } = region.shape else {
        return Err(OtError::Invalid("polar sampling needs an annulus region".into()));
    };
    if !(s > T::zero()) || !(growth >= T::one()) {
        return Err(OtError::Invalid("polar sampling needs spacing > 0 and growth ≥ 1".into()));
    }
    let mut radii = vec![r_in];
    let mut t = s * T::of(0.25);
    while *radii.last().unwrap() < r_out {
        let r = *radii.last().unwrap();
        radii.push((r + t).min(r_out));
        t = (t * growth).min(s);
    }
    // Fold a sliver of a last ring into its predecessor.
    let k = radii.len();
    if k >= 3 && radii[k - 1] - radii[k - 2] < (radii[k - 2] - radii[k - 3]) * T::of(0.5) {
        radii.remove(k - 2);
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for w in radii.windows(2) {
        let (r1, r2) = (w[0], w[1]);
        let rm = (r1 + r2) * T::of(0.5);
        let sectors = 8 * ((T::TAU() * rm / (T::of(8.0) * s)).ceil().to_usize().unwrap().max(1));
        let dth = T::TAU() / T::of_usize(sectors);
        let half = dth * T::of(0.5);
        let rbar = T::of(2.0) / T::of(3.0) * (r2 * r2 * r2 - r1 * r1 * r1) / (r2 * r2 - r1 * r1) * half.sin() / half;
        let area = half * (r2 * r2 - r1 * r1);
        for k in 0..sectors {
            let th = dth * (T::of_usize(k) + T::of(0.5));
            let mut c = center + Point2::new(th.cos(), th.sin()) * rbar;
            if !region.contains(c) {
                let i = region.nearest_inside(c).ok_or(OtError::EmptySet)?;
                c = region.grid.center(i);
            }
            points.push(c);
            weights.push(area);
        }
    }
    Ok((points, weights))
}

fn random<T: Real>(region: &Region<T>, count: usize, seed: u64) -> Result<(Vec<Point2<T>>, Vec<T>)> {
    if count == 0 {
        return Err(OtError::Invalid("target count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = region.bbox;
    let (lo, hi) = ((lo.x.to_f64_lossy(), lo.y.to_f64_lossy()), (hi.x.to_f64_lossy(), hi.y.to_f64_lossy()));
    let mut points = Vec::with_capacity(count);
    let mut tries = 0usize;
    while points.len() < count {
        tries += 1;
        if tries > 1000 * count {
            return Err(OtError::EmptySet);
        }
        let p = Point2::new(T::of(rng.gen_range(lo.0..hi.0)), T::of(rng.gen_range(lo.1..hi.1)));
        if region.contains(p) {
            points.push(p);
        }
    }
    let weights = vec![T::one(); count];
    Ok((points, weights))
}
