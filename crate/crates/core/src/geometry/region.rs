//! Polygonal regions with an exact-coverage raster.
//!
//! Pixel centers sit on the lattice `hℤ²`, so the origin is always a pixel
//! center. `h` is the longest bounding-box side divided by the resolution and
//! the raster carries one padding pixel on every side.

use std::fmt;

use crate::error::{OtError, Result};
use crate::geometry::polygon::{bbox, clip_rect, segment_meets_rect, signed_area, Polygon};
use crate::linalg::Point2;
use crate::scalar::Real;

/// Vertices used for circle boundaries (a multiple of 8 keeps the raster
/// symmetric under the dihedral group of the square).
pub const CIRCLE_VERTICES: usize = 1024;

/// Regular grid of pixel centers `((i0 + ix)·h, (j0 + iy)·h)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid<T> {
    pub h: T,
    pub i0: i64,
    pub j0: i64,
    pub nx: usize,
    pub ny: usize,
}

impl<T: Real> Grid<T> {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn center_xy(&self, ix: usize, iy: usize) -> Point2<T> {
        Point2::new(
            T::from_i64(self.i0 + ix as i64).unwrap() * self.h,
            T::from_i64(self.j0 + iy as i64).unwrap() * self.h,
        )
    }

    #[inline]
    pub fn center(&self, idx: usize) -> Point2<T> {
        let (ix, iy) = self.coords(idx);
        self.center_xy(ix, iy)
    }

    /// Closed square of pixel `idx`.
    pub fn square(&self, idx: usize) -> (Point2<T>, Point2<T>) {
        let c = self.center(idx);
        let r = Point2::new(self.h, self.h) * T::of(0.5);
        (c - r, c + r)
    }

    pub fn pixel_area(&self) -> T {
        self.h * self.h
    }

    /// Pixel containing `p` (nearest center), if on the grid.
    pub fn locate(&self, p: Point2<T>) -> Option<usize> {
        let ix = (p.x / self.h).round().to_i64()? - self.i0;
        let iy = (p.y / self.h).round().to_i64()? - self.j0;
        if ix < 0 || iy < 0 || ix >= self.nx as i64 || iy >= self.ny as i64 {
            return None;
        }
        Some(self.index(ix as usize, iy as usize))
    }

    /// 4- or 8-neighbors of `idx` inside the grid.
    pub fn neighbors(&self, idx: usize, eight: bool, out: &mut Vec<usize>) {
        out.clear();
        let (ix, iy) = self.coords(idx);
        let (ix, iy) = (ix as i64, iy as i64);
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if (dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0) {
                    continue;
                }
                let (x, y) = (ix + dx, iy + dy);
                if x >= 0 && y >= 0 && x < self.nx as i64 && y < self.ny as i64 {
                    out.push(self.index(x as usize, y as usize));
                }
            }
        }
    }
}

/// Analytic description kept alongside the polygons of a preset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape<T> {
    Square { lo: Point2<T>, hi: Point2<T> },
    Annulus { center: Point2<T>, r_in: T, r_out: T },
    SplitPair { gap: T },
    LShape,
    Polygons,
}

#[derive(Clone, Debug)]
pub struct Region<T> {
    pub polygons: Vec<Polygon<T>>,
    pub shape: Shape<T>,
    pub bbox: (Point2<T>, Point2<T>),
    pub grid: Grid<T>,
    /// Closed point-in-region test at pixel centers.
    pub mask: Vec<bool>,
    /// Exact fraction of each pixel covered by the region.
    pub coverage: Vec<T>,
}

impl<T: Real> Region<T> {
    /// Orients the polygons (outer boundaries counter-clockwise, holes
    /// clockwise, by nesting depth) and rasterizes at `resolution` pixels
    /// along the longest bounding-box side.
    pub fn from_polygons(polygons: Vec<Polygon<T>>, shape: Shape<T>, resolution: usize) -> Result<Self> {
        if polygons.is_empty() || polygons.iter().any(|p| p.vertices.len() < 3) {
            return Err(OtError::Invalid("region needs polygons with at least 3 vertices".into()));
        }
        if resolution < 2 {
            return Err(OtError::Invalid("resolution must be at least 2".into()));
        }
        for p in &polygons {
            if !p.is_simple() {
                return Err(OtError::Invalid("region polygon is not simple".into()));
            }
        }
        let polygons = orient_by_depth(polygons);
        let all: Vec<Point2<T>> = polygons.iter().flat_map(|p| p.vertices.iter().copied()).collect();
        let bb = bbox(&all);
        let side = (bb.1.x - bb.0.x).max(bb.1.y - bb.0.y);
        let h = side / T::of_usize(resolution);
        let i0 = (bb.0.x / h).floor().to_i64().unwrap() - 1;
        let j0 = (bb.0.y / h).floor().to_i64().unwrap() - 1;
        let i1 = (bb.1.x / h).ceil().to_i64().unwrap() + 1;
        let j1 = (bb.1.y / h).ceil().to_i64().unwrap() + 1;
        let grid = Grid { h, i0, j0, nx: (i1 - i0 + 1) as usize, ny: (j1 - j0 + 1) as usize };
        let mut region = Region { polygons, shape, bbox: bb, grid, mask: Vec::new(), coverage: Vec::new() };
        region.rasterize();
        Ok(region)
    }

    pub fn h(&self) -> T {
        self.grid.h
    }

    /// Area of the polygons.
    pub fn area(&self) -> T {
        self.polygons.iter().map(|p| p.signed_area()).sum()
    }

    /// Closed membership test.
    pub fn contains(&self, p: Point2<T>) -> bool {
        let eps = self.bbox_scale() * T::of(1e-12);
        if self.polygons.iter().any(|poly| poly.on_boundary(p, eps)) {
            return true;
        }
        self.winding(p) != 0
    }

    fn winding(&self, p: Point2<T>) -> i32 {
        self.polygons.iter().map(|poly| poly.winding(p)).sum()
    }

    fn bbox_scale(&self) -> T {
        (self.bbox.1 - self.bbox.0).norm().max(T::one())
    }

    /// Pixels whose center lies in the closed region, in raster order.
    pub fn inside_cells(&self) -> Vec<usize> {
        (0..self.grid.len()).filter(|&i| self.mask[i]).collect()
    }

    /// Pixels with positive coverage, in raster order.
    pub fn support_cells(&self) -> Vec<usize> {
        (0..self.grid.len()).filter(|&i| self.coverage[i] > T::zero()).collect()
    }

    /// Pixel whose square meets the region boundary, i.e. coverage strictly
    /// between 0 and 1 or centre on the boundary.
    pub fn is_boundary_pixel(&self, idx: usize) -> bool {
        let c = self.coverage[idx];
        c > T::zero() && c < T::one()
    }

    /// Closest inside pixel to `p` by center distance.
    pub fn nearest_inside(&self, p: Point2<T>) -> Option<usize> {
        if let Some(i) = self.grid.locate(p) {
            if self.mask[i] {
                return Some(i);
            }
        }
        let mut best: Option<(T, usize)> = None;
        for i in 0..self.grid.len() {
            if self.mask[i] {
                let d = self.grid.center(i).dist(p);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, i));
                }
            }
        }
        best.map(|b| b.1)
    }

    fn rasterize(&mut self) {
        let g = self.grid;
        let n = g.len();
        let mut boundary = vec![false; n];
        let half = g.h * T::of(0.5);
        for poly in &self.polygons {
            for (a, b) in poly.edges() {
                let lo = Point2::new(a.x.min(b.x), a.y.min(b.y));
                let hi = Point2::new(a.x.max(b.x), a.y.max(b.y));
                let ix0 = ((lo.x / g.h).round().to_i64().unwrap() - 1 - g.i0).max(0) as usize;
                let iy0 = ((lo.y / g.h).round().to_i64().unwrap() - 1 - g.j0).max(0) as usize;
                let ix1 = ((hi.x / g.h).round().to_i64().unwrap() + 1 - g.i0).min(g.nx as i64 - 1) as usize;
                let iy1 = ((hi.y / g.h).round().to_i64().unwrap() + 1 - g.j0).min(g.ny as i64 - 1) as usize;
                for iy in iy0..=iy1 {
                    for ix in ix0..=ix1 {
                        let c = g.center_xy(ix, iy);
                        let r = Point2::new(half, half);
                        if segment_meets_rect(a, b, c - r, c + r) {
                            boundary[g.index(ix, iy)] = true;
                        }
                    }
                }
            }
        }
        let mut mask = vec![false; n];
        let mut coverage = vec![T::zero(); n];
        // Scanline winding at pixel centers: crossings of the row line y with
        // each edge, half-open in y, accumulated right to left.
        let mut crossings: Vec<(T, i32)> = Vec::new();
        for iy in 0..g.ny {
            let y = g.center_xy(0, iy).y;
            crossings.clear();
            for poly in &self.polygons {
                for (a, b) in poly.edges() {
                    let up = a.y <= y && b.y > y;
                    let down = b.y <= y && a.y > y;
                    if up || down {
                        let t = (y - a.y) / (b.y - a.y);
                        crossings.push((a.x + (b.x - a.x) * t, if up { 1 } else { -1 }));
                    }
                }
            }
            crossings.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
            let mut k = crossings.len();
            let mut w = 0i32;
            for ix in (0..g.nx).rev() {
                let x = g.center_xy(ix, iy).x;
                while k > 0 && crossings[k - 1].0 > x {
                    k -= 1;
                    w += crossings[k].1;
                }
                let idx = g.index(ix, iy);
                if boundary[idx] {
                    continue;
                }
                // A ray to the right crossing an upward edge leaves the point on its left.
                mask[idx] = w != 0;
                coverage[idx] = if w != 0 { T::one() } else { T::zero() };
            }
        }
        let pa = g.pixel_area();
        for idx in 0..n {
            if !boundary[idx] {
                continue;
            }
            let (lo, hi) = g.square(idx);
            let mut area = T::zero();
            for poly in &self.polygons {
                let (plo, phi) = poly.bbox();
                if phi.x < lo.x || plo.x > hi.x || phi.y < lo.y || plo.y > hi.y {
                    continue;
                }
                area = area + signed_area(&clip_rect(&poly.vertices, lo, hi));
            }
            coverage[idx] = (area / pa).max(T::zero()).min(T::one());
            mask[idx] = self.contains(g.center(idx));
        }
        self.mask = mask;
        self.coverage = coverage;
    }

    /// Parses a region description: a named preset (`square`,
    /// `square(x0,y0,x1,y1)`, `annulus(r_in,r_out[,cx,cy])`, `split_pair(gap)`,
    /// `L_shape`) or polygon literals `(x,y),(x,y),…` separated by `;`.
    pub fn parse(spec: &str, resolution: usize) -> Result<Self> {
        let s = spec.trim();
        let (name, args) = split_call(s)?;
        let t = |v: f64| T::of(v);
        match name {
            "square" => {
                let (x0, y0, x1, y1) = match args.as_slice() {
                    [] => (-1.0, -1.0, 1.0, 1.0),
                    [x0, y0, x1, y1] => (*x0, *y0, *x1, *y1),
                    _ => return Err(OtError::Invalid("square takes 0 or 4 arguments".into())),
                };
                if !(x1 > x0 && y1 > y0) {
                    return Err(OtError::Invalid("square needs x0 < x1 and y0 < y1".into()));
                }
                let lo = Point2::new(t(x0), t(y0));
                let hi = Point2::new(t(x1), t(y1));
                Region::from_polygons(vec![Polygon::rect(lo.x, lo.y, hi.x, hi.y)], Shape::Square { lo, hi }, resolution)
            }
            "annulus" => {
                let (r_in, r_out, cx, cy) = match args.as_slice() {
                    [a, b] => (*a, *b, 0.0, 0.0),
                    [a, b, c, d] => (*a, *b, *c, *d),
                    _ => return Err(OtError::Invalid("annulus takes 2 or 4 arguments".into())),
                };
                if !(r_in >= 0.0 && r_out > r_in) {
                    return Err(OtError::Invalid("annulus needs 0 ≤ r_in < r_out".into()));
                }
                let c = Point2::new(t(cx), t(cy));
                let mut polys = vec![Polygon::circle(c, t(r_out), CIRCLE_VERTICES)];
                if r_in > 0.0 {
                    polys.push(Polygon::circle(c, t(r_in), CIRCLE_VERTICES));
                }
                Region::from_polygons(polys, Shape::Annulus { center: c, r_in: t(r_in), r_out: t(r_out) }, resolution)
            }
            "split_pair" => {
                let gap = match args.as_slice() {
                    [g] if *g > 0.0 => *g,
                    _ => return Err(OtError::Invalid("split_pair takes one positive gap".into())),
                };
                let a = gap / 2.0;
                let polys = vec![
                    Polygon::rect(t(-a - 1.0), t(-0.5), t(-a), t(0.5)),
                    Polygon::rect(t(a), t(-0.5), t(a + 1.0), t(0.5)),
                ];
                Region::from_polygons(polys, Shape::SplitPair { gap: t(gap) }, resolution)
            }
            "L_shape" => {
                if !args.is_empty() {
                    return Err(OtError::Invalid("L_shape takes no arguments".into()));
                }
                let v = [(-1.0, -1.0), (1.0, -1.0), (1.0, 0.0), (0.0, 0.0), (0.0, 1.0), (-1.0, 1.0)];
                let poly = Polygon::new(v.iter().map(|&(x, y)| Point2::new(t(x), t(y))).collect());
                Region::from_polygons(vec![poly], Shape::LShape, resolution)
            }
            "" => {
                let polys = parse_polygon_literals(s)?;
                Region::from_polygons(polys, Shape::Polygons, resolution)
            }
            other => Err(OtError::Invalid(format!("unknown region preset `{other}`"))),
        }
    }
}

fn orient_by_depth<T: Real>(polygons: Vec<Polygon<T>>) -> Vec<Polygon<T>> {
    let n = polygons.len();
    let depth: Vec<usize> = (0..n)
        .map(|i| {
            let p = polygons[i].vertices[0];
            (0..n).filter(|&j| j != i && polygons[j].winding(p) != 0).count()
        })
        .collect();
    polygons
        .into_iter()
        .zip(depth)
        .map(|(p, d)| {
            let ccw = p.signed_area() > T::zero();
            if ccw == (d % 2 == 0) {
                p
            } else {
                p.reversed()
            }
        })
        .collect()
}

/// Splits `name(a,b,…)` into its name and numeric arguments. Inputs starting
/// with `(` are polygon literals and yield an empty name.
fn split_call(s: &str) -> Result<(&str, Vec<f64>)> {
    if s.starts_with('(') {
        return Ok(("", Vec::new()));
    }
    let Some(open) = s.find('(') else {
        return Ok((s, Vec::new()));
    };
    let name = s[..open].trim();
    let inner = s[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| OtError::Invalid(format!("unbalanced parentheses in `{s}`")))?;
    let args = inner
        .split(',')
        .map(|a| a.trim().parse::<f64>().map_err(|_| OtError::Invalid(format!("bad number `{}` in `{s}`", a.trim()))))
        .collect::<Result<Vec<_>>>()?;
    Ok((name, args))
}

fn parse_polygon_literals<T: Real>(s: &str) -> Result<Vec<Polygon<T>>> {
    let mut polys = Vec::new();
    for part in s.split(';') {
        let mut verts = Vec::new();
        let mut rest = part.trim();
        while !rest.is_empty() {
            let open = rest.find('(').ok_or_else(|| OtError::Invalid(format!("expected `(` in `{part}`")))?;
            let close = rest.find(')').ok_or_else(|| OtError::Invalid(format!("expected `)` in `{part}`")))?;
            let nums: Vec<&str> = rest[open + 1..close].split(',').collect();
            if nums.len() != 2 {
                return Err(OtError::Invalid(format!("vertex needs two coordinates in `{part}`")));
            }
            let x: f64 = nums[0].trim().parse().map_err(|_| OtError::Invalid(format!("bad number in `{part}`")))?;
            let y: f64 = nums[1].trim().parse().map_err(|_| OtError::Invalid(format!("bad number in `{part}`")))?;
            verts.push(Point2::new(T::of(x), T::of(y)));
            rest = rest[close + 1..].trim_start_matches([',', ' ']);
        }
        polys.push(Polygon::new(verts));
    }
    Ok(polys)
}

impl<T: Real> fmt::Display for Shape<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Square { lo, hi } => write!(f, "square({},{},{},{})", lo.x, lo.y, hi.x, hi.y),
            Shape::Annulus { center, r_in, r_out } => write!(f, "annulus({},{},{},{})", r_in, r_out, center.x, center.y),
            Shape::SplitPair { gap } => write!(f, "split_pair({gap})"),
            Shape::LShape => f.write_str("L_shape"),
            Shape::Polygons => f.write_str("polygons"),
        }
    }
}
