//! Laguerre cells on the raster with sub-pixel accuracy.
//!
//! Inside each pixel every support is replaced by its first-order model
//! `a_j(s) = v_j + g_j·s` around the pixel center (`v_j = -c(x_c, ȳ_j) + λ_j`,
//! `g_j = -Dc(x_c, ȳ_j)`), and the pixel square is cut by the half-planes
//! `a_j ≥ a_k`. For the quadratic cost the differences are exactly affine and
//! the cut is exact. The result is a partition of every pixel into convex
//! pieces, which makes the cell masses piecewise smooth in `λ` and yields the
//! mass Hessian from the shared edge lengths.

use rayon::prelude::*;

use crate::geometry::polygon::centroid;
use crate::geometry::Grid;
use crate::linalg::{CoVec2, Point2, SparseSym};
use crate::scalar::Real;
use crate::transport::density::{DiscreteTarget, SourceDensity};
use crate::transport::potential::DualPotential;

/// Side of the square tiles sharing one candidate list.
pub const TILE: usize = 16;
/// Marker for pixels outside the support.
pub const NO_CELL: u32 = u32::MAX;
const NO_TAG: u32 = u32::MAX;
/// Pieces smaller than this fraction of a pixel are dropped.
const MIN_FRACTION: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece<T> {
    pub cell: u32,
    /// Fraction of the pixel square covered by the piece.
    pub frac: T,
    pub centroid: Point2<T>,
}

/// The partition of one pixel, in physical coordinates.
#[derive(Clone, Debug)]
pub struct PixelCells<T> {
    pub pixel: usize,
    pub center: Point2<T>,
    /// Candidates `(j, v_j, g_j)` surviving the pixel-window test.
    pub candidates: Vec<(usize, T, CoVec2<T>)>,
    pub polygons: Vec<(usize, Vec<Point2<T>>)>,
    pub pieces: Vec<Piece<T>>,
    /// Shared edges `(j, k, length)` with `j < k`.
    pub edges: Vec<(usize, usize, T)>,
}

impl<T: Real> PixelCells<T> {
    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.pieces.iter().map(|p| p.cell as usize)
    }

    /// Largest spread of active co-vectors at a vertex of the partition:
    /// the diameter of `{g_j : a_j(v) = max_k a_k(v)}` maximized over piece
    /// vertices `v`.
    pub fn jump(&self) -> T {
        let mut best = T::zero();
        let scale = self.candidates.iter().fold(T::one(), |a, c| a.max(c.1.abs()));
        let tol = T::epsilon() * T::of(1e6) * scale;
        let mut tight: Vec<CoVec2<T>> = Vec::new();
        for (_, poly) in &self.polygons {
            for &v in poly {
                let s = v - self.center;
                let vals: Vec<T> = self.candidates.iter().map(|(_, vj, gj)| *vj + gj.dot(s)).collect();
                let m = vals.iter().copied().fold(T::neg_infinity(), T::max);
                tight.clear();
                for (c, &a) in self.candidates.iter().zip(&vals) {
                    if a >= m - tol {
                        tight.push(c.2);
                    }
                }
                for i in 0..tight.len() {
                    for k in (i + 1)..tight.len() {
                        best = best.max(tight[i].dist(tight[k]));
                    }
                }
            }
        }
        best
    }
}

#[derive(Clone, Debug)]
pub struct LaguerreTessellation<T> {
    pub grid: Grid<T>,
    /// Maximizing index at each pixel center, [`NO_CELL`] off the support.
    pub assignment: Vec<u32>,
    pub masses: Vec<T>,
    /// Pixels split between at least two cells, raster order.
    pub boundary_pixels: Vec<usize>,
    /// Pieces of pixel `p` are `pieces[piece_start[p]..piece_start[p + 1]]`.
    pub piece_start: Vec<usize>,
    pub pieces: Vec<Piece<T>>,
}

impl<T: Real> LaguerreTessellation<T> {
    pub fn pixel_pieces(&self, p: usize) -> &[Piece<T>] {
        &self.pieces[self.piece_start[p]..self.piece_start[p + 1]]
    }
}

/// Masses, optional Hessian triplets and optional tessellation.
pub(crate) struct Assembly<T> {
    pub masses: Vec<T>,
    pub hessian: Option<SparseSym<T>>,
    pub tessellation: Option<LaguerreTessellation<T>>,
}

/// Per-pixel partition, masses and boundary flags of the Laguerre cells.
pub fn laguerre_assign<T: Real>(phi: &DualPotential<T>, mu: &SourceDensity<T>) -> LaguerreTessellation<T> {
    assemble(phi, mu, true, false).tessellation.expect("requested")
}

/// `max_j |mass_j - ν_j|`.
pub fn pushforward_check<T: Real>(tess: &LaguerreTessellation<T>, nu: &DiscreteTarget<T>) -> T {
    tess.masses.iter().zip(&nu.weights).fold(T::zero(), |a, (m, w)| a.max((*m - *w).abs()))
}

/// Candidates that can be maximal somewhere in the disk of radius `rho`
/// around `xt`. Second-order terms are bounded by the Hessians at `xt`
/// with a safety factor of 2; for the quadratic cost they cancel exactly.
pub fn tile_candidates<T: Real>(phi: &DualPotential<T>, xt: Point2<T>, rho: T, out: &mut Vec<usize>) {
    out.clear();
    let n = phi.len();
    let cost = phi.cost;
    let mut vals = Vec::with_capacity(n);
    let mut best = (T::neg_infinity(), 0usize);
    for j in 0..n {
        let v = phi.support(j, xt);
        if v > best.0 {
            best = (v, j);
        }
        vals.push(v);
    }
    let gs = phi.covector(best.1, xt);
    let curv = |j: usize| -> T {
        if matches!(cost, crate::costs::CostFunction::Quadratic) {
            T::zero()
        } else {
            cost.hessian_xx(xt, phi.target.points[j]).frobenius()
        }
    };
    let hs = curv(best.1);
    for j in 0..n {
        let slack = rho * (phi.covector(j, xt) - gs).norm() + T::of(2.0) * rho * rho * (curv(j) + hs);
        if vals[j] + slack >= best.0 {
            out.push(j);
        }
    }
}

/// Candidates valid on the square of one pixel.
pub fn pixel_candidates<T: Real>(phi: &DualPotential<T>, grid: &Grid<T>, pixel: usize, out: &mut Vec<usize>) {
    tile_candidates(phi, grid.center(pixel), grid.h * T::of(0.75), out);
}

/// Partition of pixel `pixel` given candidates valid on it.
pub fn pixel_cells<T: Real>(phi: &DualPotential<T>, grid: &Grid<T>, pixel: usize, candidates: &[usize]) -> PixelCells<T> {
    square_cells(phi, grid.center(pixel), grid.h * T::of(0.5), pixel, candidates)
}

/// Partition of the square of half-width `half` centered at `xc`; `pixel` is
/// only recorded. Candidates must include every cell meeting the square.
pub fn square_cells<T: Real>(phi: &DualPotential<T>, xc: Point2<T>, half: T, pixel: usize, candidates: &[usize]) -> PixelCells<T> {
    let mut all: Vec<(usize, T, CoVec2<T>)> =
        candidates.iter().map(|&j| (j, phi.support(j, xc), phi.covector(j, xc))).collect();
    let (m, vm, gm) = all
        .iter()
        .copied()
        .fold((usize::MAX, T::neg_infinity(), CoVec2::zero()), |b, c| if c.1 > b.1 { c } else { b });
    all.retain(|(j, v, g)| *j == m || *v - vm + (*g - gm).l1() * half >= T::zero());
    let mut out = PixelCells {
        pixel,
        center: xc,
        candidates: all,
        polygons: Vec::new(),
        pieces: Vec::new(),
        edges: Vec::new(),
    };
    if out.candidates.len() == 1 {
        let sq = square(half);
        out.polygons.push((m, sq.iter().map(|(s, _)| xc + *s).collect()));
        out.pieces.push(Piece { cell: m as u32, frac: T::one(), centroid: xc });
        return out;
    }
    let area = half * half * T::of(4.0);
    let mut buf_a: Vec<(CoVec2<T>, u32)> = Vec::with_capacity(16);
    let mut buf_b: Vec<(CoVec2<T>, u32)> = Vec::with_capacity(16);
    let mut total = T::zero();
    let scale = out.candidates.iter().fold(T::one(), |a, c| a.max(c.1.abs()).max(c.2.l1() * half));
    let tie = T::epsilon() * T::of(1e3) * scale;
    let mut border: Vec<(usize, usize, T)> = Vec::new();
    for (ij, &(j, vj, gj)) in out.candidates.iter().enumerate() {
        buf_a.clear();
        buf_a.extend(square(half));
        for (ik, &(k, vk, gk)) in out.candidates.iter().enumerate() {
            if ik == ij {
                continue;
            }
            clip_tagged(&buf_a, vj - vk, gj - gk, k as u32, &mut buf_b);
            std::mem::swap(&mut buf_a, &mut buf_b);
            if buf_a.len() < 3 {
                break;
            }
        }
        if buf_a.len() < 3 {
            continue;
        }
        let pts: Vec<Point2<T>> = buf_a.iter().map(|(s, _)| *s).collect();
        let Some((a, c)) = centroid(&pts) else { continue };
        let frac = a / area;
        if frac <= T::of(MIN_FRACTION) {
            continue;
        }
        let n = buf_a.len();
        for i in 0..n {
            let tag = buf_a[i].1;
            if tag != NO_TAG && (tag as usize) > j {
                let len = buf_a[i].0.dist(buf_a[(i + 1) % n].0);
                if len > T::zero() {
                    out.edges.push((j, tag as usize, len));
                }
            } else if tag == NO_TAG {
                // A cell boundary running exactly along the pixel border is
                // shared with the neighbouring pixel: each side takes half.
                let (a, b) = (buf_a[i].0, buf_a[(i + 1) % n].0);
                for &(k, vk, gk) in &out.candidates {
                    let (fa, fb) = (vj - vk + (gj - gk).dot(a), vj - vk + (gj - gk).dot(b));
                    if k != j && fa.abs() <= tie && fb.abs() <= tie {
                        border.push((j, k, a.dist(b) * T::of(0.5)));
                    }
                }
            }
        }
        total = total + frac;
        out.polygons.push((j, pts.iter().map(|s| xc + *s).collect()));
        out.pieces.push(Piece { cell: j as u32, frac, centroid: xc + c });
    }
    // Only when the other cell has no piece here does the border edge belong
    // to a boundary that this pixel does not already see.
    for (j, k, len) in border {
        if !out.pieces.iter().any(|q| q.cell as usize == k) {
            out.edges.push((j.min(k), j.max(k), len));
        }
    }
    // Remove roundoff so that every pixel distributes exactly its mass.
    if total > T::zero() {
        for p in out.pieces.iter_mut() {
            p.frac = p.frac / total;
        }
    }
    out
}

fn square<T: Real>(half: T) -> [(CoVec2<T>, u32); 4] {
    [
        (CoVec2::new(-half, -half), NO_TAG),
        (CoVec2::new(half, -half), NO_TAG),
        (CoVec2::new(half, half), NO_TAG),
        (CoVec2::new(-half, half), NO_TAG),
    ]
}

/// Sutherland–Hodgman step keeping `dv + dg·s ≥ 0`. Each vertex carries the
/// tag of its outgoing edge; edges created along the cut get `tag`.
fn clip_tagged<T: Real>(poly: &[(CoVec2<T>, u32)], dv: T, dg: CoVec2<T>, tag: u32, out: &mut Vec<(CoVec2<T>, u32)>) {
    out.clear();
    let n = poly.len();
    if n == 0 {
        return;
    }
    let f = |s: CoVec2<T>| dv + dg.dot(s);
    let (mut prev, mut prev_tag) = poly[n - 1];
    let mut fp = f(prev);
    for &(cur, cur_tag) in poly {
        let fc = f(cur);
        if fc >= T::zero() {
            if fp < T::zero() {
                out.push((prev.lerp(cur, fp / (fp - fc)), prev_tag));
            }
            out.push((cur, cur_tag));
        } else if fp >= T::zero() {
            out.push((prev.lerp(cur, fp / (fp - fc)), tag));
        }
        prev = cur;
        prev_tag = cur_tag;
        fp = fc;
    }
    // An exit exactly at a vertex leaves a duplicate; drop it.
    out.dedup_by(|a, b| {
        let dup = a.0 == b.0;
        if dup {
            b.1 = a.1;
        }
        dup
    });
}

struct Band<T> {
    masses: Vec<T>,
    triplets: Vec<(u32, u32, T)>,
    pieces: Vec<(usize, Piece<T>)>,
    assignment: Vec<(usize, u32)>,
}

/// Calls `f(candidates, pixel)` on every support pixel, tile-parallel, and
/// returns the `Some` results in raster order.
pub fn scan_pixels<T, R, F>(phi: &DualPotential<T>, mu: &SourceDensity<T>, f: F) -> Vec<(usize, R)>
where
    T: Real,
    R: Send,
    F: Fn(&[usize], usize) -> Option<R> + Sync,
{
    let g = mu.region.grid;
    let rho = g.h * T::of(TILE as f64) * T::of(std::f64::consts::FRAC_1_SQRT_2);
    let mut out: Vec<(usize, R)> = (0..g.ny.div_ceil(TILE))
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut res = Vec::new();
            let mut cands = Vec::new();
            let y0 = b * TILE;
            let y1 = (y0 + TILE).min(g.ny);
            for tx in 0..g.nx.div_ceil(TILE) {
                let x0 = tx * TILE;
                let x1 = (x0 + TILE).min(g.nx);
                if !(y0..y1).any(|iy| (x0..x1).any(|ix| mu.mass[g.index(ix, iy)] > T::zero())) {
                    continue;
                }
                let c0 = g.center_xy(x0, y0);
                let xt = c0 + Point2::new(T::of_usize(x1 - x0 - 1), T::of_usize(y1 - y0 - 1)) * (g.h * T::of(0.5));
                tile_candidates(phi, xt, rho, &mut cands);
                for iy in y0..y1 {
                    for ix in x0..x1 {
                        let p = g.index(ix, iy);
                        if mu.mass[p] > T::zero() {
                            if let Some(r) = f(&cands, p) {
                                res.push((p, r));
                            }
                        }
                    }
                }
            }
            res.sort_by_key(|(p, _)| *p);
            res
        })
        .collect();
    out.sort_by_key(|(p, _)| *p);
    out
}

pub(crate) fn assemble<T: Real>(phi: &DualPotential<T>, mu: &SourceDensity<T>, want_pieces: bool, want_hessian: bool) -> Assembly<T> {
    let g = mu.region.grid;
    let n = phi.len();
    let bands = g.ny.div_ceil(TILE);
    let rho = g.h * T::of(TILE as f64) * T::of(std::f64::consts::FRAC_1_SQRT_2);
    let inv_area = T::one() / (g.h * g.h);
    let results: Vec<Band<T>> = (0..bands)
        .into_par_iter()
        .map(|b| {
            let mut band = Band { masses: vec![T::zero(); n], triplets: Vec::new(), pieces: Vec::new(), assignment: Vec::new() };
            let mut cands = Vec::new();
            let y0 = b * TILE;
            let y1 = (y0 + TILE).min(g.ny);
            for tx in 0..g.nx.div_ceil(TILE) {
                let x0 = tx * TILE;
                let x1 = (x0 + TILE).min(g.nx);
                if !(y0..y1).any(|iy| (x0..x1).any(|ix| mu.mass[g.index(ix, iy)] > T::zero())) {
                    continue;
                }
                // Tile center in continuous pixel coordinates.
                let c0 = g.center_xy(x0, y0);
                let xt = c0 + Point2::new(T::of_usize(x1 - x0 - 1), T::of_usize(y1 - y0 - 1)) * (g.h * T::of(0.5));
                tile_candidates(phi, xt, rho, &mut cands);
                for iy in y0..y1 {
                    for ix in x0..x1 {
                        let p = g.index(ix, iy);
                        let mp = mu.mass[p];
                        if mp <= T::zero() {
                            continue;
                        }
                        let pc = pixel_cells(phi, &g, p, &cands);
                        let xc = pc.center;
                        let best = cands
                            .iter()
                            .map(|&j| (j, phi.support(j, xc)))
                            .fold((0usize, T::neg_infinity()), |a, c| if c.1 > a.1 { c } else { a });
                        band.assignment.push((p, best.0 as u32));
                        for piece in &pc.pieces {
                            let j = piece.cell as usize;
                            band.masses[j] = band.masses[j] + mp * piece.frac;
                        }
                        if want_hessian {
                            let dens = mp * inv_area;
                            for &(j, k, len) in &pc.edges {
                                let gj = phi.covector(j, xc);
                                let gk = phi.covector(k, xc);
                                let w = dens * len / (gj - gk).norm();
                                band.triplets.push((j as u32, k as u32, w));
                            }
                        }
                        if want_pieces {
                            band.pieces.extend(pc.pieces.iter().map(|q| (p, *q)));
                        }
                    }
                }
            }
            band.pieces.sort_by_key(|(p, _)| *p);
            band
        })
        .collect();

    let mut masses = vec![T::zero(); n];
    for band in &results {
        for j in 0..n {
            masses[j] = masses[j] + band.masses[j];
        }
    }
    let hessian = want_hessian.then(|| {
        let mut trip: Vec<(u32, u32, T)> = results.iter().flat_map(|b| b.triplets.iter().copied()).collect();
        trip.sort_by_key(|t| (t.0, t.1));
        let mut a = SparseSym::new(n);
        let mut i = 0;
        while i < trip.len() {
            let (j, k) = (trip[i].0, trip[i].1);
            let mut w = T::zero();
            while i < trip.len() && trip[i].0 == j && trip[i].1 == k {
                w = w + trip[i].2;
                i += 1;
            }
            let (j, k) = (j as usize, k as usize);
            a.rows[j].push((k, -w));
            a.rows[k].push((j, -w));
            a.diag[j] = a.diag[j] + w;
            a.diag[k] = a.diag[k] + w;
        }
        a.compress();
        a
    });
    let tessellation = want_pieces.then(|| {
        let mut assignment = vec![NO_CELL; g.len()];
        let mut counts = vec![0usize; g.len() + 1];
        let mut pieces = Vec::new();
        for band in &results {
            for &(p, j) in &band.assignment {
                assignment[p] = j;
            }
            for &(p, piece) in &band.pieces {
                counts[p + 1] += 1;
                pieces.push(piece);
            }
        }
        for p in 0..g.len() {
            counts[p + 1] += counts[p];
        }
        let boundary_pixels = (0..g.len()).filter(|&p| counts[p + 1] - counts[p] >= 2).collect();
        LaguerreTessellation { grid: g, assignment, masses: masses.clone(), boundary_pixels, piece_start: counts, pieces }
    });
    Assembly { masses, hessian, tessellation }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::CostFunction;
    use crate::geometry::Region;
    use crate::transport::density::TargetSampling;

    fn setup(points: Vec<(f64, f64, f64)>, cost: CostFunction, res: usize) -> (DualPotential<f64>, SourceDensity<f64>) {
        let r = Region::<f64>::parse("square", res).unwrap();
        let mu = SourceDensity::uniform(r.clone()).unwrap();
        let t = DiscreteTarget::sample(r, &TargetSampling::Explicit(points)).unwrap();
        (DualPotential::zero(cost, t), mu)
    }

    #[test]
    fn single_point_gets_all_mass() {
        let (phi, mu) = setup(vec![(0.3, 0.1, 1.0)], CostFunction::Quadratic, 32);
        let t = laguerre_assign(&phi, &mu);
        assert!((t.masses[0] - 1.0).abs() < 1e-12);
        assert!(t.boundary_pixels.is_empty());
    }

    #[test]
    fn two_point_masses_are_halves() {
        let (phi, mu) = setup(vec![(-1.0, 0.0, 1.0), (1.0, 0.0, 1.0)], CostFunction::Quadratic, 64);
        let t = laguerre_assign(&phi, &mu);
        assert!((t.masses[0] - 0.5).abs() < 1e-12 && (t.masses[1] - 0.5).abs() < 1e-12);
        // The bisector runs through the column of pixel centers at x = 0.
        for &p in &t.boundary_pixels {
            assert!(t.grid.center(p).x.abs() < 1e-12);
        }
        assert!(!t.boundary_pixels.is_empty());
    }

    #[test]
    fn asymmetric_weights_at_zero_potential() {
        let (phi, mu) = setup(vec![(-1.0, 0.0, 9.0), (1.0, 0.0, 1.0)], CostFunction::Quadratic, 64);
        let t = laguerre_assign(&phi, &mu);
        assert!((pushforward_check(&t, &phi.target) - 0.4).abs() < 1e-12);
    }

    /// Masses are exact for affine boundaries: a tilted bisector cuts the
    /// square into two pieces whose areas are known in closed form.
    #[test]
    fn tilted_boundary_mass_is_exact() {
        let (mut phi, mu) = setup(vec![(-0.5, -0.25, 1.0), (0.5, 0.25, 1.0)], CostFunction::Quadratic, 50);
        phi.lambda = vec![0.0, 0.1];
        // Boundary: (ȳ₂-ȳ₁)·x = |ȳ₂|²/2 - |ȳ₁|²/2 - (λ₂-λ₁) = -0.1, i.e. x + y/2 = -0.1.
        let t = laguerre_assign(&phi, &mu);
        // Area of {x + y/2 < -0.1} in [-1,1]²: ∫ (1 + (-0.1 - y/2)) dy over y ∈ [-1,1] = 1.8.
        assert!((t.masses[0] - 1.8 / 4.0).abs() < 1e-12, "{}", t.masses[0]);
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let pts = vec![(-0.5, -0.3, 1.0), (0.4, -0.2, 1.0), (0.1, 0.6, 1.0), (-0.3, 0.4, 2.0)];
        for cost in [CostFunction::Quadratic, CostFunction::SqrtPlus] {
            let (mut phi, mu) = setup(pts.clone(), cost, 64);
            phi.lambda = vec![0.0, 0.05, -0.02, 0.03];
            let a = assemble(&phi, &mu, false, true);
            let h = a.hessian.unwrap();
            let eps = 1e-6;
            for k in 0..4 {
                let mut p = phi.clone();
                p.lambda[k] += eps;
                let mp = assemble(&p, &mu, false, false).masses;
                p.lambda[k] -= 2.0 * eps;
                let mm = assemble(&p, &mu, false, false).masses;
                let mut e = vec![0.0; 4];
                e[k] = 1.0;
                let mut col = vec![0.0; 4];
                h.mul(&e, &mut col);
                for j in 0..4 {
                    let fd = (mp[j] - mm[j]) / (2.0 * eps);
                    assert!((fd - col[j]).abs() < 1e-4 * (1.0 + col[j].abs()), "{cost} ({j},{k}): fd {fd} vs {}", col[j]);
                }
            }
        }
    }

    #[test]
    fn masses_sum_to_one() {
        let pts: Vec<_> = (0..30).map(|k| {
            let a = k as f64 * 0.7;
            (0.8 * a.cos() * (k as f64 / 30.0), 0.8 * a.sin() * (k as f64 / 30.0) + 0.01, 1.0)
        }).collect();
        let (phi, mu) = setup(pts, CostFunction::Quadratic, 96);
        let t = laguerre_assign(&phi, &mu);
        let s: f64 = t.masses.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
