//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type V = (f64, f64);

/// Piecewise-constant source on axis-aligned rectangles `(x0, x1, y0, y1, density)`.
pub struct RectSource {
    pub rects: Vec<(f64, f64, f64, f64, f64)>,
}

impl RectSource {
    /// The rasterized measure of `[-1,1]²` at `res` pixels per side: pixels
    /// centered on `hℤ²` carry density `f(center)·coverage` spread over their
    /// square, where `f` is `1` or a 4×4 checkerboard with values `1` and
    /// `contrast` (even board parity gets `1`).
    pub fn raster_square(res: usize, contrast: Option<f64>) -> Self {
        let h = 2.0 / res as f64;
        let half = h / 2.0;
        let mut xs = vec![-1.0 - half, -1.0 + half];
        if contrast.is_some() {
            xs.extend([-0.5 - half, -half, 0.5 - half]);
        }
        xs.extend([1.0 - half, 1.0 + half]);
        let board = |c: f64| (((c + 1.0) / 2.0 * 4.0).floor()).clamp(0.0, 3.0) as i64;
        let snap = |v: f64| (v / h).round() * h;
        let cover = |c: f64| if (c.abs() - 1.0).abs() < 1e-12 { 0.5 } else { 1.0 };
        let mut rects = Vec::new();
        for i in 0..xs.len() - 1 {
            for j in 0..xs.len() - 1 {
                let cx = snap((xs[i] + xs[i + 1]) / 2.0);
                let cy = snap((xs[j] + xs[j + 1]) / 2.0);
                let f = match contrast {
                    Some(c) if (board(cx) + board(cy)) % 2 == 1 => c,
                    _ => 1.0,
                };
                rects.push((xs[i], xs[i + 1], xs[j], xs[j + 1], f * cover(cx) * cover(cy)));
            }
        }
        let total: f64 = rects.iter().map(|r| (r.1 - r.0) * (r.3 - r.2) * r.4).sum();
        for r in rects.iter_mut() {
            r.4 /= total;
        }
        Self { rects }
    }

    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        self.rects.iter().fold((f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY), |b, r| {
            (b.0.min(r.0), b.1.max(r.1), b.2.min(r.2), b.3.max(r.3))
        })
    }
}

pub fn clip(poly: &[V], a: V, b: f64) -> Vec<V> {
    // keeps a·x ≤ b
    let f = |p: V| a.0 * p.0 + a.1 * p.1 - b;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let (fp, fq) = (f(p), f(q));
        if fp <= 0.0 {
            out.push(p);
        }
        if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
            let t = fp / (fp - fq);
            out.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
        }
    }
    out
}

pub fn area(poly: &[V]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| poly[i].0 * poly[(i + 1) % n].1 - poly[(i + 1) % n].0 * poly[i].1).sum::<f64>() / 2.0
}

/// Semi-discrete quadratic transport by over-relaxed coordinate ascent on
/// the dual weights, with exact power cells.
pub struct PowerOracle<'a> {
    pub source: &'a RectSource,
    pub points: Vec<V>,
    pub nu: Vec<f64>,
}

impl PowerOracle<'_> {
    /// Power cell of `j` for `c = |x-y|²/2`: `⟨x, y_k - y_j⟩ ≤ (|y_k|² - |y_j|²)/2 + λ_j - λ_k`.
    pub fn cell(&self, j: usize, lambda: &[f64]) -> Vec<V> {
        let (x0, x1, y0, y1) = self.source.bbox();
        let mut poly = vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)];
        let yj = self.points[j];
        let nj = yj.0 * yj.0 + yj.1 * yj.1;
        for (k, &yk) in self.points.iter().enumerate() {
            if k == j || poly.is_empty() {
                continue;
            }
            let nk = yk.0 * yk.0 + yk.1 * yk.1;
            poly = clip(&poly, (yk.0 - yj.0, yk.1 - yj.1), (nk - nj) / 2.0 + lambda[j] - lambda[k]);
        }
        poly
    }

    pub fn mass(&self, j: usize, lambda: &[f64]) -> f64 {
        let cell = self.cell(j, lambda);
        if cell.len() < 3 {
            return 0.0;
        }
        self.source
            .rects
            .iter()
            .map(|r| {
                let mut p = clip(&cell, (1.0, 0.0), r.1);
                p = clip(&p, (-1.0, 0.0), -r.0);
                p = clip(&p, (0.0, 1.0), r.3);
                p = clip(&p, (0.0, -1.0), -r.2);
                if p.len() < 3 {
                    0.0
                } else {
                    area(&p) * r.4
                }
            })
            .sum()
    }

    /// `λ_j` with `mass_j = ν_j`, the others fixed (mass is nondecreasing in `λ_j`).
    fn coordinate(&self, j: usize, lambda: &mut [f64]) {
        let target = self.nu[j];
        let l0 = lambda[j];
        let eval = |l: f64, lambda: &mut [f64]| {
            lambda[j] = l;
            self.mass(j, lambda) - target
        };
        let (mut lo, mut hi) = (l0, l0);
        let mut step = 1e-3;
        let mut flo = eval(lo, lambda);
        let mut fhi = flo;
        while flo > 0.0 {
            lo -= step;
            step *= 2.0;
            flo = eval(lo, lambda);
        }
        step = 1e-3;
        while fhi < 0.0 {
            hi += step;
            step *= 2.0;
            fhi = eval(hi, lambda);
        }
        // Illinois regula falsi
        let mut side = 0;
        for _ in 0..200 {
            if hi - lo <= 1e-15 * (1.0 + hi.abs()) {
                break;
            }
            let mut m = if fhi - flo > 0.0 { lo - flo * (hi - lo) / (fhi - flo) } else { 0.5 * (lo + hi) };
            if !(m > lo && m < hi) {
                m = 0.5 * (lo + hi);
            }
            let fm = eval(m, lambda);
            if fm == 0.0 {
                lo = m;
                hi = m;
                break;
            }
            if fm < 0.0 {
                lo = m;
                flo = fm;
                if side == -1 {
                    fhi /= 2.0;
                }
                side = -1;
            } else {
                hi = m;
                fhi = fm;
                if side == 1 {
                    flo /= 2.0;
                }
                side = 1;
            }
        }
        lambda[j] = 0.5 * (lo + hi);
    }

    fn error(&self, lambda: &[f64]) -> f64 {
        (0..lambda.len()).map(|j| (self.mass(j, lambda) - self.nu[j]).abs()).fold(0.0, f64::max)
    }

    /// One Gauss–Seidel sweep, gauge-fixed to `λ₀ = 0`.
    fn sweep(&self, lambda: &[f64]) -> Vec<f64> {
        let mut l = lambda.to_vec();
        for j in 0..l.len() {
            self.coordinate(j, &mut l);
        }
        let l0 = l[0];
        l.iter().map(|v| v - l0).collect()
    }

    /// Gauss–Seidel sweeps with safeguarded Anderson mixing over the last
    /// `depth` sweeps: a mixed iterate is kept only if it lowers the mass
    /// error below the plain sweep's. Returns `(λ, error, sweeps)` with `λ₀ = 0`.
    pub fn solve(&self, tol: f64, max_sweeps: usize, depth: usize) -> (Vec<f64>, f64, usize) {
        let n = self.points.len();
        let mut x = vec![0.0; n];
        let mut hist: Vec<(Vec<f64>, Vec<f64>)> = Vec::new(); // (x, G(x) - x)
        let mut err = f64::INFINITY;
        let mut sweeps = 0;
        while sweeps < max_sweeps && err > tol {
            sweeps += 1;
            let g = self.sweep(&x);
            let f: Vec<f64> = g.iter().zip(&x).map(|(a, b)| a - b).collect();
            hist.push((x.clone(), f));
            if hist.len() > depth + 1 {
                hist.remove(0);
            }
            let plain_err = self.error(&g);
            let mut next = g;
            err = plain_err;
            if let Some(mixed) = anderson(&hist) {
                let e = self.error(&mixed);
                if e < plain_err {
                    next = mixed;
                    err = e;
                }
            }
            if std::env::var_os("ORACLE_TRACE").is_some() {
                eprintln!("sweep {sweeps} err {err:e} plain {plain_err:e}");
            }
            x = next;
        }
        (x, err, sweeps)
    }
}

/// Type-II Anderson step from `(x_i, f_i)` history: minimizes `|Σ α_i f_i|`
/// with `Σ α_i = 1` and returns `Σ α_i (x_i + f_i)`.
fn anderson(hist: &[(Vec<f64>, Vec<f64>)]) -> Option<Vec<f64>> {
    let m = hist.len();
    if m < 2 {
        return None;
    }
    let last = &hist[m - 1];
    let d: Vec<Vec<f64>> = hist[..m - 1].iter().map(|(_, f)| f.iter().zip(&last.1).map(|(a, b)| a - b).collect()).collect();
    let k = d.len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = d[i].iter().zip(&d[j]).map(|(p, q)| p * q).sum();
        }
        a[i][i] *= 1.0 + 1e-10;
        a[i][k] = -d[i].iter().zip(&last.1).map(|(p, q)| p * q).sum::<f64>();
    }
    let gamma = gauss(a)?;
    let n = last.0.len();
    let mut out: Vec<f64> = (0..n).map(|t| last.0[t] + last.1[t]).collect();
    for (i, g) in gamma.iter().enumerate() {
        let (x, f) = &hist[i];
        for t in 0..n {
            out[t] += g * ((x[t] + f[t]) - (last.0[t] + last.1[t]));
        }
    }
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Solves an augmented `k × (k+1)` system by partial pivoting.
fn gauss(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let k = a.len();
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        for r in c + 1..k {
            let f = a[r][c] / a[c][c];
            for t in c..=k {
                a[r][t] -= f * a[c][t];
            }
        }
    }
    let mut x = vec![0.0; k];
    for c in (0..k).rev() {
        x[c] = (a[c][k] - (c + 1..k).map(|t| a[c][t] * x[t]).sum::<f64>()) / a[c][c];
    }
    Some(x)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random quadratic instance: `count` points with weights in `[0.5, 1.5]`
/// inside a random box of `[-1.2, 1.2]²`.
pub fn random_instance(seed: u64) -> (Vec<(f64, f64, f64)>, Option<f64>) {
    let mut r = rng(seed);
    let count = r.gen_range(10..=200);
    let (ax, bx) = (r.gen_range(-1.2..0.0), r.gen_range(0.2..1.2));
    let (ay, by) = (r.gen_range(-1.2..0.0), r.gen_range(0.2..1.2));
    let pts = (0..count).map(|_| (r.gen_range(ax..bx), r.gen_range(ay..by), r.gen_range(0.5..1.5))).collect();
    let contrast = if seed % 2 == 1 { Some(r.gen_range(1.0..4.0)) } else { None };
    (pts, contrast)
}
