//! Cost functions with analytic derivatives up to second order, the two
//! c-exponential maps, the MTW tensor and a sampled structural verifier.
//!
//! Built-in costs are all functions of `d = x - x̄` except the bilinear one:
//!
//! | id          | c(x, x̄)               | chart                 |
//! |-------------|-----------------------|-----------------------|
//! | `quadratic` | `½|x - x̄|²`           | whole plane           |
//! | `bilinear`  | `-⟨x, x̄⟩`             | whole plane           |
//! | `log`       | `-log|x - x̄|`         | `|x - x̄| ≥ 1e-3`      |
//! | `sqrt_plus` | `√(1 + |x - x̄|²)`     | co-vectors `|p| < 1`  |
//!
//! Third and fourth derivatives are never coded by hand: the MTW tensor is
//! obtained by Richardson-extrapolated central differences of the analytic
//! Hessian along the c-exponential.

use std::fmt;
use std::str::FromStr;

use crate::error::{OtError, Result};
use crate::geometry::Region;
use crate::linalg::{CoVec2, Mat2, Point2, Vec2};
use crate::scalar::Real;

/// Newton tolerance for the c-exponential maps.
pub const NEWTON_TOL: f64 = 1e-10;
/// Slack allowed on the sign of the MTW tensor.
pub const MTW_SIGN_SLACK: f64 = 1e-8;
/// Two co-vectors closer than this count as a twist collision.
pub const TWIST_COLLISION_RADIUS: f64 = 1e-9;
/// Minimal separation of a valid pair for the log cost.
pub const LOG_MIN_SEPARATION: f64 = 1e-3;

const NEWTON_MAX_ITER: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CostFunction {
    Quadratic,
    Bilinear,
    Log,
    SqrtPlus,
}

impl CostFunction {
    pub const ALL: [CostFunction; 4] =
        [CostFunction::Quadratic, CostFunction::Bilinear, CostFunction::Log, CostFunction::SqrtPlus];

    pub fn id(self) -> &'static str {
        match self {
            CostFunction::Quadratic => "quadratic",
            CostFunction::Bilinear => "bilinear",
            CostFunction::Log => "log",
            CostFunction::SqrtPlus => "sqrt_plus",
        }
    }

    /// Source and target region specs on which the cost is sampled by
    /// default. `log` needs disjoint domains.
    pub fn preset_domains(self) -> (&'static str, &'static str) {
        match self {
            CostFunction::Log => ("square(0,0,1,1)", "square(2,2,3,3)"),
            _ => ("square(0,0,1,1)", "square(0,0,1,1)"),
        }
    }

    /// `c(x, x̄)`
    pub fn eval<T: Real>(self, x: Point2<T>, xb: Point2<T>) -> T {
        match self {
            CostFunction::Quadratic => (x - xb).norm2() * T::of(0.5),
            CostFunction::Bilinear => -x.dot(xb),
            CostFunction::Log => -(x - xb).norm().ln(),
            CostFunction::SqrtPlus => (T::one() + (x - xb).norm2()).sqrt(),
        }
    }

    /// `Dc(x, x̄)`, the differential in the source variable.
    pub fn grad_x<T: Real>(self, x: Point2<T>, xb: Point2<T>) -> CoVec2<T> {
        let d = x - xb;
        match self {
            CostFunction::Quadratic => d,
            CostFunction::Bilinear => -xb,
            CostFunction::Log => -d / d.norm2(),
            CostFunction::SqrtPlus => d / (T::one() + d.norm2()).sqrt(),
        }
    }

    /// `D̄c(x, x̄)`, the differential in the target variable.
    pub fn grad_xbar<T: Real>(self, x: Point2<T>, xb: Point2<T>) -> CoVec2<T> {
        match self {
            CostFunction::Bilinear => -x,
            _ => -self.grad_x(x, xb),
        }
    }

    /// `D²ₓₓ c(x, x̄)`.
    pub fn hessian_xx<T: Real>(self, x: Point2<T>, xb: Point2<T>) -> Mat2<T> {
        let d = x - xb;
        match self {
            CostFunction::Quadratic => Mat2::identity(),
            CostFunction::Bilinear => Mat2::scaled(T::zero()),
            CostFunction::Log => {
                let r2 = d.norm2();
                (Mat2::outer(d, d).scale(T::of(2.0)) - Mat2::scaled(r2)).scale(T::one() / (r2 * r2))
            }
            CostFunction::SqrtPlus => {
                let s2 = T::one() + d.norm2();
                let s = s2.sqrt();
                Mat2::scaled(T::one() / s) - Mat2::outer(d, d).scale(T::one() / (s2 * s))
            }
        }
    }

    /// `-D̄Dc(x, x̄)`: entry `(i, j)` is `-∂²c/∂xᵢ∂x̄ⱼ`. This is the Jacobian of
    /// `x̄ ↦ -Dc(x, x̄)`; its transpose is the Jacobian of `x ↦ -D̄c(x, x̄)`.
    pub fn cross_hessian<T: Real>(self, x: Point2<T>, xb: Point2<T>) -> Mat2<T> {
        match self {
            CostFunction::Bilinear => Mat2::identity(),
            // For costs of x - x̄ the mixed derivative is minus the pure one.
            _ => self.hessian_xx(x, xb),
        }
    }

    pub fn valid_pair<T: Real>(self, x: Point2<T>, xb: Point2<T>) -> bool {
        if !x.is_finite() || !xb.is_finite() {
            return false;
        }
        match self {
            CostFunction::Log => (x - xb).norm() >= T::of(LOG_MIN_SEPARATION),
            _ => true,
        }
    }

    /// Whether the MTW tensor vanishes identically for this cost.
    pub fn mtw_flat(self) -> bool {
        matches!(self, CostFunction::Quadratic | CostFunction::Bilinear)
    }

    fn co_vector_in_chart<T: Real>(self, p: CoVec2<T>) -> bool {
        if !p.is_finite() {
            return false;
        }
        match self {
            CostFunction::Log => p.norm() > T::zero(),
            CostFunction::SqrtPlus => p.norm() < T::one(),
            _ => true,
        }
    }

    /// Distance from `p` to the edge of the co-vector chart, used to keep
    /// finite-difference stencils inside it.
    fn chart_margin<T: Real>(self, p: CoVec2<T>) -> T {
        match self {
            CostFunction::Log => p.norm(),
            CostFunction::SqrtPlus => T::one() - p.norm(),
            _ => T::one() + p.norm(),
        }
    }

    /// Target point `x̄` with `-Dc(x, x̄) = p`.
    pub fn c_exp<T: Real>(self, x: Point2<T>, p: CoVec2<T>) -> Result<Point2<T>> {
        if !self.co_vector_in_chart(p) {
            return Err(OtError::OutOfChart { cost: self.id() });
        }
        let xb = match self {
            CostFunction::Quadratic => x + p,
            CostFunction::Bilinear => p,
            CostFunction::Log => x - p / p.norm2(),
            CostFunction::SqrtPlus => x + p / (T::one() - p.norm2()).sqrt(),
        };
        if !self.valid_pair(x, xb) {
            return Err(OtError::OutOfChart { cost: self.id() });
        }
        Ok(xb)
    }

    /// Source point `x` with `-D̄c(x, x̄) = p`.
    pub fn c_exp_bar<T: Real>(self, xb: Point2<T>, p: CoVec2<T>) -> Result<Point2<T>> {
        if !self.co_vector_in_chart(p) {
            return Err(OtError::OutOfChart { cost: self.id() });
        }
        let x = match self {
            CostFunction::Quadratic => xb + p,
            CostFunction::Bilinear => p,
            CostFunction::Log => xb - p / p.norm2(),
            CostFunction::SqrtPlus => xb + p / (T::one() - p.norm2()).sqrt(),
        };
        if !self.valid_pair(x, xb) {
            return Err(OtError::OutOfChart { cost: self.id() });
        }
        Ok(x)
    }

    /// Damped Newton inversion of `x̄ ↦ -Dc(x, x̄)` from an initial guess.
    /// Independent of the closed forms; used to cross-check them.
    pub fn c_exp_newton<T: Real>(self, x: Point2<T>, p: CoVec2<T>, guess: Point2<T>) -> Result<Point2<T>> {
        newton_invert(
            self,
            guess,
            |xb| -self.grad_x(x, xb) - p,
            |xb| self.cross_hessian(x, xb),
            |xb| self.valid_pair(x, xb),
        )
    }

    /// Damped Newton inversion of `x ↦ -D̄c(x, x̄)`.
    pub fn c_exp_bar_newton<T: Real>(self, xb: Point2<T>, p: CoVec2<T>, guess: Point2<T>) -> Result<Point2<T>> {
        newton_invert(
            self,
            guess,
            |x| -self.grad_xbar(x, xb) - p,
            |x| self.cross_hessian(x, xb).transpose(),
            |x| self.valid_pair(x, xb),
        )
    }

    /// Full contraction of the MTW tensor for `(x, x̄, V, η)`.
    pub fn mtw_term<T: Real>(self, e: &MtwEvaluation<T>) -> Result<T> {
        if !self.valid_pair(e.x, e.xbar) {
            return Err(OtError::DegeneratePair { cost: self.id(), det: 0.0 });
        }
        let det = self.cross_hessian(e.x, e.xbar).det();
        if !(det.abs() > T::of(1e-12)) {
            return Err(OtError::DegeneratePair { cost: self.id(), det: det.to_f64_lossy() });
        }
        if self.mtw_flat() {
            return Ok(T::zero());
        }
        let eta_norm = e.eta.norm();
        if eta_norm == T::zero() || e.v.norm() == T::zero() {
            return Ok(T::zero());
        }
        let p0 = -self.grad_x(e.x, e.xbar);
        let step = T::of(0.1) * self.chart_margin(p0).min(p0.norm().max(T::of(1e-3))) / eta_norm;
        let f = |t: T| -> Result<T> {
            let xb = self.c_exp(e.x, p0 + e.eta * t)?;
            Ok(-self.hessian_xx(e.x, xb).bilinear(e.v, e.v))
        };
        let f0 = f(T::zero())?;
        let second = |h: T| -> Result<T> { Ok((f(h)? - f0 * T::of(2.0) + f(-h)?) / (h * h)) };
        let d1 = second(step)?;
        let d2 = second(step * T::of(0.5))?;
        let d3 = second(step * T::of(0.25))?;
        let r1 = (d2 * T::of(4.0) - d1) / T::of(3.0);
        let r2 = (d3 * T::of(4.0) - d2) / T::of(3.0);
        Ok((r2 * T::of(16.0) - r1) / T::of(15.0))
    }
}

fn newton_invert<T: Real>(
    cost: CostFunction,
    guess: Point2<T>,
    residual: impl Fn(Point2<T>) -> CoVec2<T>,
    jacobian: impl Fn(Point2<T>) -> Mat2<T>,
    valid: impl Fn(Point2<T>) -> bool,
) -> Result<Point2<T>> {
    let tol = T::of(NEWTON_TOL).max(T::epsilon() * T::of(64.0));
    let mut z = guess;
    if !valid(z) {
        return Err(OtError::OutOfChart { cost: cost.id() });
    }
    let mut r = residual(z);
    for _ in 0..NEWTON_MAX_ITER {
        if r.norm() <= tol * T::of(1e-2) {
            return Ok(z);
        }
        let Some(jinv) = jacobian(z).inverse() else {
            break;
        };
        let step = jinv.apply(r);
        let mut alpha = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let cand = z - step * alpha;
            if valid(cand) {
                let rc = residual(cand);
                if rc.is_finite() && rc.norm() < r.norm() {
                    z = cand;
                    r = rc;
                    accepted = true;
                    break;
                }
            }
            alpha = alpha * T::of(0.5);
        }
        if !accepted {
            break;
        }
    }
    if r.norm() <= tol {
        Ok(z)
    } else {
        Err(OtError::NoConvergence { what: "c-exponential Newton", iterations: NEWTON_MAX_ITER, residual: r.norm().to_f64_lossy() })
    }
}

impl fmt::Display for CostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for CostFunction {
    type Err = OtError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "quadratic" => Ok(CostFunction::Quadratic),
            "bilinear" => Ok(CostFunction::Bilinear),
            "log" => Ok(CostFunction::Log),
            "sqrt_plus" => Ok(CostFunction::SqrtPlus),
            other => Err(OtError::Invalid(format!("unknown cost id `{other}`"))),
        }
    }
}

/// One admissible input of the MTW tensor. `eta` is projected onto the
/// annihilator of `v` on construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MtwEvaluation<T> {
    pub x: Point2<T>,
    pub xbar: Point2<T>,
    pub v: Vec2<T>,
    pub eta: CoVec2<T>,
    pub value: Option<T>,
}

impl<T: Real> MtwEvaluation<T> {
    pub fn new(x: Point2<T>, xbar: Point2<T>, v: Vec2<T>, eta: CoVec2<T>) -> Self {
        let vv = v.norm2();
        let eta = if vv > T::zero() { eta - v * (eta.dot(v) / vv) } else { eta };
        Self { x, xbar, v, eta, value: None }
    }

    pub fn evaluate(mut self, cost: CostFunction) -> Result<Self> {
        self.value = Some(cost.mtw_term(&self)?);
        Ok(self)
    }
}

/// Outcome of [`verify_structural`]. Failures are recorded, never thrown.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuralReport<T> {
    pub cost: CostFunction,
    pub source_samples: usize,
    pub target_samples: usize,
    pub twist_collisions: usize,
    pub min_abs_det: T,
    pub min_mtw: T,
    pub mtw_samples: usize,
    pub invalid_pairs: usize,
}

impl<T: Real> StructuralReport<T> {
    pub fn twist_ok(&self) -> bool {
        self.twist_collisions == 0
    }

    pub fn nondegenerate(&self) -> bool {
        self.min_abs_det > T::zero()
    }

    pub fn mtw_ok(&self) -> bool {
        self.min_mtw >= -T::of(MTW_SIGN_SLACK)
    }

    pub fn passes(&self) -> bool {
        self.twist_ok() && self.nondegenerate() && self.mtw_ok() && self.invalid_pairs == 0
    }
}

/// Spreads `count` samples evenly over the raster cells of `region`.
pub(crate) fn region_samples<T: Real>(region: &Region<T>, count: usize) -> Vec<Point2<T>> {
    let cells = region.inside_cells();
    if cells.is_empty() || count == 0 {
        return Vec::new();
    }
    let n = count.min(cells.len());
    (0..n)
        .map(|k| {
            // midpoint rule over the ordered cell list
            let idx = ((2 * k + 1) * cells.len()) / (2 * n);
            region.grid.center(cells[idx.min(cells.len() - 1)])
        })
        .collect()
}

/// Samples the twist, nondegeneracy and MTW conditions over `source × target`.
///
/// `samples` is split into about `√samples` source points, each paired with
/// `samples / √samples` target points.
pub fn verify_structural<T: Real>(
    cost: CostFunction,
    source: &Region<T>,
    target: &Region<T>,
    samples: usize,
) -> StructuralReport<T> {
    let samples = samples.max(1);
    let n_src = ((samples as f64).sqrt().ceil() as usize).max(1);
    let n_tgt = samples.div_ceil(n_src).max(1);
    let xs = region_samples(source, n_src);
    let ybs = region_samples(target, n_tgt);
    let golden = T::of(0.618_033_988_749_894_9);
    let mut report = StructuralReport {
        cost,
        source_samples: xs.len(),
        target_samples: ybs.len(),
        twist_collisions: 0,
        min_abs_det: T::infinity(),
        min_mtw: T::infinity(),
        mtw_samples: 0,
        invalid_pairs: 0,
    };
    let radius = T::of(TWIST_COLLISION_RADIUS);
    let mut k = 0usize;
    for &x in &xs {
        let mut cov: Vec<(CoVec2<T>, usize)> = Vec::with_capacity(ybs.len());
        for (j, &yb) in ybs.iter().enumerate() {
            if !cost.valid_pair(x, yb) {
                report.invalid_pairs += 1;
                continue;
            }
            cov.push((-cost.grad_x(x, yb), j));
            let det = cost.cross_hessian(x, yb).det().abs();
            report.min_abs_det = report.min_abs_det.min(det);
            let theta = T::TAU() * (T::of_usize(k) * golden).fract();
            k += 1;
            let v = Vec2::new(theta.cos(), theta.sin());
            if let Ok(val) = cost.mtw_term(&MtwEvaluation::new(x, yb, v, v.perp())) {
                report.min_mtw = report.min_mtw.min(val);
                report.mtw_samples += 1;
            }
        }
        // Injectivity: sort by first coordinate and sweep a window of width `radius`.
        cov.sort_by(|a, b| a.0.x.partial_cmp(&b.0.x).unwrap_or(std::cmp::Ordering::Equal));
        for i in 0..cov.len() {
            for j in (i + 1)..cov.len() {
                if cov[j].0.x - cov[i].0.x > radius {
                    break;
                }
                if cov[i].0.dist(cov[j].0) <= radius && ybs[cov[i].1] != ybs[cov[j].1] {
                    report.twist_collisions += 1;
                }
            }
        }
    }
    report
}
