//! Loeper's maximum principle and c-monotonicity, evaluated pointwise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::costs::CostFunction;
use crate::error::{OtError, Result};
use crate::geometry::Region;
use crate::linalg::{CoVec2, Point2};
use crate::scalar::Real;
use crate::transport::{DualPotential, SourceDensity};

/// `max_t f(t) - max(f(0), f(1))` for `f(t) = -c(x, x̄(t)) + c(x₀, x̄(t))`
/// along the c-segment `x̄(t) = c-Exp_{x₀}((1-t)p̄₀ + t p̄₁)`, sampled at
/// `t_grid` evenly spaced parameters. Non-positive when the principle holds.
pub fn loeper_check<T: Real>(cost: CostFunction, x0: Point2<T>, p0: CoVec2<T>, p1: CoVec2<T>, x: Point2<T>, t_grid: usize) -> Result<T> {
    let n = t_grid.max(2);
    let f = |t: T| -> Result<T> {
        let xb = cost.c_exp(x0, p0.lerp(p1, t))?;
        Ok(-cost.eval(x, xb) + cost.eval(x0, xb))
    };
    let ends = f(T::zero())?.max(f(T::one())?);
    let mut worst = T::neg_infinity();
    for k in 0..n {
        let t = T::of_usize(k) / T::of_usize(n - 1);
        let v = f(t)?;
        // Near the singular diagonal of the log cost `f → -∞`, which only helps.
        if v.is_finite() {
            worst = worst.max(v - ends);
        }
    }
    Ok(worst)
}

/// A tuple `(x₀, p̄₀, p̄₁, x)` for [`loeper_check`].
pub type LoeperTuple<T> = (Point2<T>, CoVec2<T>, CoVec2<T>, Point2<T>);

/// Random admissible tuples: `x₀, x` uniform in `source`, `p̄ᵢ = -Dc(x₀, ȳᵢ)`
/// with `ȳᵢ` uniform in `target`, keeping only segments whose c-exponential
/// stays in the chart.
pub fn loeper_tuples<T: Real>(cost: CostFunction, source: &Region<T>, target: &Region<T>, count: usize, seed: u64) -> Result<Vec<LoeperTuple<T>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count {
        tries += 1;
        if tries > 100 * count + 1000 {
            return Err(OtError::EmptySet);
        }
        let x0 = uniform_point(source, &mut rng)?;
        let x = uniform_point(source, &mut rng)?;
        let y0 = uniform_point(target, &mut rng)?;
        let y1 = uniform_point(target, &mut rng)?;
        if ![(x0, y0), (x0, y1), (x, y0), (x, y1)].iter().all(|&(a, b)| cost.valid_pair(a, b)) {
            continue;
        }
        let p0 = -cost.grad_x(x0, y0);
        let p1 = -cost.grad_x(x0, y1);
        if cost.c_exp(x0, p0.lerp(p1, T::of(0.5))).is_err() {
            continue;
        }
        out.push((x0, p0, p1, x));
    }
    Ok(out)
}

/// Largest [`loeper_check`] value over `tuples`.
pub fn loeper_sweep<T: Real>(cost: CostFunction, tuples: &[LoeperTuple<T>], t_grid: usize) -> Result<T> {
    tuples
        .par_iter()
        .map(|&(x0, p0, p1, x)| loeper_check(cost, x0, p0, p1, x, t_grid))
        .try_reduce(|| T::neg_infinity(), |a, b| Ok(a.max(b)))
}

/// `max c(x₀,x̄₀) + c(x₁,x̄₁) - c(x₀,x̄₁) - c(x₁,x̄₀)` over all couples of pairs.
pub fn c_monotonicity_check<T: Real>(cost: CostFunction, pairs: &[(Point2<T>, Point2<T>)]) -> T {
    let diag: Vec<T> = pairs.iter().map(|&(x, y)| cost.eval(x, y)).collect();
    (0..pairs.len())
        .into_par_iter()
        .map(|i| {
            let (xi, yi) = pairs[i];
            let mut worst = T::zero();
            for k in (i + 1)..pairs.len() {
                let (xk, yk) = pairs[k];
                if yi == yk {
                    continue;
                }
                let v = diag[i] + diag[k] - cost.eval(xi, yk) - cost.eval(xk, yi);
                worst = worst.max(v);
            }
            worst
        })
        .reduce(T::zero, T::max)
}

/// `count` pairs `(x, T(x))` with `x` uniform on the support of `μ` and
/// `T(x)` the maximizing target point.
pub fn transport_pairs<T: Real>(phi: &DualPotential<T>, mu: &SourceDensity<T>, count: usize, seed: u64) -> Vec<(Point2<T>, Point2<T>)> {
    let g = mu.region.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(count);
    while xs.len() < count {
        let p = mu.support[rng.gen_range(0..mu.support.len())];
        let (lo, _) = g.square(p);
        let x = lo + Point2::new(T::of(rng.gen::<f64>()), T::of(rng.gen::<f64>())) * g.h;
        if mu.region.contains(x) {
            xs.push(x);
        }
    }
    xs.into_par_iter().map(|x| (x, phi.target.points[phi.value(x).1])).collect()
}

/// Uniform sample from `region` by rejection in its bounding box.
pub fn uniform_point<T: Real, R: Rng>(region: &Region<T>, rng: &mut R) -> Result<Point2<T>> {
    let (lo, hi) = region.bbox;
    for _ in 0..10_000 {
        let p = Point2::new(
            lo.x + (hi.x - lo.x) * T::of(rng.gen::<f64>()),
            lo.y + (hi.y - lo.y) * T::of(rng.gen::<f64>()),
        );
        if region.contains(p) {
            return Ok(p);
        }
    }
    Err(OtError::EmptySet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{DiscreteTarget, TargetSampling};

    type P = Point2<f64>;

    #[test]
    fn flat_costs_have_affine_loeper_profiles() {
        let sq = Region::<f64>::parse("square(0,0,1,1)", 32).unwrap();
        for cost in [CostFunction::Quadratic, CostFunction::Bilinear] {
            let tuples = loeper_tuples(cost, &sq, &sq, 2000, 7).unwrap();
            let v = loeper_sweep(cost, &tuples, 17).unwrap();
            assert!(v.abs() <= 1e-12, "{cost}: {v}");
        }
    }

    #[test]
    fn log_cost_on_disjoint_squares() {
        let a = Region::<f64>::parse("square(0,0,1,1)", 32).unwrap();
        let b = Region::<f64>::parse("square(2,2,3,3)", 32).unwrap();
        let tuples = loeper_tuples(CostFunction::Log, &a, &b, 2000, 3).unwrap();
        assert!(loeper_sweep(CostFunction::Log, &tuples, 33).unwrap() <= 1e-8);
    }

    #[test]
    fn monotonicity_of_the_two_point_map_and_a_swapped_control() {
        let r = Region::<f64>::parse("square", 64).unwrap();
        let mu = SourceDensity::uniform(r.clone()).unwrap();
        let t = DiscreteTarget::sample(r, &TargetSampling::Explicit(vec![(-1.0, 0.0, 1.0), (1.0, 0.0, 1.0)])).unwrap();
        let phi = DualPotential::zero(CostFunction::Quadratic, t);
        let pairs = transport_pairs(&phi, &mu, 1000, 11);
        assert_eq!(pairs.len(), 1000);
        assert!(c_monotonicity_check(CostFunction::Quadratic, &pairs) <= 1e-12);
        // Sending the left point right and the right point left costs
        // exactly ⟨x₁ - x₀, ȳ₁ - ȳ₀⟩ more, for the quadratic cost.
        let (x0, x1) = (P::of(-0.5, 0.2), P::of(0.5, -0.1));
        let (y0, y1) = (P::of(-1.0, 0.0), P::of(1.0, 0.0));
        let v = c_monotonicity_check(CostFunction::Quadratic, &[(x0, y1), (x1, y0)]);
        assert!((v - (x1 - x0).dot(y1 - y0)).abs() < 1e-14, "{v}");
    }

    #[test]
    fn single_target_is_trivially_monotone() {
        let y = P::of(0.3, 0.4);
        let pairs: Vec<_> = (0..50).map(|k| (P::of(k as f64 * 0.01, 0.2), y)).collect();
        assert_eq!(c_monotonicity_check(CostFunction::SqrtPlus, &pairs), 0.0);
    }
}
