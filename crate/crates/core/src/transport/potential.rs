//! Dual potentials `u(x) = max_j(-c(x, ȳ_j) + λ_j)` and the induced map.

use crate::costs::CostFunction;
use crate::error::{OtError, Result};
use crate::linalg::{CoVec2, Point2};
use crate::scalar::Real;
use crate::transport::density::DiscreteTarget;

/// Rule deciding which supports count as active at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activity<T> {
    /// `j` is active when its value is within `gap` of the maximum.
    Gap(T),
    /// `j` is active when its first-order model beats the maximizer `m`
    /// somewhere in the square of half-width `r` around the point:
    /// `v_j - v_m + r·|g_j - g_m|₁ ≥ 0` with `g = -Dc(x, ȳ)`.
    Window(T),
}

impl<T: Real> Activity<T> {
    /// The raster default: the pixel square of side `h`.
    pub fn pixel(h: T) -> Self {
        Activity::Window(h * T::of(0.5))
    }
}

#[derive(Clone, Debug)]
pub struct DualPotential<T> {
    pub cost: CostFunction,
    pub target: DiscreteTarget<T>,
    pub lambda: Vec<T>,
}

impl<T: Real> DualPotential<T> {
    pub fn new(cost: CostFunction, target: DiscreteTarget<T>, lambda: Vec<T>) -> Result<Self> {
        if lambda.len() != target.len() {
            return Err(OtError::Invalid("one dual weight per target point".into()));
        }
        Ok(Self { cost, target, lambda })
    }

    pub fn zero(cost: CostFunction, target: DiscreteTarget<T>) -> Self {
        let n = target.len();
        Self { cost, target, lambda: vec![T::zero(); n] }
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// Shifts the weights so that the first one is zero.
    pub fn normalize(&mut self) {
        if let Some(&l0) = self.lambda.first() {
            for l in self.lambda.iter_mut() {
                *l = *l - l0;
            }
        }
    }

    #[inline]
    pub fn support(&self, j: usize, x: Point2<T>) -> T {
        -self.cost.eval(x, self.target.points[j]) + self.lambda[j]
    }

    /// `-Dc(x, ȳ_j)`, the gradient of the j-th support at `x`.
    #[inline]
    pub fn covector(&self, j: usize, x: Point2<T>) -> CoVec2<T> {
        -self.cost.grad_x(x, self.target.points[j])
    }

    /// `u(x)` and the smallest maximizing index.
    pub fn value(&self, x: Point2<T>) -> (T, usize) {
        let mut best = (T::neg_infinity(), 0);
        for j in 0..self.len() {
            let v = self.support(j, x);
            if v > best.0 {
                best = (v, j);
            }
        }
        best
    }

    /// `u(x)` and the sorted active indices under `activity`.
    pub fn eval(&self, x: Point2<T>, activity: Activity<T>) -> (T, Vec<usize>) {
        let vals: Vec<T> = (0..self.len()).map(|j| self.support(j, x)).collect();
        let (m, vm) = vals
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        let active = match activity {
            Activity::Gap(t) => (0..self.len()).filter(|&j| vals[j] >= vm - t).collect(),
            Activity::Window(r) => {
                let gm = self.covector(m, x);
                (0..self.len())
                    .filter(|&j| j == m || vals[j] - vm + (self.covector(j, x) - gm).l1() * r >= T::zero())
                    .collect()
            }
        };
        (vm, active)
    }

    /// Tolerance for exact ties: a few ulps of the values involved.
    pub fn tie_tolerance(&self, x: Point2<T>) -> T {
        let (v, _) = self.value(x);
        T::epsilon() * T::of(64.0) * (T::one() + v.abs() + self.lambda.iter().fold(T::zero(), |a, l| a.max(l.abs())))
    }

    /// `Du(x)` at a differentiability point.
    pub fn gradient(&self, x: Point2<T>) -> Result<CoVec2<T>> {
        let (_, active) = self.eval(x, Activity::Gap(self.tie_tolerance(x)));
        if active.len() != 1 {
            return Err(OtError::SingularPoint { active: active.len() });
        }
        Ok(self.covector(active[0], x))
    }

    /// `T(x) = c-Exp_x(Du(x))`. Both the direct index lookup and the
    /// c-exponential of the gradient are computed and must agree.
    pub fn transport_map(&self, x: Point2<T>) -> Result<Point2<T>> {
        let (_, active) = self.eval(x, Activity::Gap(self.tie_tolerance(x)));
        if active.len() != 1 {
            return Err(OtError::SingularPoint { active: active.len() });
        }
        let y = self.target.points[active[0]];
        let via_exp = self.cost.c_exp(x, self.covector(active[0], x))?;
        let scale = T::one() + y.norm();
        if via_exp.dist(y) > T::of(1e-9) * scale {
            return Err(OtError::NoConvergence {
                what: "transport map round trip",
                iterations: 0,
                residual: via_exp.dist(y).to_f64_lossy(),
            });
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Region;
    use crate::transport::density::TargetSampling;

    type P = Point2<f64>;

    fn two_point() -> DualPotential<f64> {
        let r = Region::<f64>::parse("square", 64).unwrap();
        let t = DiscreteTarget::sample(r, &TargetSampling::Explicit(vec![(-1.0, 0.0, 1.0), (1.0, 0.0, 1.0)])).unwrap();
        DualPotential::zero(CostFunction::Quadratic, t)
    }

    #[test]
    fn single_target_is_c_affine() {
        let r = Region::<f64>::parse("square", 16).unwrap();
        let t = DiscreteTarget::sample(r, &TargetSampling::Explicit(vec![(0.2, 0.1, 1.0)])).unwrap();
        let phi = DualPotential::zero(CostFunction::Log, t);
        let x = P::of(3.0, 1.0);
        let (v, act) = phi.eval(x, Activity::Gap(1e-3));
        assert_eq!(act, vec![0]);
        assert!((v + CostFunction::Log.eval(x, P::of(0.2, 0.1))).abs() < 1e-15);
    }

    #[test]
    fn two_point_activity() {
        let phi = two_point();
        assert_eq!(phi.eval(P::of(0.0, 0.3), Activity::Gap(1e-12)).1, vec![0, 1]);
        assert_eq!(phi.eval(P::of(0.2, 0.0), Activity::Gap(1e-12)).1, vec![1]);
        // A pixel of half-width 0.25 around (0.2, 0) reaches the bisector.
        assert_eq!(phi.eval(P::of(0.2, 0.0), Activity::Window(0.25)).1, vec![0, 1]);
        assert_eq!(phi.eval(P::of(0.2, 0.0), Activity::Window(0.15)).1, vec![1]);
    }

    #[test]
    fn transport_map_examples() {
        let phi = two_point();
        assert_eq!(phi.transport_map(P::of(0.5, 0.0)).unwrap(), P::of(1.0, 0.0));
        assert_eq!(phi.transport_map(P::of(-0.5, 0.1)).unwrap(), P::of(-1.0, 0.0));
        assert!(matches!(phi.transport_map(P::of(0.0, 0.0)), Err(OtError::SingularPoint { active: 2 })));
    }

    #[test]
    fn constant_shift_keeps_argmax() {
        let mut phi = two_point();
        phi.lambda = vec![0.3, -0.1];
        let a = phi.value(P::of(0.05, 0.2)).1;
        for l in phi.lambda.iter_mut() {
            *l += 17.0;
        }
        assert_eq!(phi.value(P::of(0.05, 0.2)).1, a);
        phi.normalize();
        assert_eq!(phi.lambda[0], 0.0);
    }
}
