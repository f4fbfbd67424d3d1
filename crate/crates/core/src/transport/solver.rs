//! Damped Newton method on the Kantorovich dual of the semi-discrete problem.
//!
//! The unknowns are the weights `λ` with `λ₀ = 0` fixed. Each step solves
//! `H δ = ν - m(λ)` with the mass Hessian (a weighted graph Laplacian of the
//! cell adjacency) by preconditioned conjugate gradients, then halves the step
//! until every cell keeps a positive mass floor and the residual decreases by
//! the factor `1 - α/2`.

use std::fmt;

use crate::costs::CostFunction;
use crate::error::OtError;
use crate::linalg::{conjugate_gradient, SparseSym};
use crate::scalar::Real;
use crate::transport::density::{DiscreteTarget, SourceDensity};
use crate::transport::laguerre::assemble;
use crate::transport::potential::DualPotential;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions<T> {
    /// Target `max_j |mass_j - ν_j|`.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self { tol: T::of(1e-9), max_iter: 60 }
    }
}

#[derive(Clone, Debug)]
pub struct Solution<T> {
    pub potential: DualPotential<T>,
    pub masses: Vec<T>,
    /// `max_j |mass_j - ν_j|`.
    pub residual: T,
    pub iterations: usize,
}

/// Failure of [`solve_dual`], carrying the best iterate when there is one.
#[derive(Debug)]
pub struct SolveError<T> {
    pub error: OtError,
    pub best: Option<Box<Solution<T>>>,
}

impl<T> fmt::Display for SolveError<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl<T: fmt::Debug> std::error::Error for SolveError<T> {}

impl<T> From<OtError> for SolveError<T> {
    fn from(error: OtError) -> Self {
        SolveError { error, best: None }
    }
}

impl<T> From<SolveError<T>> for OtError {
    fn from(e: SolveError<T>) -> Self {
        e.error
    }
}

fn max_abs_diff<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |m, (x, y)| m.max((*x - *y).abs()))
}

fn l2_diff<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| (*x - *y) * (*x - *y)).sum::<T>().sqrt()
}

/// Weights for which every cell has positive area: each support touches the
/// paraboloid `U(x) = K|x - x_c|²/2` from below at its own point `x_j` near
/// the deepest support pixel `x_c`. With `K` above every `|D²_xx c|`, `U` minus
/// a support is strictly convex, so support `j` wins a neighbourhood of `x_j`.
fn touching_weights<T: Real>(cost: CostFunction, mu: &SourceDensity<T>, nu: &DiscreteTarget<T>) -> Vec<T> {
    let g = mu.region.grid;
    // Chessboard distance to the complement of the support.
    let mut depth = vec![usize::MAX; g.len()];
    let mut queue = std::collections::VecDeque::new();
    for p in 0..g.len() {
        if mu.mass[p] <= T::zero() {
            depth[p] = 0;
            queue.push_back(p);
        }
    }
    let mut nb = Vec::with_capacity(8);
    while let Some(p) = queue.pop_front() {
        g.neighbors(p, true, &mut nb);
        for &q in &nb {
            if depth[q] == usize::MAX {
                depth[q] = depth[p] + 1;
                queue.push_back(q);
            }
        }
    }
    let deepest = (0..g.len()).max_by_key(|&p| (depth[p], std::cmp::Reverse(p))).unwrap_or(0);
    let xc = g.center(deepest);
    let r_in = g.h * (T::of_usize(depth[deepest]) - T::one()).max(T::of(0.5));
    let stride = (mu.support.len() / 64).max(1);
    let mut curv = T::zero();
    let mut slope = T::zero();
    for y in &nu.points {
        slope = slope.max(cost.grad_x(xc, *y).norm());
        for &p in mu.support.iter().step_by(stride) {
            curv = curv.max(cost.hessian_xx(g.center(p), *y).frobenius());
        }
    }
    let k = (curv * T::of(4.0)).max(slope * T::of(4.0) / r_in).max(T::of(1e-6));
    nu.points
        .iter()
        .map(|y| {
            let mut x = xc;
            for _ in 0..60 {
                x = xc - cost.grad_x(x, *y) * (T::one() / k);
            }
            k * T::of(0.5) * (x - xc).norm2() + cost.eval(x, *y)
        })
        .collect()
}

/// Raises the weight of every empty cell until it wins the pixel where it
/// is closest to winning, by a margin of half a pixel in value.
fn fill_empty_cells<T: Real>(phi: &mut DualPotential<T>, mu: &SourceDensity<T>, masses: &mut Vec<T>) {
    let g = mu.region.grid;
    // Every other pixel in each direction is plenty to locate a best pixel.
    let probe: Vec<usize> = mu
        .support
        .iter()
        .copied()
        .filter(|&p| {
            let (ix, iy) = g.coords(p);
            ix % 2 == 0 && iy % 2 == 0
        })
        .collect();
    let probe = if probe.is_empty() { mu.support.clone() } else { probe };
    let half = g.h * T::of(0.5);
    for _round in 0..100 {
        let empty: Vec<usize> = (0..phi.len()).filter(|&j| masses[j] <= T::zero()).collect();
        if empty.is_empty() {
            return;
        }
        let values: Vec<(T, usize)> = probe.iter().map(|&p| phi.value(g.center(p))).collect();
        let mut raised = phi.lambda.clone();
        for &j in &empty {
            let mut best: Option<(T, usize)> = None;
            for (k, &p) in probe.iter().enumerate() {
                let deficit = values[k].0 - phi.support(j, g.center(p));
                if best.is_none_or(|b| deficit < b.0) {
                    best = Some((deficit, k));
                }
            }
            let Some((deficit, k)) = best else { continue };
            let x = g.center(probe[k]);
            let margin = half * (phi.covector(j, x) - phi.covector(values[k].1, x)).norm();
            raised[j] = phi.lambda[j] + deficit + margin.max(g.h * g.h);
        }
        phi.lambda = raised;
        *masses = assemble(phi, mu, false, false).masses;
    }
}

/// Solves for the weights whose Laguerre cells carry the target masses.
pub fn solve_dual<T: Real>(
    cost: CostFunction,
    mu: &SourceDensity<T>,
    nu: &DiscreteTarget<T>,
    opts: &SolverOptions<T>,
) -> Result<Solution<T>, SolveError<T>> {
    let comps = mu.support_components();
    if comps != 1 {
        return Err(OtError::DisconnectedSupport { components: comps }.into());
    }
    let n = nu.len();
    let mut phi = DualPotential::zero(cost, nu.clone());
    let mut masses = assemble(&phi, mu, false, false).masses;
    if n == 1 {
        return Ok(Solution { residual: (masses[0] - nu.weights[0]).abs(), potential: phi, masses, iterations: 0 });
    }
    if masses.iter().any(|m| *m <= T::zero()) {
        phi.lambda = touching_weights(cost, mu, nu);
        masses = assemble(&phi, mu, false, false).masses;
    }
    fill_empty_cells(&mut phi, mu, &mut masses);
    phi.normalize();
    let floor = masses.iter().chain(&nu.weights).copied().fold(T::infinity(), T::min) * T::of(0.5);
    let mut err = max_abs_diff(&masses, &nu.weights);
    let mut best = Solution { potential: phi.clone(), masses: masses.clone(), residual: err, iterations: 0 };
    let mut it = 0;
    while err > opts.tol {
        if it >= opts.max_iter {
            return Err(SolveError {
                error: OtError::NoConvergence { what: "dual Newton", iterations: it, residual: best.residual.to_f64_lossy() },
                best: Some(Box::new(best)),
            });
        }
        it += 1;
        let a = assemble(&phi, mu, false, true);
        let hess = reduce(a.hessian.expect("requested"));
        let rhs: Vec<T> = (1..n).map(|j| nu.weights[j] - a.masses[j]).collect();
        let (delta, _) = conjugate_gradient(&hess, &rhs, T::of(1e-13).max(T::epsilon() * T::of(16.0)), 20 * n + 100);
        let r0 = l2_diff(&a.masses, &nu.weights);
        let mut alpha = T::one();
        let mut accepted = false;
        for _ in 0..30 {
            let mut trial = phi.clone();
            for j in 1..n {
                trial.lambda[j] = phi.lambda[j] + alpha * delta[j - 1];
            }
            let m = assemble(&trial, mu, false, false).masses;
            let min_mass = m.iter().copied().fold(T::infinity(), T::min);
            if min_mass >= floor && l2_diff(&m, &nu.weights) <= (T::one() - alpha * T::of(0.5)) * r0 {
                phi = trial;
                masses = m;
                accepted = true;
                break;
            }
            alpha = alpha * T::of(0.5);
        }
        if !accepted {
            return Err(SolveError {
                error: OtError::NoConvergence { what: "dual Newton line search", iterations: it, residual: best.residual.to_f64_lossy() },
                best: Some(Box::new(best)),
            });
        }
        err = max_abs_diff(&masses, &nu.weights);
        if err < best.residual {
            best = Solution { potential: phi.clone(), masses: masses.clone(), residual: err, iterations: it };
        }
    }
    Ok(Solution { potential: phi, masses, residual: err, iterations: it })
}

/// Drops row and column 0 (the fixed weight) and guards against a singular
/// diagonal for cells without neighbours.
fn reduce<T: Real>(a: SparseSym<T>) -> SparseSym<T> {
    let n = a.n;
    let mut r = SparseSym::new(n - 1);
    let dmax = a.diag.iter().copied().fold(T::zero(), T::max);
    for i in 1..n {
        r.diag[i - 1] = a.diag[i].max(dmax * T::of(1e-14));
        r.rows[i - 1] = a.rows[i].iter().filter(|(j, _)| *j != 0).map(|&(j, w)| (j - 1, w)).collect();
    }
    r
}
