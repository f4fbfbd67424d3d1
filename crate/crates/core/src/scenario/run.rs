//! Executes a scenario's analyses in dependency order and turns each
//! acceptance rule into a PASS/FAIL verdict.

use std::path::PathBuf;

use rayon::prelude::*;

use crate::costs::{StructuralReport, MTW_SIGN_SLACK};
use crate::error::{OtError, Result};
use crate::estimates::cone::{boundary_distance, spectral_norm};
use crate::estimates::{
    aleksandrov_check, build_c_cone, build_section, c_monotonicity_check, cone_inclusion, loeper_sweep, loeper_tuples, transport_pairs,
    AleksandrovRow, CConeOptions, Section, Witness,
};
use crate::geometry::{detect_holes, HoleReport, Region};
use crate::linalg::{CoVec2, Point2};
use crate::scenario::spec::{Analysis, Focus, Scenario};
use crate::singular::{isolation_report_with_target, propagation_check, singular_set, subdifferential_at, IsolationReport, SingularSet};
use crate::transport::{solve_dual, DiscreteTarget, DualPotential, SourceDensity, SolverOptions};

type P = Point2<f64>;

/// Loeper bound for costs whose MTW tensor vanishes.
pub const LOEPER_FLAT_TOL: f64 = 1e-12;
pub const LOEPER_TOL: f64 = 1e-8;
pub const MONOTONICITY_TOL: f64 = 1e-12;
pub const MTW_FLAT_TOL: f64 = 1e-9;
/// Propagation gap bound in units of `h·max|D²c|`.
pub const PROPAGATION_FACTOR: f64 = 5.0;
pub const PROPAGATION_RADIUS: f64 = 0.1;
/// Allowed growth of the Aleksandrov ratio over the coarsest section.
pub const ALEKSANDROV_SPREAD: f64 = 1.5;
/// Sub-intervals of `[0, 1]` sampled by each Loeper check.
pub const LOEPER_T_GRID: usize = 33;

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self { name: name.into(), pass, detail }
    }

    /// `measured ≤ bound`, naming the inequality and its slack.
    fn at_most(name: &str, what: &str, measured: f64, bound: f64) -> Self {
        let pass = measured <= bound;
        Self::new(name, pass, format!("{what} ≤ {bound:e}: measured {measured:e}, slack {:e}", bound - measured))
    }

    /// `measured > bound`.
    fn above(name: &str, what: &str, measured: f64, bound: f64) -> Self {
        let pass = measured > bound;
        Self::new(name, pass, format!("{what} > {bound:e}: measured {measured:e}, slack {:e}", measured - bound))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveSummary {
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Solved {
    pub mu: SourceDensity<f64>,
    pub phi: DualPotential<f64>,
    pub masses: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SingularResult {
    pub set: SingularSet<f64>,
    /// Affine dimension of `∂u` at each significant pixel.
    pub dims: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationRow {
    pub representative: P,
    pub gap: f64,
    pub bound: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonotonicityResult {
    pub pairs: usize,
    pub violation: f64,
    /// Violation after cyclically shifting the targets of the pairs.
    pub swapped: f64,
}

#[derive(Clone, Debug)]
pub struct SectionFamily {
    pub x0: P,
    pub focus: P,
    pub sections: Vec<Section<f64>>,
    pub witness: Option<Witness<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeRow {
    pub height: f64,
    pub checked: usize,
    pub max_excess: f64,
    pub slack: f64,
    pub interior_margin: f64,
    pub predicted_radius: f64,
    /// Why the section was skipped.
    pub skipped: Option<String>,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub scenario: Scenario,
    pub solve: Option<SolveSummary>,
    pub solved: Option<Solved>,
    pub structural: Option<StructuralReport<f64>>,
    pub holes: Option<HoleReport<f64>>,
    pub singular: Option<SingularResult>,
    pub isolation: Option<IsolationReport<f64>>,
    pub propagation: Vec<PropagationRow>,
    pub loeper: Option<f64>,
    pub monotonicity: Option<MonotonicityResult>,
    pub sections: Option<SectionFamily>,
    pub aleksandrov: Option<std::result::Result<Vec<AleksandrovRow<f64>>, String>>,
    pub cone: Vec<ConeRow>,
    pub verdicts: Vec<Verdict>,
    pub artifacts: Vec<PathBuf>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            solve: None,
            solved: None,
            structural: None,
            holes: None,
            singular: None,
            isolation: None,
            propagation: Vec::new(),
            loeper: None,
            monotonicity: None,
            sections: None,
            aleksandrov: None,
            cone: Vec::new(),
            verdicts: Vec::new(),
            artifacts: Vec::new(),
        }
    }
}

fn hessian_bound(phi: &DualPotential<f64>, x: P) -> f64 {
    phi.target.points.iter().map(|&y| spectral_norm(phi.cost.hessian_xx(x, y))).fold(0.0, f64::max)
}

fn centroid(v: &[CoVec2<f64>]) -> CoVec2<f64> {
    let n = v.len().max(1) as f64;
    v.iter().fold(CoVec2::new(0.0, 0.0), |a, &b| a + b) * (1.0 / n)
}

/// Runs every requested analysis. Only input errors (bad regions, invalid
/// targets) are returned as `Err`; numerical failures become FAIL verdicts.
pub fn run_scenario(s: &Scenario) -> Result<RunReport> {
    let mut r = RunReport::new(s.clone());
    let cost = s.cost;
    let source = s.source()?;
    let target = s.target()?;

    if s.runs(Analysis::Structural) {
        let rep = crate::costs::verify_structural(cost, &source, &target, s.samples.structural);
        r.verdicts.push(Verdict::new("structural.twist", rep.twist_ok(), format!("{} coincident co-vectors", rep.twist_collisions)));
        r.verdicts.push(Verdict::above("structural.nondegenerate", "min |det D̄Dc|", rep.min_abs_det, 0.0));
        r.verdicts.push(Verdict::at_most("structural.chart", "pairs outside the chart", rep.invalid_pairs as f64, 0.0));
        if cost.mtw_flat() {
            r.verdicts.push(Verdict::at_most("structural.mtw", "|MTW tensor|", rep.min_mtw.abs(), MTW_FLAT_TOL));
        } else {
            r.verdicts.push(Verdict::at_most("structural.mtw", "-min MTW tensor", -rep.min_mtw, MTW_SIGN_SLACK));
        }
        r.structural = Some(rep);
    }

    if s.runs(Analysis::Holes) {
        match detect_holes(&target) {
            Ok(h) => {
                if let Some(e) = s.expect.holes {
                    r.verdicts.push(Verdict::new("holes", h.count() == e, format!("hole count {} (expected {e})", h.count())));
                }
                r.holes = Some(h);
            }
            Err(e) => r.verdicts.push(Verdict::new("holes", false, e.to_string())),
        }
    }

    if s.runs(Analysis::Loeper) {
        let bound = if cost.mtw_flat() { LOEPER_FLAT_TOL } else { LOEPER_TOL };
        match loeper_tuples(cost, &source, &target, s.samples.loeper, s.seed).and_then(|t| loeper_sweep(cost, &t, LOEPER_T_GRID)) {
            Ok(v) => {
                r.verdicts.push(Verdict::at_most("loeper", "max_t f(t) - max(f(0), f(1))", v, bound));
                r.loeper = Some(v);
            }
            Err(e) => r.verdicts.push(Verdict::new("loeper", false, e.to_string())),
        }
    }

    if !s.analyses.iter().any(|a| a.needs_solution()) {
        return Ok(r);
    }

    let mu = SourceDensity::new(source, s.density()?)?;
    let nu = DiscreteTarget::sample(target.clone(), &s.sampling()?)?;
    let opts = SolverOptions { tol: s.tol, max_iter: s.max_iter };
    let solved = match solve_dual(cost, &mu, &nu, &opts) {
        Ok(sol) => {
            r.solve = Some(SolveSummary { residual: sol.residual, iterations: sol.iterations, converged: true, error: None });
            r.verdicts.push(Verdict::at_most("solver", "max |mass - ν|", sol.residual, s.tol));
            Solved { mu, phi: sol.potential, masses: sol.masses }
        }
        Err(e) => {
            let (residual, iterations) = e.best.as_ref().map_or((f64::NAN, 0), |b| (b.residual, b.iterations));
            r.solve = Some(SolveSummary { residual, iterations, converged: false, error: Some(e.to_string()) });
            r.verdicts.push(Verdict::new("solver", false, format!("max |mass - ν| ≤ {:e} not reached: {e}", s.tol)));
            return Ok(r);
        }
    };
    let (phi, mu) = (&solved.phi, &solved.mu);
    let h = mu.h();

    if s.runs(Analysis::Singular) {
        let set = singular_set(phi, mu);
        let dims = set.pixels.par_iter().map(|sp| subdifferential_at(phi, set.grid.center(sp.pixel), h).affine_dim).collect();
        if let Some(e) = s.expect.singular_nonempty {
            let found = !set.components.is_empty();
            r.verdicts.push(Verdict::new(
                "singular",
                found == e,
                format!("{} significant component(s), expected {}", set.components.len(), if e { "some" } else { "none" }),
            ));
        }
        r.singular = Some(SingularResult { set, dims });
    }

    if s.runs(Analysis::Isolation) {
        let set = &r.singular.as_ref().expect("prerequisite").set;
        match isolation_report_with_target(set, phi, &target) {
            Ok(rep) => {
                let holes = rep.holes;
                let detail = match rep.isolated().find(|c| c.affine_dim == 2) {
                    Some(c) if holes == 0 => format!(
                        "VIOLATION: isolated singular point at ({:.6}, {:.6}) with 2-dimensional ∂u but no hole in the target",
                        c.representative.x, c.representative.y
                    ),
                    _ => format!("CONSISTENT: {} isolated component(s), {holes} hole(s)", rep.isolated_count()),
                };
                r.verdicts.push(Verdict::new("isolation", rep.consistent, detail));
                if let Some(e) = s.expect.isolated {
                    let n = rep.isolated_count();
                    r.verdicts.push(Verdict::new("isolation.count", n == e, format!("{n} isolated component(s), expected {e}")));
                }
                if let Some(e) = s.expect.isolated_dim {
                    let dims: Vec<u8> = rep.isolated().map(|c| c.affine_dim).collect();
                    let ok = !dims.is_empty() && dims.iter().all(|&d| d as usize == e);
                    r.verdicts.push(Verdict::new("isolation.affine_dim", ok, format!("affine dims {dims:?}, expected {e}")));
                }
                if holes == 0 {
                    for c in rep.components.iter().filter(|c| !c.is_isolated) {
                        let bound = PROPAGATION_FACTOR * h * hessian_bound(phi, c.representative);
                        match propagation_check(phi, mu, c.representative, PROPAGATION_RADIUS) {
                            Ok(gap) => {
                                r.propagation.push(PropagationRow { representative: c.representative, gap, bound });
                                r.verdicts.push(Verdict::at_most("propagation", "dist(∂u(x₀) vertices, nearby gradients)", gap, bound));
                            }
                            Err(e) => r.verdicts.push(Verdict::new("propagation", false, e.to_string())),
                        }
                    }
                }
                r.isolation = Some(rep);
            }
            Err(e) => r.verdicts.push(Verdict::new("isolation", false, e.to_string())),
        }
    }

    if s.runs(Analysis::Monotonicity) {
        let pairs = transport_pairs(phi, mu, s.samples.monotonicity, s.seed);
        let violation = c_monotonicity_check(cost, &pairs);
        r.verdicts.push(Verdict::at_most("monotonicity", "c(x₀,x̄₀)+c(x₁,x̄₁) - c(x₀,x̄₁) - c(x₁,x̄₀)", violation, MONOTONICITY_TOL));
        let mut swapped = 0.0;
        if phi.len() > 1 && pairs.len() > 1 {
            let shifted: Vec<(P, P)> = (0..pairs.len()).map(|i| (pairs[i].0, pairs[(i + 1) % pairs.len()].1)).collect();
            swapped = c_monotonicity_check(cost, &shifted);
            r.verdicts.push(Verdict::above("monotonicity.control", "swapped-assignment violation", swapped, 0.0));
        }
        r.monotonicity = Some(MonotonicityResult { pairs: pairs.len(), violation, swapped });
    }

    if s.runs(Analysis::Sections) {
        let spec = s.sections.as_ref().expect("validated");
        let x0 = P::new(spec.x0.0, spec.x0.1);
        let sd = subdifferential_at(phi, x0, h);
        let focus = match spec.focus {
            Focus::Point(x, y) => Ok(P::new(x, y)),
            Focus::Auto => cost.c_exp(x0, centroid(&sd.hull)),
        };
        let witness = witness(phi, &target, x0, &sd.hull);
        let built = focus.and_then(|f| spec.heights.iter().map(|&t| build_section(phi, mu, f, x0, t)).collect::<Result<Vec<_>>>().map(|v| (f, v)));
        match built {
            Ok((focus, sections)) => {
                r.verdicts.push(Verdict::new(
                    "sections",
                    true,
                    format!("{} section(s) at ({}, {}), focus ({:.6}, {:.6})", sections.len(), x0.x, x0.y, focus.x, focus.y),
                ));
                r.sections = Some(SectionFamily { x0, focus, sections, witness });
            }
            Err(e) => r.verdicts.push(Verdict::new("sections", false, e.to_string())),
        }
    }

    if s.runs(Analysis::Aleksandrov) {
        if let Some(fam) = &r.sections {
            let result = match &fam.witness {
                None => Err(OtError::InvalidWitness("no co-vector of ∂u(x₀) maps into the target support".into())),
                Some(w) => aleksandrov_check(phi, &fam.sections, w),
            };
            match &result {
                Ok(rows) => r.verdicts.push(aleksandrov_verdict(rows)),
                Err(e) => r.verdicts.push(Verdict::new("aleksandrov", false, e.to_string())),
            }
            r.aleksandrov = Some(result.map_err(|e| e.to_string()));
        }
    }

    if s.runs(Analysis::Cone) {
        if let Some(fam) = &r.sections {
            r.cone = fam.sections.par_iter().map(|sec| cone_row(phi, mu, sec)).collect();
            let interior_focus = target.contains(fam.focus) && boundary_distance(phi, fam.x0, -cost.grad_x(fam.x0, fam.focus)) > h;
            let mut checked = 0;
            for row in r.cone.iter().filter(|c| c.skipped.is_none()) {
                checked += 1;
                r.verdicts.push(Verdict::at_most(&format!("cone.inclusion[{}]", row.height), "dist(∂K(x₀), ∂u(S))", row.max_excess, row.slack));
                if row.height > 0.0 && interior_focus {
                    r.verdicts.push(Verdict::above(&format!("cone.interior[{}]", row.height), "interior margin", row.interior_margin, 0.0));
                }
            }
            if checked == 0 {
                r.verdicts.push(Verdict::new("cone", false, "no section away from the support boundary".into()));
            }
        }
    }
    r.solved = Some(solved);
    Ok(r)
}

/// The vertex (or centroid) of `∂u(x₀)` whose image lies deepest inside the
/// target support.
fn witness(phi: &DualPotential<f64>, target: &Region<f64>, x0: P, hull: &[CoVec2<f64>]) -> Option<Witness<f64>> {
    let mut cands = hull.to_vec();
    if !hull.is_empty() {
        cands.push(centroid(hull));
    }
    cands
        .into_iter()
        .filter(|&p| phi.cost.c_exp(x0, p).is_ok_and(|y| target.contains(y)))
        .map(|p| Witness { p, delta: boundary_distance(phi, x0, p) })
        .fold(None, |best: Option<Witness<f64>>, w| match best {
            Some(b) if b.delta >= w.delta => Some(b),
            _ => Some(w),
        })
}

/// Fits `C` on the tallest section and requires every other ratio to stay
/// within `ALEKSANDROV_SPREAD · C`.
fn aleksandrov_verdict(rows: &[AleksandrovRow<f64>]) -> Verdict {
    let Some(coarse) = rows.iter().filter(|r| r.gap > 0.0).max_by(|a, b| a.height.total_cmp(&b.height)) else {
        return Verdict::new("aleksandrov", true, "no section with positive gap".into());
    };
    let c = coarse.ratio;
    let worst = rows.iter().filter(|r| r.gap > 0.0).map(|r| r.ratio).fold(0.0, f64::max);
    let mut v = Verdict::at_most("aleksandrov", "gap²·ℓ/(min d(p₀,Π±)·|S|²)", worst, ALEKSANDROV_SPREAD * c);
    v.detail = format!("{} with C fitted at h = {}: C = {c:e}", v.detail, coarse.height);
    v
}

fn cone_row(phi: &DualPotential<f64>, mu: &SourceDensity<f64>, sec: &Section<f64>) -> ConeRow {
    let mut row = ConeRow {
        height: sec.height,
        checked: 0,
        max_excess: f64::NAN,
        slack: f64::NAN,
        interior_margin: f64::NAN,
        predicted_radius: f64::NAN,
        skipped: None,
    };
    let built = build_c_cone(phi, mu, sec, &CConeOptions::default()).and_then(|k| cone_inclusion(phi, mu, sec, &k).map(|inc| (k, inc)));
    match built {
        Ok((k, inc)) => {
            row.checked = inc.checked;
            row.max_excess = inc.max_excess;
            row.slack = inc.slack;
            row.interior_margin = k.interior_margin();
            row.predicted_radius = k.predicted_radius(sec.gap);
        }
        Err(e) => row.skipped = Some(e.to_string()),
    }
    row
}
