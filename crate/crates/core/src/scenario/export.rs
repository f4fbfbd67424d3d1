//! CSV artifacts of a run. Every real number is printed with 12 significant
//! digits; rows are in a fixed order so identical runs give identical bytes.
//!
//! | file              | columns |
//! |-------------------|---------|
//! | `verdicts.csv`    | name, status, detail |
//! | `solver.csv`      | residual, iterations, converged, error |
//! | `tessellation.csv`| pixel, ix, iy, x, y, cell |
//! | `masses.csv`      | index, x, y, target_mass, mass, error |
//! | `potential.csv`   | index, lambda |
//! | `structural.csv`  | cost, source_samples, target_samples, twist_collisions, min_abs_det, min_mtw, mtw_samples, invalid_pairs |
//! | `holes.csv`       | hole, pixels, area |
//! | `singular.csv`    | pixel, x, y, component, affine_dim, jump, diameter |
//! | `components.csv`  | component, size, x, y, is_isolated, affine_dim |
//! | `propagation.csv` | x, y, gap, bound |
//! | `estimates.csv`   | scenario, height, gap, volume, ell, d_minus, d_plus, ratio, loeper_max, monotonicity_max |
//! | `cone.csv`        | height, checked, max_excess, slack, interior_margin, predicted_radius, skipped |

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::scenario::run::RunReport;
use crate::transport::laguerre::{laguerre_assign, NO_CELL};

pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn write(dir: &Path, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>, out: &mut Vec<PathBuf>) -> io::Result<()> {
    let path = dir.join(name);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    out.push(path);
    Ok(())
}

/// Writes one CSV per analysis that ran and returns their paths.
pub fn export_csv(report: &RunReport, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    let status = |p: bool| if p { "PASS" } else { "FAIL" }.to_string();
    write(dir, "verdicts.csv", &["name", "status", "detail"], report.verdicts.iter().map(|v| vec![v.name.clone(), status(v.pass), v.detail.clone()]), &mut out)?;

    if let Some(s) = &report.solve {
        let row = vec![num(s.residual), s.iterations.to_string(), s.converged.to_string(), s.error.clone().unwrap_or_default()];
        write(dir, "solver.csv", &["residual", "iterations", "converged", "error"], [row], &mut out)?;
    }
    if let Some(sol) = &report.solved {
        let tess = laguerre_assign(&sol.phi, &sol.mu);
        let g = tess.grid;
        let rows = tess.assignment.iter().enumerate().filter(|(_, &a)| a != NO_CELL).map(|(p, &a)| {
            let (ix, iy) = g.coords(p);
            let c = g.center(p);
            vec![p.to_string(), ix.to_string(), iy.to_string(), num(c.x), num(c.y), a.to_string()]
        });
        write(dir, "tessellation.csv", &["pixel", "ix", "iy", "x", "y", "cell"], rows, &mut out)?;
        let t = &sol.phi.target;
        let rows = (0..t.len()).map(|j| {
            let y = t.points[j];
            vec![j.to_string(), num(y.x), num(y.y), num(t.weights[j]), num(sol.masses[j]), num(sol.masses[j] - t.weights[j])]
        });
        write(dir, "masses.csv", &["index", "x", "y", "target_mass", "mass", "error"], rows, &mut out)?;
        let rows = sol.phi.lambda.iter().enumerate().map(|(j, l)| vec![j.to_string(), num(*l)]);
        write(dir, "potential.csv", &["index", "lambda"], rows, &mut out)?;
    }
    if let Some(s) = &report.structural {
        let row = vec![
            s.cost.id().to_string(),
            s.source_samples.to_string(),
            s.target_samples.to_string(),
            s.twist_collisions.to_string(),
            num(s.min_abs_det),
            num(s.min_mtw),
            s.mtw_samples.to_string(),
            s.invalid_pairs.to_string(),
        ];
        let header = ["cost", "source_samples", "target_samples", "twist_collisions", "min_abs_det", "min_mtw", "mtw_samples", "invalid_pairs"];
        write(dir, "structural.csv", &header, [row], &mut out)?;
    }
    if let Some(h) = &report.holes {
        let rows = h.holes.iter().enumerate().map(|(k, hole)| vec![k.to_string(), hole.pixels.len().to_string(), num(hole.area)]);
        write(dir, "holes.csv", &["hole", "pixels", "area"], rows, &mut out)?;
    }
    if let Some(sr) = &report.singular {
        let s = &sr.set;
        let labels = s.labels();
        let rows = s.pixels.iter().enumerate().map(|(k, sp)| {
            let c = s.grid.center(sp.pixel);
            vec![sp.pixel.to_string(), num(c.x), num(c.y), labels[k].to_string(), sr.dims[k].to_string(), num(sp.jump), num(sp.diameter)]
        });
        write(dir, "singular.csv", &["pixel", "x", "y", "component", "affine_dim", "jump", "diameter"], rows, &mut out)?;
    }
    if let Some(iso) = &report.isolation {
        let rows = iso.components.iter().enumerate().map(|(k, c)| {
            vec![k.to_string(), c.size.to_string(), num(c.representative.x), num(c.representative.y), c.is_isolated.to_string(), c.affine_dim.to_string()]
        });
        write(dir, "components.csv", &["component", "size", "x", "y", "is_isolated", "affine_dim"], rows, &mut out)?;
        if !report.propagation.is_empty() {
            let rows = report.propagation.iter().map(|p| vec![num(p.representative.x), num(p.representative.y), num(p.gap), num(p.bound)]);
            write(dir, "propagation.csv", &["x", "y", "gap", "bound"], rows, &mut out)?;
        }
    }
    let loeper = report.loeper;
    let mono = report.monotonicity.map(|m| m.violation);
    if report.sections.is_some() || loeper.is_some() || mono.is_some() {
        let name = &report.scenario.name;
        let header = ["scenario", "height", "gap", "volume", "ell", "d_minus", "d_plus", "ratio", "loeper_max", "monotonicity_max"];
        let mut rows = Vec::new();
        match &report.sections {
            Some(fam) => {
                let ratios: Option<&Vec<_>> = report.aleksandrov.as_ref().and_then(|r| r.as_ref().ok());
                for (k, s) in fam.sections.iter().enumerate() {
                    let (dm, dp) = s.plane_distances();
                    let ratio = ratios.and_then(|r| r.get(k)).map(|r| r.ratio);
                    rows.push(vec![name.clone(), num(s.height), num(s.gap), num(s.volume), num(s.ell), num(dm), num(dp), opt(ratio), opt(loeper), opt(mono)]);
                }
            }
            None => rows.push(vec![name.clone(), String::new(), String::new(), String::new(), String::new(), String::new(), String::new(), String::new(), opt(loeper), opt(mono)]),
        }
        write(dir, "estimates.csv", &header, rows, &mut out)?;
    }
    if !report.cone.is_empty() {
        let rows = report.cone.iter().map(|c| {
            vec![num(c.height), c.checked.to_string(), num(c.max_excess), num(c.slack), num(c.interior_margin), num(c.predicted_radius), c.skipped.clone().unwrap_or_default()]
        });
        write(dir, "cone.csv", &["height", "checked", "max_excess", "slack", "interior_margin", "predicted_radius", "skipped"], rows, &mut out)?;
    }
    Ok(out)
}
