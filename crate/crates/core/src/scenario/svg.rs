//! Deterministic SVG 1.1 renderings of a run. Source-side layers are drawn
//! on the source raster (one unit per pixel, `y` up); the subdifferential
//! layer is drawn on the target raster.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{OtError, Result};
use crate::geometry::{Grid, Region};
use crate::linalg::Point2;
use crate::scenario::run::RunReport;
use crate::singular::subdifferential_at;
use crate::transport::laguerre::{laguerre_assign, LaguerreTessellation, NO_CELL};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layer {
    Cells,
    Singular,
    Subdiff,
    Section,
}

impl Layer {
    pub const ALL: [Layer; 4] = [Layer::Cells, Layer::Singular, Layer::Subdiff, Layer::Section];

    pub fn id(self) -> &'static str {
        match self {
            Layer::Cells => "cells",
            Layer::Singular => "singular",
            Layer::Subdiff => "subdiff",
            Layer::Section => "section",
        }
    }
}

/// Display size of the longer side, in user units.
const CANVAS: usize = 768;

struct Canvas {
    grid: Grid<f64>,
    body: String,
}

impl Canvas {
    fn new(grid: Grid<f64>) -> Self {
        Self { grid, body: String::new() }
    }

    /// SVG coordinates of a world point.
    fn map(&self, p: Point2<f64>) -> (f64, f64) {
        let g = &self.grid;
        let x = p.x / g.h - g.i0 as f64 + 0.5;
        let y = g.ny as f64 - (p.y / g.h - g.j0 as f64 + 0.5);
        (x, y)
    }

    /// Horizontal runs of pixels with equal `key`; `None` is left blank.
    fn runs(&mut self, key: impl Fn(usize) -> Option<u32>, fill: impl Fn(u32) -> String, extra: &str) {
        let g = self.grid;
        for iy in 0..g.ny {
            let y = g.ny - 1 - iy;
            let mut ix = 0;
            while ix < g.nx {
                let k = key(g.index(ix, iy));
                let start = ix;
                while ix < g.nx && key(g.index(ix, iy)) == k {
                    ix += 1;
                }
                if let Some(k) = k {
                    let _ = writeln!(self.body, r#"<rect x="{start}" y="{y}" width="{}" height="1" fill="{}"{extra}/>"#, ix - start, fill(k));
                }
            }
        }
    }

    fn polygon(&mut self, pts: &[Point2<f64>], style: &str) {
        let coords: Vec<String> = pts
            .iter()
            .map(|&p| {
                let (x, y) = self.map(p);
                format!("{x:.4},{y:.4}")
            })
            .collect();
        let _ = writeln!(self.body, r#"<polygon points="{}" {style}/>"#, coords.join(" "));
    }

    fn dot(&mut self, p: Point2<f64>, r: f64, style: &str) {
        let (x, y) = self.map(p);
        let _ = writeln!(self.body, r#"<circle cx="{x:.4}" cy="{y:.4}" r="{r}" {style}/>"#);
    }

    fn finish(self, title: &str) -> String {
        let g = self.grid;
        let scale = (CANVAS / g.nx.max(g.ny)).max(1);
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" shape-rendering=\"crispEdges\">\n\
             <title>{title}</title>\n\
             <rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n{}</svg>\n",
            g.nx * scale,
            g.ny * scale,
            g.nx,
            g.ny,
            g.nx,
            g.ny,
            self.body
        )
    }
}

/// Well-separated colour for cell `k` (golden-angle hue walk).
fn color(k: u32) -> String {
    let hue = (k as f64 * 137.507_764_050_037_85) % 360.0;
    let (r, g, b) = hsl(hue, 0.55, 0.62);
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn gray(k: u32) -> String {
    let v = 200 + (k.wrapping_mul(2_654_435_761) >> 27) as u8;
    format!("#{v:02x}{v:02x}{v:02x}")
}

fn hsl(h: f64, s: f64, l: f64) -> (u8, u8, u8) {
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    let q = |v: f64| ((v + m) * 255.0).round() as u8;
    (q(r), q(g), q(b))
}

fn cell_key(t: &LaguerreTessellation<f64>) -> impl Fn(usize) -> Option<u32> + '_ {
    |p| Some(t.assignment[p]).filter(|&a| a != NO_CELL)
}

fn missing(layer: Layer) -> OtError {
    OtError::MissingLayer(layer.id().into())
}

fn region_key(r: &Region<f64>) -> impl Fn(usize) -> Option<u32> + '_ {
    |p| (r.coverage[p] > 0.0).then_some(0)
}

pub fn render_svg(report: &RunReport, layer: Layer) -> Result<String> {
    let sol = report.solved.as_ref().ok_or_else(|| missing(layer))?;
    let title = format!("{} / {}", report.scenario.name, layer.id());
    match layer {
        Layer::Cells => {
            let t = laguerre_assign(&sol.phi, &sol.mu);
            let mut c = Canvas::new(t.grid);
            c.runs(cell_key(&t), color, "");
            Ok(c.finish(&title))
        }
        Layer::Singular => {
            let sr = report.singular.as_ref().ok_or_else(|| missing(layer))?;
            let t = laguerre_assign(&sol.phi, &sol.mu);
            let mut c = Canvas::new(t.grid);
            c.runs(cell_key(&t), gray, "");
            let mut marks = vec![false; t.grid.len()];
            for sp in &sr.set.pixels {
                marks[sp.pixel] = true;
            }
            c.runs(|p| marks[p].then_some(0), |_| "#d62728".into(), "");
            if let Some(iso) = &report.isolation {
                for v in iso.isolated() {
                    c.dot(v.representative, 6.0, r##"fill="none" stroke="#d62728" stroke-width="1""##);
                }
            }
            Ok(c.finish(&title))
        }
        Layer::Subdiff => {
            let iso = report.isolation.as_ref().ok_or_else(|| missing(layer))?;
            let target = &sol.phi.target.parent;
            let mut c = Canvas::new(target.grid);
            c.runs(region_key(target), |_| "#e6e6e6".into(), "");
            let h = sol.mu.h();
            for v in &iso.components {
                let sd = subdifferential_at(&sol.phi, v.representative, h);
                let image: Vec<Point2<f64>> = sd.hull.iter().filter_map(|&p| sol.phi.cost.c_exp(v.representative, p).ok()).collect();
                let stroke = if v.is_isolated { "#d62728" } else { "#1f77b4" };
                c.polygon(&image, &format!(r#"fill="{stroke}" fill-opacity="0.25" stroke="{stroke}" stroke-width="0.5""#));
            }
            for &y in &sol.phi.target.points {
                c.dot(y, 0.4, r##"fill="#333333""##);
            }
            Ok(c.finish(&title))
        }
        Layer::Section => {
            let fam = report.sections.as_ref().ok_or_else(|| missing(layer))?;
            let t = laguerre_assign(&sol.phi, &sol.mu);
            let mut c = Canvas::new(t.grid);
            c.runs(cell_key(&t), gray, "");
            let mut depth = vec![0u32; t.grid.len()];
            for s in &fam.sections {
                for &p in &s.pixels {
                    depth[p] += 1;
                }
            }
            const BLUES: [&str; 4] = ["#c6dbef", "#9ecae1", "#6baed6", "#3182bd"];
            c.runs(|p| (depth[p] > 0).then_some(depth[p]), |d| BLUES[(d as usize - 1).min(3)].into(), "");
            for s in &fam.sections {
                let mut edge = vec![false; t.grid.len()];
                for &p in &s.boundary {
                    edge[p] = true;
                }
                c.runs(|p| edge[p].then_some(0), |_| "#08306b".into(), "");
            }
            c.dot(fam.x0, 1.5, r##"fill="#d62728""##);
            Ok(c.finish(&title))
        }
    }
}

/// Writes every layer the report supports as `<layer>.svg`.
pub fn render_all(report: &RunReport, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for layer in Layer::ALL {
        if let Ok(svg) = render_svg(report, layer) {
            let path = dir.join(format!("{}.svg", layer.id()));
            std::fs::write(&path, svg)?;
            out.push(path);
        }
    }
    Ok(out)
}
