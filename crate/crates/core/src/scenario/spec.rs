use std::fmt::Write as _;

use crate::costs::CostFunction;
use crate::error::{OtError, Result};
use crate::geometry::Region;
use crate::scenario::config::Config;
use crate::transport::{DensitySpec, TargetSampling};

pub const MIN_RESOLUTION: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Analysis {
    Structural,
    Holes,
    Singular,
    Isolation,
    Loeper,
    Monotonicity,
    Sections,
    Aleksandrov,
    Cone,
}

impl Analysis {
    pub const ALL: [Analysis; 9] = [
        Analysis::Structural,
        Analysis::Holes,
        Analysis::Singular,
        Analysis::Isolation,
        Analysis::Loeper,
        Analysis::Monotonicity,
        Analysis::Sections,
        Analysis::Aleksandrov,
        Analysis::Cone,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Analysis::Structural => "structural",
            Analysis::Holes => "holes",
            Analysis::Singular => "singular",
            Analysis::Isolation => "isolation",
            Analysis::Loeper => "loeper",
            Analysis::Monotonicity => "monotonicity",
            Analysis::Sections => "sections",
            Analysis::Aleksandrov => "aleksandrov",
            Analysis::Cone => "cone",
        }
    }

    pub fn needs_solution(self) -> bool {
        !matches!(self, Analysis::Structural | Analysis::Holes | Analysis::Loeper)
    }

    /// Analyses that must run first.
    fn prerequisites(self) -> &'static [Analysis] {
        match self {
            Analysis::Isolation => &[Analysis::Singular, Analysis::Holes],
            Analysis::Aleksandrov | Analysis::Cone => &[Analysis::Sections],
            _ => &[],
        }
    }
}

impl std::str::FromStr for Analysis {
    type Err = OtError;

    fn from_str(s: &str) -> Result<Self> {
        Analysis::ALL
            .into_iter()
            .find(|a| a.id() == s.trim())
            .ok_or_else(|| OtError::Invalid(format!("unknown analysis `{}`", s.trim())))
    }
}

/// Where the focus of the section family comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Focus {
    /// `c-Exp(x₀, p̄₀)` with `p̄₀` the vertex centroid of `∂u(x₀)`.
    Auto,
    Point(f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SectionSpec {
    pub x0: (f64, f64),
    pub focus: Focus,
    pub heights: Vec<f64>,
}

/// Optional expected outcomes, each turned into a verdict.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Expectations {
    pub isolated: Option<usize>,
    pub holes: Option<usize>,
    pub singular_nonempty: Option<bool>,
    /// Affine dimension of `∂u` at every isolated representative.
    pub isolated_dim: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    pub structural: usize,
    pub loeper: usize,
    pub monotonicity: usize,
}

impl Default for Samples {
    fn default() -> Self {
        Self { structural: 10_000, loeper: 10_000, monotonicity: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub cost: CostFunction,
    pub source_region: String,
    pub source_density: String,
    pub target_region: String,
    pub target_points: String,
    pub resolution: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Requested analyses plus prerequisites, in execution order.
    pub analyses: Vec<Analysis>,
    pub seed: u64,
    pub samples: Samples,
    pub sections: Option<SectionSpec>,
    pub expect: Expectations,
}

fn numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| OtError::Invalid(format!("bad number `{}`", t.trim()))))
        .collect()
}

fn point(s: &str) -> Result<(f64, f64)> {
    let inner = s.trim().strip_prefix('(').and_then(|r| r.strip_suffix(')')).unwrap_or(s);
    match numbers(inner)?.as_slice() {
        [x, y] => Ok((*x, *y)),
        _ => Err(OtError::Invalid(format!("expected a point `(x,y)`, got `{s}`"))),
    }
}

fn call<'a>(s: &'a str, name: &str) -> Option<&'a str> {
    s.strip_prefix(name)?.trim_start().strip_prefix('(')?.strip_suffix(')')
}

/// `N`, `count(N)`, `lattice(s)`, `polar(s,growth)`, `random(N)` or an
/// explicit list `(x,y[,w]);(x,y[,w]);…`.
pub fn parse_points(s: &str, seed: u64) -> Result<TargetSampling> {
    let s = s.trim();
    let one = |a: &str| -> Result<f64> {
        match numbers(a)?.as_slice() {
            [v] => Ok(*v),
            _ => Err(OtError::Invalid(format!("expected one argument in `{s}`"))),
        }
    };
    let count = |v: f64| -> Result<usize> {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(OtError::Invalid(format!("point count must be a positive integer in `{s}`")))
        }
    };
    if let Ok(n) = s.parse::<usize>() {
        return Ok(TargetSampling::Count(count(n as f64)?));
    }
    if let Some(a) = call(s, "count") {
        return Ok(TargetSampling::Count(count(one(a)?)?));
    }
    if let Some(a) = call(s, "random") {
        return Ok(TargetSampling::Random { count: count(one(a)?)?, seed });
    }
    if let Some(a) = call(s, "lattice") {
        return Ok(TargetSampling::Lattice { spacing: one(a)? });
    }
    if let Some(a) = call(s, "polar") {
        return match numbers(a)?.as_slice() {
            [sp, g] => Ok(TargetSampling::Polar { spacing: *sp, growth: *g }),
            _ => Err(OtError::Invalid("polar takes (spacing, growth)".into())),
        };
    }
    if s.starts_with('(') {
        let pts = s
            .split(';')
            .map(|item| {
                let t = item.trim();
                let inner = t.strip_prefix('(').and_then(|r| r.strip_suffix(')')).ok_or_else(|| OtError::Invalid(format!("bad point `{t}`")))?;
                match numbers(inner)?.as_slice() {
                    [x, y] => Ok((*x, *y, 1.0)),
                    [x, y, w] => Ok((*x, *y, *w)),
                    _ => Err(OtError::Invalid(format!("bad point `{t}`"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(TargetSampling::Explicit(pts));
    }
    Err(OtError::Invalid(format!("unknown target points `{s}`")))
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_config(&Config::parse(text)?)
    }

    pub fn from_config(c: &Config) -> Result<Self> {
        let name = c.require::<String>("name")?;
        let cost = c.get_with("cost", |v| v.parse::<CostFunction>())?.ok_or_else(|| missing("cost"))?;
        let resolution = c.get::<usize>("mesh.resolution")?.unwrap_or(256);
        if resolution < MIN_RESOLUTION {
            return Err(OtError::Config { line: c.line("mesh.resolution"), msg: format!("mesh.resolution must be ≥ {MIN_RESOLUTION}") });
        }
        let seed = c.get::<u64>("seed")?.unwrap_or(0);
        let source_region = c.get_with("source.region", |v| Region::<f64>::parse(v, MIN_RESOLUTION).map(|_| v.to_string()))?;
        let source_region = source_region.unwrap_or_else(|| "square".into());
        let source_density = c.get_with("source.density", |v| v.parse::<DensitySpec>().map(|_| v.to_string()))?;
        let source_density = source_density.unwrap_or_else(|| "uniform".into());
        let target_region = c.get_with("target.region", |v| Region::<f64>::parse(v, MIN_RESOLUTION).map(|_| v.to_string()))?;
        let target_region = target_region.ok_or_else(|| missing("target.region"))?;
        let target_points = c.get_with("target.points", |v| parse_points(v, seed).map(|_| v.to_string()))?;
        let target_points = target_points.ok_or_else(|| missing("target.points"))?;
        let tol = c.get::<f64>("solver.tol")?.unwrap_or(1e-9);
        if !(tol > 0.0) {
            return Err(OtError::Config { line: c.line("solver.tol"), msg: "solver.tol must be positive".into() });
        }
        let max_iter = c.get::<usize>("solver.max_iter")?.unwrap_or(60);
        let requested = c
            .get_with("analyses", |v| v.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect::<Result<Vec<Analysis>>>())?
            .unwrap_or_default();
        let mut analyses = Vec::new();
        for a in requested {
            analyses.extend_from_slice(a.prerequisites());
            analyses.push(a);
        }
        analyses.sort();
        analyses.dedup();

        let d = Samples::default();
        let samples = Samples {
            structural: c.get("samples.structural")?.unwrap_or(d.structural),
            loeper: c.get("samples.loeper")?.unwrap_or(d.loeper),
            monotonicity: c.get("samples.monotonicity")?.unwrap_or(d.monotonicity),
        };

        let x0 = c.get_with("sections.x0", point)?;
        let focus = c.get_with("sections.focus", |v| if v.trim() == "auto" { Ok(Focus::Auto) } else { point(v).map(|(x, y)| Focus::Point(x, y)) })?;
        let heights = c.get_with("sections.heights", |v| {
            let h = numbers(v)?;
            if h.iter().any(|t| !(*t >= 0.0)) {
                return Err(OtError::Invalid("heights must be nonnegative".into()));
            }
            Ok(h)
        })?;
        let wants_sections = analyses.contains(&Analysis::Sections);
        let sections = match (x0, heights) {
            (Some(x0), Some(heights)) => Some(SectionSpec { x0, focus: focus.unwrap_or(Focus::Auto), heights }),
            (None, None) if !wants_sections => None,
            _ => return Err(OtError::Config { line: c.line("sections.x0").max(c.line("sections.heights")), msg: "sections need both sections.x0 and sections.heights".into() }),
        };

        let expect = Expectations {
            isolated: c.get("expect.isolated")?,
            holes: c.get("expect.holes")?,
            singular_nonempty: c.get_with("expect.singular", |v| match v {
                "empty" => Ok(false),
                "nonempty" => Ok(true),
                _ => Err(OtError::Invalid("expected `empty` or `nonempty`".into())),
            })?,
            isolated_dim: c.get("expect.isolated_dim")?,
        };
        c.finish()?;
        Ok(Self {
            name,
            cost,
            source_region,
            source_density,
            target_region,
            target_points,
            resolution,
            tol,
            max_iter,
            analyses,
            seed,
            samples,
            sections,
            expect,
        })
    }

    pub fn source(&self) -> Result<Region<f64>> {
        Region::parse(&self.source_region, self.resolution)
    }

    pub fn target(&self) -> Result<Region<f64>> {
        Region::parse(&self.target_region, self.resolution)
    }

    pub fn density(&self) -> Result<DensitySpec> {
        self.source_density.parse()
    }

    pub fn sampling(&self) -> Result<TargetSampling> {
        parse_points(&self.target_points, self.seed)
    }

    pub fn runs(&self, a: Analysis) -> bool {
        self.analyses.contains(&a)
    }

    /// Canonical config text; parsing it gives back `self`.
    pub fn to_config(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("name", self.name.clone());
        kv("cost", self.cost.id().into());
        kv("seed", self.seed.to_string());
        kv("source.region", self.source_region.clone());
        kv("source.density", self.source_density.clone());
        kv("target.region", self.target_region.clone());
        kv("target.points", self.target_points.clone());
        kv("mesh.resolution", self.resolution.to_string());
        kv("solver.tol", format!("{:e}", self.tol));
        kv("solver.max_iter", self.max_iter.to_string());
        kv("analyses", self.analyses.iter().map(|a| a.id()).collect::<Vec<_>>().join(","));
        kv("samples.structural", self.samples.structural.to_string());
        kv("samples.loeper", self.samples.loeper.to_string());
        kv("samples.monotonicity", self.samples.monotonicity.to_string());
        if let Some(sec) = &self.sections {
            kv("sections.x0", format!("({},{})", sec.x0.0, sec.x0.1));
            kv(
                "sections.focus",
                match sec.focus {
                    Focus::Auto => "auto".into(),
                    Focus::Point(x, y) => format!("({x},{y})"),
                },
            );
            kv("sections.heights", sec.heights.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","));
        }
        if let Some(v) = self.expect.isolated {
            kv("expect.isolated", v.to_string());
        }
        if let Some(v) = self.expect.holes {
            kv("expect.holes", v.to_string());
        }
        if let Some(v) = self.expect.singular_nonempty {
            kv("expect.singular", if v { "nonempty" } else { "empty" }.into());
        }
        if let Some(v) = self.expect.isolated_dim {
            kv("expect.isolated_dim", v.to_string());
        }
        s
    }
}

fn missing(key: &str) -> OtError {
    OtError::Config { line: 0, msg: format!("missing required key `{key}`") }
}
