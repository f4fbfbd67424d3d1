//! Scenario files shipped with the crate.

use crate::costs::CostFunction;
use crate::error::{OtError, Result};
use crate::scenario::spec::Scenario;

pub const PRESETS: [(&str, &str); 6] = [
    ("theorem/annulus", include_str!("../../presets/theorem/annulus.cfg")),
    ("theorem/split_pair", include_str!("../../presets/theorem/split_pair.cfg")),
    ("theorem/convex_square", include_str!("../../presets/theorem/convex_square.cfg")),
    ("estimates/annulus", include_str!("../../presets/estimates/annulus.cfg")),
    ("estimates/pyramid", include_str!("../../presets/estimates/pyramid.cfg")),
    ("two_point", include_str!("../../presets/two_point.cfg")),
];

pub fn preset_text(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".cfg").unwrap_or(name);
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn preset(name: &str) -> Result<Scenario> {
    Scenario::parse(preset_text(name).ok_or_else(|| OtError::Invalid(format!("unknown preset `{name}`")))?)
}

/// Structural and Loeper checks of `cost` on its preset domains.
pub fn cost_scenario(cost: CostFunction, samples: usize) -> Scenario {
    let (src, tgt) = cost.preset_domains();
    let text = format!(
        "name = verify-cost/{id}\ncost = {id}\nsource.region = {src}\ntarget.region = {tgt}\ntarget.points = 1\n\
         analyses = structural, loeper\nsamples.structural = {samples}\nsamples.loeper = {samples}\n",
        id = cost.id()
    );
    Scenario::parse(&text).expect("generated scenario is valid")
}
