//! Scenario files, the experiment runner and its CSV/SVG artifacts.

pub mod config;
pub mod export;
pub mod presets;
pub mod run;
pub mod spec;
pub mod svg;

pub use config::Config;
pub use export::export_csv;
pub use presets::preset;
pub use run::{run_scenario, RunReport, Verdict};
pub use spec::{Analysis, Scenario};
pub use svg::{render_all, render_svg, Layer};
