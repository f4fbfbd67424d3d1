//! Semi-discrete optimal transport: densities, dual potentials, Laguerre
//! cells and the damped Newton solver.

pub mod density;
pub mod laguerre;
pub mod potential;
pub mod solver;

pub use density::{DensitySpec, DiscreteTarget, SourceDensity, TargetSampling};
pub use laguerre::{laguerre_assign, pixel_candidates, pixel_cells, scan_pixels, square_cells, tile_candidates, pushforward_check, LaguerreTessellation, Piece, PixelCells};
pub use potential::{Activity, DualPotential};
pub use solver::{solve_dual, SolveError, Solution, SolverOptions};
