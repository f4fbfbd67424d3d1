//! Regions, rasterization, holes, convex hulls and c-convexity of sets.

pub mod cconvex;
pub mod holes;
pub mod hull;
pub mod polygon;
pub mod region;

pub use cconvex::{c_convex_wrt, c_segment, c_segment_bar, convexity_wrt, CSegment, ConvexityReport, Side};
pub use holes::{detect_holes, Hole, HoleReport};
pub use polygon::Polygon;
pub use region::{Grid, Region, Shape};
