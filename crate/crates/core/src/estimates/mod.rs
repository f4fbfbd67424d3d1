//! Numerical checks of the inequalities behind the regularity argument.

pub mod cone;
pub mod inequalities;
pub mod section;

pub use cone::{aleksandrov_check, build_c_cone, cone_inclusion, validate_witness, AleksandrovRow, CConeFn, CConeOptions, ConeInclusion, Witness};
pub use inequalities::{c_monotonicity_check, loeper_check, loeper_sweep, loeper_tuples, transport_pairs, LoeperTuple};
pub use section::{build_section, contact_set, Section};
