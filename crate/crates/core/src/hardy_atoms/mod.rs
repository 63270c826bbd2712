//! Local and nonlocal Hardy-space estimators, atoms and the moment-cancelling special function.

mod atoms;
mod blowup;
mod maximal;
mod special;

pub use atoms::{special_atom, validate_atom, validate_atom_with, AtomReport, AtomSpec, AtomVariant, MOMENT_TOL};
pub use blowup::{deposit, make_blowup_function, sample, BlowupMetadata, BlowupSpec, Placement};
pub use maximal::{
    check_resolvable, dilated_average, hp_norm, local_radial_maximal, max_resolvable_scale, Locality, RadialBump,
    CELLS_PER_WIDTH,
};
pub use special::{construct_special_function, monomial, multi_indices, QuadratureConfig, SpecialFunction};
