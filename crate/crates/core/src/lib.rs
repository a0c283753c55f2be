//! Heat, particle and entropy flows in a two-branch tight-binding device coupled to
//! two thermal baths and a local dephasing observer.

pub mod bath;
pub mod dynamics;
pub mod error;
pub mod extended;
pub mod lattice;
pub mod linalg;
pub mod operators;
pub mod output;
pub mod sweep;
pub mod thermo;
pub mod validate;
