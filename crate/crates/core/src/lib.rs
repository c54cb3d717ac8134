//! Train dispatching by path-based column generation over maximal conflict
//! cliques.
//!
//! The pipeline: [`model`] describes infrastructure and services,
//! [`profiles`] turns them into timed speed-profiles, [`conflicts`] derives
//! headway intervals and halting conditions, [`cliques`] maintains the
//! conflict graph over generated train paths, [`pricing`] and [`master`] are
//! the two halves of the column generation run by [`driver`], and
//! [`harness`] runs disturbed scenario batches.

pub mod check;
pub mod cliques;
pub mod conflicts;
pub mod driver;
pub mod harness;
pub mod master;
pub mod model;
pub mod path;
pub mod pricing;
pub mod profiles;
