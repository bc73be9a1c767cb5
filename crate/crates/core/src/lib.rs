//! Worst-case-optimal retrofit and recovery planning against tornado paths
//! modeled as bounded-length segments.
//!
//! The solver minimizes pre-tornado dislocation plus the worst case over all
//! realizable tornado coverages of the best achievable post-tornado
//! dislocation, subject to a shared retrofit-plus-recovery budget. The outer
//! loop ([`ccg`]) alternates a plan-selection MIP with the worst-case
//! subproblem ([`dbc`]), which itself leans on a computational-geometry
//! kernel ([`geometry`]) to decide which coverage vectors a single segment
//! can realize.

pub mod bench;
pub mod ccg;
pub mod dbc;
pub mod geojson;
pub mod geometry;
pub mod milp;
pub mod model;
pub mod params;
pub mod second_stage;
