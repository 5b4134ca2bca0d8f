//! Unit-distance constructions for arbitrary norms on `R^d`.
//!
//! The crate builds, for a norm given as a gauge oracle, finite point sets
//! spanning roughly `(d/2) n log2 n` unit distances and checks every step of
//! the construction numerically or by exhaustive enumeration:
//!
//! - [`norm`]: gauge oracles, boundary normalization, the chord function
//!   `phi_w`, tangency detection and a strict-convexity probe.
//! - [`construct2d`]: the planar chord-length construction.
//! - [`general`]: boundary points whose chord values form an arithmetic
//!   progression, and the generator system built from them.
//! - [`gap`]: materialization of generalized arithmetic progressions,
//!   unit-distance counting and the two counting lemmas.
//! - [`composer`]: unions of translated copies for arbitrary `n`, ratio
//!   tables and the non-strictly-convex fallback.
//! - [`kdm`]: a crinkled-paraboloid unit ball whose unit-distance graph holds
//!   `K_{d,2n}`, with transversality and perturbation checks.
//! - [`lemmas`]: seeded fuzzing of the counting lemmas.
//! - [`io`]: JSON/CSV/SVG artifacts.

pub mod composer;
pub mod construct2d;
pub mod gap;
pub mod general;
pub mod io;
pub mod kdm;
pub mod lemmas;
pub mod norm;
mod tolerances;
mod vecops;

pub use tolerances::Tolerances;

/// Schema tag carried by every JSON document this crate writes.
pub const SCHEMA: &str = "udf/1";
