//! A laboratory for the boundary of supercritical Galton-Watson trees.
//!
//! The crate covers the whole pipeline from offspring laws to exact cover
//! costs: Ulam-Harris trees ([`tree`]), offspring laws and their size-biased
//! versions ([`offspring`]), seeded samplers ([`sampler`]), the martingale
//! limit and branching-measure ball masses ([`branching`]), the tail of `W`
//! and the Hawkes gauge ([`tail`], [`gauge`]), spine quantities and density
//! ratios ([`spine`]), minimal ball covers ([`hausdorff`]) and Monte Carlo /
//! exact-enumeration checks of the size-bias identities ([`identity`]).
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::len_without_is_empty
)]

pub mod branching;
pub mod error;
pub mod gauge;
pub mod hausdorff;
pub mod identity;
pub mod offspring;
pub mod parallel;
pub mod sampler;
pub mod spine;
pub mod stats;
pub mod tail;
pub mod tree;
pub mod word;

pub use branching::{ball_mass, radius_to_generation, w_field, BallId, BallRelation, RadiusClass, WField};
pub use error::{Error, Result};
pub use gauge::Gauge;
pub use hausdorff::{comparison_check, min_cover_cost, CoverSolution, Verdict};
pub use identity::{folklore_check, keyformula_mc, sizebias_law_enumerate, FunctionalSpec, McConfig};

pub use offspring::{offspring, Family, HypStatus, OffspringDistribution, SizeBiasedLaw};
pub use sampler::{GwSampler, Purpose, RngStream, SpineStep, SpineTree, SubtreeDepth};
pub use spine::{density_ratios, DensityTrace, RatioReport, ThinRayConfig};
pub use stats::Comparison;
pub use stats::Estimate;
pub use tail::{EmpiricalTail, TailInverse, TailModel};

pub use tree::{TreeRecords, TruncatedTree, Violation};
pub use word::{meet, Word};
