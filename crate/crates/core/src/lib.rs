//! Broken-ray (V-line) Radon transform on regular lattices.
//!
//! The transform integrates a field along every broken ray with a fixed pair of
//! ray directions. Accumulating the sinogram along the cone axis gives the cone
//! integral `F(x) = ∫_{x + cone} f`, and the field is recovered from `F` by
//! alternating corner sums over shrinking parallelograms spanned by the
//! generators. The same machinery covers weighted rays and polyhedral cones in
//! three dimensions, and the corner sums double as the pre-measure used by the
//! range diagnostics.
//!
//! Module map:
//!
//! - [`geometry`]: cone frames, cone coordinates, bounding boxes, parallelograms.
//! - [`field`]: lattices, multilinear sampling, phantoms, metrics, file I/O.
//! - [`forward`]: ray, broken-ray, weighted and polyhedral forward transforms.
//! - [`calculus`]: cone-integral accumulation and cone differentiation.
//! - [`range`]: pre-measure, monotonicity and absolute-continuity diagnostics.
//!
//! Per-lattice-point work runs on rayon when the `parallel` feature is on
//! (default) and sequentially otherwise; results are identical either way.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the linear algebra they implement.
#![allow(clippy::needless_range_loop)]

pub mod calculus;
pub mod error;
pub mod exec;
pub mod field;
pub mod forward;
pub mod geometry;
pub mod quad;
pub mod range;

pub use calculus::{
    accumulate, accumulate_cone_integral, accumulate_nd, accumulate_weighted, alpha_derivative_check,
    alternating_average, cone_integral_oracle, directional_stencil, invert, invert_alt_known,
    invert_mixed_partial, invert_shrinking, ConeIntegralField, DiffMode, DiffScheme, Provenance,
};
pub use error::{Error, Result};
pub use field::{compare_fields, make_phantom, FieldMetrics, Grid, PhantomSpec, PointFunction, ScalarField};
pub use forward::{
    forward_broken_ray, forward_perpendicular, forward_polyhedral, forward_weighted, integrate_ray,
    Sinogram,
};
pub use geometry::{
    cone_exit_parameter, BoundingBox, ConeFrame, ConeFrame2, ConeFrameN, Frame, FrameSpec,
    Parallelogram, WeightedFrame2,
};
pub use range::{
    abscont_check, monotonicity_check, premeasure, range_membership, total_mass, RangeReport, RangeTolerances,
};
