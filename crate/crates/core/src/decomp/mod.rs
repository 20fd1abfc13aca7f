//! Anisotropic decomposition machinery: rescaling frames, scale cascades,
//! pairing reductions, gauge-graded symbol splitting, parameter-space
//! covers with block coordinates, and decoupling/projection diagnostics.

pub mod cover;
pub mod decouple;
pub mod frame;
pub mod gauge;
pub mod project;
pub mod recursion;
pub mod schedule;
pub mod split;

pub use cover::{
    block_assignment_check, block_coordinates, covering_block, reverse_cover,
    sample_admissible_points, AdmissiblePoint, BlockAssignment, BlockMap, CoverBlock,
};
pub use decouple::{
    decoupling_ratio, mc_decoupling_ratio, DecouplingRatios, SupportPredicate,
};
pub use frame::{rescale_at, scaling_frame, shift_scale_matrix, FrameMeta, LinearFrame};
pub use gauge::{combine_log2, gauge_terms_log2, term_exponent, GaugeContext};
pub use project::{frame_projection, projection_sum_ratio};
pub use recursion::{expand_pairings, reduce_pairings, y_coords};
pub use schedule::{delta_schedule, Log2Scale, ScaleSchedule};
pub use split::{
    leading_split_bounds, mu_piece, mu_range, split_by_gauge, split_by_leading_coefficient,
    GaugePiece, LeadingBounds,
};
