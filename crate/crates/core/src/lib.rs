//! Edge-masked self-similarity graphs (SSGs) and the self-similarity loss
//! (SSL) between a ground-truth image and its reconstruction.
//!
//! * [`edge_mask`] picks graph centers with a thresholded Laplacian.
//! * [`ssg`] builds the per-center similarity distributions (reference loops).
//! * [`loss`] evaluates KL + L1 between two graphs and back-propagates it to
//!   reconstruction pixels.
//! * [`fast_kernel`] is the tiled, parallel equivalent of the graph and
//!   backward computations.

pub mod backend;
pub mod bench;
pub mod cli;
pub mod config;
pub mod edge_mask;
pub mod error;
pub mod fast_kernel;
pub mod field;
pub mod image_io;
pub mod loss;
pub mod optimize;
pub mod ssg;
pub mod synth;

pub use backend::Backend;
pub use config::{CompositeWeights, Mode, SsgConfig};
pub use edge_mask::{compute_edge_mask, laplacian, EdgeMask};
pub use error::{Error, Result};
pub use fast_kernel::{compute_ssg_fast, ssl_backward_fast, KernelPlan};
pub use field::{read_field, write_field, Field, FieldRef};
pub use image_io::{from_unit, load_image, save_image, to_unit, Image, ImageU8};
pub use loss::{composite_total, ssl_backward, ssl_forward, GradientField, LossReport};
pub use optimize::{toy_optimize, Optimized};
pub use ssg::{compute_ssg_oracle, estimate_cost, patch_distance, sample_offsets, similarity, Ssg};
