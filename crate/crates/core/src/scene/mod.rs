//! Frames, cameras, color transfer and the on-disk formats.

pub mod camera;
pub mod color;
pub mod frame;
pub mod io;
pub mod pfm;

pub use camera::CameraModel;
pub use color::{linear_to_srgb, srgb_to_linear};
pub use frame::{GBufferFrame, LinearImage, SparseDepthPoint};
pub use io::{load_linear_image, load_sequence, save_frame, Sequence, SequenceManifest};
