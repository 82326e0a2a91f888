//! Deterministic G-buffer weather and relighting for driving-video frames.
//!
//! A sequence of per-frame intrinsic buffers (metric depth, normals, albedo,
//! roughness, metallic and semantic masks) is edited in two passes:
//!
//! * a **Geometry Pass** that mutates the buffers themselves (snow cover,
//!   puddles, wet asphalt, rippled normals, precipitation overlays), and
//! * a **Light Pass** that resolves radiance analytically over the edited
//!   buffers (spotlight Cook-Torrance shading, single-scattering fog, the
//!   nocturnal tone curve).
//!
//! Supporting stages recover metric depth scale ([`calibration`]) and place
//! static street-light emitters from masks ([`lights`]). [`compose::run_pipeline`]
//! fixes the pass order; [`cli`] is the batch front end.

pub mod calibration;
pub mod cli;
pub mod compose;
pub mod config;
pub mod error;
pub mod fixture;
pub mod fog;
pub mod lights;
pub mod math;
pub mod noise;
pub mod particles;
pub mod rain;
pub mod scene;
pub mod shading;
pub mod snow;
pub mod spatial;

pub use error::{Error, Result};
pub use math::{Rgb, Vec3};
