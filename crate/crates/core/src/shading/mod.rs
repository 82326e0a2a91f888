//! Light Pass: analytic spotlight shading and the nocturnal grade.

pub mod brdf;
pub mod local;
pub mod night;

pub use brdf::{brdf_eval, BrdfSample};
pub use local::{shade_local, spot_attenuation, INVERSE_SQUARE_EPS};
pub use night::{adaptive_exposure, build_night_lut, darken_sky, NightLut};
