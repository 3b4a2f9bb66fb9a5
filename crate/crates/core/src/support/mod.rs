//! Overhang kernels, supported-element detection and the quadratic
//! self-supporting constraint.

mod bench;
mod detect;
mod kernel;

pub use bench::{benchmark_detection, random_field, DetectionTiming};
pub use detect::{
    constraint_sensitivity, constraint_value, detect_supported, enumerate_supported,
    unsupported_set, DetectionParams, Detector, SupportMask,
};
pub use kernel::{build_kernel, default_layers, OverhangKernel};
