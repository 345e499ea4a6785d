pub mod analyze;
pub mod atoms;
pub mod denoise;
pub mod learn;
pub mod project;
pub mod pursue;
pub mod synth;
pub mod tools;
