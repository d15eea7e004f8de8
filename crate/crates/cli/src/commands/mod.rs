pub mod distill;
pub mod eval;
pub mod stats;
pub mod sweep;
pub mod synth;
pub mod validate;
