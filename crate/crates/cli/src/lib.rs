//! Front-end plumbing for the `vorotop` binary: TOML run configs in
//! unit-height coordinates, built-in presets, mask images, output writers,
//! and the gradient self-check. Everything numerical lives in the `vorotop`
//! core crate; this layer only converts units and moves bytes.

pub mod config;
pub mod emit;
pub mod gradcheck;
pub mod mask;
pub mod presets;
