//! The guide in `book/` is an mdbook, and mdbook cannot run samples that
//! depend on workspace crates. Each chapter is included here as the doc
//! comment of an empty module, so `cargo test` runs every sample as a doctest
//! and a failure names the chapter it came from.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/subshifts.md")]
pub mod subshifts {}
#[doc = include_str!("../../../book/src/potentials.md")]
pub mod potentials {}
#[doc = include_str!("../../../book/src/operators.md")]
pub mod operators {}
#[doc = include_str!("../../../book/src/rates.md")]
pub mod rates {}
#[doc = include_str!("../../../book/src/large_deviations.md")]
pub mod large_deviations {}
#[doc = include_str!("../../../book/src/spectral_scan.md")]
pub mod spectral_scan {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
