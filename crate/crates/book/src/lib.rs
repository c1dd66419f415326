//! The guide in `book/` is plain mdBook markdown. mdBook cannot test listings
//! that depend on workspace crates, so each chapter is pulled in here as a
//! module doc and its listings run as ordinary doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/getting-started.md")]
pub mod getting_started {}
#[doc = include_str!("../../../book/src/index.md")]
pub mod index {}
#[doc = include_str!("../../../book/src/term-matching.md")]
pub mod term_matching {}
#[doc = include_str!("../../../book/src/quantization.md")]
pub mod quantization {}
#[doc = include_str!("../../../book/src/scoring.md")]
pub mod scoring {}
#[doc = include_str!("../../../book/src/executor.md")]
pub mod executor {}
#[doc = include_str!("../../../book/src/links.md")]
pub mod links {}
#[doc = include_str!("../../../book/src/two-tower.md")]
pub mod two_tower {}
#[doc = include_str!("../../../book/src/service.md")]
pub mod service {}
#[doc = include_str!("../../../book/src/configuration.md")]
pub mod configuration {}
#[doc = include_str!("../../../book/src/file-formats.md")]
pub mod file_formats {}
