//! The book's chapters as doc comments, so that `cargo test` runs every
//! listing in `book/src`. One module per chapter keeps failures traceable.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}
#[doc = include_str!("../../../book/src/instances.md")]
pub mod instances {}
#[doc = include_str!("../../../book/src/shapefit.md")]
pub mod shapefit_chapter {}
#[doc = include_str!("../../../book/src/shapekick.md")]
pub mod shapekick {}
#[doc = include_str!("../../../book/src/lud.md")]
pub mod lud {}
#[doc = include_str!("../../../book/src/oracle.md")]
pub mod oracle {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
#[doc = include_str!("../../../book/src/formats.md")]
pub mod formats {}
