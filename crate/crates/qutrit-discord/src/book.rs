//! The user guide, embedded as module documentation.
//!
//! Each module below carries one chapter of the mdBook under `book/` in the
//! repository root (`mdbook build book` renders it). Because the chapters
//! are included here verbatim, every Rust snippet in the book compiles and
//! runs as a doc-test: the guide cannot drift from the code.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/states.md")]
pub mod states {}

#[doc = include_str!("../../../book/src/correlations.md")]
pub mod correlations {}

#[doc = include_str!("../../../book/src/spin-register.md")]
pub mod spin_register {}

#[doc = include_str!("../../../book/src/readout.md")]
pub mod readout {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
