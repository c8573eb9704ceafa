//! The chapters of the guide in `book/src`, one module each, so that
//! `cargo test --doc -p rkadapt-guide` runs every Rust listing in the book.
//! A failing doc-test names the module, which names the chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/tableaux.md")]
pub mod tableaux {}
#[doc = include_str!("../../../book/src/linear-programs.md")]
pub mod linear_programs {}
#[doc = include_str!("../../../book/src/adaptation.md")]
pub mod adaptation {}
#[doc = include_str!("../../../book/src/integration.md")]
pub mod integration {}
#[doc = include_str!("../../../book/src/stability.md")]
pub mod stability {}
#[doc = include_str!("../../../book/src/command-line.md")]
pub mod command_line {}
