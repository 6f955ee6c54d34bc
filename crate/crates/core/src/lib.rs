pub mod controller;
pub mod error;
pub mod geometry;
pub mod oracle;
pub mod preview;
pub mod simulator;
pub mod spec;
pub mod synthesis;
pub mod systems;

pub use error::{Error, Result};

// The guide's code blocks run as doc-tests through these modules.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/preview.md")]
    mod preview {}
    #[doc = include_str!("../../../book/src/polytopes.md")]
    mod polytopes {}
    #[doc = include_str!("../../../book/src/winning-sets.md")]
    mod winning_sets {}
    #[doc = include_str!("../../../book/src/controller.md")]
    mod controller {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
