//! Symbolic regression with gene-pool optimal mixing over fixed-shape
//! expression templates, plus a tree-based GP baseline and an interleaved
//! multistart scheme.

pub mod data;
pub mod gomea;
pub mod gptrad;
pub mod harness;
pub mod ims;
pub mod infix;
pub mod linkage;
pub mod model;
pub mod tree;

// The guide's snippets run as doc-tests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/representation.md")]
    mod representation {}
    #[doc = include_str!("../../../book/src/fitness.md")]
    mod fitness {}
    #[doc = include_str!("../../../book/src/linkage.md")]
    mod linkage {}
    #[doc = include_str!("../../../book/src/constants.md")]
    mod constants {}
    #[doc = include_str!("../../../book/src/gom.md")]
    mod gom {}
    #[doc = include_str!("../../../book/src/ims.md")]
    mod ims {}
    #[doc = include_str!("../../../book/src/baseline.md")]
    mod baseline {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
