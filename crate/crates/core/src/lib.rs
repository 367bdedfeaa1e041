pub mod analysis;
pub mod banded;
pub mod eigen;
pub mod error;
pub mod fields;
pub mod grid;
pub mod height;
pub mod laminar;
pub mod numeric;
pub mod stencil;
pub mod verdict;
pub mod vorticity;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/solving.md")]
    mod solving {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
}
