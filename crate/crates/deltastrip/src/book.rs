//! Compiles and runs every Rust snippet in the guide under `book/` as a
//! doc-test, so the prose can never drift from the library.

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/cell-problem.md")]
    mod cell_problem {}
    #[doc = include_str!("../../../book/src/boxes.md")]
    mod boxes {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
