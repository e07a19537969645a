//! Runs every Rust listing in `book/src` as a doc-test.

macro_rules! chapter {
    ($name:ident, $file:literal) => {
        #[cfg(doctest)]
        #[doc = include_str!(concat!("../../../book/src/", $file))]
        pub struct $name;
    };
}

chapter!(Introduction, "introduction.md");
chapter!(Data, "data.md");
chapter!(Distances, "distances.md");
chapter!(Tests, "tests.md");
chapter!(Fisher, "fisher.md");
chapter!(Propagation, "propagation.md");
chapter!(Evaluation, "evaluation.md");
chapter!(Cli, "cli.md");
