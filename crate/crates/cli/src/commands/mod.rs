//! The four subcommands. Each returns the lines it wants printed, the files
//! it wrote, and whether every exact identity held.

use std::path::PathBuf;

pub mod bench;
pub mod certify;
pub mod converge;
pub mod evolve;

#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
    /// False only when an exact identity failed.
    pub success: bool,
}

pub(crate) fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}
