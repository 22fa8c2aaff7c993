//! File formats, the experiment harness, the image-dictionary demo and the
//! command-line front end for `l4dict-core`.

pub mod cli;
pub mod experiments;
pub mod imaging;
pub mod io;
pub mod verify;
