//! Forward and inverse spectral problems for Sturm–Liouville operators with
//! frozen arguments on a star graph.

pub mod error;
pub mod scalar;
pub mod potential;
pub mod edge;
pub mod graph;
pub mod spectrum;
pub mod kernel;
pub mod inverse;
pub mod fd;
pub mod config;
pub mod io;
pub mod run;

pub use error::{Error, ErrorClass, Result};
pub use potential::{Alpha, EdgeSpec, GraphSpec, PotentialFn};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/potentials.md")]
    mod potentials {}
    #[doc = include_str!("../../../book/src/charfn.md")]
    mod charfn {}
    #[doc = include_str!("../../../book/src/spectrum.md")]
    mod spectrum {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/inverse.md")]
    mod inverse {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
