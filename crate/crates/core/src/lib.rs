//! Training-free cell architecture search: initialization-time indicators,
//! a hardware cost model and a supernet pruning search.

pub mod bench;
pub mod error;
pub mod hardware;
mod json;
pub mod nn;
pub mod proxies;
pub mod rng;
pub mod search;
pub mod space;
pub mod tensor;

pub use error::{Error, ErrorKind, Result};
pub use nn::{Network, NetworkBuilder};
pub use space::{CellArch, MacroConfig, OpKind, SupernetState};
pub use tensor::Tensor;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/index.md")]
    pub mod index {}
    #[doc = include_str!("../../../book/src/search_space.md")]
    pub mod search_space {}
    #[doc = include_str!("../../../book/src/autodiff.md")]
    pub mod autodiff {}
    #[doc = include_str!("../../../book/src/kernel_conditioning.md")]
    pub mod kernel_conditioning {}
    #[doc = include_str!("../../../book/src/linear_regions.md")]
    pub mod linear_regions {}
    #[doc = include_str!("../../../book/src/hardware.md")]
    pub mod hardware {}
    #[doc = include_str!("../../../book/src/search.md")]
    pub mod search {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
