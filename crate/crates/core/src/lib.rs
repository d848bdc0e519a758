pub mod behavior;
pub mod config;
pub mod dynamics;
pub mod env;
pub mod eval;
pub mod qnet;
pub mod traffic_graph;
pub mod trajlog;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/centrality.md")]
    mod centrality {}
    #[doc = include_str!("../../../book/src/behavior.md")]
    mod behavior {}
    #[doc = include_str!("../../../book/src/environment.md")]
    mod environment {}
    #[doc = include_str!("../../../book/src/qnet.md")]
    mod qnet {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
