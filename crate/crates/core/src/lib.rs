//! Time-dependent mixed-fleet vehicle routing with shared delivery locations.

pub mod error;
pub mod alns;
pub mod eval;
pub mod experiments;
pub mod instance;
pub mod ls;
pub mod milp;
pub mod solution;
pub mod solver;
pub mod travel_time;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    struct Overview;
    #[doc = include_str!("../../../book/src/instances.md")]
    struct Instances;
    #[doc = include_str!("../../../book/src/travel-time.md")]
    struct TravelTime;
    #[doc = include_str!("../../../book/src/route-eval.md")]
    struct RouteEval;
    #[doc = include_str!("../../../book/src/alns.md")]
    struct Alns;
    #[doc = include_str!("../../../book/src/local-search.md")]
    struct LocalSearch;
    #[doc = include_str!("../../../book/src/solver.md")]
    struct Solver;
    #[doc = include_str!("../../../book/src/exact.md")]
    struct Exact;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
