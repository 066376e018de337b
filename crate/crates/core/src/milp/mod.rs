//! Exact apparatus: LP-file export of the routing MILP and a brute-force
//! enumeration solver for tiny instances.

mod brute;
mod export;

pub use brute::{brute_force, ExactRoute, ExactSolution, BRUTE_FORCE_GUARD};
pub use export::{
    arc_var_name, decode_routes, export_milp, horizon_pieces, MilpModel, Row, Sense, Var, VarKind,
    EXPORT_GUARD,
};
