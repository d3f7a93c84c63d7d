//! Limited-memory influence diagrams solved as mixed-integer linear programs
//! over gradual rooted junction trees, with expected-utility and CVaR
//! objectives and chance, logical, budget and CVaR constraints.
//!
//! The usual pipeline:
//!
//! ```no_run
//! use limid_rjt::prelude::*;
//!
//! let d = pig_farm(&PigFarmSpec::default());
//! let (d, _) = merge_value_nodes(&d).unwrap();
//! let order = d.topological_order().unwrap();
//! let tree = build_rjt(&d, &order).unwrap();
//! let model = build_model(&d, &tree, &Objective::Meu, &[]).unwrap();
//! let sol = solve_reference(&model, &d, &tree).unwrap();
//! println!("{}", sol.objective.unwrap());
//! ```

pub mod diagram;
pub mod error;
pub mod generators;
pub mod indexer;
pub mod inference;
pub mod io;
pub mod cli;
pub mod mip;
pub mod pipeline;
pub mod risk;
pub mod solve;
pub mod rjt;
pub mod transform;

pub use error::{Error, Result};

/// The names most programs need.
pub mod prelude {
    pub use crate::diagram::{DiagramBuilder, InfluenceDiagram, NodeId, NodeKind, Strategy};
    pub use crate::error::{Error, Result};
    pub use crate::generators::{n_monitoring, pig_farm, random_diagram, NMonitoringSpec, PigFarmSpec, RandomDiagramSpec};
    pub use crate::inference::{cvar_of_distribution, evaluate_strategy, expected_utility, oracle_optimize, OracleOutcome};
    pub use crate::io::{read_diagram, strategy_to_json, write_diagram};
    pub use crate::mip::{build_base_model, build_model, model_stats, MipModel};
    pub use crate::pipeline::{compare, prepare, run, Backend, PrepareOptions, Problem, Settings};
    pub use crate::risk::{CvarMode, Objective, RiskSpec, Sense};
    pub use crate::rjt::{build_rjt, modify_rjt, validate_rjt, RootedJunctionTree};
    pub use crate::solve::{decode, export_lp, solve_external, solve_reference, ExternalSolver, Solution, Status};
    pub use crate::transform::merge_value_nodes;
}
