//! Answers from a [`MipModel`]: the exhaustive reference backend, LP export
//! and an external-solver bridge, plus decoding of solutions back into
//! strategies and distributions.

mod external;
mod lp;
mod reference;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::diagram::{DecisionRule, InfluenceDiagram, Strategy};
use crate::error::{Error, Result};
use crate::inference::UtilityDistribution;
use crate::mip::{MipModel, VarId};

pub use external::{solve_external, ExternalSolver, SolutionFormat, SOLVER_ENV};
pub use lp::{export_lp, lp_names, MAX_LP_NAME};
pub use reference::{propagate, solve_reference, solve_reference_with, ReferenceOptions};

/// Row slack accepted from external solvers.
pub const EXTERNAL_TOL: f64 = 1e-6;
/// Row slack used by the reference backend.
pub const REFERENCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unknown,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Source {
    Reference,
    External(String),
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Reference => f.write_str("reference"),
            Source::External(cmd) => write!(f, "external({cmd})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: Status,
    /// One value per model variable; empty unless a point was produced.
    pub values: Vec<f64>,
    pub objective: Option<f64>,
    pub source: Source,
    pub diagnostics: Vec<String>,
    /// Reference backend only: every strategy tied for the optimum, in
    /// lexicographic order.
    pub optimal_set: Vec<Strategy>,
    /// Reference backend only: strategies evaluated.
    pub evaluated: u128,
}

impl Solution {
    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.index()]
    }

    pub fn value_of(&self, model: &MipModel, name: &str) -> Option<f64> {
        model.var_by_name(name).and_then(|v| self.values.get(v.index()).copied())
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

/// A solution translated back into diagram terms.
#[derive(Debug, Clone)]
pub struct Decoded {
    pub strategy: Strategy,
    /// Utility distribution read off the measured value node's cluster, when
    /// the model has a CVaR block or a single value node.
    pub distribution: Option<UtilityDistribution>,
    /// Cluster root name to `mu` table in cluster configuration order.
    pub mu: BTreeMap<String, Vec<f64>>,
}

/// Distance from {0, 1} tolerated on decision binaries.
pub const BINARY_TOL: f64 = 1e-6;

pub fn decode(sol: &Solution, model: &MipModel, d: &InfluenceDiagram) -> Result<Decoded> {
    if sol.status != Status::Optimal {
        return Err(Error::Decode(format!("solution status is {}", sol.status)));
    }
    if sol.values.len() != model.variables().len() {
        return Err(Error::Decode("solution does not match the model".into()));
    }
    let mut rules = Vec::new();
    for b in &model.catalog().delta {
        let mut choices = Vec::with_capacity(b.configs);
        for cfg in 0..b.configs {
            let mut chosen = None;
            for s in 0..b.states {
                let v = b.var(cfg, s);
                let x = sol.value(v);
                if x.abs().min((x - 1.0).abs()) > BINARY_TOL {
                    return Err(Error::Decode(format!(
                        "{} = {x} is not within {BINARY_TOL} of 0 or 1",
                        model.variable(v).name
                    )));
                }
                if x > 0.5 {
                    if chosen.is_some() {
                        return Err(Error::Decode(format!(
                            "decision `{}` picks two states for configuration {cfg}",
                            d.name(b.decision)
                        )));
                    }
                    chosen = Some(s);
                }
            }
            choices.push(chosen.ok_or_else(|| {
                Error::Decode(format!("decision `{}` picks no state for configuration {cfg}", d.name(b.decision)))
            })?);
        }
        rules.push(DecisionRule {
            decision: d.name(b.decision).to_string(),
            choices,
        });
    }
    let strategy = Strategy::new(d, rules)?;

    let measured = match model.cvar_blocks().first() {
        Some(b) => Some(b.value_node),
        None => match d.value_nodes()[..] {
            [v] => Some(v),
            _ => None,
        },
    };
    let distribution = measured.map(|v| {
        let block = model.catalog().mu(v);
        let pos = block.indexer.position(v).expect("root is a member");
        let u = d.utilities(v).expect("value node has utilities");
        UtilityDistribution::from_pairs(
            (0..block.indexer.total()).map(|cfg| (u[block.indexer.digit(cfg, pos)], sol.value(block.var(cfg)))),
        )
    });

    let mu = model
        .catalog()
        .mu
        .iter()
        .map(|b| (d.name(b.root).to_string(), b.vars().map(|v| sol.value(v)).collect()))
        .collect();
    Ok(Decoded {
        strategy,
        distribution,
        mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{pig_farm, PigFarmSpec};
    use crate::inference::{cvar_of_distribution, expected_utility};
    use crate::mip::build_model;
    use crate::risk::Objective;
    use crate::rjt::build_rjt;
    use crate::transform::merge_value_nodes;

    #[test]
    fn decoded_strategy_reevaluates_to_objective() {
        let d = pig_farm(&PigFarmSpec::with_periods(2));
        let t = build_rjt(&d, &d.topological_order().unwrap()).unwrap();
        let m = build_model(&d, &t, &Objective::Meu, &[]).unwrap();
        let sol = solve_reference(&m, &d, &t).unwrap();
        let dec = decode(&sol, &m, &d).unwrap();
        let eu = expected_utility(&d, &dec.strategy).unwrap();
        assert!((eu - sol.objective.unwrap()).abs() < 1e-9);
        assert!(dec.distribution.is_none());
        assert_eq!(dec.mu.len(), d.len());
    }

    #[test]
    fn merged_cvar_distribution_matches_objective() {
        let (d, _) = merge_value_nodes(&pig_farm(&PigFarmSpec::with_periods(2))).unwrap();
        let t = build_rjt(&d, &d.topological_order().unwrap()).unwrap();
        let m = build_model(&d, &t, &Objective::cvar(0.15), &[]).unwrap();
        let sol = solve_reference(&m, &d, &t).unwrap();
        let dec = decode(&sol, &m, &d).unwrap();
        let (_, cvar) = cvar_of_distribution(dec.distribution.as_ref().unwrap(), 0.15).unwrap();
        assert!((cvar - sol.objective.unwrap()).abs() < 1e-6);
    }

    #[test]
    fn fractional_delta_is_rejected() {
        let d = pig_farm(&PigFarmSpec::with_periods(1));
        let t = build_rjt(&d, &d.topological_order().unwrap()).unwrap();
        let m = build_model(&d, &t, &Objective::Meu, &[]).unwrap();
        let mut sol = solve_reference(&m, &d, &t).unwrap();
        let v = m.var_by_name("delta_D1_0_0").unwrap();
        sol.values[v.index()] = 0.5;
        assert!(matches!(decode(&sol, &m, &d), Err(Error::Decode(_))));
    }
}
