//! End-to-end runs: prepare a diagram and tree, build the model, solve it
//! with a backend, decode, and cross-check against the oracle.

use std::time::Instant;

use serde::Serialize;

use crate::diagram::InfluenceDiagram;
use crate::error::{Error, Result};
use crate::inference::{cvar_of_distribution, evaluate_strategy, oracle_optimize_with, oracle_score, OracleOptions, OracleOutcome};
use crate::io::{strategy_to_file, StrategyFile};
use crate::mip::{build_model_with, model_stats, BuildOptions, MipModel, ModelStats};
use crate::risk::{Objective, RiskSpec};
use crate::rjt::{build_rjt, modify_rjt, RootedJunctionTree};
use crate::solve::{decode, solve_external, solve_reference_with, ExternalSolver, ReferenceOptions, Solution, Status};
use crate::transform::{merge_value_nodes_with, MergeOptions, MergedValueMap};

#[derive(Debug, Clone, Default)]
pub struct PrepareOptions {
    pub merge_values: bool,
    pub merge: MergeOptions,
    /// Explicit topological order by node name; default is the diagram's.
    pub order: Option<Vec<String>>,
    /// Targets for the cluster-targeting modification.
    pub modify: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub diagram: InfluenceDiagram,
    pub merged: Option<MergedValueMap>,
    pub tree: RootedJunctionTree,
}

pub fn prepare(d: &InfluenceDiagram, opts: &PrepareOptions) -> Result<Prepared> {
    d.ensure_valid()?;
    let (diagram, merged) = if opts.merge_values {
        let (m, map) = merge_value_nodes_with(d, &opts.merge)?;
        (m, Some(map))
    } else {
        (d.clone(), None)
    };
    let order = match &opts.order {
        Some(names) => diagram.order_from_names(names)?,
        None => diagram.topological_order()?,
    };
    let mut tree = build_rjt(&diagram, &order)?;
    if !opts.modify.is_empty() {
        let targets = opts.modify.iter().map(|n| diagram.id(n)).collect::<Result<Vec<_>>>()?;
        tree = modify_rjt(&tree, &diagram, &targets)?;
    }
    Ok(Prepared { diagram, merged, tree })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub objective: Objective,
    pub constraints: Vec<RiskSpec>,
}

impl Problem {
    pub fn meu() -> Self {
        Self {
            objective: Objective::Meu,
            constraints: Vec::new(),
        }
    }

    pub fn cvar(alpha: f64) -> Self {
        Self {
            objective: Objective::cvar(alpha),
            constraints: Vec::new(),
        }
    }

    pub fn with(mut self, spec: RiskSpec) -> Self {
        self.constraints.push(spec);
        self
    }
}

#[derive(Debug, Clone)]
pub enum Backend {
    Reference,
    External(ExternalSolver),
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Reference => "reference",
            Backend::External(_) => "external",
        }
    }

    /// Agreement tolerance against the oracle.
    pub fn tolerance(&self) -> f64 {
        match self {
            Backend::Reference => 1e-9,
            Backend::External(_) => 1e-6,
        }
    }
}

/// Caps and tolerances for every stage.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub build: BuildOptions,
    pub reference: ReferenceOptions,
    pub oracle: OracleOptions,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistributionSummary {
    pub atoms: usize,
    pub expected: f64,
    pub min: f64,
    pub max: f64,
    pub cvar: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub instance: String,
    pub objective_kind: String,
    pub backend: String,
    pub status: Status,
    pub objective: Option<f64>,
    pub strategy: Option<StrategyFile>,
    pub distribution: Option<DistributionSummary>,
    pub model_stats: ModelStats,
    pub wall_ms: f64,
    /// Whether the oracle's evaluation of the decoded strategy reproduces
    /// the objective; absent when the oracle is out of reach.
    pub verified: Option<bool>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Run {
    pub report: RunReport,
    pub model: MipModel,
    pub solution: Solution,
}

pub fn run(instance: &str, p: &Prepared, problem: &Problem, backend: &Backend, settings: &Settings) -> Result<Run> {
    let start = Instant::now();
    let d = &p.diagram;
    let model = build_model_with(d, &p.tree, &problem.objective, &problem.constraints, &settings.build)?;
    let solution = match backend {
        Backend::Reference => solve_reference_with(&model, d, &p.tree, &settings.reference)?,
        Backend::External(s) => solve_external(&model, s)?,
    };
    let mut report = RunReport {
        instance: instance.to_string(),
        objective_kind: problem.objective.to_string(),
        backend: backend.name().to_string(),
        status: solution.status,
        objective: solution.objective,
        strategy: None,
        distribution: None,
        model_stats: model_stats(&model),
        wall_ms: 0.0,
        verified: None,
        notes: solution.diagnostics.clone(),
    };
    if solution.is_optimal() {
        let decoded = decode(&solution, &model, d)?;
        report.strategy = Some(strategy_to_file(d, &decoded.strategy)?);
        match evaluate_strategy(d, &decoded.strategy) {
            Ok(dist) => {
                let cvar = match &problem.objective {
                    Objective::Cvar { alpha, value_node: None } => Some(cvar_of_distribution(&dist, *alpha)?.1),
                    _ => None,
                };
                let atoms = dist.atoms();
                report.distribution = Some(DistributionSummary {
                    atoms: atoms.len(),
                    expected: dist.expected(),
                    min: atoms.first().map_or(0.0, |a| a.0),
                    max: atoms.last().map_or(0.0, |a| a.0),
                    cvar,
                });
            }
            Err(Error::CapExceeded { .. }) => report.notes.push("distribution skipped: joint space above cap".into()),
            Err(e) => return Err(e),
        }
        match oracle_score(d, &decoded.strategy, &problem.objective, &problem.constraints) {
            Ok((value, feasible)) => {
                let obj = solution.objective.expect("optimal has objective");
                report.verified = Some(feasible && (value - obj).abs() <= backend.tolerance() * obj.abs().max(1.0));
            }
            Err(Error::CapExceeded { .. }) => report.notes.push("verification skipped: joint space above cap".into()),
            Err(e) => return Err(e),
        }
    }
    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(Run {
        report,
        model,
        solution,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BackendResult {
    pub backend: String,
    pub status: Status,
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub instance: String,
    pub objective_kind: String,
    pub oracle: BackendResult,
    pub backends: Vec<BackendResult>,
    /// Largest objective difference from the oracle (0 when all infeasible).
    pub gap: f64,
    pub agree: bool,
}

/// Runs the oracle and each backend; agreement requires identical status
/// and objectives within each backend's tolerance. Any unknown status
/// counts as disagreement.
pub fn compare(
    instance: &str,
    p: &Prepared,
    problem: &Problem,
    backends: &[Backend],
    settings: &Settings,
) -> Result<Comparison> {
    let d = &p.diagram;
    let oracle = match oracle_optimize_with(d, &problem.objective, &problem.constraints, &settings.oracle)? {
        OracleOutcome::Optimal(r) => BackendResult {
            backend: "oracle".into(),
            status: Status::Optimal,
            objective: Some(r.objective),
        },
        OracleOutcome::Infeasible { .. } => BackendResult {
            backend: "oracle".into(),
            status: Status::Infeasible,
            objective: None,
        },
    };
    let mut results = Vec::new();
    let mut gap: f64 = 0.0;
    let mut agree = true;
    for b in backends {
        let r = run(instance, p, problem, b, settings)?;
        let res = BackendResult {
            backend: b.name().into(),
            status: r.solution.status,
            objective: r.solution.objective,
        };
        match (oracle.objective, res.objective, res.status) {
            (Some(o), Some(x), Status::Optimal) => {
                gap = gap.max((o - x).abs());
                agree &= (o - x).abs() <= b.tolerance() * o.abs().max(1.0);
            }
            (None, _, Status::Infeasible) => {}
            _ => {
                agree = false;
                gap = f64::INFINITY;
            }
        }
        results.push(res);
    }
    Ok(Comparison {
        instance: instance.to_string(),
        objective_kind: problem.objective.to_string(),
        oracle,
        backends: results,
        gap,
        agree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{pig_farm, PigFarmSpec};

    #[test]
    fn reference_run_is_verified() {
        let p = prepare(&pig_farm(&PigFarmSpec::with_periods(2)), &PrepareOptions::default()).unwrap();
        let r = run("pig2", &p, &Problem::meu(), &Backend::Reference, &Settings::default()).unwrap();
        assert_eq!(r.report.status, Status::Optimal);
        assert_eq!(r.report.verified, Some(true));
        assert!(r.report.strategy.is_some());
    }

    #[test]
    fn compare_agrees_on_cvar() {
        let opts = PrepareOptions {
            merge_values: true,
            ..Default::default()
        };
        let p = prepare(&pig_farm(&PigFarmSpec::with_periods(2)), &opts).unwrap();
        let c = compare("pig2", &p, &Problem::cvar(0.15), &[Backend::Reference], &Settings::default()).unwrap();
        assert!(c.agree, "{c:?}");
        assert!(c.gap < 1e-9);
    }

    #[test]
    fn compare_fails_closed_on_unknown() {
        let p = prepare(&pig_farm(&PigFarmSpec::with_periods(1)), &PrepareOptions::default()).unwrap();
        let junk = Backend::External(ExternalSolver::new("echo status time_limit"));
        let c = compare("pig1", &p, &Problem::meu(), &[junk], &Settings::default()).unwrap();
        assert!(!c.agree);
    }

    #[test]
    fn modify_targets_reach_the_tree() {
        let opts = PrepareOptions {
            modify: ["H1", "H2", "H3", "H4"].map(String::from).to_vec(),
            ..Default::default()
        };
        let p = prepare(&pig_farm(&PigFarmSpec::default()), &opts).unwrap();
        let h4 = p.diagram.id("H4").unwrap();
        assert_eq!(p.tree.cluster(h4).members.len(), 5);
    }
}
