//! Exhaustive backend: once the decision binaries are fixed, the cluster
//! marginals are determined by the model rows, so every strategy can be
//! scored by propagating probabilities down the tree and checking rows.

use rayon::prelude::*;

use crate::diagram::{InfluenceDiagram, NodeId, NodeKind, Strategy};
use crate::error::{Error, Result};
use crate::inference::{StrategySpace, DEFAULT_STRATEGY_CAP};
use crate::mip::MipModel;
use crate::rjt::RootedJunctionTree;

use super::{Solution, Source, Status, REFERENCE_TOL};

#[derive(Debug, Clone)]
pub struct ReferenceOptions {
    pub strategy_cap: u128,
    /// Row slack when checking each propagated point.
    pub tol: f64,
    /// Relative tolerance under which objectives count as tied.
    pub tie_tol: f64,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self {
            strategy_cap: DEFAULT_STRATEGY_CAP,
            tol: REFERENCE_TOL,
            tie_tol: 1e-12,
        }
    }
}

/// Per-cluster index tables for propagation.
struct Step {
    root: NodeId,
    parent: Option<NodeId>,
    /// Cluster configuration -> configuration of the cluster minus its root.
    rest: Vec<usize>,
    rest_total: usize,
    /// Parent cluster configuration -> configuration of `rest`.
    from_parent: Vec<usize>,
    /// Cluster configuration -> configuration of the root's parents.
    parent_cfg: Vec<usize>,
    /// Cluster configuration -> state of the root.
    state: Vec<usize>,
}

struct Propagator {
    steps: Vec<Step>,
}

impl Propagator {
    fn new(model: &MipModel, d: &InfluenceDiagram, t: &RootedJunctionTree) -> Result<Self> {
        if model.catalog().mu.len() != d.len() {
            return Err(Error::Model("model was built for a different diagram".into()));
        }
        let mut steps = Vec::with_capacity(d.len());
        for j in t.top_down() {
            let block = model.catalog().mu(j);
            if block.indexer.scope() != t.cluster(j).members.as_slice() {
                return Err(Error::Model(format!("model cluster C_{} differs from the tree", d.name(j))));
            }
            let rest_scope: Vec<NodeId> = block.indexer.scope().iter().copied().filter(|&x| x != j).collect();
            let rest_ix = d.indexer(&rest_scope);
            let parent = t.parent(j);
            let from_parent = match parent {
                Some(i) => {
                    let pix = &model.catalog().mu(i).indexer;
                    if rest_scope.iter().any(|x| pix.position(*x).is_none()) {
                        return Err(Error::Model(format!("cluster C_{} is not gradual", d.name(j))));
                    }
                    pix.projection_table(&rest_ix)
                }
                None if rest_scope.is_empty() => Vec::new(),
                None => return Err(Error::Model(format!("top cluster C_{} has extra members", d.name(j)))),
            };
            let pos = block.indexer.position(j).expect("root is a member");
            steps.push(Step {
                root: j,
                parent,
                rest: block.indexer.projection_table(&rest_ix),
                rest_total: rest_ix.total(),
                from_parent,
                parent_cfg: block.indexer.projection_table(&d.parent_indexer(j)),
                state: (0..block.indexer.total()).map(|c| block.indexer.digit(c, pos)).collect(),
            });
        }
        Ok(Self { steps })
    }

    fn run(&self, model: &MipModel, d: &InfluenceDiagram, s: &Strategy, values: &mut [f64]) -> Result<()> {
        let rules = s.resolve(d)?;
        let mut marginal = Vec::new();
        for step in &self.steps {
            marginal.clear();
            marginal.resize(step.rest_total, 0.0);
            match step.parent {
                Some(i) => {
                    let pb = model.catalog().mu(i);
                    for (cfg, &r) in step.from_parent.iter().enumerate() {
                        marginal[r] += values[pb.var(cfg).index()];
                    }
                }
                None => marginal[0] = 1.0,
            }
            let block = model.catalog().mu(step.root);
            let rule = rules[step.root.index()];
            for cfg in 0..step.state.len() {
                let (pc, sj) = (step.parent_cfg[cfg], step.state[cfg]);
                let factor = match (d.kind(step.root), rule) {
                    (NodeKind::Decision, Some(r)) => (r[pc] == sj) as u8 as f64,
                    (NodeKind::Decision, None) => unreachable!("resolved strategies cover every decision"),
                    _ => d.prob(step.root, pc, sj),
                };
                values[block.var(cfg).index()] = marginal[step.rest[cfg]] * factor;
            }
        }
        for b in &model.catalog().delta {
            let r = rules[b.decision.index()].expect("decision has a rule");
            for cfg in 0..b.configs {
                for st in 0..b.states {
                    values[b.var(cfg, st).index()] = (r[cfg] == st) as u8 as f64;
                }
            }
        }
        for block in model.cvar_blocks() {
            block.fill(values)?;
        }
        Ok(())
    }
}

/// The full variable assignment the model rows force for strategy `s`:
/// cluster marginals, decision binaries and the canonical CVaR variables.
pub fn propagate(model: &MipModel, d: &InfluenceDiagram, t: &RootedJunctionTree, s: &Strategy) -> Result<Vec<f64>> {
    let p = Propagator::new(model, d, t)?;
    let mut values = vec![0.0; model.variables().len()];
    p.run(model, d, s, &mut values)?;
    Ok(values)
}

pub fn solve_reference(model: &MipModel, d: &InfluenceDiagram, t: &RootedJunctionTree) -> Result<Solution> {
    solve_reference_with(model, d, t, &ReferenceOptions::default())
}

/// Scores every strategy by propagation, keeps those whose point satisfies
/// all rows, and returns the best; ties go to the lexicographically
/// smallest strategy.
pub fn solve_reference_with(
    model: &MipModel,
    d: &InfluenceDiagram,
    t: &RootedJunctionTree,
    opts: &ReferenceOptions,
) -> Result<Solution> {
    let space = StrategySpace::new(d, opts.strategy_cap)?;
    let prop = Propagator::new(model, d, t)?;
    let n = model.variables().len();
    let scores: Vec<Option<f64>> = (0..space.count() as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |values, i| -> Result<Option<f64>> {
                prop.run(model, d, &space.get(i as u128), values)?;
                let ok = model.violations(values, opts.tol).is_empty();
                Ok(ok.then(|| model.objective_value(values)))
            },
        )
        .collect::<Result<_>>()?;

    let best = scores.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let feasible = scores.iter().flatten().count();
    let mut solution = Solution {
        status: Status::Infeasible,
        values: Vec::new(),
        objective: None,
        source: Source::Reference,
        diagnostics: vec![format!("{feasible} of {} strategies feasible", space.count())],
        optimal_set: Vec::new(),
        evaluated: space.count(),
    };
    if feasible == 0 {
        return Ok(solution);
    }
    let tie = opts.tie_tol * best.abs().max(1.0);
    let winners: Vec<u128> = (0..scores.len())
        .filter(|&i| scores[i].is_some_and(|v| v >= best - tie))
        .map(|i| i as u128)
        .collect();
    let mut values = vec![0.0; n];
    prop.run(model, d, &space.get(winners[0]), &mut values)?;
    solution.status = Status::Optimal;
    solution.objective = Some(model.objective_value(&values));
    solution.values = values;
    solution.optimal_set = winners.into_iter().map(|i| space.get(i)).collect();
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{pig_farm, PigFarmSpec};
    use crate::inference::{joint_marginal, oracle_optimize};
    use crate::mip::{build_base_model, build_model, Family};
    use crate::risk::{Objective, RiskSpec, Sense};
    use crate::rjt::build_rjt;

    fn setup(periods: usize) -> (InfluenceDiagram, RootedJunctionTree) {
        let d = pig_farm(&PigFarmSpec::with_periods(periods));
        let t = build_rjt(&d, &d.topological_order().unwrap()).unwrap();
        (d, t)
    }

    #[test]
    fn meu_matches_oracle_with_same_argmax_set() {
        let (d, t) = setup(3);
        let m = build_base_model(&d, &t).unwrap();
        let sol = solve_reference(&m, &d, &t).unwrap();
        let oracle = oracle_optimize(&d, &Objective::Meu, &[]).unwrap();
        let o = oracle.optimal().unwrap();
        assert!((sol.objective.unwrap() - o.objective).abs() < 1e-9);
        assert_eq!(sol.optimal_set, o.optimal_set);
        assert_eq!(sol.evaluated, 64);
    }

    #[test]
    fn propagated_mu_equals_cluster_marginals() {
        let (d, t) = setup(2);
        let m = build_base_model(&d, &t).unwrap();
        let s = Strategy::from_fn(&d, |_, cfg| cfg % 2).unwrap();
        let values = propagate(&m, &d, &t, &s).unwrap();
        for c in t.clusters() {
            let want = joint_marginal(&d, &s, &c.members).unwrap();
            let b = m.catalog().mu(c.root);
            for (cfg, w) in want.iter().enumerate() {
                assert!((values[b.var(cfg).index()] - w).abs() < 1e-9);
            }
        }
        assert!(m.violations(&values, 1e-9).is_empty());
    }

    #[test]
    fn logical_row_excluding_everything_is_infeasible() {
        let (d, t) = setup(1);
        let mut m = build_base_model(&d, &t).unwrap();
        crate::mip::add_risk(&mut m, &d, &RiskSpec::logical("H1=healthy|H1=ill").unwrap()).unwrap();
        assert_eq!(m.constraints().last().unwrap().family, Family::Logical);
        let sol = solve_reference(&m, &d, &t).unwrap();
        assert_eq!(sol.status, Status::Infeasible);
        assert!(sol.objective.is_none());
    }

    #[test]
    fn chance_constrained_matches_oracle() {
        let (d, t) = setup(2);
        let spec = RiskSpec::chance("H2=ill", Sense::Le, 0.25).unwrap();
        let m = build_model(&d, &t, &Objective::Meu, std::slice::from_ref(&spec)).unwrap();
        let sol = solve_reference(&m, &d, &t).unwrap();
        let o = oracle_optimize(&d, &Objective::Meu, &[spec]).unwrap();
        assert!((sol.objective.unwrap() - o.optimal().unwrap().objective).abs() < 1e-9);
    }
}
