use crate::diagram::{InfluenceDiagram, NodeId, NodeKind};
use crate::error::{Error, Result};
use crate::risk::{CvarMode, Objective, RiskSpec, Sense};
use crate::rjt::{validate_rjt, RootedJunctionTree};

use super::{Catalog, DeltaBlock, Domain, Family, Indicator, MipModel, MuBlock, VarKind, DEFAULT_CLUSTER_CAP};

/// How the product of a decision rule and a cluster marginal is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coupling {
    /// Two linear rows per configuration with big-M equal to 1.
    #[default]
    BigM,
    /// Indicator rows on the decision binary.
    Indicator,
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    /// Refuse clusters with more configurations than this.
    pub cluster_cap: u128,
    pub coupling: Coupling,
    /// Emit one `sum delta = 1` row per decision rule configuration.
    pub strategy_sum_rows: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            cluster_cap: DEFAULT_CLUSTER_CAP,
            coupling: Coupling::BigM,
            strategy_sum_rows: true,
        }
    }
}

pub fn build_base_model(d: &InfluenceDiagram, t: &RootedJunctionTree) -> Result<MipModel> {
    build_base_model_with(d, t, &BuildOptions::default())
}

/// Expected-utility model over the clusters of `t`: normalization per
/// cluster, local consistency per arc, probability coupling per chance and
/// value node, linearized decision coupling, and the expected-utility
/// objective summed over value-node clusters.
pub fn build_base_model_with(d: &InfluenceDiagram, t: &RootedJunctionTree, opts: &BuildOptions) -> Result<MipModel> {
    d.ensure_valid()?;
    let violations = validate_rjt(t, d);
    if !violations.is_empty() {
        return Err(Error::InvalidTree(violations));
    }
    let mut m = MipModel::new();
    let mut catalog = Catalog::default();
    let mut blocks: Vec<Option<MuBlock>> = vec![None; d.len()];

    for c in t.clusters_in_order() {
        let size: u128 = c.members.iter().map(|&j| d.num_states(j) as u128).product();
        if size > opts.cluster_cap {
            return Err(Error::CapExceeded {
                what: format!("configurations of cluster C_{}", d.name(c.root)),
                size,
                cap: opts.cluster_cap,
            });
        }
        let indexer = d.indexer(&c.members);
        let first = super::VarId(m.variables().len());
        for cfg in 0..indexer.total() {
            m.add_var(format!("mu_{}_{cfg}", d.name(c.root)), Domain::UNIT, VarKind::Mu)?;
        }
        blocks[c.root.index()] = Some(MuBlock {
            root: c.root,
            indexer,
            first,
        });
    }
    catalog.mu = blocks.into_iter().map(|b| b.expect("one cluster per node")).collect();

    for dec in d.decisions() {
        let configs = d.parent_indexer(dec).total();
        let states = d.num_states(dec);
        let first = super::VarId(m.variables().len());
        for cfg in 0..configs {
            for s in 0..states {
                m.add_var(format!("delta_{}_{cfg}_{s}", d.name(dec)), Domain::Binary, VarKind::Delta)?;
            }
        }
        catalog.delta.push(DeltaBlock {
            decision: dec,
            configs,
            states,
            first,
        });
    }
    m.catalog = catalog;

    for &j in t.order() {
        let b = m.catalog.mu(j).clone();
        m.add_constraint(b.vars().map(|v| (1.0, v)), Sense::Eq, 1.0, Family::Normalization, format!("normalization C_{}", d.name(j)))?;
    }

    for (i, j) in t.arcs() {
        add_consistency_rows(&mut m, d, i, j)?;
    }

    for &j in t.order() {
        match d.kind(j) {
            NodeKind::Decision => linearize_decision_coupling(&mut m, d, j, opts.coupling)?,
            NodeKind::Chance | NodeKind::Value => add_chance_coupling(&mut m, d, j)?,
        }
    }

    if opts.strategy_sum_rows {
        for b in m.catalog.delta.clone() {
            for cfg in 0..b.configs {
                m.add_constraint(
                    (0..b.states).map(|s| (1.0, b.var(cfg, s))),
                    Sense::Eq,
                    1.0,
                    Family::StrategySum,
                    format!("strategy-sum {} config {cfg}", d.name(b.decision)),
                )?;
            }
        }
    }

    let mut objective = Vec::new();
    for v in d.value_nodes() {
        let b = m.catalog.mu(v);
        let pos = b.indexer.position(v).expect("root is a member");
        let u = d.utilities(v).expect("value node has utilities");
        for cfg in 0..b.indexer.total() {
            objective.push((u[b.indexer.digit(cfg, pos)], b.var(cfg)));
        }
    }
    m.set_objective(objective, "meu");
    Ok(m)
}

/// Rows equating the marginals of adjacent clusters on their shared members.
fn add_consistency_rows(m: &mut MipModel, d: &InfluenceDiagram, i: NodeId, j: NodeId) -> Result<()> {
    let (bi, bj) = (m.catalog.mu(i).clone(), m.catalog.mu(j).clone());
    let shared: Vec<NodeId> = bi
        .indexer
        .scope()
        .iter()
        .copied()
        .filter(|x| bj.indexer.position(*x).is_some())
        .collect();
    let sep = d.indexer(&shared);
    let mut rows: Vec<Vec<(f64, super::VarId)>> = vec![Vec::new(); sep.total()];
    for (cfg, s) in bi.indexer.projection_table(&sep).into_iter().enumerate() {
        rows[s].push((1.0, bi.var(cfg)));
    }
    for (cfg, s) in bj.indexer.projection_table(&sep).into_iter().enumerate() {
        rows[s].push((-1.0, bj.var(cfg)));
    }
    for (s, terms) in rows.into_iter().enumerate() {
        m.add_constraint(
            terms,
            Sense::Eq,
            0.0,
            Family::LocalConsistency,
            format!("local-consistency C_{} -> C_{} separator config {s}", d.name(i), d.name(j)),
        )?;
    }
    Ok(())
}

/// Configuration layout shared by both coupling kinds.
struct Coupled {
    block: MuBlock,
    pos: usize,
    stride: usize,
    states: usize,
    parent_cfg: Vec<usize>,
}

impl Coupled {
    fn new(m: &MipModel, d: &InfluenceDiagram, j: NodeId) -> Self {
        let block = m.catalog.mu(j).clone();
        let pos = block.indexer.position(j).expect("root is a member");
        let stride = block.indexer.stride(pos);
        let parent_cfg = block.indexer.projection_table(&d.parent_indexer(j));
        Self {
            pos,
            stride,
            states: d.num_states(j),
            parent_cfg,
            block,
        }
    }

    fn state(&self, cfg: usize) -> usize {
        self.block.indexer.digit(cfg, self.pos)
    }

    /// The configurations sharing everything but the root's state.
    fn siblings(&self, cfg: usize) -> impl Iterator<Item = usize> + '_ {
        let base = cfg - self.state(cfg) * self.stride;
        (0..self.states).map(move |s| base + s * self.stride)
    }

    fn total(&self) -> usize {
        self.block.indexer.total()
    }
}

fn add_chance_coupling(m: &mut MipModel, d: &InfluenceDiagram, j: NodeId) -> Result<()> {
    let c = Coupled::new(m, d, j);
    for cfg in 0..c.total() {
        let p = d.prob(j, c.parent_cfg[cfg], c.state(cfg));
        let terms: Vec<_> = std::iter::once((1.0, c.block.var(cfg)))
            .chain(c.siblings(cfg).map(|sib| (-p, c.block.var(sib))))
            .collect();
        m.add_constraint(
            terms,
            Sense::Eq,
            0.0,
            Family::ChanceCoupling,
            format!("chance-coupling C_{} config {cfg}", d.name(j)),
        )?;
    }
    Ok(())
}

/// Rows forcing `mu_j(s) = delta(s_j | s_I(j)) * mu_bar_j(s)` for binary
/// `delta`: `mu <= delta` and `mu >= mu_bar - (1 - delta)`, or the
/// equivalent pair of indicator rows.
pub fn linearize_decision_coupling(m: &mut MipModel, d: &InfluenceDiagram, j: NodeId, coupling: Coupling) -> Result<()> {
    let c = Coupled::new(m, d, j);
    let delta = m
        .catalog
        .delta(j)
        .ok_or_else(|| Error::Model(format!("`{}` is not a decision node of the model", d.name(j))))?
        .clone();
    for cfg in 0..c.total() {
        let dv = delta.var(c.parent_cfg[cfg], c.state(cfg));
        let mu = c.block.var(cfg);
        let marginal: Vec<_> = c.siblings(cfg).map(|sib| (-1.0, c.block.var(sib))).collect();
        let tag = |kind: &str| format!("{kind} C_{} config {cfg}", d.name(j));
        match coupling {
            Coupling::BigM => {
                m.add_constraint([(1.0, mu), (-1.0, dv)], Sense::Le, 0.0, Family::DecisionUpper, tag("decision-upper"))?;
                let terms = std::iter::once((1.0, mu)).chain(marginal).chain([(-1.0, dv)]);
                m.add_constraint(terms, Sense::Ge, -1.0, Family::DecisionLower, tag("decision-lower"))?;
            }
            Coupling::Indicator => {
                let off = Indicator { var: dv, when: false };
                let on = Indicator { var: dv, when: true };
                m.add_indicator(off, [(1.0, mu)], Sense::Le, 0.0, Family::DecisionUpper, tag("decision-upper"))?;
                let terms = std::iter::once((1.0, mu)).chain(marginal);
                m.add_indicator(on, terms, Sense::Ge, 0.0, Family::DecisionLower, tag("decision-lower"))?;
            }
        }
    }
    Ok(())
}

pub fn build_model(
    d: &InfluenceDiagram,
    t: &RootedJunctionTree,
    objective: &Objective,
    constraints: &[RiskSpec],
) -> Result<MipModel> {
    build_model_with(d, t, objective, constraints, &BuildOptions::default())
}

/// Base model plus constraints, with the objective replaced by CVaR when
/// requested.
pub fn build_model_with(
    d: &InfluenceDiagram,
    t: &RootedJunctionTree,
    objective: &Objective,
    constraints: &[RiskSpec],
    opts: &BuildOptions,
) -> Result<MipModel> {
    let mut m = build_base_model_with(d, t, opts)?;
    for c in constraints {
        if matches!(c, RiskSpec::Cvar { mode: CvarMode::Objective, .. }) {
            return Err(Error::Model("a CVaR objective belongs in the objective, not the constraint list".into()));
        }
        super::add_risk(&mut m, d, c)?;
    }
    if let Objective::Cvar { alpha, value_node } = objective {
        let spec = RiskSpec::Cvar {
            alpha: *alpha,
            mode: CvarMode::Objective,
            value_node: value_node.clone(),
        };
        super::add_risk(&mut m, d, &spec)?;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::DiagramBuilder;
    use crate::generators::{pig_farm, PigFarmSpec};
    use crate::mip::model_stats;
    use crate::rjt::build_rjt;
    use crate::transform::merge_value_nodes;

    fn tree(d: &InfluenceDiagram) -> RootedJunctionTree {
        build_rjt(d, &d.topological_order().unwrap()).unwrap()
    }

    #[test]
    fn single_chance_node() {
        let mut b = DiagramBuilder::new();
        b.chance("A", ["x", "y"], Vec::<&str>::new(), vec![0.3, 0.7]);
        let d = b.build().unwrap();
        let m = build_base_model(&d, &tree(&d)).unwrap();
        let s = model_stats(&m);
        assert_eq!(s.family(Family::Normalization), 1);
        assert_eq!(s.family(Family::ChanceCoupling), 2);
        assert_eq!(s.binaries, 0);
        assert_eq!(s.rows, 3);
        assert_eq!(m.variable(super::super::VarId(1)).name, "mu_A_1");
    }

    #[test]
    fn pig_farm_row_counts_follow_cluster_sizes() {
        let d = pig_farm(&PigFarmSpec::default());
        let t = tree(&d);
        let s = model_stats(&build_base_model(&d, &t).unwrap());
        assert_eq!(s.family(Family::Normalization), 14);
        // Independent count: product of shared state counts over each arc.
        let mut want = 0;
        for (i, j) in t.arcs() {
            let shared = t.cluster(i).members.iter().filter(|x| t.cluster(j).contains(**x));
            want += shared.map(|&x| d.num_states(x)).product::<usize>();
        }
        assert_eq!(s.family(Family::LocalConsistency), want);
        assert_eq!(t.arcs().len(), 13);
        assert_eq!(s.kind(VarKind::Delta), 3 * 2 * 2);
        assert_eq!(s.family(Family::StrategySum), 3 * 2);
    }

    #[test]
    fn merged_value_cluster_has_256_configs() {
        let (d, _) = merge_value_nodes(&pig_farm(&PigFarmSpec::default())).unwrap();
        let t = tree(&d);
        let m = build_base_model(&d, &t).unwrap();
        let vbar = d.id("Vbar").unwrap();
        assert_eq!(m.catalog().mu(vbar).indexer.total(), 256);
        assert_eq!(t.cluster(vbar).members.len(), 5);
        assert_eq!(model_stats(&m).largest_cluster_configs, 256);
    }

    #[test]
    fn cluster_cap_refusal() {
        let (d, _) = merge_value_nodes(&pig_farm(&PigFarmSpec::default())).unwrap();
        let opts = BuildOptions {
            cluster_cap: 100,
            ..Default::default()
        };
        match build_base_model_with(&d, &tree(&d), &opts) {
            Err(Error::CapExceeded { size: 256, cap: 100, what }) => assert!(what.contains("Vbar")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn coupling_rows_cover_every_configuration() {
        let d = pig_farm(&PigFarmSpec::with_periods(2));
        let m = build_base_model(&d, &tree(&d)).unwrap();
        for (i, var) in m.variables().iter().enumerate() {
            if var.kind != VarKind::Mu {
                continue;
            }
            let v = super::super::VarId(i);
            let mut norm = 0;
            let mut families = std::collections::BTreeSet::new();
            for c in m.constraints() {
                if c.terms.iter().any(|t| t.1 == v) {
                    match c.family {
                        Family::Normalization => norm += 1,
                        Family::ChanceCoupling => {
                            families.insert("chance");
                        }
                        Family::DecisionUpper | Family::DecisionLower => {
                            families.insert("decision");
                        }
                        _ => {}
                    }
                }
            }
            assert_eq!(norm, 1, "{}", var.name);
            // Zero coefficients are dropped, so a mu may sit in no coupling row.
            assert!(families.len() <= 1, "{}", var.name);
        }
        let coupling = m
            .constraints()
            .iter()
            .filter(|c| matches!(c.family, Family::ChanceCoupling | Family::DecisionUpper))
            .count();
        assert_eq!(coupling, model_stats(&m).kind(VarKind::Mu));
    }
}
