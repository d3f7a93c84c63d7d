use crate::diagram::{InfluenceDiagram, NodeId, NodeKind};
use crate::error::{Error, Result};
use crate::inference::utility_key;
use crate::risk::{CvarMode, RiskSpec, Sense};

use super::{CvarBlock, Domain, Family, MipModel, VarId, VarKind};

/// `epsilon` used when the utility has a single distinct value.
pub const DEFAULT_CVAR_EPSILON_SINGLE: f64 = 1.0;

/// The cluster whose rows carry an event over `scope`: the pinned one if
/// given, else the cluster with the fewest configurations containing all of
/// `scope` (ties go to the earlier root).
pub fn select_cluster(m: &MipModel, d: &InfluenceDiagram, scope: &[NodeId], pinned: Option<&str>) -> Result<NodeId> {
    let fits = |root: NodeId| scope.iter().all(|&j| m.catalog().mu(root).indexer.position(j).is_some());
    let names = || scope.iter().map(|&j| d.name(j).to_string()).collect::<Vec<_>>();
    if let Some(name) = pinned {
        let root = d.id(name)?;
        return if fits(root) {
            Ok(root)
        } else {
            Err(Error::NoSuitableCluster {
                scope: names(),
                hint: format!("cluster C_{name} does not contain them; run modify_rjt with these targets first"),
            })
        };
    }
    m.catalog()
        .mu
        .iter()
        .filter(|b| fits(b.root))
        .min_by_key(|b| (b.indexer.total(), b.first))
        .map(|b| b.root)
        .ok_or_else(|| {
            let hint = if scope.iter().any(|&j| d.kind(j) == NodeKind::Value) {
                "merge the value nodes with merge_value_nodes, or run modify_rjt with these targets".to_string()
            } else {
                "run modify_rjt with these targets to create one".to_string()
            };
            Error::NoSuitableCluster { scope: names(), hint }
        })
}

/// Adds the rows for one risk specification. A CVaR spec in objective
/// mode also replaces the objective.
pub fn add_risk(m: &mut MipModel, d: &InfluenceDiagram, spec: &RiskSpec) -> Result<()> {
    spec.check()?;
    match spec {
        RiskSpec::Cvar { alpha, mode, value_node } => add_cvar(m, d, *alpha, *mode, value_node.as_deref()),
        _ => {
            let bounded = spec.resolve_event(d)?.expect("non-CVaR spec has an event");
            let root = select_cluster(m, d, &bounded.event.scope, spec.pinned_cluster())?;
            let block = m.catalog().mu(root).clone();
            let positions: Vec<usize> = bounded
                .event
                .scope
                .iter()
                .map(|&j| block.indexer.position(j).expect("cluster contains the scope"))
                .collect();
            let mut states = vec![0; positions.len()];
            let mut terms = Vec::new();
            for cfg in 0..block.indexer.total() {
                for (s, &pos) in states.iter_mut().zip(&positions) {
                    *s = block.indexer.digit(cfg, pos);
                }
                if bounded.event.holds(&states) {
                    terms.push((1.0, block.var(cfg)));
                }
            }
            let family = match spec {
                RiskSpec::Chance { .. } => Family::Chance,
                RiskSpec::Logical { .. } => Family::Logical,
                _ => Family::Budget,
            };
            let tag = format!("{} on C_{}", spec.label(), d.name(root));
            m.add_constraint(terms, bounded.sense, bounded.p, family, tag)?;
            Ok(())
        }
    }
}

/// Sorted distinct utilities (12 significant digits), `epsilon` (half the
/// smallest positive gap) and big-M (`max - min + epsilon`).
fn cvar_constants(utilities: &[f64]) -> (Vec<f64>, f64, f64) {
    let mut u: Vec<f64> = utilities.iter().map(|&x| utility_key(x)).collect();
    u.sort_by(f64::total_cmp);
    u.dedup();
    let epsilon = u
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.min(g))))
        .map_or(DEFAULT_CVAR_EPSILON_SINGLE, |g| g / 2.0);
    let big_m = (u[u.len() - 1] - u[0]) + epsilon;
    (u, epsilon, big_m)
}

fn add_cvar(m: &mut MipModel, d: &InfluenceDiagram, alpha: f64, mode: CvarMode, value_node: Option<&str>) -> Result<()> {
    if mode == CvarMode::Objective && m.cvar.iter().any(|b| b.mode == CvarMode::Objective) {
        return Err(Error::Model("the model already has a CVaR objective".into()));
    }
    let v = match value_node {
        Some(name) => {
            let v = d.id(name)?;
            if d.kind(v) != NodeKind::Value {
                return Err(Error::Model(format!("`{name}` is not a value node")));
            }
            v
        }
        None => match d.value_nodes()[..] {
            [v] => v,
            ref many => {
                return Err(Error::NoSuitableCluster {
                    scope: many.iter().map(|&j| d.name(j).to_string()).collect(),
                    hint: "CVaR of the total utility needs a single value node; run merge_value_nodes first".into(),
                })
            }
        },
    };
    let block = m.catalog().mu(v).clone();
    let pos = block.indexer.position(v).expect("root is a member");
    let raw = d.utilities(v).expect("value node has utilities");
    let (utilities, epsilon, big_m) = cvar_constants(raw);
    let mut mass: Vec<Vec<VarId>> = vec![Vec::new(); utilities.len()];
    for cfg in 0..block.indexer.total() {
        let key = utility_key(raw[block.indexer.digit(cfg, pos)]);
        let k = utilities.partition_point(|&u| u < key);
        mass[k].push(block.var(cfg));
    }

    let prefix = match m.cvar.len() {
        0 => String::new(),
        b => format!("c{b}_"),
    };
    let eta = m.add_var(format!("{prefix}eta"), Domain::Free, VarKind::Eta)?;
    let mut vars = |kind: VarKind, domain: Domain| -> Result<Vec<VarId>> {
        (0..utilities.len())
            .map(|k| m.add_var(format!("{prefix}{}_{k}", kind.as_str()), domain, kind))
            .collect()
    };
    let lambda = vars(VarKind::Lambda, Domain::Binary)?;
    let lambda_bar = vars(VarKind::LambdaBar, Domain::Binary)?;
    let rho = vars(VarKind::Rho, Domain::UNIT)?;
    let rho_bar = vars(VarKind::RhoBar, Domain::UNIT)?;

    let (mm, e) = (big_m, epsilon);
    for (k, &u) in utilities.iter().enumerate() {
        let tag = |what: &str| format!("{prefix}cvar {what} u[{k}]={u}");
        let p = mass[k].iter().map(|&x| (1.0, x));
        let q = Family::CvarQuantile;
        m.add_constraint([(1.0, eta), (-mm, lambda[k])], Sense::Le, u, q, tag("eta-u<=M*lam"))?;
        m.add_constraint([(1.0, eta), (-(mm + e), lambda[k])], Sense::Ge, u - mm, q, tag("eta-u>=(M+eps)*lam-M"))?;
        m.add_constraint([(1.0, eta), (-(mm + e), lambda_bar[k])], Sense::Le, u - e, q, tag("eta-u<=(M+eps)*lambar-eps"))?;
        m.add_constraint([(1.0, eta), (-mm, lambda_bar[k])], Sense::Ge, u - mm, q, tag("eta-u>=M*(lambar-1)"))?;
        let t = Family::CvarTail;
        m.add_constraint([(1.0, rho_bar[k]), (-1.0, lambda_bar[k])], Sense::Le, 0.0, t, tag("rhobar<=lambar"))?;
        let lower = p.clone().chain([(1.0, lambda[k]), (-1.0, rho[k])]);
        m.add_constraint(lower, Sense::Le, 1.0, t, tag("p-(1-lam)<=rho"))?;
        m.add_constraint([(1.0, rho[k]), (-1.0, lambda[k])], Sense::Le, 0.0, t, tag("rho<=lam"))?;
        m.add_constraint([(1.0, rho[k]), (-1.0, rho_bar[k])], Sense::Le, 0.0, t, tag("rho<=rhobar"))?;
        let upper = std::iter::once((1.0, rho_bar[k])).chain(p.map(|(c, x)| (-c, x)));
        m.add_constraint(upper, Sense::Le, 0.0, t, tag("rhobar<=p"))?;
    }
    m.add_constraint(
        rho_bar.iter().map(|&x| (1.0, x)),
        Sense::Eq,
        alpha,
        Family::CvarMass,
        format!("{prefix}cvar sum rhobar = alpha"),
    )?;
    let tail: Vec<(f64, VarId)> = utilities.iter().zip(&rho_bar).map(|(&u, &x)| (u, x)).collect();
    match mode {
        CvarMode::Objective => {
            m.set_objective(tail.into_iter().map(|(u, x)| (u / alpha, x)).collect(), format!("cvar:{alpha}"));
        }
        CvarMode::AtLeast(threshold) => {
            m.add_constraint(
                tail,
                Sense::Ge,
                alpha * threshold,
                Family::CvarBound,
                format!("{prefix}cvar alpha={alpha} >= {threshold}"),
            )?;
        }
    }
    m.cvar.push(CvarBlock {
        alpha,
        mode,
        value_node: v,
        utilities,
        mass,
        epsilon,
        big_m,
        eta,
        lambda,
        lambda_bar,
        rho,
        rho_bar,
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{pig_farm, PigFarmSpec};
    use crate::mip::{build_base_model, build_model, model_stats};
    use crate::risk::Objective;
    use crate::rjt::{build_rjt, modify_rjt};
    use crate::transform::merge_value_nodes;

    #[test]
    fn epsilon_and_big_m() {
        let (u, e, mm) = cvar_constants(&[300.0, 1000.0, 200.0, 900.0, 300.0]);
        assert_eq!(u, vec![200.0, 300.0, 900.0, 1000.0]);
        assert_eq!(e, 50.0);
        assert_eq!(mm, 850.0);
        let (u, e, mm) = cvar_constants(&[4.0, 4.0]);
        assert_eq!((u.len(), e, mm), (1, 1.0, 1.0));
    }

    #[test]
    fn chance_row_on_modified_tree() {
        let d = pig_farm(&PigFarmSpec::default());
        let hs: Vec<NodeId> = (1..=4).map(|k| d.id(&format!("H{k}")).unwrap()).collect();
        let t = modify_rjt(&build_rjt(&d, &d.topological_order().unwrap()).unwrap(), &d, &hs).unwrap();
        let mut m = build_base_model(&d, &t).unwrap();
        let spec = RiskSpec::parse_chance("P(H1=ill|H2=ill|H3=ill|H4=ill)<=0.4").unwrap();
        add_risk(&mut m, &d, &spec).unwrap();
        let row = m.constraints().last().unwrap();
        assert_eq!(row.family, Family::Chance);
        assert_eq!(row.rhs, 0.4);
        assert!(row.tag.ends_with("C_H4"));
        // C_H4 = H1 H2 H3 D3 H4: 15 of 16 health patterns have an ill period, times 2 for D3.
        assert_eq!(row.terms.len(), 15 * 2);
    }

    #[test]
    fn chance_without_cluster_is_refused() {
        let d = pig_farm(&PigFarmSpec::default());
        let t = build_rjt(&d, &d.topological_order().unwrap()).unwrap();
        let mut m = build_base_model(&d, &t).unwrap();
        let spec = RiskSpec::parse_chance("P(H1=ill|H4=ill)<=0.4").unwrap();
        match add_risk(&mut m, &d, &spec) {
            Err(Error::NoSuitableCluster { scope, hint }) => {
                assert_eq!(scope, vec!["H1", "H4"]);
                assert!(hint.contains("modify_rjt"));
            }
            other => panic!("{other:?}"),
        }
        assert!(add_risk(&mut m, &d, &spec.clone().with_cluster("H2")).is_err());
    }

    #[test]
    fn logical_row_on_merged_value_cluster() {
        let (d, _) = merge_value_nodes(&pig_farm(&PigFarmSpec::default())).unwrap();
        let t = build_rjt(&d, &d.topological_order().unwrap()).unwrap();
        let mut m = build_base_model(&d, &t).unwrap();
        add_risk(&mut m, &d, &RiskSpec::logical("D1=treat&D2=treat&D3=treat").unwrap()).unwrap();
        let row = m.constraints().last().unwrap();
        assert_eq!((row.family, row.sense, row.rhs), (Family::Logical, Sense::Le, 0.0));
        let ds: Vec<NodeId> = ["D1", "D2", "D3"].iter().map(|n| d.id(n).unwrap()).collect();
        let c = m.catalog().mu(select_cluster(&m, &d, &ds, None).unwrap());
        // one in eight configurations treats three times
        assert_eq!(row.terms.len(), c.indexer.total() / 8);
    }

    #[test]
    fn cvar_block_shape_and_names() {
        let (d, _) = merge_value_nodes(&pig_farm(&PigFarmSpec::default())).unwrap();
        let t = build_rjt(&d, &d.topological_order().unwrap()).unwrap();
        let m = build_model(&d, &t, &Objective::cvar(0.15), &[]).unwrap();
        let b = &m.cvar_blocks()[0];
        let n = b.utilities.len();
        assert!(m.var_by_name("eta").is_some());
        assert!(m.var_by_name(&format!("rhobar_{}", n - 1)).is_some());
        let s = model_stats(&m);
        assert_eq!(s.family(Family::CvarQuantile), 4 * n);
        assert_eq!(s.family(Family::CvarTail), 5 * n);
        assert_eq!(s.family(Family::CvarMass), 1);
        assert_eq!(m.objective_label(), "cvar:0.15");
        assert_eq!(b.mass.iter().map(Vec::len).sum::<usize>(), 256);

        let multi = pig_farm(&PigFarmSpec::default());
        let t = build_rjt(&multi, &multi.topological_order().unwrap()).unwrap();
        assert!(matches!(
            build_model(&multi, &t, &Objective::cvar(0.15), &[]),
            Err(Error::NoSuitableCluster { .. })
        ));
    }
}
