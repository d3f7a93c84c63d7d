//! Exact evaluation by full-joint enumeration, exhaustive strategy search,
//! and direct risk measures on utility distributions.
//!
//! This is the ground truth the optimization models are checked against,
//! so it is deliberately naive: every joint configuration with nonzero
//! probability is visited.

use rayon::prelude::*;

use crate::diagram::{InfluenceDiagram, NodeId, NodeKind, Strategy};
use crate::error::{Error, Result};
use crate::risk::{BoundedEvent, CvarMode, Objective, RiskSpec};

pub const DEFAULT_JOINT_CAP: u128 = 1 << 26;
pub const DEFAULT_STRATEGY_CAP: u128 = 1 << 24;
/// Atoms lighter than this are dropped after aggregation.
pub const ATOM_FLOOR: f64 = 1e-15;
/// Slack allowed when checking chance, logical and budget bounds.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Slack on cumulative probability when locating the alpha-quantile.
pub const QUANTILE_TOL: f64 = 1e-12;

/// Rounds to 12 significant digits; utilities equal under this key are one atom.
pub fn utility_key(u: f64) -> f64 {
    if u == 0.0 || !u.is_finite() {
        return if u == 0.0 { 0.0 } else { u };
    }
    format!("{u:.11e}").parse().expect("formatted float parses")
}

/// Sorted `(utility, probability)` atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityDistribution {
    atoms: Vec<(f64, f64)>,
}

impl UtilityDistribution {
    /// Aggregates raw `(utility, probability)` pairs by [`utility_key`].
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut raw: Vec<(f64, f64)> = pairs.into_iter().map(|(u, p)| (utility_key(u), p)).collect();
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        for (u, p) in raw {
            match atoms.last_mut() {
                Some(last) if last.0 == u => last.1 += p,
                _ => atoms.push((u, p)),
            }
        }
        atoms.retain(|&(_, p)| p >= ATOM_FLOOR);
        Self { atoms }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn total_probability(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn expected(&self) -> f64 {
        self.atoms.iter().map(|(u, p)| u * p).sum()
    }

    pub fn probability_of(&self, u: f64) -> f64 {
        let k = utility_key(u);
        self.atoms.iter().find(|a| a.0 == k).map_or(0.0, |a| a.1)
    }

    /// Two-column text, one `utility probability` line per atom.
    pub fn to_text(&self) -> String {
        self.atoms.iter().map(|(u, p)| format!("{u} {p}\n")).collect()
    }
}

/// Value-at-risk and conditional value-at-risk of the lower `alpha` tail.
///
/// `var` is the smallest utility whose cumulative probability reaches
/// `alpha`; `cvar` averages the tail, counting only the part of the atom at
/// `var` needed to fill `alpha`.
pub fn cvar_of_distribution(dist: &UtilityDistribution, alpha: f64) -> Result<(f64, f64)> {
    let (var, weights) = tail_weights(dist.atoms(), alpha)?;
    let tail: f64 = dist.atoms().iter().zip(&weights).map(|((u, _), w)| u * w).sum();
    Ok((var, tail / alpha))
}

/// Quantile and per-atom tail weights (`rho-bar`) of `atoms` sorted by
/// utility. Weights are `p` below the quantile, the remainder of `alpha` at
/// it, and zero above.
pub fn tail_weights(atoms: &[(f64, f64)], alpha: f64) -> Result<(f64, Vec<f64>)> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if atoms.is_empty() {
        return Err(Error::Model("empty utility distribution".into()));
    }
    let mut below = 0.0;
    let mut weights = vec![0.0; atoms.len()];
    for (k, &(u, p)) in atoms.iter().enumerate() {
        if below + p >= alpha - QUANTILE_TOL || k + 1 == atoms.len() {
            weights[k] = (alpha - below).clamp(0.0, p.max(0.0));
            return Ok((u, weights));
        }
        weights[k] = p;
        below += p;
    }
    unreachable!("loop returns at the last atom")
}

/// Walks every joint configuration with nonzero probability.
struct JointWalker<'a> {
    d: &'a InfluenceDiagram,
    order: Vec<NodeId>,
    strides: Vec<Vec<(usize, usize)>>,
    rules: Vec<Option<&'a [usize]>>,
}

impl<'a> JointWalker<'a> {
    fn new(d: &'a InfluenceDiagram, s: &'a Strategy, cap: u128) -> Result<Self> {
        d.ensure_valid()?;
        let size = d.joint_size();
        if size > cap {
            return Err(Error::CapExceeded {
                what: "joint state space".into(),
                size,
                cap,
            });
        }
        let rules = s.resolve(d)?;
        let order = d.topological_order()?;
        let strides = d
            .ids()
            .map(|j| {
                let ix = d.parent_indexer(j);
                let mut stride = 1;
                let mut out = vec![(0, 0); ix.len()];
                for (k, &p) in ix.scope().iter().enumerate().rev() {
                    out[k] = (p.index(), stride);
                    stride *= ix.radices()[k];
                }
                out
            })
            .collect();
        Ok(Self { d, order, strides, rules })
    }

    fn walk(&self, mut visit: impl FnMut(f64, &[usize])) {
        let mut states = vec![0; self.d.len()];
        self.step(0, 1.0, &mut states, &mut visit);
    }

    fn step(&self, depth: usize, prob: f64, states: &mut Vec<usize>, visit: &mut impl FnMut(f64, &[usize])) {
        if depth == self.order.len() {
            visit(prob, states);
            return;
        }
        let j = self.order[depth];
        let cfg: usize = self.strides[j.index()].iter().map(|&(p, s)| states[p] * s).sum();
        if let Some(rule) = self.rules[j.index()] {
            states[j.index()] = rule[cfg];
            self.step(depth + 1, prob, states, visit);
            return;
        }
        for s in 0..self.d.num_states(j) {
            let p = self.d.prob(j, cfg, s);
            if p == 0.0 {
                continue;
            }
            states[j.index()] = s;
            self.step(depth + 1, prob * p, states, visit);
        }
    }
}

fn total_utility(d: &InfluenceDiagram, values: &[NodeId], states: &[usize]) -> f64 {
    let mut u = 0.0;
    for &v in values {
        u += d.utilities(v).expect("value node has utilities")[states[v.index()]];
    }
    u
}

/// Distribution of total utility (summed over value nodes in declaration
/// order) under strategy `s`.
pub fn evaluate_strategy(d: &InfluenceDiagram, s: &Strategy) -> Result<UtilityDistribution> {
    evaluate_value_scope(d, s, &d.value_nodes(), DEFAULT_JOINT_CAP)
}

/// Distribution of the utility summed over `values` only.
pub fn evaluate_value_scope(
    d: &InfluenceDiagram,
    s: &Strategy,
    values: &[NodeId],
    cap: u128,
) -> Result<UtilityDistribution> {
    if let Some(&bad) = values.iter().find(|&&v| d.kind(v) != NodeKind::Value) {
        return Err(Error::Model(format!("`{}` is not a value node", d.name(bad))));
    }
    let walker = JointWalker::new(d, s, cap)?;
    let mut pairs = Vec::new();
    walker.walk(|p, states| pairs.push((total_utility(d, values, states), p)));
    Ok(UtilityDistribution::from_pairs(pairs))
}

/// Expected total utility, accumulated without atom rounding.
pub fn expected_utility(d: &InfluenceDiagram, s: &Strategy) -> Result<f64> {
    let values = d.value_nodes();
    let walker = JointWalker::new(d, s, DEFAULT_JOINT_CAP)?;
    let mut eu = 0.0;
    walker.walk(|p, states| eu += p * total_utility(d, &values, states));
    Ok(eu)
}

/// Marginal table over `scope` (indexed by the diagram's indexer for that
/// scope). An empty scope yields `[1.0]`.
pub fn joint_marginal(d: &InfluenceDiagram, s: &Strategy, scope: &[NodeId]) -> Result<Vec<f64>> {
    Ok(joint_marginals(d, s, &[scope.to_vec()], DEFAULT_JOINT_CAP)?.remove(0))
}

/// Several marginals in one pass.
pub fn joint_marginals(d: &InfluenceDiagram, s: &Strategy, scopes: &[Vec<NodeId>], cap: u128) -> Result<Vec<Vec<f64>>> {
    let walker = JointWalker::new(d, s, cap)?;
    let indexers: Vec<_> = scopes.iter().map(|sc| d.indexer(sc)).collect();
    let mut tables: Vec<Vec<f64>> = indexers.iter().map(|ix| vec![0.0; ix.total()]).collect();
    let mut buf = Vec::new();
    walker.walk(|p, states| {
        for (ix, table) in indexers.iter().zip(tables.iter_mut()) {
            buf.clear();
            buf.extend(ix.scope().iter().map(|j| states[j.index()]));
            table[ix.index_unchecked(&buf)] += p;
        }
    });
    Ok(tables)
}

/// All deterministic strategies of a diagram in lexicographic order: the
/// first decision's first parent configuration is the most significant digit.
#[derive(Debug, Clone)]
pub struct StrategySpace {
    decisions: Vec<(String, usize, usize)>,
    count: u128,
}

impl StrategySpace {
    pub fn new(d: &InfluenceDiagram, cap: u128) -> Result<Self> {
        let count = d.strategy_count();
        if count > cap {
            return Err(Error::CapExceeded {
                what: "strategy count".into(),
                size: count,
                cap,
            });
        }
        let decisions = d
            .decisions()
            .into_iter()
            .map(|j| (d.name(j).to_string(), d.parent_indexer(j).total(), d.num_states(j)))
            .collect();
        Ok(Self { decisions, count })
    }

    pub fn count(&self) -> u128 {
        self.count
    }

    /// The strategy at lexicographic position `index`, without diagram checks.
    pub fn get(&self, mut index: u128) -> Strategy {
        let mut rules: Vec<crate::diagram::DecisionRule> = self
            .decisions
            .iter()
            .map(|(name, configs, _)| crate::diagram::DecisionRule {
                decision: name.clone(),
                choices: vec![0; *configs],
            })
            .collect();
        for (rule, (_, _, states)) in rules.iter_mut().zip(&self.decisions).rev() {
            for c in rule.choices.iter_mut().rev() {
                *c = (index % *states as u128) as usize;
                index /= *states as u128;
            }
        }
        Strategy::from_rules_unchecked(rules)
    }

    pub fn iter(&self) -> impl Iterator<Item = Strategy> + '_ {
        (0..self.count).map(move |i| self.get(i))
    }
}

pub fn enumerate_strategies(d: &InfluenceDiagram) -> Result<impl Iterator<Item = Strategy>> {
    let space = StrategySpace::new(d, DEFAULT_STRATEGY_CAP)?;
    Ok((0..space.count()).map(move |i| space.get(i)))
}

#[derive(Debug, Clone)]
pub struct OracleOptions {
    pub joint_cap: u128,
    pub strategy_cap: u128,
    pub keep_log: bool,
    pub feasibility_tol: f64,
    /// Relative tolerance under which objectives count as tied.
    pub tie_tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            joint_cap: DEFAULT_JOINT_CAP,
            strategy_cap: DEFAULT_STRATEGY_CAP,
            keep_log: false,
            feasibility_tol: FEASIBILITY_TOL,
            tie_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleEntry {
    pub strategy: Strategy,
    pub objective: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Lexicographically smallest optimal strategy.
    pub best: Strategy,
    pub objective: f64,
    /// Every strategy whose objective ties the optimum.
    pub optimal_set: Vec<Strategy>,
    pub evaluated: u128,
    pub feasible: u128,
    pub log: Vec<OracleEntry>,
}

#[derive(Debug, Clone)]
pub enum OracleOutcome {
    Optimal(OracleResult),
    Infeasible { evaluated: u128 },
}

impl OracleOutcome {
    pub fn optimal(&self) -> Option<&OracleResult> {
        match self {
            OracleOutcome::Optimal(r) => Some(r),
            OracleOutcome::Infeasible { .. } => None,
        }
    }
}

/// Everything the oracle needs to score one strategy.
struct Scorer {
    objective_values: Vec<NodeId>,
    objective_alpha: Option<f64>,
    events: Vec<BoundedEvent>,
    cvar_bounds: Vec<(Vec<NodeId>, f64, f64)>,
    tol: f64,
    cap: u128,
}

impl Scorer {
    fn new(d: &InfluenceDiagram, objective: &Objective, constraints: &[RiskSpec], opts: &OracleOptions) -> Result<Self> {
        let value_scope = |name: &Option<String>| -> Result<Vec<NodeId>> {
            match name {
                Some(n) => Ok(vec![d.id(n)?]),
                None => Ok(d.value_nodes()),
            }
        };
        let (objective_values, objective_alpha) = match objective {
            Objective::Meu => (d.value_nodes(), None),
            Objective::Cvar { alpha, value_node } => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(Error::InvalidAlpha(*alpha));
                }
                (value_scope(value_node)?, Some(*alpha))
            }
        };
        let mut events = Vec::new();
        let mut cvar_bounds = Vec::new();
        for c in constraints {
            match c {
                RiskSpec::Cvar { alpha, mode, value_node } => match mode {
                    CvarMode::AtLeast(t) => {
                        c.check()?;
                        cvar_bounds.push((value_scope(value_node)?, *alpha, *t));
                    }
                    CvarMode::Objective => {
                        return Err(Error::Model("a CVaR objective is not a constraint; pass it as the objective".into()))
                    }
                },
                _ => events.push(c.resolve_event(d)?.expect("non-CVaR spec has an event")),
            }
        }
        Ok(Self {
            objective_values,
            objective_alpha,
            events,
            cvar_bounds,
            tol: opts.feasibility_tol,
            cap: opts.joint_cap,
        })
    }

    /// `(objective, feasible)` for one strategy in a single joint pass.
    fn score(&self, d: &InfluenceDiagram, s: &Strategy) -> Result<(f64, bool)> {
        let walker = JointWalker::new(d, s, self.cap)?;
        let mut eu = 0.0;
        let mut objective_pairs = Vec::new();
        let mut event_mass = vec![0.0; self.events.len()];
        let mut bound_pairs: Vec<Vec<(f64, f64)>> = vec![Vec::new(); self.cvar_bounds.len()];
        walker.walk(|p, states| {
            let u = total_utility(d, &self.objective_values, states);
            if self.objective_alpha.is_some() {
                objective_pairs.push((u, p));
            } else {
                eu += p * u;
            }
            for (mass, ev) in event_mass.iter_mut().zip(&self.events) {
                if ev.event.holds_with(|j| states[j.index()]) {
                    *mass += p;
                }
            }
            for (pairs, (scope, _, _)) in bound_pairs.iter_mut().zip(&self.cvar_bounds) {
                pairs.push((total_utility(d, scope, states), p));
            }
        });
        let objective = match self.objective_alpha {
            Some(alpha) => cvar_of_distribution(&UtilityDistribution::from_pairs(objective_pairs), alpha)?.1,
            None => eu,
        };
        let mut feasible = event_mass
            .iter()
            .zip(&self.events)
            .all(|(&mass, ev)| ev.sense.holds(mass, ev.p, self.tol));
        for (pairs, (_, alpha, threshold)) in bound_pairs.into_iter().zip(&self.cvar_bounds) {
            let cvar = cvar_of_distribution(&UtilityDistribution::from_pairs(pairs), *alpha)?.1;
            feasible &= cvar >= threshold - self.tol;
        }
        Ok((objective, feasible))
    }
}

/// Scores a single strategy the way [`oracle_optimize`] does.
pub fn oracle_score(
    d: &InfluenceDiagram,
    s: &Strategy,
    objective: &Objective,
    constraints: &[RiskSpec],
) -> Result<(f64, bool)> {
    Scorer::new(d, objective, constraints, &OracleOptions::default())?.score(d, s)
}

pub fn oracle_optimize(d: &InfluenceDiagram, objective: &Objective, constraints: &[RiskSpec]) -> Result<OracleOutcome> {
    oracle_optimize_with(d, objective, constraints, &OracleOptions::default())
}

/// Exhaustive search over every deterministic strategy. Strategies are
/// scored in parallel; the winner is the lexicographically smallest
/// strategy among those tied for the best feasible objective.
pub fn oracle_optimize_with(
    d: &InfluenceDiagram,
    objective: &Objective,
    constraints: &[RiskSpec],
    opts: &OracleOptions,
) -> Result<OracleOutcome> {
    d.ensure_valid()?;
    let space = StrategySpace::new(d, opts.strategy_cap)?;
    let scorer = Scorer::new(d, objective, constraints, opts)?;
    let count = space.count() as u64;
    let scores: Vec<(f64, bool)> = (0..count)
        .into_par_iter()
        .map(|i| scorer.score(d, &space.get(i as u128)))
        .collect::<Result<_>>()?;

    let best_value = scores
        .iter()
        .filter(|s| s.1)
        .map(|s| s.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let feasible = scores.iter().filter(|s| s.1).count() as u128;
    if feasible == 0 {
        return Ok(OracleOutcome::Infeasible {
            evaluated: space.count(),
        });
    }
    let tol = opts.tie_tol * best_value.abs().max(1.0);
    let optimal: Vec<u64> = (0..count)
        .filter(|&i| scores[i as usize].1 && scores[i as usize].0 >= best_value - tol)
        .collect();
    let best = space.get(optimal[0] as u128);
    let objective_value = scores[optimal[0] as usize].0;
    let log = if opts.keep_log {
        scores
            .iter()
            .enumerate()
            .map(|(i, &(objective, feasible))| OracleEntry {
                strategy: space.get(i as u128),
                objective,
                feasible,
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(OracleOutcome::Optimal(OracleResult {
        best,
        objective: objective_value,
        optimal_set: optimal.into_iter().map(|i| space.get(i as u128)).collect(),
        evaluated: space.count(),
        feasible,
        log,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::DiagramBuilder;
    use crate::generators::{n_monitoring, pig_farm, random_diagram, random_strategy, NMonitoringSpec, PigFarmSpec, RandomDiagramSpec};
    use crate::transform::merge_value_nodes;

    fn never_treat(d: &InfluenceDiagram) -> Strategy {
        Strategy::from_fn(d, |_, _| 1).unwrap()
    }

    /// P(H_{n+1} = healthy) by iterating the untreated two-state chain.
    fn healthy_after(steps: usize) -> f64 {
        let (stay_healthy, recover) = (0.8, 0.1);
        let mut p = 0.9;
        for _ in 0..steps {
            p = p * stay_healthy + (1.0 - p) * recover;
        }
        p
    }

    #[test]
    fn never_treat_expected_utility() {
        let d = pig_farm(&PigFarmSpec::default());
        let s = never_treat(&d);
        let want = 300.0 + 700.0 * healthy_after(3);
        assert!((want - 669.39).abs() < 1e-9);
        let dist = evaluate_strategy(&d, &s).unwrap();
        assert!((dist.expected() - want).abs() < 1e-9);
        assert!((expected_utility(&d, &s).unwrap() - want).abs() < 1e-9);
        assert_eq!(dist.atoms().len(), 2);
        assert!((dist.total_probability() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_diagram_has_one_atom() {
        let mut b = DiagramBuilder::new();
        b.chance("A", ["x", "y"], [], vec![0.0, 1.0]);
        b.value("V", ["lo", "hi"], ["A"], vec![1.0, 0.0, 0.0, 1.0], vec![-3.0, 7.5]);
        let d = b.build().unwrap();
        let s = Strategy::from_fn(&d, |_, _| 0).unwrap();
        assert_eq!(evaluate_strategy(&d, &s).unwrap().atoms(), &[(7.5, 1.0)]);
    }

    #[test]
    fn merged_and_original_agree() {
        let d = pig_farm(&PigFarmSpec::default().seeded(3));
        let (m, _) = merge_value_nodes(&d).unwrap();
        for s in enumerate_strategies(&d).unwrap().step_by(7) {
            let a = evaluate_strategy(&d, &s).unwrap();
            let b = evaluate_strategy(&m, &s.for_diagram(&m).unwrap()).unwrap();
            assert_eq!(a.atoms().len(), b.atoms().len());
            for (x, y) in a.atoms().iter().zip(b.atoms()) {
                assert_eq!(x.0, y.0);
                assert!((x.1 - y.1).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn strategy_counts() {
        assert_eq!(enumerate_strategies(&pig_farm(&PigFarmSpec::default())).unwrap().count(), 64);
        assert_eq!(enumerate_strategies(&n_monitoring(&NMonitoringSpec::new(2, 0))).unwrap().count(), 16);
        let mut b = DiagramBuilder::new();
        b.decision("D", ["a", "b"], Vec::<&str>::new());
        let d = b.build().unwrap();
        let all: Vec<Strategy> = enumerate_strategies(&d).unwrap().collect();
        assert_eq!(all.len(), 2);
        assert!(all[0] < all[1]);
    }

    #[test]
    fn enumeration_is_lexicographic_and_unique() {
        let d = pig_farm(&PigFarmSpec::with_periods(2));
        let all: Vec<Strategy> = enumerate_strategies(&d).unwrap().collect();
        assert_eq!(all.len(), 16);
        for w in all.windows(2) {
            assert!(w[0] < w[1]);
        }
        for s in &all {
            assert!(Strategy::new(&d, s.rules().to_vec()).is_ok());
        }
    }

    #[test]
    fn strategy_cap_refusal() {
        let d = pig_farm(&PigFarmSpec::default());
        match StrategySpace::new(&d, 63) {
            Err(Error::CapExceeded { size, .. }) => assert_eq!(size, 64),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cvar_examples() {
        let dist = UtilityDistribution::from_pairs([(0.0, 0.5), (10.0, 0.5)]);
        assert_eq!(cvar_of_distribution(&dist, 0.25).unwrap(), (0.0, 0.0));
        let (var, cvar) = cvar_of_distribution(&dist, 0.75).unwrap();
        assert_eq!(var, 10.0);
        assert!((cvar - 10.0 / 3.0).abs() < 1e-12);
        let (_, full) = cvar_of_distribution(&dist, 1.0).unwrap();
        assert!((full - dist.expected()).abs() < 1e-12);
        assert!(matches!(cvar_of_distribution(&dist, 0.0), Err(Error::InvalidAlpha(_))));
        assert!(matches!(cvar_of_distribution(&dist, 1.5), Err(Error::InvalidAlpha(_))));
    }

    #[test]
    fn atoms_aggregate_by_twelve_digits() {
        let dist = UtilityDistribution::from_pairs([(0.1 + 0.2, 0.5), (0.3, 0.25), (1.0, 0.25), (5.0, 1e-16)]);
        assert_eq!(dist.atoms().len(), 2);
        assert_eq!(dist.probability_of(0.3), 0.75);
        assert_eq!(dist.to_text(), "0.3 0.75\n1 0.25\n");
    }

    #[test]
    fn health_marginals() {
        let d = pig_farm(&PigFarmSpec::default());
        let s = never_treat(&d);
        let h1 = d.id("H1").unwrap();
        let h2 = d.id("H2").unwrap();
        let m1 = joint_marginal(&d, &s, &[h1]).unwrap();
        assert!((m1[0] - 0.9).abs() < 1e-12 && (m1[1] - 0.1).abs() < 1e-12);
        assert!((joint_marginal(&d, &s, &[]).unwrap()[0] - 1.0).abs() < 1e-12);
        // prior x untreated transition rows
        let want = [0.9 * 0.8, 0.9 * 0.2, 0.1 * 0.1, 0.1 * 0.9];
        let m12 = joint_marginal(&d, &s, &[h1, h2]).unwrap();
        for (g, w) in m12.iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_meu_and_cvar_one_agree() {
        let d = pig_farm(&PigFarmSpec::with_periods(2));
        let meu = oracle_optimize(&d, &Objective::Meu, &[]).unwrap();
        let cvar = oracle_optimize(&d, &Objective::cvar(1.0), &[]).unwrap();
        let (a, b) = (meu.optimal().unwrap(), cvar.optimal().unwrap());
        assert!((a.objective - b.objective).abs() < 1e-9);
        assert_eq!(a.optimal_set, b.optimal_set);
        assert_eq!(a.evaluated, 16);
    }

    #[test]
    fn oracle_infeasible() {
        let d = pig_farm(&PigFarmSpec::with_periods(1));
        // H1 is ill with probability 0.1 under every strategy.
        let c = RiskSpec::chance("H1=ill", crate::risk::Sense::Le, 0.0).unwrap();
        assert!(matches!(oracle_optimize(&d, &Objective::Meu, &[c]).unwrap(), OracleOutcome::Infeasible { evaluated: 4 }));
    }

    #[test]
    fn oracle_log_and_rescoring() {
        let d = pig_farm(&PigFarmSpec::with_periods(2).seeded(1));
        let opts = OracleOptions {
            keep_log: true,
            ..Default::default()
        };
        let out = oracle_optimize_with(&d, &Objective::Meu, &[], &opts).unwrap();
        let r = out.optimal().unwrap();
        assert_eq!(r.log.len(), 16);
        assert!((expected_utility(&d, &r.best).unwrap() - r.objective).abs() < 1e-12);
        assert!(r.log.iter().all(|e| e.objective <= r.objective + 1e-9));
    }

    #[test]
    fn random_probability_conservation_and_cvar_monotonicity() {
        let spec = RandomDiagramSpec::default();
        for seed in 0..60 {
            let d = random_diagram(seed, &spec);
            let s = random_strategy(&d, seed + 1000);
            let dist = evaluate_strategy(&d, &s).unwrap();
            assert!((dist.total_probability() - 1.0).abs() < 1e-9);
            let eu = dist.expected();
            let mut prev = f64::NEG_INFINITY;
            for k in 1..=20 {
                let alpha = k as f64 / 20.0;
                let (_, c) = cvar_of_distribution(&dist, alpha).unwrap();
                assert!(c >= prev - 1e-9, "seed {seed} alpha {alpha}");
                assert!(c <= eu + 1e-9);
                prev = c;
            }
            assert!((cvar_of_distribution(&dist, 1.0).unwrap().1 - eu).abs() < 1e-9);
        }
    }

    #[test]
    fn single_node_marginals_match_table_sums() {
        // For a chance node whose ancestors are all chance nodes, its marginal
        // equals the table averaged over the parents' joint marginal.
        let spec = RandomDiagramSpec {
            decision_prob: 0.0,
            ..Default::default()
        };
        for seed in 0..40 {
            let d = random_diagram(seed, &spec);
            let s = Strategy::from_fn(&d, |_, _| 0).unwrap();
            for j in d.ids() {
                let parents = d.parents(j).to_vec();
                let pm = joint_marginal(&d, &s, &parents).unwrap();
                let m = joint_marginal(&d, &s, &[j]).unwrap();
                for (state, &got) in m.iter().enumerate() {
                    let want: f64 = pm.iter().enumerate().map(|(cfg, w)| w * d.prob(j, cfg, state)).sum();
                    assert!((got - want).abs() < 1e-12);
                }
            }
        }
    }
}
