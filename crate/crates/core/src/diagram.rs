//! Influence diagrams: nodes, conditional probability tables, utilities and
//! deterministic strategies.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indexer::ConfigIndexer;

/// Row-sum tolerance for conditional probability tables.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Index of a node inside its diagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(usize);

impl NodeId {
    pub fn from_index(index: usize) -> Self {
        NodeId(index)
    }

    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Chance,
    Decision,
    Value,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Chance => "chance",
            NodeKind::Decision => "decision",
            NodeKind::Value => "value",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    pub states: Vec<String>,
    pub parents: Vec<NodeId>,
}

impl Node {
    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }
}

/// A rule violation found by [`InfluenceDiagram::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Cycle(Vec<String>),
    ValueNodeParent { value: String, child: String },
    DuplicateParent { node: String, parent: String },
    EmptyStates(String),
    DuplicateState { node: String, state: String },
    MissingCpt(String),
    UnexpectedCpt(String),
    CptSize { node: String, expected: usize, actual: usize },
    CptEntry { node: String, row: usize, state: usize, value: f64 },
    CptRowSum { node: String, row: usize, sum: f64 },
    MissingUtility(String),
    UnexpectedUtility(String),
    UtilitySize { node: String, expected: usize, actual: usize },
    NonFiniteUtility { node: String, state: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle(c) => write!(f, "cycle {}", c.join(" -> ")),
            Violation::ValueNodeParent { value, child } => {
                write!(f, "value node `{value}` is a parent of `{child}` (arc {value} -> {child})")
            }
            Violation::DuplicateParent { node, parent } => {
                write!(f, "`{node}` lists parent `{parent}` more than once")
            }
            Violation::EmptyStates(n) => write!(f, "`{n}` has no states"),
            Violation::DuplicateState { node, state } => {
                write!(f, "`{node}` has duplicate state label `{state}`")
            }
            Violation::MissingCpt(n) => write!(f, "`{n}` has no probability table"),
            Violation::UnexpectedCpt(n) => write!(f, "decision node `{n}` has a probability table"),
            Violation::CptSize { node, expected, actual } => {
                write!(f, "table of `{node}` has {actual} entries, expected {expected}")
            }
            Violation::CptEntry { node, row, state, value } => {
                write!(f, "table of `{node}` row {row} state {state} is {value}, outside [0, 1]")
            }
            Violation::CptRowSum { node, row, sum } => {
                write!(f, "table of `{node}` row {row} sums to {sum}")
            }
            Violation::MissingUtility(n) => write!(f, "value node `{n}` has no utilities"),
            Violation::UnexpectedUtility(n) => write!(f, "non-value node `{n}` has utilities"),
            Violation::UtilitySize { node, expected, actual } => {
                write!(f, "utilities of `{node}` have {actual} entries, expected {expected}")
            }
            Violation::NonFiniteUtility { node, state } => {
                write!(f, "utility of `{node}` state {state} is not finite")
            }
        }
    }
}

/// An influence diagram. Construct through [`DiagramBuilder`].
///
/// The representation may hold an invalid diagram so that
/// [`validate`](Self::validate) can report problems as data. Operations that
/// need a valid diagram call [`ensure_valid`](Self::ensure_valid).
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceDiagram {
    nodes: Vec<Node>,
    cpts: Vec<Option<Vec<f64>>>,
    utilities: Vec<Option<Vec<f64>>>,
    by_name: HashMap<String, NodeId>,
}

impl InfluenceDiagram {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn id(&self, name: &str) -> Result<NodeId> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[id.0].name
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.nodes[id.0].kind
    }

    pub fn parents(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].parents
    }

    pub fn num_states(&self, id: NodeId) -> usize {
        self.nodes[id.0].states.len()
    }

    pub fn state_index(&self, id: NodeId, label: &str) -> Result<usize> {
        self.nodes[id.0]
            .state_index(label)
            .ok_or_else(|| Error::UnknownState {
                node: self.nodes[id.0].name.clone(),
                state: label.to_string(),
            })
    }

    pub fn cpt(&self, id: NodeId) -> Option<&[f64]> {
        self.cpts[id.0].as_deref()
    }

    pub fn utilities(&self, id: NodeId) -> Option<&[f64]> {
        self.utilities[id.0].as_deref()
    }

    /// `P(state | parent configuration)` for a chance or value node.
    #[inline]
    pub fn prob(&self, id: NodeId, parent_config: usize, state: usize) -> f64 {
        let table = self.cpts[id.0].as_ref().expect("node has no table");
        table[parent_config * self.nodes[id.0].states.len() + state]
    }

    pub fn of_kind(&self, kind: NodeKind) -> Vec<NodeId> {
        self.ids().filter(|&j| self.kind(j) == kind).collect()
    }

    pub fn decisions(&self) -> Vec<NodeId> {
        self.of_kind(NodeKind::Decision)
    }

    pub fn value_nodes(&self) -> Vec<NodeId> {
        self.of_kind(NodeKind::Value)
    }

    pub fn indexer(&self, scope: &[NodeId]) -> ConfigIndexer {
        ConfigIndexer::new(
            scope.to_vec(),
            scope.iter().map(|&j| self.num_states(j)).collect(),
        )
    }

    pub fn parent_indexer(&self, id: NodeId) -> ConfigIndexer {
        self.indexer(self.parents(id))
    }

    pub fn children(&self, id: NodeId) -> Vec<NodeId> {
        self.ids().filter(|&c| self.parents(c).contains(&id)).collect()
    }

    /// Size of the full joint state space, saturating.
    pub fn joint_size(&self) -> u128 {
        self.nodes
            .iter()
            .fold(1u128, |acc, n| acc.saturating_mul(n.states.len() as u128))
    }

    /// Number of deterministic strategies, saturating.
    pub fn strategy_count(&self) -> u128 {
        let mut total: u128 = 1;
        for d in self.decisions() {
            let configs = self.parent_indexer(d).total() as u32;
            let local = (self.num_states(d) as u128)
                .checked_pow(configs)
                .unwrap_or(u128::MAX);
            total = total.saturating_mul(local);
        }
        total
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.states.is_empty() {
                out.push(Violation::EmptyStates(node.name.clone()));
            }
            let mut seen = HashSet::new();
            for s in &node.states {
                if !seen.insert(s) {
                    out.push(Violation::DuplicateState {
                        node: node.name.clone(),
                        state: s.clone(),
                    });
                }
            }
            let mut seen = HashSet::new();
            for &p in &node.parents {
                if !seen.insert(p) {
                    out.push(Violation::DuplicateParent {
                        node: node.name.clone(),
                        parent: self.name(p).to_string(),
                    });
                }
                if self.kind(p) == NodeKind::Value {
                    out.push(Violation::ValueNodeParent {
                        value: self.name(p).to_string(),
                        child: node.name.clone(),
                    });
                }
            }
            self.validate_tables(NodeId(i), &mut out);
        }
        if let Err(Error::Cycle(c)) = self.topological_order() {
            out.push(Violation::Cycle(c));
        }
        out
    }

    fn validate_tables(&self, id: NodeId, out: &mut Vec<Violation>) {
        let node = &self.nodes[id.0];
        let name = || node.name.clone();
        match (node.kind, &self.cpts[id.0]) {
            (NodeKind::Decision, Some(_)) => out.push(Violation::UnexpectedCpt(name())),
            (NodeKind::Decision, None) => {}
            (_, None) => out.push(Violation::MissingCpt(name())),
            (_, Some(table)) => {
                let width = node.states.len();
                let rows = node
                    .parents
                    .iter()
                    .map(|&p| self.num_states(p))
                    .product::<usize>();
                if width == 0 || table.len() != rows * width {
                    out.push(Violation::CptSize {
                        node: name(),
                        expected: rows * width,
                        actual: table.len(),
                    });
                } else {
                    for (row, chunk) in table.chunks(width).enumerate() {
                        for (state, &v) in chunk.iter().enumerate() {
                            if !(0.0..=1.0).contains(&v) {
                                out.push(Violation::CptEntry {
                                    node: name(),
                                    row,
                                    state,
                                    value: v,
                                });
                            }
                        }
                        let sum: f64 = chunk.iter().sum();
                        if (sum - 1.0).abs().is_nan() || (sum - 1.0).abs() > ROW_SUM_TOL {
                            out.push(Violation::CptRowSum {
                                node: name(),
                                row,
                                sum,
                            });
                        }
                    }
                }
            }
        }
        match (node.kind, &self.utilities[id.0]) {
            (NodeKind::Value, None) => out.push(Violation::MissingUtility(name())),
            (NodeKind::Value, Some(u)) => {
                if u.len() != node.states.len() {
                    out.push(Violation::UtilitySize {
                        node: name(),
                        expected: node.states.len(),
                        actual: u.len(),
                    });
                }
                for (state, v) in u.iter().enumerate() {
                    if !v.is_finite() {
                        out.push(Violation::NonFiniteUtility { node: name(), state });
                    }
                }
            }
            (_, Some(_)) => out.push(Violation::UnexpectedUtility(name())),
            (_, None) => {}
        }
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidDiagram(v))
        }
    }

    /// Kahn's algorithm; among ready nodes the earliest declared goes first.
    pub fn topological_order(&self) -> Result<Vec<NodeId>> {
        let n = self.nodes.len();
        let mut indegree: Vec<usize> = self.nodes.iter().map(|x| x.parents.len()).collect();
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, node) in self.nodes.iter().enumerate() {
            for p in &node.parents {
                children[p.0].push(i);
            }
        }
        let mut ready: BinaryHeap<Reverse<usize>> =
            (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(i)) = ready.pop() {
            order.push(NodeId(i));
            for &c in &children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(Reverse(c));
                }
            }
        }
        if order.len() == n {
            Ok(order)
        } else {
            Err(Error::Cycle(self.find_cycle(&indegree)))
        }
    }

    fn find_cycle(&self, indegree: &[usize]) -> Vec<String> {
        // Every remaining node has a remaining parent; walk parents until a repeat.
        let start = indegree.iter().position(|&d| d > 0).unwrap_or(0);
        let mut seen: HashMap<usize, usize> = HashMap::new();
        let mut path = Vec::new();
        let mut cur = start;
        loop {
            if let Some(&pos) = seen.get(&cur) {
                let mut cycle: Vec<String> = path[pos..]
                    .iter()
                    .rev()
                    .map(|&i: &usize| self.nodes[i].name.clone())
                    .collect();
                cycle.push(cycle[0].clone());
                return cycle;
            }
            seen.insert(cur, path.len());
            path.push(cur);
            cur = match self.nodes[cur]
                .parents
                .iter()
                .find(|p| indegree[p.0] > 0)
            {
                Some(p) => p.0,
                None => return vec![self.nodes[cur].name.clone()],
            };
        }
    }

    /// Checks that `order` is a permutation of the nodes in which every
    /// parent precedes its children. Returns the rank of each node.
    pub fn check_order(&self, order: &[NodeId]) -> Result<Vec<usize>> {
        let n = self.nodes.len();
        if order.len() != n {
            return Err(Error::InvalidOrder(format!(
                "order has {} entries, diagram has {n} nodes",
                order.len()
            )));
        }
        let mut rank = vec![usize::MAX; n];
        for (r, id) in order.iter().enumerate() {
            if id.0 >= n || rank[id.0] != usize::MAX {
                return Err(Error::InvalidOrder(format!(
                    "node index {} repeated or out of range",
                    id.0
                )));
            }
            rank[id.0] = r;
        }
        for (i, node) in self.nodes.iter().enumerate() {
            for p in &node.parents {
                if rank[p.0] >= rank[i] {
                    return Err(Error::InvalidOrder(format!(
                        "`{}` must precede its child `{}`",
                        self.nodes[p.0].name, node.name
                    )));
                }
            }
        }
        Ok(rank)
    }

    pub fn order_from_names<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<NodeId>> {
        let order = names
            .iter()
            .map(|n| self.id(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        self.check_order(&order)?;
        Ok(order)
    }

    /// Returns a copy with every table row rescaled to sum to one.
    pub fn renormalized(&self) -> Self {
        let mut out = self.clone();
        for (i, table) in out.cpts.iter_mut().enumerate() {
            let width = self.nodes[i].states.len();
            if let Some(t) = table {
                if width == 0 {
                    continue;
                }
                for row in t.chunks_mut(width) {
                    let s: f64 = row.iter().sum();
                    if s > 0.0 {
                        row.iter_mut().for_each(|v| *v /= s);
                    }
                }
            }
        }
        out
    }

    pub(crate) fn from_parts(
        nodes: Vec<Node>,
        cpts: Vec<Option<Vec<f64>>>,
        utilities: Vec<Option<Vec<f64>>>,
    ) -> Result<Self> {
        let mut by_name = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if by_name.insert(n.name.clone(), NodeId(i)).is_some() {
                return Err(Error::DuplicateNode(n.name.clone()));
            }
        }
        Ok(Self {
            nodes,
            cpts,
            utilities,
            by_name,
        })
    }
}

struct PendingNode {
    name: String,
    kind: NodeKind,
    states: Vec<String>,
    parents: Vec<String>,
    cpt: Option<Vec<f64>>,
    utilities: Option<Vec<f64>>,
}

/// Collects nodes by name and resolves parent references on [`build`](Self::build).
#[derive(Default)]
pub struct DiagramBuilder {
    nodes: Vec<PendingNode>,
}

impl DiagramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node<S: Into<String>>(
        &mut self,
        name: impl Into<String>,
        kind: NodeKind,
        states: impl IntoIterator<Item = S>,
        parents: impl IntoIterator<Item = S>,
    ) -> &mut Self {
        self.nodes.push(PendingNode {
            name: name.into(),
            kind,
            states: states.into_iter().map(Into::into).collect(),
            parents: parents.into_iter().map(Into::into).collect(),
            cpt: None,
            utilities: None,
        });
        self
    }

    pub fn chance<S: Into<String>>(
        &mut self,
        name: impl Into<String>,
        states: impl IntoIterator<Item = S>,
        parents: impl IntoIterator<Item = S>,
        table: Vec<f64>,
    ) -> &mut Self {
        self.node(name, NodeKind::Chance, states, parents);
        self.nodes.last_mut().unwrap().cpt = Some(table);
        self
    }

    pub fn decision<S: Into<String>>(
        &mut self,
        name: impl Into<String>,
        states: impl IntoIterator<Item = S>,
        parents: impl IntoIterator<Item = S>,
    ) -> &mut Self {
        self.node(name, NodeKind::Decision, states, parents)
    }

    pub fn value<S: Into<String>>(
        &mut self,
        name: impl Into<String>,
        states: impl IntoIterator<Item = S>,
        parents: impl IntoIterator<Item = S>,
        table: Vec<f64>,
        utilities: Vec<f64>,
    ) -> &mut Self {
        self.node(name, NodeKind::Value, states, parents);
        let last = self.nodes.last_mut().unwrap();
        last.cpt = Some(table);
        last.utilities = Some(utilities);
        self
    }

    pub fn set_cpt(&mut self, name: &str, table: Vec<f64>) -> Result<&mut Self> {
        self.find(name)?.cpt = Some(table);
        Ok(self)
    }

    pub fn set_utilities(&mut self, name: &str, utilities: Vec<f64>) -> Result<&mut Self> {
        self.find(name)?.utilities = Some(utilities);
        Ok(self)
    }

    fn find(&mut self, name: &str) -> Result<&mut PendingNode> {
        self.nodes
            .iter_mut()
            .find(|n| n.name == name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    /// Resolves names. Fails only on duplicate or unknown names; every other
    /// rule is checked by [`InfluenceDiagram::validate`].
    pub fn build(&self) -> Result<InfluenceDiagram> {
        let mut index = HashMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if index.insert(n.name.as_str(), i).is_some() {
                return Err(Error::DuplicateNode(n.name.clone()));
            }
        }
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let parents = n
                .parents
                .iter()
                .map(|p| {
                    index
                        .get(p.as_str())
                        .map(|&i| NodeId(i))
                        .ok_or_else(|| Error::UnknownNode(p.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            nodes.push(Node {
                name: n.name.clone(),
                kind: n.kind,
                states: n.states.clone(),
                parents,
            });
        }
        InfluenceDiagram::from_parts(
            nodes,
            self.nodes.iter().map(|n| n.cpt.clone()).collect(),
            self.nodes.iter().map(|n| n.utilities.clone()).collect(),
        )
    }
}

/// One local decision rule: the chosen state for every configuration of
/// the decision's parents.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DecisionRule {
    pub decision: String,
    pub choices: Vec<usize>,
}

/// A deterministic strategy, one rule per decision node in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Strategy {
    rules: Vec<DecisionRule>,
}

impl Strategy {
    /// Checks feasibility against `d`: one rule per decision, in declaration
    /// order, with one in-range choice per parent configuration.
    pub fn new(d: &InfluenceDiagram, rules: Vec<DecisionRule>) -> Result<Self> {
        let decisions = d.decisions();
        if rules.len() != decisions.len() {
            return Err(Error::Strategy(format!(
                "{} rules for {} decision nodes",
                rules.len(),
                decisions.len()
            )));
        }
        for (rule, &dec) in rules.iter().zip(&decisions) {
            if rule.decision != d.name(dec) {
                return Err(Error::Strategy(format!(
                    "expected rule for `{}`, found `{}`",
                    d.name(dec),
                    rule.decision
                )));
            }
            let configs = d.parent_indexer(dec).total();
            if rule.choices.len() != configs {
                return Err(Error::Strategy(format!(
                    "rule for `{}` has {} entries, expected {configs}",
                    rule.decision,
                    rule.choices.len()
                )));
            }
            if let Some(bad) = rule.choices.iter().find(|&&c| c >= d.num_states(dec)) {
                return Err(Error::Strategy(format!(
                    "rule for `{}` chooses state {bad} of {}",
                    rule.decision,
                    d.num_states(dec)
                )));
            }
        }
        Ok(Self { rules })
    }

    /// Builds a strategy by asking `choose(decision, parent_config)`.
    pub fn from_fn(d: &InfluenceDiagram, mut choose: impl FnMut(NodeId, usize) -> usize) -> Result<Self> {
        let rules = d
            .decisions()
            .into_iter()
            .map(|dec| DecisionRule {
                decision: d.name(dec).to_string(),
                choices: (0..d.parent_indexer(dec).total()).map(|c| choose(dec, c)).collect(),
            })
            .collect();
        Self::new(d, rules)
    }

    pub(crate) fn from_rules_unchecked(rules: Vec<DecisionRule>) -> Self {
        Self { rules }
    }

    pub fn rules(&self) -> &[DecisionRule] {
        &self.rules
    }

    pub fn rule(&self, decision: &str) -> Option<&DecisionRule> {
        self.rules.iter().find(|r| r.decision == decision)
    }

    /// Per-node lookup table: `Some(choices)` for decision nodes of `d`.
    pub fn resolve<'a>(&'a self, d: &InfluenceDiagram) -> Result<Vec<Option<&'a [usize]>>> {
        let mut out = vec![None; d.len()];
        for dec in d.decisions() {
            let rule = self.rule(d.name(dec)).ok_or_else(|| {
                Error::Strategy(format!("no rule for decision `{}`", d.name(dec)))
            })?;
            if rule.choices.len() != d.parent_indexer(dec).total()
                || rule.choices.iter().any(|&c| c >= d.num_states(dec))
            {
                return Err(Error::Strategy(format!(
                    "rule for `{}` does not fit the diagram",
                    rule.decision
                )));
            }
            out[dec.index()] = Some(rule.choices.as_slice());
        }
        Ok(out)
    }

    /// Re-keys this strategy onto another diagram sharing the decision nodes.
    pub fn for_diagram(&self, d: &InfluenceDiagram) -> Result<Self> {
        let rules = d
            .decisions()
            .into_iter()
            .map(|dec| {
                self.rule(d.name(dec)).cloned().ok_or_else(|| {
                    Error::Strategy(format!("no rule for decision `{}`", d.name(dec)))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(d, rules)
    }
}
