//! Objectives and risk specifications shared by the exhaustive oracle and
//! the model compiler.
//!
//! Events are written over node states: a [`Predicate`] is a disjunction of
//! conjunctions of `node=state` conditions. A chance constraint bounds the
//! probability of an event; a logical constraint forbids it outright; a
//! budget constraint forbids every configuration whose summed state costs
//! exceed a limit.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::diagram::{InfluenceDiagram, NodeId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        })
    }
}

impl Sense {
    /// Whether `lhs sense rhs` holds with slack `tol`.
    pub fn holds(self, lhs: f64, rhs: f64, tol: f64) -> bool {
        match self {
            Sense::Le => lhs <= rhs + tol,
            Sense::Ge => lhs >= rhs - tol,
            Sense::Eq => (lhs - rhs).abs() <= tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub node: String,
    pub state: String,
}

/// Disjunction of conjunctions of `node=state` conditions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicate {
    pub clauses: Vec<Vec<Condition>>,
}

impl Predicate {
    /// Parses `A=x&B=y|C=z` (`&` binds tighter than `|`).
    pub fn parse(text: &str) -> Result<Self> {
        let clauses = text
            .split('|')
            .map(|clause| {
                clause
                    .split('&')
                    .map(|cond| {
                        let (node, state) = cond
                            .split_once('=')
                            .ok_or_else(|| Error::Parse(format!("expected node=state, got `{}`", cond.trim())))?;
                        let (node, state) = (node.trim(), state.trim());
                        if node.is_empty() || state.is_empty() {
                            return Err(Error::Parse(format!("empty side in `{}`", cond.trim())));
                        }
                        Ok(Condition {
                            node: node.to_string(),
                            state: state.to_string(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { clauses })
    }

    pub fn nodes(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in self.clauses.iter().flatten() {
            if !out.contains(&c.node.as_str()) {
                out.push(&c.node);
            }
        }
        out
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self
            .clauses
            .iter()
            .map(|c| {
                c.iter()
                    .map(|x| format!("{}={}", x.node, x.state))
                    .collect::<Vec<_>>()
                    .join("&")
            })
            .collect::<Vec<_>>()
            .join("|");
        f.write_str(&s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CvarMode {
    /// Maximize CVaR.
    Objective,
    /// Require CVaR to be at least the threshold.
    AtLeast(f64),
}

/// One risk requirement. `cluster` pins the cluster the row is written on;
/// when absent the smallest cluster containing the event's scope is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RiskSpec {
    Chance {
        cluster: Option<String>,
        predicate: Predicate,
        sense: Sense,
        p: f64,
    },
    Logical {
        cluster: Option<String>,
        predicate: Predicate,
    },
    Budget {
        cluster: Option<String>,
        /// node -> state label -> cost; unlisted states cost nothing.
        costs: BTreeMap<String, BTreeMap<String, f64>>,
        limit: f64,
    },
    Cvar {
        alpha: f64,
        mode: CvarMode,
        /// Value node whose utility is measured; defaults to the only one.
        value_node: Option<String>,
    },
}

impl RiskSpec {
    pub fn chance(predicate: &str, sense: Sense, p: f64) -> Result<Self> {
        Ok(RiskSpec::Chance {
            cluster: None,
            predicate: Predicate::parse(predicate)?,
            sense,
            p,
        })
    }

    pub fn logical(predicate: &str) -> Result<Self> {
        Ok(RiskSpec::Logical {
            cluster: None,
            predicate: Predicate::parse(predicate)?,
        })
    }

    pub fn cvar_objective(alpha: f64) -> Self {
        RiskSpec::Cvar {
            alpha,
            mode: CvarMode::Objective,
            value_node: None,
        }
    }

    /// Parses `P(<predicate>)<=p` or `P(<predicate>)>=p`.
    pub fn parse_chance(text: &str) -> Result<Self> {
        let t = text.trim();
        let body = t
            .strip_prefix("P(")
            .ok_or_else(|| Error::Parse(format!("chance spec must start with `P(`: `{t}`")))?;
        let close = body
            .rfind(')')
            .ok_or_else(|| Error::Parse(format!("missing `)` in `{t}`")))?;
        let (pred, tail) = (&body[..close], body[close + 1..].trim());
        let (sense, num) = if let Some(n) = tail.strip_prefix("<=") {
            (Sense::Le, n)
        } else if let Some(n) = tail.strip_prefix(">=") {
            (Sense::Ge, n)
        } else {
            return Err(Error::Parse(format!("expected `<=` or `>=` after `)` in `{t}`")));
        };
        let p: f64 = num
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad probability `{}`", num.trim())))?;
        let spec = Self::chance(pred, sense, p)?;
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        match self {
            RiskSpec::Chance { p, .. } if !(0.0..=1.0).contains(p) => Err(Error::InvalidThreshold(*p)),
            RiskSpec::Cvar { alpha, .. } if !(*alpha > 0.0 && *alpha <= 1.0) => Err(Error::InvalidAlpha(*alpha)),
            _ => Ok(()),
        }
    }

    pub fn with_cluster(mut self, root: &str) -> Self {
        match &mut self {
            RiskSpec::Chance { cluster, .. } | RiskSpec::Logical { cluster, .. } | RiskSpec::Budget { cluster, .. } => {
                *cluster = Some(root.to_string())
            }
            RiskSpec::Cvar { .. } => {}
        }
        self
    }

    pub fn pinned_cluster(&self) -> Option<&str> {
        match self {
            RiskSpec::Chance { cluster, .. } | RiskSpec::Logical { cluster, .. } | RiskSpec::Budget { cluster, .. } => {
                cluster.as_deref()
            }
            RiskSpec::Cvar { .. } => None,
        }
    }

    /// The event and its probability bound, for every spec except CVaR.
    pub fn resolve_event(&self, d: &InfluenceDiagram) -> Result<Option<BoundedEvent>> {
        self.check()?;
        Ok(match self {
            RiskSpec::Chance { predicate, sense, p, .. } => Some(BoundedEvent {
                event: Event::from_predicate(d, predicate)?,
                sense: *sense,
                p: *p,
            }),
            RiskSpec::Logical { predicate, .. } => Some(BoundedEvent {
                event: Event::from_predicate(d, predicate)?,
                sense: Sense::Le,
                p: 0.0,
            }),
            RiskSpec::Budget { costs, limit, .. } => Some(BoundedEvent {
                event: Event::from_budget(d, costs, *limit)?,
                sense: Sense::Le,
                p: 0.0,
            }),
            RiskSpec::Cvar { .. } => None,
        })
    }

    pub fn label(&self) -> String {
        match self {
            RiskSpec::Chance { predicate, sense, p, .. } => format!("chance P({predicate}){sense}{p}"),
            RiskSpec::Logical { predicate, .. } => format!("logical not({predicate})"),
            RiskSpec::Budget { limit, .. } => format!("budget cost<={limit}"),
            RiskSpec::Cvar { alpha, mode, .. } => match mode {
                CvarMode::Objective => format!("cvar objective alpha={alpha}"),
                CvarMode::AtLeast(t) => format!("cvar alpha={alpha} >= {t}"),
            },
        }
    }
}

/// An event over the states of `scope`.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub scope: Vec<NodeId>,
    kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
enum EventKind {
    /// Clauses of (scope position, state).
    Predicate(Vec<Vec<(usize, usize)>>),
    /// Per-scope-node state costs; the event is total cost > limit.
    BudgetExceeded { costs: Vec<Vec<f64>>, limit: f64 },
}

impl Event {
    pub fn from_predicate(d: &InfluenceDiagram, p: &Predicate) -> Result<Self> {
        let mut scope: Vec<NodeId> = Vec::new();
        let mut clauses = Vec::with_capacity(p.clauses.len());
        for clause in &p.clauses {
            let mut out = Vec::with_capacity(clause.len());
            for c in clause {
                let id = d.id(&c.node)?;
                let state = d.state_index(id, &c.state)?;
                let pos = match scope.iter().position(|&x| x == id) {
                    Some(pos) => pos,
                    None => {
                        scope.push(id);
                        scope.len() - 1
                    }
                };
                out.push((pos, state));
            }
            clauses.push(out);
        }
        Ok(Self {
            scope,
            kind: EventKind::Predicate(clauses),
        })
    }

    pub fn from_budget(
        d: &InfluenceDiagram,
        costs: &BTreeMap<String, BTreeMap<String, f64>>,
        limit: f64,
    ) -> Result<Self> {
        let mut scope = Vec::new();
        let mut table = Vec::new();
        for (node, per_state) in costs {
            let id = d.id(node)?;
            let mut row = vec![0.0; d.num_states(id)];
            for (label, &c) in per_state {
                row[d.state_index(id, label)?] = c;
            }
            scope.push(id);
            table.push(row);
        }
        Ok(Self {
            scope,
            kind: EventKind::BudgetExceeded { costs: table, limit },
        })
    }

    /// Evaluates the event given the state of each scope node.
    pub fn holds(&self, states: &[usize]) -> bool {
        match &self.kind {
            EventKind::Predicate(clauses) => clauses
                .iter()
                .any(|clause| clause.iter().all(|&(pos, s)| states[pos] == s)),
            EventKind::BudgetExceeded { costs, limit } => {
                let total: f64 = costs.iter().zip(states).map(|(row, &s)| row[s]).sum();
                total > *limit
            }
        }
    }

    /// Evaluates the event with a lookup from node to state.
    pub fn holds_with(&self, state_of: impl Fn(NodeId) -> usize) -> bool {
        let states: Vec<usize> = self.scope.iter().map(|&j| state_of(j)).collect();
        self.holds(&states)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundedEvent {
    pub event: Event,
    pub sense: Sense,
    pub p: f64,
}

/// What the oracle maximizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Objective {
    Meu,
    Cvar { alpha: f64, value_node: Option<String> },
}

impl Objective {
    pub fn cvar(alpha: f64) -> Self {
        Objective::Cvar { alpha, value_node: None }
    }

    /// Parses `meu` or `cvar:<alpha>`.
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "meu" => Ok(Objective::Meu),
            t => {
                let a = t
                    .strip_prefix("cvar:")
                    .ok_or_else(|| Error::Parse(format!("objective must be `meu` or `cvar:<alpha>`, got `{t}`")))?;
                let alpha: f64 = a.parse().map_err(|_| Error::Parse(format!("bad alpha `{a}`")))?;
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(Error::InvalidAlpha(alpha));
                }
                Ok(Objective::cvar(alpha))
            }
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Meu => f.write_str("meu"),
            Objective::Cvar { alpha, .. } => write!(f, "cvar:{alpha}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{pig_farm, PigFarmSpec};

    #[test]
    fn parse_chance_spec() {
        let s = RiskSpec::parse_chance("P(H1=ill|H2=ill|H3=ill|H4=ill)<=0.4").unwrap();
        match &s {
            RiskSpec::Chance { predicate, sense, p, .. } => {
                assert_eq!(predicate.clauses.len(), 4);
                assert_eq!(*sense, Sense::Le);
                assert_eq!(*p, 0.4);
                assert_eq!(predicate.to_string(), "H1=ill|H2=ill|H3=ill|H4=ill");
            }
            _ => unreachable!(),
        }
        assert!(RiskSpec::parse_chance("P(H1=ill)<0.4").is_err());
        assert!(RiskSpec::parse_chance("H1=ill<=0.4").is_err());
        assert!(RiskSpec::parse_chance("P(H1=ill)<=1.5").is_err());
        assert!(RiskSpec::parse_chance("P(H1)<=0.5").is_err());
        assert!(matches!(
            RiskSpec::parse_chance("P(H1=ill)>=0.05"),
            Ok(RiskSpec::Chance { sense: Sense::Ge, .. })
        ));
    }

    #[test]
    fn event_evaluation() {
        let d = pig_farm(&PigFarmSpec::default());
        let spec = RiskSpec::logical("D1=treat&D2=treat&D3=treat").unwrap();
        let ev = spec.resolve_event(&d).unwrap().unwrap();
        assert_eq!(ev.p, 0.0);
        assert_eq!(ev.event.scope.len(), 3);
        assert!(ev.event.holds(&[0, 0, 0]));
        assert!(!ev.event.holds(&[0, 1, 0]));
        assert!(spec.resolve_event(&pig_farm(&PigFarmSpec::with_periods(1))).is_err());

        let mut costs = BTreeMap::new();
        for k in 1..=3 {
            costs.insert(format!("D{k}"), BTreeMap::from([("treat".to_string(), 100.0)]));
        }
        let budget = RiskSpec::Budget {
            cluster: None,
            costs,
            limit: 200.0,
        };
        let ev = budget.resolve_event(&d).unwrap().unwrap();
        assert!(ev.event.holds(&[0, 0, 0]));
        assert!(!ev.event.holds(&[0, 0, 1]));
    }

    #[test]
    fn objective_grammar() {
        assert_eq!(Objective::parse("meu").unwrap(), Objective::Meu);
        assert_eq!(Objective::parse("cvar:0.15").unwrap(), Objective::cvar(0.15));
        assert!(matches!(Objective::parse("cvar:0"), Err(Error::InvalidAlpha(_))));
        assert!(Objective::parse("var:0.1").is_err());
    }
}
