//! Solver-agnostic mixed-integer model and its compilation from a rooted
//! junction tree.
//!
//! Variables per cluster `C_j` hold the joint probability `mu` of every
//! configuration of the cluster; binary `delta` variables encode the
//! decision rules. Risk specifications add rows on top of the base model.

mod build;
mod risk;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;

use crate::diagram::NodeId;
use crate::error::{Error, Result};
use crate::indexer::ConfigIndexer;
use crate::risk::{CvarMode, Sense};

pub use build::{build_base_model, build_base_model_with, build_model, build_model_with, BuildOptions, Coupling};
pub use risk::{add_risk, select_cluster, DEFAULT_CVAR_EPSILON_SINGLE};

pub const DEFAULT_CLUSTER_CAP: u128 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Continuous { lo: f64, hi: f64 },
    Binary,
    Free,
}

impl Domain {
    pub const UNIT: Domain = Domain::Continuous { lo: 0.0, hi: 1.0 };

    pub fn bounds(self) -> (f64, f64) {
        match self {
            Domain::Continuous { lo, hi } => (lo, hi),
            Domain::Binary => (0.0, 1.0),
            Domain::Free => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKind {
    Mu,
    Delta,
    Eta,
    Lambda,
    LambdaBar,
    Rho,
    RhoBar,
}

impl VarKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VarKind::Mu => "mu",
            VarKind::Delta => "delta",
            VarKind::Eta => "eta",
            VarKind::Lambda => "lam",
            VarKind::LambdaBar => "lambar",
            VarKind::Rho => "rho",
            VarKind::RhoBar => "rhobar",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub domain: Domain,
    pub kind: VarKind,
}

/// Constraint families, used for statistics and LP comments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    Normalization,
    LocalConsistency,
    ChanceCoupling,
    DecisionUpper,
    DecisionLower,
    StrategySum,
    Chance,
    Logical,
    Budget,
    CvarQuantile,
    CvarTail,
    CvarMass,
    CvarBound,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Normalization => "normalization",
            Family::LocalConsistency => "local-consistency",
            Family::ChanceCoupling => "chance-coupling",
            Family::DecisionUpper => "decision-upper",
            Family::DecisionLower => "decision-lower",
            Family::StrategySum => "strategy-sum",
            Family::Chance => "chance",
            Family::Logical => "logical",
            Family::Budget => "budget",
            Family::CvarQuantile => "cvar-quantile",
            Family::CvarTail => "cvar-tail",
            Family::CvarMass => "cvar-mass",
            Family::CvarBound => "cvar-bound",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Row is enforced only when the binary `var` equals `when`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Indicator {
    pub var: VarId,
    pub when: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<(f64, VarId)>,
    pub sense: Sense,
    pub rhs: f64,
    pub family: Family,
    /// Human-readable provenance: family plus cluster and configuration.
    pub tag: String,
    pub indicator: Option<Indicator>,
}

impl LinearConstraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(c, v)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violate the row (0 when satisfied or inactive).
    pub fn violation(&self, values: &[f64]) -> f64 {
        if let Some(ind) = self.indicator {
            if (values[ind.var.0] > 0.5) != ind.when {
                return 0.0;
            }
        }
        let a = self.activity(values);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

/// `mu` variables of one cluster, contiguous from `first` in the order of
/// `indexer` (the cluster members in topological order).
#[derive(Debug, Clone, PartialEq)]
pub struct MuBlock {
    pub root: NodeId,
    pub indexer: ConfigIndexer,
    pub first: VarId,
}

impl MuBlock {
    pub fn var(&self, config: usize) -> VarId {
        VarId(self.first.0 + config)
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.indexer.total()).map(|c| self.var(c))
    }
}

/// `delta` variables of one decision, laid out as `config * states + state`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaBlock {
    pub decision: NodeId,
    pub configs: usize,
    pub states: usize,
    pub first: VarId,
}

impl DeltaBlock {
    pub fn var(&self, config: usize, state: usize) -> VarId {
        VarId(self.first.0 + config * self.states + state)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    /// Indexed by cluster root.
    pub mu: Vec<MuBlock>,
    /// Decisions in declaration order.
    pub delta: Vec<DeltaBlock>,
}

impl Catalog {
    pub fn mu(&self, root: NodeId) -> &MuBlock {
        &self.mu[root.index()]
    }

    pub fn delta(&self, decision: NodeId) -> Option<&DeltaBlock> {
        self.delta.iter().find(|b| b.decision == decision)
    }
}

/// Variables and data of one CVaR block.
#[derive(Debug, Clone, PartialEq)]
pub struct CvarBlock {
    pub alpha: f64,
    pub mode: CvarMode,
    pub value_node: NodeId,
    /// Sorted distinct utilities `U`.
    pub utilities: Vec<f64>,
    /// `mu` variables summed into `p(u)` for each utility.
    pub mass: Vec<Vec<VarId>>,
    pub epsilon: f64,
    pub big_m: f64,
    pub eta: VarId,
    pub lambda: Vec<VarId>,
    pub lambda_bar: Vec<VarId>,
    pub rho: Vec<VarId>,
    pub rho_bar: Vec<VarId>,
}

impl CvarBlock {
    pub fn probabilities(&self, values: &[f64]) -> Vec<f64> {
        self.mass
            .iter()
            .map(|vars| vars.iter().map(|v| values[v.0]).sum())
            .collect()
    }

    /// Writes the canonical assignment of the block's variables for the
    /// `mu` already in `values`: `eta` is the alpha-quantile, `lambda`
    /// marks utilities below it, `lambda_bar` those not above it.
    pub fn fill(&self, values: &mut [f64]) -> Result<()> {
        let p = self.probabilities(values);
        let atoms: Vec<(f64, f64)> = self.utilities.iter().copied().zip(p.iter().copied()).collect();
        let (eta, weights) = crate::inference::tail_weights(&atoms, self.alpha)?;
        values[self.eta.0] = eta;
        for (k, &u) in self.utilities.iter().enumerate() {
            let below = u < eta;
            values[self.lambda[k].0] = below as u8 as f64;
            values[self.lambda_bar[k].0] = (u <= eta) as u8 as f64;
            values[self.rho[k].0] = if below { p[k] } else { 0.0 };
            values[self.rho_bar[k].0] = weights[k];
        }
        Ok(())
    }

    /// `(1/alpha) * sum rho_bar(u) u` under `values`.
    pub fn cvar(&self, values: &[f64]) -> f64 {
        let tail: f64 = self
            .utilities
            .iter()
            .zip(&self.rho_bar)
            .map(|(u, v)| u * values[v.0])
            .sum();
        tail / self.alpha
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub row: usize,
    pub amount: f64,
}

/// A linear objective (always maximized) over declared variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MipModel {
    variables: Vec<Variable>,
    constraints: Vec<LinearConstraint>,
    objective: Vec<(f64, VarId)>,
    objective_label: String,
    catalog: Catalog,
    cvar: Vec<CvarBlock>,
    names: HashMap<String, VarId>,
}

impl MipModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, v: VarId) -> &Variable {
        &self.variables[v.0]
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.names.get(name).copied()
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(f64, VarId)] {
        &self.objective
    }

    /// `meu` or `cvar:<alpha>`.
    pub fn objective_label(&self) -> &str {
        &self.objective_label
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn cvar_blocks(&self) -> &[CvarBlock] {
        &self.cvar
    }

    pub fn add_var(&mut self, name: impl Into<String>, domain: Domain, kind: VarKind) -> Result<VarId> {
        let name = name.into();
        if self.names.contains_key(&name) {
            return Err(Error::Model(format!("duplicate variable name `{name}`")));
        }
        let id = VarId(self.variables.len());
        self.names.insert(name.clone(), id);
        self.variables.push(Variable { name, domain, kind });
        Ok(id)
    }

    /// Adds a row, merging repeated variables and dropping zero coefficients.
    pub fn add_constraint(
        &mut self,
        terms: impl IntoIterator<Item = (f64, VarId)>,
        sense: Sense,
        rhs: f64,
        family: Family,
        tag: impl Into<String>,
    ) -> Result<usize> {
        self.add_row(terms, sense, rhs, family, tag.into(), None)
    }

    pub fn add_indicator(
        &mut self,
        indicator: Indicator,
        terms: impl IntoIterator<Item = (f64, VarId)>,
        sense: Sense,
        rhs: f64,
        family: Family,
        tag: impl Into<String>,
    ) -> Result<usize> {
        self.add_row(terms, sense, rhs, family, tag.into(), Some(indicator))
    }

    fn add_row(
        &mut self,
        terms: impl IntoIterator<Item = (f64, VarId)>,
        sense: Sense,
        rhs: f64,
        family: Family,
        tag: String,
        indicator: Option<Indicator>,
    ) -> Result<usize> {
        let mut merged: BTreeMap<VarId, f64> = BTreeMap::new();
        for (c, v) in terms {
            if v.0 >= self.variables.len() {
                return Err(Error::Model(format!("row `{tag}` uses undeclared variable {}", v.0)));
            }
            *merged.entry(v).or_insert(0.0) += c;
        }
        if !rhs.is_finite() || merged.values().any(|c| !c.is_finite()) {
            return Err(Error::Model(format!("row `{tag}` has a non-finite coefficient")));
        }
        let terms = merged.into_iter().filter(|&(_, c)| c != 0.0).map(|(v, c)| (c, v)).collect();
        self.constraints.push(LinearConstraint {
            terms,
            sense,
            rhs,
            family,
            tag,
            indicator,
        });
        Ok(self.constraints.len() - 1)
    }

    pub fn set_objective(&mut self, terms: Vec<(f64, VarId)>, label: impl Into<String>) {
        self.objective = terms.into_iter().filter(|t| t.0 != 0.0).collect();
        self.objective_label = label.into();
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(c, v)| c * values[v.0]).sum()
    }

    /// Rows and variable domains violated by more than `tol`.
    pub fn violations(&self, values: &[f64], tol: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        for (row, c) in self.constraints.iter().enumerate() {
            let amount = c.violation(values);
            if amount > tol || amount.is_nan() {
                out.push(Violation { row, amount });
            }
        }
        out
    }

    /// Variables outside their domain by more than `tol` (binaries must be
    /// within `tol` of 0 or 1).
    pub fn domain_violations(&self, values: &[f64], tol: f64) -> Vec<(VarId, f64)> {
        let mut out = Vec::new();
        for (i, var) in self.variables.iter().enumerate() {
            let x = values[i];
            let (lo, hi) = var.domain.bounds();
            let mut amount = (lo - x).max(x - hi).max(0.0);
            if var.domain == Domain::Binary {
                amount = amount.max(x.min(1.0 - x).max(0.0));
            }
            if amount > tol || x.is_nan() {
                out.push((VarId(i), amount));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ModelStats {
    pub variables: usize,
    pub binaries: usize,
    pub rows: usize,
    pub nonzeros: usize,
    pub rows_by_family: BTreeMap<String, usize>,
    pub vars_by_kind: BTreeMap<String, usize>,
    /// Member count of the largest cluster.
    pub largest_cluster: usize,
    /// Configuration count of the largest cluster.
    pub largest_cluster_configs: usize,
}

impl ModelStats {
    pub fn family(&self, f: Family) -> usize {
        self.rows_by_family.get(f.as_str()).copied().unwrap_or(0)
    }

    pub fn kind(&self, k: VarKind) -> usize {
        self.vars_by_kind.get(k.as_str()).copied().unwrap_or(0)
    }
}

pub fn model_stats(model: &MipModel) -> ModelStats {
    let mut s = ModelStats {
        variables: model.variables.len(),
        rows: model.constraints.len(),
        ..Default::default()
    };
    for v in &model.variables {
        *s.vars_by_kind.entry(v.kind.as_str().to_string()).or_default() += 1;
        s.binaries += (v.domain == Domain::Binary) as usize;
    }
    for c in &model.constraints {
        *s.rows_by_family.entry(c.family.as_str().to_string()).or_default() += 1;
        s.nonzeros += c.terms.len();
    }
    for b in &model.catalog.mu {
        if b.indexer.total() > s.largest_cluster_configs
            || (b.indexer.total() == s.largest_cluster_configs && b.indexer.len() > s.largest_cluster)
        {
            s.largest_cluster_configs = b.indexer.total();
            s.largest_cluster = b.indexer.len();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_merge_duplicates_and_drop_zeros() {
        let mut m = MipModel::new();
        let x = m.add_var("x", Domain::UNIT, VarKind::Mu).unwrap();
        let y = m.add_var("y", Domain::UNIT, VarKind::Mu).unwrap();
        m.add_constraint([(1.0, x), (0.5, y), (-1.0, x)], Sense::Le, 1.0, Family::Chance, "t")
            .unwrap();
        assert_eq!(m.constraints()[0].terms, vec![(0.5, y)]);
        assert!(m.add_var("x", Domain::Binary, VarKind::Delta).is_err());
        assert!(m
            .add_constraint([(f64::NAN, x)], Sense::Le, 0.0, Family::Chance, "bad")
            .is_err());
    }

    #[test]
    fn empty_model_stats_are_zero() {
        let s = model_stats(&MipModel::new());
        assert_eq!(s, ModelStats::default());
        assert_eq!(s.family(Family::LocalConsistency), 0);
    }

    #[test]
    fn violation_amounts() {
        let mut m = MipModel::new();
        let x = m.add_var("x", Domain::Binary, VarKind::Delta).unwrap();
        let y = m.add_var("y", Domain::UNIT, VarKind::Mu).unwrap();
        m.add_constraint([(1.0, y)], Sense::Ge, 0.5, Family::Chance, "ge").unwrap();
        m.add_indicator(Indicator { var: x, when: false }, [(1.0, y)], Sense::Le, 0.0, Family::DecisionUpper, "ind")
            .unwrap();
        let v = m.violations(&[0.0, 0.2], 1e-9);
        assert_eq!(v.len(), 2);
        assert!((v[0].amount - 0.3).abs() < 1e-12);
        assert!(m.violations(&[1.0, 0.6], 1e-9).is_empty());
        assert_eq!(m.domain_violations(&[0.5, 0.6], 1e-6).len(), 1);
    }
}
