//! JSON file formats for diagrams and strategies.
//!
//! Diagram files hold `nodes` (ordered `{name, kind, states, parents}`),
//! `cpts` (name to flat table, parent configuration outer, state inner) and
//! `utilities` (name to one real per state). Strategy files map each
//! decision name to the chosen state label per parent configuration.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagram::{DecisionRule, DiagramBuilder, InfluenceDiagram, NodeKind, Strategy};
use crate::error::{Error, Result};
use crate::transform::MergedValueMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEntry {
    pub name: String,
    pub kind: NodeKind,
    pub states: Vec<String>,
    #[serde(default)]
    pub parents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramFile {
    pub nodes: Vec<NodeEntry>,
    #[serde(default)]
    pub cpts: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub utilities: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merged_values: Option<MergedValueMap>,
}

impl DiagramFile {
    pub fn from_diagram(d: &InfluenceDiagram) -> Self {
        let mut cpts = BTreeMap::new();
        let mut utilities = BTreeMap::new();
        let nodes = d
            .ids()
            .map(|j| {
                let node = d.node(j);
                if let Some(t) = d.cpt(j) {
                    cpts.insert(node.name.clone(), t.to_vec());
                }
                if let Some(u) = d.utilities(j) {
                    utilities.insert(node.name.clone(), u.to_vec());
                }
                NodeEntry {
                    name: node.name.clone(),
                    kind: node.kind,
                    states: node.states.clone(),
                    parents: node.parents.iter().map(|&p| d.name(p).to_string()).collect(),
                }
            })
            .collect();
        Self {
            nodes,
            cpts,
            utilities,
            merged_values: None,
        }
    }

    pub fn to_diagram(&self) -> Result<InfluenceDiagram> {
        let mut b = DiagramBuilder::new();
        for n in &self.nodes {
            b.node(n.name.clone(), n.kind, n.states.clone(), n.parents.clone());
        }
        for (name, t) in &self.cpts {
            b.set_cpt(name, t.clone())?;
        }
        for (name, u) in &self.utilities {
            b.set_utilities(name, u.clone())?;
        }
        b.build()
    }
}

pub fn diagram_to_json(d: &InfluenceDiagram) -> String {
    serde_json::to_string_pretty(&DiagramFile::from_diagram(d)).expect("diagram serializes")
}

pub fn diagram_from_json(text: &str) -> Result<InfluenceDiagram> {
    serde_json::from_str::<DiagramFile>(text)?.to_diagram()
}

pub fn read_diagram(path: impl AsRef<Path>) -> Result<InfluenceDiagram> {
    diagram_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_diagram(path: impl AsRef<Path>, d: &InfluenceDiagram) -> Result<()> {
    std::fs::write(path, diagram_to_json(d))?;
    Ok(())
}

pub type StrategyFile = BTreeMap<String, Vec<String>>;

pub fn strategy_to_file(d: &InfluenceDiagram, s: &Strategy) -> Result<StrategyFile> {
    let mut out = StrategyFile::new();
    for rule in s.rules() {
        let dec = d.id(&rule.decision)?;
        let labels = rule
            .choices
            .iter()
            .map(|&c| d.node(dec).states[c].clone())
            .collect();
        out.insert(rule.decision.clone(), labels);
    }
    Ok(out)
}

pub fn strategy_from_file(d: &InfluenceDiagram, file: &StrategyFile) -> Result<Strategy> {
    if let Some(extra) = file.keys().find(|k| d.id(k).is_err()) {
        return Err(Error::UnknownNode(extra.clone()));
    }
    let rules = d
        .decisions()
        .into_iter()
        .map(|dec| {
            let name = d.name(dec);
            let labels = file
                .get(name)
                .ok_or_else(|| Error::Strategy(format!("no rule for decision `{name}`")))?;
            let choices = labels
                .iter()
                .map(|l| d.state_index(dec, l))
                .collect::<Result<Vec<_>>>()?;
            Ok(DecisionRule {
                decision: name.to_string(),
                choices,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Strategy::new(d, rules)
}

pub fn strategy_to_json(d: &InfluenceDiagram, s: &Strategy) -> Result<String> {
    Ok(serde_json::to_string_pretty(&strategy_to_file(d, s)?)?)
}

pub fn strategy_from_json(d: &InfluenceDiagram, text: &str) -> Result<Strategy> {
    strategy_from_file(d, &serde_json::from_str(text)?)
}
