//! Collapsing all value nodes of a diagram into one.
//!
//! The merged node takes the union of the value nodes' parents, a state per
//! tuple of component states, the product of the component tables and the
//! sum of component utilities. Chance and decision nodes keep their tables
//! and arcs, so any strategy of the original applies unchanged.

use serde::{Deserialize, Serialize};

use crate::diagram::{InfluenceDiagram, Node, NodeId, NodeKind};
use crate::error::{Error, Result};
use crate::indexer::ConfigIndexer;

pub const DEFAULT_MERGED_NAME: &str = "Vbar";
pub const DEFAULT_MERGED_STATE_CAP: u128 = 1 << 24;

/// Bijection between merged states and tuples of component value states.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedValueMap {
    pub merged: String,
    pub components: Vec<String>,
    pub radices: Vec<usize>,
}

impl MergedValueMap {
    pub fn size(&self) -> usize {
        self.radices.iter().product()
    }

    fn indexer(&self) -> ConfigIndexer {
        ConfigIndexer::new(
            (0..self.radices.len()).map(NodeId::from_index).collect(),
            self.radices.clone(),
        )
    }

    /// Component state indices of merged state `index`.
    pub fn components_of(&self, index: usize) -> Result<Vec<usize>> {
        self.indexer().states(index)
    }

    pub fn merged_index(&self, components: &[usize]) -> Result<usize> {
        self.indexer().index(components)
    }
}

#[derive(Debug, Clone)]
pub struct MergeOptions {
    pub name: String,
    pub state_cap: u128,
}

impl Default for MergeOptions {
    fn default() -> Self {
        Self {
            name: DEFAULT_MERGED_NAME.to_string(),
            state_cap: DEFAULT_MERGED_STATE_CAP,
        }
    }
}

pub fn merge_value_nodes(d: &InfluenceDiagram) -> Result<(InfluenceDiagram, MergedValueMap)> {
    merge_value_nodes_with(d, &MergeOptions::default())
}

pub fn merge_value_nodes_with(
    d: &InfluenceDiagram,
    opts: &MergeOptions,
) -> Result<(InfluenceDiagram, MergedValueMap)> {
    d.ensure_valid()?;
    let values = d.value_nodes();
    if values.is_empty() {
        return Err(Error::Transform("diagram has no value nodes".into()));
    }
    let mut name = opts.name.clone();
    while d.id(&name).is_ok_and(|j| !(values.len() == 1 && j == values[0])) {
        name.push('_');
    }

    let size = values
        .iter()
        .fold(1u128, |acc, &v| acc.saturating_mul(d.num_states(v) as u128));
    if size > opts.state_cap {
        return Err(Error::CapExceeded {
            what: "merged value state space".into(),
            size,
            cap: opts.state_cap,
        });
    }
    let map = MergedValueMap {
        merged: name.clone(),
        components: values.iter().map(|&v| d.name(v).to_string()).collect(),
        radices: values.iter().map(|&v| d.num_states(v)).collect(),
    };

    if values.len() == 1 {
        // Already a single value node: rename only, keep parent order and position.
        let v = values[0];
        let mut nodes = d.nodes().to_vec();
        nodes[v.index()].name = name;
        let out = InfluenceDiagram::from_parts(
            nodes,
            d.ids().map(|j| d.cpt(j).map(<[f64]>::to_vec)).collect(),
            d.ids().map(|j| d.utilities(j).map(<[f64]>::to_vec)).collect(),
        )?;
        return Ok((out, map));
    }

    let order = d.topological_order()?;
    let rank = d.check_order(&order)?;

    // Old id -> new id for chance and decision nodes, declaration order kept.
    let mut remap = vec![None; d.len()];
    let mut kept = Vec::new();
    for j in d.ids().filter(|&j| d.kind(j) != NodeKind::Value) {
        remap[j.index()] = Some(NodeId::from_index(kept.len()));
        kept.push(j);
    }

    let mut merged_parents: Vec<NodeId> = Vec::new();
    for &v in &values {
        for &p in d.parents(v) {
            if !merged_parents.contains(&p) {
                merged_parents.push(p);
            }
        }
    }
    merged_parents.sort_by_key(|p| rank[p.index()]);

    let parent_ix = d.indexer(&merged_parents);
    let component_parent_ix: Vec<ConfigIndexer> = values.iter().map(|&v| d.parent_indexer(v)).collect();
    let value_ix = d.indexer(&values);
    let width = value_ix.total();

    let mut table = Vec::with_capacity(parent_ix.total() * width);
    let mut tuple = vec![0; values.len()];
    for pcfg in 0..parent_ix.total() {
        let rows: Vec<usize> = component_parent_ix
            .iter()
            .map(|ix| parent_ix.project(pcfg, ix))
            .collect();
        for k in 0..width {
            value_ix.states_into(k, &mut tuple);
            let mut p = 1.0;
            for (c, &v) in values.iter().enumerate() {
                p *= d.prob(v, rows[c], tuple[c]);
            }
            table.push(p);
        }
    }

    let mut utilities = Vec::with_capacity(width);
    let mut labels = Vec::with_capacity(width);
    for k in 0..width {
        value_ix.states_into(k, &mut tuple);
        let mut u = 0.0;
        for (c, &v) in values.iter().enumerate() {
            u += d.utilities(v).expect("value node has utilities")[tuple[c]];
        }
        utilities.push(u);
        labels.push(
            values
                .iter()
                .zip(&tuple)
                .map(|(&v, &s)| d.node(v).states[s].as_str())
                .collect::<Vec<_>>()
                .join(","),
        );
    }

    let mut nodes: Vec<Node> = kept
        .iter()
        .map(|&j| {
            let n = d.node(j);
            Node {
                name: n.name.clone(),
                kind: n.kind,
                states: n.states.clone(),
                parents: n.parents.iter().map(|p| remap[p.index()].expect("non-value parent")).collect(),
            }
        })
        .collect();
    let mut cpts: Vec<Option<Vec<f64>>> = kept.iter().map(|&j| d.cpt(j).map(<[f64]>::to_vec)).collect();
    let mut utils: Vec<Option<Vec<f64>>> = vec![None; kept.len()];

    nodes.push(Node {
        name,
        kind: NodeKind::Value,
        states: labels,
        parents: merged_parents
            .iter()
            .map(|p| remap[p.index()].expect("non-value parent"))
            .collect(),
    });
    cpts.push(Some(table));
    utils.push(Some(utilities));

    let out = InfluenceDiagram::from_parts(nodes, cpts, utils)?;
    debug_assert!(out.validate().is_empty(), "{:?}", out.validate());
    Ok((out, map))
}
