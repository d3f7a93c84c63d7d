//! Gradual rooted junction trees.
//!
//! A tree holds one cluster per diagram node. Cluster `C_j` is rooted at
//! node `j`, contains `j` and its parents, and the clusters holding any node
//! form a connected subtree whose top is that node's own cluster.

use std::collections::BTreeSet;
use std::fmt;

use crate::diagram::{InfluenceDiagram, NodeId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub root: NodeId,
    /// Members sorted by position in the tree's topological order.
    pub members: Vec<NodeId>,
}

impl Cluster {
    pub fn contains(&self, j: NodeId) -> bool {
        self.members.contains(&j)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedJunctionTree {
    order: Vec<NodeId>,
    rank: Vec<usize>,
    clusters: Vec<Cluster>,
    parent: Vec<Option<NodeId>>,
}

impl RootedJunctionTree {
    /// Assembles a tree from explicit clusters and arcs `(parent, child)`.
    /// Only shape is checked here; use [`validate_rjt`] for the tree rules.
    pub fn from_parts(
        d: &InfluenceDiagram,
        order: Vec<NodeId>,
        clusters: Vec<(NodeId, Vec<NodeId>)>,
        arcs: &[(NodeId, NodeId)],
    ) -> Result<Self> {
        let rank = d.check_order(&order)?;
        let n = d.len();
        let mut slots: Vec<Option<Cluster>> = vec![None; n];
        for (root, mut members) in clusters {
            if root.index() >= n || members.iter().any(|m| m.index() >= n) {
                return Err(Error::UnknownNode(format!("index {}", root.index())));
            }
            members.sort_by_key(|m| rank[m.index()]);
            members.dedup();
            slots[root.index()] = Some(Cluster { root, members });
        }
        let clusters = slots
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.ok_or_else(|| Error::InvalidOrder(format!("no cluster rooted at `{}`", d.name(NodeId::from_index(i))))))
            .collect::<Result<Vec<_>>>()?;
        let mut parent = vec![None; n];
        for &(p, c) in arcs {
            if parent[c.index()].replace(p).is_some() {
                return Err(Error::InvalidOrder(format!("cluster `{}` has two parents", d.name(c))));
            }
        }
        Ok(Self {
            order,
            rank,
            clusters,
            parent,
        })
    }

    /// [`from_parts`](Self::from_parts) with node names.
    pub fn from_names(
        d: &InfluenceDiagram,
        order: &[&str],
        clusters: &[(&str, &[&str])],
        arcs: &[(&str, &str)],
    ) -> Result<Self> {
        let order = d.order_from_names(order)?;
        let clusters = clusters
            .iter()
            .map(|(r, ms)| Ok((d.id(r)?, ms.iter().map(|m| d.id(m)).collect::<Result<Vec<_>>>()?)))
            .collect::<Result<Vec<_>>>()?;
        let arcs = arcs
            .iter()
            .map(|(p, c)| Ok((d.id(p)?, d.id(c)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(d, order, clusters, &arcs)
    }

    pub fn order(&self) -> &[NodeId] {
        &self.order
    }

    pub fn rank(&self, j: NodeId) -> usize {
        self.rank[j.index()]
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn cluster(&self, root: NodeId) -> &Cluster {
        &self.clusters[root.index()]
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    /// Clusters in topological order of their roots.
    pub fn clusters_in_order(&self) -> impl Iterator<Item = &Cluster> + '_ {
        self.order.iter().map(move |&j| &self.clusters[j.index()])
    }

    pub fn parent(&self, root: NodeId) -> Option<NodeId> {
        self.parent[root.index()]
    }

    pub fn children(&self, root: NodeId) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = (0..self.parent.len())
            .filter(|&c| self.parent[c] == Some(root))
            .map(NodeId::from_index)
            .collect();
        out.sort_by_key(|c| self.rank[c.index()]);
        out
    }

    /// Arcs `(parent, child)` ordered by the child's position in the order.
    pub fn arcs(&self) -> Vec<(NodeId, NodeId)> {
        self.order
            .iter()
            .filter_map(|&c| self.parent[c.index()].map(|p| (p, c)))
            .collect()
    }

    pub fn tree_roots(&self) -> Vec<NodeId> {
        self.order
            .iter()
            .copied()
            .filter(|c| self.parent[c.index()].is_none())
            .collect()
    }

    /// Clusters from the tree root down, parents before children.
    pub fn top_down(&self) -> Vec<NodeId> {
        let mut out = self.tree_roots();
        let mut i = 0;
        while i < out.len() {
            let kids = self.children(out[i]);
            out.extend(kids);
            i += 1;
        }
        out
    }

    /// Size of the largest cluster minus one.
    pub fn width(&self) -> usize {
        self.clusters.iter().map(|c| c.members.len()).max().unwrap_or(1) - 1
    }

    fn add_member(&mut self, root: NodeId, j: NodeId) {
        let rank = &self.rank;
        let members = &mut self.clusters[root.index()].members;
        if !members.contains(&j) {
            let pos = members.partition_point(|m| rank[m.index()] < rank[j.index()]);
            members.insert(pos, j);
        }
    }

    /// Human-readable listing: one `C_root: {members} <- parent` line per cluster.
    pub fn describe(&self, d: &InfluenceDiagram) -> String {
        let mut out = String::new();
        for c in self.clusters_in_order() {
            let members: Vec<&str> = c.members.iter().map(|&m| d.name(m)).collect();
            out.push_str(&format!("C_{}: {{{}}}", d.name(c.root), members.join(",")));
            if let Some(p) = self.parent(c.root) {
                out.push_str(&format!(" <- C_{}", d.name(p)));
            }
            out.push('\n');
        }
        out
    }

    /// Graphviz export; each cluster is labelled with its root and members.
    pub fn to_dot(&self, d: &InfluenceDiagram) -> String {
        let q = |s: &str| format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""));
        let mut out = String::from("digraph rjt {\n  node [shape=box, style=rounded];\n");
        for c in self.clusters_in_order() {
            let members: Vec<&str> = c.members.iter().map(|&m| d.name(m)).collect();
            let label = format!("C_{}: {}", d.name(c.root), members.join(" "));
            out.push_str(&format!("  {} [label={}];\n", q(d.name(c.root)), q(&label)));
        }
        for (p, c) in self.arcs() {
            out.push_str(&format!("  {} -> {};\n", q(d.name(p)), q(d.name(c))));
        }
        out.push_str("}\n");
        out
    }
}

/// Builds the tree for `order`, visiting nodes from last to first.
///
/// `C_v` holds `v`, its parents, and every earlier node sharing a later
/// cluster with `v`. Its parent is the cluster of the latest other member;
/// a singleton cluster hangs below the cluster of its predecessor.
pub fn build_rjt(d: &InfluenceDiagram, order: &[NodeId]) -> Result<RootedJunctionTree> {
    let rank = d.check_order(order)?;
    let n = d.len();
    // Cluster contents as sets of ranks.
    let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for r in (0..n).rev() {
        let v = order[r];
        let mut set: BTreeSet<usize> = d.parents(v).iter().map(|p| rank[p.index()]).collect();
        set.insert(r);
        for later in &sets[r + 1..] {
            if later.contains(&r) {
                set.extend(later.range(..r).copied());
            }
        }
        sets[r] = set;
    }
    let mut clusters = Vec::with_capacity(n);
    let mut arcs = Vec::with_capacity(n.saturating_sub(1));
    for (r, set) in sets.iter().enumerate() {
        let root = order[r];
        let members: Vec<NodeId> = set.iter().map(|&k| order[k]).collect();
        let parent = match set.range(..r).next_back() {
            Some(&p) => Some(order[p]),
            None if r > 0 => Some(order[r - 1]),
            None => None,
        };
        if let Some(p) = parent {
            arcs.push((p, root));
        }
        clusters.push((root, members));
    }
    RootedJunctionTree::from_parts(d, order.to_vec(), clusters, &arcs)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RjtViolation {
    ClusterCount { clusters: usize, nodes: usize },
    RootNotMember(String),
    NoTreeRoot,
    MultipleTreeRoots(Vec<String>),
    ParentCycle(String),
    /// Clusters holding the node are not connected.
    RunningIntersection { node: String, tops: Vec<String> },
    /// The clusters holding the node are topped by another node's cluster.
    RootCluster { node: String, top: String },
    MissingParent { node: String, parent: String },
}

impl fmt::Display for RjtViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RjtViolation::ClusterCount { clusters, nodes } => {
                write!(f, "{clusters} clusters for {nodes} nodes")
            }
            RjtViolation::RootNotMember(j) => write!(f, "`{j}` is missing from its own cluster"),
            RjtViolation::NoTreeRoot => write!(f, "cluster arcs have no root"),
            RjtViolation::MultipleTreeRoots(r) => write!(f, "several tree roots: {}", r.join(", ")),
            RjtViolation::ParentCycle(j) => write!(f, "cluster arcs through C_{j} form a cycle"),
            RjtViolation::RunningIntersection { node, tops } => write!(
                f,
                "clusters containing `{node}` are disconnected (components topped by {})",
                tops.join(", ")
            ),
            RjtViolation::RootCluster { node, top } => {
                write!(f, "clusters containing `{node}` are rooted at C_{top}, not C_{node}")
            }
            RjtViolation::MissingParent { node, parent } => {
                write!(f, "parent `{parent}` of `{node}` is missing from C_{node}")
            }
        }
    }
}

/// Checks the tree shape, running intersection, root-cluster bijection and
/// parent containment.
pub fn validate_rjt(t: &RootedJunctionTree, d: &InfluenceDiagram) -> Vec<RjtViolation> {
    let mut out = Vec::new();
    let n = d.len();
    if t.clusters.len() != n {
        out.push(RjtViolation::ClusterCount {
            clusters: t.clusters.len(),
            nodes: n,
        });
        return out;
    }
    let roots = t.tree_roots();
    match roots.len() {
        0 => out.push(RjtViolation::NoTreeRoot),
        1 => {}
        _ => out.push(RjtViolation::MultipleTreeRoots(
            roots.iter().map(|&r| d.name(r).to_string()).collect(),
        )),
    }
    for j in d.ids() {
        let mut seen = vec![false; n];
        let mut cur = Some(j);
        while let Some(c) = cur {
            if seen[c.index()] {
                out.push(RjtViolation::ParentCycle(d.name(j).to_string()));
                return out;
            }
            seen[c.index()] = true;
            cur = t.parent(c);
        }
    }
    for j in d.ids() {
        let name = d.name(j).to_string();
        if !t.cluster(j).contains(j) {
            out.push(RjtViolation::RootNotMember(name.clone()));
        }
        for &p in d.parents(j) {
            if !t.cluster(j).contains(p) {
                out.push(RjtViolation::MissingParent {
                    node: name.clone(),
                    parent: d.name(p).to_string(),
                });
            }
        }
        // Tops of the subgraph induced by clusters holding j.
        let tops: Vec<NodeId> = t
            .order
            .iter()
            .copied()
            .filter(|&c| t.cluster(c).contains(j))
            .filter(|&c| t.parent(c).is_none_or(|p| !t.cluster(p).contains(j)))
            .collect();
        if tops.len() > 1 {
            out.push(RjtViolation::RunningIntersection {
                node: name.clone(),
                tops: tops.iter().map(|&c| d.name(c).to_string()).collect(),
            });
        } else if let Some(&top) = tops.first() {
            if top != j {
                out.push(RjtViolation::RootCluster {
                    node: name,
                    top: d.name(top).to_string(),
                });
            }
        }
    }
    out
}

/// Roots of all clusters reachable from `C_j` along arcs, `j` included.
pub fn reachable_roots(t: &RootedJunctionTree, j: NodeId) -> BTreeSet<NodeId> {
    let mut out = BTreeSet::new();
    let mut stack = vec![j];
    while let Some(c) = stack.pop() {
        if out.insert(c) {
            stack.extend(t.children(c));
        }
    }
    out
}

/// The directed cluster path from `C_from` down to `C_to`, inclusive, or
/// empty when `C_to` is not below `C_from`.
pub fn directed_path_clusters(t: &RootedJunctionTree, from: NodeId, to: NodeId) -> Vec<NodeId> {
    let mut path = vec![to];
    let mut cur = to;
    while cur != from {
        match t.parent(cur) {
            Some(p) if !path.contains(&p) => {
                path.push(p);
                cur = p;
            }
            _ => return Vec::new(),
        }
    }
    path.reverse();
    path
}

fn ancestors(t: &RootedJunctionTree, j: NodeId) -> Vec<NodeId> {
    let mut out = vec![j];
    let mut cur = j;
    while let Some(p) = t.parent(cur) {
        if out.contains(&p) {
            break;
        }
        out.push(p);
        cur = p;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModifyStage {
    /// Shared nodes copied along the path from the branching cluster.
    FillPath,
    /// The branch toward the target re-hung below `C_n`.
    Rehang,
    /// `n` added along the path to the target cluster.
    AddNode,
}

#[derive(Debug, Clone)]
pub struct ModifyStep {
    pub node: NodeId,
    pub stage: ModifyStage,
    pub tree: RootedJunctionTree,
}

/// Reshapes `t` so that the cluster of the latest node of `targets` holds
/// every node of `targets`.
pub fn modify_rjt(t: &RootedJunctionTree, d: &InfluenceDiagram, targets: &[NodeId]) -> Result<RootedJunctionTree> {
    modify_rjt_traced(t, d, targets).map(|(tree, _)| tree)
}

/// [`modify_rjt`] that also records the tree after every stage.
pub fn modify_rjt_traced(
    t: &RootedJunctionTree,
    d: &InfluenceDiagram,
    targets: &[NodeId],
) -> Result<(RootedJunctionTree, Vec<ModifyStep>)> {
    let m = *targets
        .iter()
        .max_by_key(|j| t.rank(**j))
        .ok_or(Error::EmptyTarget)?;
    let mut rest: Vec<NodeId> = targets.iter().copied().filter(|&j| j != m).collect();
    rest.sort_by_key(|&j| t.rank(j));
    rest.dedup();

    let mut tree = t.clone();
    let mut steps = Vec::new();
    for n in rest {
        if tree.cluster(m).contains(n) {
            continue;
        }
        if !reachable_roots(&tree, n).contains(&m) {
            // Deepest cluster above both C_n and C_m. On an unmodified tree
            // roots increase along arcs, so this is also the latest such root.
            let above_m = ancestors(&tree, m);
            let e = ancestors(&tree, n)
                .into_iter()
                .find(|a| above_m.contains(a))
                .ok_or_else(|| Error::NoCommonAncestor(d.name(n).into(), d.name(m).into()))?;
            let candidates: Vec<NodeId> = tree
                .children(e)
                .into_iter()
                .filter(|&g| {
                    let reach = reachable_roots(&tree, g);
                    reach.contains(&m) && !reach.contains(&n)
                })
                .collect();
            let [g] = candidates[..] else {
                return Err(Error::AmbiguousBranch {
                    e: d.name(e).into(),
                    m: d.name(m).into(),
                    candidates: candidates.iter().map(|&c| d.name(c).to_string()).collect(),
                });
            };
            let shared: Vec<NodeId> = tree
                .cluster(e)
                .members
                .iter()
                .copied()
                .filter(|&x| tree.cluster(g).contains(x))
                .collect();
            for c in directed_path_clusters(&tree, e, n) {
                for &x in &shared {
                    tree.add_member(c, x);
                }
            }
            steps.push(ModifyStep {
                node: n,
                stage: ModifyStage::FillPath,
                tree: tree.clone(),
            });
            tree.parent[g.index()] = Some(n);
            steps.push(ModifyStep {
                node: n,
                stage: ModifyStage::Rehang,
                tree: tree.clone(),
            });
        }
        for c in directed_path_clusters(&tree, n, m) {
            tree.add_member(c, n);
        }
        steps.push(ModifyStep {
            node: n,
            stage: ModifyStage::AddNode,
            tree: tree.clone(),
        });
    }
    Ok((tree, steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::DiagramBuilder;
    use crate::generators::{pig_farm, PigFarmSpec};
    use crate::transform::merge_value_nodes;

    fn names(d: &InfluenceDiagram, ids: impl IntoIterator<Item = NodeId>) -> Vec<String> {
        ids.into_iter().map(|j| d.name(j).to_string()).collect()
    }

    fn cluster_str(t: &RootedJunctionTree, d: &InfluenceDiagram, root: &str) -> String {
        names(d, t.cluster(d.id(root).unwrap()).members.iter().copied()).concat()
    }

    /// The six-node example tree A..F with its diagram.
    fn example_tree() -> (InfluenceDiagram, RootedJunctionTree) {
        let mut b = DiagramBuilder::new();
        b.chance("A", ["0", "1"], [], vec![0.5, 0.5]);
        b.chance("B", ["0", "1"], ["A"], vec![0.5; 4]);
        b.chance("C", ["0", "1"], ["A", "B"], vec![0.5; 8]);
        b.chance("D", ["0", "1"], ["B"], vec![0.5; 4]);
        b.chance("E", ["0", "1"], ["B", "C"], vec![0.5; 8]);
        b.chance("F", ["0", "1"], ["B"], vec![0.5; 4]);
        let d = b.build().unwrap();
        let t = RootedJunctionTree::from_names(
            &d,
            &["A", "B", "C", "D", "E", "F"],
            &[
                ("A", &["A"]),
                ("B", &["A", "B"]),
                ("C", &["A", "B", "C"]),
                ("D", &["B", "D"]),
                ("E", &["B", "C", "E"]),
                ("F", &["B", "F"]),
            ],
            &[("A", "B"), ("B", "C"), ("B", "D"), ("C", "E"), ("D", "F")],
        )
        .unwrap();
        (d, t)
    }

    #[test]
    fn pig_farm_tree_matches_figure() {
        let d = pig_farm(&PigFarmSpec::default());
        let order = d.topological_order().unwrap();
        let t = build_rjt(&d, &order).unwrap();
        let expected = [
            ("H1", "H1"),
            ("T1", "H1T1"),
            ("D1", "H1T1D1"),
            ("V1", "D1V1"),
            ("H2", "H1D1H2"),
            ("T2", "H2T2"),
            ("D2", "H2T2D2"),
            ("V2", "D2V2"),
            ("H3", "H2D2H3"),
            ("T3", "H3T3"),
            ("D3", "H3T3D3"),
            ("V3", "D3V3"),
            ("H4", "H3D3H4"),
            ("V4", "H4V4"),
        ];
        for (root, members) in expected {
            assert_eq!(cluster_str(&t, &d, root), members, "cluster {root}");
        }
        let arcs: Vec<(String, String)> = t
            .arcs()
            .into_iter()
            .map(|(p, c)| (d.name(p).into(), d.name(c).into()))
            .collect();
        let want = [
            ("H1", "T1"),
            ("T1", "D1"),
            ("D1", "V1"),
            ("D1", "H2"),
            ("H2", "T2"),
            ("T2", "D2"),
            ("D2", "V2"),
            ("D2", "H3"),
            ("H3", "T3"),
            ("T3", "D3"),
            ("D3", "V3"),
            ("D3", "H4"),
            ("H4", "V4"),
        ];
        assert_eq!(arcs.len(), 13);
        for (p, c) in want {
            assert!(arcs.contains(&(p.into(), c.into())), "missing arc {p}->{c}");
        }
        assert!(validate_rjt(&t, &d).is_empty());
        assert_eq!(t.width(), 2);
    }

    #[test]
    fn merged_pig_farm_tree_matches_figure() {
        let (m, _) = merge_value_nodes(&pig_farm(&PigFarmSpec::default())).unwrap();
        let t = build_rjt(&m, &m.topological_order().unwrap()).unwrap();
        assert_eq!(t.len(), 11);
        let expected = [
            ("H1", "H1"),
            ("T1", "H1T1"),
            ("D1", "H1T1D1"),
            ("H2", "H1D1H2"),
            ("T2", "D1H2T2"),
            ("D2", "D1H2T2D2"),
            ("H3", "D1H2D2H3"),
            ("T3", "D1D2H3T3"),
            ("D3", "D1D2H3T3D3"),
            ("H4", "D1D2H3D3H4"),
            ("Vbar", "D1D2D3H4Vbar"),
        ];
        for (root, members) in expected {
            assert_eq!(cluster_str(&t, &m, root), members, "cluster {root}");
        }
        // A chain: every cluster's parent is its predecessor.
        let order = t.order().to_vec();
        for w in order.windows(2) {
            assert_eq!(t.parent(w[1]), Some(w[0]));
        }
        assert!(validate_rjt(&t, &m).is_empty());
    }

    #[test]
    fn single_node_tree() {
        let mut b = DiagramBuilder::new();
        b.chance("X", ["a", "b"], [], vec![0.5, 0.5]);
        let d = b.build().unwrap();
        let t = build_rjt(&d, &[NodeId::from_index(0)]).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.arcs().is_empty());
        assert!(validate_rjt(&t, &d).is_empty());
    }

    #[test]
    fn disconnected_nodes_chain_onto_predecessor() {
        let mut b = DiagramBuilder::new();
        b.chance("X", ["a", "b"], [], vec![0.5, 0.5]);
        b.chance("Y", ["a", "b"], [], vec![0.5, 0.5]);
        b.chance("Z", ["a", "b"], ["Y"], vec![0.5; 4]);
        let d = b.build().unwrap();
        let t = build_rjt(&d, &d.topological_order().unwrap()).unwrap();
        assert_eq!(t.parent(d.id("Y").unwrap()), Some(d.id("X").unwrap()));
        assert!(validate_rjt(&t, &d).is_empty());
    }

    #[test]
    fn invalid_order_rejected() {
        let d = pig_farm(&PigFarmSpec::with_periods(1));
        let mut order = d.topological_order().unwrap();
        order.swap(0, 1);
        assert!(matches!(build_rjt(&d, &order), Err(Error::InvalidOrder(_))));
    }

    #[test]
    fn deleting_a_member_is_caught() {
        let d = pig_farm(&PigFarmSpec::default());
        let mut t = build_rjt(&d, &d.topological_order().unwrap()).unwrap();
        let h2 = d.id("H2").unwrap();
        let d2 = d.id("D2").unwrap();
        t.clusters[d2.index()].members.retain(|&x| x != h2);
        let v = validate_rjt(&t, &d);
        assert!(v.iter().any(|x| matches!(x, RjtViolation::RunningIntersection { node, .. } if node == "H2")));
    }

    #[test]
    fn missing_parent_is_caught() {
        let d = pig_farm(&PigFarmSpec::with_periods(1));
        let mut t = build_rjt(&d, &d.topological_order().unwrap()).unwrap();
        let v1 = d.id("V1").unwrap();
        let d1 = d.id("D1").unwrap();
        t.clusters[v1.index()].members.retain(|&x| x != d1);
        let v = validate_rjt(&t, &d);
        assert!(v.contains(&RjtViolation::MissingParent {
            node: "V1".into(),
            parent: "D1".into()
        }));
    }

    #[test]
    fn reachability_and_paths_on_example() {
        let (d, t) = example_tree();
        assert!(validate_rjt(&t, &d).is_empty());
        let id = |s| d.id(s).unwrap();
        assert_eq!(names(&d, reachable_roots(&t, id("B"))), ["B", "C", "D", "E", "F"]);
        assert_eq!(reachable_roots(&t, id("A")).len(), 6);
        assert_eq!(names(&d, reachable_roots(&t, id("E"))), ["E"]);
        assert_eq!(names(&d, directed_path_clusters(&t, id("A"), id("F"))), ["A", "B", "D", "F"]);
        assert_eq!(names(&d, directed_path_clusters(&t, id("C"), id("C"))), ["C"]);
        assert!(directed_path_clusters(&t, id("E"), id("F")).is_empty());
    }

    #[test]
    fn example_walkthrough() {
        let (d, t) = example_tree();
        let target: Vec<NodeId> = ["A", "E", "F"].iter().map(|s| d.id(s).unwrap()).collect();
        let (out, steps) = modify_rjt_traced(&t, &d, &target).unwrap();
        let stages: Vec<(String, ModifyStage)> = steps.iter().map(|s| (d.name(s.node).into(), s.stage)).collect();
        assert_eq!(
            stages,
            [
                ("A".into(), ModifyStage::AddNode),
                ("E".into(), ModifyStage::FillPath),
                ("E".into(), ModifyStage::Rehang),
                ("E".into(), ModifyStage::AddNode),
            ]
        );
        assert_eq!(cluster_str(&steps[0].tree, &d, "D"), "ABD");
        assert_eq!(cluster_str(&steps[0].tree, &d, "F"), "ABF");
        assert_eq!(cluster_str(&steps[1].tree, &d, "E"), "ABCE");
        assert_eq!(steps[2].tree.parent(d.id("D").unwrap()), Some(d.id("E").unwrap()));
        for (root, members) in [("A", "A"), ("B", "AB"), ("C", "ABC"), ("E", "ABCE"), ("D", "ABDE"), ("F", "ABEF")] {
            assert_eq!(cluster_str(&out, &d, root), members);
        }
        assert!(validate_rjt(&out, &d).is_empty());
    }

    #[test]
    fn pig_farm_health_cluster() {
        let d = pig_farm(&PigFarmSpec::default());
        let t = build_rjt(&d, &d.topological_order().unwrap()).unwrap();
        let hs: Vec<NodeId> = ["H1", "H2", "H3", "H4"].iter().map(|s| d.id(s).unwrap()).collect();
        let out = modify_rjt(&t, &d, &hs).unwrap();
        assert_eq!(cluster_str(&out, &d, "H4"), "H1H2H3D3H4");
        assert_eq!(cluster_str(&out, &d, "T2"), "H1H2T2");
        assert_eq!(cluster_str(&out, &d, "V1"), "D1V1");
        assert!(validate_rjt(&out, &d).is_empty());
        assert_eq!(out.arcs(), t.arcs());
    }

    #[test]
    fn target_already_in_one_cluster() {
        let d = pig_farm(&PigFarmSpec::default());
        let t = build_rjt(&d, &d.topological_order().unwrap()).unwrap();
        let target: Vec<NodeId> = ["H3", "D3", "H4"].iter().map(|s| d.id(s).unwrap()).collect();
        assert_eq!(modify_rjt(&t, &d, &target).unwrap(), t);
        assert!(matches!(modify_rjt(&t, &d, &[]), Err(Error::EmptyTarget)));
    }

    #[test]
    fn dot_export_lists_clusters_and_arcs() {
        let (d, t) = example_tree();
        let dot = t.to_dot(&d);
        assert!(dot.starts_with("digraph rjt {"));
        assert!(dot.contains("\"E\" [label=\"C_E: B C E\"];"));
        assert!(dot.contains("\"D\" -> \"F\";"));
        assert_eq!(dot.matches("->").count(), 5);
    }
}
