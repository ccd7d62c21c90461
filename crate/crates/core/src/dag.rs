//! Directed acyclic graphs with dense node ids.
//!
//! The order of each node's parent list is fixed at construction. It is the
//! coordinate order of that node's weight vector and edge-noise vector
//! everywhere in the crate, and the canonical edge order is "by destination
//! ascending, then by position in the destination's parent list".

use std::collections::{BTreeSet, BinaryHeap};
use std::cmp::Reverse;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{RcaError, Result};

/// Dense node index in `0..node_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A directed edge `src -> dst`; `src` is always one of `dst`'s parents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId {
    pub src: NodeId,
    pub dst: NodeId,
}

impl EdgeId {
    pub fn new(src: usize, dst: usize) -> Self {
        EdgeId { src: NodeId(src), dst: NodeId(dst) }
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.src, self.dst)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dag {
    parents: Vec<Vec<NodeId>>,
    names: Vec<String>,
    children: Vec<Vec<NodeId>>,
    topo: Vec<NodeId>,
    /// `edge_offsets[j]` is the canonical index of node j's first incoming edge.
    edge_offsets: Vec<usize>,
}

impl Dag {
    /// Builds a graph from per-node parent lists. Names default to the node index.
    pub fn from_parents(parents: Vec<Vec<usize>>, names: Option<Vec<String>>) -> Result<Self> {
        let n = parents.len();
        let names = match names {
            Some(names) => {
                if names.len() != n {
                    return Err(RcaError::Parse(format!(
                        "{} names for {} nodes",
                        names.len(),
                        n
                    )));
                }
                names
            }
            None => (0..n).map(|i| i.to_string()).collect(),
        };
        let mut parent_ids = Vec::with_capacity(n);
        let mut children = vec![Vec::new(); n];
        for (dst, ps) in parents.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for &src in ps {
                if src >= n {
                    return Err(RcaError::UnknownNode(src.to_string()));
                }
                if src == dst {
                    return Err(RcaError::SelfLoop(dst));
                }
                if !seen.insert(src) {
                    return Err(RcaError::DuplicateEdge { src, dst });
                }
                children[src].push(NodeId(dst));
            }
            parent_ids.push(ps.iter().map(|&p| NodeId(p)).collect::<Vec<_>>());
        }
        let mut edge_offsets = Vec::with_capacity(n + 1);
        let mut acc = 0;
        for ps in &parent_ids {
            edge_offsets.push(acc);
            acc += ps.len();
        }
        edge_offsets.push(acc);
        let topo = kahn(&parent_ids, &children)?;
        Ok(Dag { parents: parent_ids, names, children, topo, edge_offsets })
    }

    /// Builds a graph from an edge list. Parent order follows edge order.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)], names: Option<Vec<String>>) -> Result<Self> {
        let mut parents = vec![Vec::new(); node_count];
        for &(src, dst) in edges {
            if dst >= node_count {
                return Err(RcaError::UnknownNode(dst.to_string()));
            }
            parents[dst].push(src);
        }
        Self::from_parents(parents, names)
    }

    pub fn node_count(&self) -> usize {
        self.parents.len()
    }

    pub fn edge_count(&self) -> usize {
        *self.edge_offsets.last().unwrap_or(&0)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count()).map(NodeId)
    }

    pub fn parents(&self, node: NodeId) -> &[NodeId] {
        &self.parents[node.0]
    }

    pub fn children(&self, node: NodeId) -> &[NodeId] {
        &self.children[node.0]
    }

    pub fn name(&self, node: NodeId) -> &str {
        &self.names[node.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.0 < self.node_count()
    }

    pub fn check_node(&self, node: NodeId) -> Result<()> {
        if self.contains(node) {
            Ok(())
        } else {
            Err(RcaError::UnknownNode(node.to_string()))
        }
    }

    /// Looks a node up by display name, falling back to a numeric index.
    pub fn resolve(&self, key: &str) -> Result<NodeId> {
        if let Some(i) = self.names.iter().position(|n| n == key) {
            return Ok(NodeId(i));
        }
        match key.parse::<usize>() {
            Ok(i) if i < self.node_count() => Ok(NodeId(i)),
            _ => Err(RcaError::UnknownNode(key.to_string())),
        }
    }

    /// Topological order, ties broken by ascending node id.
    pub fn topological_order(&self) -> &[NodeId] {
        &self.topo
    }

    /// Canonical index of node `dst`'s first incoming edge.
    pub fn edge_offset(&self, dst: NodeId) -> usize {
        self.edge_offsets[dst.0]
    }

    /// All edges in canonical order.
    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(dst, ps)| ps.iter().map(move |&src| EdgeId { src, dst: NodeId(dst) }))
    }

    pub fn edge_index(&self, edge: EdgeId) -> Option<usize> {
        let ps = self.parents.get(edge.dst.0)?;
        ps.iter().position(|&p| p == edge.src).map(|k| self.edge_offsets[edge.dst.0] + k)
    }

    pub fn is_root(&self, node: NodeId) -> bool {
        self.parents[node.0].is_empty()
    }

    /// All strict ancestors of `target`, ascending.
    pub fn ancestors(&self, target: NodeId) -> Result<Vec<NodeId>> {
        self.check_node(target)?;
        let mut seen = vec![false; self.node_count()];
        let mut stack = vec![target];
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v.0] {
                if !seen[p.0] {
                    seen[p.0] = true;
                    stack.push(p);
                }
            }
        }
        Ok(self.nodes().filter(|v| seen[v.0]).collect())
    }

    /// The subgraph induced by `target` and its ancestors.
    pub fn ancestor_subgraph(&self, target: NodeId) -> Result<Subgraph> {
        let mut members = self.ancestors(target)?;
        members.push(target);
        members.sort_unstable();
        let mut local = vec![usize::MAX; self.node_count()];
        for (i, v) in members.iter().enumerate() {
            local[v.0] = i;
        }
        let parents = members
            .iter()
            .map(|v| self.parents[v.0].iter().map(|p| local[p.0]).collect())
            .collect();
        let names = members.iter().map(|v| self.names[v.0].clone()).collect();
        let dag = Dag::from_parents(parents, Some(names))?;
        Ok(Subgraph { dag, target: NodeId(local[target.0]), mapping: members })
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            nodes: self.names.clone(),
            edges: self.edges().map(|e| [e.src.0, e.dst.0]).collect(),
        }
    }

    pub fn from_file(file: &GraphFile) -> Result<Self> {
        let edges: Vec<(usize, usize)> = file.edges.iter().map(|e| (e[0], e[1])).collect();
        for &(s, _) in &edges {
            if s >= file.nodes.len() {
                return Err(RcaError::UnknownNode(s.to_string()));
            }
        }
        Self::from_edges(file.nodes.len(), &edges, Some(file.nodes.clone()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }
}

fn kahn(parents: &[Vec<NodeId>], children: &[Vec<NodeId>]) -> Result<Vec<NodeId>> {
    let n = parents.len();
    let mut indeg: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&i| indeg[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(v)) = ready.pop() {
        order.push(NodeId(v));
        for c in &children[v] {
            indeg[c.0] -= 1;
            if indeg[c.0] == 0 {
                ready.push(Reverse(c.0));
            }
        }
    }
    if order.len() != n {
        return Err(RcaError::CycleDetected);
    }
    Ok(order)
}

/// An ancestor-closed subgraph plus the map back to the parent graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgraph {
    pub dag: Dag,
    /// Target, in subgraph coordinates.
    pub target: NodeId,
    /// `mapping[local]` is the node id in the original graph.
    pub mapping: Vec<NodeId>,
}

impl Subgraph {
    pub fn original(&self, local: NodeId) -> NodeId {
        self.mapping[local.0]
    }

    pub fn original_edge(&self, local: EdgeId) -> EdgeId {
        EdgeId { src: self.original(local.src), dst: self.original(local.dst) }
    }

    pub fn local(&self, original: NodeId) -> Option<NodeId> {
        self.mapping.binary_search(&original).ok().map(NodeId)
    }

    pub fn local_edge(&self, original: EdgeId) -> Option<EdgeId> {
        let e = EdgeId { src: self.local(original.src)?, dst: self.local(original.dst)? };
        self.dag.edge_index(e).map(|_| e)
    }
}

/// On-disk graph format: `{"nodes": [...], "edges": [[src, dst], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphFile {
    pub nodes: Vec<String>,
    pub edges: Vec<[usize; 2]>,
}
