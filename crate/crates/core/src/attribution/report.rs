use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dag::{EdgeId, NodeId};
use crate::error::{RcaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bigen,
    Shapley,
    Sampling,
    Permutation,
    Naive,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::Bigen, Method::Shapley, Method::Sampling, Method::Permutation, Method::Naive];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Bigen => "bigen",
            Method::Shapley => "shapley",
            Method::Sampling => "sampling",
            Method::Permutation => "permutation",
            Method::Naive => "naive",
        }
    }

    pub fn is_game(self) -> bool {
        matches!(self, Method::Shapley | Method::Sampling | Method::Permutation)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = RcaError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| RcaError::Parse(format!("unknown method {s:?}")))
    }
}

/// A rankable root-cause candidate. The derived order (nodes before edges,
/// then ascending id) is the tie-break for equal scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Candidate {
    Node(NodeId),
    Edge(EdgeId),
}

impl Candidate {
    pub fn is_node(&self) -> bool {
        matches!(self, Candidate::Node(_))
    }
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Candidate::Node(n) => write!(f, "node {n}"),
            Candidate::Edge(e) => write!(f, "edge {e}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Node,
    Edge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EntryId {
    Node(usize),
    Edge([usize; 2]),
}

/// One line of a serialized ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub kind: EntryKind,
    pub id: EntryId,
    pub score: f64,
}

impl RankEntry {
    pub fn candidate(&self) -> Result<Candidate> {
        match (self.kind, self.id) {
            (EntryKind::Node, EntryId::Node(i)) => Ok(Candidate::Node(NodeId(i))),
            (EntryKind::Edge, EntryId::Edge([s, d])) => Ok(Candidate::Edge(EdgeId::new(s, d))),
            _ => Err(RcaError::Parse("rank entry kind does not match its id".into())),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    /// Abnormal rows the report aggregates.
    pub rows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub references: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    pub gradient_evaluations: usize,
    pub value_evaluations: usize,
    /// Wall time; left out of serialized reports unless explicitly recorded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

/// Contribution scores of every ancestor node and edge of one target.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionReport {
    pub target: NodeId,
    pub method: Method,
    pub node_scores: Vec<(NodeId, f64)>,
    pub edge_scores: Vec<(EdgeId, f64)>,
    pub metadata: ReportMetadata,
    ranking: Vec<(Candidate, f64)>,
}

fn by_score(a: &(Candidate, f64), b: &(Candidate, f64)) -> Ordering {
    b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(&b.0))
}

/// Sorts candidates by descending score with the deterministic tie-break.
pub fn rank(mut entries: Vec<(Candidate, f64)>) -> Vec<(Candidate, f64)> {
    entries.sort_by(by_score);
    entries
}

impl AttributionReport {
    pub fn new(
        target: NodeId,
        method: Method,
        node_scores: Vec<(NodeId, f64)>,
        edge_scores: Vec<(EdgeId, f64)>,
        metadata: ReportMetadata,
    ) -> Result<Self> {
        if node_scores.iter().map(|p| p.1).chain(edge_scores.iter().map(|p| p.1)).any(|s| !s.is_finite()) {
            return Err(RcaError::InvalidConfig(format!("{method} produced a non-finite score")));
        }
        let ranking = rank(
            node_scores
                .iter()
                .map(|&(n, s)| (Candidate::Node(n), s))
                .chain(edge_scores.iter().map(|&(e, s)| (Candidate::Edge(e), s)))
                .collect(),
        );
        Ok(AttributionReport { target, method, node_scores, edge_scores, metadata, ranking })
    }

    /// Combined node and edge ranking, best first.
    pub fn ranking(&self) -> &[(Candidate, f64)] {
        &self.ranking
    }

    pub fn ranked_candidates(&self) -> Vec<Candidate> {
        self.ranking.iter().map(|e| e.0).collect()
    }

    pub fn node_ranking(&self) -> Vec<Candidate> {
        self.ranking.iter().filter(|e| e.0.is_node()).map(|e| e.0).collect()
    }

    pub fn edge_ranking(&self) -> Vec<Candidate> {
        self.ranking.iter().filter(|e| !e.0.is_node()).map(|e| e.0).collect()
    }

    pub fn node_score(&self, node: NodeId) -> Option<f64> {
        self.node_scores.iter().find(|p| p.0 == node).map(|p| p.1)
    }

    pub fn edge_score(&self, edge: EdgeId) -> Option<f64> {
        self.edge_scores.iter().find(|p| p.0 == edge).map(|p| p.1)
    }

    pub fn total(&self) -> f64 {
        self.node_scores.iter().map(|p| p.1).sum::<f64>() + self.edge_scores.iter().map(|p| p.1).sum::<f64>()
    }

    /// Element-wise mean of reports over the same candidates (one per abnormal row).
    pub fn average(reports: &[AttributionReport]) -> Result<AttributionReport> {
        let first = reports.first().ok_or(RcaError::EmptyDataset)?;
        let n = reports.len() as f64;
        let mut nodes = first.node_scores.clone();
        let mut edges = first.edge_scores.clone();
        let mut meta = first.metadata.clone();
        for r in &reports[1..] {
            if r.node_scores.len() != nodes.len() || r.edge_scores.len() != edges.len() {
                return Err(RcaError::KeyMismatch("reports cover different candidates".into()));
            }
            for (acc, x) in nodes.iter_mut().zip(&r.node_scores) {
                acc.1 += x.1;
            }
            for (acc, x) in edges.iter_mut().zip(&r.edge_scores) {
                acc.1 += x.1;
            }
            meta.rows += r.metadata.rows;
            meta.gradient_evaluations += r.metadata.gradient_evaluations;
            meta.value_evaluations += r.metadata.value_evaluations;
            meta.runtime_seconds = match (meta.runtime_seconds, r.metadata.runtime_seconds) {
                (Some(a), Some(b)) => Some(a + b),
                _ => None,
            };
        }
        nodes.iter_mut().for_each(|p| p.1 /= n);
        edges.iter_mut().for_each(|p| p.1 /= n);
        AttributionReport::new(first.target, first.method, nodes, edges, meta)
    }

    pub fn to_file(&self) -> ReportFile {
        ReportFile {
            method: self.method,
            target: self.target.0,
            ranking: self
                .ranking
                .iter()
                .map(|&(c, score)| match c {
                    Candidate::Node(n) => RankEntry { kind: EntryKind::Node, id: EntryId::Node(n.0), score },
                    Candidate::Edge(e) => {
                        RankEntry { kind: EntryKind::Edge, id: EntryId::Edge([e.src.0, e.dst.0]), score }
                    }
                })
                .collect(),
            metadata: self.metadata.clone(),
        }
    }

    pub fn from_file(file: &ReportFile) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for e in &file.ranking {
            match e.candidate()? {
                Candidate::Node(n) => nodes.push((n, e.score)),
                Candidate::Edge(x) => edges.push((x, e.score)),
            }
        }
        nodes.sort_by_key(|p| p.0);
        edges.sort_by_key(|p| p.0);
        AttributionReport::new(NodeId(file.target), file.method, nodes, edges, file.metadata.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }
}

/// Serialized report: method, target, ranking entries best first, metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub method: Method,
    pub target: usize,
    pub ranking: Vec<RankEntry>,
    pub metadata: ReportMetadata,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_put_nodes_first_then_ascending_ids() {
        let r = AttributionReport::new(
            NodeId(3),
            Method::Naive,
            vec![(NodeId(2), 1.0), (NodeId(1), 1.0), (NodeId(3), 5.0)],
            vec![(EdgeId::new(0, 1), 1.0), (EdgeId::new(1, 3), 2.0)],
            ReportMetadata::default(),
        )
        .unwrap();
        assert_eq!(
            r.ranked_candidates(),
            vec![
                Candidate::Node(NodeId(3)),
                Candidate::Edge(EdgeId::new(1, 3)),
                Candidate::Node(NodeId(1)),
                Candidate::Node(NodeId(2)),
                Candidate::Edge(EdgeId::new(0, 1)),
            ]
        );
    }

    #[test]
    fn non_finite_scores_are_rejected() {
        assert!(AttributionReport::new(NodeId(0), Method::Bigen, vec![(NodeId(0), f64::NAN)], vec![], Default::default())
            .is_err());
    }

    #[test]
    fn file_round_trip() {
        let r = AttributionReport::new(
            NodeId(2),
            Method::Bigen,
            vec![(NodeId(0), 0.25), (NodeId(2), -0.5)],
            vec![(EdgeId::new(0, 2), 1.0 / 3.0)],
            ReportMetadata { rows: 1, steps: Some(50), ..Default::default() },
        )
        .unwrap();
        let json = r.to_json().unwrap();
        assert!(json.contains("\"kind\": \"edge\""));
        let back = AttributionReport::from_file(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn averaging() {
        let mk = |a: f64| {
            AttributionReport::new(NodeId(1), Method::Naive, vec![(NodeId(0), a), (NodeId(1), 1.0)], vec![], ReportMetadata {
                rows: 1,
                value_evaluations: 2,
                ..Default::default()
            })
            .unwrap()
        };
        let avg = AttributionReport::average(&[mk(0.0), mk(4.0)]).unwrap();
        assert_eq!(avg.node_score(NodeId(0)), Some(2.0));
        assert_eq!(avg.metadata.rows, 2);
        assert_eq!(avg.metadata.value_evaluations, 4);
        assert_eq!(avg.ranked_candidates()[0], Candidate::Node(NodeId(0)));
    }

    #[test]
    fn method_names_parse() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("bogus".parse::<Method>().is_err());
    }
}
