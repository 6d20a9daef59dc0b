//! Ingredient co-occurrence network over a recommendation result.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::corpus::IngredientId;
use crate::recommend::Recommendation;
use crate::simcanon::IngredientLexicon;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphNode {
    pub id: IngredientId,
    pub label: String,
    pub degree: usize,
    pub in_base: bool,
}

/// Undirected edge, always stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct GraphEdge {
    pub a: IngredientId,
    pub b: IngredientId,
    pub weight: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngredientGraph {
    /// Sorted by id.
    pub nodes: Vec<GraphNode>,
    /// Sorted by `(a, b)`.
    pub edges: Vec<GraphEdge>,
    /// Connected components, each sorted, ordered by smallest member.
    pub clusters: Vec<Vec<IngredientId>>,
}

/// Builds the graph from plain ingredient sets. `label` supplies node names.
pub fn build_graph_from_sets<'a, F>(
    sets: &[&BTreeSet<IngredientId>],
    base: &BTreeSet<IngredientId>,
    label: F,
    min_edge_weight: u32,
) -> IngredientGraph
where
    F: Fn(IngredientId) -> &'a str,
{
    let mut node_ids: BTreeSet<IngredientId> = BTreeSet::new();
    let mut weights: BTreeMap<(IngredientId, IngredientId), u32> = BTreeMap::new();
    for set in sets {
        node_ids.extend(set.iter().copied());
        let items: Vec<IngredientId> = set.iter().copied().collect();
        for (i, &a) in items.iter().enumerate() {
            for &b in &items[i + 1..] {
                *weights.entry((a, b)).or_insert(0) += 1;
            }
        }
    }
    let edges: Vec<GraphEdge> = weights
        .into_iter()
        .filter(|&(_, w)| w >= min_edge_weight.max(1))
        .map(|((a, b), weight)| GraphEdge { a, b, weight })
        .collect();

    let mut adjacency: BTreeMap<IngredientId, Vec<IngredientId>> =
        node_ids.iter().map(|&id| (id, Vec::new())).collect();
    for e in &edges {
        adjacency.get_mut(&e.a).expect("node").push(e.b);
        adjacency.get_mut(&e.b).expect("node").push(e.a);
    }

    let nodes = node_ids
        .iter()
        .map(|&id| GraphNode {
            id,
            label: label(id).to_string(),
            degree: adjacency[&id].len(),
            in_base: base.contains(&id),
        })
        .collect();

    let mut seen: BTreeSet<IngredientId> = BTreeSet::new();
    let mut clusters = Vec::new();
    for &start in &node_ids {
        if !seen.insert(start) {
            continue;
        }
        let mut component = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in &adjacency[&v] {
                if seen.insert(w) {
                    component.push(w);
                    queue.push_back(w);
                }
            }
        }
        component.sort();
        clusters.push(component);
    }

    IngredientGraph {
        nodes,
        edges,
        clusters,
    }
}

pub fn build_graph(
    recommendations: &[Recommendation<'_>],
    base: &BTreeSet<IngredientId>,
    lexicon: &IngredientLexicon,
    min_edge_weight: u32,
) -> IngredientGraph {
    let sets: Vec<&BTreeSet<IngredientId>> = recommendations
        .iter()
        .map(|r| &r.recipe.ingredient_ids)
        .collect();
    build_graph_from_sets(&sets, base, |id| lexicon.name(id).unwrap_or(""), min_edge_weight)
}

// Field order below is alphabetical so serialized keys come out sorted.

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeLinkNode {
    pub degree: usize,
    pub id: u32,
    pub in_base: bool,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeLinkLink {
    pub source: u32,
    pub target: u32,
    pub weight: u32,
}

/// The node-link document consumed by graph front ends.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeLinkGraph {
    pub clusters: Vec<Vec<u32>>,
    pub links: Vec<NodeLinkLink>,
    pub nodes: Vec<NodeLinkNode>,
}

pub fn export_graph(graph: &IngredientGraph) -> NodeLinkGraph {
    NodeLinkGraph {
        clusters: graph
            .clusters
            .iter()
            .map(|c| c.iter().map(|id| id.0).collect())
            .collect(),
        links: graph
            .edges
            .iter()
            .map(|e| NodeLinkLink {
                source: e.a.0,
                target: e.b.0,
                weight: e.weight,
            })
            .collect(),
        nodes: graph
            .nodes
            .iter()
            .map(|n| NodeLinkNode {
                degree: n.degree,
                id: n.id.0,
                in_base: n.in_base,
                label: n.label.clone(),
            })
            .collect(),
    }
}

/// Compact JSON with sorted keys and stable ordering.
pub fn export_graph_json(graph: &IngredientGraph) -> String {
    serde_json::to_string(&export_graph(graph)).expect("graph serializes")
}

pub fn import_graph(doc: &NodeLinkGraph) -> IngredientGraph {
    IngredientGraph {
        nodes: doc
            .nodes
            .iter()
            .map(|n| GraphNode {
                id: IngredientId(n.id),
                label: n.label.clone(),
                degree: n.degree,
                in_base: n.in_base,
            })
            .collect(),
        edges: doc
            .links
            .iter()
            .map(|l| GraphEdge {
                a: IngredientId(l.source),
                b: IngredientId(l.target),
                weight: l.weight,
            })
            .collect(),
        clusters: doc
            .clusters
            .iter()
            .map(|c| c.iter().map(|&i| IngredientId(i)).collect())
            .collect(),
    }
}
