//! Breadth-first reachable-belief graph and belief sets.

use serde::Serialize;

use crate::model::{Belief, PomdpModel};

/// Beliefs closer than this in 1-norm are treated as the same node.
pub const DEDUP_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct GraphNode {
    pub belief: Belief,
    /// Length of the shortest transition sequence from `b₀`.
    pub depth: usize,
    /// `γ^depth`.
    pub rho: f64,
    /// `children[a]` lists `(observation, probability, node)`; empty for
    /// nodes at the depth cap.
    pub children: Vec<Vec<(usize, f64, usize)>>,
}

/// All beliefs reachable from `b₀` within `max_depth` transitions.
#[derive(Debug, Clone)]
pub struct ReachableBeliefGraph {
    pub nodes: Vec<GraphNode>,
    pub max_depth: usize,
    pub discount: f64,
}

impl ReachableBeliefGraph {
    pub fn build(model: &PomdpModel, max_depth: usize) -> Self {
        let gamma = model.discount();
        let mut nodes = vec![GraphNode {
            belief: model.initial_belief().clone(),
            depth: 0,
            rho: 1.0,
            children: Vec::new(),
        }];
        let mut frontier = vec![0];
        for depth in 0..max_depth {
            let mut next = Vec::new();
            for &i in &frontier {
                let expanded = model.expand(&nodes[i].belief);
                let mut edges = Vec::with_capacity(expanded.len());
                for kids in expanded {
                    let mut out = Vec::with_capacity(kids.len());
                    for child in kids {
                        let found = nodes
                            .iter()
                            .position(|n| n.belief.l1_distance(&child.belief) <= DEDUP_TOL);
                        let j = found.unwrap_or_else(|| {
                            nodes.push(GraphNode {
                                belief: child.belief,
                                depth: depth + 1,
                                rho: gamma.powi(depth as i32 + 1),
                                children: Vec::new(),
                            });
                            next.push(nodes.len() - 1);
                            nodes.len() - 1
                        });
                        out.push((child.observation, child.probability, j));
                    }
                    edges.push(out);
                }
                nodes[i].children = edges;
            }
            frontier = next;
        }
        Self {
            nodes,
            max_depth,
            discount: gamma,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes whose children are in the graph.
    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].depth < self.max_depth)
    }

    /// `ρ(b') ≥ γ ρ(b)` along every edge.
    pub fn rho_property_holds(&self) -> bool {
        self.nodes.iter().all(|n| {
            n.children
                .iter()
                .flatten()
                .all(|&(_, _, j)| self.nodes[j].rho >= self.discount * n.rho)
        })
    }

    /// Nodes of depth at most `depth`, as a belief set.
    pub fn belief_set(&self, depth: usize) -> BeliefSet {
        let mut set = BeliefSet::default();
        for n in self.nodes.iter().filter(|n| n.depth <= depth) {
            set.push(n.belief.clone(), format!("graph-depth-{}", n.depth));
        }
        set
    }
}

/// A finite belief set with a provenance tag per belief.
#[derive(Debug, Clone, Default, Serialize)]
pub struct BeliefSet {
    pub beliefs: Vec<Belief>,
    pub tags: Vec<String>,
}

impl BeliefSet {
    pub fn push(&mut self, b: Belief, tag: impl Into<String>) {
        self.beliefs.push(b);
        self.tags.push(tag.into());
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }
}

/// `δ_p(B) = max_{b ∈ graph} min_{b' ∈ B} ‖b − b'‖₁ / ρ(b)^p`.
pub fn sample_spacing(graph: &ReachableBeliefGraph, set: &BeliefSet, p: f64) -> f64 {
    graph
        .nodes
        .iter()
        .map(|n| {
            let d = set
                .beliefs
                .iter()
                .map(|b| n.belief.l1_distance(b))
                .fold(f64::INFINITY, f64::min);
            d / n.rho.powf(p)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::tiger;

    #[test]
    fn tiger_graph_structure() {
        let m = tiger();
        let g = ReachableBeliefGraph::build(&m, 3);
        assert_eq!(g.nodes[0].rho, 1.0);
        assert!(g.rho_property_holds());
        // Listening moves the belief along a line; opening resets it.
        assert_eq!(g.len(), 7);
        for i in g.interior() {
            assert_eq!(g.nodes[i].children.len(), 3);
        }
    }

    #[test]
    fn spacing_is_zero_when_covered_and_matches_a_double_loop() {
        let m = tiger();
        let g = ReachableBeliefGraph::build(&m, 3);
        assert_eq!(sample_spacing(&g, &g.belief_set(3), 0.5), 0.0);
        let b0 = g.belief_set(0);
        let mut brute: f64 = 0.0;
        for n in &g.nodes {
            let d: f64 = n
                .belief
                .to_dense()
                .iter()
                .zip(b0.beliefs[0].to_dense())
                .map(|(x, y)| (x - y).abs())
                .sum();
            brute = brute.max(d / n.rho.powf(0.5));
        }
        assert!((sample_spacing(&g, &b0, 0.5) - brute).abs() < 1e-12);
        assert!(sample_spacing(&g, &b0, 0.0) <= sample_spacing(&g, &b0, 0.5));
        assert!(sample_spacing(&g, &g.belief_set(1), 0.5) <= sample_spacing(&g, &b0, 0.5));
    }
}
