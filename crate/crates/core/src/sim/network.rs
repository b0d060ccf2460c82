use std::collections::HashSet;

use smallvec::SmallVec;

use crate::{Error, Result};

/// Node identifier. Identifiers increase monotonically and are never reused.
pub type NodeId = u64;

const VACANT: u32 = u32::MAX;

/// A steady relationship between `a < b`, created at step `formed_at`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SteadyEdge {
    pub a: NodeId,
    pub b: NodeId,
    pub formed_at: u32,
}

impl SteadyEdge {
    pub fn new(u: NodeId, v: NodeId, formed_at: u32) -> Self {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        SteadyEdge { a, b, formed_at }
    }

    pub fn touches(&self, id: NodeId) -> bool {
        self.a == id || self.b == id
    }

    pub fn pair(&self) -> (NodeId, NodeId) {
        (self.a, self.b)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Link {
    pub partner: NodeId,
    pub edge: u32,
}

/// Population graph with steady and casual edges.
///
/// Nodes live in dense slots so that per-step Bernoulli trials can be drawn
/// by index; `slot_of` maps identifiers back to slots. Steady edges are kept
/// in a dense list as well, and every node holds links (partner, edge index)
/// into it, so removals are O(degree) rather than O(population).
#[derive(Debug, Clone)]
pub struct Network {
    pub(crate) step: u32,
    pub(crate) ids: Vec<NodeId>,
    pub(crate) slot_of: Vec<u32>,
    pub(crate) adj: Vec<SmallVec<[Link; 2]>>,
    pub(crate) edges: Vec<SteadyEdge>,
    pub(crate) casual: Vec<(NodeId, NodeId)>,
    pub(crate) next_id: NodeId,
}

impl Default for Network {
    fn default() -> Self {
        Network::empty()
    }
}

impl Network {
    pub fn empty() -> Self {
        Network {
            step: 0,
            ids: Vec::new(),
            slot_of: Vec::new(),
            adj: Vec::new(),
            edges: Vec::new(),
            casual: Vec::new(),
            next_id: 0,
        }
    }

    /// `count` isolated nodes labelled `0..count`, at step 0.
    pub fn with_isolated_nodes(count: usize) -> Self {
        let mut net = Network::empty();
        for _ in 0..count {
            net.add_node();
        }
        net
    }

    /// Builds a network from explicit node and steady-edge lists. Node
    /// identifiers need not be contiguous; the next issued id is one past the
    /// largest given.
    pub fn from_parts(
        step: u32,
        nodes: impl IntoIterator<Item = NodeId>,
        steady: impl IntoIterator<Item = SteadyEdge>,
    ) -> Result<Self> {
        let mut net = Network::empty();
        net.step = step;
        for id in nodes {
            if net.contains(id) {
                return Err(Error::Invariant(format!("duplicate node {id}")));
            }
            net.insert_node(id);
        }
        for e in steady {
            let (Some(sa), Some(sb)) = (net.slot(e.a), net.slot(e.b)) else {
                return Err(Error::Invariant(format!(
                    "edge ({}, {}) references a missing node",
                    e.a, e.b
                )));
            };
            if e.a == e.b {
                return Err(Error::Invariant(format!("self-loop at {}", e.a)));
            }
            if net.has_steady_edge(e.a, e.b) {
                return Err(Error::Invariant(format!(
                    "duplicate steady edge ({}, {})",
                    e.a, e.b
                )));
            }
            net.link(sa, sb, e.formed_at);
        }
        Ok(net)
    }

    /// Current step index.
    pub fn step(&self) -> u32 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Node identifiers in slot order (not sorted).
    pub fn nodes(&self) -> &[NodeId] {
        &self.ids
    }

    /// Node identifiers in ascending order.
    pub fn sorted_nodes(&self) -> Vec<NodeId> {
        let mut v = self.ids.clone();
        v.sort_unstable();
        v
    }

    pub fn next_id(&self) -> NodeId {
        self.next_id
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.slot(id).is_some()
    }

    /// Steady degree of `id`, or `None` if the node is not present.
    pub fn degree(&self, id: NodeId) -> Option<usize> {
        self.slot(id).map(|s| self.adj[s].len())
    }

    pub fn partners(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.slot(id)
            .into_iter()
            .flat_map(move |s| self.adj[s].iter().map(|l| l.partner))
    }

    /// Steady edges incident to `id`.
    pub fn incident_edges(&self, id: NodeId) -> impl Iterator<Item = SteadyEdge> + '_ {
        self.slot(id)
            .into_iter()
            .flat_map(move |s| self.adj[s].iter().map(|l| self.edges[l.edge as usize]))
    }

    pub fn has_steady_edge(&self, u: NodeId, v: NodeId) -> bool {
        match (self.slot(u), self.slot(v)) {
            (Some(su), Some(sv)) => {
                // scan the shorter adjacency list
                let (s, other) = if self.adj[su].len() <= self.adj[sv].len() {
                    (su, v)
                } else {
                    (sv, u)
                };
                self.adj[s].iter().any(|l| l.partner == other)
            }
            _ => false,
        }
    }

    pub fn steady_edges(&self) -> &[SteadyEdge] {
        &self.edges
    }

    /// Steady edges sorted by endpoints, for stable output.
    pub fn sorted_steady_edges(&self) -> Vec<SteadyEdge> {
        let mut v = self.edges.clone();
        v.sort_unstable();
        v
    }

    /// Casual contacts formed in the current step, each as `(a, b)` with `a < b`.
    pub fn casual_edges(&self) -> &[(NodeId, NodeId)] {
        &self.casual
    }

    /// Largest steady degree in the network (0 when empty).
    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(|a| a.len()).max().unwrap_or(0)
    }

    /// Checks every structural invariant; intended for tests and debugging.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Invariant(msg));
        if self.ids.len() != self.adj.len() {
            return fail("slot arrays out of sync".into());
        }
        let mut seen = HashSet::with_capacity(self.ids.len());
        for (s, &id) in self.ids.iter().enumerate() {
            if !seen.insert(id) {
                return fail(format!("node {id} appears twice"));
            }
            if id >= self.next_id {
                return fail(format!("node {id} not below next id {}", self.next_id));
            }
            if self.slot_of.get(id as usize).copied() != Some(s as u32) {
                return fail(format!("slot index for {id} is stale"));
            }
        }
        let live = self.slot_of.iter().filter(|&&s| s != VACANT).count();
        if live != self.ids.len() {
            return fail(format!("{live} live slot entries for {} nodes", self.ids.len()));
        }
        let mut pairs = HashSet::with_capacity(self.edges.len());
        for (e, edge) in self.edges.iter().enumerate() {
            if edge.a >= edge.b {
                return fail(format!("edge ({}, {}) not normalised or a self-loop", edge.a, edge.b));
            }
            if edge.formed_at > self.step {
                return fail(format!("edge ({}, {}) formed in the future", edge.a, edge.b));
            }
            if !pairs.insert(edge.pair()) {
                return fail(format!("duplicate steady edge ({}, {})", edge.a, edge.b));
            }
            for (id, other) in [(edge.a, edge.b), (edge.b, edge.a)] {
                let Some(s) = self.slot(id) else {
                    return fail(format!("edge endpoint {id} missing"));
                };
                let hits = self.adj[s]
                    .iter()
                    .filter(|l| l.edge as usize == e && l.partner == other)
                    .count();
                if hits != 1 {
                    return fail(format!("edge ({}, {}) not linked from {id}", edge.a, edge.b));
                }
            }
        }
        let links: usize = self.adj.iter().map(|a| a.len()).sum();
        if links != 2 * self.edges.len() {
            return fail(format!("{links} links for {} edges", self.edges.len()));
        }
        let mut casual_nodes = HashSet::with_capacity(2 * self.casual.len());
        for &(a, b) in &self.casual {
            if a >= b {
                return fail(format!("casual edge ({a}, {b}) not normalised or a self-loop"));
            }
            for id in [a, b] {
                if !self.contains(id) {
                    return fail(format!("casual endpoint {id} missing"));
                }
                if !casual_nodes.insert(id) {
                    return fail(format!("node {id} in more than one casual edge"));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn slot(&self, id: NodeId) -> Option<usize> {
        match self.slot_of.get(usize::try_from(id).ok()?) {
            Some(&s) if s != VACANT => Some(s as usize),
            _ => None,
        }
    }

    pub(crate) fn add_node(&mut self) -> NodeId {
        let id = self.next_id;
        self.insert_node(id);
        id
    }

    fn insert_node(&mut self, id: NodeId) {
        let idx = id as usize;
        if self.slot_of.len() <= idx {
            self.slot_of.resize(idx + 1, VACANT);
        }
        self.slot_of[idx] = self.ids.len() as u32;
        self.ids.push(id);
        self.adj.push(SmallVec::new());
        self.next_id = self.next_id.max(id + 1);
    }

    /// Adds a steady edge between two slots. The caller guarantees the pair
    /// is not already joined.
    pub(crate) fn link(&mut self, sa: usize, sb: usize, formed_at: u32) {
        let (a, b) = (self.ids[sa], self.ids[sb]);
        let e = self.edges.len() as u32;
        self.edges.push(SteadyEdge::new(a, b, formed_at));
        self.adj[sa].push(Link { partner: b, edge: e });
        self.adj[sb].push(Link { partner: a, edge: e });
    }

    /// Removes edge `e` from the dense list and both adjacency lists.
    pub(crate) fn detach_edge(&mut self, e: usize) -> SteadyEdge {
        let edge = self.edges[e];
        for id in [edge.a, edge.b] {
            let s = self.slot_of[id as usize] as usize;
            let links = &mut self.adj[s];
            let pos = links
                .iter()
                .position(|l| l.edge as usize == e)
                .expect("edge linked from both endpoints");
            links.swap_remove(pos);
        }
        let last = self.edges.len() - 1;
        self.edges.swap_remove(e);
        if e != last {
            let moved = self.edges[e];
            for id in [moved.a, moved.b] {
                let s = self.slot_of[id as usize] as usize;
                for l in self.adj[s].iter_mut() {
                    if l.edge as usize == last {
                        l.edge = e as u32;
                    }
                }
            }
        }
        edge
    }

    /// Removes the node in slot `s`, which must have no remaining edges.
    pub(crate) fn remove_isolated_slot(&mut self, s: usize) -> NodeId {
        debug_assert!(self.adj[s].is_empty());
        let id = self.ids[s];
        self.slot_of[id as usize] = VACANT;
        self.ids.swap_remove(s);
        self.adj.swap_remove(s);
        if s < self.ids.len() {
            self.slot_of[self.ids[s] as usize] = s as u32;
        }
        id
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star() -> Network {
        Network::from_parts(
            5,
            [10, 11, 12, 13],
            [SteadyEdge::new(10, 11, 1), SteadyEdge::new(12, 10, 3)],
        )
        .unwrap()
    }

    #[test]
    fn from_parts_links_both_ends() {
        let net = star();
        net.check_invariants().unwrap();
        assert_eq!(net.degree(10), Some(2));
        assert_eq!(net.degree(13), Some(0));
        assert_eq!(net.degree(99), None);
        assert!(net.has_steady_edge(12, 10));
        assert!(!net.has_steady_edge(11, 12));
        assert_eq!(net.next_id(), 14);
    }

    #[test]
    fn from_parts_rejects_bad_edges() {
        assert!(Network::from_parts(0, [1, 2], [SteadyEdge::new(1, 3, 0)]).is_err());
        assert!(Network::from_parts(0, [1, 2], [SteadyEdge::new(1, 1, 0)]).is_err());
        assert!(Network::from_parts(
            0,
            [1, 2],
            [SteadyEdge::new(1, 2, 0), SteadyEdge::new(2, 1, 0)]
        )
        .is_err());
        assert!(Network::from_parts(0, [1, 1], []).is_err());
    }

    #[test]
    fn detaching_keeps_links_consistent() {
        let mut net = star();
        net.link(net.slot(11).unwrap(), net.slot(13).unwrap(), 4);
        let e = net.edges.iter().position(|e| e.pair() == (10, 11)).unwrap();
        let gone = net.detach_edge(e);
        assert_eq!(gone.pair(), (10, 11));
        net.check_invariants().unwrap();
        assert_eq!(net.degree(11), Some(1));
        assert!(net.has_steady_edge(11, 13));
    }

    #[test]
    fn removing_a_slot_reindexes_the_moved_node() {
        let mut net = Network::with_isolated_nodes(4);
        let s = net.slot(1).unwrap();
        assert_eq!(net.remove_isolated_slot(s), 1);
        net.check_invariants().unwrap();
        assert!(!net.contains(1));
        assert!(net.contains(3));
        assert_eq!(net.add_node(), 4);
    }
}
