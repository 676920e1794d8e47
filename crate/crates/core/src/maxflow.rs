//! Exact s–t maximum flow (Dinic) with a fixed, reproducible scan order.
//!
//! Nodes are visited and edges scanned in insertion order, so the flow and
//! the recovered cut depend only on the graph as built.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    /// Residual capacity.
    cap: f64,
}

/// Flow network with real capacities. Edge `e` and its reverse live at
/// `e` and `e ^ 1`.
#[derive(Debug, Clone)]
pub struct FlowGraph {
    adj: Vec<Vec<usize>>,
    edges: Vec<Edge>,
}

impl FlowGraph {
    pub fn new(nodes: usize) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
            edges: Vec::new(),
        }
    }

    pub fn nodes(&self) -> usize {
        self.adj.len()
    }

    /// Directed edge `from → to`.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        debug_assert!(cap >= 0.0);
        self.add_pair(from, to, cap, 0.0);
    }

    /// Edge with capacity `cap` in both directions.
    pub fn add_undirected(&mut self, a: usize, b: usize, cap: f64) {
        debug_assert!(cap >= 0.0);
        self.add_pair(a, b, cap, cap);
    }

    fn add_pair(&mut self, from: usize, to: usize, forward: f64, backward: f64) {
        let e = self.edges.len();
        self.edges.push(Edge { to, cap: forward });
        self.edges.push(Edge {
            to: from,
            cap: backward,
        });
        self.adj[from].push(e);
        self.adj[to].push(e + 1);
    }

    fn levels(&self, s: usize, t: usize) -> Option<Vec<u32>> {
        let mut level = vec![u32::MAX; self.nodes()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let edge = &self.edges[e];
                if edge.cap > 0.0 && level[edge.to] == u32::MAX {
                    level[edge.to] = level[u] + 1;
                    queue.push_back(edge.to);
                }
            }
        }
        (level[t] != u32::MAX).then_some(level)
    }

    /// Blocking flow on the level graph, iterative to avoid deep recursion
    /// on large grids.
    fn blocking_flow(&mut self, s: usize, t: usize, level: &[u32]) -> f64 {
        let mut next_arc = vec![0usize; self.nodes()];
        let mut dead = vec![false; self.nodes()];
        let mut path: Vec<usize> = Vec::new();
        let mut total = 0.0;
        loop {
            let u = path.last().map_or(s, |&e| self.edges[e].to);
            if u == t {
                let bottleneck = path
                    .iter()
                    .map(|&e| self.edges[e].cap)
                    .fold(f64::INFINITY, f64::min);
                for &e in &path {
                    self.edges[e].cap -= bottleneck;
                    self.edges[e ^ 1].cap += bottleneck;
                }
                total += bottleneck;
                // Retreat to just before the first saturated edge.
                let cut = path
                    .iter()
                    .position(|&e| self.edges[e].cap <= 0.0)
                    .unwrap_or(path.len());
                path.truncate(cut);
                continue;
            }
            let mut advanced = false;
            while next_arc[u] < self.adj[u].len() {
                let e = self.adj[u][next_arc[u]];
                let edge = &self.edges[e];
                if edge.cap > 0.0 && !dead[edge.to] && level[edge.to] == level[u] + 1 {
                    path.push(e);
                    advanced = true;
                    break;
                }
                next_arc[u] += 1;
            }
            if advanced {
                continue;
            }
            dead[u] = true;
            match path.pop() {
                Some(e) => {
                    let parent = self.edges[e ^ 1].to;
                    next_arc[parent] += 1;
                }
                None => break,
            }
        }
        total
    }

    /// Pushes a maximum flow from `s` to `t` and returns its value. The
    /// residual network is kept for [`FlowGraph::reaches_sink`].
    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut flow = 0.0;
        while let Some(level) = self.levels(s, t) {
            flow += self.blocking_flow(s, t, &level);
        }
        flow
    }

    /// Nodes that can still reach `t` in the residual network. After a
    /// maximum flow these form the smallest sink side among all minimum
    /// cuts.
    pub fn reaches_sink(&self, t: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes()];
        seen[t] = true;
        let mut queue = VecDeque::from([t]);
        while let Some(v) = queue.pop_front() {
            for &e in &self.adj[v] {
                // e: v → u; its reverse u → v carries residual edges[e ^ 1].cap
                let u = self.edges[e].to;
                if !seen[u] && self.edges[e ^ 1].cap > 0.0 {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen
    }
}
