//! Exact max-flow / min-cut on integer capacities (Dinic's algorithm).

use std::collections::VecDeque;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: i64,
}

/// Directed capacitated graph. Each call to [`FlowGraph::min_cut`] mutates
/// the residual capacities, so a graph answers one query.
#[derive(Debug, Clone)]
pub struct FlowGraph {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
}

impl FlowGraph {
    pub fn new(nodes: usize) -> Self {
        FlowGraph { arcs: Vec::new(), adj: vec![Vec::new(); nodes] }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    /// Adds `u -> v` with capacity `cap` (and its zero-capacity reverse arc).
    pub fn add_edge(&mut self, u: usize, v: usize, cap: i64) {
        assert!(cap >= 0, "negative capacity");
        let id = self.arcs.len();
        self.arcs.push(Arc { to: v, cap });
        self.arcs.push(Arc { to: u, cap: 0 });
        self.adj[u].push(id);
        self.adj[v].push(id + 1);
    }

    fn bfs_levels(&self, s: usize, t: usize, level: &mut [i32]) -> bool {
        level.iter_mut().for_each(|l| *l = -1);
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &id in &self.adj[v] {
                let a = &self.arcs[id];
                if a.cap > 0 && level[a.to] < 0 {
                    level[a.to] = level[v] + 1;
                    queue.push_back(a.to);
                }
            }
        }
        level[t] >= 0
    }

    fn dfs_push(&mut self, v: usize, t: usize, pushed: i64, level: &[i32], it: &mut [usize]) -> i64 {
        if v == t {
            return pushed;
        }
        while it[v] < self.adj[v].len() {
            let id = self.adj[v][it[v]];
            let (to, cap) = (self.arcs[id].to, self.arcs[id].cap);
            if cap > 0 && level[to] == level[v] + 1 {
                let got = self.dfs_push(to, t, pushed.min(cap), level, it);
                if got > 0 {
                    self.arcs[id].cap -= got;
                    self.arcs[id ^ 1].cap += got;
                    return got;
                }
            }
            it[v] += 1;
        }
        0
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let n = self.node_count();
        let mut level = vec![-1; n];
        let mut flow = 0i64;
        while self.bfs_levels(s, t, &mut level) {
            let mut it = vec![0usize; n];
            loop {
                let f = self.dfs_push(s, t, i64::MAX, &level, &mut it);
                if f == 0 {
                    break;
                }
                flow += f;
            }
        }
        flow
    }

    /// Min-cut value and the (inclusion-minimal) source side.
    pub fn min_cut(&mut self, s: usize, t: usize) -> (i64, Vec<bool>) {
        let value = self.max_flow(s, t);
        let mut side = vec![false; self.node_count()];
        side[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &id in &self.adj[v] {
                let a = &self.arcs[id];
                if a.cap > 0 && !side[a.to] {
                    side[a.to] = true;
                    queue.push_back(a.to);
                }
            }
        }
        (value, side)
    }
}
