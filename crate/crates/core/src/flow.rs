//! Residual network with real capacities and per-unit gains.
//!
//! Used by the offline oracle: shortest augmenting paths for the greedy
//! allocation, longest-gain augmenting paths for the per-knapsack-value
//! case, and node potentials for recovering capacity prices.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub(crate) struct Network {
    pub to: Vec<usize>,
    pub res: Vec<f64>,
    pub gain: Vec<f64>,
    pub adj: Vec<Vec<usize>>,
    pub eps: f64,
}

impl Network {
    pub fn new(nodes: usize, eps: f64) -> Self {
        Network { to: Vec::new(), res: Vec::new(), gain: Vec::new(), adj: vec![Vec::new(); nodes], eps }
    }

    pub fn nodes(&self) -> usize {
        self.adj.len()
    }

    /// Adds `u -> v` and its reverse; returns the forward edge id. The
    /// reverse edge is `id ^ 1`.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: f64, gain: f64) -> usize {
        let id = self.to.len();
        self.to.push(v);
        self.res.push(cap);
        self.gain.push(gain);
        self.adj[u].push(id);
        self.to.push(u);
        self.res.push(0.0);
        self.gain.push(-gain);
        self.adj[v].push(id + 1);
        id
    }

    pub fn flow(&self, e: usize) -> f64 {
        self.res[e ^ 1]
    }

    pub fn push(&mut self, e: usize, amount: f64) {
        self.res[e] -= amount;
        self.res[e ^ 1] += amount;
        if self.res[e] < 0.0 {
            self.res[e] = 0.0;
        }
    }

    /// Push up to `limit` from `src` to `sink` along shortest residual
    /// paths, never entering `blocked`. Returns the amount pushed.
    pub fn augment_from(&mut self, src: usize, sink: usize, blocked: usize, limit: f64) -> f64 {
        let mut pushed = 0.0;
        let n = self.nodes();
        let mut pred = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        while limit - pushed > self.eps {
            pred.iter_mut().for_each(|p| *p = usize::MAX);
            queue.clear();
            queue.push_back(src);
            let mut seen = vec![false; n];
            seen[src] = true;
            let mut found = false;
            'bfs: while let Some(u) = queue.pop_front() {
                for &e in &self.adj[u] {
                    let v = self.to[e];
                    if seen[v] || v == blocked || self.res[e] <= self.eps {
                        continue;
                    }
                    seen[v] = true;
                    pred[v] = e;
                    if v == sink {
                        found = true;
                        break 'bfs;
                    }
                    queue.push_back(v);
                }
            }
            if !found {
                break;
            }
            let mut amount = limit - pushed;
            let mut v = sink;
            while v != src {
                let e = pred[v];
                amount = amount.min(self.res[e]);
                v = self.to[e ^ 1];
            }
            let mut v = sink;
            while v != src {
                let e = pred[v];
                self.push(e, amount);
                v = self.to[e ^ 1];
            }
            pushed += amount;
        }
        pushed
    }

    /// Longest-gain residual path from `src`; returns per-node distances
    /// and predecessor edges. Stops relaxing after `nodes` rounds.
    fn longest_from(&self, src: usize) -> (Vec<f64>, Vec<usize>) {
        let n = self.nodes();
        let mut dist = vec![f64::NEG_INFINITY; n];
        let mut pred = vec![usize::MAX; n];
        let mut in_queue = vec![false; n];
        let mut count = vec![0usize; n];
        let mut queue = VecDeque::new();
        dist[src] = 0.0;
        queue.push_back(src);
        in_queue[src] = true;
        while let Some(u) = queue.pop_front() {
            in_queue[u] = false;
            for &e in &self.adj[u] {
                if self.res[e] <= self.eps {
                    continue;
                }
                let v = self.to[e];
                let cand = dist[u] + self.gain[e];
                if cand > dist[v] + 1e-13 * (1.0 + cand.abs()) {
                    dist[v] = cand;
                    pred[v] = e;
                    if !in_queue[v] {
                        count[v] += 1;
                        if count[v] > n {
                            // numerically induced cycle; give up on this node
                            continue;
                        }
                        in_queue[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        (dist, pred)
    }

    /// Successive longest-gain augmenting paths from `s` to `t` until no
    /// path with positive gain remains. Returns the number of augmentations.
    pub fn max_gain_flow(&mut self, s: usize, t: usize, max_paths: usize) -> (usize, bool) {
        for k in 0..max_paths {
            let (dist, pred) = self.longest_from(s);
            if !(dist[t] > 1e-12) {
                return (k, true);
            }
            let mut amount = f64::INFINITY;
            let mut v = t;
            let mut guard = 0;
            while v != s {
                let e = pred[v];
                amount = amount.min(self.res[e]);
                v = self.to[e ^ 1];
                guard += 1;
                if guard > self.nodes() {
                    return (k, false);
                }
            }
            if !(amount > self.eps) {
                return (k, false);
            }
            let mut v = t;
            while v != s {
                let e = pred[v];
                self.push(e, amount);
                v = self.to[e ^ 1];
            }
        }
        (max_paths, false)
    }

    /// `q(u)` = best gain of a residual path from `u` to any terminal
    /// (terminals have `q = 0`); `-inf` when none is reachable.
    pub fn potentials_to(&self, terminals: &[usize]) -> Vec<f64> {
        let n = self.nodes();
        let mut q = vec![f64::NEG_INFINITY; n];
        for &t in terminals {
            q[t] = 0.0;
        }
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                if terminals.contains(&u) {
                    continue;
                }
                for &e in &self.adj[u] {
                    if self.res[e] <= self.eps {
                        continue;
                    }
                    let qv = q[self.to[e]];
                    if qv == f64::NEG_INFINITY {
                        continue;
                    }
                    let cand = self.gain[e] + qv;
                    if cand > q[u] + 1e-13 * (1.0 + cand.abs()) {
                        q[u] = cand;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        q
    }
}
