//! Dinic blocking-flow max-flow over any exact integer amount type.

use std::collections::VecDeque;
use std::ops::{AddAssign, Sub, SubAssign};

use num_traits::Zero;

use crate::error::{Error, Result};

pub trait Amount: Clone + Ord + Zero + AddAssign + SubAssign + Sub<Output = Self> {}

impl<T: Clone + Ord + Zero + AddAssign + SubAssign + Sub<Output = T>> Amount for T {}

pub type ArcId = usize;

/// Residual network. Arcs come in pairs `a` / `a ^ 1`.
#[derive(Debug, Clone)]
pub struct Dinic<T> {
    adj: Vec<Vec<ArcId>>,
    to: Vec<usize>,
    cap: Vec<T>,
    orig: Vec<T>,
    level: Vec<i64>,
    iter: Vec<usize>,
}

impl<T: Amount> Dinic<T> {
    pub fn new(n: usize) -> Self {
        Dinic {
            adj: vec![Vec::new(); n],
            to: Vec::new(),
            cap: Vec::new(),
            orig: Vec::new(),
            level: vec![0; n],
            iter: vec![0; n],
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    fn push_pair(&mut self, u: usize, v: usize, forward: T, backward: T) -> ArcId {
        let a = self.to.len();
        self.to.push(v);
        self.cap.push(forward.clone());
        self.orig.push(forward);
        self.adj[u].push(a);
        self.to.push(u);
        self.cap.push(backward.clone());
        self.orig.push(backward);
        self.adj[v].push(a + 1);
        a
    }

    /// Directed arc u -> v.
    pub fn add_arc(&mut self, u: usize, v: usize, cap: T) -> ArcId {
        self.push_pair(u, v, cap, T::zero())
    }

    /// Undirected edge: capacity `cap` usable in either direction.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: T) -> ArcId {
        self.push_pair(u, v, cap.clone(), cap)
    }

    /// Net flow along arc `a` in its own direction (negative if the pair
    /// carries flow the other way).
    pub fn flow(&self, a: ArcId) -> T {
        self.orig[a].clone() - self.cap[a].clone()
    }

    pub fn head(&self, a: ArcId) -> usize {
        self.to[a]
    }

    pub fn tail(&self, a: ArcId) -> usize {
        self.to[a ^ 1]
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &a in &self.adj[u] {
                let v = self.to[a];
                if self.level[v] < 0 && self.cap[a] > T::zero() {
                    self.level[v] = self.level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        self.level[t] >= 0
    }

    /// One augmenting path in the level graph, iteratively.
    fn augment(&mut self, s: usize, t: usize, limit: &T) -> Option<T> {
        let mut stack: Vec<ArcId> = Vec::new();
        let mut u = s;
        loop {
            if u == t {
                let mut f = limit.clone();
                for &a in &stack {
                    if self.cap[a] < f {
                        f = self.cap[a].clone();
                    }
                }
                for &a in &stack {
                    self.cap[a] -= f.clone();
                    self.cap[a ^ 1] += f.clone();
                }
                return Some(f);
            }
            let mut advanced = false;
            while self.iter[u] < self.adj[u].len() {
                let a = self.adj[u][self.iter[u]];
                let v = self.to[a];
                if self.cap[a] > T::zero() && self.level[v] == self.level[u] + 1 {
                    stack.push(a);
                    u = v;
                    advanced = true;
                    break;
                }
                self.iter[u] += 1;
            }
            if !advanced {
                // dead end: prune and back up
                self.level[u] = -1;
                match stack.pop() {
                    Some(a) => {
                        u = self.to[a ^ 1];
                        self.iter[u] += 1;
                    }
                    None => return None,
                }
            }
        }
    }

    /// Maximum flow from `s` to `t`, added on top of any existing flow.
    pub fn max_flow(&mut self, s: usize, t: usize) -> T {
        let mut total = T::zero();
        if s == t {
            return total;
        }
        let mut limit = T::zero();
        for &a in &self.adj[s] {
            limit += self.cap[a].clone();
        }
        while self.bfs(s, t) {
            self.iter.iter_mut().for_each(|i| *i = 0);
            while let Some(f) = self.augment(s, t, &limit) {
                if f.is_zero() {
                    break;
                }
                total += f;
            }
        }
        total
    }

    /// Nodes reachable from `s` in the residual network.
    pub fn reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &a in &self.adj[u] {
                let v = self.to[a];
                if !seen[v] && self.cap[a] > T::zero() {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }
}

/// A positive amount on a directed arc `from -> to`; `tag` is caller data
/// (usually the graph edge id).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowArc<T> {
    pub from: usize,
    pub to: usize,
    pub tag: usize,
    pub amount: T,
}

/// Decomposes a conserving s-t flow into simple paths (as arc indices).
/// Circulations are cancelled and discarded.
pub fn decompose<T: Amount>(n: usize, arcs: &[FlowArc<T>], s: usize, t: usize) -> Result<Vec<(Vec<usize>, T)>> {
    let mut rest: Vec<T> = arcs.iter().map(|a| a.amount.clone()).collect();
    let mut out_arcs: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut balance: Vec<(T, T)> = vec![(T::zero(), T::zero()); n];
    for (i, a) in arcs.iter().enumerate() {
        if a.from >= n || a.to >= n {
            return Err(Error::invalid(format!("flow arc {i} leaves the network")));
        }
        if a.amount < T::zero() {
            return Err(Error::invalid(format!("flow arc {i} has negative amount")));
        }
        out_arcs[a.from].push(i);
        balance[a.from].0 += a.amount.clone();
        balance[a.to].1 += a.amount.clone();
    }
    for (v, (out, inn)) in balance.iter().enumerate() {
        if v != s && v != t && out != inn {
            return Err(Error::invalid(format!("flow does not conserve at node {v}")));
        }
    }
    let mut ptr = vec![0usize; n];
    let mut paths = Vec::new();
    loop {
        // walk from s along positive arcs; cancel any cycle met on the way
        let mut walk: Vec<usize> = Vec::new();
        let mut pos = vec![usize::MAX; n];
        let mut u = s;
        pos[s] = 0;
        let mut reached = false;
        loop {
            if u == t {
                reached = true;
                break;
            }
            while ptr[u] < out_arcs[u].len() && rest[out_arcs[u][ptr[u]]].is_zero() {
                ptr[u] += 1;
            }
            if ptr[u] == out_arcs[u].len() {
                break;
            }
            let a = out_arcs[u][ptr[u]];
            let v = arcs[a].to;
            walk.push(a);
            if pos[v] != usize::MAX {
                let cycle: Vec<usize> = walk.split_off(pos[v]);
                let mut m = rest[cycle[0]].clone();
                for &c in &cycle {
                    if rest[c] < m {
                        m = rest[c].clone();
                    }
                }
                for &c in &cycle {
                    rest[c] -= m.clone();
                }
                for &c in &cycle {
                    let x = arcs[c].to;
                    if x != v {
                        pos[x] = usize::MAX;
                    }
                }
                u = v;
                continue;
            }
            pos[v] = walk.len();
            u = v;
        }
        if !reached {
            if walk.is_empty() {
                break;
            }
            return Err(Error::invalid("flow does not conserve along a walk"));
        }
        if walk.is_empty() {
            break;
        }
        let mut m = rest[walk[0]].clone();
        for &a in &walk {
            if rest[a] < m {
                m = rest[a].clone();
            }
        }
        for &a in &walk {
            rest[a] -= m.clone();
        }
        paths.push((walk, m));
    }
    Ok(paths)
}
