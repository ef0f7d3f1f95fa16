//! Seeded instance families that come with their own tree decomposition.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decomposition::{BagId, TreeDecomposition};
use crate::error::{Error, Result};
use crate::graph::{MultiGraph, NodeId};
use crate::instance::{Demand, Instance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    SeriesParallel,
    PartialKTree,
    Grid,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "series-parallel" | "sp" => Ok(Family::SeriesParallel),
            "partial-k-tree" | "k-tree" => Ok(Family::PartialKTree),
            "grid" => Ok(Family::Grid),
            _ => Err(Error::invalid(format!("unknown family {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub instance: Instance,
    pub decomposition: TreeDecomposition,
}

fn random_pairs(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<Demand> {
    (0..count)
        .map(|_| {
            let s = rng.gen_range(0..n);
            let mut t = rng.gen_range(0..n - 1);
            if t >= s {
                t += 1;
            }
            Demand::new(s, t)
        })
        .collect()
}

/// Random partial k-tree on `n` nodes. Every new node is joined to a random
/// k-clique of the underlying k-tree; each of its k edges is kept with
/// probability 1/2 except one, so the graph stays connected. The
/// decomposition has one bag per clique extension.
pub fn partial_k_tree(n: usize, k: usize, demands: usize, seed: u64) -> Result<Generated> {
    if k == 0 {
        return Err(Error::invalid("partial k-tree needs k >= 1"));
    }
    if n < k + 1 {
        return Err(Error::invalid(format!("partial {k}-tree needs at least {} nodes, got {n}", k + 1)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = MultiGraph::new(n);
    let mut seen = BTreeSet::new();
    let mut edge = |g: &mut MultiGraph, a: NodeId, b: NodeId| -> Result<()> {
        if seen.insert((a.min(b), a.max(b))) {
            g.add_edge(a, b, 1)?;
        }
        Ok(())
    };
    // initial k-clique: a path plus random chords
    for v in 1..k {
        edge(&mut g, v - 1, v)?;
    }
    for a in 0..k {
        for b in a + 2..k {
            if rng.gen_bool(0.5) {
                edge(&mut g, a, b)?;
            }
        }
    }
    let mut bags: Vec<(BTreeSet<NodeId>, bool)> = vec![((0..k).collect(), false)];
    let mut tree_edges = Vec::new();
    let mut cliques: Vec<(Vec<NodeId>, BagId)> = vec![((0..k).collect(), 0)];
    for v in k..n {
        let (clique, host) = cliques[rng.gen_range(0..cliques.len())].clone();
        let keep = rng.gen_range(0..k);
        for (i, &a) in clique.iter().enumerate() {
            if i == keep || rng.gen_bool(0.5) {
                edge(&mut g, a, v)?;
            }
        }
        let mut bag: BTreeSet<NodeId> = clique.iter().copied().collect();
        bag.insert(v);
        let id = bags.len();
        bags.push((bag, false));
        tree_edges.push((host, id));
        for i in 0..k {
            let mut c = clique.clone();
            c[i] = v;
            c.sort_unstable();
            cliques.push((c, id));
        }
    }
    let pairs = if n >= 2 { random_pairs(&mut rng, n, demands) } else { Vec::new() };
    let mut d = TreeDecomposition::new(bags, tree_edges, 0, 0, 0);
    let width = (0..d.tree_edges.len()).map(|e| d.separator(e).len()).max().unwrap_or(0);
    d.k = width;
    d.p = width;
    Ok(Generated {
        instance: Instance::new(g, pairs)?,
        decomposition: d,
    })
}

/// Random series-parallel graph: a partial 2-tree.
pub fn series_parallel(n: usize, demands: usize, seed: u64) -> Result<Generated> {
    if n < 3 {
        return Err(Error::invalid(format!("series-parallel generator needs at least 3 nodes, got {n}")));
    }
    partial_k_tree(n, 2, demands, seed)
}

/// `side` × `side` unit grid, node r·side + c. Pair i joins the left end of
/// row i to the right end of row side−1−i, so every pair crosses the
/// centre. The decomposition is the row-major path decomposition of width
/// `side`.
pub fn grid(side: usize, demands: usize) -> Result<Generated> {
    if side < 2 {
        return Err(Error::invalid(format!("grid side must be at least 2, got {side}")));
    }
    if demands > side {
        return Err(Error::invalid(format!("a {side}x{side} grid has {side} crossing pairs, asked for {demands}")));
    }
    let n = side * side;
    let mut g = MultiGraph::new(n);
    for r in 0..side {
        for c in 0..side {
            let v = r * side + c;
            if c + 1 < side {
                g.add_edge(v, v + 1, 1)?;
            }
            if r + 1 < side {
                g.add_edge(v, v + side, 1)?;
            }
        }
    }
    let pairs = (0..demands)
        .map(|i| Demand::new(i * side, (side - 1 - i) * side + side - 1))
        .collect();
    let bags: Vec<(BTreeSet<NodeId>, bool)> = (0..n - side).map(|j| ((j..=j + side).collect(), false)).collect();
    let tree_edges = (1..bags.len()).map(|j| (j - 1, j)).collect();
    Ok(Generated {
        instance: Instance::new(g, pairs)?,
        decomposition: TreeDecomposition::new(bags, tree_edges, 0, side, side),
    })
}

/// Demand pairs are shuffled per seed for the grid; the other families
/// draw them at random.
pub fn generate(family: Family, size: usize, k: usize, demands: usize, seed: u64) -> Result<Generated> {
    match family {
        Family::SeriesParallel => series_parallel(size, demands, seed),
        Family::PartialKTree => partial_k_tree(size, k, demands, seed),
        Family::Grid => {
            let mut out = grid(size, demands)?;
            out.instance.demands.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::validate;

    #[test]
    fn series_parallel_seed_7() {
        let out = series_parallel(10, 3, 7).unwrap();
        let r = validate(&out.decomposition, &out.instance.graph, None);
        assert!(r.is_valid(), "{:?}", r.violations);
        assert!(out.decomposition.k <= 2);
        assert!(out.instance.graph.is_connected());
    }

    #[test]
    fn partial_three_tree() {
        let out = partial_k_tree(12, 3, 4, 1).unwrap();
        assert!(validate(&out.decomposition, &out.instance.graph, None).is_valid());
        assert!(out.decomposition.k <= 3);
        assert_eq!(out.instance.demands.len(), 4);
    }

    #[test]
    fn same_seed_same_output() {
        let a = series_parallel(20, 5, 3).unwrap();
        let b = series_parallel(20, 5, 3).unwrap();
        assert_eq!(a.instance, b.instance);
        assert_eq!(a.decomposition, b.decomposition);
    }

    #[test]
    fn grid_decomposition_is_valid() {
        let out = grid(3, 3).unwrap();
        assert!(validate(&out.decomposition, &out.instance.graph, None).is_valid());
        assert_eq!(out.instance.demands[1], Demand::new(3, 5));
    }

    #[test]
    fn degenerate_sizes_fail() {
        assert!(series_parallel(2, 1, 0).is_err());
        assert!(partial_k_tree(3, 3, 1, 0).is_err());
        assert!(grid(1, 1).is_err());
        assert!(grid(3, 4).is_err());
    }
}
