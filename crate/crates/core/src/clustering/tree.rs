//! Hierarchy construction for HDBSCAN: core distances, mutual reachability,
//! Prim's MST, the single-linkage tree and its condensed form, excess-of-mass
//! selection, labelling and membership probabilities.
//!
//! Nodes are numbered like the reference implementation: points are `0..n`,
//! single-linkage merges are `n..2n-1`, and condensed clusters start at `n`
//! (the root).

use rayon::prelude::*;
use serde::Serialize;

/// Distances at or below this are treated as this value when converted to λ.
pub const MIN_DISTANCE: f64 = 1e-12;

pub(crate) fn lambda_of(distance: f64) -> f64 {
    1.0 / distance.max(MIN_DISTANCE)
}

/// A dense symmetric distance matrix, row-major.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(n: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n * n, "distance matrix must be n×n");
        Self { n, values }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// Distance from each point to its `k`-th nearest other point (the point
/// itself is not counted). `k` is clamped to `n - 1`.
pub fn core_distances(dist: &DistanceMatrix, k: usize) -> Vec<f64> {
    let n = dist.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let k = k.clamp(1, n - 1);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut others: Vec<f64> = dist
                .row(i)
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &d)| d)
                .collect();
            let (_, kth, _) = others.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect()
}

pub fn mutual_reachability(dist: &DistanceMatrix, core: &[f64], a: usize, b: usize) -> f64 {
    core[a].max(core[b]).max(dist.get(a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Prim's algorithm over the complete mutual-reachability graph, O(n²).
/// Edges come back sorted by weight (stable on discovery order).
pub fn minimum_spanning_tree(dist: &DistanceMatrix, core: &[f64]) -> Vec<MstEdge> {
    let n = dist.len();
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    if n < 2 {
        return edges;
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_w = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let w = mutual_reachability(dist, core, current, j);
            if w < best[j] {
                best[j] = w;
                from[j] = current;
            }
            if next == usize::MAX || best[j] < next_w {
                next = j;
                next_w = best[j];
            }
        }
        in_tree[next] = true;
        edges.push(MstEdge {
            a: from[next],
            b: next,
            weight: next_w,
        });
        current = next;
    }
    edges.sort_by(|x, y| x.weight.total_cmp(&y.weight));
    edges
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

/// Agglomerates sorted MST edges; merge `i` becomes node `n + i`.
pub(crate) fn single_linkage(n: usize, mst: &[MstEdge]) -> Vec<Merge> {
    let total = 2 * n - 1;
    let mut parent: Vec<usize> = (0..total).collect();
    let mut size = vec![1usize; total];
    let mut merges = Vec::with_capacity(n - 1);

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        let mut root = x;
        while parent[root] != root {
            root = parent[root];
        }
        while parent[x] != root {
            let up = parent[x];
            parent[x] = root;
            x = up;
        }
        root
    }

    for (i, e) in mst.iter().enumerate() {
        let left = find(&mut parent, e.a);
        let right = find(&mut parent, e.b);
        let node = n + i;
        size[node] = size[left] + size[right];
        parent[left] = node;
        parent[right] = node;
        merges.push(Merge {
            left,
            right,
            distance: e.weight,
            size: size[node],
        });
    }
    merges
}

fn bfs_hierarchy(n: usize, merges: &[Merge], root: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut frontier = vec![root];
    while !frontier.is_empty() {
        out.extend_from_slice(&frontier);
        frontier = frontier
            .iter()
            .filter(|&&x| x >= n)
            .flat_map(|&x| {
                let m = &merges[x - n];
                [m.left, m.right]
            })
            .collect();
    }
    out
}

/// A row of the condensed tree. `child < n` is a point, otherwise a cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CondensedEdge {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub size: usize,
}

pub(crate) fn condense(n: usize, merges: &[Merge], min_cluster_size: usize) -> Vec<CondensedEdge> {
    let root = 2 * n - 2;
    let mut relabel = vec![0usize; root + 1];
    relabel[root] = n;
    let mut next_label = n + 1;
    let mut ignore = vec![false; root + 1];
    let mut out = Vec::new();

    let count = |node: usize| if node >= n { merges[node - n].size } else { 1 };

    for node in bfs_hierarchy(n, merges, root) {
        if ignore[node] || node < n {
            continue;
        }
        let m = merges[node - n];
        let lambda = lambda_of(m.distance);
        let (lc, rc) = (count(m.left), count(m.right));
        let parent = relabel[node];

        let fall_out = |sub_root: usize, ignore: &mut Vec<bool>, out: &mut Vec<CondensedEdge>| {
            for sub in bfs_hierarchy(n, merges, sub_root) {
                if sub < n {
                    out.push(CondensedEdge {
                        parent,
                        child: sub,
                        lambda,
                        size: 1,
                    });
                }
                ignore[sub] = true;
            }
        };

        match (lc >= min_cluster_size, rc >= min_cluster_size) {
            (true, true) => {
                for (child, size) in [(m.left, lc), (m.right, rc)] {
                    relabel[child] = next_label;
                    next_label += 1;
                    out.push(CondensedEdge {
                        parent,
                        child: relabel[child],
                        lambda,
                        size,
                    });
                }
            }
            (false, false) => {
                fall_out(m.left, &mut ignore, &mut out);
                fall_out(m.right, &mut ignore, &mut out);
            }
            (false, true) => {
                relabel[m.right] = parent;
                fall_out(m.left, &mut ignore, &mut out);
            }
            (true, false) => {
                relabel[m.left] = parent;
                fall_out(m.right, &mut ignore, &mut out);
            }
        }
    }
    out
}

/// Clusters in the condensed tree, indexed by `id - n`.
pub(crate) struct ClusterTable {
    pub n: usize,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    pub stability: Vec<f64>,
    /// Largest λ among the cluster's direct children rows.
    pub death: Vec<f64>,
}

pub(crate) fn cluster_table(n: usize, tree: &[CondensedEdge]) -> ClusterTable {
    let n_clusters = tree
        .iter()
        .map(|e| e.parent.max(if e.child >= n { e.child } else { n }))
        .max()
        .map_or(1, |m| m - n + 1);
    let mut birth = vec![0.0; n_clusters];
    let mut parent = vec![None; n_clusters];
    let mut children = vec![Vec::new(); n_clusters];
    for e in tree.iter().filter(|e| e.child >= n) {
        birth[e.child - n] = e.lambda;
        parent[e.child - n] = Some(e.parent);
        children[e.parent - n].push(e.child);
    }
    let mut stability = vec![0.0; n_clusters];
    let mut death = vec![0.0f64; n_clusters];
    for e in tree {
        let p = e.parent - n;
        stability[p] += (e.lambda - birth[p]) * e.size as f64;
        death[p] = death[p].max(e.lambda);
    }
    ClusterTable {
        n,
        parent,
        children,
        stability,
        death,
    }
}

/// Excess-of-mass selection. Returns selected cluster ids (ascending).
pub(crate) fn select_eom(table: &ClusterTable, allow_single_cluster: bool) -> Vec<usize> {
    let n = table.n;
    let k = table.stability.len();
    let mut stability = table.stability.clone();
    let mut selected = vec![true; k];
    let lowest = if allow_single_cluster { 0 } else { 1 };
    if !allow_single_cluster {
        selected[0] = false;
    }
    for c in (lowest..k).rev() {
        let subtree: f64 = table.children[c].iter().map(|&ch| stability[ch - n]).sum();
        if subtree > stability[c] {
            selected[c] = false;
            stability[c] = subtree;
        } else {
            let mut stack: Vec<usize> = table.children[c].iter().map(|&ch| ch - n).collect();
            while let Some(d) = stack.pop() {
                selected[d] = false;
                stack.extend(table.children[d].iter().map(|&ch| ch - n));
            }
        }
    }
    (0..k).filter(|&c| selected[c]).map(|c| c + n).collect()
}

/// Per-point `(selected cluster id or None, membership probability)`.
pub(crate) fn label_points(
    n: usize,
    tree: &[CondensedEdge],
    table: &ClusterTable,
    selected: &[usize],
) -> Vec<(Option<usize>, f64)> {
    let root = n;
    let mut point_parent = vec![root; n];
    let mut point_lambda = vec![0.0; n];
    for e in tree.iter().filter(|e| e.child < n) {
        point_parent[e.child] = e.parent;
        point_lambda[e.child] = e.lambda;
    }
    let is_selected = |c: usize| selected.binary_search(&c).is_ok();
    let single_root = selected == [root];

    (0..n)
        .map(|p| {
            let mut c = point_parent[p];
            let label = loop {
                if is_selected(c) {
                    break Some(c);
                }
                match table.parent[c - n] {
                    Some(up) => c = up,
                    None => break None,
                }
            };
            let label = match label {
                Some(c) if c == root && single_root => {
                    // root as the only cluster keeps just its densest points
                    (point_lambda[p] >= table.death[0]).then_some(c)
                }
                other => other,
            };
            match label {
                None => (None, 0.0),
                Some(c) => {
                    let max_lambda = table.death[c - n];
                    let prob = if max_lambda <= 0.0 {
                        1.0
                    } else {
                        (point_lambda[p].min(max_lambda) / max_lambda).clamp(0.0, 1.0)
                    };
                    (Some(c), prob)
                }
            }
        })
        .collect()
}
