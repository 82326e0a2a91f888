//! Uniform hash grid over 3D points and a union-find over point indices.

use std::collections::HashMap;

use crate::math::Vec3;

/// Disjoint-set forest with path compression and union by rank.
#[derive(Clone, Debug)]
pub struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != root {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.rank[a] < self.rank[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        if self.rank[a] == self.rank[b] {
            self.rank[a] = self.rank[a].saturating_add(1);
        }
        true
    }

    /// Components as sorted index lists, ordered by their smallest index.
    pub fn components(&mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let mut slot: HashMap<usize, usize> = HashMap::new();
        let mut out: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            let r = self.find(i);
            let k = *slot.entry(r).or_insert_with(|| {
                out.push(Vec::new());
                out.len() - 1
            });
            out[k].push(i);
        }
        out
    }
}

type Cell = (i64, i64, i64);

/// Points bucketed into cubic cells of side `cell`.
#[derive(Debug, Clone)]
pub struct SpatialHash {
    cell: f64,
    buckets: HashMap<Cell, Vec<usize>>,
}

impl SpatialHash {
    pub fn new(points: &[Vec3], cell: f64) -> Self {
        assert!(cell > 0.0, "cell size must be positive");
        let mut buckets: HashMap<Cell, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self { cell, buckets }
    }

    fn key(p: &Vec3, cell: f64) -> Cell {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    /// Indices of every point within `radius` of `q` (strictly less), in
    /// ascending index order.
    pub fn within(&self, points: &[Vec3], q: &Vec3, radius: f64) -> Vec<usize> {
        let reach = (radius / self.cell).ceil() as i64;
        let (cx, cy, cz) = Self::key(q, self.cell);
        let r2 = radius * radius;
        let mut out = Vec::new();
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                for dz in -reach..=reach {
                    if let Some(b) = self.buckets.get(&(cx + dx, cy + dy, cz + dz)) {
                        out.extend(b.iter().copied().filter(|&i| (points[i] - q).norm_squared() < r2));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// The `k` nearest points within `radius`, closest first; ties broken
    /// by index.
    pub fn knn_within(&self, points: &[Vec3], q: &Vec3, k: usize, radius: f64) -> Vec<(usize, f64)> {
        let mut cand: Vec<(usize, f64)> = self
            .within(points, q, radius)
            .into_iter()
            .map(|i| (i, (points[i] - q).norm()))
            .collect();
        cand.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        cand.truncate(k);
        cand
    }
}

/// Connected components of the graph with an edge wherever two points are
/// strictly closer than `tau`. Edges come from a hash grid of cell `tau`.
pub fn connected_components(points: &[Vec3], tau: f64) -> Vec<Vec<usize>> {
    let grid = SpatialHash::new(points, tau);
    let mut dsu = DisjointSet::new(points.len());
    for (i, p) in points.iter().enumerate() {
        for j in grid.within(points, p, tau) {
            if j > i {
                dsu.union(i, j);
            }
        }
    }
    dsu.components()
}
