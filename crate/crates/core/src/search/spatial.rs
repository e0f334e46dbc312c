//! Exact neighbor counts and nearest-neighbor queries over a static point set.

use crate::domain::distance;

const LEAF_SIZE: usize = 16;
/// Relative slack on bounding-box tests so that pruning never disagrees with
/// the per-point distance comparison.
const SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
struct Node {
    lo: Vec<f64>,
    hi: Vec<f64>,
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

/// k-d tree with per-node bounding boxes.
#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    coords: Vec<f64>,
    ids: Vec<usize>,
    nodes: Vec<Node>,
    /// Smallest rank per node, when ranks were supplied.
    min_rank: Vec<usize>,
}

impl KdTree {
    pub fn new<P: AsRef<[f64]>>(points: &[P]) -> Self {
        let dim = points.first().map_or(0, |p| p.as_ref().len());
        let mut ids: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        if !points.is_empty() {
            build(points, &mut ids, 0, points.len(), dim, &mut nodes);
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for &i in &ids {
            coords.extend_from_slice(points[i].as_ref());
        }
        Self {
            dim,
            coords,
            ids,
            nodes,
            min_rank: Vec::new(),
        }
    }

    /// Tree whose points carry a rank, for [`KdTree::nearest_ranked_below`].
    pub fn with_ranks<P: AsRef<[f64]>>(points: &[P], ranks: &[usize]) -> Self {
        let mut tree = Self::new(points);
        tree.min_rank = tree
            .nodes
            .iter()
            .map(|n| tree.ids[n.start..n.end].iter().map(|&i| ranks[i]).min().unwrap_or(usize::MAX))
            .collect();
        tree
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn point(&self, slot: usize) -> &[f64] {
        &self.coords[slot * self.dim..(slot + 1) * self.dim]
    }

    /// Number of points `p` with `distance(c, p) < r`.
    pub fn count_within(&self, c: &[f64], r: f64) -> usize {
        if self.is_empty() || r <= 0.0 {
            return 0;
        }
        if r == f64::INFINITY {
            return self.len();
        }
        let r2 = r * r;
        let mut count = 0;
        let mut stack = vec![0usize];
        while let Some(k) = stack.pop() {
            let node = &self.nodes[k];
            let (near, far) = box_distances(c, &node.lo, &node.hi);
            if near > r2 * (1.0 + SLACK) {
                continue;
            }
            if far < r2 * (1.0 - SLACK) {
                count += node.end - node.start;
                continue;
            }
            match node.children {
                Some((a, b)) => {
                    stack.push(a);
                    stack.push(b);
                }
                None => {
                    count += (node.start..node.end)
                        .filter(|&s| distance(c, self.point(s)) < r)
                        .count();
                }
            }
        }
        count
    }

    /// Smallest `distance(c, p)` over points whose index satisfies `accept`;
    /// `+inf` when none does.
    pub fn nearest_where(&self, c: &[f64], accept: impl Fn(usize) -> bool) -> f64 {
        let mut best = f64::INFINITY;
        if !self.is_empty() {
            self.nearest_rec(0, c, &accept, &|_| true, &mut best);
        }
        best
    }

    /// Smallest distance to a point whose rank is below `rank`. Needs a tree
    /// built with [`KdTree::with_ranks`].
    pub fn nearest_ranked_below(&self, c: &[f64], ranks: &[usize], rank: usize) -> f64 {
        assert_eq!(self.min_rank.len(), self.nodes.len(), "tree built without ranks");
        let mut best = f64::INFINITY;
        if !self.is_empty() {
            self.nearest_rec(0, c, &|i| ranks[i] < rank, &|k| self.min_rank[k] < rank, &mut best);
        }
        best
    }

    fn nearest_rec(
        &self,
        k: usize,
        c: &[f64],
        accept: &impl Fn(usize) -> bool,
        node_ok: &impl Fn(usize) -> bool,
        best: &mut f64,
    ) {
        if !node_ok(k) {
            return;
        }
        let node = &self.nodes[k];
        match node.children {
            None => {
                for s in node.start..node.end {
                    if accept(self.ids[s]) {
                        let d = distance(c, self.point(s));
                        if d < *best {
                            *best = d;
                        }
                    }
                }
            }
            Some((a, b)) => {
                let da = box_distances(c, &self.nodes[a].lo, &self.nodes[a].hi).0;
                let db = box_distances(c, &self.nodes[b].lo, &self.nodes[b].hi).0;
                let order = if da <= db { [(a, da), (b, db)] } else { [(b, db), (a, da)] };
                for (child, near) in order {
                    if near <= *best * *best * (1.0 + SLACK) {
                        self.nearest_rec(child, c, accept, node_ok, best);
                    }
                }
            }
        }
    }
}

fn box_distances(c: &[f64], lo: &[f64], hi: &[f64]) -> (f64, f64) {
    let mut near = 0.0;
    let mut far = 0.0;
    for ((&x, &l), &h) in c.iter().zip(lo).zip(hi) {
        let below = l - x;
        let above = x - h;
        let gap = below.max(above).max(0.0);
        near += gap * gap;
        let reach = (x - l).abs().max((h - x).abs());
        far += reach * reach;
    }
    (near, far)
}

fn build<P: AsRef<[f64]>>(
    points: &[P],
    ids: &mut [usize],
    start: usize,
    end: usize,
    dim: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for &i in &ids[start..end] {
        for (j, &v) in points[i].as_ref().iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    let k = nodes.len();
    nodes.push(Node {
        lo: lo.clone(),
        hi: hi.clone(),
        start,
        end,
        children: None,
    });
    if end - start <= LEAF_SIZE {
        return k;
    }
    let axis = (0..dim)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0);
    if hi[axis] <= lo[axis] {
        return k;
    }
    let mid = start + (end - start) / 2;
    ids[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        points[a].as_ref()[axis].total_cmp(&points[b].as_ref()[axis])
    });
    let left = build(points, ids, start, mid, dim, nodes);
    let right = build(points, ids, mid, end, dim, nodes);
    nodes[k].children = Some((left, right));
    k
}
