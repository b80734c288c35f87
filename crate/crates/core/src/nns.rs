//! Exact nearest-neighbour search in the embedded phase space.
//!
//! [`KdTree`] splits at the median of the axis with the largest spread and
//! stores at most `leaf_capacity` points per leaf. Queries are exact: the
//! returned index attains the global minimum squared Euclidean distance and
//! ties are resolved towards the lowest point index, so results coincide
//! bit-for-bit with [`brute_force_query`].
//!
//! The tree is built in the principal-axis frame of the point set (an
//! orthogonal change of coordinates, so distances are unchanged). Material
//! data typically fill a low-dimensional, tilted subset of the embedded
//! space — a linear law is a plane at 45° to the coordinate axes — and in
//! the principal frame that subset is axis-aligned, so the cell bounds see
//! the full off-manifold distance of a query.
//!
//! Pruning compares the squared distance from the query to the far cell
//! (per-axis offsets, initialised from the bounding box of the whole set)
//! against the current best plus a rounding allowance that covers the
//! change of frame. Candidate distances are always evaluated in the original
//! coordinates with the same arithmetic as the linear scan, which keeps the
//! returned index and distance identical to [`brute_force_query`].

use alloc::vec::Vec;

use crate::phase::MAX_EMBED;
use crate::{Error, Result};

/// Default number of points per leaf.
pub const DEFAULT_LEAF_CAPACITY: usize = 10;

/// Which search algorithm answers queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SearchBackend {
    /// k-d tree (default).
    #[default]
    KdTree,
    /// Exhaustive linear scan.
    BruteForce,
}

/// Result of a nearest-neighbour query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// Index of the nearest point.
    pub index: usize,
    /// Squared Euclidean distance to it.
    pub dist_sq: f64,
}

#[inline]
fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let t = a[i] - b[i];
        s += t * t;
    }
    s
}

#[inline]
fn better(d: f64, idx: usize, best: &Neighbor) -> bool {
    d < best.dist_sq || (d == best.dist_sq && idx < best.index)
}

fn check_points(points: &[f64], k: usize) -> Result<usize> {
    if k == 0 || k > MAX_EMBED {
        return Err(Error::shape(alloc::format!("point width must be in 1..={MAX_EMBED}, got {k}")));
    }
    if points.len() % k != 0 {
        return Err(Error::shape("point buffer length is not a multiple of the width"));
    }
    let n = points.len() / k;
    if n == 0 {
        return Err(Error::Empty("point set"));
    }
    if !crate::math::all_finite(points) {
        return Err(Error::NonFinite("point coordinates"));
    }
    Ok(n)
}

fn check_query(q: &[f64], k: usize) -> Result<()> {
    if q.len() != k {
        return Err(Error::shape(alloc::format!("query has {} coordinates, expected {k}", q.len())));
    }
    if !crate::math::all_finite(q) {
        return Err(Error::NonFinite("query"));
    }
    Ok(())
}

/// Exhaustive scan over `points` (row-major, width `k`), lowest index on ties.
pub fn brute_force_query(points: &[f64], k: usize, q: &[f64]) -> Result<Neighbor> {
    check_points(points, k)?;
    check_query(q, k)?;
    Ok(brute_force_unchecked(points, k, q))
}

fn brute_force_unchecked(points: &[f64], k: usize, q: &[f64]) -> Neighbor {
    let mut best = Neighbor { index: usize::MAX, dist_sq: f64::INFINITY };
    for (i, p) in points.chunks_exact(k).enumerate() {
        let d = dist_sq(q, p);
        if d < best.dist_sq {
            best = Neighbor { index: i, dist_sq: d };
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Node {
    Leaf { start: u32, end: u32 },
    Inner { axis: u32, split: f64, left: u32, right: u32 },
}

/// Eigenvectors of a symmetric `k × k` matrix (cyclic Jacobi), returned as
/// rows sorted by decreasing eigenvalue (lower index first on ties).
fn principal_axes(mut a: [[f64; MAX_EMBED]; MAX_EMBED], k: usize) -> [[f64; MAX_EMBED]; MAX_EMBED] {
    let mut v = [[0.0; MAX_EMBED]; MAX_EMBED];
    for (i, row) in v.iter_mut().enumerate().take(k) {
        row[i] = 1.0;
    }
    let norm: f64 = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
    for _sweep in 0..64 {
        let off: f64 = (0..k).flat_map(|i| (0..i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off <= 1e-30 * norm || off == 0.0 {
            break;
        }
        for p in 0..k {
            for q in p + 1..k {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + crate::math::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / crate::math::sqrt(t * t + 1.0);
                let s = t * c;
                for r in 0..k {
                    let (arp, arq) = (a[r][p], a[r][q]);
                    a[r][p] = c * arp - s * arq;
                    a[r][q] = s * arp + c * arq;
                }
                for r in 0..k {
                    let (apr, aqr) = (a[p][r], a[q][r]);
                    a[p][r] = c * apr - s * aqr;
                    a[q][r] = s * apr + c * aqr;
                }
                for row in v.iter_mut().take(k) {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]).then(i.cmp(&j)));
    let mut axes = [[0.0; MAX_EMBED]; MAX_EMBED];
    for (r, &i) in order.iter().enumerate() {
        for c in 0..k {
            axes[r][c] = v[c][i];
        }
    }
    axes
}

/// Orthogonal frame `y = R (x − m)` in which a tree is built.
#[derive(Debug, Clone, PartialEq)]
struct Frame {
    mean: [f64; MAX_EMBED],
    axes: [[f64; MAX_EMBED]; MAX_EMBED],
}

impl Frame {
    fn principal(points: &[f64], k: usize) -> Self {
        let n = (points.len() / k) as f64;
        let mut mean = [0.0; MAX_EMBED];
        for p in points.chunks_exact(k) {
            for a in 0..k {
                mean[a] += p[a];
            }
        }
        for m in mean.iter_mut().take(k) {
            *m /= n;
        }
        let mut cov = [[0.0; MAX_EMBED]; MAX_EMBED];
        for p in points.chunks_exact(k) {
            for i in 0..k {
                let di = p[i] - mean[i];
                for j in 0..=i {
                    cov[i][j] += di * (p[j] - mean[j]);
                }
            }
        }
        for i in 0..k {
            for j in 0..i {
                cov[j][i] = cov[i][j];
            }
        }
        Frame { mean, axes: principal_axes(cov, k) }
    }

    #[inline]
    fn apply(&self, x: &[f64], out: &mut [f64; MAX_EMBED]) -> f64 {
        let k = x.len();
        let mut d = [0.0; MAX_EMBED];
        let mut norm = 0.0;
        for a in 0..k {
            d[a] = x[a] - self.mean[a];
            norm += d[a] * d[a];
        }
        for (r, o) in out.iter_mut().enumerate().take(k) {
            *o = dot_k(&self.axes[r], &d, k);
        }
        norm
    }
}

#[inline]
fn dot_k(a: &[f64; MAX_EMBED], b: &[f64; MAX_EMBED], k: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..k {
        s += a[i] * b[i];
    }
    s
}

/// Relative rounding allowance of cell bounds computed in the rotated frame.
const FRAME_SLACK: f64 = 1e-10;

/// Static k-d tree over a fixed point set.
#[derive(Debug, Clone, PartialEq)]
pub struct KdTree {
    k: usize,
    capacity: usize,
    nodes: Vec<Node>,
    /// Point indices in leaf order.
    perm: Vec<u32>,
    /// Principal-frame coordinates in leaf order (row-major, width `k`).
    coords: Vec<f64>,
    /// Original coordinates in leaf order (used for candidate distances).
    original: Vec<f64>,
    frame: Frame,
    /// Bounding box of the set in the principal frame.
    lo: [f64; MAX_EMBED],
    hi: [f64; MAX_EMBED],
    /// Largest squared distance of a point from the frame origin.
    radius_sq: f64,
}

impl KdTree {
    /// Builds a tree over `points` (row-major, width `k`).
    pub fn build(points: &[f64], k: usize, leaf_capacity: usize) -> Result<Self> {
        let n = check_points(points, k)?;
        if leaf_capacity == 0 {
            return Err(Error::invalid("leaf capacity must be positive"));
        }
        if n > u32::MAX as usize {
            return Err(Error::invalid("too many points for a k-d tree"));
        }
        let frame = Frame::principal(points, k);
        let mut rotated = Vec::with_capacity(n * k);
        let mut lo = [f64::INFINITY; MAX_EMBED];
        let mut hi = [f64::NEG_INFINITY; MAX_EMBED];
        let mut radius_sq: f64 = 0.0;
        let mut y = [0.0; MAX_EMBED];
        for p in points.chunks_exact(k) {
            radius_sq = radius_sq.max(frame.apply(p, &mut y));
            for a in 0..k {
                lo[a] = lo[a].min(y[a]);
                hi[a] = hi[a].max(y[a]);
            }
            rotated.extend_from_slice(&y[..k]);
        }
        let mut idx: Vec<u32> = (0..n as u32).collect();
        let mut nodes = Vec::with_capacity(2 * n / leaf_capacity + 1);
        Self::build_rec(&rotated, k, leaf_capacity, &mut idx, 0, &mut nodes);
        let mut coords = Vec::with_capacity(n * k);
        let mut original = Vec::with_capacity(n * k);
        for &i in &idx {
            let r = i as usize * k..(i as usize + 1) * k;
            coords.extend_from_slice(&rotated[r.clone()]);
            original.extend_from_slice(&points[r]);
        }
        Ok(KdTree { k, capacity: leaf_capacity, nodes, perm: idx, coords, original, frame, lo, hi, radius_sq })
    }

    fn build_rec(points: &[f64], k: usize, cap: usize, idx: &mut [u32], offset: usize, nodes: &mut Vec<Node>) -> u32 {
        let me = nodes.len() as u32;
        let n = idx.len();
        if n <= cap {
            nodes.push(Node::Leaf { start: offset as u32, end: (offset + n) as u32 });
            return me;
        }
        // axis of maximum spread (lowest axis on ties)
        let mut lo = [f64::INFINITY; MAX_EMBED];
        let mut hi = [f64::NEG_INFINITY; MAX_EMBED];
        for &i in idx.iter() {
            let p = &points[i as usize * k..(i as usize + 1) * k];
            for a in 0..k {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let mut axis = 0;
        for a in 1..k {
            if hi[a] - lo[a] > hi[axis] - lo[axis] {
                axis = a;
            }
        }
        let mid = n / 2;
        let key = |i: &u32| (points[*i as usize * k + axis], *i);
        idx.select_nth_unstable_by(mid, |a, b| {
            let (ka, kb) = (key(a), key(b));
            ka.0.total_cmp(&kb.0).then(ka.1.cmp(&kb.1))
        });
        let split = points[idx[mid] as usize * k + axis];
        nodes.push(Node::Leaf { start: 0, end: 0 }); // placeholder
        let (l, r) = idx.split_at_mut(mid);
        let left = Self::build_rec(points, k, cap, l, offset, nodes);
        let right = Self::build_rec(points, k, cap, r, offset + mid, nodes);
        nodes[me as usize] = Node::Inner { axis: axis as u32, split, left, right };
        me
    }

    /// Point width.
    pub fn width(&self) -> usize {
        self.k
    }

    /// Number of indexed points.
    pub fn len(&self) -> usize {
        self.perm.len()
    }

    /// Always `false` (trees are built from non-empty sets).
    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Leaf capacity used at build time.
    pub fn leaf_capacity(&self) -> usize {
        self.capacity
    }

    /// Maximum root-to-leaf depth (a single leaf has depth 1).
    pub fn depth(&self) -> usize {
        fn rec(nodes: &[Node], i: u32) -> usize {
            match nodes[i as usize] {
                Node::Leaf { .. } => 1,
                Node::Inner { left, right, .. } => 1 + rec(nodes, left).max(rec(nodes, right)),
            }
        }
        rec(&self.nodes, 0)
    }

    /// Point indices of every leaf, in tree order.
    pub fn leaves(&self) -> Vec<Vec<usize>> {
        self.nodes
            .iter()
            .filter_map(|n| match *n {
                Node::Leaf { start, end } => {
                    Some(self.perm[start as usize..end as usize].iter().map(|&i| i as usize).collect())
                }
                Node::Inner { .. } => None,
            })
            .collect()
    }

    /// Checks the ordering invariant at every interior node.
    pub fn check_invariants(&self) -> bool {
        fn collect(t: &KdTree, i: u32, out: &mut Vec<usize>) {
            match t.nodes[i as usize] {
                Node::Leaf { start, end } => out.extend(start as usize..end as usize),
                Node::Inner { left, right, .. } => {
                    collect(t, left, out);
                    collect(t, right, out);
                }
            }
        }
        for node in &self.nodes {
            if let Node::Inner { axis, split, left, right } = *node {
                let (mut l, mut r) = (Vec::new(), Vec::new());
                collect(self, left, &mut l);
                collect(self, right, &mut r);
                let c = |slot: usize| self.coords[slot * self.k + axis as usize];
                if l.iter().any(|&s| c(s) > split) || r.iter().any(|&s| c(s) < split) {
                    return false;
                }
            }
        }
        let mut seen: Vec<u32> = self.perm.clone();
        seen.sort_unstable();
        seen.iter().enumerate().all(|(i, &p)| p as usize == i)
    }

    /// Exact nearest neighbour of `q`.
    pub fn query(&self, q: &[f64]) -> Result<Neighbor> {
        check_query(q, self.k)?;
        Ok(self.run(q, Neighbor { index: usize::MAX, dist_sq: f64::INFINITY }))
    }

    /// Exact nearest neighbour, seeded with a candidate (typically the
    /// previous assignment). The result is identical to [`KdTree::query`];
    /// a good seed only speeds up pruning.
    pub fn query_with_seed(&self, q: &[f64], seed: Neighbor) -> Result<Neighbor> {
        check_query(q, self.k)?;
        Ok(self.run(q, seed))
    }

    fn run(&self, q: &[f64], mut best: Neighbor) -> Neighbor {
        let k = self.k;
        let mut y = [0.0; MAX_EMBED];
        let qn = self.frame.apply(q, &mut y);
        let scale = crate::math::sqrt(qn) + crate::math::sqrt(self.radius_sq);
        let slack = FRAME_SLACK * scale * scale;
        let mut off = [0.0; MAX_EMBED];
        for a in 0..k {
            off[a] = if y[a] < self.lo[a] {
                y[a] - self.lo[a]
            } else if y[a] > self.hi[a] {
                y[a] - self.hi[a]
            } else {
                0.0
            };
        }
        self.search(0, q, &y, &mut off, slack, &mut best);
        best
    }

    fn search(
        &self,
        node: u32,
        q: &[f64],
        y: &[f64; MAX_EMBED],
        off: &mut [f64; MAX_EMBED],
        slack: f64,
        best: &mut Neighbor,
    ) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                let k = self.k;
                for slot in start as usize..end as usize {
                    let d = dist_sq(q, &self.original[slot * k..(slot + 1) * k]);
                    let idx = self.perm[slot] as usize;
                    if better(d, idx, best) {
                        *best = Neighbor { index: idx, dist_sq: d };
                    }
                }
            }
            Node::Inner { axis, split, left, right } => {
                let a = axis as usize;
                let diff = y[a] - split;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, y, off, slack, best);
                let saved = off[a];
                off[a] = diff;
                let mut rd = 0.0;
                for &o in &off[..self.k] {
                    rd += o * o;
                }
                if rd <= best.dist_sq + slack {
                    self.search(far, q, y, off, slack, best);
                }
                off[a] = saved;
            }
        }
    }
}

/// A searchable point set answering queries with the chosen backend.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchIndex {
    k: usize,
    points: Vec<f64>,
    tree: Option<KdTree>,
}

impl SearchIndex {
    /// Indexes `points` (row-major, width `k`) for the given backend.
    pub fn build(points: Vec<f64>, k: usize, backend: SearchBackend, leaf_capacity: usize) -> Result<Self> {
        check_points(&points, k)?;
        let tree = match backend {
            SearchBackend::KdTree => Some(KdTree::build(&points, k, leaf_capacity)?),
            SearchBackend::BruteForce => None,
        };
        Ok(SearchIndex { k, points, tree })
    }

    /// Active backend.
    pub fn backend(&self) -> SearchBackend {
        if self.tree.is_some() {
            SearchBackend::KdTree
        } else {
            SearchBackend::BruteForce
        }
    }

    /// Point width.
    pub fn width(&self) -> usize {
        self.k
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.points.len() / self.k
    }

    /// `true` for an empty set (never produced by [`SearchIndex::build`]).
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Coordinates of point `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.k..(i + 1) * self.k]
    }

    /// All coordinates (row-major).
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// The k-d tree, when that backend is active.
    pub fn tree(&self) -> Option<&KdTree> {
        self.tree.as_ref()
    }

    /// Exact nearest neighbour.
    pub fn query(&self, q: &[f64]) -> Result<Neighbor> {
        match &self.tree {
            Some(t) => t.query(q),
            None => {
                check_query(q, self.k)?;
                Ok(brute_force_unchecked(&self.points, self.k, q))
            }
        }
    }

    /// Exact nearest neighbour using point `hint` as an initial candidate.
    pub fn query_hinted(&self, q: &[f64], hint: Option<usize>) -> Result<Neighbor> {
        match (&self.tree, hint) {
            (Some(t), Some(h)) if h < self.len() => {
                check_query(q, self.k)?;
                let seed = Neighbor { index: h, dist_sq: dist_sq(q, self.point(h)) };
                t.query_with_seed(q, seed)
            }
            _ => self.query(q),
        }
    }

    /// Exhaustive answer regardless of backend (verification oracle).
    pub fn query_brute_force(&self, q: &[f64]) -> Result<Neighbor> {
        check_query(q, self.k)?;
        Ok(brute_force_unchecked(&self.points, self.k, q))
    }
}
