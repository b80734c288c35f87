use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::quadrature::QuadRule;
use super::shape::shape_eval;
use crate::tensor::Dim;
use crate::{Error, Result};

/// Element type; fixed by the spatial dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    /// Four-node bilinear quadrilateral.
    Quad4,
    /// Eight-node trilinear hexahedron.
    Hex8,
}

impl ElementKind {
    /// Element type for a spatial dimension.
    pub fn for_dim(dim: Dim) -> Self {
        match dim {
            Dim::Two => ElementKind::Quad4,
            Dim::Three => ElementKind::Hex8,
        }
    }

    /// Nodes per element.
    pub fn nodes(self) -> usize {
        match self {
            ElementKind::Quad4 => 4,
            ElementKind::Hex8 => 8,
        }
    }

    /// Faces per element.
    pub fn faces(self) -> usize {
        match self {
            ElementKind::Quad4 => 4,
            ElementKind::Hex8 => 6,
        }
    }

    /// Nodes per face.
    pub fn face_nodes(self) -> usize {
        match self {
            ElementKind::Quad4 => 2,
            ElementKind::Hex8 => 4,
        }
    }

    /// Local node numbers of face `f`.
    ///
    /// Quadrilateral edges: 0 `η=−1`, 1 `ξ=+1`, 2 `η=+1`, 3 `ξ=−1`.
    /// Hexahedron faces: 0 `ζ=−1`, 1 `ζ=+1`, 2 `η=−1`, 3 `ξ=+1`, 4 `η=+1`, 5 `ξ=−1`.
    pub fn face_local(self, f: usize) -> &'static [usize] {
        const Q: [[usize; 2]; 4] = [[0, 1], [1, 2], [2, 3], [3, 0]];
        const H: [[usize; 4]; 6] = [[0, 3, 2, 1], [4, 5, 6, 7], [0, 1, 5, 4], [1, 2, 6, 5], [2, 3, 7, 6], [3, 0, 4, 7]];
        match self {
            ElementKind::Quad4 => &Q[f],
            ElementKind::Hex8 => &H[f],
        }
    }
}

/// A boundary facet: face `local` of element `element`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Face {
    /// Owning element.
    pub element: usize,
    /// Local face number (see [`ElementKind::face_local`]).
    pub local: usize,
}

/// Quadrilateral or hexahedral mesh with named node and face sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: Dim,
    kind: ElementKind,
    nodes: Vec<[f64; 3]>,
    elements: Vec<[usize; 8]>,
    node_sets: BTreeMap<String, Vec<usize>>,
    face_sets: BTreeMap<String, Vec<Face>>,
}

impl Mesh {
    /// Builds and validates a mesh. Only the first 4 (2-D) or 8 (3-D)
    /// connectivity entries are used; `z` is ignored in 2-D.
    pub fn new(dim: Dim, nodes: Vec<[f64; 3]>, elements: Vec<[usize; 8]>) -> Result<Self> {
        let kind = ElementKind::for_dim(dim);
        if elements.is_empty() {
            return Err(Error::Empty("mesh elements"));
        }
        for (e, conn) in elements.iter().enumerate() {
            if conn[..kind.nodes()].iter().any(|&n| n >= nodes.len()) {
                return Err(Error::Problem(alloc::format!("element {e} references a missing node")));
            }
        }
        if nodes.iter().any(|x| !crate::math::all_finite(x)) {
            return Err(Error::NonFinite("node coordinates"));
        }
        let mesh = Mesh { dim, kind, nodes, elements, node_sets: BTreeMap::new(), face_sets: BTreeMap::new() };
        let rule = QuadRule::gauss(dim, 2);
        for e in 0..mesh.num_elements() {
            for p in rule.points() {
                shape_eval(&mesh, e, p)?;
            }
        }
        Ok(mesh)
    }

    /// Adds (or replaces) a named node set.
    pub fn add_node_set(&mut self, name: &str, mut nodes: Vec<usize>) -> Result<()> {
        if nodes.iter().any(|&n| n >= self.nodes.len()) {
            return Err(Error::Problem(alloc::format!("node set '{name}' references a missing node")));
        }
        nodes.sort_unstable();
        nodes.dedup();
        self.node_sets.insert(name.into(), nodes);
        Ok(())
    }

    /// Adds (or replaces) a named face set.
    pub fn add_face_set(&mut self, name: &str, mut faces: Vec<Face>) -> Result<()> {
        if faces.iter().any(|f| f.element >= self.elements.len() || f.local >= self.kind.faces()) {
            return Err(Error::Problem(alloc::format!("face set '{name}' references a missing face")));
        }
        faces.sort_unstable();
        faces.dedup();
        self.face_sets.insert(name.into(), faces);
        Ok(())
    }

    /// Adds a face set together with the node set of its nodes (same name).
    pub fn add_boundary(&mut self, name: &str, faces: Vec<Face>) -> Result<()> {
        let mut nodes: Vec<usize> = faces.iter().flat_map(|f| self.face_nodes(*f)).collect();
        nodes.sort_unstable();
        nodes.dedup();
        self.add_face_set(name, faces)?;
        self.add_node_set(name, nodes)
    }

    /// Adds every boundary face whose centroid satisfies `pred` as a boundary set.
    pub fn tag_boundary(&mut self, name: &str, pred: impl Fn(&[f64; 3]) -> bool) -> Result<()> {
        let faces: Vec<Face> = self.boundary_faces().into_iter().filter(|f| pred(&self.face_centroid(*f))).collect();
        self.add_boundary(name, faces)
    }

    /// Spatial dimension.
    pub fn dim(&self) -> Dim {
        self.dim
    }
    /// Element type.
    pub fn kind(&self) -> ElementKind {
        self.kind
    }
    /// Nodes per element.
    pub fn nodes_per_element(&self) -> usize {
        self.kind.nodes()
    }
    /// Number of nodes.
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }
    /// Number of elements.
    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }
    /// Node coordinates.
    pub fn node(&self, i: usize) -> &[f64; 3] {
        &self.nodes[i]
    }
    /// All node coordinates.
    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }
    /// Connectivity of element `e`.
    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e][..self.kind.nodes()]
    }
    /// Named node set.
    pub fn node_set(&self, name: &str) -> Result<&[usize]> {
        self.node_sets
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Problem(alloc::format!("unknown node set '{name}'")))
    }
    /// Named face set.
    pub fn face_set(&self, name: &str) -> Result<&[Face]> {
        self.face_sets
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Problem(alloc::format!("unknown face set '{name}'")))
    }
    /// Names of all node sets.
    pub fn node_set_names(&self) -> impl Iterator<Item = &str> {
        self.node_sets.keys().map(String::as_str)
    }
    /// Names of all face sets.
    pub fn face_set_names(&self) -> impl Iterator<Item = &str> {
        self.face_sets.keys().map(String::as_str)
    }

    /// Global node numbers of a face.
    pub fn face_nodes(&self, f: Face) -> Vec<usize> {
        let conn = self.element(f.element);
        self.kind.face_local(f.local).iter().map(|&l| conn[l]).collect()
    }

    /// Centroid of a face.
    pub fn face_centroid(&self, f: Face) -> [f64; 3] {
        let nodes = self.face_nodes(f);
        let mut c = [0.0; 3];
        for &n in &nodes {
            for (ci, xi) in c.iter_mut().zip(self.nodes[n]) {
                *ci += xi / nodes.len() as f64;
            }
        }
        c
    }

    /// Centroid of an element.
    pub fn element_centroid(&self, e: usize) -> [f64; 3] {
        let conn = self.element(e);
        let mut c = [0.0; 3];
        for &n in conn {
            for (ci, xi) in c.iter_mut().zip(self.nodes[n]) {
                *ci += xi / conn.len() as f64;
            }
        }
        c
    }

    /// Faces that belong to exactly one element.
    pub fn boundary_faces(&self) -> Vec<Face> {
        let mut keyed: Vec<(Vec<usize>, Face)> = Vec::new();
        for e in 0..self.num_elements() {
            for l in 0..self.kind.faces() {
                let f = Face { element: e, local: l };
                let mut key = self.face_nodes(f);
                key.sort_unstable();
                keyed.push((key, f));
            }
        }
        keyed.sort();
        let mut out = Vec::new();
        let mut i = 0;
        while i < keyed.len() {
            let mut j = i + 1;
            while j < keyed.len() && keyed[j].0 == keyed[i].0 {
                j += 1;
            }
            if j - i == 1 {
                out.push(keyed[i].1);
            }
            i = j;
        }
        out.sort_unstable();
        out
    }

    /// Node-to-node adjacency through shared elements (sorted, without self).
    pub fn node_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = alloc::vec![Vec::new(); self.num_nodes()];
        for e in 0..self.num_elements() {
            let conn = self.element(e);
            for &a in conn {
                for &b in conn {
                    if a != b {
                        adj[a].push(b);
                    }
                }
            }
        }
        for l in &mut adj {
            l.sort_unstable();
            l.dedup();
        }
        adj
    }

    /// Index of the node closest to `x`.
    pub fn nearest_node(&self, x: &[f64; 3]) -> usize {
        let d = |n: &[f64; 3]| (0..3).map(|i| (n[i] - x[i]) * (n[i] - x[i])).sum::<f64>();
        (0..self.num_nodes()).min_by(|&a, &b| d(&self.nodes[a]).total_cmp(&d(&self.nodes[b]))).unwrap_or(0)
    }
}
