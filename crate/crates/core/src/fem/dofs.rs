use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::mesh::Mesh;
use crate::tensor::Dim;
use crate::{Error, Result};

/// Nodal fields of the discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Field {
    /// Displacement `u` (`d` components, m).
    Displacement,
    /// Pore pressure `p` (Pa).
    Pressure,
    /// Momentum multiplier `β^mom` (`d` components).
    MomentumMultiplier,
    /// Mass multiplier `β^mass`.
    MassMultiplier,
}

/// Which fields are carried per node, in node-block order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldLayout {
    /// `[u, p, β^mom, β^mass]` — data-driven and hybrid formulations.
    DataDriven,
    /// `[u, p]` — model-based reference formulation.
    ModelBased,
    /// `[p, β^mass]` — scalar diffusion with a data-driven flux law.
    Poisson,
}

impl FieldLayout {
    /// Fields in node-block order.
    pub fn fields(self) -> &'static [Field] {
        use Field::*;
        match self {
            FieldLayout::DataDriven => &[Displacement, Pressure, MomentumMultiplier, MassMultiplier],
            FieldLayout::ModelBased => &[Displacement, Pressure],
            FieldLayout::Poisson => &[Pressure, MassMultiplier],
        }
    }

    /// Components of a field.
    pub fn components(field: Field, dim: Dim) -> usize {
        match field {
            Field::Displacement | Field::MomentumMultiplier => dim.d(),
            Field::Pressure | Field::MassMultiplier => 1,
        }
    }

    /// Degrees of freedom per node.
    pub fn dofs_per_node(self, dim: Dim) -> usize {
        self.fields().iter().map(|&f| Self::components(f, dim)).sum()
    }

    /// Offset of `field` within the node block, if present.
    pub fn offset(self, field: Field, dim: Dim) -> Option<usize> {
        let mut off = 0;
        for &f in self.fields() {
            if f == field {
                return Some(off);
            }
            off += Self::components(f, dim);
        }
        None
    }

    /// Whether the layout carries the field.
    pub fn has(self, field: Field) -> bool {
        self.fields().contains(&field)
    }
}

/// Time dependence of a prescribed value.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum TimeFunction {
    /// `v(t) = value`.
    Constant {
        /// Prescribed value.
        value: f64,
    },
    /// `v(t) = rate · t`.
    Linear {
        /// Rate of change.
        rate: f64,
    },
    /// `v(t) = rate · min(t, until)`: linear ramp then hold.
    RampHold {
        /// Rate during the ramp.
        rate: f64,
        /// End of the ramp.
        until: f64,
    },
}

impl TimeFunction {
    /// Homogeneous value.
    pub const ZERO: TimeFunction = TimeFunction::Constant { value: 0.0 };

    /// Value at time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeFunction::Constant { value } => value,
            TimeFunction::Linear { rate } => rate * t,
            TimeFunction::RampHold { rate, until } => rate * if t < until { t } else { until },
        }
    }
}

/// Spatial shape multiplying a prescribed value history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Profile {
    /// Factor 1 everywhere.
    #[default]
    Uniform,
    /// Factor `|x|²` (squared distance from the origin).
    SquaredDistance,
}

impl Profile {
    /// Factor at position `x`.
    pub fn factor(self, x: &[f64; 3]) -> f64 {
        match self {
            Profile::Uniform => 1.0,
            Profile::SquaredDistance => x[0] * x[0] + x[1] * x[1] + x[2] * x[2],
        }
    }
}

/// Dirichlet condition on one component of a field over a named node set.
/// The prescribed value at node position `x` and time `t` is
/// `value(t) · profile(x)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DirichletBc {
    /// Node-set name.
    pub set: String,
    /// Constrained field.
    pub field: Field,
    /// Component (0 for scalars).
    pub comp: usize,
    /// Prescribed value history.
    pub value: TimeFunction,
    /// Spatial shape.
    #[cfg_attr(feature = "serde", serde(default))]
    pub profile: Profile,
}

impl DirichletBc {
    /// Convenience constructor (uniform profile).
    pub fn new(set: &str, field: Field, comp: usize, value: TimeFunction) -> Self {
        DirichletBc { set: set.into(), field, comp, value, profile: Profile::Uniform }
    }

    /// Returns the condition with a spatial profile.
    pub fn with_profile(mut self, profile: Profile) -> Self {
        self.profile = profile;
        self
    }

    /// Homogeneous condition.
    pub fn zero(set: &str, field: Field, comp: usize) -> Self {
        Self::new(set, field, comp, TimeFunction::ZERO)
    }
}

const CONSTRAINED: usize = usize::MAX;

/// Global degree-of-freedom numbering.
///
/// Global dof `g = node · dofs_per_node + offset`. Free dofs receive equation
/// numbers following a reverse Cuthill–McKee node order so that the system
/// matrix is narrowly banded. Displacement (pressure) constraints on
/// data-driven layouts automatically add homogeneous constraints on the
/// momentum (mass) multiplier at the same nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    dim: Dim,
    layout: FieldLayout,
    per_node: usize,
    num_nodes: usize,
    equation: Vec<usize>,
    constrained: Vec<(usize, TimeFunction, f64)>,
    node_order: Vec<usize>,
    num_free: usize,
}

impl DofMap {
    /// Builds the map for `mesh` under the given Dirichlet conditions.
    pub fn new(mesh: &Mesh, layout: FieldLayout, bcs: &[DirichletBc]) -> Result<Self> {
        let dim = mesh.dim();
        let per_node = layout.dofs_per_node(dim);
        let num_nodes = mesh.num_nodes();
        let mut fixed: Vec<Option<(TimeFunction, f64)>> = vec![None; num_nodes * per_node];
        let mut constrain = |g: usize, v: (TimeFunction, f64), what: &dyn core::fmt::Display| -> Result<()> {
            match fixed[g] {
                Some(old) if old != v => {
                    Err(Error::Problem(alloc::format!("conflicting Dirichlet values for {what} at global dof {g}")))
                }
                _ => {
                    fixed[g] = Some(v);
                    Ok(())
                }
            }
        };
        for bc in bcs {
            let off = layout
                .offset(bc.field, dim)
                .ok_or_else(|| Error::Problem(alloc::format!("field {:?} not present in layout", bc.field)))?;
            if bc.comp >= FieldLayout::components(bc.field, dim) {
                return Err(Error::Problem(alloc::format!("component {} out of range for {:?}", bc.comp, bc.field)));
            }
            let partner = match bc.field {
                Field::Displacement => layout.offset(Field::MomentumMultiplier, dim).map(|o| o + bc.comp),
                Field::Pressure => layout.offset(Field::MassMultiplier, dim),
                _ => None,
            };
            for &n in mesh.node_set(&bc.set)? {
                let factor = bc.profile.factor(mesh.node(n));
                constrain(n * per_node + off + bc.comp, (bc.value, factor), &bc.set)?;
                if let Some(po) = partner {
                    constrain(n * per_node + po, (TimeFunction::ZERO, 1.0), &bc.set)?;
                }
            }
        }
        let node_order = narrowest_order(&mesh.node_adjacency());
        let mut equation = vec![CONSTRAINED; num_nodes * per_node];
        let mut num_free = 0;
        for &n in &node_order {
            for k in 0..per_node {
                let g = n * per_node + k;
                if fixed[g].is_none() {
                    equation[g] = num_free;
                    num_free += 1;
                }
            }
        }
        let constrained = fixed.iter().enumerate().filter_map(|(g, v)| v.map(|(f, s)| (g, f, s))).collect();
        Ok(DofMap { dim, layout, per_node, num_nodes, equation, constrained, node_order, num_free })
    }

    /// Spatial dimension.
    pub fn dim(&self) -> Dim {
        self.dim
    }
    /// Field layout.
    pub fn layout(&self) -> FieldLayout {
        self.layout
    }
    /// Degrees of freedom per node.
    pub fn dofs_per_node(&self) -> usize {
        self.per_node
    }
    /// Total number of global dofs (free + constrained).
    pub fn num_dofs(&self) -> usize {
        self.num_nodes * self.per_node
    }
    /// Number of free dofs (system size).
    pub fn num_free(&self) -> usize {
        self.num_free
    }
    /// Number of constrained dofs.
    pub fn num_constrained(&self) -> usize {
        self.constrained.len()
    }
    /// Node processing order used for equation numbering.
    pub fn node_order(&self) -> &[usize] {
        &self.node_order
    }

    /// Global dof of `(node, field, comp)`.
    ///
    /// # Panics
    /// If the field is not part of the layout.
    pub fn dof(&self, node: usize, field: Field, comp: usize) -> usize {
        let off = self.layout.offset(field, self.dim).expect("field not in layout");
        node * self.per_node + off + comp
    }

    /// Equation number of a global dof, `None` when constrained.
    pub fn equation(&self, g: usize) -> Option<usize> {
        let e = self.equation[g];
        (e != CONSTRAINED).then_some(e)
    }

    /// Whether a global dof is constrained.
    pub fn is_constrained(&self, g: usize) -> bool {
        self.equation[g] == CONSTRAINED
    }

    /// Constrained dofs with their prescribed histories and spatial factors.
    pub fn constrained(&self) -> &[(usize, TimeFunction, f64)] {
        &self.constrained
    }

    /// Writes prescribed values at time `t` into a global vector.
    pub fn apply_constraints(&self, values: &mut [f64], t: f64) {
        for (g, f, s) in &self.constrained {
            values[*g] = s * f.eval(t);
        }
    }

    /// Global dofs of element `e`, node-major in element-node order.
    pub fn element_dofs(&self, mesh: &Mesh, e: usize, out: &mut Vec<usize>) {
        out.clear();
        for &n in mesh.element(e) {
            out.extend(n * self.per_node..(n + 1) * self.per_node);
        }
    }

    /// Scatters free-dof values (indexed by equation) into a global vector.
    pub fn scatter_free(&self, free: &[f64], values: &mut [f64]) {
        for (g, &e) in self.equation.iter().enumerate() {
            if e != CONSTRAINED {
                values[g] = free[e];
            }
        }
    }

    /// Gathers global values into free-dof order.
    pub fn gather_free(&self, values: &[f64], free: &mut [f64]) {
        for (g, &e) in self.equation.iter().enumerate() {
            if e != CONSTRAINED {
                free[e] = values[g];
            }
        }
    }
}

/// Largest `|pos(v) − pos(w)|` over the edges of `adj` under `order`.
pub(crate) fn order_bandwidth(adj: &[Vec<usize>], order: &[usize]) -> usize {
    let mut pos = vec![0; adj.len()];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    adj.iter()
        .enumerate()
        .flat_map(|(v, ws)| ws.iter().map(move |&w| (v, w)))
        .map(|(v, w)| pos[v].abs_diff(pos[w]))
        .max()
        .unwrap_or(0)
}

/// Reverse Cuthill–McKee or the identity order, whichever has the smaller
/// bandwidth. Structured generators number nodes lexicographically, which on
/// box meshes beats the diagonal level sets of Cuthill–McKee.
pub(crate) fn narrowest_order(adj: &[Vec<usize>]) -> Vec<usize> {
    let rcm = reverse_cuthill_mckee(adj);
    let natural: Vec<usize> = (0..adj.len()).collect();
    if order_bandwidth(adj, &natural) < order_bandwidth(adj, &rcm) {
        natural
    } else {
        rcm
    }
}

/// Reverse Cuthill–McKee ordering of a graph given as sorted adjacency lists.
/// Each connected component starts from a pseudo-peripheral node.
pub(crate) fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let bfs_last = |start: usize, visited: &[bool]| -> (usize, usize) {
        // returns (farthest node of minimum degree, eccentricity)
        let mut level = vec![usize::MAX; adj.len()];
        let mut q = VecDeque::from([start]);
        level[start] = 0;
        let mut far = (start, 0);
        while let Some(v) = q.pop_front() {
            let lv = level[v];
            if lv > far.1 || (lv == far.1 && adj[v].len() < adj[far.0].len()) {
                far = (v, lv);
            }
            for &w in &adj[v] {
                if !visited[w] && level[w] == usize::MAX {
                    level[w] = lv + 1;
                    q.push_back(w);
                }
            }
        }
        far
    };
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        let mut start = seed;
        let mut ecc = 0;
        for _ in 0..4 {
            let (far, e) = bfs_last(start, &visited);
            if e <= ecc && start != seed {
                break;
            }
            ecc = e;
            start = far;
        }
        let first = order.len();
        visited[start] = true;
        order.push(start);
        let mut head = first;
        let mut nbrs = Vec::new();
        while head < order.len() {
            let v = order[head];
            head += 1;
            nbrs.clear();
            nbrs.extend(adj[v].iter().copied().filter(|&w| !visited[w]));
            nbrs.sort_by_key(|&w| (adj[w].len(), w));
            for &w in &nbrs {
                visited[w] = true;
                order.push(w);
            }
        }
        order[first..].reverse();
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::meshes;

    #[test]
    fn layout_offsets() {
        let l = FieldLayout::DataDriven;
        assert_eq!(l.dofs_per_node(Dim::Two), 6);
        assert_eq!(l.dofs_per_node(Dim::Three), 8);
        assert_eq!(l.offset(Field::Pressure, Dim::Three), Some(3));
        assert_eq!(l.offset(Field::MomentumMultiplier, Dim::Two), Some(3));
        assert_eq!(l.offset(Field::MassMultiplier, Dim::Two), Some(5));
        assert_eq!(FieldLayout::ModelBased.offset(Field::MassMultiplier, Dim::Two), None);
        assert_eq!(FieldLayout::Poisson.dofs_per_node(Dim::Three), 2);
    }

    #[test]
    fn time_functions() {
        assert_eq!(TimeFunction::Constant { value: 2.0 }.eval(5.0), 2.0);
        assert_eq!(TimeFunction::Linear { rate: -0.5 }.eval(4.0), -2.0);
        let r = TimeFunction::RampHold { rate: -0.005, until: 2.0 };
        assert!((r.eval(1.0) + 0.005).abs() < 1e-18);
        assert!((r.eval(7.0) + 0.01).abs() < 1e-18);
    }

    #[test]
    fn multiplier_constraints_are_added() {
        let mesh = meshes::terzaghi(0.1, 1.0, 1, 20).unwrap();
        let bcs = [
            DirichletBc::zero("left", Field::Displacement, 0),
            DirichletBc::zero("right", Field::Displacement, 0),
            DirichletBc::zero("bottom", Field::Displacement, 0),
            DirichletBc::zero("bottom", Field::Displacement, 1),
            DirichletBc::zero("top", Field::Pressure, 0),
        ];
        let dm = DofMap::new(&mesh, FieldLayout::DataDriven, &bcs).unwrap();
        // u_x on all 42 nodes, u_y on 2 bottom nodes, p on 2 top nodes — each doubled.
        assert_eq!(dm.num_constrained(), 2 * (42 + 2 + 2));
        assert_eq!(dm.num_free() + dm.num_constrained(), dm.num_dofs());
        let top = mesh.node_set("top").unwrap()[0];
        assert!(dm.is_constrained(dm.dof(top, Field::MassMultiplier, 0)));
        assert!(!dm.is_constrained(dm.dof(top, Field::MomentumMultiplier, 1)));
        // every free dof has a distinct equation number
        let mut seen = vec![false; dm.num_free()];
        for g in 0..dm.num_dofs() {
            if let Some(e) = dm.equation(g) {
                assert!(!seen[e]);
                seen[e] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        let mb = DofMap::new(&mesh, FieldLayout::ModelBased, &bcs).unwrap();
        assert_eq!(mb.num_constrained(), 42 + 2 + 2);
    }

    #[test]
    fn conflicting_constraints_rejected() {
        let mesh = meshes::rectangle(1.0, 1.0, 2, 2).unwrap();
        let bcs = [
            DirichletBc::zero("left", Field::Displacement, 0),
            DirichletBc::new("bottom", Field::Displacement, 0, TimeFunction::Constant { value: 1.0 }),
        ];
        assert!(DofMap::new(&mesh, FieldLayout::ModelBased, &bcs).is_err());
        let bad = [DirichletBc::zero("nowhere", Field::Pressure, 0)];
        assert!(DofMap::new(&mesh, FieldLayout::ModelBased, &bad).is_err());
    }

    #[test]
    fn rcm_reduces_bandwidth_of_long_strip() {
        // numbering a 1×20 strip row by row already has small bandwidth; a
        // shuffled graph must be brought back to a comparable profile.
        let mesh = meshes::rectangle(20.0, 1.0, 20, 1).unwrap();
        let adj = mesh.node_adjacency();
        let order = reverse_cuthill_mckee(&adj);
        let mut pos = vec![0; order.len()];
        for (i, &n) in order.iter().enumerate() {
            pos[n] = i;
        }
        let bw = (0..adj.len())
            .flat_map(|a| adj[a].iter().map(move |&b| (a, b)))
            .map(|(a, b)| pos[a].abs_diff(pos[b]))
            .max()
            .unwrap();
        assert!(bw <= 3, "bandwidth {bw}");
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..adj.len()).collect::<Vec<_>>());
    }

    #[test]
    fn narrowest_order_never_loses_to_either_candidate() {
        for mesh in [
            meshes::cube(1.0, 6).unwrap(),
            meshes::rectangle(20.0, 1.0, 20, 1).unwrap(),
            meshes::cylinder(1.0, 2.0, 3, 4).unwrap(),
        ] {
            let adj = mesh.node_adjacency();
            let best = order_bandwidth(&adj, &narrowest_order(&adj));
            assert!(best <= order_bandwidth(&adj, &reverse_cuthill_mckee(&adj)));
            assert!(best <= order_bandwidth(&adj, &(0..adj.len()).collect::<Vec<_>>()));
        }
        // a box numbered lexicographically keeps its plane-by-plane profile
        let cube = meshes::cube(1.0, 6).unwrap();
        assert!(order_bandwidth(&cube.node_adjacency(), &narrowest_order(&cube.node_adjacency())) <= 7 * 7 + 7 + 1);
    }
}
