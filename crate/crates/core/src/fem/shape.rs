use super::mesh::{ElementKind, Face, Mesh};
use crate::tensor::{Dim, SymTensor2};
use crate::{Error, Result};

/// Largest number of nodes per element (hexahedron).
pub const MAX_NODES: usize = 8;

/// Reference coordinates of the quadrilateral nodes.
const QUAD_REF: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Shape functions and their spatial gradients at one point of one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeValues {
    /// Nodal shape-function values (first `nen` entries used).
    pub n: [f64; MAX_NODES],
    /// Spatial gradients `∂N_a/∂x_i` (first `nen` rows, first `d` columns used).
    pub grad: [[f64; 3]; MAX_NODES],
    /// Jacobian determinant of the reference-to-physical map.
    pub det_j: f64,
    /// Nodes per element.
    pub nen: usize,
    /// Physical coordinates of the point.
    pub x: [f64; 3],
}

/// Shape-function values at a point on an element face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceValues {
    /// Element shape-function values (nodes off the face evaluate to 0).
    pub n: [f64; MAX_NODES],
    /// Surface (2-D: length) measure per unit face-parameter measure.
    pub ds: f64,
    /// Outward unit normal.
    pub normal: [f64; 3],
    /// Physical coordinates of the point.
    pub x: [f64; 3],
    /// Nodes per element.
    pub nen: usize,
}

/// Reference shape functions and derivatives `(N, ∂N/∂ξ)`.
fn reference(kind: ElementKind, xi: &[f64; 3]) -> ([f64; MAX_NODES], [[f64; 3]; MAX_NODES]) {
    let mut n = [0.0; MAX_NODES];
    let mut dn = [[0.0; 3]; MAX_NODES];
    match kind {
        ElementKind::Quad4 => {
            for (a, r) in QUAD_REF.iter().enumerate() {
                let (fx, fy) = (1.0 + r[0] * xi[0], 1.0 + r[1] * xi[1]);
                n[a] = 0.25 * fx * fy;
                dn[a] = [0.25 * r[0] * fy, 0.25 * r[1] * fx, 0.0];
            }
        }
        ElementKind::Hex8 => {
            for a in 0..8 {
                let r = QUAD_REF[a % 4];
                let rz = if a < 4 { -1.0 } else { 1.0 };
                let (fx, fy, fz) = (1.0 + r[0] * xi[0], 1.0 + r[1] * xi[1], 1.0 + rz * xi[2]);
                n[a] = 0.125 * fx * fy * fz;
                dn[a] = [0.125 * r[0] * fy * fz, 0.125 * r[1] * fx * fz, 0.125 * rz * fx * fy];
            }
        }
    }
    (n, dn)
}

/// Evaluates shape functions of an element given its nodal coordinates.
pub fn shape_eval_coords(kind: ElementKind, coords: &[[f64; 3]], xi: &[f64; 3]) -> Result<ShapeValues> {
    let nen = kind.nodes();
    let d = match kind {
        ElementKind::Quad4 => 2,
        ElementKind::Hex8 => 3,
    };
    let (n, dn) = reference(kind, xi);
    // J_ij = ∂x_i/∂ξ_j
    let mut jac = [[0.0; 3]; 3];
    let mut x = [0.0; 3];
    for a in 0..nen {
        for i in 0..d {
            x[i] += n[a] * coords[a][i];
            for j in 0..d {
                jac[i][j] += coords[a][i] * dn[a][j];
            }
        }
    }
    let (det_j, inv) = if d == 2 {
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [[jac[1][1] / det, -jac[0][1] / det, 0.0], [-jac[1][0] / det, jac[0][0] / det, 0.0], [0.0; 3]];
        (det, inv)
    } else {
        let m = &jac;
        let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
        let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
        let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
        let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
        let inv = [
            [c00 / det, (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det, (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det],
            [c01 / det, (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det, (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det],
            [c02 / det, (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det, (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det],
        ];
        (det, inv)
    };
    let scale: f64 = (0..d).map(|i| (0..d).map(|j| jac[i][j] * jac[i][j]).sum::<f64>()).sum();
    let tiny = 1e-14 * if d == 2 { scale } else { scale * crate::math::sqrt(scale) };
    if !(det_j > tiny) || !det_j.is_finite() {
        return Err(Error::SingularJacobian { element: usize::MAX, det_j });
    }
    // ∂N/∂x_i = Σ_j ∂N/∂ξ_j (J⁻¹)_ji
    let mut grad = [[0.0; 3]; MAX_NODES];
    for a in 0..nen {
        for i in 0..d {
            grad[a][i] = (0..d).map(|j| dn[a][j] * inv[j][i]).sum();
        }
    }
    Ok(ShapeValues { n, grad, det_j, nen, x })
}

fn element_coords(mesh: &Mesh, e: usize) -> [[f64; 3]; MAX_NODES] {
    let mut c = [[0.0; 3]; MAX_NODES];
    for (a, &node) in mesh.element(e).iter().enumerate() {
        c[a] = *mesh.node(node);
    }
    c
}

/// Shape functions and spatial gradients of element `e` at reference point `xi`.
pub fn shape_eval(mesh: &Mesh, e: usize, xi: &[f64; 3]) -> Result<ShapeValues> {
    let coords = element_coords(mesh, e);
    shape_eval_coords(mesh.kind(), &coords, xi).map_err(|err| match err {
        Error::SingularJacobian { det_j, .. } => Error::SingularJacobian { element: e, det_j },
        other => other,
    })
}

/// One volume integration point of a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationPoint {
    /// Owning element.
    pub element: usize,
    /// Physical coordinates.
    pub x: [f64; 3],
    /// Quadrature weight times Jacobian determinant.
    pub weight: f64,
}

/// All integration points of `mesh` under `rule`, element by element.
pub fn integration_points(mesh: &Mesh, rule: &super::QuadRule) -> Result<alloc::vec::Vec<IntegrationPoint>> {
    let mut out = alloc::vec::Vec::with_capacity(mesh.num_elements() * rule.len());
    for e in 0..mesh.num_elements() {
        for (xi, w) in rule.points().iter().zip(rule.weights()) {
            let sv = shape_eval(mesh, e, xi)?;
            out.push(IntegrationPoint { element: e, x: sv.x, weight: w * sv.det_j });
        }
    }
    Ok(out)
}

/// Maps a face parameter `s` (in `[−1,1]^{d−1}`) to element reference
/// coordinates; also returns the indices of the two free reference axes.
fn face_map(kind: ElementKind, local: usize, s: &[f64; 3]) -> ([f64; 3], [usize; 2]) {
    match kind {
        ElementKind::Quad4 => match local {
            0 => ([s[0], -1.0, 0.0], [0, 0]),
            1 => ([1.0, s[0], 0.0], [1, 1]),
            2 => ([s[0], 1.0, 0.0], [0, 0]),
            _ => ([-1.0, s[0], 0.0], [1, 1]),
        },
        ElementKind::Hex8 => match local {
            0 => ([s[0], s[1], -1.0], [0, 1]),
            1 => ([s[0], s[1], 1.0], [0, 1]),
            2 => ([s[0], -1.0, s[1]], [0, 2]),
            3 => ([1.0, s[0], s[1]], [1, 2]),
            4 => ([s[0], 1.0, s[1]], [0, 2]),
            _ => ([-1.0, s[0], s[1]], [1, 2]),
        },
    }
}

/// Element shape functions, surface measure and outward normal at face
/// parameter `s` of a boundary face.
pub fn face_eval(mesh: &Mesh, face: Face, s: &[f64; 3]) -> Result<FaceValues> {
    let kind = mesh.kind();
    let coords = element_coords(mesh, face.element);
    let (xi, axes) = face_map(kind, face.local, s);
    let (n, dn) = reference(kind, &xi);
    let nen = kind.nodes();
    let mut x = [0.0; 3];
    let mut t = [[0.0; 3]; 2];
    for a in 0..nen {
        for i in 0..3 {
            x[i] += n[a] * coords[a][i];
            t[0][i] += coords[a][i] * dn[a][axes[0]];
            t[1][i] += coords[a][i] * dn[a][axes[1]];
        }
    }
    let mut normal = match kind {
        ElementKind::Quad4 => [t[0][1], -t[0][0], 0.0],
        ElementKind::Hex8 => [
            t[0][1] * t[1][2] - t[0][2] * t[1][1],
            t[0][2] * t[1][0] - t[0][0] * t[1][2],
            t[0][0] * t[1][1] - t[0][1] * t[1][0],
        ],
    };
    let ds = crate::math::sqrt(normal.iter().map(|v| v * v).sum());
    if !(ds > 0.0) {
        return Err(Error::SingularJacobian { element: face.element, det_j: ds });
    }
    let c = mesh.element_centroid(face.element);
    let outward: f64 = (0..3).map(|i| normal[i] * (x[i] - c[i])).sum();
    let sign = if outward < 0.0 { -1.0 } else { 1.0 };
    for v in &mut normal {
        *v *= sign / ds;
    }
    Ok(FaceValues { n, ds, normal, x, nen })
}

/// Small-strain tensor `sym(∇u)` from element nodal displacements stored
/// node-major (`u[a·d + i]`).
pub fn small_strain(u: &[f64], sv: &ShapeValues, dim: Dim) -> SymTensor2 {
    let d = dim.d();
    let mut g = [[0.0; 3]; 3];
    for a in 0..sv.nen {
        for i in 0..d {
            for j in 0..d {
                g[i][j] += u[a * d + i] * sv.grad[a][j];
            }
        }
    }
    let mut eps = [[0.0; 3]; 3];
    for i in 0..d {
        for j in 0..d {
            eps[i][j] = 0.5 * (g[i][j] + g[j][i]);
        }
    }
    SymTensor2::from_matrix(dim, &eps)
}
