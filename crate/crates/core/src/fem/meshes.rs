//! Structured mesh generators for the benchmark geometries.
//!
//! Every generator tags boundary face sets (and node sets of the same name)
//! matching the boundary-condition labels of the corresponding problem.

use alloc::vec::Vec;

use super::mesh::Mesh;
use crate::math::{cos, sin, sqrt};
use crate::tensor::Dim;
use crate::{Error, Result};

fn check_counts(counts: &[usize], lengths: &[f64]) -> Result<()> {
    if counts.contains(&0) {
        return Err(Error::invalid("element counts must be positive"));
    }
    if lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::invalid("mesh dimensions must be positive and finite"));
    }
    Ok(())
}

/// Rectangle `[x0, x0+lx] × [y0, y0+ly]` with `nx × ny` quadrilaterals.
/// Face sets: `left`, `right`, `bottom`, `top`.
pub fn rectangle_at(origin: [f64; 2], lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Mesh> {
    check_counts(&[nx, ny], &[lx, ly])?;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([origin[0] + lx * i as f64 / nx as f64, origin[1] + ly * j as f64 / ny as f64, 0.0]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut elements = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            elements.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1), 0, 0, 0, 0]);
        }
    }
    let mut mesh = Mesh::new(Dim::Two, nodes, elements)?;
    let (tx, ty) = (1e-9 * lx, 1e-9 * ly);
    let (x1, y1) = (origin[0] + lx, origin[1] + ly);
    mesh.tag_boundary("left", |c| (c[0] - origin[0]).abs() < tx)?;
    mesh.tag_boundary("right", |c| (c[0] - x1).abs() < tx)?;
    mesh.tag_boundary("bottom", |c| (c[1] - origin[1]).abs() < ty)?;
    mesh.tag_boundary("top", |c| (c[1] - y1).abs() < ty)?;
    Ok(mesh)
}

/// Rectangle `[0, lx] × [0, ly]`.
pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Mesh> {
    rectangle_at([0.0, 0.0], lx, ly, nx, ny)
}

/// Square `[0, l]²` with `n × n` quadrilaterals.
pub fn square(l: f64, n: usize) -> Result<Mesh> {
    rectangle(l, l, n, n)
}

/// Soil column `[0, width] × [0, height]` (drained top at `y = height`).
pub fn terzaghi(width: f64, height: f64, nx: usize, ny: usize) -> Result<Mesh> {
    rectangle(width, height, nx, ny)
}

/// Strip-footing domain `[0, width] × [0, height]` with uniform spacing.
/// In addition to the rectangle tags, `footing` holds the top faces with
/// centroid `x ≤ load_width` and `top_free` the remaining top faces.
pub fn footing(width: f64, height: f64, load_width: f64, nx: usize, ny: usize) -> Result<Mesh> {
    if !(load_width > 0.0 && load_width <= width) {
        return Err(Error::invalid("footing load width must lie in (0, width]"));
    }
    let mut mesh = rectangle(width, height, nx, ny)?;
    let top = height - 1e-9 * height;
    mesh.tag_boundary("footing", |c| c[1] > top && c[0] <= load_width)?;
    mesh.tag_boundary("top_free", |c| c[1] > top && c[0] > load_width)?;
    if mesh.face_set("footing")?.is_empty() {
        return Err(Error::invalid("footing load width smaller than one element"));
    }
    Ok(mesh)
}

/// Brick `[o, o+l]` with `n` hexahedra per axis. Face sets `xmin`, `xmax`,
/// `ymin`, `ymax`, `zmin`, `zmax` and `boundary` (all faces).
pub fn brick(origin: [f64; 3], l: [f64; 3], n: [usize; 3]) -> Result<Mesh> {
    check_counts(&n, &l)?;
    let [nx, ny, nz] = n;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([
                    origin[0] + l[0] * i as f64 / nx as f64,
                    origin[1] + l[1] * j as f64 / ny as f64,
                    origin[2] + l[2] * k as f64 / nz as f64,
                ]);
            }
        }
    }
    let id = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
    let mut elements = Vec::with_capacity(nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                elements.push([
                    id(i, j, k),
                    id(i + 1, j, k),
                    id(i + 1, j + 1, k),
                    id(i, j + 1, k),
                    id(i, j, k + 1),
                    id(i + 1, j, k + 1),
                    id(i + 1, j + 1, k + 1),
                    id(i, j + 1, k + 1),
                ]);
            }
        }
    }
    let mut mesh = Mesh::new(Dim::Three, nodes, elements)?;
    let names = [["xmin", "xmax"], ["ymin", "ymax"], ["zmin", "zmax"]];
    for axis in 0..3 {
        let tol = 1e-9 * l[axis];
        let (lo, hi) = (origin[axis], origin[axis] + l[axis]);
        mesh.tag_boundary(names[axis][0], |c| (c[axis] - lo).abs() < tol)?;
        mesh.tag_boundary(names[axis][1], |c| (c[axis] - hi).abs() < tol)?;
    }
    mesh.tag_boundary("boundary", |_| true)?;
    Ok(mesh)
}

/// Cube of edge `l` centred at the origin with `n³` hexahedra.
pub fn cube(l: f64, n: usize) -> Result<Mesh> {
    brick([-0.5 * l; 3], [l; 3], [n; 3])
}

/// Full cylinder of radius `radius` and height `height` (axis `z`, base at
/// `z = 0`). The cross-section is an `n × n` grid mapped onto the disk with
/// the elliptical square-to-disk map; `nz` layers along the axis.
/// Face sets: `bottom`, `top`, `lateral`.
pub fn cylinder(radius: f64, height: f64, n: usize, nz: usize) -> Result<Mesh> {
    check_counts(&[n, nz], &[radius, height])?;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=n {
            for i in 0..=n {
                let u = -1.0 + 2.0 * i as f64 / n as f64;
                let v = -1.0 + 2.0 * j as f64 / n as f64;
                let x = u * sqrt(1.0 - 0.5 * v * v);
                let y = v * sqrt(1.0 - 0.5 * u * u);
                nodes.push([radius * x, radius * y, height * k as f64 / nz as f64]);
            }
        }
    }
    let id = |i: usize, j: usize, k: usize| (k * (n + 1) + j) * (n + 1) + i;
    let mut elements = Vec::with_capacity(n * n * nz);
    for k in 0..nz {
        for j in 0..n {
            for i in 0..n {
                elements.push([
                    id(i, j, k),
                    id(i + 1, j, k),
                    id(i + 1, j + 1, k),
                    id(i, j + 1, k),
                    id(i, j, k + 1),
                    id(i + 1, j, k + 1),
                    id(i + 1, j + 1, k + 1),
                    id(i, j + 1, k + 1),
                ]);
            }
        }
    }
    let mut mesh = Mesh::new(Dim::Three, nodes, elements)?;
    let tz = 1e-9 * height;
    mesh.tag_boundary("bottom", |c| c[2].abs() < tz)?;
    mesh.tag_boundary("top", |c| (c[2] - height).abs() < tz)?;
    mesh.tag_boundary("lateral", |c| c[2].abs() >= tz && (c[2] - height).abs() >= tz)?;
    Ok(mesh)
}

/// Square plate `[−l/2, l/2]²` with a centred circular hole of radius `r`,
/// meshed as a four-block O-grid: `n_tan` elements along each side (per
/// block) and `n_rad` elements from the hole to the outer boundary.
/// Face sets: `left`, `right`, `bottom`, `top`, `hole`.
pub fn plate_with_hole(l: f64, r: f64, n_tan: usize, n_rad: usize) -> Result<Mesh> {
    check_counts(&[n_tan, n_rad], &[l, r])?;
    if r >= 0.5 * l {
        return Err(Error::invalid("hole radius must be smaller than half the plate width"));
    }
    let h = 0.5 * l;
    let n_ring = 4 * n_tan;
    let quarter = core::f64::consts::FRAC_PI_2;
    let mut nodes = Vec::with_capacity(n_ring * (n_rad + 1));
    for j in 0..=n_rad {
        let s = j as f64 / n_rad as f64;
        for i in 0..n_ring {
            let side = i / n_tan;
            let t = (i % n_tan) as f64 / n_tan as f64;
            // outer point moves uniformly along the side, counter-clockwise from
            // the corner at angle −45° + side·90°
            let a = -1.0 + 2.0 * t;
            let (ox, oy) = match side {
                0 => (h, h * a),
                1 => (-h * a, h),
                2 => (-h, -h * a),
                _ => (h * a, -h),
            };
            let theta = -0.5 * quarter + quarter * (side as f64 + t);
            let (ix, iy) = (r * cos(theta), r * sin(theta));
            nodes.push([ix + s * (ox - ix), iy + s * (oy - iy), 0.0]);
        }
    }
    let id = |i: usize, j: usize| j * n_ring + (i % n_ring);
    let mut elements = Vec::with_capacity(n_ring * n_rad);
    for j in 0..n_rad {
        for i in 0..n_ring {
            elements.push([id(i, j), id(i, j + 1), id(i + 1, j + 1), id(i + 1, j), 0, 0, 0, 0]);
        }
    }
    let mut mesh = Mesh::new(Dim::Two, nodes, elements)?;
    let tol = 1e-9 * l;
    mesh.tag_boundary("left", |c| (c[0] + h).abs() < tol)?;
    mesh.tag_boundary("right", |c| (c[0] - h).abs() < tol)?;
    mesh.tag_boundary("bottom", |c| (c[1] + h).abs() < tol)?;
    mesh.tag_boundary("top", |c| (c[1] - h).abs() < tol)?;
    mesh.tag_boundary("hole", |c| sqrt(c[0] * c[0] + c[1] * c[1]) < r + 1e-6 * l)?;
    Ok(mesh)
}
