//! File formats: dataset CSV tables with JSON manifests, legacy ASCII VTK
//! field files, iteration-log and error-table CSV, and the run summary.
//!
//! Every writer is deterministic: equal inputs give byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ddporo_core::dataset::{PhaseDataset, Provenance};
use ddporo_core::fem::{Field, Mesh};
use ddporo_core::nns::SearchBackend;
use ddporo_core::phase::{FluidPoint, MetricSpec, Phase, PhasePoint, SolidPoint};
use ddporo_core::solver::{FluidData, IterationLog, Solver};
use ddporo_core::tensor::Dim;
use serde::{Deserialize, Serialize};

const AXES: [&str; 3] = ["x", "y", "z"];

/// Column names of a dataset table.
pub fn dataset_columns(phase: Phase, dim: Dim) -> Vec<String> {
    match phase {
        Phase::Solid => {
            let comps: Vec<String> = (0..dim.n())
                .map(|k| {
                    let (i, j) = dim.pair(k);
                    format!("{}{}", AXES[i], AXES[j])
                })
                .collect();
            comps.iter().map(|c| format!("eps_{c}")).chain(comps.iter().map(|c| format!("sig_{c}"))).collect()
        }
        Phase::Fluid => {
            let d = dim.d();
            (0..d).map(|i| format!("dp_d{}", AXES[i])).chain((0..d).map(|i| format!("q_{}", AXES[i]))).collect()
        }
    }
}

/// Phase and dimension of a table from its header.
fn classify(header: &[String]) -> Result<(Phase, Dim)> {
    for phase in [Phase::Solid, Phase::Fluid] {
        for dim in [Dim::Two, Dim::Three] {
            if dataset_columns(phase, dim) == header {
                return Ok((phase, dim));
            }
        }
    }
    bail!("unrecognised dataset header {header:?}")
}

fn phase_name(phase: Phase) -> &'static str {
    match phase {
        Phase::Solid => "solid",
        Phase::Fluid => "fluid",
    }
}

/// Writes the raw rows of a dataset as CSV.
pub fn write_dataset_csv<P: PhasePoint>(path: &Path, dim: Dim, points: &[P]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(dataset_columns(P::PHASE, dim))?;
    for p in points {
        w.write_record(p.to_row().iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset table; the phase must match `P`.
pub fn read_dataset_csv<P: PhasePoint>(path: &Path) -> Result<(Dim, Vec<P>)> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let (phase, dim) = classify(&header).with_context(|| format!("reading {}", path.display()))?;
    if phase != P::PHASE {
        bail!("{} holds {} data, expected {}", path.display(), phase_name(phase), phase_name(P::PHASE));
    }
    let mut points = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("{}: row {}", path.display(), line + 1))?;
        points.push(P::from_row(dim, &row).with_context(|| format!("{}: row {}", path.display(), line + 1))?);
    }
    if points.is_empty() {
        bail!("{} contains no data rows", path.display());
    }
    Ok((dim, points))
}

/// Loads a dataset table and indexes it under `metric`.
pub fn load_dataset<P: PhasePoint>(
    path: &Path,
    metric: &MetricSpec,
    backend: SearchBackend,
) -> Result<PhaseDataset<P>> {
    let (dim, points) = read_dataset_csv::<P>(path)?;
    if dim != metric.dim() {
        bail!("{} is {}-D but the problem is {}-D", path.display(), dim.d(), metric.dim().d());
    }
    Ok(PhaseDataset::new(dim, points, metric, backend)?)
}

/// Reads a porosity–permeability table with columns `phi,k`.
pub fn read_permeability_table(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if header != ["phi", "k"] {
        bail!("{}: expected the header `phi,k`, found {header:?}", path.display());
    }
    let mut rows = Vec::new();
    for rec in r.deserialize::<(f64, f64)>() {
        rows.push(rec.with_context(|| format!("reading {}", path.display()))?);
    }
    if rows.is_empty() {
        bail!("{} contains no rows", path.display());
    }
    Ok(rows)
}

/// Writes a porosity–permeability table.
pub fn write_permeability_table(path: &Path, rows: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["phi", "k"])?;
    for (phi, k) in rows {
        w.write_record([phi.to_string(), k.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One dataset file listed in a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// File name relative to the manifest.
    pub file: String,
    /// `solid` or `fluid`.
    pub phase: String,
    /// Spatial dimension.
    pub dim: usize,
    /// Number of rows.
    pub count: usize,
    /// Column names.
    pub columns: Vec<String>,
    /// Porosity label of a family member.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<f64>,
    /// Sampled law and grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

/// Description of a generated data directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Format version.
    pub schema_version: u32,
    /// Problem the data belong to.
    pub problem: String,
    /// Seed of the generating configuration.
    pub seed: Option<u64>,
    /// Dataset files.
    pub datasets: Vec<ManifestEntry>,
}

fn entry<P: PhasePoint>(file: String, ds: &PhaseDataset<P>) -> ManifestEntry {
    ManifestEntry {
        file,
        phase: phase_name(P::PHASE).into(),
        dim: ds.dim().d(),
        count: ds.len(),
        columns: dataset_columns(P::PHASE, ds.dim()),
        label: ds.label(),
        provenance: ds.provenance().cloned(),
    }
}

fn write_one<P: PhasePoint>(dir: &Path, name: String, ds: &PhaseDataset<P>) -> Result<ManifestEntry> {
    write_dataset_csv(&dir.join(&name), ds.dim(), ds.points())?;
    Ok(entry(name, ds))
}

/// Writes every dataset to `dir` (`solid.csv`, `fluid.csv` or
/// `fluid_000.csv`… for a family) plus `manifest.json`.
pub fn write_datasets(
    dir: &Path,
    problem: &str,
    seed: Option<u64>,
    solid: Option<&PhaseDataset<SolidPoint>>,
    fluid: Option<&FluidData>,
) -> Result<Manifest> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut datasets = Vec::new();
    if let Some(s) = solid {
        datasets.push(write_one(dir, "solid.csv".into(), s)?);
    }
    match fluid {
        Some(FluidData::Single(f)) => datasets.push(write_one::<FluidPoint>(dir, "fluid.csv".into(), f)?),
        Some(FluidData::Family(fam)) => {
            for (i, m) in fam.members().iter().enumerate() {
                datasets.push(write_one(dir, format!("fluid_{i:03}.csv"), m)?);
            }
        }
        None => {}
    }
    let manifest = Manifest { schema_version: crate::config::SCHEMA_VERSION, problem: problem.into(), seed, datasets };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes the iteration log of a run.
pub fn write_iteration_log(path: &Path, logs: &[IterationLog]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for l in logs {
        w.serialize(l)?;
    }
    if logs.is_empty() {
        w.write_record([
            "step",
            "iteration",
            "solid_metric",
            "fluid_metric",
            "coupled_metric",
            "change_count",
            "newton_iterations",
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a numeric table with a header.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Path of the field file of a step.
pub fn vtk_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("fields_{step:04}.vtk"))
}

fn vtk_cell_type(mesh: &Mesh) -> u8 {
    match mesh.dim() {
        Dim::Two => 9,
        Dim::Three => 12,
    }
}

/// Writes the current solver state as a legacy ASCII VTK unstructured
/// grid: nodal `u`, `p`, `β` fields and element averages of the
/// integration-point states.
pub fn write_vtk(path: &Path, solver: &Solver) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    write_vtk_to(&mut w, solver)?;
    w.flush()?;
    Ok(())
}

fn write_vtk_to(w: &mut impl Write, s: &Solver) -> Result<()> {
    let mesh = s.mesh();
    let problem = s.problem();
    let layout = problem.formulation.layout();
    let d = mesh.dim().d();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{} {} t={}", problem.name, problem.formulation.kind().as_str(), s.global().t)?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.num_nodes())?;
    for x in mesh.nodes() {
        writeln!(w, "{} {} {}", x[0], x[1], x[2])?;
    }
    let nen = mesh.nodes_per_element();
    let ne = mesh.num_elements();
    writeln!(w, "CELLS {} {}", ne, ne * (nen + 1))?;
    for e in 0..ne {
        write!(w, "{nen}")?;
        for n in mesh.element(e) {
            write!(w, " {n}")?;
        }
        writeln!(w)?;
    }
    writeln!(w, "CELL_TYPES {ne}")?;
    let ct = vtk_cell_type(mesh);
    for _ in 0..ne {
        writeln!(w, "{ct}")?;
    }

    writeln!(w, "POINT_DATA {}", mesh.num_nodes())?;
    for (field, name) in [(Field::Displacement, "u"), (Field::MomentumMultiplier, "beta_mom")] {
        if layout.has(field) {
            writeln!(w, "VECTORS {name} double")?;
            for n in 0..mesh.num_nodes() {
                let v: Vec<f64> = (0..3).map(|c| if c < d { s.nodal(n, field, c) } else { 0.0 }).collect();
                writeln!(w, "{} {} {}", v[0], v[1], v[2])?;
            }
        }
    }
    for (field, name) in [(Field::Pressure, "p"), (Field::MassMultiplier, "beta_mass")] {
        if layout.has(field) {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for n in 0..mesh.num_nodes() {
                writeln!(w, "{}", s.nodal(n, field, 0))?;
            }
        }
    }

    // Element averages of integration-point quantities.
    let nq = s.points_per_element();
    let states = s.states();
    let avg = |e: usize, f: &dyn Fn(usize) -> f64| {
        let pts = &states[e * nq..(e + 1) * nq];
        let wsum: f64 = pts.iter().map(|p| p.weight).sum();
        (0..nq).map(|q| pts[q].weight * f(e * nq + q)).sum::<f64>() / wsum
    };
    writeln!(w, "CELL_DATA {ne}")?;
    let tensors: [(&str, &dyn Fn(usize, usize, usize) -> f64); 2] = [
        ("effective_stress", &|q, i, j| states[q].solid.stress.get(i, j)),
        ("strain", &|q, i, j| states[q].solid.strain.get(i, j)),
    ];
    if layout.has(Field::Displacement) {
        for (name, f) in tensors {
            writeln!(w, "TENSORS {name} double")?;
            for e in 0..ne {
                for i in 0..3 {
                    let row: Vec<f64> =
                        (0..3).map(|j| if i < d && j < d { avg(e, &|q| f(q, i, j)) } else { 0.0 }).collect();
                    writeln!(w, "{} {} {}", row[0], row[1], row[2])?;
                }
            }
        }
    }
    let vectors: [(&str, &dyn Fn(usize, usize) -> f64); 2] = [
        ("flux", &|q, i| states[q].fluid.flux.as_slice()[i]),
        ("grad_p", &|q, i| states[q].fluid.grad_p.as_slice()[i]),
    ];
    for (name, f) in vectors {
        writeln!(w, "VECTORS {name} double")?;
        for e in 0..ne {
            let v: Vec<f64> = (0..3).map(|i| if i < d { avg(e, &|q| f(q, i)) } else { 0.0 }).collect();
            writeln!(w, "{} {} {}", v[0], v[1], v[2])?;
        }
    }
    if problem.porosity.is_some() {
        writeln!(w, "SCALARS porosity double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for e in 0..ne {
            writeln!(w, "{}", avg(e, &|q| states[q].porosity))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ddporo_core::tensor::SymTensor2;

    #[test]
    fn column_names_follow_storage_order() {
        assert_eq!(
            dataset_columns(Phase::Solid, Dim::Two),
            ["eps_xx", "eps_yy", "eps_xy", "sig_xx", "sig_yy", "sig_xy"]
        );
        assert_eq!(dataset_columns(Phase::Fluid, Dim::Three), ["dp_dx", "dp_dy", "dp_dz", "q_x", "q_y", "q_z"]);
        assert_eq!(dataset_columns(Phase::Solid, Dim::Three)[3], "eps_xy");
        assert_eq!(dataset_columns(Phase::Solid, Dim::Three)[5], "eps_xz");
    }

    #[test]
    fn datasets_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let pts: Vec<SolidPoint> = (0..7)
            .map(|i| {
                let e = SymTensor2::from_components(Dim::Two, &[0.1 * i as f64, -1.0 / 3.0, 1e-17 * i as f64]).unwrap();
                let s = SymTensor2::from_components(Dim::Two, &[3e9, f64::MIN_POSITIVE, -2.5e-3]).unwrap();
                SolidPoint::new(e, s).unwrap()
            })
            .collect();
        write_dataset_csv(&path, Dim::Two, &pts).unwrap();
        let (dim, back) = read_dataset_csv::<SolidPoint>(&path).unwrap();
        assert_eq!(dim, Dim::Two);
        assert_eq!(back, pts);
        assert!(read_dataset_csv::<FluidPoint>(&path).is_err());
    }

    #[test]
    fn malformed_tables_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        std::fs::write(&path, "dp_dx,dp_dy,q_x,q_y\n1,2,3\n").unwrap();
        assert!(read_dataset_csv::<FluidPoint>(&path).is_err());
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(read_dataset_csv::<FluidPoint>(&path).is_err());
        std::fs::write(&path, "dp_dx,dp_dy,q_x,q_y\n").unwrap();
        assert!(read_dataset_csv::<FluidPoint>(&path).is_err());
        std::fs::write(&path, "phi,k\n0.2,1e-13\n0.3,x\n").unwrap();
        assert!(read_permeability_table(&path).is_err());
    }

    #[test]
    fn permeability_tables_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.csv");
        let rows = vec![(0.2, 1.5e-13), (0.25, 3e-13)];
        write_permeability_table(&path, &rows).unwrap();
        assert_eq!(read_permeability_table(&path).unwrap(), rows);
    }
}
