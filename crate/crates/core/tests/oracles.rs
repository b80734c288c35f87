//! Closed-form and hand-computed reference values, checked through the
//! public API only.

use ddporo_core::analytic::{err_space, err_space_time, poisson_manufactured, TerzaghiParams};
use ddporo_core::constitutive::{
    blend_energy, blend_stress, borja_moduli, calibrate_borja, compute_biot, darcy_flux, hooke_stress, BiotInputs,
    BlendParams, BorjaParams, DarcyParams, HookeParams,
};
use ddporo_core::dataset::{generate_grid, select_dataset_by_porosity, AxisSpec, DatasetFamily, PhaseDataset};
use ddporo_core::fem::meshes;
use ddporo_core::nns::{brute_force_query, KdTree, SearchBackend};
use ddporo_core::phase::{
    coupled_distance_sq, fluid_distance_sq, solid_distance_sq, FluidPoint, MetricSpec, SolidPoint,
};
use ddporo_core::tensor::{
    kelvin_inverse, kelvin_vector, quadratic_form, spd_factorize, Dim, SmallMat, SmallVec, SymTensor2, SymTensor4,
};

const SQRT2: f64 = std::f64::consts::SQRT_2;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-300)
}

fn identity_metric(dim: Dim) -> MetricSpec {
    let n = dim.n();
    let d = dim.d();
    MetricSpec::new(
        SymTensor4::identity(dim),
        SymTensor4::identity(dim),
        SmallMat::identity(d),
        SmallMat::identity(d),
        1.0,
    )
    .unwrap_or_else(|e| panic!("identity metric of order {n}: {e}"))
}

fn terzaghi() -> TerzaghiParams {
    TerzaghiParams {
        young: 70e9,
        biot: 1.0,
        modulus: 266.667e9,
        conductivity: 3.0612e-12,
        height: 1.0,
        traction: -0.9e9,
    }
}

#[test]
fn kelvin_vectors_of_simple_tensors() {
    let i2 = SymTensor2::identity(Dim::Two);
    assert_eq!(kelvin_vector(&i2).as_slice(), [1.0, 1.0, 0.0]);
    let t = SymTensor2::from_components(Dim::Two, &[1.0, 0.0, 2.0]).unwrap();
    let k = kelvin_vector(&t);
    assert_eq!(&k.as_slice()[..2], [1.0, 0.0]);
    assert!(close(k[2], 2.0 * SQRT2, 1e-15));

    assert_eq!(kelvin_inverse(&[1.0, 1.0, 0.0]).unwrap(), i2);
    let shear = kelvin_inverse(&[0.0, 0.0, SQRT2]).unwrap();
    assert!(close(shear.get(0, 1), 1.0, 1e-15) && shear.get(0, 0) == 0.0);
}

#[test]
fn symmetric_square_root_of_a_diagonal_matrix() {
    let f = spd_factorize(&SmallMat::identity(3)).unwrap();
    assert_eq!(f.factor(), &SmallMat::identity(3));
    let f = spd_factorize(&SmallMat::diagonal(&[4.0, 9.0])).unwrap();
    let r = f.factor();
    assert!(close(r.get(0, 0), 2.0, 1e-14) && close(r.get(1, 1), 3.0, 1e-14));
    assert!(r.get(0, 1).abs() < 1e-14);
}

#[test]
fn quadratic_form_of_the_identity() {
    let i2 = SymTensor2::identity(Dim::Two);
    assert!(close(quadratic_form(&SymTensor4::identity(Dim::Two), &i2).unwrap(), 2.0, 1e-15));
    assert_eq!(quadratic_form(&SymTensor4::identity(Dim::Two), &SymTensor2::zeros(Dim::Two)).unwrap(), 0.0);
}

#[test]
fn phase_distances_with_identity_weights() {
    let m = identity_metric(Dim::Two);
    let z = SymTensor2::zeros(Dim::Two);
    let e1 = SymTensor2::from_components(Dim::Two, &[1.0, 0.0, 0.0]).unwrap();
    let a = SolidPoint::new(e1, z).unwrap();
    let b = SolidPoint::new(z, z).unwrap();
    assert_eq!(solid_distance_sq(&a, &a, &m).unwrap(), 0.0);
    assert!(close(solid_distance_sq(&a, &b, &m).unwrap(), 0.5, 1e-15));

    let f = FluidPoint::new(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
    let g = FluidPoint::new(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
    assert_eq!(fluid_distance_sq(&f, &f, &m).unwrap(), 0.0);
    assert!(close(fluid_distance_sq(&f, &g, &m).unwrap(), 0.5, 1e-15));

    // 0.5 (solid) + dt_scale · 0.25 (fluid) with dt_scale = 2
    let m2 = m.with_dt_scale(2.0).unwrap();
    let h = FluidPoint::new(&[SQRT2 / 2.0, 0.0], &[0.0, 0.0]).unwrap();
    let d = coupled_distance_sq(&a, &b, &h, &g, &m2).unwrap();
    assert!(close(d, 1.0, 1e-14), "{d}");
}

#[test]
fn grids_hold_the_axis_samples() {
    let g = generate_grid(&[AxisSpec::active(-1.0, 1.0, 3)]).unwrap();
    let v: Vec<f64> = g.rows().map(|r| r[0]).collect();
    assert_eq!(v, [-1.0, 0.0, 1.0]);

    let g = generate_grid(&[AxisSpec::active(0.0, 0.0, 1)]).unwrap();
    assert_eq!(g.len(), 1);
    assert_eq!(g.row(0), [0.0]);

    let g = generate_grid(&[AxisSpec::active(0.0, 1.0, 65), AxisSpec::active(-1.0, 1.0, 4096)]).unwrap();
    assert_eq!(g.len(), 65 * 4096);

    let g = generate_grid(&[AxisSpec::Fixed(0.0), AxisSpec::active(-8.6e9, 4.3e9, 5)]).unwrap();
    assert_eq!(g.width(), 2);
    assert!(g.rows().all(|r| r[0] == 0.0));
    assert_eq!(g.row(0)[1], -8.6e9);
    assert_eq!(g.row(4)[1], 4.3e9);
}

#[test]
fn porosity_labels_pick_the_nearest_member() {
    let m = identity_metric(Dim::Two);
    let member = |label: f64| {
        let p = FluidPoint::new(&[label, 0.0], &[0.0, 0.0]).unwrap();
        PhaseDataset::new(Dim::Two, vec![p], &m, SearchBackend::BruteForce).unwrap().with_label(label).unwrap()
    };
    let family = DatasetFamily::new(vec![member(0.26), member(0.24), member(0.25)]).unwrap();
    assert_eq!(select_dataset_by_porosity(&family, 0.251).unwrap().label(), Some(0.25));
    assert_eq!(select_dataset_by_porosity(&family, 0.1).unwrap().label(), Some(0.24));
    assert_eq!(select_dataset_by_porosity(&family, 0.9).unwrap().label(), Some(0.26));
}

#[test]
fn tiny_trees_answer_like_a_linear_scan() {
    let one = [0.5, -0.5];
    let t = KdTree::build(&one, 2, 3).unwrap();
    assert_eq!(t.leaves().len(), 1);
    let n = t.query(&[3.0, 3.0]).unwrap();
    assert_eq!(n.index, 0);

    // 14 points in the plane, at most three per leaf
    let pts: Vec<f64> = (0..14).flat_map(|i| [(i * 7 % 11) as f64, (i * 5 % 13) as f64]).collect();
    let t = KdTree::build(&pts, 2, 3).unwrap();
    assert!(t.leaves().iter().all(|l| !l.is_empty() && l.len() <= 3));
    assert!(t.check_invariants());
    for i in 0..14 {
        let q = &pts[2 * i..2 * i + 2];
        let n = t.query(q).unwrap();
        assert_eq!((n.index, n.dist_sq), (i, 0.0));
        assert_eq!(brute_force_query(&pts, 2, q).unwrap().index, i);
    }
}

#[test]
fn structured_meshes_have_the_expected_counts() {
    let m = meshes::terzaghi(0.1, 1.0, 1, 20).unwrap();
    assert_eq!((m.num_elements(), m.num_nodes()), (20, 42));
    let m = meshes::cube(1.0, 16).unwrap();
    assert_eq!(m.num_elements(), 4096);
    let m = meshes::square(1.0, 1).unwrap();
    assert_eq!((m.num_elements(), m.num_nodes()), (1, 4));
}

#[test]
fn biot_constants_in_the_limits() {
    let base = BiotInputs {
        k: 10e9,
        inv_ks: 0.0,
        kf: 2.2e9,
        porosity: 0.2,
        rho_s: 2650.0,
        rho_f: 1000.0,
        g: SmallVec::from_slice(&[0.0, -9.81]),
    };
    let c = compute_biot(&base).unwrap();
    assert_eq!(c.b, 1.0);
    assert!(close(c.inv_m, 0.2 / 2.2e9, 1e-14));
    assert!(close(c.gamma[1], -9.81 * (0.8 * 2650.0 + 0.2 * 1000.0), 1e-14));

    // grains as stiff as the skeleton: no coupling (exact in binary)
    let k = 2f64.powi(33);
    let same = compute_biot(&BiotInputs { k, inv_ks: 1.0 / k, ..base.clone() }).unwrap();
    assert_eq!(same.b, 0.0);

    // 1/M = (B − φ)/K_s + φ/K_f with K_s = 40 GPa
    let ks = 40e9;
    let c = compute_biot(&BiotInputs { inv_ks: 1.0 / ks, ..base }).unwrap();
    let b = 1.0 - 10e9 / ks;
    assert!(close(c.b, b, 1e-15));
    assert!(close(c.inv_m, (b - 0.2) / ks + 0.2 / 2.2e9, 1e-14));
}

#[test]
fn linear_laws_with_column_parameters() {
    let p = HookeParams::new(70e9, 0.0).unwrap();
    let eps = SymTensor2::from_components(Dim::Two, &[0.0, -0.01, 0.0]).unwrap();
    let (s, _) = hooke_stress(&eps, &p);
    assert!(close(s.get(1, 1), -0.7e9, 1e-14));
    assert_eq!(s.get(0, 0), 0.0);
    let (s, _) = hooke_stress(&SymTensor2::zeros(Dim::Two), &p);
    assert_eq!(s, SymTensor2::zeros(Dim::Two));

    let d = DarcyParams::new(SmallMat::scaled_identity(2, 3.0612e-9), 1e-3, SmallVec::zeros(2)).unwrap();
    let q = darcy_flux(&SmallVec::from_slice(&[0.0, 1.0]), &d).unwrap();
    assert_eq!(q[0], 0.0);
    assert!(close(q[1], -3.0612e-6, 1e-12));
    assert_eq!(darcy_flux(&SmallVec::zeros(2), &d).unwrap().norm(), 0.0);
}

#[test]
fn hyperelastic_laws_at_reference_states() {
    let p = BlendParams::from_young(30e9, 0.35).unwrap();
    let z = SymTensor2::zeros(Dim::Two);
    assert_eq!(blend_energy(&z, &p).unwrap(), 0.0);
    let (s, _) = blend_stress(&z, &p).unwrap();
    assert!(s.norm() < 1e-3);

    let b = BorjaParams { p0: -1e6, c_r: 0.01, c_mu: 150.0, eps_v0: 0.0, psi0: 0.0 };
    let (k, mu) = borja_moduli(0.0, 0.0, &b).unwrap();
    assert!(close(k, 1e8, 1e-14) && close(mu, 1.5e8, 1e-14));
    let (k2, _) = borja_moduli(-b.c_r * 2f64.ln(), 0.0, &b).unwrap();
    assert!(close(k2, 2.0 * k, 1e-12));
}

#[test]
fn calibration_recovers_its_generating_parameters() {
    let truth = BorjaParams { p0: -2e6, c_r: 0.02, c_mu: 80.0, eps_v0: 0.0, psi0: 0.0 };
    let phi0 = 0.22;
    let table: Vec<(f64, f64, f64)> = (0..12)
        .map(|i| {
            let phi = 0.15 + 0.01 * i as f64;
            let (k, m) = borja_moduli(phi / phi0 - 1.0, 0.0, &truth).unwrap();
            (phi, k, m)
        })
        .collect();
    let fit = calibrate_borja(phi0, &table).unwrap();
    for &(phi, k, m) in &table {
        let (kf, mf) = borja_moduli(phi / phi0 - 1.0, 0.0, &fit).unwrap();
        assert!(close(kf, k, 1e-8) && close(mf, m, 1e-8));
    }
    let flat: Vec<(f64, f64, f64)> = table.iter().map(|&(phi, _, m)| (phi, 1e9, m)).collect();
    assert!(calibrate_borja(phi0, &flat).is_err());
}

#[test]
fn consolidation_series_limits() {
    let a = terzaghi();
    for t in [0.01, 0.5, 3.0, 10.0] {
        assert!(a.pressure(1.0, t).abs() < 1e-6 * a.pressure(0.0, t).abs().max(1.0));
    }
    assert!(a.pressure(0.3, 1e4).abs() < 1e-9);
    // undrained response right after loading, drained response at the end
    let p0 = 0.9e9 * 266.667e9 / (70e9 + 266.667e9);
    assert!(close(a.pressure(0.0, 1e-3), p0, 1e-6));
    assert!(close(a.displacement(1.0, 1e4), -0.9e9 / 70e9, 1e-9));
}

#[test]
fn manufactured_steady_solution() {
    let o = poisson_manufactured(0.0, 0.0, 0.0, 1.0);
    assert_eq!((o.p, o.grad_p), (0.0, [0.0; 3]));
    let m = poisson_manufactured(1.0, 0.0, 0.0, 1.0);
    assert_eq!((m.p, m.grad_p, m.source), (1.0, [2.0, 0.0, 0.0], 6.0));
}

#[test]
fn error_measures_on_simple_fields() {
    let w = [0.25; 4];
    assert_eq!(err_space(&[1.0; 4], &[1.0; 4], &w).unwrap().value, 0.0);
    let e = err_space(&[1.1; 4], &[1.0; 4], &w).unwrap();
    assert!(e.relative && close(e.value, 0.1, 1e-14));
    let z = err_space(&[0.5; 4], &[0.0; 4], &w).unwrap();
    assert!(!z.relative && close(z.value, 0.5, 1e-15));
    assert!(close(err_space_time(&[0.1, 0.3], 0.5, 1.0).unwrap(), 0.2, 1e-15));
}
