use std::f64::consts::PI;

use willmore_core::flow::{
    self, conformal_killing_residual, energy_gradient, remesh_with_stats, run, step, FlowConfig, FlowError,
    FlowState, KillingField, Scheme, StopReason,
};
use willmore_core::shapes::random_sphere_mesh;
use willmore_core::{ellipsoid, icosphere, perturbed_sphere, PerturbationSpec, TriMesh, Vec3};

fn bumpy(level: u32, amplitude: f64) -> TriMesh {
    perturbed_sphere(&PerturbationSpec { lmax: 4, seed: 7, amplitude, coeffs: None, level })
        .unwrap()
        .mesh
}

#[test]
fn gradient_is_orthogonal_to_killing_fields_on_random_meshes() {
    for seed in 0..10 {
        let m = random_sphere_mesh(80, 0.1, seed).unwrap();
        let g = energy_gradient(&m).unwrap();
        let gsum: f64 = g.iter().map(|v| v.norm()).sum();
        assert!(g.iter().sum::<Vec3>().norm() <= 1e-8 * gsum);
        for field in [KillingField::Dilation, KillingField::Rotation(Vec3::new(0.3, -1.0, 0.2).normalize())] {
            assert!(conformal_killing_residual(&m, field).unwrap() <= 1e-8);
        }
    }
}

#[test]
fn accepted_step_lowers_energy() {
    let m = bumpy(3, 0.06);
    let cfg = FlowConfig::default();
    let s0 = FlowState::new(m, &cfg).unwrap();
    let s1 = step(&s0, &cfg).unwrap();
    assert!(s1.step_accepted);
    assert!(s1.energy < s0.energy);
    assert!(s1.t > s0.t);
    assert!(s1.dt_next <= cfg.dt_max);
}

#[test]
fn explicit_step_lowers_energy() {
    let cfg = FlowConfig { scheme: Scheme::Explicit, ..Default::default() };
    let s0 = FlowState::new(bumpy(2, 0.1), &cfg).unwrap();
    let s1 = step(&s0, &cfg).unwrap();
    assert!(s1.step_accepted && s1.energy < s0.energy);
}

#[test]
fn icosahedron_is_critical() {
    // Symmetry makes the gradient radial, and scale invariance then forces it to vanish.
    let m = icosphere(0).unwrap();
    let cfg = FlowConfig::default();
    let s = FlowState::new(m, &cfg).unwrap();
    assert!(s.grad_norm < 1e-12, "{}", s.grad_norm);
    assert!(!step(&s, &cfg).unwrap().step_accepted);
}

#[test]
fn energy_cap_is_enforced() {
    let m = ellipsoid(1.0, 1.0, 50.0, 3).unwrap();
    let cfg = FlowConfig::default();
    let s = FlowState::new(m.clone(), &cfg).unwrap();
    assert!(s.record.tracefree_energy > 8.0 * PI);
    assert!(matches!(step(&s, &cfg), Err(FlowError::EnergyCapExceeded { .. })));
    let err = run(&m, &cfg).unwrap_err();
    assert!(matches!(err.error, FlowError::EnergyCapExceeded { .. }));
    assert!(err.trace.rows.is_empty());
}

#[test]
fn invalid_config_is_rejected() {
    let m = icosphere(1).unwrap();
    for cfg in [
        FlowConfig { shrink: 1.5, ..Default::default() },
        FlowConfig { edge_len_band: (1.2, 2.0), ..Default::default() },
        FlowConfig { energy_cap: 9.0 * PI, ..Default::default() },
        FlowConfig { dt_init: Some(-1.0), ..Default::default() },
    ] {
        assert!(matches!(run(&m, &cfg).unwrap_err().error, FlowError::InvalidConfig(_)));
    }
}

#[test]
fn config_json_uses_snake_case_keys() {
    let cfg: FlowConfig = serde_json::from_str(r#"{"max_steps": 7, "scheme": "explicit"}"#).unwrap();
    assert_eq!(cfg.max_steps, 7);
    assert_eq!(cfg.scheme, Scheme::Explicit);
    assert!(serde_json::from_str::<FlowConfig>(r#"{"maxSteps": 7}"#).is_err());
}

#[test]
fn zero_steps_records_initial_state() {
    let cfg = FlowConfig { max_steps: 0, ..Default::default() };
    let out = run(&bumpy(2, 0.1), &cfg).unwrap();
    assert_eq!(out.stop, StopReason::MaxSteps);
    assert_eq!(out.trace.rows.len(), 1);
    assert_eq!(out.trace.a_accum(), 0.0);
}

#[test]
fn round_sphere_stops_at_once() {
    let out = run(&icosphere(3).unwrap(), &FlowConfig::default()).unwrap();
    assert_eq!(out.stop, StopReason::EnergyTol);
    assert_eq!(out.trace.rows.len(), 1);
}

#[test]
fn flow_is_monotone_and_rounds_the_surface() {
    let out = run(&bumpy(3, 0.08), &FlowConfig::default()).unwrap();
    let rows = &out.trace.rows;
    assert!(rows.len() > 3);
    assert!(rows.windows(2).all(|w| w[1].record.willmore <= w[0].record.willmore));
    assert!(rows.windows(2).all(|w| w[1].a_accum >= w[0].a_accum && w[1].sup_accum >= w[0].sup_accum));
    let last = out.trace.last().unwrap();
    assert!(last.record.tracefree_energy < rows[0].record.tracefree_energy * 0.1);
}

#[test]
fn trace_csv_has_one_row_per_state() {
    let cfg = FlowConfig { max_steps: 4, ..Default::default() };
    let out = run(&bumpy(2, 0.1), &cfg).unwrap();
    let mut buf = Vec::new();
    out.trace.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), out.trace.rows.len() + 1);
    assert!(lines[0].starts_with("step,t,dt,area,cx,cy,cz,q,volume,htot,willmore,energy,grad_norm"));

    let empty = flow::FlowTrace::new(Scheme::Explicit);
    let mut buf = Vec::new();
    empty.write_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
}

#[test]
fn evolution_identities_need_three_rows() {
    let cfg = FlowConfig { max_steps: 1, ..Default::default() };
    let out = run(&bumpy(2, 0.1), &cfg).unwrap();
    assert!(matches!(
        flow::volume_evolution_residual(&out.trace),
        Err(FlowError::InsufficientTrace { rows: 2 })
    ));
}

#[test]
fn long_edge_is_split() {
    let m = random_sphere_mesh(120, 0.02, 11).unwrap();
    let mean = m.mean_edge_length();
    let mut lengths: Vec<f64> = (0..m.num_edges()).map(|e| m.edge_length(e)).collect();
    lengths.sort_by(f64::total_cmp);
    let (longest, second) = (lengths[lengths.len() - 1], lengths[lengths.len() - 2]);
    assert!(longest > second);
    let hi = 0.5 * (longest + second) / mean;
    let cfg = FlowConfig { edge_len_band: (0.05, hi), tangential_smooth_weight: 0.0, ..Default::default() };
    let (r, stats) = remesh_with_stats(&m, &cfg).unwrap();
    assert_eq!(stats.splits, 1, "{stats:?}");
    assert_eq!(stats.collapses, 0);
    // Flips keep the counts.
    assert_eq!(r.num_vertices(), m.num_vertices() + 1);
    assert_eq!(r.num_edges(), m.num_edges() + 3);
    assert!(r.min_angle() >= m.min_angle() - 1e-12);
    assert_eq!(&r.vertices()[..m.num_vertices()], m.vertices());
}

#[test]
fn remeshing_never_lowers_the_minimum_angle() {
    for seed in 0..5 {
        let m = random_sphere_mesh(150, 0.05, seed).unwrap();
        let (r, _) = remesh_with_stats(&m, &FlowConfig::default()).unwrap();
        assert!(r.min_angle() >= m.min_angle() - 1e-12);
        assert_eq!(r.num_vertices() as i64 - r.num_edges() as i64 + r.num_faces() as i64, 2);
    }
}
