use std::f64::consts::PI;

use willmore_core::flow::FlowConfig;
use willmore_core::harness::{
    deficit_experiment, dlm_experiment, ellipsoid_samples, emit, limit_sphere_experiment, stability_experiment,
    write_csv, write_svg, Bounds, EmitFormat, ExperimentKind, ExperimentReport, FamilySpec, HarnessError,
    MeshSample,
};
use willmore_core::shapes::{analytic_functionals, HarmonicCoeff};
use willmore_core::{ellipsoid, icosphere, AnalyticSurface, PerturbationSpec};

fn family(amplitude: f64, level: u32) -> FamilySpec {
    FamilySpec::new(PerturbationSpec { lmax: 4, seed: 7, amplitude, coeffs: None, level })
}

#[test]
fn round_rung_does_not_move() {
    let fam = FamilySpec { rungs: 1, ..family(0.0, 3) };
    let report = stability_experiment(&fam).unwrap();
    let run = &report.runs[0];
    assert_eq!(run.e0, 0.0);
    assert!(run.drifts.values().iter().all(|d| *d <= 1e-6), "{:?}", run.drifts);
    let fit = run.fit.unwrap();
    assert!((fit.radius - 1.0).abs() <= 1e-2);
    assert!(run.limit_gaps.unwrap().barycenter <= 1e-6);
}

#[test]
fn high_energy_rung_is_rejected() {
    let spec = PerturbationSpec {
        lmax: 8,
        seed: 1,
        amplitude: 0.4,
        coeffs: Some(vec![HarmonicCoeff { l: 8, m: 0, value: 1.0 }]),
        level: 4,
    };
    let fam = FamilySpec::new(spec);
    match stability_experiment(&fam) {
        Err(HarnessError::GenerationFailed { rung: 0, reason, .. }) => assert!(reason.contains("energy cap"), "{reason}"),
        other => panic!("expected GenerationFailed, got {other:?}"),
    }
}

#[test]
fn unconverged_flow_fails_the_fit() {
    let fam = FamilySpec {
        rungs: 1,
        flow: FlowConfig { max_steps: 3, ..Default::default() },
        ..family(0.3, 3)
    };
    assert!(matches!(limit_sphere_experiment(&fam), Err(HarnessError::FitResidualTooLarge { rung: 0, .. })));
}

#[test]
fn stability_report_is_complete_and_deterministic() {
    let fam = family(0.1, 3);
    let a = stability_experiment(&fam).unwrap();
    assert_eq!(a.runs.len(), 4);
    assert!(a.runs.iter().all(|r| r.converged));
    for name in ["area_drift", "barycenter_drift", "quad_moment_drift", "volume_drift", "htot_drift", "a_accum"] {
        let s = a.stat(name).unwrap();
        assert!(s.min.is_finite() && s.max.is_finite() && s.spread >= 1.0, "{s:?}");
    }
    let b = stability_experiment(&fam).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    // Halving ε roughly quarters E₀.
    let e: Vec<f64> = a.runs.iter().map(|r| r.e0).collect();
    assert!(e.windows(2).all(|w| w[1] < w[0] / 2.0), "{e:?}");
}

#[test]
fn limit_report_has_one_sided_constants() {
    let fam = FamilySpec { rungs: 2, ..family(0.1, 4) };
    let r = limit_sphere_experiment(&fam).unwrap();
    assert_eq!(r.kind, ExperimentKind::Limit);
    assert!(r.verdict("one-sided volume constant").is_some());
    assert!(r.verdict("one-sided htot constant").is_some());
    assert!(r.stat("projected_radius_gap").is_some());
}

#[test]
fn emitted_artifacts() {
    let fam = family(0.1, 2);
    let report = stability_experiment(&fam).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = emit(&report, dir.path(), "stab", &[EmitFormat::Csv, EmitFormat::Json, EmitFormat::Svg]).unwrap();
    let csv = std::fs::read_to_string(&paths[0]).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("rung,eps,e0,converged"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&paths[1]).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["runs"].as_array().unwrap().len(), 4);
    let svg = std::fs::read_to_string(&paths[2]).unwrap();
    assert_eq!(svg.matches("<circle").count(), 4);
    assert!(svg.contains(">E0<") && svg.contains(">drift<"));

    // Ratios recomputed from the CSV alone reproduce the reported spread.
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let ratios: Vec<f64> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            r[8].parse::<f64>().unwrap() / r[2].parse::<f64>().unwrap()
        })
        .collect();
    let spread = ratios.iter().copied().fold(0.0, f64::max) / ratios.iter().copied().fold(f64::INFINITY, f64::min);
    assert!((spread - report.stat("area_drift").unwrap().spread).abs() < 1e-12 * spread);
}

#[test]
fn empty_report_artifacts() {
    let report = ExperimentReport::empty(ExperimentKind::Stability);
    let mut buf = Vec::new();
    write_csv(&report, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
    let json: serde_json::Value = serde_json::to_value(&report).unwrap();
    assert_eq!(json["runs"], serde_json::json!([]));
    let mut svg = Vec::new();
    write_svg(&report, &mut svg).unwrap();
    assert_eq!(String::from_utf8(svg).unwrap().matches("<circle").count(), 0);
}

#[test]
fn dlm_on_ellipsoids() {
    let samples = ellipsoid_samples(&[0.05, 0.1, 0.2, 0.4], 4, true).unwrap();
    let report = dlm_experiment(&samples, &Bounds::default()).unwrap();
    assert_eq!(report.rows.len(), 4);
    for row in &report.rows {
        let r = row.dlm_ratio.unwrap();
        assert!(r > 0.0 && r <= 10.0, "{row:?}");
    }
    assert!(report.verdict("dlm ratio max").unwrap().pass);
}

#[test]
fn dlm_large_energy_only_needs_a_finite_ratio() {
    let m = ellipsoid(1.0, 1.0, 6.0, 3).unwrap();
    let samples = vec![MeshSample { label: "long".into(), mesh: m, refined: None }];
    let report = dlm_experiment(&samples, &Bounds::default()).unwrap();
    assert!(report.rows[0].energy > 4.0 * PI);
    assert!(report.verdict("non-finite large-energy ratios").unwrap().pass);
    assert_eq!(report.verdict("dlm ratio max").unwrap().value, 0.0);
}

#[test]
fn round_sphere_has_no_dlm_ratio() {
    let samples = vec![MeshSample { label: "round".into(), mesh: icosphere(3).unwrap(), refined: None }];
    let report = dlm_experiment(&samples, &Bounds::default()).unwrap();
    assert_eq!(report.rows[0].flag.as_deref(), Some("zero_denominator"));
}

#[test]
fn deficit_of_round_sphere_and_ellipsoid() {
    let round = vec![MeshSample { label: "round".into(), mesh: icosphere(5).unwrap(), refined: None }];
    let report = deficit_experiment(&round, &Bounds::default()).unwrap();
    assert!(report.rows[0].deficit.unwrap().abs() <= 0.02);

    let samples = ellipsoid_samples(&[0.25], 5, false).unwrap();
    let report = deficit_experiment(&samples, &Bounds::default()).unwrap();
    let oracle = analytic_functionals(&AnalyticSurface::Ellipsoid { a: 1.0, b: 1.0, c: 1.25 }, 64).unwrap();
    let d = report.rows[0].deficit.unwrap();
    assert!((d - oracle.iso_deficit).abs() <= 0.02 * oracle.iso_deficit, "{d} vs {}", oracle.iso_deficit);
}

#[test]
fn family_spec_json() {
    let fam: FamilySpec = serde_json::from_str(
        r#"{"perturbation": {"lmax": 4, "seed": 7, "eps": 0.06, "level": 5}, "flow": {"max_steps": 100}}"#,
    )
    .unwrap();
    assert_eq!(fam.rungs, 4);
    assert_eq!(fam.flow.max_steps, 100);
    assert_eq!(fam.bounds.spread, 4.0);
    let amps: Vec<f64> = fam.ladder().iter().map(|s| s.amplitude).collect();
    assert_eq!(amps, vec![0.06, 0.03, 0.015, 0.0075]);
}
