use std::f64::consts::PI;

use log::info;
use rayon::prelude::*;

use crate::flow::{run, FlowOutcome, StopReason};
use crate::functionals::{measure, FunctionalRecord, DLM_MIN_ENERGY};
use crate::geometry::vertex_geometry;
use crate::mesh::TriMesh;
use crate::shapes::{ellipsoid, fit_sphere, normalize_area, perturbed_sphere, PerturbationSpec, SphereFit};

use super::{
    Accumulators, Bounds, ExperimentKind, ExperimentReport, FamilySpec, FamilyStat, HarnessError, MeshRow, Quintet,
    RunEntry, Verdict,
};

const DRIFT_NAMES: [&str; 5] = ["area_drift", "barycenter_drift", "quad_moment_drift", "volume_drift", "htot_drift"];
const GAP_NAMES: [&str; 5] = ["radius_gap", "center_gap", "quad_moment_gap", "volume_gap", "htot_gap"];

/// A flowed rung together with the sphere fitted to its final mesh.
#[derive(Clone, Debug)]
pub struct RungRun {
    pub rung: usize,
    pub spec: PerturbationSpec,
    pub e0: f64,
    pub outcome: FlowOutcome,
    pub fit: SphereFit,
    /// Functionals of the final mesh projected onto the fitted sphere.
    pub projected: FunctionalRecord,
}

/// Generates every rung of the ladder and flows them concurrently.
pub fn run_family(family: &FamilySpec) -> Result<Vec<RungRun>, HarnessError> {
    let cap = family.flow.energy_cap;
    let mut meshes = Vec::new();
    for (rung, spec) in family.ladder().into_iter().enumerate() {
        let fail = |reason: String| HarnessError::GenerationFailed { rung, amplitude: spec.amplitude, reason };
        let p = perturbed_sphere(&spec).map_err(|e| fail(e.to_string()))?;
        if !(p.tracefree_energy < cap) {
            return Err(fail(format!("E0 = {} is not below the energy cap {cap}", p.tracefree_energy)));
        }
        meshes.push((rung, spec, p));
    }
    let runs: Vec<Result<RungRun, HarnessError>> = meshes
        .into_par_iter()
        .map(|(rung, spec, p)| {
            let outcome = run(&p.mesh, &family.flow).map_err(|f| HarnessError::RunDiverged {
                rung,
                error: f.error,
                trace: Box::new(f.trace),
            })?;
            let geom = vertex_geometry(&outcome.mesh).map_err(crate::shapes::ShapeError::from)?;
            let fit = fit_sphere(&outcome.mesh, &geom)?;
            let projected = outcome
                .mesh
                .map_positions(|p| fit.center + (p - fit.center).normalize() * fit.radius)
                .map_err(crate::shapes::ShapeError::from)?;
            let pg = vertex_geometry(&projected).map_err(crate::shapes::ShapeError::from)?;
            info!(
                "rung {rung}: eps = {}, E0 = {:.4e}, {} steps, stop {:?}",
                spec.amplitude,
                p.tracefree_energy,
                outcome.trace.rows.len() - 1,
                outcome.stop
            );
            Ok(RungRun { rung, spec, e0: p.tracefree_energy, outcome, fit, projected: measure(&projected, &pg) })
        })
        .collect();
    runs.into_iter().collect()
}

fn entry(r: &RungRun) -> RunEntry {
    let trace = &r.outcome.trace;
    let first = trace.first().expect("trace has the initial state");
    let last = trace.last().expect("trace has the initial state");
    let (i, f) = (&first.record, &last.record);
    let drifts = Quintet {
        area: (f.area - i.area).abs(),
        barycenter: (f.barycenter_vec() - i.barycenter_vec()).norm(),
        quad_moment: (f.quad_moment - i.quad_moment).abs(),
        volume: (f.volume - i.volume).abs(),
        total_mean_curvature: (f.total_mean_curvature - i.total_mean_curvature).abs(),
    };
    let (x, rad) = (r.fit.center, r.fit.radius);
    let sphere_v = 4.0 * PI * rad.powi(3) / 3.0;
    let sphere_h = 8.0 * PI * rad;
    let limit_gaps = Quintet {
        area: (rad - 1.0).abs(),
        barycenter: (x - i.barycenter_vec()).norm(),
        quad_moment: (rad * rad - i.quad_moment).abs(),
        volume: (sphere_v - i.volume).abs(),
        total_mean_curvature: (sphere_h - i.total_mean_curvature).abs(),
    };
    let p = &r.projected;
    let projected_gaps = Quintet {
        area: ((p.area / (4.0 * PI)).sqrt() - 1.0).abs(),
        barycenter: (p.barycenter_vec() - i.barycenter_vec()).norm(),
        quad_moment: (p.quad_moment - i.quad_moment).abs(),
        volume: (p.volume - i.volume).abs(),
        total_mean_curvature: (p.total_mean_curvature - i.total_mean_curvature).abs(),
    };
    RunEntry {
        rung: r.rung,
        spec: r.spec.clone(),
        e0: r.e0,
        initial: i.clone(),
        final_record: f.clone(),
        steps: last.step,
        t_final: last.t,
        stop: r.outcome.stop,
        converged: r.outcome.stop != StopReason::MaxSteps,
        fit: Some(r.fit),
        drifts,
        limit_gaps: Some(limit_gaps),
        projected_gaps: Some(projected_gaps),
        one_sided: Some([i.volume - sphere_v, i.total_mean_curvature - sphere_h]),
        accumulators: Accumulators { a: trace.a_accum(), b: trace.b_accum(), sup: trace.sup_accum() },
        max_gap_ratio: trace.max_gap_ratio(),
        remesh_events: trace.remesh_events.len(),
        remesh_jumps: trace.remesh_jumps(),
    }
}

/// `(E₀, value)` pairs of the runs whose `E₀` is large enough to divide by.
fn pairs(runs: &[RunEntry], value: impl Fn(&RunEntry) -> f64) -> Vec<(f64, f64)> {
    runs.iter().filter(|r| r.e0 > DLM_MIN_ENERGY).map(|r| (r.e0, value(r))).collect()
}

fn spread_checks(
    report: &mut ExperimentReport,
    names: &[&str],
    runs: &[RunEntry],
    value: impl Fn(&RunEntry, usize) -> f64,
    bound: f64,
) {
    for (k, name) in names.iter().enumerate() {
        let p = pairs(runs, |r| value(r, k));
        if p.is_empty() {
            continue;
        }
        let stat = FamilyStat::from_pairs(name, &p);
        report.verdicts.push(Verdict::at_most(format!("{name} spread"), stat.spread, bound));
        report.family_stats.push(stat);
    }
}

fn convergence_check(report: &mut ExperimentReport) {
    let stalled = report.runs.iter().filter(|r| !r.converged).count();
    report.verdicts.push(Verdict::at_most("unconverged runs", stalled as f64, 0.0));
}

/// Drift and accumulator ratios of an already flowed family.
pub fn stability_report(family: &FamilySpec, runs: &[RungRun]) -> ExperimentReport {
    let mut report = ExperimentReport::empty(ExperimentKind::Stability);
    report.family = Some(family.clone());
    report.runs = runs.iter().map(entry).collect();
    let entries = report.runs.clone();
    let bound = family.bounds.spread;
    spread_checks(&mut report, &DRIFT_NAMES, &entries, |r, k| r.drifts.values()[k], bound);
    convergence_check(&mut report);

    let acc = |r: &RunEntry, k: usize| [r.accumulators.a, r.accumulators.b, r.accumulators.sup][k];
    let infinite = entries.iter().filter(|r| (0..3).any(|k| !acc(r, k).is_finite())).count();
    report.verdicts.push(Verdict::at_most("non-finite accumulators", infinite as f64, 0.0));
    spread_checks(&mut report, &["a_accum", "b_accum", "sup_accum"], &entries, acc, bound);
    report.finish()
}

/// Limit-sphere gaps of an already flowed family.
pub fn limit_report(family: &FamilySpec, runs: &[RungRun]) -> Result<ExperimentReport, HarnessError> {
    for r in runs {
        let limit = family.bounds.fit_rms * r.fit.radius;
        if !(r.fit.rms <= limit) {
            return Err(HarnessError::FitResidualTooLarge { rung: r.rung, rms: r.fit.rms, limit });
        }
    }
    let mut report = ExperimentReport::empty(ExperimentKind::Limit);
    report.family = Some(family.clone());
    report.runs = runs.iter().map(entry).collect();
    let entries = report.runs.clone();
    let b = &family.bounds;
    spread_checks(&mut report, &GAP_NAMES, &entries, |r, k| r.limit_gaps.unwrap_or_default().values()[k], b.spread);
    convergence_check(&mut report);

    // Measured constants c in V(f₀) ≤ 4πR³/3 + c E₀ and Htot(f₀) ≤ 8πR + c E₀.
    for (k, name) in ["one-sided volume constant", "one-sided htot constant"].into_iter().enumerate() {
        let c = pairs(&entries, |r| r.one_sided.map_or(0.0, |o| o[k]))
            .iter()
            .map(|(e, d)| d / e)
            .fold(0.0, f64::max);
        report.verdicts.push(Verdict::at_most(name, c, b.one_sided));
    }
    for (k, name) in GAP_NAMES.iter().enumerate() {
        let p = pairs(&entries, |r| r.projected_gaps.unwrap_or_default().values()[k]);
        if !p.is_empty() {
            report.diagnostics.push(FamilyStat::from_pairs(&format!("projected_{name}"), &p));
        }
    }
    Ok(report.finish())
}

pub fn stability_experiment(family: &FamilySpec) -> Result<ExperimentReport, HarnessError> {
    Ok(stability_report(family, &run_family(family)?))
}

pub fn limit_sphere_experiment(family: &FamilySpec) -> Result<ExperimentReport, HarnessError> {
    limit_report(family, &run_family(family)?)
}

/// A mesh to measure, optionally with its once-refined counterpart.
#[derive(Clone, Debug)]
pub struct MeshSample {
    pub label: String,
    pub mesh: TriMesh,
    pub refined: Option<TriMesh>,
}

/// The ladder's initial meshes, with the next subdivision level when `refine` is set.
pub fn ladder_samples(family: &FamilySpec, refine: bool) -> Result<Vec<MeshSample>, HarnessError> {
    family
        .ladder()
        .into_iter()
        .enumerate()
        .map(|(rung, spec)| {
            let fail = |e: crate::shapes::ShapeError| HarnessError::GenerationFailed {
                rung,
                amplitude: spec.amplitude,
                reason: e.to_string(),
            };
            let mesh = perturbed_sphere(&spec).map_err(fail)?.mesh;
            let refined = if refine {
                Some(perturbed_sphere(&PerturbationSpec { level: spec.level + 1, ..spec.clone() }).map_err(fail)?.mesh)
            } else {
                None
            };
            Ok(MeshSample { label: format!("eps={}", spec.amplitude), mesh, refined })
        })
        .collect()
}

/// Ellipsoids `(1, 1, 1 + δ)` scaled to area `4π`.
pub fn ellipsoid_samples(deltas: &[f64], level: u32, refine: bool) -> Result<Vec<MeshSample>, HarnessError> {
    let make = |d: f64, level: u32| -> Result<TriMesh, HarnessError> {
        Ok(normalize_area(&ellipsoid(1.0, 1.0, 1.0 + d, level)?, 4.0 * PI)?)
    };
    deltas
        .iter()
        .map(|&d| {
            Ok(MeshSample {
                label: format!("ellipsoid(1,1,{})", 1.0 + d),
                mesh: make(d, level)?,
                refined: if refine { Some(make(d, level + 1)?) } else { None },
            })
        })
        .collect()
}

fn measured(mesh: &TriMesh) -> Result<FunctionalRecord, HarnessError> {
    let g = vertex_geometry(mesh).map_err(crate::shapes::ShapeError::from)?;
    Ok(measure(mesh, &g))
}

/// DLM ratio per mesh, its stability under refinement and the universal bound.
///
/// Rows with `E > 4π` only need a finite ratio.
pub fn dlm_experiment(samples: &[MeshSample], bounds: &Bounds) -> Result<ExperimentReport, HarnessError> {
    let mut report = ExperimentReport::empty(ExperimentKind::Dlm);
    for s in samples {
        let rec = measured(&s.mesh)?;
        let refined = s.refined.as_ref().map(measured).transpose()?;
        report.rows.push(MeshRow {
            label: s.label.clone(),
            vertices: s.mesh.num_vertices(),
            energy: rec.tracefree_energy,
            dlm_ratio: rec.dlm_ratio,
            refined_dlm_ratio: refined.and_then(|r| r.dlm_ratio),
            deficit: None,
            deficit_ratio: None,
            flag: rec.dlm_ratio.is_none().then(|| "zero_denominator".to_string()),
        });
    }
    if report.rows.is_empty() {
        return Ok(report);
    }
    let small = |r: &&MeshRow| r.energy <= 4.0 * PI;
    let max = report.rows.iter().filter(small).filter_map(|r| r.dlm_ratio).fold(0.0, f64::max);
    report.verdicts.push(Verdict::at_most("dlm ratio max", max, bounds.dlm));
    let non_finite = report
        .rows
        .iter()
        .filter(|r| !small(r))
        .filter(|r| !r.dlm_ratio.is_some_and(f64::is_finite))
        .count();
    report.verdicts.push(Verdict::at_most("non-finite large-energy ratios", non_finite as f64, 0.0));
    let change = report
        .rows
        .iter()
        .filter_map(|r| Some((r.refined_dlm_ratio? / r.dlm_ratio? - 1.0).abs()))
        .fold(0.0, f64::max);
    if report.rows.iter().any(|r| r.refined_dlm_ratio.is_some()) {
        report.verdicts.push(Verdict::at_most("dlm refinement change", change, bounds.refinement));
    }
    let pairs: Vec<(f64, f64)> =
        report.rows.iter().filter_map(|r| Some((r.energy, r.dlm_ratio? * r.energy))).collect();
    if !pairs.is_empty() {
        report.diagnostics.push(FamilyStat::from_pairs("dlm_ratio", &pairs));
    }
    Ok(report.finish())
}

/// Isoperimetric deficit per mesh and the ratio `deficit / E` across the family.
pub fn deficit_experiment(samples: &[MeshSample], bounds: &Bounds) -> Result<ExperimentReport, HarnessError> {
    let mut report = ExperimentReport::empty(ExperimentKind::Deficit);
    for s in samples {
        let rec = measured(&s.mesh)?;
        let ok = rec.volume > 0.0;
        let ratio = (ok && rec.tracefree_energy > DLM_MIN_ENERGY).then(|| rec.iso_deficit / rec.tracefree_energy);
        report.rows.push(MeshRow {
            label: s.label.clone(),
            vertices: s.mesh.num_vertices(),
            energy: rec.tracefree_energy,
            dlm_ratio: rec.dlm_ratio,
            refined_dlm_ratio: None,
            deficit: ok.then_some(rec.iso_deficit),
            deficit_ratio: ratio,
            flag: (!ok).then(|| "nonpositive_volume".to_string()),
        });
    }
    let pairs: Vec<(f64, f64)> =
        report.rows.iter().filter_map(|r| Some((r.energy, r.deficit_ratio? * r.energy))).collect();
    if pairs.is_empty() {
        return Ok(report);
    }
    let stat = FamilyStat::from_pairs("deficit_ratio", &pairs);
    report.verdicts.push(Verdict::at_most("deficit ratio max", stat.max, bounds.deficit));
    report.verdicts.push(Verdict::at_most("deficit ratio spread", stat.spread, bounds.spread));
    let min = report.rows.iter().filter_map(|r| r.deficit).fold(f64::INFINITY, f64::min);
    report.verdicts.push(Verdict::at_least("deficit min", min, bounds.deficit_floor));
    report.family_stats.push(stat);
    Ok(report.finish())
}
