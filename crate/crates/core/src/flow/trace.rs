//! Per-step records, space-time accumulators and evolution-identity checks.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::functionals::FunctionalRecord;
use crate::geometry::{pl_gradients, GeometryError, VertexGeometry};
use crate::mesh::{TriMesh, Vec3};

use super::{FlowError, Scheme};

/// Ratio between the discrete flow velocity `-grad_i / Ā_i` and the
/// continuum `-(ΔH + |A°|²H) ν`. The first variation of `¼∫|H⃗|²` is
/// `½∫(ΔH + |A°|²H)⟨φ, ν⟩`, so the mass-normalized gradient moves at half speed.
pub const FLOW_SPEED: f64 = 0.5;

/// Space-time integrands evaluated on one snapshot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Integrands {
    /// `∫|∇H|² + |A°|²H² dμ`.
    pub alpha: f64,
    /// `∫|A°|²|H| + |∇H||A°| dμ`.
    pub beta: f64,
    /// `‖A°‖⁴_∞`.
    pub sup4: f64,
}

pub(crate) fn integrands(mesh: &TriMesh, geom: &VertexGeometry) -> Result<Integrands, GeometryError> {
    let grad_h = pl_gradients(mesh, &geom.scalar_h)?;
    let mut alpha = 0.0;
    let mut beta = 0.0;
    for (fi, (f, g)) in mesh.faces().iter().zip(&grad_h).enumerate() {
        let area = mesh.face_area(fi);
        let gn2 = g.norm_squared();
        let ao = f.iter().map(|&v| geom.tracefree_sq[v].sqrt()).sum::<f64>() / 3.0;
        alpha += area * gn2;
        beta += area * gn2.sqrt() * ao;
    }
    for i in 0..geom.len() {
        let (a, h, t) = (geom.area[i], geom.scalar_h[i], geom.tracefree_sq[i]);
        alpha += a * t * h * h;
        beta += a * t * h.abs();
    }
    let sup = geom.tracefree_sq.iter().copied().fold(0.0, f64::max);
    Ok(Integrands { alpha, beta, sup4: sup * sup })
}

/// One accepted state of the flow.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub t: f64,
    /// Step size that produced this state (0 for the initial state).
    pub dt: f64,
    pub record: FunctionalRecord,
    /// `(Σ |grad_i|²/Ā_i / A)^{1/2}`.
    pub grad_norm: f64,
    pub a_accum: f64,
    pub b_accum: f64,
    pub sup_accum: f64,
    /// The mesh was remeshed right before this state was recorded.
    pub remesh_flag: bool,
    /// Increments whenever the connectivity changes.
    pub epoch: usize,
    pub integrands: Integrands,
    /// `‖A°‖²_∞ / (A Σ Ā_i |grad_i/Ā_i|²)`, undefined at exact critical points.
    pub gap_ratio: Option<f64>,
    /// `½ ∫|f|² dμ` by the edge-midpoint rule.
    pub half_sq_moment: f64,
    /// `FLOW_SPEED · Σ Ā_i |A°|²_i H_i`, the predicted `dV/dt`.
    pub volume_rate: f64,
    /// `-Σ u(f_i) Ā_i ⟨H⃗_i, v_i⟩` for `u = x¹` and `u = ½|x|²`, with `v` the
    /// velocity of the step leaving this state.
    pub moment_rate: Option<[f64; 2]>,
}

/// A remeshing event and the functional jumps it caused.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RemeshEvent {
    pub step: usize,
    pub before: FunctionalRecord,
    pub after: FunctionalRecord,
    pub splits: usize,
    pub collapses: usize,
    pub flips: usize,
    pub smoothed: usize,
    /// The result changed the Willmore energy by more than 5% and was discarded.
    pub reverted: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowTrace {
    pub scheme: Scheme,
    pub rows: Vec<TraceRow>,
    pub remesh_events: Vec<RemeshEvent>,
}

#[derive(Serialize)]
struct CsvRow {
    step: usize,
    t: f64,
    dt: f64,
    area: f64,
    cx: f64,
    cy: f64,
    cz: f64,
    q: f64,
    volume: f64,
    htot: f64,
    willmore: f64,
    energy: f64,
    grad_norm: f64,
    sup_aosq: f64,
    a_accum: f64,
    b_accum: f64,
    sup_accum: f64,
    remesh_flag: u8,
}

/// Test function `u` for the moment evolution identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentField {
    /// `u = x¹`, whose gradient is the translation `e₁`.
    Coordinate,
    /// `u = ½|x|²`, whose gradient is the dilation `x`.
    HalfSquare,
}

/// One central-difference sample of an evolution identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateSample {
    pub t: f64,
    pub measured: f64,
    pub predicted: f64,
}

impl FlowTrace {
    pub fn new(scheme: Scheme) -> Self {
        Self { scheme, rows: Vec::new(), remesh_events: Vec::new() }
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn first(&self) -> Option<&TraceRow> {
        self.rows.first()
    }

    pub fn a_accum(&self) -> f64 {
        self.last().map_or(0.0, |r| r.a_accum)
    }

    pub fn b_accum(&self) -> f64 {
        self.last().map_or(0.0, |r| r.b_accum)
    }

    pub fn sup_accum(&self) -> f64 {
        self.last().map_or(0.0, |r| r.sup_accum)
    }

    /// Largest gap ratio seen along the run.
    pub fn max_gap_ratio(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.gap_ratio).reduce(f64::max)
    }

    /// Sum of the per-event jumps `after - before` of area, barycenter, quadratic moment, volume and total mean curvature.
    pub fn remesh_jumps(&self) -> [f64; 5] {
        let mut j = [0.0; 5];
        for e in self.remesh_events.iter().filter(|e| !e.reverted) {
            j[0] += e.after.area - e.before.area;
            j[1] += (e.after.barycenter_vec() - e.before.barycenter_vec()).norm();
            j[2] += e.after.quad_moment - e.before.quad_moment;
            j[3] += e.after.volume - e.before.volume;
            j[4] += e.after.total_mean_curvature - e.before.total_mean_curvature;
        }
        j
    }

    /// Appends a state, advancing the accumulators by the trapezoid rule.
    pub(crate) fn push(&mut self, mut row: TraceRow) {
        if let Some(prev) = self.rows.last() {
            let dt = row.t - prev.t;
            let (p, q) = (prev.integrands, row.integrands);
            row.a_accum = prev.a_accum + 0.5 * dt * (p.alpha + q.alpha);
            row.b_accum = prev.b_accum + 0.5 * dt * (p.alpha + p.beta + q.alpha + q.beta);
            row.sup_accum = prev.sup_accum + 0.5 * dt * (p.sup4 + q.sup4);
        } else {
            row.a_accum = 0.0;
            row.b_accum = 0.0;
            row.sup_accum = 0.0;
        }
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            w.write_record([
                "step", "t", "dt", "area", "cx", "cy", "cz", "q", "volume", "htot", "willmore", "energy",
                "grad_norm", "sup_aosq", "a_accum", "b_accum", "sup_accum", "remesh_flag",
            ])?;
        }
        for r in &self.rows {
            let c = r.record.barycenter;
            w.serialize(CsvRow {
                step: r.step,
                t: r.t,
                dt: r.dt,
                area: r.record.area,
                cx: c[0],
                cy: c[1],
                cz: c[2],
                q: r.record.quad_moment,
                volume: r.record.volume,
                htot: r.record.total_mean_curvature,
                willmore: r.record.willmore,
                energy: r.record.tracefree_energy,
                grad_norm: r.grad_norm,
                sup_aosq: r.record.sup_tracefree,
                a_accum: r.a_accum,
                b_accum: r.b_accum,
                sup_accum: r.sup_accum,
                remesh_flag: r.remesh_flag as u8,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), FlowError> {
        let file = std::fs::File::create(path).map_err(|e| FlowError::Io(path.to_path_buf(), e.to_string()))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| FlowError::Io(path.to_path_buf(), e.to_string()))
    }

    /// Central differences of `series` at every interior row whose
    /// neighbours share its connectivity, paired with `predicted`.
    fn rate_samples(
        &self,
        series: impl Fn(&TraceRow) -> f64,
        predicted: impl Fn(&TraceRow) -> Option<f64>,
    ) -> Vec<RateSample> {
        self.rows
            .windows(3)
            .filter(|w| w[0].epoch == w[1].epoch && w[1].epoch == w[2].epoch && !w[1].remesh_flag && !w[2].remesh_flag)
            .filter_map(|w| {
                let pred = predicted(&w[1])?;
                let (h1, h2) = (w[1].t - w[0].t, w[2].t - w[1].t);
                if !(h1 > 0.0 && h2 > 0.0) {
                    return None;
                }
                // Second-order three-point derivative on a nonuniform grid.
                let (y0, y1, y2) = (series(&w[0]), series(&w[1]), series(&w[2]));
                let d = -h2 / (h1 * (h1 + h2)) * y0 + (h2 - h1) / (h1 * h2) * y1 + h1 / (h2 * (h1 + h2)) * y2;
                Some(RateSample { t: w[1].t, measured: d, predicted: pred })
            })
            .collect()
    }

    /// `d/dt ∫u∘f dμ` against `∫u∘f ⟨H⃗, W⃗⟩ dμ`.
    pub fn moment_rate_samples(&self, u: MomentField) -> Vec<RateSample> {
        match u {
            MomentField::Coordinate => self.rate_samples(
                |r| r.record.area * r.record.barycenter[0],
                |r| r.moment_rate.map(|m| m[0]),
            ),
            MomentField::HalfSquare => {
                self.rate_samples(|r| r.half_sq_moment, |r| r.moment_rate.map(|m| m[1]))
            }
        }
    }

    /// `dV/dt` against `FLOW_SPEED · ∫|A°|²H dμ`.
    pub fn volume_rate_samples(&self) -> Vec<RateSample> {
        self.rate_samples(|r| r.record.volume, |r| Some(r.volume_rate))
    }
}

/// `‖measured - predicted‖₂ / ‖predicted‖₂` over all samples.
pub fn relative_rate_residual(samples: &[RateSample]) -> Option<f64> {
    let num: f64 = samples.iter().map(|s| (s.measured - s.predicted).powi(2)).sum();
    let den: f64 = samples.iter().map(|s| s.predicted.powi(2)).sum();
    (den > 0.0).then(|| (num / den).sqrt())
}

/// Lemma-type moment identity residual; needs three consecutive accepted steps at fixed connectivity.
pub fn moment_evolution_residual(trace: &FlowTrace, u: MomentField) -> Result<f64, FlowError> {
    let samples = trace.moment_rate_samples(u);
    if samples.is_empty() {
        return Err(FlowError::InsufficientTrace { rows: trace.rows.len() });
    }
    relative_rate_residual(&samples).ok_or(FlowError::InsufficientTrace { rows: trace.rows.len() })
}

/// Volume evolution residual, same conventions as [`moment_evolution_residual`].
pub fn volume_evolution_residual(trace: &FlowTrace) -> Result<f64, FlowError> {
    let samples = trace.volume_rate_samples();
    if samples.is_empty() {
        return Err(FlowError::InsufficientTrace { rows: trace.rows.len() });
    }
    relative_rate_residual(&samples).ok_or(FlowError::InsufficientTrace { rows: trace.rows.len() })
}

/// `-Σ u(f_i) Ā_i ⟨H⃗_i, v_i⟩` for both moment fields.
pub(crate) fn moment_rates(mesh: &TriMesh, geom: &VertexGeometry, velocity: &[Vec3]) -> [f64; 2] {
    let mut out = [0.0; 2];
    for (i, p) in mesh.vertices().iter().enumerate() {
        let s = -geom.area[i] * geom.mean_curv_vec[i].dot(&velocity[i]);
        out[0] += p.x * s;
        out[1] += 0.5 * p.norm_squared() * s;
    }
    out
}
