//! Experiments over families of nearly round surfaces.
//!
//! A [`FamilySpec`] describes an amplitude ladder `ε · 2^{-k}` of radially
//! perturbed spheres, an ellipsoid ladder and the flow settings. The
//! experiments run or measure every member and collect the ratios of each
//! monitored quantity to the initial tracefree energy `E₀`. A bound that is
//! linear in `E₀` predicts flat ratios, so each family is judged by the
//! spread `max / min` of every ratio.

mod emit;
mod experiments;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{FlowConfig, FlowError, FlowTrace, StopReason};
use crate::functionals::FunctionalRecord;
use crate::shapes::{PerturbationSpec, ShapeError, SphereFit};

pub use emit::{emit, write_csv, write_svg, EmitFormat};
pub use experiments::{
    deficit_experiment, dlm_experiment, ellipsoid_samples, ladder_samples, limit_report, limit_sphere_experiment,
    run_family, stability_experiment, stability_report, MeshSample, RungRun,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bounds {
    /// Largest allowed `max / min` of a ratio across the ladder.
    pub spread: f64,
    pub dlm: f64,
    /// Bound on `deficit / E`.
    pub deficit: f64,
    /// Smallest deficit tolerated as discretization error.
    pub deficit_floor: f64,
    /// Sphere fits with `rms > fit_rms · R` are rejected.
    pub fit_rms: f64,
    /// Bound on the measured constants of the one-sided volume and `Htot` bounds.
    pub one_sided: f64,
    /// Allowed relative change of the DLM ratio under one refinement.
    pub refinement: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self { spread: 4.0, dlm: 10.0, deficit: 5.0, deficit_floor: -0.02, fit_rms: 1e-2, one_sided: 10.0, refinement: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    /// Top rung; its amplitude is `ε`.
    pub perturbation: PerturbationSpec,
    /// Number of rungs `ε, ε/2, ε/4, ...`.
    #[serde(default = "default_rungs")]
    pub rungs: usize,
    /// `δ` values of the ellipsoids `(1, 1, 1 + δ)` for the DLM experiment.
    #[serde(default = "default_deltas")]
    pub ellipsoid_deltas: Vec<f64>,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub bounds: Bounds,
}

fn default_rungs() -> usize {
    4
}

fn default_deltas() -> Vec<f64> {
    vec![0.05, 0.1, 0.2, 0.4]
}

impl FamilySpec {
    pub fn new(perturbation: PerturbationSpec) -> Self {
        Self {
            perturbation,
            rungs: default_rungs(),
            ellipsoid_deltas: default_deltas(),
            flow: FlowConfig::default(),
            bounds: Bounds::default(),
        }
    }

    pub fn ladder(&self) -> Vec<PerturbationSpec> {
        (0..self.rungs)
            .map(|k| self.perturbation.with_amplitude(self.perturbation.amplitude / 2f64.powi(k as i32)))
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("rung {rung} (eps = {amplitude}) could not be generated: {reason}")]
    GenerationFailed { rung: usize, amplitude: f64, reason: String },
    #[error("rung {rung} diverged: {error}")]
    RunDiverged { rung: usize, error: FlowError, trace: Box<FlowTrace> },
    #[error("rung {rung}: sphere fit rms {rms:e} exceeds {limit:e} (flow did not reach a sphere)")]
    FitResidualTooLarge { rung: usize, rms: f64, limit: f64 },
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("i/o error on {0:?}: {1}")]
    Io(PathBuf, String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Stability,
    Limit,
    Dlm,
    Deficit,
}

/// `|ΔA|, ‖ΔC‖, |ΔQ|, |ΔV|, |ΔHtot|` or the matching limit-sphere gaps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Quintet {
    pub area: f64,
    pub barycenter: f64,
    pub quad_moment: f64,
    pub volume: f64,
    pub total_mean_curvature: f64,
}

impl Quintet {
    pub fn values(&self) -> [f64; 5] {
        [self.area, self.barycenter, self.quad_moment, self.volume, self.total_mean_curvature]
    }

    pub fn scaled(&self, s: f64) -> Self {
        let v = self.values().map(|x| x * s);
        Self { area: v[0], barycenter: v[1], quad_moment: v[2], volume: v[3], total_mean_curvature: v[4] }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Accumulators {
    pub a: f64,
    pub b: f64,
    pub sup: f64,
}

/// One flowed rung of a ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub rung: usize,
    pub spec: PerturbationSpec,
    pub e0: f64,
    pub initial: FunctionalRecord,
    #[serde(rename = "final")]
    pub final_record: FunctionalRecord,
    pub steps: usize,
    pub t_final: f64,
    pub stop: StopReason,
    pub converged: bool,
    pub fit: Option<SphereFit>,
    pub drifts: Quintet,
    /// `|R - 1|, ‖x - C(f₀)‖, |R² - Q(f₀)|, |4πR³/3 - V(f₀)|, |8πR - Htot(f₀)|`.
    pub limit_gaps: Option<Quintet>,
    /// The same gaps with the round-sphere values taken from the final mesh
    /// projected onto its fitted sphere, so both sides share the discretization.
    pub projected_gaps: Option<Quintet>,
    /// `V(f₀) - 4πR³/3` and `Htot(f₀) - 8πR`.
    pub one_sided: Option<[f64; 2]>,
    pub accumulators: Accumulators,
    pub max_gap_ratio: Option<f64>,
    pub remesh_events: usize,
    /// Summed remesh jumps of `A, C, Q, V, Htot`.
    pub remesh_jumps: [f64; 5],
}

/// One measured mesh of the DLM or deficit experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshRow {
    pub label: String,
    pub vertices: usize,
    pub energy: f64,
    pub dlm_ratio: Option<f64>,
    pub refined_dlm_ratio: Option<f64>,
    pub deficit: Option<f64>,
    pub deficit_ratio: Option<f64>,
    /// Reason the row is excluded from the verdicts, if any.
    pub flag: Option<String>,
}

/// `min`, `max` and `max / min` of one ratio across a family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyStat {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub spread: f64,
    /// Least-squares slope of the quantity against `E₀` through the origin.
    pub slope: f64,
}

impl FamilyStat {
    pub fn from_pairs(name: &str, pairs: &[(f64, f64)]) -> Self {
        let ratios: Vec<f64> = pairs.iter().map(|(e, y)| y / e).collect();
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sxx: f64 = pairs.iter().map(|(e, _)| e * e).sum();
        let sxy: f64 = pairs.iter().map(|(e, y)| e * y).sum();
        // A vanishing or sign-changing ratio cannot be flat.
        let spread = if ratios.is_empty() {
            f64::NAN
        } else if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        };
        Self { name: name.to_string(), min, max, spread, slope: sxy / sxx }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub bound: f64,
}

impl Verdict {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), pass: value <= bound, value, bound }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), pass: value >= bound, value, bound }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub family: Option<FamilySpec>,
    pub runs: Vec<RunEntry>,
    pub rows: Vec<MeshRow>,
    /// Ratio statistics that enter the verdicts.
    pub family_stats: Vec<FamilyStat>,
    /// Ratio statistics reported for analysis only.
    pub diagnostics: Vec<FamilyStat>,
    pub verdicts: Vec<Verdict>,
    pub pass: bool,
}

impl ExperimentReport {
    pub fn empty(kind: ExperimentKind) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            kind,
            family: None,
            runs: Vec::new(),
            rows: Vec::new(),
            family_stats: Vec::new(),
            diagnostics: Vec::new(),
            verdicts: Vec::new(),
            pass: true,
        }
    }

    pub fn stat(&self, name: &str) -> Option<&FamilyStat> {
        self.family_stats.iter().chain(&self.diagnostics).find(|s| s.name == name)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    fn finish(mut self) -> Self {
        self.pass = self.verdicts.iter().all(|v| v.pass);
        self
    }
}
