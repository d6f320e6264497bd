//! Discrete Willmore flow.
//!
//! The flow is gradient descent of the discrete energy
//! `W = ¼ Σ Ā_i |H⃗_i|²`, with the gradient divided by the vertex areas so
//! that time carries the parabolic `length⁴` scale. Two schemes share the
//! same Armijo backtracking:
//!
//! - [`Scheme::Explicit`] moves by `-τ grad_i / Ā_i`;
//! - [`Scheme::SemiImplicit`] solves `(M + ½τ S M⁻¹ S) v = -grad` and moves by `τ v`,
//!   where `S` is the cotangent stiffness and `M = diag(Ā)`. The bilaplacian
//!   is the Hessian of `W` with frozen cotangent weights, so stiff modes are
//!   damped and the step size is not bound by `h⁴`.

mod energy;
mod remesh;
mod solver;
mod trace;

use std::f64::consts::PI;
use std::path::PathBuf;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functionals::{measure, FunctionalRecord};
use crate::geometry::{vertex_geometry, CotanLaplacian, GeometryError, VertexGeometry};
use crate::mesh::{MeshError, TriMesh, Vec3};

pub use energy::{conformal_killing_residual, discrete_energy, energy_gradient, willmore_operator_pointwise, KillingField};
pub use remesh::{remesh, remesh_with_stats, RemeshStats};
pub use trace::{
    moment_evolution_residual, relative_rate_residual, volume_evolution_residual, FlowTrace, Integrands,
    MomentField, RateSample, RemeshEvent, TraceRow, FLOW_SPEED,
};

use solver::StepOperator;

/// Remesh results that change `W` by more than this fraction are discarded.
pub const REMESH_ENERGY_TOLERANCE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Explicit,
    #[default]
    SemiImplicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub max_steps: usize,
    /// Initial step; `None` means `0.1 · (mean edge)⁴`.
    pub dt_init: Option<f64>,
    /// Largest step the controller grows to.
    pub dt_max: f64,
    /// Step growth after an accepted step (at least 1).
    pub dt_grow: f64,
    pub armijo_factor: f64,
    pub shrink: f64,
    /// Stop when `(Σ |grad_i|²/Ā_i / A)^{1/2}` falls below this.
    pub grad_tol: f64,
    /// Stop when the tracefree energy falls below this.
    pub energy_tol: f64,
    /// Accepted steps between remeshing passes; 0 disables remeshing.
    pub remesh_every: usize,
    /// `(lo, hi)` multiples of the mean edge length.
    pub edge_len_band: (f64, f64),
    pub tangential_smooth_weight: f64,
    pub energy_cap: f64,
    pub scheme: Scheme,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            max_steps: 5000,
            dt_init: None,
            dt_max: 2e-3,
            dt_grow: 2.0,
            armijo_factor: 0.1,
            shrink: 0.5,
            grad_tol: 1e-6 / (4.0 * PI).sqrt(),
            energy_tol: 1e-4,
            remesh_every: 25,
            edge_len_band: (0.5, 2.0),
            tangential_smooth_weight: 0.5,
            energy_cap: 8.0 * PI,
            scheme: Scheme::SemiImplicit,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |msg: String| Err(FlowError::InvalidConfig(msg));
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad(format!("shrink {} must lie in (0, 1)", self.shrink));
        }
        if !(self.armijo_factor > 0.0 && self.armijo_factor < 1.0) {
            return bad(format!("armijo_factor {} must lie in (0, 1)", self.armijo_factor));
        }
        let (lo, hi) = self.edge_len_band;
        if !(lo > 0.0 && lo < 1.0 && hi > 1.0) {
            return bad(format!("edge_len_band ({lo}, {hi}) must satisfy 0 < lo < 1 < hi"));
        }
        if !(self.energy_cap > 0.0 && self.energy_cap <= 8.0 * PI) {
            return bad(format!("energy_cap {} must lie in (0, 8π]", self.energy_cap));
        }
        if !(0.0..=1.0).contains(&self.tangential_smooth_weight) {
            return bad(format!("tangential_smooth_weight {} must lie in [0, 1]", self.tangential_smooth_weight));
        }
        if let Some(dt) = self.dt_init {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt_init {dt} must be positive"));
            }
        }
        if !(self.dt_max > 0.0) || !(self.dt_grow >= 1.0) {
            return bad(format!("dt_max {} must be positive and dt_grow {} at least 1", self.dt_max, self.dt_grow));
        }
        if !(self.grad_tol >= 0.0 && self.energy_tol >= 0.0) {
            return bad("tolerances must be nonnegative".into());
        }
        Ok(())
    }

    /// `dt_init`, or `0.1 · (mean edge)⁴` when unset.
    pub fn initial_dt(&self, mesh: &TriMesh) -> f64 {
        self.dt_init.unwrap_or_else(|| 0.1 * mesh.mean_edge_length().powi(4)).min(self.dt_max)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("tracefree energy {energy} is not below the cap {cap}")]
    EnergyCapExceeded { energy: f64, cap: f64 },
    #[error("line search found no acceptable step at step {step} (gradient norm {grad_norm:e})")]
    LineSearchStalled { step: usize, grad_norm: f64 },
    #[error("remeshing failed: {0}")]
    RemeshFailed(String),
    #[error("trace with {rows} rows has no three consecutive states at fixed connectivity")]
    InsufficientTrace { rows: usize },
    #[error("invalid flow config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("mesh became invalid: {0}")]
    Mesh(String),
    #[error("linear solve failed: {0}")]
    Solver(String),
    #[error("i/o error on {0:?}: {1}")]
    Io(PathBuf, String),
}

impl From<MeshError> for FlowError {
    fn from(e: MeshError) -> Self {
        FlowError::Mesh(e.to_string())
    }
}

/// Everything known about one point on the discrete flow.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub mesh: TriMesh,
    pub geom: VertexGeometry,
    pub record: FunctionalRecord,
    /// Discrete Willmore energy `W`.
    pub energy: f64,
    /// `∂W/∂f_i`.
    pub raw_gradient: Vec<Vec3>,
    /// `grad_i / Ā_i`, the L² gradient density.
    pub gradient: Vec<Vec3>,
    pub grad_norm: f64,
    pub step_accepted: bool,
    pub dt_used: f64,
    /// Step the controller will try next.
    pub dt_next: f64,
    /// Reference step; the line search gives up below `1e-14 · dt_init`.
    pub dt_init: f64,
    /// Velocity `(f_new - f_old) / τ` of the step that produced this state.
    pub velocity: Option<Vec<Vec3>>,
}

impl FlowState {
    pub fn new(mesh: TriMesh, config: &FlowConfig) -> Result<Self, FlowError> {
        let dt = config.initial_dt(&mesh);
        Self::at(mesh, 0.0, dt, dt)
    }

    fn at(mesh: TriMesh, t: f64, dt_next: f64, dt_init: f64) -> Result<Self, FlowError> {
        let geom = vertex_geometry(&mesh)?;
        let record = measure(&mesh, &geom);
        let raw_gradient = energy_gradient(&mesh)?;
        let gradient: Vec<Vec3> = raw_gradient.iter().zip(&geom.area).map(|(g, a)| g / *a).collect();
        let grad_norm = (raw_gradient.iter().zip(&geom.area).map(|(g, a)| g.norm_squared() / a).sum::<f64>()
            / record.area)
            .sqrt();
        let energy = discrete_energy(&mesh)?;
        Ok(Self {
            t,
            mesh,
            geom,
            record,
            energy,
            raw_gradient,
            gradient,
            grad_norm,
            step_accepted: false,
            dt_used: 0.0,
            dt_next,
            dt_init,
            velocity: None,
        })
    }

    fn unchanged(&self) -> Self {
        Self { step_accepted: false, dt_used: 0.0, velocity: None, ..self.clone() }
    }

    /// `‖A°‖²_∞ / (A Σ Ā_i |grad_i/Ā_i|²)`.
    pub fn gap_ratio(&self) -> Option<f64> {
        let den = self.record.area * self.grad_norm.powi(2) * self.record.area;
        (den > 0.0).then(|| self.record.sup_tracefree / den)
    }

    fn direction(&self, config: &FlowConfig, tau: f64, lap: Option<&CotanLaplacian>) -> Result<Vec<Vec3>, FlowError> {
        match (config.scheme, lap) {
            (Scheme::SemiImplicit, Some(lap)) => {
                let op = StepOperator { lap, mass: &self.geom.area, weight: 0.5 * tau };
                let rhs: Vec<Vec3> = self.raw_gradient.iter().map(|g| -g).collect();
                Ok(op.solve(&rhs)?.into_iter().map(|v| v * tau).collect())
            }
            _ => Ok(self.gradient.iter().map(|g| -g * tau).collect()),
        }
    }
}

/// One backtracking step.
///
/// Returns the state unchanged with `step_accepted = false` when the
/// gradient norm is already below `grad_tol`, or when no step size above
/// `1e-14 · dt_init` satisfies the Armijo condition
/// `W(f + d) ≤ W(f) + c ⟨grad, d⟩`.
pub fn step(state: &FlowState, config: &FlowConfig) -> Result<FlowState, FlowError> {
    config.validate()?;
    if !(state.record.tracefree_energy < config.energy_cap) {
        return Err(FlowError::EnergyCapExceeded { energy: state.record.tracefree_energy, cap: config.energy_cap });
    }
    if state.grad_norm < config.grad_tol {
        return Ok(state.unchanged());
    }
    let lap = match config.scheme {
        Scheme::SemiImplicit => Some(CotanLaplacian::new(&state.mesh)?),
        Scheme::Explicit => None,
    };
    let floor = 1e-14 * state.dt_init;
    let mut tau = state.dt_next;
    while tau >= floor {
        let dir = state.direction(config, tau, lap.as_ref())?;
        let predicted: f64 = dir.iter().zip(&state.raw_gradient).map(|(d, g)| d.dot(g)).sum();
        if predicted < 0.0 {
            let moved: Vec<Vec3> = state.mesh.vertices().iter().zip(&dir).map(|(p, d)| p + d).collect();
            if let Ok(mesh) = state.mesh.with_positions(moved) {
                if let Ok(w) = discrete_energy(&mesh) {
                    if w <= state.energy + config.armijo_factor * predicted {
                        let next_dt = (tau * config.dt_grow).min(config.dt_max);
                        let mut next = FlowState::at(mesh, state.t + tau, next_dt, state.dt_init)?;
                        next.step_accepted = true;
                        next.dt_used = tau;
                        next.velocity = Some(dir.iter().map(|d| d / tau).collect());
                        return Ok(next);
                    }
                }
            }
        }
        tau *= config.shrink;
    }
    Ok(state.unchanged())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradTol,
    EnergyTol,
    MaxSteps,
}

#[derive(Clone, Debug)]
pub struct FlowOutcome {
    pub trace: FlowTrace,
    pub mesh: TriMesh,
    pub stop: StopReason,
}

/// A failed run, carrying everything recorded before the failure.
#[derive(Clone, Debug, Error)]
#[error("{error} (after {} recorded states)", trace.rows.len())]
pub struct FlowFailure {
    pub error: FlowError,
    pub trace: FlowTrace,
    pub mesh: TriMesh,
}

fn trace_row(state: &FlowState, step: usize, epoch: usize, remesh_flag: bool) -> Result<TraceRow, FlowError> {
    Ok(TraceRow {
        step,
        t: state.t,
        dt: state.dt_used,
        record: state.record.clone(),
        grad_norm: state.grad_norm,
        a_accum: 0.0,
        b_accum: 0.0,
        sup_accum: 0.0,
        remesh_flag,
        epoch,
        integrands: trace::integrands(&state.mesh, &state.geom)?,
        gap_ratio: state.gap_ratio(),
        half_sq_moment: 0.5 * crate::functionals::position_second_moment(&state.mesh),
        volume_rate: FLOW_SPEED
            * (0..state.geom.len())
                .map(|i| state.geom.area[i] * state.geom.tracefree_sq[i] * state.geom.scalar_h[i])
                .sum::<f64>(),
        moment_rate: None,
    })
}

/// Runs the flow until the energy or gradient tolerance is met or `max_steps` accepted steps are taken.
pub fn run(mesh: &TriMesh, config: &FlowConfig) -> Result<FlowOutcome, FlowFailure> {
    let mut trace = FlowTrace::new(config.scheme);
    let fail = |error: FlowError, trace: FlowTrace, mesh: &TriMesh| FlowFailure { error, trace, mesh: mesh.clone() };
    if let Err(e) = config.validate() {
        return Err(fail(e, trace, mesh));
    }
    let mut state = match FlowState::new(mesh.clone(), config) {
        Ok(s) => s,
        Err(e) => return Err(fail(e, trace, mesh)),
    };
    if !(state.record.tracefree_energy < config.energy_cap) {
        let e = FlowError::EnergyCapExceeded { energy: state.record.tracefree_energy, cap: config.energy_cap };
        return Err(fail(e, trace, mesh));
    }
    let mut epoch = 0;
    match trace_row(&state, 0, epoch, false) {
        Ok(row) => trace.push(row),
        Err(e) => return Err(fail(e, trace, mesh)),
    }

    let mut steps = 0;
    let stop = loop {
        if state.record.tracefree_energy < config.energy_tol {
            break StopReason::EnergyTol;
        }
        if state.grad_norm < config.grad_tol {
            break StopReason::GradTol;
        }
        if steps >= config.max_steps {
            break StopReason::MaxSteps;
        }
        let next = match step(&state, config) {
            Ok(n) => n,
            Err(e) => return Err(fail(e, trace, &state.mesh)),
        };
        if !next.step_accepted {
            let e = FlowError::LineSearchStalled { step: steps, grad_norm: state.grad_norm };
            return Err(fail(e, trace, &state.mesh));
        }
        if let (Some(row), Some(v)) = (trace.rows.last_mut(), next.velocity.as_ref()) {
            row.moment_rate = Some(trace::moment_rates(&state.mesh, &state.geom, v));
        }
        steps += 1;
        state = next;

        let mut remeshed = false;
        if config.remesh_every > 0 && steps % config.remesh_every == 0 {
            match remesh_state(&state, config, steps) {
                Ok(Some((new_state, event, topo))) => {
                    remeshed = !event.reverted;
                    if remeshed {
                        state = new_state;
                        epoch += topo as usize;
                    }
                    trace.remesh_events.push(event);
                }
                Ok(None) => {}
                Err(e) => return Err(fail(e, trace, &state.mesh)),
            }
        }
        match trace_row(&state, steps, epoch, remeshed) {
            Ok(row) => trace.push(row),
            Err(e) => return Err(fail(e, trace, &state.mesh)),
        }
        debug!(
            "step {steps}: t = {:.4e}, dt = {:.3e}, W = {:.10}, E = {:.4e}, |g| = {:.3e}",
            state.t, state.dt_used, state.energy, state.record.tracefree_energy, state.grad_norm
        );
    };
    info!(
        "flow stopped ({stop:?}) after {steps} steps at t = {:.4e}, E = {:.4e}",
        state.t, state.record.tracefree_energy
    );
    Ok(FlowOutcome { trace, mesh: state.mesh, stop })
}

/// Remeshes the state's mesh; `None` when nothing changed. The third entry
/// reports whether the connectivity changed.
fn remesh_state(
    state: &FlowState,
    config: &FlowConfig,
    step: usize,
) -> Result<Option<(FlowState, RemeshEvent, bool)>, FlowError> {
    let (mesh, stats) = remesh_with_stats(&state.mesh, config)?;
    if !stats.changed() {
        return Ok(None);
    }
    let new_state = FlowState::at(mesh, state.t, state.dt_next, state.dt_init)?;
    let rel = (new_state.energy - state.energy).abs() / state.energy;
    let reverted = rel > REMESH_ENERGY_TOLERANCE;
    if reverted {
        warn!("remesh at step {step} changed W by {:.2}%; reverted", 100.0 * rel);
    }
    let event = RemeshEvent {
        step,
        before: state.record.clone(),
        after: new_state.record.clone(),
        splits: stats.splits,
        collapses: stats.collapses,
        flips: stats.flips,
        smoothed: stats.smoothed,
        reverted,
    };
    debug!("remesh at step {step}: {stats:?}, dW = {:.3e}", new_state.energy - state.energy);
    Ok(Some((new_state, event, stats.topology_changed())))
}
