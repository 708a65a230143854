//! Deterministic scenario engine.
//!
//! Latency and quality of a configuration follow power laws in the scale
//! `r` and camera count `N'`:
//!
//! ```text
//! T(r, N') = t0 * r^alpha * (N'/N)^beta * (1 + eps),  eps ~ U(-eta, eta)
//! Q(r, N') = q_max * r^gamma * h(N')
//! ```
//!
//! where `h(N')` is the camera map's coverage ratio. The controller only sees
//! the observations; the form is never exposed to it.

mod calibrate;
mod scenario;
mod schedule;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camselect::{CamSelectError, CameraMap, MIN_CAMERAS};
use crate::controller::{init_controller, ControllerError, Observation, Phase, PipelineConfig};

pub use calibrate::{calibrate_model, fit_quality, LatencyFit, LatencySample, QualityFit};
pub use scenario::{synthetic_rig, Rig, RigParams, Scenario, ScenarioParams};
pub use schedule::{critical_path, reduction, simulate_collaboration, BackEnd, ScheduleStats, Stages};

pub const DEFAULT_ETA: f64 = 0.03;
pub const MAX_ETA: f64 = 0.2;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("calibration: {0}")]
    Calibration(String),
    #[error("invalid model: {0}")]
    BadModel(String),
    #[error("invalid task stream: {0}")]
    BadStream(String),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    CamSelect(#[from] CamSelectError),
    #[error("no configuration met the {deadline} s deadline")]
    Infeasible { deadline: f64, partial: Box<SimOutput> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioModel {
    pub n_cameras: usize,
    pub t0: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub q_max: f64,
    pub gamma: f64,
    /// `h(N')` for `N' = 3..=N`.
    pub camera_factor: Vec<f64>,
    pub stages: Stages,
    pub back_end: BackEnd,
}

impl ScenarioModel {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::BadModel(m.into()));
        if self.n_cameras < MIN_CAMERAS {
            return bad("need at least 3 cameras");
        }
        if !(self.t0.is_finite() && self.t0 > 0.0) {
            return bad("t0 must be positive");
        }
        if ![self.alpha, self.beta, self.gamma, self.q_max].iter().all(|&x| x.is_finite() && x > 0.0) {
            return bad("alpha, beta, gamma and q_max must be positive");
        }
        if !(0.0..=MAX_ETA).contains(&self.eta) {
            return bad("eta must lie in [0, 0.2]");
        }
        if self.camera_factor.len() != self.n_cameras + 1 - MIN_CAMERAS
            || self.camera_factor.iter().any(|&h| !(h.is_finite() && h >= 0.0))
        {
            return bad("camera factor needs one non-negative value per N' in [3, N]");
        }
        if !self.stages.is_valid() {
            return bad("stage durations must be positive");
        }
        let b = &self.back_end;
        let times = [b.bg_subtraction, b.golden_sfm, b.evaluation, b.transfer_delay];
        if !(times.iter().all(|&x| x.is_finite() && x >= 0.0) && b.t_bg.is_finite() && b.t_bg > 0.0) {
            return bad("back-end durations must be non-negative and t_bg positive");
        }
        Ok(())
    }

    /// Noise-free latency.
    pub fn latency(&self, r: f64, n_prime: usize) -> f64 {
        self.t0 * r.powf(self.alpha) * (n_prime as f64 / self.n_cameras as f64).powf(self.beta)
    }

    pub fn quality(&self, r: f64, n_prime: usize) -> f64 {
        let h = n_prime.checked_sub(MIN_CAMERAS).and_then(|i| self.camera_factor.get(i)).copied().unwrap_or(0.0);
        (self.q_max * r.powf(self.gamma) * h).clamp(0.0, 1.0)
    }

    /// Same model without latency noise.
    pub fn noise_free(&self) -> Self {
        Self { eta: 0.0, ..self.clone() }
    }
}

/// Camera factor `h(N')` from a camera map.
pub fn camera_factor(map: &CameraMap) -> Vec<f64> {
    (MIN_CAMERAS..=map.n_cameras).map(|np| map.coverage_ratio(np).unwrap_or(0.0)).collect()
}

/// Run one task with `config` and report what the controller would observe.
pub fn run_task(model: &ScenarioModel, config: &PipelineConfig, task_index: usize, rng: &mut ChaCha8Rng) -> Observation {
    let eps = if model.eta > 0.0 { rng.random_range(-model.eta..=model.eta) } else { 0.0 };
    Observation {
        task_index,
        t: model.latency(config.r, config.n_prime) * (1.0 + eps),
        q: model.quality(config.r, config.n_prime),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskStream {
    pub tasks: usize,
    pub deadline: f64,
    pub seed: u64,
}

impl TaskStream {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.tasks == 0 {
            return Err(SimError::BadStream("need at least one task".into()));
        }
        if !(self.deadline.is_finite() && self.deadline > 0.0) {
            return Err(SimError::BadStream(format!("deadline must be positive, got {}", self.deadline)));
        }
        Ok(())
    }
}

/// One executed task. `phase` is the controller phase that chose the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub task: usize,
    pub r: f64,
    pub n_prime: usize,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    pub phase: Phase,
    pub bg_updates_so_far: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub trace: Vec<TraceRow>,
    pub stats: ScheduleStats,
    /// Tasks spent searching (all tasks if the search never ended).
    pub search_steps: usize,
    pub search_done: bool,
    /// Configuration adopted when the search ended.
    pub adopted: Option<PipelineConfig>,
}

/// Drive the controller with [`run_task`] for every task of the stream and
/// replay the result on the two-node schedule, with tasks arriving once per
/// deadline period.
pub fn simulate_stream(model: &ScenarioModel, map: &CameraMap, stream: &TaskStream) -> Result<SimOutput, SimError> {
    model.validate()?;
    stream.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(stream.seed);
    let (mut state, mut config) = init_controller(map.clone(), model.n_cameras, stream.deadline)?;
    let mut trace = Vec::with_capacity(stream.tasks);
    let mut adopted = None;
    let mut failure = None;

    for task in 0..stream.tasks {
        let phase = state.phase;
        let obs = run_task(model, &config, task, &mut rng);
        trace.push(TraceRow {
            task,
            r: config.r,
            n_prime: config.n_prime,
            t: obs.t,
            q: obs.q,
            phase,
            bg_updates_so_far: 0,
        });
        match state.next_config(obs) {
            Ok(next) => {
                if phase == Phase::Searching && state.phase == Phase::Adjusting {
                    adopted = Some(next.clone());
                }
                config = next;
            }
            Err(ControllerError::InfeasibleDeadline) => {
                failure = Some(stream.deadline);
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }

    let stats = simulate_collaboration(&mut trace, &model.stages, &model.back_end, stream.deadline);
    let out = SimOutput {
        trace,
        stats,
        search_steps: state.search_steps,
        search_done: !state.is_searching(),
        adopted,
    };
    match failure {
        Some(deadline) => Err(SimError::Infeasible { deadline, partial: Box::new(out) }),
        None => Ok(out),
    }
}
