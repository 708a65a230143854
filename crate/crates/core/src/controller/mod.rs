//! Online configuration search.
//!
//! The controller emits one [`PipelineConfig`] per task and consumes the
//! [`Observation`] of that task. It first runs the full configuration, then
//! bisects the resolution scale for each camera count from `N` downwards,
//! keeping every configuration that met the deadline. Once the search ends it
//! adopts the best-quality configuration found and nudges its scale by a fixed
//! step per task so that the average latency settles on the deadline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camselect::{CameraMap, MIN_CAMERAS};

pub const R_FLOOR: f64 = 0.3;
pub const R_CEIL: f64 = 1.0;
pub const TAU_SEARCH: f64 = 0.01;
pub const TAU_ADJUST: f64 = 0.02;

/// Slack on the bisection stop test so that an interval of exactly
/// `TAU_SEARCH` stops despite rounding in the halving.
const STOP_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ControllerError {
    #[error("need at least {MIN_CAMERAS} cameras, got {0}")]
    TooFewCameras(usize),
    #[error("deadline must be positive and finite, got {0}")]
    BadDeadline(f64),
    #[error("camera map does not cover every N' in [{MIN_CAMERAS}, {0}]")]
    IncompleteMap(usize),
    #[error("observation needs T > 0 and Q in [0, 1], got T = {t}, Q = {q}")]
    BadObservation { t: f64, q: f64 },
    #[error("no configuration met the deadline during the search")]
    InfeasibleDeadline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub r: f64,
    pub n_prime: usize,
    /// Camera ids of `π(n_prime)`.
    pub cameras: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub task_index: usize,
    /// Processing time in seconds.
    pub t: f64,
    /// F-score of the task.
    pub q: f64,
}

impl Observation {
    pub fn new(task_index: usize, t: f64, q: f64) -> Result<Self, ControllerError> {
        if !(t.is_finite() && t > 0.0 && (0.0..=1.0).contains(&q)) {
            return Err(ControllerError::BadObservation { t, q });
        }
        Ok(Self { task_index, t, q })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Searching,
    Adjusting,
    /// Search ended without any feasible configuration.
    Infeasible,
}

/// A configuration that met the deadline when observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub r: f64,
    pub n_prime: usize,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub phase: Phase,
    pub deadline: f64,
    pub tau_search: f64,
    pub tau_adjust: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub r_star: f64,
    /// Scale of the outstanding configuration.
    pub r: f64,
    pub n_prime: usize,
    pub solutions: Vec<Solution>,
    pub camera_map: CameraMap,
    /// The outstanding configuration is the initial full-quality task.
    pub first_task: bool,
    /// The outstanding configuration is the lowest-scale probe of a level.
    pub probing: bool,
    /// Observations consumed while searching.
    pub search_steps: usize,
    pub adjust_sum_t: f64,
    pub adjust_tasks: usize,
}

/// Start the search. The first config is full scale with all cameras.
pub fn init_controller(
    camera_map: CameraMap,
    n: usize,
    deadline: f64,
) -> Result<(ControllerState, PipelineConfig), ControllerError> {
    if n < MIN_CAMERAS {
        return Err(ControllerError::TooFewCameras(n));
    }
    if !(deadline.is_finite() && deadline > 0.0) {
        return Err(ControllerError::BadDeadline(deadline));
    }
    let complete = camera_map.n_cameras == n
        && (MIN_CAMERAS..=n).all(|np| camera_map.get(np).is_some_and(|s| s.n_prime == np));
    if !complete {
        return Err(ControllerError::IncompleteMap(n));
    }
    let state = ControllerState {
        phase: Phase::Searching,
        deadline,
        tau_search: TAU_SEARCH,
        tau_adjust: TAU_ADJUST,
        r_min: R_FLOOR,
        r_max: R_CEIL,
        r_star: R_CEIL,
        r: R_CEIL,
        n_prime: n,
        solutions: Vec::new(),
        camera_map,
        first_task: true,
        probing: false,
        search_steps: 0,
        adjust_sum_t: 0.0,
        adjust_tasks: 0,
    };
    let config = state.config();
    Ok((state, config))
}

/// One step of the minor-adjustment law: move `r_star` up by `tau` when both
/// the running average and the latest time are under the deadline, down when
/// both are over, and leave it otherwise. Clamped to `[R_FLOOR, R_CEIL]`.
pub fn adjust_scale(r_star: f64, avg_t: f64, t: f64, deadline: f64, tau: f64) -> f64 {
    let next = if avg_t < deadline && t < deadline {
        r_star + tau
    } else if avg_t > deadline && t > deadline {
        r_star - tau
    } else {
        r_star
    };
    next.clamp(R_FLOOR, R_CEIL)
}

impl ControllerState {
    /// Configuration currently outstanding.
    pub fn config(&self) -> PipelineConfig {
        let cameras = self.camera_map.get(self.n_prime).map(|s| s.camera_ids.clone()).unwrap_or_default();
        PipelineConfig { r: self.r, n_prime: self.n_prime, cameras }
    }

    pub fn is_searching(&self) -> bool {
        self.phase == Phase::Searching
    }

    /// Feed the observation of the outstanding config and get the next one.
    ///
    /// In the adjusting phase this is [`Self::minor_adjustment`]. If the
    /// search ends with no feasible configuration the state holds
    /// `(R_FLOOR, π(3))` and every call returns `InfeasibleDeadline`.
    pub fn next_config(&mut self, obs: Observation) -> Result<PipelineConfig, ControllerError> {
        Observation::new(obs.task_index, obs.t, obs.q)?;
        match self.phase {
            Phase::Adjusting => Ok(self.minor_adjustment(obs)),
            Phase::Infeasible => Err(ControllerError::InfeasibleDeadline),
            Phase::Searching => self.search(obs),
        }
    }

    fn search(&mut self, obs: Observation) -> Result<PipelineConfig, ControllerError> {
        self.search_steps += 1;
        let feasible = obs.t <= self.deadline;

        if std::mem::take(&mut self.first_task) {
            if feasible {
                // Nothing can beat full scale with every camera.
                self.record(obs.q);
                return self.finish();
            }
            self.r = self.r_min;
            self.probing = true;
            return Ok(self.config());
        }

        let probing = std::mem::take(&mut self.probing);
        if feasible {
            self.r_min = self.r;
            self.record(obs.q);
        } else {
            if probing {
                // Even the lowest scale misses the deadline at this level.
                return self.descend();
            }
            self.r_max = self.r;
            let best_above = self.best_q(|s| s.n_prime > self.n_prime);
            if best_above.is_some_and(|b| obs.q <= b) {
                return self.finish();
            }
            if self.best_q(|_| true).is_some_and(|b| obs.q <= b) {
                return self.descend();
            }
        }

        if self.r_max - self.r_min <= self.tau_search + STOP_EPS {
            return self.descend();
        }
        self.r = (self.r_max + self.r_min) / 2.0;
        Ok(self.config())
    }

    fn record(&mut self, q: f64) {
        self.r_star = self.r;
        self.solutions.push(Solution { r: self.r, n_prime: self.n_prime, q });
    }

    fn best_q(&self, keep: impl Fn(&Solution) -> bool) -> Option<f64> {
        self.solutions.iter().filter(|s| keep(s)).map(|s| s.q).reduce(f64::max)
    }

    fn descend(&mut self) -> Result<PipelineConfig, ControllerError> {
        if self.n_prime <= MIN_CAMERAS {
            return self.finish();
        }
        self.n_prime -= 1;
        self.r_min = if self.solutions.is_empty() { R_FLOOR } else { self.r_star };
        self.r_max = R_CEIL;
        self.r = self.r_min;
        self.probing = true;
        Ok(self.config())
    }

    fn finish(&mut self) -> Result<PipelineConfig, ControllerError> {
        self.probing = false;
        let best = self.solutions.iter().copied().reduce(|a, b| {
            let key = |s: &Solution| (s.q, s.n_prime, s.r);
            if key(&b).partial_cmp(&key(&a)) == Some(std::cmp::Ordering::Greater) {
                b
            } else {
                a
            }
        });
        let Some(best) = best else {
            self.phase = Phase::Infeasible;
            self.n_prime = MIN_CAMERAS;
            self.r = R_FLOOR;
            return Err(ControllerError::InfeasibleDeadline);
        };
        self.phase = Phase::Adjusting;
        self.r_star = best.r;
        self.n_prime = best.n_prime;
        self.r = best.r;
        self.adjust_sum_t = 0.0;
        self.adjust_tasks = 0;
        Ok(self.config())
    }

    /// Apply the feedback law to `r_star`; the camera count stays fixed.
    pub fn minor_adjustment(&mut self, obs: Observation) -> PipelineConfig {
        self.adjust_sum_t += obs.t;
        self.adjust_tasks += 1;
        let avg = self.adjust_sum_t / self.adjust_tasks as f64;
        self.r_star = adjust_scale(self.r_star, avg, obs.t, self.deadline, self.tau_adjust);
        self.r = self.r_star;
        self.config()
    }

    /// Average processing time over the adjusting phase so far.
    pub fn adjust_average(&self) -> Option<f64> {
        (self.adjust_tasks > 0).then(|| self.adjust_sum_t / self.adjust_tasks as f64)
    }
}
