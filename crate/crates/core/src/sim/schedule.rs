use serde::{Deserialize, Serialize};

use super::TraceRow;

/// Front-end stage durations, in seconds or as fractions of a task's time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stages {
    pub sfm: f64,
    pub split: f64,
    pub mvs_fg: f64,
    pub merge: f64,
}

impl Stages {
    pub fn total(&self) -> f64 {
        self.sfm + self.split + self.mvs_fg + self.merge
    }

    pub fn is_valid(&self) -> bool {
        [self.sfm, self.split, self.mvs_fg, self.merge].iter().all(|&x| x.is_finite() && x > 0.0)
    }

    /// Same proportions, summing to 1.
    pub fn normalized(&self) -> Stages {
        self.scaled(1.0 / self.total())
    }

    pub fn scaled(&self, k: f64) -> Stages {
        Stages { sfm: self.sfm * k, split: self.split * k, mvs_fg: self.mvs_fg * k, merge: self.merge * k }
    }
}

/// Back-end work per task and the background reconstruction it fills idle
/// time with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackEnd {
    pub bg_subtraction: f64,
    /// SfM at full scale with every camera, for the reference cloud.
    pub golden_sfm: f64,
    pub evaluation: f64,
    /// Length of one background dense reconstruction.
    pub t_bg: f64,
    /// Delay applied to every message between the nodes.
    pub transfer_delay: f64,
}

impl BackEnd {
    /// Busy time per task before the idle window opens: subtraction, mask
    /// transfer, golden SfM, evaluation.
    pub fn busy(&self) -> f64 {
        self.bg_subtraction + self.transfer_delay + self.golden_sfm + self.evaluation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleStats {
    /// Critical-path latency of each task (sum of its stage durations).
    pub critical_path: Vec<f64>,
    /// Back-end idle window of each task.
    pub idle: Vec<f64>,
    /// Time at which each completed background cloud reaches the front end.
    pub bg_pushes: Vec<f64>,
    pub bg_completed: usize,
    pub avg_t: f64,
    pub avg_q: f64,
}

/// Front-end chain for one task: SfM, split, foreground MVS, merge.
pub fn critical_path(stages: &Stages) -> f64 {
    stages.total()
}

/// Relative latency saving of `total` against `baseline`.
pub fn reduction(total: f64, baseline: f64) -> f64 {
    1.0 - total / baseline
}

/// Event replay of the two nodes. Task `i` arrives at `i * period`. The back
/// end serves each task, then spends the idle window until the next arrival
/// on background reconstruction; progress carries across windows and a
/// finished cloud is pushed to the front end and a new one started.
///
/// The final task's idle window is counted up to the arrival that would
/// follow it, so every task contributes one full period.
pub fn simulate_collaboration(trace: &mut [TraceRow], stages: &Stages, back: &BackEnd, period: f64) -> ScheduleStats {
    let fractions = stages.normalized();
    let mut free_at = 0.0f64;
    let mut progress = 0.0f64;
    let mut stats = ScheduleStats {
        critical_path: Vec::with_capacity(trace.len()),
        idle: Vec::with_capacity(trace.len()),
        bg_pushes: Vec::new(),
        bg_completed: 0,
        avg_t: 0.0,
        avg_q: 0.0,
    };
    for (i, row) in trace.iter_mut().enumerate() {
        stats.critical_path.push(critical_path(&fractions.scaled(row.t)));

        let arrival = i as f64 * period;
        let next_arrival = arrival + period;
        let start = free_at.max(arrival);
        let served = start + back.busy();
        let idle = (next_arrival - served).max(0.0);
        let mut clock = served;
        let mut left = idle;
        while left > 0.0 && progress + left >= back.t_bg {
            let need = back.t_bg - progress;
            clock += need;
            left -= need;
            progress = 0.0;
            stats.bg_completed += 1;
            stats.bg_pushes.push(clock + back.transfer_delay);
        }
        progress += left;
        free_at = served;
        stats.idle.push(idle);
        row.bg_updates_so_far = stats.bg_completed;
    }
    if !trace.is_empty() {
        let n = trace.len() as f64;
        stats.avg_t = trace.iter().map(|r| r.t).sum::<f64>() / n;
        stats.avg_q = trace.iter().map(|r| r.q).sum::<f64>() / n;
    }
    stats
}
