use std::collections::BTreeMap;

use super::{CamSelectError, CameraMap, SelectionSolution, VisibilityMatrix, MIN_CAMERAS};

/// Above this many cameras `solve_p2` falls back to greedy selection.
pub const EXACT_CAMERA_LIMIT: usize = 24;

/// Maximize the number of points covered by at least two of exactly
/// `n_prime` chosen cameras.
///
/// Exact for up to [`EXACT_CAMERA_LIMIT`] cameras via depth-first
/// branch-and-bound; ties resolve to the lexicographically smallest set of
/// camera columns. Larger rigs use [`solve_p2_greedy`] and are flagged
/// `exact = false`.
pub fn solve_p2(matrix: &VisibilityMatrix, n_prime: usize) -> Result<SelectionSolution, CamSelectError> {
    let n = matrix.n_cameras();
    if !(MIN_CAMERAS..=n).contains(&n_prime) {
        return Err(CamSelectError::NPrimeOutOfRange { n_prime, n });
    }
    if n > EXACT_CAMERA_LIMIT {
        return solve_p2_greedy(matrix, n_prime);
    }
    let rows = weighted_rows(matrix);
    let mut search = Search { rows: &rows, n, target: n_prime, best: None };
    search.descend(0, 0, 0);
    let (_, mask) = search.best.expect("n_prime <= n always admits a subset");
    Ok(SelectionSolution::from_mask(matrix, mask, true))
}

/// Greedy selection: add the camera with the largest marginal gain in
/// two-camera coverage, breaking ties by one-camera coverage gain and then
/// by lowest column. Not guaranteed optimal.
pub fn solve_p2_greedy(matrix: &VisibilityMatrix, n_prime: usize) -> Result<SelectionSolution, CamSelectError> {
    let n = matrix.n_cameras();
    if !(MIN_CAMERAS..=n).contains(&n_prime) {
        return Err(CamSelectError::NPrimeOutOfRange { n_prime, n });
    }
    let mask = greedy_masks(matrix, n_prime).pop().expect("n_prime >= 3");
    Ok(SelectionSolution::from_mask(matrix, mask, false))
}

/// Nested greedy subsets of size 1..=up_to.
fn greedy_masks(matrix: &VisibilityMatrix, up_to: usize) -> Vec<u64> {
    let rows = weighted_rows(matrix);
    let score = |mask: u64| -> (usize, usize) {
        rows.iter().fold((0, 0), |(two, one), &(r, w)| match (r & mask).count_ones() {
            0 => (two, one),
            1 => (two, one + w),
            _ => (two + w, one + w),
        })
    };
    let mut mask = 0u64;
    let mut out = Vec::with_capacity(up_to);
    for _ in 0..up_to {
        let mut best: Option<(usize, (usize, usize))> = None;
        for cam in 0..matrix.n_cameras() {
            if mask >> cam & 1 == 1 {
                continue;
            }
            let s = score(mask | 1 << cam);
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((cam, s));
            }
        }
        mask |= 1 << best.expect("fewer cameras chosen than available").0;
        out.push(mask);
    }
    out
}

/// Solve for every `N'` in `[3, N]`.
pub fn build_camera_map(matrix: &VisibilityMatrix) -> Result<CameraMap, CamSelectError> {
    let n = matrix.n_cameras();
    let entries = if n > EXACT_CAMERA_LIMIT {
        greedy_masks(matrix, n)
            .into_iter()
            .skip(MIN_CAMERAS - 1)
            .map(|mask| SelectionSolution::from_mask(matrix, mask, false))
            .collect()
    } else {
        (MIN_CAMERAS..=n).map(|np| solve_p2(matrix, np)).collect::<Result<Vec<_>, _>>()?
    };
    Ok(CameraMap { n_cameras: n, camera_ids: matrix.camera_ids().to_vec(), entries })
}

/// Identical rows collapsed into (row, multiplicity); rows seen by fewer
/// than two cameras can never be covered and are dropped.
fn weighted_rows(matrix: &VisibilityMatrix) -> Vec<(u64, usize)> {
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for &r in matrix.rows() {
        if r.count_ones() >= 2 {
            *counts.entry(r).or_default() += 1;
        }
    }
    counts.into_iter().collect()
}

struct Search<'a> {
    rows: &'a [(u64, usize)],
    n: usize,
    target: usize,
    best: Option<(usize, u64)>,
}

impl Search<'_> {
    /// Cameras `0..next` are decided; `chosen` holds the included ones.
    /// Including before excluding visits complete subsets in lexicographic
    /// order, so the first subset reaching the optimum is the tie-break
    /// winner and later equal ones can be pruned.
    fn descend(&mut self, next: usize, chosen: u64, count: usize) {
        if count == self.target {
            let value = self.value(chosen);
            if self.best.is_none_or(|(b, _)| value > b) {
                self.best = Some((value, chosen));
            }
            return;
        }
        if self.n - next < self.target - count {
            return;
        }
        if let Some((best, _)) = self.best {
            if self.upper_bound(next, chosen, count) <= best {
                return;
            }
        }
        self.descend(next + 1, chosen | 1 << next, count + 1);
        self.descend(next + 1, chosen, count);
    }

    fn value(&self, chosen: u64) -> usize {
        self.rows.iter().filter(|(r, _)| (r & chosen).count_ones() >= 2).map(|(_, w)| w).sum()
    }

    /// A point can still end up covered only if its chosen count plus the
    /// undecided cameras that see it (capped by the free slots) reaches two.
    fn upper_bound(&self, next: usize, chosen: u64, count: usize) -> usize {
        let slots = (self.target - count) as u32;
        let undecided = (u64::MAX >> (64 - self.n)) & !((1u64 << next) - 1);
        self.rows
            .iter()
            .filter(|(r, _)| (r & chosen).count_ones() + (r & undecided).count_ones().min(slots) >= 2)
            .map(|(_, w)| w)
            .sum()
    }
}
