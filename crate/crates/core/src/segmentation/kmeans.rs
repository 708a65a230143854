use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KMeansError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("k = {k} exceeds the number of points ({n})")]
    TooFewPoints { k: usize, n: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult<const D: usize> {
    pub centroids: Vec<[f64; D]>,
    /// Cluster index of every input point.
    pub assignment: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after each Lloyd iteration; non-increasing.
    pub inertia_history: Vec<f64>,
}

impl<const D: usize> KMeansResult<D> {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment.iter().enumerate().filter(move |(_, &c)| c == cluster).map(|(i, _)| i)
    }
}

pub(crate) fn dist2<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest<const D: usize>(p: &[f64; D], centroids: &[[f64; D]]) -> (usize, f64) {
    let mut best = (0, dist2(p, &centroids[0]));
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let d = dist2(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means++ seeding: first centre uniform, the rest drawn proportionally to
/// squared distance from the nearest chosen centre. When every point already
/// coincides with a centre, the lowest-index unchosen point is taken.
fn seed_plus_plus<const D: usize>(points: &[[f64; D]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; D]> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &points[first])).collect();

    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            chosen.iter().position(|&c| !c).expect("k <= n")
        };
        chosen[pick] = true;
        let c = points[pick];
        for (w, p) in d2.iter_mut().zip(points) {
            *w = w.min(dist2(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd's algorithm from k-means++ seeding.
///
/// Runs until the assignment stops changing or [`MAX_ITERATIONS`] is reached.
/// Distance ties go to the lower cluster index. A cluster left empty after
/// assignment is re-seeded with the point farthest from its own centroid,
/// taken from a cluster with more than one member, so every centroid keeps
/// at least one member.
pub fn kmeans<const D: usize>(points: &[[f64; D]], k: usize, seed: u64) -> Result<KMeansResult<D>, KMeansError> {
    let n = points.len();
    if k == 0 {
        return Err(KMeansError::ZeroK);
    }
    if k > n {
        return Err(KMeansError::TooFewPoints { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(points, k, &mut rng);
    let mut assignment: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    let mut iterations = 0;

    for iter in 1..=MAX_ITERATIONS {
        let mut next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
        reseed_empty(points, &mut next, &mut centroids);
        let changed = next != assignment;
        assignment = next;
        centroids = means(points, &assignment, k);
        history.push(inertia(points, &assignment, &centroids));
        iterations = iter;
        if !changed {
            break;
        }
    }

    Ok(KMeansResult {
        inertia: *history.last().expect("at least one iteration"),
        centroids,
        assignment,
        iterations,
        inertia_history: history,
    })
}

fn reseed_empty<const D: usize>(points: &[[f64; D]], assignment: &mut [usize], centroids: &mut [[f64; D]]) {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    for &c in assignment.iter() {
        counts[c] += 1;
    }
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            let c = assignment[i];
            if counts[c] < 2 {
                continue;
            }
            let d = dist2(p, &centroids[c]);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        let (i, _) = best.expect("k <= n leaves a cluster with spare members");
        counts[assignment[i]] -= 1;
        assignment[i] = j;
        counts[j] = 1;
        centroids[j] = points[i];
    }
}

fn means<const D: usize>(points: &[[f64; D]], assignment: &[usize], k: usize) -> Vec<[f64; D]> {
    let mut sums = vec![[0.0; D]; k];
    let mut counts = vec![0usize; k];
    for (p, &c) in points.iter().zip(assignment) {
        for (s, v) in sums[c].iter_mut().zip(p) {
            *s += v;
        }
        counts[c] += 1;
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        for v in s.iter_mut() {
            *v /= n as f64;
        }
    }
    sums
}

fn inertia<const D: usize>(points: &[[f64; D]], assignment: &[usize], centroids: &[[f64; D]]) -> f64 {
    points.iter().zip(assignment).map(|(p, &c)| dist2(p, &centroids[c])).sum()
}
