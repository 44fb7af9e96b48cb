//! Lloyd's k-means on 2D points with seeded farthest-point initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct KMeans {
    pub centroids: Vec<[f64; 2]>,
    pub assignment: Vec<usize>,
    /// Index of the member nearest each centroid.
    pub medoids: Vec<usize>,
    /// Sum of squared distances to the assigned centroid after each iteration.
    pub objective: Vec<f64>,
}

#[inline]
fn d2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    dx * dx + dy * dy
}

fn farthest_point_init(points: &[[f64; 2]], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.len();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut nearest: Vec<f64> = points.iter().map(|p| d2(*p, points[chosen[0]])).collect();
    let mut taken = vec![false; n];
    taken[chosen[0]] = true;
    while chosen.len() < k {
        let mut best = None;
        for (i, d) in nearest.iter().enumerate() {
            if taken[i] {
                continue;
            }
            if best.is_none_or(|(_, bd)| *d > bd) {
                best = Some((i, *d));
            }
        }
        let Some((next, _)) = best else { break };
        taken[next] = true;
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(d2(*p, points[next]));
        }
    }
    chosen
}

fn assign(points: &[[f64; 2]], centroids: &[[f64; 2]], out: &mut [usize]) -> bool {
    let mut changed = false;
    for (p, a) in points.iter().zip(out.iter_mut()) {
        let mut best = 0;
        let mut bd = f64::INFINITY;
        for (j, c) in centroids.iter().enumerate() {
            let d = d2(*p, *c);
            if d < bd {
                bd = d;
                best = j;
            }
        }
        if *a != best {
            *a = best;
            changed = true;
        }
    }
    changed
}

fn objective(points: &[[f64; 2]], centroids: &[[f64; 2]], assignment: &[usize]) -> f64 {
    points.iter().zip(assignment).map(|(p, a)| d2(*p, centroids[*a])).sum()
}

/// Clusters `points` into `min(k, n)` groups. Deterministic for a fixed seed.
pub fn kmeans(points: &[[f64; 2]], k: usize, max_iters: usize, seed: u64) -> KMeans {
    let n = points.len();
    let k = k.min(n);
    if k == 0 {
        return KMeans { centroids: vec![], assignment: vec![0; n], medoids: vec![], objective: vec![] };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<[f64; 2]> = farthest_point_init(points, k, &mut rng).iter().map(|i| points[*i]).collect();
    let mut assignment = vec![usize::MAX; n];
    let mut history = Vec::new();
    for _ in 0..max_iters.max(1) {
        let changed = assign(points, &centroids, &mut assignment);
        if !changed && !history.is_empty() {
            break;
        }
        let mut sums = vec![[0.0f64; 3]; k];
        for (p, a) in points.iter().zip(&assignment) {
            sums[*a][0] += p[0];
            sums[*a][1] += p[1];
            sums[*a][2] += 1.0;
        }
        for (c, s) in centroids.iter_mut().zip(&sums) {
            // empty clusters keep their previous centroid
            if s[2] > 0.0 {
                *c = [s[0] / s[2], s[1] / s[2]];
            }
        }
        history.push(objective(points, &centroids, &assignment));
    }
    let mut medoids = vec![usize::MAX; k];
    let mut best = vec![f64::INFINITY; k];
    for (i, (p, a)) in points.iter().zip(&assignment).enumerate() {
        let d = d2(*p, centroids[*a]);
        if d < best[*a] {
            best[*a] = d;
            medoids[*a] = i;
        }
    }
    // an emptied cluster falls back to the point nearest its centroid
    for (j, m) in medoids.iter_mut().enumerate() {
        if *m == usize::MAX {
            *m = (0..n)
                .min_by(|a, b| d2(points[*a], centroids[j]).total_cmp(&d2(points[*b], centroids[j])))
                .unwrap_or(0);
        }
    }
    KMeans { centroids, assignment, medoids, objective: history }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn saturation_gives_every_point_its_cluster() {
        let pts = [[0.0, 0.0], [5.0, 0.0], [0.0, 7.0], [9.0, 9.0]];
        let km = kmeans(&pts, 4, 10, 3);
        let mut m = km.medoids.clone();
        m.sort_unstable();
        assert_eq!(m, vec![0, 1, 2, 3]);
    }

    #[test]
    fn two_blobs_split() {
        let mut pts = Vec::new();
        for i in 0..10 {
            pts.push([i as f64 * 0.1, 0.0]);
            pts.push([100.0 + i as f64 * 0.1, 0.0]);
        }
        let km = kmeans(&pts, 2, 20, 0);
        let a = km.assignment[0];
        assert!(pts.iter().zip(&km.assignment).all(|(p, c)| (p[0] < 50.0) == (*c == a)));
    }

    proptest! {
        #[test]
        fn objective_never_increases(
            pts in proptest::collection::vec((0.0f64..100.0, 0.0f64..100.0), 5..80),
            k in 1usize..6, seed in 0u64..1000,
        ) {
            let pts: Vec<[f64; 2]> = pts.into_iter().map(|(a, b)| [a, b]).collect();
            let km = kmeans(&pts, k, 50, seed);
            for w in km.objective.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9 * w[0].max(1.0));
            }
            let again = kmeans(&pts, k, 50, seed);
            prop_assert_eq!(km.medoids, again.medoids);
        }
    }
}
