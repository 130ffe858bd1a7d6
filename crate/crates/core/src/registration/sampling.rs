use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::Point3;

/// `count` distinct indices from `0..n`, sorted; all of them when `count >= n`.
pub fn sample_indices(n: usize, count: usize, seed: u64) -> Vec<usize> {
    if count >= n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, count).into_vec();
    idx.sort_unstable();
    idx
}

/// Greedy farthest-point subsample of `count` indices. The first index is
/// drawn from `seed`; later ties resolve to the lowest index.
pub fn farthest_point_sampling(points: &[Point3], count: usize, seed: u64) -> Vec<usize> {
    let n = points.len();
    if count >= n {
        return (0..n).collect();
    }
    if count == 0 {
        return Vec::new();
    }
    let first = sample_indices(n, 1, seed)[0];
    let mut chosen = Vec::with_capacity(count);
    chosen.push(first);
    let mut d2: Vec<f64> = points.iter().map(|p| (p - points[first]).norm_squared()).collect();
    while chosen.len() < count {
        let mut best = 0;
        for i in 1..n {
            if d2[i] > d2[best] {
                best = i;
            }
        }
        chosen.push(best);
        let q = points[best];
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min((p - q).norm_squared());
        }
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices_are_deterministic_and_distinct() {
        let a = sample_indices(1000, 50, 7);
        assert_eq!(a, sample_indices(1000, 50, 7));
        let mut b = a.clone();
        b.dedup();
        assert_eq!(b.len(), 50);
        assert_eq!(sample_indices(10, 50, 1), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn fps_spreads_out() {
        let pts: Vec<Point3> = (0..101).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let s = farthest_point_sampling(&pts, 3, 42);
        // The second pick is always the extreme farthest from the start.
        let far = if s[0] <= 50 { 100 } else { 0 };
        assert_eq!(s[1], far);
        assert_eq!(farthest_point_sampling(&pts, 3, 42), farthest_point_sampling(&pts, 3, 42));
    }
}
