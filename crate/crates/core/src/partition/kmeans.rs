//! Lloyd's k-means with k-means++ seeding over node feature rows.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ClusterAssignment;
use crate::error::{Error, Result};
use crate::graph::FeatureMatrix;

#[derive(Debug, Clone)]
pub struct KMeansOutcome {
    pub assignment: ClusterAssignment,
    pub centroids: Array2<f64>,
    /// Sum of squared distances from each row to its centroid.
    pub inertia: f64,
    pub iterations: usize,
    /// False when `max_iter` was reached before the assignment settled.
    pub converged: bool,
}

/// Clusters the feature rows of `x` into `m` groups.
pub fn partition_kmeans(x: &FeatureMatrix, m: usize, seed: u64, max_iter: usize) -> Result<ClusterAssignment> {
    Ok(kmeans(x.view(), m, seed, max_iter)?.assignment)
}

/// Lloyd iterations from k-means++ seeds.
///
/// Points go to the nearest centroid (lowest id on ties). A cluster left
/// empty takes the point of the largest cluster that lies farthest from that
/// cluster's centroid. Iteration stops when the assignment no longer changes
/// or after `max_iter` rounds.
pub fn kmeans(x: ArrayView2<'_, f64>, m: usize, seed: u64, max_iter: usize) -> Result<KMeansOutcome> {
    let n = x.nrows();
    if m == 0 {
        return Err(Error::invalid("number of clusters must be at least 1"));
    }
    if m > n {
        return Err(Error::invalid(format!("cannot form {m} clusters from {n} rows")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(x, m, &mut rng);
    let mut assign = vec![usize::MAX; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut next: Vec<usize> = (0..n).map(|i| nearest(&centroids, x.row(i)).0).collect();
        repair_empty(x, &mut next, &mut centroids, m);
        let settled = next == assign;
        assign = next;
        centroids = means(x, &assign, m);
        if settled {
            converged = true;
            break;
        }
    }
    if iterations == 0 {
        // With no iterations allowed, assign once to the seeds.
        assign = (0..n).map(|i| nearest(&centroids, x.row(i)).0).collect();
    }
    let inertia = (0..n).map(|i| sq_dist(x.row(i), centroids.row(assign[i]))).sum();
    Ok(KMeansOutcome {
        assignment: ClusterAssignment::new(m, assign)?,
        centroids,
        inertia,
        iterations,
        converged,
    })
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn nearest(centroids: &Array2<f64>, row: ArrayView1<'_, f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.rows().into_iter().enumerate() {
        let d = sq_dist(row, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// k-means++: the first centroid is a uniform row, each further one a row
/// drawn with probability proportional to its squared distance to the
/// nearest chosen centroid. If all remaining distances are zero, the lowest
/// row index not yet chosen is used.
fn seed_plus_plus(x: ArrayView2<'_, f64>, m: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = x.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(chosen[0]))).collect();
    while chosen.len() < m {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `acc` just short of `target`; fall back to
            // the last row with positive weight.
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            (0..n).find(|i| !chosen.contains(i)).unwrap()
        };
        chosen.push(pick);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(pick)));
        }
    }
    let mut c = Array2::zeros((m, x.ncols()));
    for (k, &i) in chosen.iter().enumerate() {
        c.row_mut(k).assign(&x.row(i));
    }
    c
}

fn means(x: ArrayView2<'_, f64>, assign: &[usize], m: usize) -> Array2<f64> {
    let mut sums = Array2::zeros((m, x.ncols()));
    let mut counts = vec![0usize; m];
    for (i, &k) in assign.iter().enumerate() {
        let mut row = sums.row_mut(k);
        row += &x.row(i);
        counts[k] += 1;
    }
    for (k, &c) in counts.iter().enumerate() {
        if c > 0 {
            sums.row_mut(k).mapv_inplace(|v| v / c as f64);
        }
    }
    sums
}

fn repair_empty(x: ArrayView2<'_, f64>, assign: &mut [usize], centroids: &mut Array2<f64>, m: usize) {
    loop {
        let mut counts = vec![0usize; m];
        for &k in assign.iter() {
            counts[k] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let largest = (0..m).max_by_key(|&k| (counts[k], std::cmp::Reverse(k))).unwrap();
        let center = means(x, assign, m).row(largest).to_owned();
        let mut far = (usize::MAX, -1.0);
        for (i, &k) in assign.iter().enumerate() {
            if k == largest {
                let d = sq_dist(x.row(i), center.view());
                if d > far.1 {
                    far = (i, d);
                }
            }
        }
        assign[far.0] = empty;
        centroids.row_mut(empty).assign(&x.row(far.0));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand_distr::StandardNormal;

    fn blobs(seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((60, 3));
        let mut truth = Vec::new();
        for i in 0..60 {
            let blob = i % 2;
            for j in 0..3 {
                let noise: f64 = rng.sample(StandardNormal);
                x[[i, j]] = 100.0 * blob as f64 + 0.5 * noise;
            }
            truth.push(blob);
        }
        (x, truth)
    }

    #[test]
    fn separated_blobs_are_recovered() {
        for seed in 0..10 {
            let (x, truth) = blobs(seed);
            let out = kmeans(x.view(), 2, seed, 100).unwrap();
            assert!(out.converged);
            let a = out.assignment.assign();
            let flip = a[0] != truth[0];
            for (i, &t) in truth.iter().enumerate() {
                assert_eq!(a[i] != t, flip, "seed {seed} row {i}");
            }
        }
    }

    #[test]
    fn one_cluster_per_distinct_row() {
        let x = ndarray::array![[0.0, 0.0], [1.0, 0.0], [0.0, 5.0], [3.0, 3.0]];
        let out = kmeans(x.view(), 4, 1, 50).unwrap();
        assert_eq!(out.assignment.sizes(), vec![1; 4]);
        assert_eq!(out.inertia, 0.0);
    }

    #[test]
    fn identical_rows_terminate_with_repaired_cluster() {
        let x = Array2::from_elem((6, 2), 1.5);
        let out = kmeans(x.view(), 2, 0, 100).unwrap();
        assert!(out.converged);
        assert_eq!(out.assignment.empty_clusters(), 0);
        assert_eq!(out.inertia, 0.0);
    }

    #[test]
    fn rejects_bad_cluster_counts() {
        let x = Array2::zeros((3, 1));
        assert!(kmeans(x.view(), 0, 0, 10).is_err());
        assert!(kmeans(x.view(), 4, 0, 10).is_err());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let (x, _) = blobs(3);
        let a = kmeans(x.view(), 5, 9, 100).unwrap();
        let b = kmeans(x.view(), 5, 9, 100).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.centroids, b.centroids);
    }

    #[test]
    fn zero_iterations_still_assign() {
        let (x, _) = blobs(1);
        let out = kmeans(x.view(), 2, 0, 0).unwrap();
        assert_eq!(out.assignment.num_nodes(), 60);
        assert!(!out.converged);
    }
}
