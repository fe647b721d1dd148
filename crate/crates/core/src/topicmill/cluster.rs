use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embedkit::cosine;

/// Cluster index per input (`None` for outliers) and unit centroids ordered by descending size.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub labels: Vec<Option<usize>>,
    pub centroids: Vec<Vec<f64>>,
}

/// Best centroid by cosine similarity, ties to the lower index. Returns `(index, distance)`.
pub(crate) fn nearest(centroids: &[Vec<f64>], v: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in centroids.iter().enumerate() {
        let d = 1.0 - cosine(c, v);
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best
}

fn assign(centroids: &[Vec<f64>], vectors: &[&[f64]], max_distance: f64) -> Vec<Option<usize>> {
    vectors
        .iter()
        .map(|v| nearest(centroids, v).filter(|&(_, d)| d <= max_distance).map(|(i, _)| i))
        .collect()
}

fn unit_mean(members: impl Iterator<Item = usize>, vectors: &[&[f64]], dims: usize) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; dims];
    for m in members {
        for (s, v) in sum.iter_mut().zip(vectors[m]) {
            *s += v;
        }
    }
    let norm = sum.iter().map(|v| v * v).sum::<f64>().sqrt();
    (norm > 1e-12).then(|| sum.into_iter().map(|v| v / norm).collect())
}

/// Drops clusters with fewer than `min_size` members. Returns whether anything was removed.
fn prune(centroids: &mut Vec<Vec<f64>>, labels: &[Option<usize>], min_size: usize) -> bool {
    let mut sizes = vec![0usize; centroids.len()];
    for l in labels.iter().flatten() {
        sizes[*l] += 1;
    }
    let before = centroids.len();
    let mut i = 0;
    centroids.retain(|_| {
        let keep = sizes[i] >= min_size;
        i += 1;
        keep
    });
    centroids.len() != before
}

/// Seeded leader pass followed by centroid refinement under a cosine-distance cutoff. Clusters
/// smaller than `min_size` dissolve into the outlier set.
pub fn cluster(
    vectors: &[&[f64]],
    dims: usize,
    min_size: usize,
    max_distance: f64,
    max_iterations: usize,
    seed: u64,
) -> Clustering {
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut centroids: Vec<Vec<f64>> = Vec::new();
    for &i in &order {
        let v = vectors[i];
        if v.iter().all(|x| *x == 0.0) {
            continue;
        }
        match nearest(&centroids, v) {
            Some((_, d)) if d <= max_distance => {}
            _ => centroids.push(v.to_vec()),
        }
    }

    let mut previous: Option<Vec<Option<usize>>> = None;
    for _ in 0..max_iterations {
        let labels = assign(&centroids, vectors, max_distance);
        if prune(&mut centroids, &labels, min_size) {
            previous = None;
            continue;
        }
        if previous.as_ref() == Some(&labels) {
            break;
        }
        let refreshed: Vec<Option<Vec<f64>>> = (0..centroids.len())
            .map(|c| unit_mean((0..vectors.len()).filter(|&i| labels[i] == Some(c)), vectors, dims))
            .collect();
        centroids = refreshed.into_iter().flatten().collect();
        previous = Some(labels);
    }

    // Settle: the final labels are exactly nearest-centroid assignments of the surviving centroids.
    let mut labels = assign(&centroids, vectors, max_distance);
    while prune(&mut centroids, &labels, min_size) {
        labels = assign(&centroids, vectors, max_distance);
    }

    let mut sizes: Vec<(usize, usize, usize)> = (0..centroids.len())
        .map(|c| {
            let members = labels.iter().filter(|l| **l == Some(c)).count();
            let first = labels.iter().position(|l| *l == Some(c)).unwrap_or(usize::MAX);
            (c, members, first)
        })
        .collect();
    sizes.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    let mut remap = vec![0; centroids.len()];
    for (new, (old, _, _)) in sizes.iter().enumerate() {
        remap[*old] = new;
    }
    Clustering {
        labels: labels.into_iter().map(|l| l.map(|c| remap[c])).collect(),
        centroids: sizes.iter().map(|(old, _, _)| centroids[*old].clone()).collect(),
    }
}
