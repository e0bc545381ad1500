//! Lloyd's K-means and the feasible-region statistics built on its result.
//!
//! For samples `x'ᵢ` with mean `x̄'`, assignment `c(i)` and cluster means `μₖ`:
//!
//! * `TSS = (1/N) Σ ‖x'ᵢ − x̄'‖²`
//! * `W   = (1/N) Σ ‖x'ᵢ − μ_c(i)‖²`
//! * `δ_collapse = Σ πₖ ‖x̄' − μₖ‖²`, with `πₖ = |Cₖ|/N`
//!
//! and `TSS = W + δ_collapse` for any assignment whose centers are the
//! assignment means. The mean `x̄'` is always computed from the data, never
//! assumed to be zero.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop once no center moves farther than this.
    pub tol: f64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iters: 300,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    pub assignments: Vec<usize>,
    /// K×d, row k is the mean of the rows assigned to cluster k.
    pub centers: Matrix,
    pub proportions: Vec<f64>,
    pub iterations_run: usize,
    /// Within-cluster sum of squares after each Lloyd iteration.
    pub inertia_history: Vec<f64>,
}

impl Clustering {
    /// Builds a clustering from an arbitrary assignment, recomputing centers as means.
    pub fn from_assignments(data: &Matrix, assignments: Vec<usize>, k: usize) -> Result<Self> {
        let (centers, counts) = cluster_means(data, &assignments, k)?;
        if let Some(cluster) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyCluster { cluster });
        }
        let n = data.rows() as f64;
        let proportions = counts.iter().map(|&c| c as f64 / n).collect();
        Ok(Self {
            k,
            assignments,
            centers,
            proportions,
            iterations_run: 0,
            inertia_history: Vec::new(),
        })
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for &a in &self.assignments {
            counts[a] += 1;
        }
        counts
    }
}

fn cluster_means(data: &Matrix, assignments: &[usize], k: usize) -> Result<(Matrix, Vec<usize>)> {
    if assignments.len() != data.rows() {
        return Err(Error::AssignmentLength {
            expected: data.rows(),
            got: assignments.len(),
        });
    }
    let mut sums = Matrix::zeros(k, data.cols());
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        if a >= k {
            return Err(Error::AssignmentOutOfRange {
                index: i,
                cluster: a,
                k,
            });
        }
        counts[a] += 1;
        for (s, v) in sums.row_mut(a).iter_mut().zip(data.row(i)) {
            *s += v;
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            let inv = 1.0 / count as f64;
            sums.row_mut(c).iter_mut().for_each(|v| *v *= inv);
        }
    }
    Ok((sums, counts))
}

/// Index of the closest center; exact ties go to the lowest index.
fn nearest(row: &[f64], centers: &Matrix) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter_rows().enumerate() {
        let d = squared_distance(row, center);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    (best, best_d)
}

fn kmeans_plus_plus(data: &Matrix, k: usize, rng: &mut rng::Prng) -> Matrix {
    let n = data.rows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng::index(rng, n));
    let mut d2: Vec<f64> = data
        .iter_rows()
        .map(|r| squared_distance(r, data.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng::uniform01(rng) * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` just past the final sum.
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap_or(0))
        } else {
            // Every remaining point coincides with a chosen one.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(pick);
        for (i, r) in data.iter_rows().enumerate() {
            let d = squared_distance(r, data.row(pick));
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    data.select_rows(&chosen)
}

/// Lloyd iterations from k-means++ seeding.
///
/// Each iteration assigns points to their nearest center, repairs empty
/// clusters by moving in the point farthest from its center (taken from a
/// cluster that can spare it), then recomputes centers. Stops when the
/// largest center displacement drops below `tol` or after `max_iters`.
pub fn kmeans(data: &Matrix, config: &KMeansConfig) -> Result<Clustering> {
    let n = data.rows();
    let k = config.k;
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    if k > n {
        return Err(Error::TooManyClusters { k, n });
    }
    let mut r = rng::prng(config.seed);
    let mut centers = kmeans_plus_plus(data, k, &mut r);
    let mut assignments = vec![0usize; n];
    let mut distances = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    for _ in 0..config.max_iters.max(1) {
        iterations += 1;
        for (i, row) in data.iter_rows().enumerate() {
            let (c, d) = nearest(row, &centers);
            assignments[i] = c;
            distances[i] = d;
        }
        repair_empty_clusters(&mut assignments, &mut distances, k)?;
        let (new_centers, _) = cluster_means(data, &assignments, k)?;
        let shift = centers
            .iter_rows()
            .zip(new_centers.iter_rows())
            .map(|(a, b)| libm::sqrt(squared_distance(a, b)))
            .fold(0.0, f64::max);
        centers = new_centers;
        history.push(inertia(data, &assignments, &centers));
        if shift < config.tol {
            break;
        }
    }

    let mut clustering = Clustering::from_assignments(data, assignments, k)?;
    clustering.iterations_run = iterations;
    clustering.inertia_history = history;
    Ok(clustering)
}

fn repair_empty_clusters(assignments: &mut [usize], distances: &mut [f64], k: usize) -> Result<()> {
    let mut counts = vec![0usize; k];
    for &a in assignments.iter() {
        counts[a] += 1;
    }
    for cluster in 0..k {
        if counts[cluster] > 0 {
            continue;
        }
        let donor = (0..assignments.len())
            .filter(|&i| counts[assignments[i]] > 1)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if distances[b] >= distances[i] => Some(b),
                _ => Some(i),
            })
            .ok_or(Error::EmptyCluster { cluster })?;
        counts[assignments[donor]] -= 1;
        assignments[donor] = cluster;
        counts[cluster] = 1;
        distances[donor] = 0.0;
    }
    Ok(())
}

fn inertia(data: &Matrix, assignments: &[usize], centers: &Matrix) -> f64 {
    data.iter_rows()
        .zip(assignments)
        .map(|(r, &a)| squared_distance(r, centers.row(a)))
        .sum()
}

/// The interval `[W, δ_collapse]` that the cluster-aware loss should stay in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleInterval {
    pub lower: f64,
    pub upper: f64,
}

impl FeasibleInterval {
    #[inline]
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }

    pub fn is_nonempty(&self) -> bool {
        self.lower < self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleRegion {
    pub tss: f64,
    pub w: f64,
    pub delta_collapse: f64,
    pub data_mean: Vec<f64>,
    pub clustering: Clustering,
}

impl FeasibleRegion {
    pub fn interval(&self) -> FeasibleInterval {
        FeasibleInterval {
            lower: self.w,
            upper: self.delta_collapse,
        }
    }

    /// `W < δ_collapse`: the interval has room strictly between its ends.
    pub fn is_nonempty(&self) -> bool {
        self.w < self.delta_collapse
    }

    /// `δ_collapse` recovered as `TSS − W`.
    pub fn delta_via_identity(&self) -> f64 {
        self.tss - self.w
    }
}

/// TSS, W and δ_collapse of `data` under `clustering`.
pub fn feasible_region(data: &Matrix, clustering: &Clustering) -> Result<FeasibleRegion> {
    let n = data.rows();
    if clustering.assignments.len() != n {
        return Err(Error::AssignmentLength {
            expected: n,
            got: clustering.assignments.len(),
        });
    }
    if n == 0 {
        return Err(Error::TooFewRows {
            context: "feasible_region",
            needed: 1,
            got: 0,
        });
    }
    clustering
        .centers
        .ensure_shape("cluster centers", clustering.k, data.cols())?;
    let mean = data.column_means();
    let inv = 1.0 / n as f64;
    let mut tss = 0.0;
    let mut w = 0.0;
    for (i, row) in data.iter_rows().enumerate() {
        let a = clustering.assignments[i];
        if a >= clustering.k {
            return Err(Error::AssignmentOutOfRange {
                index: i,
                cluster: a,
                k: clustering.k,
            });
        }
        tss += squared_distance(row, &mean);
        w += squared_distance(row, clustering.centers.row(a));
    }
    let counts = clustering.counts();
    let delta: f64 = clustering
        .centers
        .iter_rows()
        .zip(&counts)
        .map(|(c, &count)| count as f64 * inv * squared_distance(&mean, c))
        .sum();
    Ok(FeasibleRegion {
        tss: tss * inv,
        w: w * inv,
        delta_collapse: delta,
        data_mean: mean,
        clustering: clustering.clone(),
    })
}

/// `|TSS − (W + δ_collapse)| / max(TSS, tiny)`.
pub fn verify_identity(region: &FeasibleRegion) -> f64 {
    let residual = (region.tss - (region.w + region.delta_collapse)).abs();
    residual / region.tss.max(f64::MIN_POSITIVE)
}
