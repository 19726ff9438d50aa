//! Medoid-based projected clustering with per-cluster dimension selection.
//!
//! Three phases: a greedy initialization spreads a pool of medoid
//! candidates across the dataset, the iteration phase repeatedly swaps
//! poorly supported medoids while scoring candidate clusterings by their
//! total within-cluster segmental distance, and the refinement phase
//! recomputes dimensions on the actual clusters and splits off outliers.
//! The output partitions the dataset: every element lands in exactly one
//! cluster or in the outlier group.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cdr::Dataset;
use crate::dissimilarity::section_dissimilarity;
use crate::error::{Error, Result};

/// Configuration for one projected-clustering run.
#[derive(Debug, Clone)]
pub struct ProclusConfig {
    /// Number of clusters.
    pub k: usize,
    /// Average subspace dimensionality per cluster.
    pub l: usize,
    /// Medoids supporting fewer than `(n / k) * min_dev` points are
    /// replaced.
    pub min_dev: f64,
    /// Sample `sample_factor * k` points before the greedy selection.
    pub sample_factor: usize,
    /// Keep `pool_factor * k` medoid candidates.
    pub pool_factor: usize,
    /// Stop after this many iterations without improvement.
    pub max_stale: usize,
    pub max_iterations: usize,
    pub seed: u64,
}

impl ProclusConfig {
    pub fn new(k: usize, l: usize) -> Self {
        ProclusConfig {
            k,
            l,
            min_dev: 0.1,
            sample_factor: 10,
            pool_factor: 3,
            max_stale: 20,
            max_iterations: 500,
            seed: 0,
        }
    }

    pub fn validate(&self, section_count: usize) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidConfig("k must be at least 2".into()));
        }
        if self.l < 2 || self.l > section_count {
            return Err(Error::InvalidConfig(format!(
                "l must lie in [2, {section_count}], got {}",
                self.l
            )));
        }
        if !(self.min_dev > 0.0 && self.min_dev < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "min_dev must lie in (0, 1), got {}",
                self.min_dev
            )));
        }
        if self.pool_factor == 0 || self.sample_factor == 0 {
            return Err(Error::InvalidConfig(
                "sample_factor and pool_factor must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProclusCluster {
    pub medoid: usize,
    /// Sorted dataset indices, medoid included.
    pub members: Vec<usize>,
    /// Sorted selected dimensions, at least two.
    pub dims: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProclusResult {
    pub clusters: Vec<ProclusCluster>,
    pub outliers: Vec<usize>,
    /// Total within-cluster segmental distance of the kept assignment,
    /// measured before outlier removal.
    pub objective: f64,
    pub iterations: usize,
}

/// Intermediate clustering produced by the iteration phase.
#[derive(Debug, Clone)]
pub struct ProvisionalClustering {
    pub medoids: Vec<usize>,
    pub dims: Vec<Vec<usize>>,
    /// Medoid slot per dataset element.
    pub assignment: Vec<usize>,
    pub objective: f64,
    pub iterations: usize,
}

/// Average per-dimension dissimilarity restricted to `dims`.
pub fn segmental_distance(dataset: &Dataset, a: usize, b: usize, dims: &[usize]) -> f64 {
    let va = &dataset.vectors[a];
    let vb = &dataset.vectors[b];
    let total: f64 = dims
        .iter()
        .map(|&d| section_dissimilarity(va[d], vb[d], &dataset.schema.sections[d]))
        .sum();
    total / dims.len() as f64
}

/// Full-space distance with every section weighted 1.
fn full_distance(dataset: &Dataset, a: usize, b: usize) -> f64 {
    let va = &dataset.vectors[a];
    let vb = &dataset.vectors[b];
    dataset
        .schema
        .sections
        .iter()
        .enumerate()
        .map(|(i, section)| section_dissimilarity(va[i], vb[i], section))
        .sum()
}

/// Greedy farthest-first selection of the medoid candidate pool: a random
/// sample of `sample_factor * k` points, from which `pool_factor * k`
/// candidates are chosen to be as spread as possible in the full space.
pub fn initialize<R: Rng>(
    dataset: &Dataset,
    config: &ProclusConfig,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n = dataset.len();
    let pool_size = config.pool_factor * config.k;
    if n < pool_size {
        return Err(Error::TooSmall {
            needed: pool_size,
            actual: n,
        });
    }
    let sample_size = (config.sample_factor * config.k).min(n);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(rng);
    let mut sample = indices[..sample_size].to_vec();
    sample.sort_unstable();

    let mut pool = Vec::with_capacity(pool_size);
    let first = sample[rng.random_range(0..sample.len())];
    pool.push(first);
    let mut min_dist: Vec<f64> = sample
        .iter()
        .map(|&p| full_distance(dataset, p, first))
        .collect();
    while pool.len() < pool_size {
        let mut best: Option<(f64, usize)> = None;
        for (i, &p) in sample.iter().enumerate() {
            if pool.contains(&p) {
                continue;
            }
            // Strictly-greater keeps the lowest index on ties.
            if best.is_none() || min_dist[i] > best.unwrap().0 {
                best = Some((min_dist[i], i));
            }
        }
        let (_, chosen_idx) = best.expect("sample larger than pool");
        let chosen = sample[chosen_idx];
        pool.push(chosen);
        for (i, &p) in sample.iter().enumerate() {
            min_dist[i] = min_dist[i].min(full_distance(dataset, p, chosen));
        }
    }
    pool.sort_unstable();
    Ok(pool)
}

/// Locality of each medoid: all points at most as far (full-space) as the
/// nearest other medoid. The medoid itself always qualifies.
fn neighborhoods(dataset: &Dataset, medoids: &[usize]) -> Vec<Vec<usize>> {
    let n = dataset.len();
    let deltas: Vec<f64> = medoids
        .iter()
        .map(|&m| {
            medoids
                .iter()
                .filter(|&&other| other != m)
                .map(|&other| full_distance(dataset, m, other))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    medoids
        .iter()
        .zip(&deltas)
        .map(|(&m, &delta)| {
            (0..n)
                .filter(|&p| full_distance(dataset, p, m) <= delta)
                .collect()
        })
        .collect()
}

/// Picks the dimensions along which each medoid's neighborhood is
/// tightest. Per-dimension mean distances are standardized per medoid and
/// the `k * l` globally lowest scores are chosen greedily, subject to at
/// least two dimensions per medoid.
pub fn find_dimensions(
    dataset: &Dataset,
    medoids: &[usize],
    neighborhoods: &[Vec<usize>],
    l: usize,
) -> Result<Vec<Vec<usize>>> {
    let s = dataset.schema.section_count();
    let k = medoids.len();
    let budget = k * l;
    if budget > k * s {
        return Err(Error::InvalidConfig(format!(
            "cannot select {budget} dimensions from {k} x {s}"
        )));
    }
    // Mean per-dimension distance of each neighborhood to its medoid.
    let mut means = vec![vec![0.0f64; s]; k];
    for (i, &medoid) in medoids.iter().enumerate() {
        let locality = &neighborhoods[i];
        if locality.is_empty() {
            continue;
        }
        for &p in locality {
            let vp = &dataset.vectors[p];
            let vm = &dataset.vectors[medoid];
            for (j, section) in dataset.schema.sections.iter().enumerate() {
                means[i][j] += section_dissimilarity(vp[j], vm[j], section);
            }
        }
        for mean in means[i].iter_mut() {
            *mean /= locality.len() as f64;
        }
    }
    // Standardized scores; zero-variance rows fall back to the raw means.
    let mut scores = vec![vec![0.0f64; s]; k];
    for i in 0..k {
        let mean: f64 = means[i].iter().sum::<f64>() / s as f64;
        let var: f64 = means[i]
            .iter()
            .map(|x| (x - mean) * (x - mean))
            .sum::<f64>()
            / (s as f64 - 1.0);
        let sigma = var.sqrt();
        for j in 0..s {
            scores[i][j] = if sigma > 0.0 {
                (means[i][j] - mean) / sigma
            } else {
                means[i][j]
            };
        }
    }
    // Two lowest-score dimensions per medoid, then the remaining budget by
    // globally lowest score. Ties break on (medoid, dimension) order.
    let mut dims: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut remaining: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..k {
        let mut order: Vec<usize> = (0..s).collect();
        order.sort_by(|&a, &b| {
            scores[i][a]
                .partial_cmp(&scores[i][b])
                .unwrap()
                .then(a.cmp(&b))
        });
        dims[i].extend(&order[..2]);
        for &j in &order[2..] {
            remaining.push((scores[i][j], i, j));
        }
    }
    remaining.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    for &(_, i, j) in remaining.iter().take(budget - 2 * k) {
        dims[i].push(j);
    }
    for d in &mut dims {
        d.sort_unstable();
    }
    Ok(dims)
}

/// Assigns every element to the medoid minimizing the average restricted
/// distance; ties go to the lowest medoid index (slots are kept in
/// ascending medoid order).
pub fn assign_points(dataset: &Dataset, medoids: &[usize], dims: &[Vec<usize>]) -> Vec<usize> {
    let n = dataset.len();
    (0..n)
        .map(|p| {
            let mut best_slot = 0;
            let mut best_dist = f64::INFINITY;
            for (slot, &medoid) in medoids.iter().enumerate() {
                let d = segmental_distance(dataset, p, medoid, &dims[slot]);
                if d < best_dist {
                    best_dist = d;
                    best_slot = slot;
                }
            }
            best_slot
        })
        .collect()
}

fn evaluate(
    dataset: &Dataset,
    medoids: &[usize],
    dims: &[Vec<usize>],
    assignment: &[usize],
) -> f64 {
    assignment
        .iter()
        .enumerate()
        .map(|(p, &slot)| segmental_distance(dataset, p, medoids[slot], &dims[slot]))
        .sum()
}

fn clustering_for(
    dataset: &Dataset,
    medoids: &[usize],
    l: usize,
) -> Result<(Vec<Vec<usize>>, Vec<usize>, f64)> {
    let hoods = neighborhoods(dataset, medoids);
    let dims = find_dimensions(dataset, medoids, &hoods, l)?;
    let assignment = assign_points(dataset, medoids, &dims);
    let objective = evaluate(dataset, medoids, &dims, &assignment);
    Ok((dims, assignment, objective))
}

/// Iteration phase: sample `k` medoids from the pool, score the induced
/// clustering, and keep replacing the worst-supported medoids until the
/// objective stops improving for `max_stale` rounds.
pub fn iterate<R: Rng>(
    dataset: &Dataset,
    config: &ProclusConfig,
    pool: &[usize],
    rng: &mut R,
) -> Result<ProvisionalClustering> {
    let n = dataset.len();
    let mut candidates = pool.to_vec();
    candidates.shuffle(rng);
    let mut medoids: Vec<usize> = candidates[..config.k].to_vec();
    medoids.sort_unstable();

    let (dims, assignment, objective) = clustering_for(dataset, &medoids, config.l)?;
    let mut best = ProvisionalClustering {
        medoids: medoids.clone(),
        dims,
        assignment,
        objective,
        iterations: 1,
    };
    let mut stale = 0usize;
    let mut iterations = 1usize;
    let support_floor = (n as f64 / config.k as f64) * config.min_dev;

    while stale < config.max_stale && iterations < config.max_iterations {
        // Replace the bad medoids of the best clustering: the least
        // supported one plus every one under the support floor.
        let mut counts = vec![0usize; config.k];
        for &slot in &best.assignment {
            counts[slot] += 1;
        }
        let min_count = *counts.iter().min().expect("k > 0");
        let bad: Vec<usize> = (0..config.k)
            .filter(|&slot| counts[slot] == min_count || (counts[slot] as f64) < support_floor)
            .collect();
        let mut unused: Vec<usize> = pool
            .iter()
            .copied()
            .filter(|m| !best.medoids.contains(m))
            .collect();
        unused.shuffle(rng);
        let mut next = best.medoids.clone();
        for (i, &slot) in bad.iter().enumerate() {
            if let Some(&replacement) = unused.get(i) {
                next[slot] = replacement;
            }
        }
        next.sort_unstable();
        next.dedup();
        if next.len() < config.k {
            // A replacement collided with an existing medoid; top up from
            // the unused pool.
            for &candidate in unused.iter().skip(bad.len()) {
                if !next.contains(&candidate) {
                    next.push(candidate);
                    if next.len() == config.k {
                        break;
                    }
                }
            }
            next.sort_unstable();
        }
        if next.len() < config.k {
            break;
        }

        let (dims, assignment, objective) = clustering_for(dataset, &next, config.l)?;
        iterations += 1;
        if objective < best.objective {
            best = ProvisionalClustering {
                medoids: next,
                dims,
                assignment,
                objective,
                iterations,
            };
            stale = 0;
        } else {
            stale += 1;
        }
    }
    best.iterations = iterations;
    Ok(best)
}

/// Refinement phase: dimensions are recomputed over the actual clusters,
/// points are reassigned once (kept only if the objective does not get
/// worse), and points farther from their medoid than that medoid's sphere
/// of influence become outliers.
pub fn refine(dataset: &Dataset, provisional: ProvisionalClustering) -> ProclusResult {
    let k = provisional.medoids.len();
    let clusters_of = |assignment: &[usize]| -> Vec<Vec<usize>> {
        let mut clusters = vec![Vec::new(); k];
        for (p, &slot) in assignment.iter().enumerate() {
            clusters[slot].push(p);
        }
        for (slot, cluster) in clusters.iter_mut().enumerate() {
            if cluster.is_empty() {
                cluster.push(provisional.medoids[slot]);
            }
        }
        clusters
    };

    let formed = clusters_of(&provisional.assignment);
    let refined = find_dimensions(
        dataset,
        &provisional.medoids,
        &formed,
        dims_budget(&provisional),
    )
    .unwrap_or_else(|_| provisional.dims.clone());
    let assignment = assign_points(dataset, &provisional.medoids, &refined);
    let objective = evaluate(dataset, &provisional.medoids, &refined, &assignment);

    let (dims, assignment, objective) = if objective <= provisional.objective {
        (refined, assignment, objective)
    } else {
        (
            provisional.dims.clone(),
            provisional.assignment.clone(),
            provisional.objective,
        )
    };

    // Sphere of influence: the smallest restricted distance from a medoid
    // to any other medoid. Points beyond it are outliers.
    let spheres: Vec<f64> = (0..k)
        .map(|slot| {
            provisional
                .medoids
                .iter()
                .enumerate()
                .filter(|&(other, _)| other != slot)
                .map(|(_, &m)| {
                    segmental_distance(dataset, provisional.medoids[slot], m, &dims[slot])
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut clusters: Vec<ProclusCluster> = provisional
        .medoids
        .iter()
        .zip(&dims)
        .map(|(&medoid, d)| ProclusCluster {
            medoid,
            members: Vec::new(),
            dims: d.clone(),
        })
        .collect();
    let mut outliers = Vec::new();
    for (p, &slot) in assignment.iter().enumerate() {
        let d = segmental_distance(dataset, p, provisional.medoids[slot], &dims[slot]);
        if d > spheres[slot] {
            outliers.push(p);
        } else {
            clusters[slot].members.push(p);
        }
    }
    ProclusResult {
        clusters,
        outliers,
        objective,
        iterations: provisional.iterations,
    }
}

fn dims_budget(provisional: &ProvisionalClustering) -> usize {
    let total: usize = provisional.dims.iter().map(Vec::len).sum();
    total / provisional.medoids.len()
}

/// Runs all three phases with a seeded random source.
pub fn run(dataset: &Dataset, config: &ProclusConfig) -> Result<ProclusResult> {
    config.validate(dataset.schema.section_count())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let pool = initialize(dataset, config, &mut rng)?;
    let provisional = iterate(dataset, config, &pool, &mut rng)?;
    Ok(refine(dataset, provisional))
}
