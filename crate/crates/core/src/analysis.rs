// Index loops mirror the matrix arithmetic they implement.
#![allow(clippy::needless_range_loop)]

//! Post-processing of engine output: projection of the meta-cluster
//! membership matrix onto its first three principal components, detection
//! of dense regions in that score space, greedy cross-run cluster pairing
//! and stability statistics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ldabcd::{jaccard, MetaCluster};

/// Boolean meta-cluster membership matrix: one row per meta-cluster, one
/// column per dataset element.
#[derive(Debug, Clone)]
pub struct MembershipMatrix {
    pub rows: Vec<Vec<bool>>,
    pub n: usize,
}

impl MembershipMatrix {
    pub fn from_metaclusters(metas: &[MetaCluster], n: usize) -> Self {
        MembershipMatrix {
            rows: metas.iter().map(|m| m.membership_vector(n)).collect(),
            n,
        }
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }
}

/// Scores of the rows on the top principal components, ordered by
/// decreasing explained variance. The sign of each component is fixed by
/// making its largest-magnitude loading positive.
#[derive(Debug, Clone, Serialize)]
pub struct Projection3 {
    pub scores: Vec<[f64; 3]>,
    /// Fraction of the total variance captured per component.
    pub explained: [f64; 3],
    /// Per-row color value, the meta-cluster's best quality.
    pub cq: Vec<f64>,
    /// Number of components actually computed; fewer than 3 when the
    /// matrix has fewer than 3 rows.
    pub components: usize,
    /// The principal directions themselves, one loading vector of length
    /// `n` per computed component.
    pub loadings: Vec<Vec<f64>>,
}

impl Projection3 {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pc1,pc2,pc3,cq\n");
        for (score, cq) in self.scores.iter().zip(&self.cq) {
            out.push_str(&format!("{},{},{},{}\n", score[0], score[1], score[2], cq));
        }
        out
    }
}

const PCA_MAX_ITERATIONS: usize = 100_000;
/// Guard columns beyond the three requested components; they speed up the
/// block iteration and absorb eigenvalue near-ties.
const PCA_BLOCK_EXTRA: usize = 3;

fn matvec(matrix: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    matrix
        .iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn orthonormalize(basis: &mut [Vec<f64>]) {
    let dim = basis[0].len();
    for j in 0..basis.len() {
        for prev in 0..j {
            let dot: f64 = (0..dim).map(|i| basis[j][i] * basis[prev][i]).sum();
            for i in 0..dim {
                basis[j][i] -= dot * basis[prev][i];
            }
        }
        let norm: f64 = basis[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-300 {
            for x in &mut basis[j] {
                *x /= norm;
            }
        } else {
            // Deterministic replacement for a vanished direction.
            for (i, x) in basis[j].iter_mut().enumerate() {
                *x = ((i + 1) * (j + 2)) as f64 % 7.0 - 3.0;
            }
            let norm: f64 = basis[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in &mut basis[j] {
                *x /= norm;
            }
        }
    }
}

/// Cyclic Jacobi eigendecomposition for the small Rayleigh-Ritz matrix.
/// Returns eigenvalues and the rotation columns.
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let q = a.len();
    let mut rotation = vec![vec![0.0; q]; q];
    for (i, row) in rotation.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..100 {
        let mut off = 0.0;
        for p in 0..q {
            for r in (p + 1)..q {
                off += a[p][r] * a[p][r];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..q {
            for r in (p + 1)..q {
                if a[p][r].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[r][r] - a[p][p]) / (2.0 * a[p][r]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..q {
                    let akp = a[k][p];
                    let akr = a[k][r];
                    a[k][p] = c * akp - s * akr;
                    a[k][r] = s * akp + c * akr;
                }
                for k in 0..q {
                    let apk = a[p][k];
                    let ark = a[r][k];
                    a[p][k] = c * apk - s * ark;
                    a[r][k] = s * apk + c * ark;
                }
                for row in rotation.iter_mut() {
                    let vp = row[p];
                    let vr = row[r];
                    row[p] = c * vp - s * vr;
                    row[r] = s * vp + c * vr;
                }
            }
        }
    }
    let values = (0..q).map(|i| a[i][i]).collect();
    (values, rotation)
}

/// Principal component scores of the membership matrix: columns are
/// mean-centered and the top eigendirections of the covariance are found
/// by orthogonal (subspace) iteration.
pub fn pca3(matrix: &MembershipMatrix, cq: &[f64]) -> Result<Projection3> {
    let m = matrix.row_count();
    let n = matrix.n;
    if m == 0 {
        return Err(Error::EmptyDataset("membership matrix has no rows".into()));
    }
    if cq.len() != m {
        return Err(Error::SchemaMismatch(format!(
            "{} quality values for {m} rows",
            cq.len()
        )));
    }
    let components = m.min(3);

    // Mean-center the columns.
    let mut means = vec![0.0f64; n];
    for row in &matrix.rows {
        for (j, &v) in row.iter().enumerate() {
            if v {
                means[j] += 1.0;
            }
        }
    }
    for mean in &mut means {
        *mean /= m as f64;
    }
    let centered: Vec<Vec<f64>> = matrix
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, &v)| if v { 1.0 } else { 0.0 } - means[j])
                .collect()
        })
        .collect();

    // Covariance of the columns.
    let denom = if m > 1 { (m - 1) as f64 } else { 1.0 };
    let mut cov = vec![vec![0.0f64; n]; n];
    for row in &centered {
        for i in 0..n {
            if row[i] == 0.0 {
                continue;
            }
            for j in i..n {
                cov[i][j] += row[i] * row[j];
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            cov[i][j] /= denom;
            cov[j][i] = cov[i][j];
        }
    }
    let trace: f64 = (0..n).map(|i| cov[i][i]).sum();

    // Block power iteration with guard columns, stopped on the rotation
    // invariant block residual, then a Rayleigh-Ritz rotation of the
    // converged block.
    let block = (components + PCA_BLOCK_EXTRA).min(n);
    let mut basis: Vec<Vec<f64>> = (0..block)
        .map(|c| {
            (0..n)
                .map(|i| (((i * (c + 3) + c * 7 + 1) % 11) as f64) - 5.0)
                .collect()
        })
        .collect();
    orthonormalize(&mut basis);
    let residual_floor = trace.max(1e-300) * 1e-14;
    for iteration in 0..PCA_MAX_ITERATIONS {
        let mut next: Vec<Vec<f64>> = basis.iter().map(|v| matvec(&cov, v)).collect();
        if iteration % 16 == 15 {
            // Residual of C V - V (V^T C V) with the pre-multiplication
            // images still at hand.
            let mut small = vec![vec![0.0; block]; block];
            for (r, old_r) in basis.iter().enumerate() {
                for (c, image) in next.iter().enumerate() {
                    small[r][c] = old_r.iter().zip(image).map(|(a, b)| a * b).sum();
                }
            }
            let mut residual = 0.0;
            for (c, image) in next.iter().enumerate() {
                for i in 0..n {
                    let reconstructed: f64 = (0..block).map(|r| basis[r][i] * small[r][c]).sum();
                    let diff = image[i] - reconstructed;
                    residual += diff * diff;
                }
            }
            if residual.sqrt() < residual_floor {
                orthonormalize(&mut next);
                basis = next;
                break;
            }
        }
        orthonormalize(&mut next);
        basis = next;
    }

    // Rayleigh-Ritz: diagonalize the projected covariance and rotate.
    let mut projected = vec![vec![0.0; block]; block];
    let images: Vec<Vec<f64>> = basis.iter().map(|v| matvec(&cov, v)).collect();
    for r in 0..block {
        for c in 0..block {
            projected[r][c] = basis[r].iter().zip(&images[c]).map(|(a, b)| a * b).sum();
        }
    }
    let (values, rotation) = jacobi_eigen(projected);
    let mut with_values: Vec<(f64, Vec<f64>)> = (0..block)
        .map(|c| {
            let v: Vec<f64> = (0..n)
                .map(|i| (0..block).map(|r| basis[r][i] * rotation[r][c]).sum())
                .collect();
            (values[c], v)
        })
        .collect();
    with_values.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    with_values.truncate(components);

    // Deterministic sign: the largest-magnitude loading becomes positive.
    for (_, v) in &mut with_values {
        let mut dominant = 0usize;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[dominant].abs() {
                dominant = i;
            }
        }
        if v[dominant] < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }

    let mut scores = vec![[0.0f64; 3]; m];
    let mut explained = [0.0f64; 3];
    for (c, (lambda, v)) in with_values.iter().enumerate() {
        explained[c] = if trace > 0.0 { lambda / trace } else { 0.0 };
        for (row, score) in centered.iter().zip(scores.iter_mut()) {
            score[c] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }
    Ok(Projection3 {
        scores,
        explained,
        cq: cq.to_vec(),
        components,
        loadings: with_values.into_iter().map(|(_, v)| v).collect(),
    })
}

/// Region-selection relevant facts about one meta-cluster.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetaSummary {
    /// Best recomputed quality.
    pub cq: f64,
    /// Number of merged clusters backing the meta-cluster.
    pub support: usize,
    pub size: usize,
}

impl MetaSummary {
    pub fn from_metaclusters(metas: &[MetaCluster]) -> Vec<MetaSummary> {
        metas
            .iter()
            .map(|m| MetaSummary {
                cq: m.best_cq(),
                support: m.source_clusters,
                size: m.size(),
            })
            .collect()
    }
}

/// A dense region of the projected meta-cluster space.
#[derive(Debug, Clone, Serialize)]
pub struct DenseRegion {
    /// Meta-cluster indices belonging to the region.
    pub members: Vec<usize>,
    /// The member with the highest quality; ties prefer stronger support,
    /// then larger membership, then the lowest index.
    pub representative: usize,
    /// Mean of the members' raw projection scores.
    pub centroid: [f64; 3],
}

/// Greedy mode-seeking over the standardized 3-D score space: repeatedly
/// take the point with the most neighbors within `radius`, cut its
/// neighborhood out as a region, and stop when the best neighborhood
/// falls under `min_size`.
///
/// Regions whose members carry less than `min_support_share` of the total
/// discovery support are discarded afterwards: a recurrent pattern is
/// rediscovered by walk after walk, while one-off wander artifacts are
/// not, so the support mass separates the two reliably.
pub fn find_dense_regions(
    projection: &Projection3,
    summaries: &[MetaSummary],
    radius: f64,
    min_size: usize,
    min_support_share: f64,
) -> Vec<DenseRegion> {
    let m = projection.scores.len();
    if m == 0 || summaries.len() != m {
        return Vec::new();
    }
    // Standardize each axis.
    let mut standardized = vec![[0.0f64; 3]; m];
    for axis in 0..3 {
        let mean: f64 = projection.scores.iter().map(|s| s[axis]).sum::<f64>() / m as f64;
        let var: f64 = projection
            .scores
            .iter()
            .map(|s| (s[axis] - mean) * (s[axis] - mean))
            .sum::<f64>()
            / m as f64;
        let sigma = var.sqrt();
        if sigma > 0.0 {
            for (row, score) in standardized.iter_mut().zip(&projection.scores) {
                row[axis] = (score[axis] - mean) / sigma;
            }
        }
    }
    let dist2 = |a: usize, b: usize| -> f64 {
        (0..3)
            .map(|axis| {
                let d = standardized[a][axis] - standardized[b][axis];
                d * d
            })
            .sum()
    };
    let r2 = radius * radius;

    let mut alive: Vec<bool> = vec![true; m];
    let mut regions = Vec::new();
    loop {
        let mut best: Option<(usize, usize)> = None; // (count, center)
        for center in 0..m {
            if !alive[center] {
                continue;
            }
            let count = (0..m)
                .filter(|&other| alive[other] && dist2(center, other) <= r2)
                .count();
            if best.is_none() || count > best.unwrap().0 {
                best = Some((count, center));
            }
        }
        let Some((count, center)) = best else { break };
        if count < min_size {
            break;
        }
        let members: Vec<usize> = (0..m)
            .filter(|&other| alive[other] && dist2(center, other) <= r2)
            .collect();
        // Quality differences below nine decimals are conductance noise;
        // quantizing lets the support and size tie-breaks do their job.
        let quantized = |m: usize| (summaries[m].cq * 1e9).round() as i64;
        let representative = *members
            .iter()
            .max_by(|&&a, &&b| {
                quantized(a)
                    .cmp(&quantized(b))
                    .then(summaries[a].support.cmp(&summaries[b].support))
                    .then(summaries[a].size.cmp(&summaries[b].size))
                    .then(b.cmp(&a))
            })
            .expect("region is nonempty");
        let mut centroid = [0.0f64; 3];
        for &member in &members {
            for axis in 0..3 {
                centroid[axis] += projection.scores[member][axis];
            }
        }
        for c in &mut centroid {
            *c /= members.len() as f64;
        }
        for &member in &members {
            alive[member] = false;
        }
        regions.push(DenseRegion {
            members,
            representative,
            centroid,
        });
    }
    let total_support: usize = summaries.iter().map(|s| s.support).sum();
    let floor = min_support_share * total_support as f64;
    regions.retain(|region| {
        let mass: usize = region.members.iter().map(|&m| summaries[m].support).sum();
        mass as f64 >= floor
    });
    regions
}

/// Result of the greedy best-match-first pairing of two cluster lists.
#[derive(Debug, Clone, Serialize)]
pub struct Pairing {
    /// `(index in a, index in b, jaccard overlap)`, in pairing order.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_a: Vec<usize>,
    pub unmatched_b: Vec<usize>,
}

impl Pairing {
    pub fn mean_overlap(&self) -> f64 {
        if self.pairs.is_empty() {
            return 0.0;
        }
        self.pairs.iter().map(|p| p.2).sum::<f64>() / self.pairs.len() as f64
    }
}

/// Repeatedly pairs the remaining cross-list pair with the highest shared
/// element percentage; unmatched clusters are left unpaired. Member lists
/// must be sorted.
pub fn best_match_pairing(a: &[Vec<usize>], b: &[Vec<usize>]) -> Pairing {
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut overlaps: Vec<(f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, ma) in a.iter().enumerate() {
        for (j, mb) in b.iter().enumerate() {
            overlaps.push((jaccard(ma, mb), i, j));
        }
    }
    overlaps.sort_by(|x, y| {
        y.0.partial_cmp(&x.0)
            .unwrap()
            .then(x.1.cmp(&y.1))
            .then(x.2.cmp(&y.2))
    });
    let mut pairs = Vec::new();
    for (overlap, i, j) in overlaps {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairs.push((i, j, overlap));
        }
    }
    Pairing {
        pairs,
        unmatched_a: (0..a.len()).filter(|&i| !used_a[i]).collect(),
        unmatched_b: (0..b.len()).filter(|&j| !used_b[j]).collect(),
    }
}

/// Outlier statistics over repeated projected-clustering runs.
#[derive(Debug, Clone, Serialize)]
pub struct ProclusStability {
    pub outlier_fractions: Vec<f64>,
    pub mean: f64,
    /// Sample variance.
    pub variance: f64,
    pub std_dev: f64,
    pub max: f64,
}

pub fn proclus_stability(outlier_fractions: Vec<f64>) -> Result<ProclusStability> {
    if outlier_fractions.len() < 2 {
        return Err(Error::TooSmall {
            needed: 2,
            actual: outlier_fractions.len(),
        });
    }
    let n = outlier_fractions.len() as f64;
    let mean = outlier_fractions.iter().sum::<f64>() / n;
    let variance = outlier_fractions
        .iter()
        .map(|x| (x - mean) * (x - mean))
        .sum::<f64>()
        / (n - 1.0);
    let max = outlier_fractions.iter().copied().fold(0.0, f64::max);
    Ok(ProclusStability {
        outlier_fractions,
        mean,
        variance,
        std_dev: variance.sqrt(),
        max,
    })
}

/// What one discovery run contributes to the stability report.
#[derive(Debug, Clone, Serialize)]
pub struct LdabcdRunSummary {
    pub metacluster_count: usize,
    pub region_count: usize,
    /// Member sets of the dense-region representatives, sorted.
    pub representatives: Vec<Vec<usize>>,
}

/// Cross-seed stability of the discovery engine: per-run counts plus the
/// mean best-match overlap of region representatives over all run pairs.
#[derive(Debug, Clone, Serialize)]
pub struct LdabcdStability {
    pub metacluster_counts: Vec<usize>,
    pub region_counts: Vec<usize>,
    pub mean_cross_run_jaccard: f64,
}

pub fn ldabcd_stability(runs: &[LdabcdRunSummary]) -> Result<LdabcdStability> {
    if runs.len() < 2 {
        return Err(Error::TooSmall {
            needed: 2,
            actual: runs.len(),
        });
    }
    let mut overlap_sum = 0.0;
    let mut pair_count = 0usize;
    for i in 0..runs.len() {
        for j in (i + 1)..runs.len() {
            let pairing = best_match_pairing(&runs[i].representatives, &runs[j].representatives);
            overlap_sum += pairing.mean_overlap();
            pair_count += 1;
        }
    }
    Ok(LdabcdStability {
        metacluster_counts: runs.iter().map(|r| r.metacluster_count).collect(),
        region_counts: runs.iter().map(|r| r.region_count).collect(),
        mean_cross_run_jaccard: overlap_sum / pair_count as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix_from(rows: Vec<Vec<bool>>) -> MembershipMatrix {
        let n = rows[0].len();
        MembershipMatrix { rows, n }
    }

    #[test]
    fn rank_one_input_loads_on_first_component() {
        // Rows vary along a single direction.
        let base = vec![true, true, false, false, false, false];
        let rows: Vec<Vec<bool>> = (0..6)
            .map(|i| {
                if i % 2 == 0 {
                    base.clone()
                } else {
                    base.iter().map(|b| !b).collect()
                }
            })
            .collect();
        let cq = vec![0.9; 6];
        let proj = pca3(&matrix_from(rows), &cq).unwrap();
        assert!(proj.explained[0] > 0.999, "{:?}", proj.explained);
        for score in &proj.scores {
            assert!(score[1].abs() < 1e-6);
            assert!(score[2].abs() < 1e-6);
        }
    }

    #[test]
    fn duplicated_rows_project_identically() {
        let rows = vec![
            vec![true, false, true, false, true, false, true, false],
            vec![false, true, false, true, false, true, false, true],
            vec![true, true, false, false, true, true, false, false],
            vec![true, false, true, false, true, false, true, false],
        ];
        let cq = vec![0.9; 4];
        let proj = pca3(&matrix_from(rows), &cq).unwrap();
        for axis in 0..3 {
            assert!((proj.scores[0][axis] - proj.scores[3][axis]).abs() < 1e-9);
        }
    }

    #[test]
    fn small_matrices_flag_fewer_components() {
        let rows = vec![
            vec![true, false, true, false],
            vec![false, true, false, true],
        ];
        let cq = vec![0.9; 2];
        let proj = pca3(&matrix_from(rows), &cq).unwrap();
        assert_eq!(proj.components, 2);
    }

    #[test]
    fn four_tight_groups_give_four_regions() {
        // Four groups of four points each, well separated in score space.
        let centers = [
            [10.0, 0.0, 0.0],
            [0.0, 10.0, 0.0],
            [0.0, 0.0, 10.0],
            [-10.0, -10.0, 0.0],
        ];
        let mut scores = Vec::new();
        let mut cq = Vec::new();
        for (g, center) in centers.iter().enumerate() {
            for i in 0..4 {
                scores.push([
                    center[0] + 0.01 * i as f64,
                    center[1] + 0.01 * i as f64,
                    center[2],
                ]);
                cq.push(0.8 + 0.01 * (g as f64 + i as f64));
            }
        }
        let proj = Projection3 {
            scores,
            explained: [0.5, 0.3, 0.2],
            cq: cq.clone(),
            components: 3,
            loadings: Vec::new(),
        };
        let summaries: Vec<MetaSummary> = cq
            .iter()
            .map(|&q| MetaSummary {
                cq: q,
                support: 1,
                size: 10,
            })
            .collect();
        let regions = find_dense_regions(&proj, &summaries, 0.5, 3, 0.0);
        assert_eq!(regions.len(), 4);
        let mut seen = std::collections::HashSet::new();
        for region in &regions {
            assert_eq!(region.members.len(), 4);
            // Regions are disjoint by construction.
            for &m in &region.members {
                assert!(seen.insert(m), "meta {m} appears in two regions");
            }
            // The representative carries the highest quality of the group.
            let best = region
                .members
                .iter()
                .map(|&m| summaries[m].cq)
                .fold(f64::MIN, f64::max);
            assert_eq!(summaries[region.representative].cq, best);
        }
    }

    #[test]
    fn coincident_points_form_one_region() {
        let proj = Projection3 {
            scores: vec![[1.0, 1.0, 1.0]; 5],
            explained: [1.0, 0.0, 0.0],
            cq: vec![0.9; 5],
            components: 3,
            loadings: Vec::new(),
        };
        let summaries = vec![
            MetaSummary {
                cq: 0.9,
                support: 1,
                size: 5
            };
            5
        ];
        let regions = find_dense_regions(&proj, &summaries, 0.5, 3, 0.0);
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].members.len(), 5);
    }

    #[test]
    fn min_size_above_row_count_gives_no_region() {
        let proj = Projection3 {
            scores: vec![[0.0, 0.0, 0.0]; 4],
            explained: [1.0, 0.0, 0.0],
            cq: vec![0.9; 4],
            components: 3,
            loadings: Vec::new(),
        };
        let summaries = vec![
            MetaSummary {
                cq: 0.9,
                support: 1,
                size: 5
            };
            4
        ];
        assert!(find_dense_regions(&proj, &summaries, 0.5, 5, 0.0).is_empty());
    }

    #[test]
    fn representative_ties_prefer_support_then_size() {
        let proj = Projection3 {
            scores: vec![[0.0; 3]; 3],
            explained: [1.0, 0.0, 0.0],
            cq: vec![1.0, 1.0, 1.0],
            components: 3,
            loadings: Vec::new(),
        };
        let summaries = vec![
            MetaSummary {
                cq: 1.0,
                support: 2,
                size: 50,
            },
            MetaSummary {
                cq: 1.0,
                support: 9,
                size: 40,
            },
            MetaSummary {
                cq: 1.0,
                support: 9,
                size: 45,
            },
        ];
        let regions = find_dense_regions(&proj, &summaries, 0.5, 3, 0.0);
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].representative, 2);
    }

    #[test]
    fn pca_scores_are_permutation_invariant() {
        let rows = vec![
            vec![true, true, false, false, true, false, true, false],
            vec![false, true, true, false, false, true, false, true],
            vec![true, false, false, true, true, true, false, false],
            vec![false, false, true, true, false, false, true, true],
            vec![true, true, true, false, false, true, true, false],
        ];
        let cq = vec![0.8, 0.85, 0.9, 0.95, 0.99];
        let base = pca3(&matrix_from(rows.clone()), &cq).unwrap();
        let permutation = [3usize, 0, 4, 1, 2];
        let permuted_rows: Vec<Vec<bool>> = permutation.iter().map(|&i| rows[i].clone()).collect();
        let permuted_cq: Vec<f64> = permutation.iter().map(|&i| cq[i]).collect();
        let permuted = pca3(&matrix_from(permuted_rows), &permuted_cq).unwrap();
        for (slot, &original) in permutation.iter().enumerate() {
            for axis in 0..3 {
                assert!(
                    (permuted.scores[slot][axis] - base.scores[original][axis]).abs() < 1e-8,
                    "row {original} moved"
                );
            }
        }
    }

    #[test]
    fn pairing_is_symmetric_up_to_orientation() {
        let a = vec![vec![0, 1, 2, 3], vec![4, 5, 6], vec![7, 8]];
        let b = vec![vec![2, 3, 4], vec![7, 8, 9]];
        let forward = best_match_pairing(&a, &b);
        let backward = best_match_pairing(&b, &a);
        let mut flipped: Vec<(usize, usize, f64)> =
            backward.pairs.iter().map(|&(j, i, o)| (i, j, o)).collect();
        flipped.sort_by_key(|x| x.0);
        let mut original = forward.pairs.clone();
        original.sort_by_key(|x| x.0);
        assert_eq!(original, flipped);
    }

    #[test]
    fn identical_runs_pair_perfectly() {
        let clusters = vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7]];
        let pairing = best_match_pairing(&clusters, &clusters);
        assert_eq!(pairing.pairs.len(), 3);
        for &(i, j, overlap) in &pairing.pairs {
            assert_eq!(i, j);
            assert_eq!(overlap, 1.0);
        }
        assert!(pairing.unmatched_a.is_empty());
    }

    #[test]
    fn disjoint_runs_pair_with_zero_overlap() {
        let a = vec![vec![0, 1], vec![2, 3]];
        let b = vec![vec![4, 5], vec![6, 7]];
        let pairing = best_match_pairing(&a, &b);
        assert_eq!(pairing.pairs.len(), 2);
        assert!(pairing.pairs.iter().all(|p| p.2 == 0.0));
        assert_eq!(pairing.mean_overlap(), 0.0);
    }

    /// Oracle: re-run the greedy rule by exhaustive rescanning.
    fn greedy_oracle(a: &[Vec<usize>], b: &[Vec<usize>]) -> Vec<(usize, usize, f64)> {
        let mut used_a = vec![false; a.len()];
        let mut used_b = vec![false; b.len()];
        let mut pairs = Vec::new();
        loop {
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..a.len() {
                if used_a[i] {
                    continue;
                }
                for j in 0..b.len() {
                    if used_b[j] {
                        continue;
                    }
                    let overlap = jaccard(&a[i], &b[j]);
                    let better = match best {
                        None => true,
                        Some((bo, bi, bj)) => overlap > bo || (overlap == bo && (i, j) < (bi, bj)),
                    };
                    if better {
                        best = Some((overlap, i, j));
                    }
                }
            }
            match best {
                Some((overlap, i, j)) => {
                    used_a[i] = true;
                    used_b[j] = true;
                    pairs.push((i, j, overlap));
                }
                None => break,
            }
        }
        pairs
    }

    #[test]
    fn pairing_matches_exhaustive_greedy_oracle() {
        let a = vec![vec![0, 1, 2, 3], vec![4, 5, 6], vec![7, 8, 9, 10, 11]];
        let b = vec![vec![2, 3, 4], vec![7, 8, 9], vec![0, 1, 5, 6, 10]];
        let pairing = best_match_pairing(&a, &b);
        assert_eq!(pairing.pairs, greedy_oracle(&a, &b));
    }

    #[test]
    fn identical_seeded_runs_have_zero_variance() {
        let stability = proclus_stability(vec![0.25, 0.25, 0.25]).unwrap();
        assert_eq!(stability.variance, 0.0);
        assert_eq!(stability.mean, 0.25);
        assert_eq!(stability.max, 0.25);
    }

    #[test]
    fn stability_needs_two_runs() {
        assert!(proclus_stability(vec![0.1]).is_err());
        assert!(ldabcd_stability(&[]).is_err());
    }

    #[test]
    fn ldabcd_stability_aggregates_runs() {
        let run = LdabcdRunSummary {
            metacluster_count: 7,
            region_count: 4,
            representatives: vec![vec![0, 1, 2], vec![5, 6, 7]],
        };
        let stability = ldabcd_stability(&[run.clone(), run]).unwrap();
        assert_eq!(stability.region_counts, vec![4, 4]);
        assert!((stability.mean_cross_run_jaccard - 1.0).abs() < 1e-12);
    }
}
