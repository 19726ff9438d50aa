//! Complete weighted similarity graphs and the exponent-scale sweep.
//!
//! For a PC `m` and a scale `tau_exp`, every pair of elements is connected
//! by an edge of weight `exp(-d(a, b, m) * tau_exp)`, so similar elements
//! get weights near 1 and dissimilar ones get weights near 0. A random
//! walker on such a graph rarely leaves a compact group, which is what the
//! discovery engine exploits.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cdr::Dataset;
use crate::dissimilarity::{composite, sample_pc, ParameterConfig};
use crate::error::{Error, Result};
use crate::ldabcd;

/// Lower bound applied to edge weights so extreme dissimilarities cannot
/// underflow to an exact zero.
pub const WEIGHT_FLOOR: f64 = 1e-12;

/// Dense symmetric similarity graph for one PC at one scale. Immutable
/// after construction; node degrees are cached.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    n: usize,
    pc: ParameterConfig,
    tau_exp: f64,
    /// Row-major `n * n` weight matrix, zero on the diagonal.
    weights: Vec<f64>,
    degrees: Vec<f64>,
    total_volume: f64,
}

impl WeightedGraph {
    /// Builds the complete graph over the dataset under the given PC.
    pub fn build(dataset: &Dataset, pc: ParameterConfig, tau_exp: f64) -> Result<Self> {
        let n = dataset.len();
        if n < 2 {
            return Err(Error::TooSmall {
                needed: 2,
                actual: n,
            });
        }
        // Negated form also rejects NaN.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(tau_exp > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tau_exp must be positive, got {tau_exp}"
            )));
        }
        let schema = &dataset.schema;
        let vectors = &dataset.vectors;
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let mut row = vec![0.0; n];
                for l in 0..n {
                    if l != k {
                        let d = composite(&vectors[k], &vectors[l], &pc, schema)
                            .expect("vectors conform to their own schema");
                        row[l] = (-d * tau_exp).exp().max(WEIGHT_FLOOR);
                    }
                }
                row
            })
            .collect();
        let mut weights = Vec::with_capacity(n * n);
        for row in rows {
            weights.extend_from_slice(&row);
        }
        Ok(Self::from_parts(n, pc, tau_exp, weights))
    }

    /// Wraps an explicit symmetric weight matrix. Intended for tests and
    /// oracle comparisons; weights must lie in `(0, 1]` off the diagonal.
    pub fn from_weights(matrix: Vec<Vec<f64>>, pc: ParameterConfig, tau_exp: f64) -> Result<Self> {
        let n = matrix.len();
        if n < 2 {
            return Err(Error::TooSmall {
                needed: 2,
                actual: n,
            });
        }
        let mut weights = vec![0.0; n * n];
        for (k, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidConfig("weight matrix is not square".into()));
            }
            for (l, &w) in row.iter().enumerate() {
                if k == l {
                    continue;
                }
                if !(w > 0.0 && w <= 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "edge weight {w} outside (0, 1]"
                    )));
                }
                if (matrix[l][k] - w).abs() > 1e-12 {
                    return Err(Error::InvalidConfig(
                        "weight matrix is not symmetric".into(),
                    ));
                }
                weights[k * n + l] = w;
            }
        }
        Ok(Self::from_parts(n, pc, tau_exp, weights))
    }

    fn from_parts(n: usize, pc: ParameterConfig, tau_exp: f64, weights: Vec<f64>) -> Self {
        let degrees: Vec<f64> = (0..n)
            .map(|k| weights[k * n..(k + 1) * n].iter().sum())
            .collect();
        let total_volume = degrees.iter().sum();
        WeightedGraph {
            n,
            pc,
            tau_exp,
            weights,
            degrees,
            total_volume,
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn pc(&self) -> &ParameterConfig {
        &self.pc
    }

    pub fn tau_exp(&self) -> f64 {
        self.tau_exp
    }

    pub fn weight(&self, k: usize, l: usize) -> f64 {
        self.weights[k * self.n + l]
    }

    /// All weights incident to node `k` (zero at position `k`).
    pub fn row(&self, k: usize) -> &[f64] {
        &self.weights[k * self.n..(k + 1) * self.n]
    }

    pub fn degree(&self, k: usize) -> f64 {
        self.degrees[k]
    }

    /// Sum of all node degrees (twice the total edge weight).
    pub fn total_volume(&self) -> f64 {
        self.total_volume
    }
}

/// One evaluated point of the scale sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepPoint {
    pub tau_exp: f64,
    pub mean_cq: f64,
    pub mean_size: f64,
    pub walks: usize,
}

/// Mean walk quality and size as a function of the exponent scale.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SweepCurve {
    pub points: Vec<SweepPoint>,
}

impl SweepCurve {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau_exp,mean_cq,mean_size\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.tau_exp, p.mean_cq, p.mean_size));
        }
        out
    }
}

/// Walk parameters used while sweeping the scale.
#[derive(Debug, Clone, Copy)]
pub struct SweepWalkParams {
    pub min_cluster_size: usize,
    pub max_walk_len: usize,
    /// Acceptance threshold applied to the sweep walks; scale values where
    /// nothing is accepted produce no curve point.
    pub tau_cq: f64,
}

/// Evaluates the scale range `[lo, hi]` in `step` increments. For every
/// scale value, `walks_per_value` random walks are performed, each under a
/// freshly sampled PC, and the accepted clusters' mean quality and size
/// are recorded.
pub fn sweep_tau<R: Rng>(
    dataset: &Dataset,
    lo: f64,
    hi: f64,
    step: f64,
    walks_per_value: usize,
    walk: SweepWalkParams,
    rng: &mut R,
) -> Result<SweepCurve> {
    if !(lo >= 1.0 && hi >= lo && step > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "bad sweep range [{lo}, {hi}] step {step}"
        )));
    }
    if walks_per_value == 0 {
        return Err(Error::InvalidConfig("walks_per_value must be > 0".into()));
    }
    let n = dataset.len();
    let section_count = dataset.schema.section_count();
    let no_exclusions = std::collections::HashSet::new();
    let mut points = Vec::new();
    let mut tau = lo;
    while tau <= hi + 1e-9 {
        // Group the walks of this scale by sampled PC so each graph is
        // built once.
        let mut pcs: Vec<ParameterConfig> = (0..walks_per_value)
            .map(|_| sample_pc(rng, section_count, &no_exclusions).expect("PC space is nonempty"))
            .collect();
        pcs.sort();
        let mut cq_sum = 0.0;
        let mut size_sum = 0.0;
        let mut walks = 0usize;
        let mut i = 0;
        while i < pcs.len() {
            let pc = pcs[i];
            let mut count = 0;
            while i < pcs.len() && pcs[i] == pc {
                count += 1;
                i += 1;
            }
            let graph = WeightedGraph::build(dataset, pc, tau)?;
            for _ in 0..count {
                let start = rng.random_range(0..n);
                if let Some(cluster) = ldabcd::random_walk(
                    &graph,
                    start,
                    walk.max_walk_len,
                    walk.tau_cq,
                    walk.min_cluster_size,
                    rng,
                ) {
                    cq_sum += cluster.cq;
                    size_sum += cluster.members.len() as f64;
                    walks += 1;
                }
            }
        }
        if walks > 0 {
            points.push(SweepPoint {
                tau_exp: tau,
                mean_cq: cq_sum / walks as f64,
                mean_size: size_sum / walks as f64,
                walks,
            });
        }
        tau += step;
    }
    Ok(SweepCurve { points })
}

/// How the scale was chosen from a sweep curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TauPick {
    /// First scale after which size stops shrinking and quality stops
    /// growing, both within a 2% tolerance over a 3-point window.
    Plateau(f64),
    /// No plateau was detected; midpoint of the evaluated range.
    FallbackMidpoint(f64),
}

impl TauPick {
    pub fn value(&self) -> f64 {
        match *self {
            TauPick::Plateau(v) | TauPick::FallbackMidpoint(v) => v,
        }
    }
}

const PLATEAU_TOLERANCE: f64 = 0.02;
const PLATEAU_WINDOW: usize = 3;

fn stagnant(points: &[SweepPoint]) -> bool {
    points.windows(2).all(|pair| {
        let size_ok = pair[1].mean_size >= pair[0].mean_size * (1.0 - PLATEAU_TOLERANCE);
        let cq_ok = pair[1].mean_cq <= pair[0].mean_cq * (1.0 + PLATEAU_TOLERANCE);
        size_ok && cq_ok
    })
}

/// Picks the scale at the start of the curve's plateau.
pub fn pick_tau(curve: &SweepCurve) -> Result<TauPick> {
    let points = &curve.points;
    if points.is_empty() {
        return Err(Error::EmptyDataset("sweep curve has no points".into()));
    }
    if points.len() == 1 {
        return Ok(TauPick::Plateau(points[0].tau_exp));
    }
    let window = PLATEAU_WINDOW.min(points.len());
    for i in 0..=points.len() - window {
        if stagnant(&points[i..i + window]) {
            return Ok(TauPick::Plateau(points[i].tau_exp));
        }
    }
    let midpoint = (points[0].tau_exp + points[points.len() - 1].tau_exp) / 2.0;
    Ok(TauPick::FallbackMidpoint(midpoint))
}
