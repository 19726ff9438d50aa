//! Recurrent-pattern discovery in call-record style datasets.
//!
//! The crate ingests raw call events, derives the implicit calendar and
//! timing attributes, and mines the resulting sectioned vectors with two
//! engines: an agent-based random-walk discoverer that learns a local
//! dissimilarity configuration per cluster, and a medoid-based projected
//! clustering baseline. Post-processing projects the discovered
//! meta-clusters for visualization, detects dense regions, scores
//! stability across runs, and renders report artifacts. A synthetic
//! generator with planted patterns provides ground truth for all of it.

pub mod analysis;
pub mod cdr;
pub mod dissimilarity;
pub mod error;
pub mod graph;
pub mod ldabcd;
pub mod proclus;
pub mod report;
pub mod svg;
pub mod synth;

pub use analysis::{
    best_match_pairing, find_dense_regions, ldabcd_stability, pca3, proclus_stability, DenseRegion,
    LdabcdRunSummary, LdabcdStability, MembershipMatrix, MetaSummary, Pairing, ProclusStability,
    Projection3,
};
pub use cdr::{
    augment, build_schema, parse_raw, CdrRecord, Dataset, DatasetSchema, DayPeriod, DomainKind,
    ParseStats, RawCdr, Section, WeekDay, PREV_CALL_CAP, SECTION_COUNT, SECTION_NAMES,
};
pub use dissimilarity::{
    circular, composite, composite_weighted, delta, manhattan, sample_pc, ParameterConfig,
};
pub use error::{Error, Result};
pub use graph::{pick_tau, sweep_tau, SweepCurve, SweepPoint, TauPick, WeightedGraph};
pub use ldabcd::{
    cluster_quality, jaccard, merge_into_metaclusters, random_walk, run_agent, run_engine, Cluster,
    EngineConfig, EngineOutput, MetaCluster, PcEntry, SweepSettings, TauExp,
};
pub use proclus::{ProclusCluster, ProclusConfig, ProclusResult};
pub use report::{
    render_metacluster_charts, render_pc_table, summarize_user, PcTable, PieChart, UserSummary,
};
pub use synth::{
    benchmark_patterns, generate, score_recovery, GroundTruth, PlantedPattern, RecoveryReport,
    SynthOutput,
};
