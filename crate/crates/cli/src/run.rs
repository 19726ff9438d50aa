//! The analysis pipeline behind `habitminer run`: ingest, mine, report.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use serde::Serialize;

use habitminer_core::{
    analysis, cdr, graph::TauPick, ldabcd, proclus, report, svg, synth, Dataset, EngineConfig,
    MetaCluster, SweepSettings, TauExp,
};

use crate::artifacts::{ArtifactWriter, Format};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineChoice {
    Ldabcd,
    Proclus,
    Both,
}

impl EngineChoice {
    fn runs_ldabcd(self) -> bool {
        matches!(self, EngineChoice::Ldabcd | EngineChoice::Both)
    }

    fn runs_proclus(self) -> bool {
        matches!(self, EngineChoice::Proclus | EngineChoice::Both)
    }

    fn label(self) -> &'static str {
        match self {
            EngineChoice::Ldabcd => "ldabcd",
            EngineChoice::Proclus => "proclus",
            EngineChoice::Both => "both",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub input: PathBuf,
    pub user: Option<String>,
    pub engine: EngineChoice,
    pub tau_cq: f64,
    pub theta: f64,
    pub tau_exp: TauExp,
    pub k: usize,
    pub l: usize,
    pub min_dev: f64,
    pub runs: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub formats: Vec<Format>,
    pub agents: usize,
    pub walks_per_pc: usize,
    pub min_cluster_size: usize,
    pub region_radius: f64,
    pub region_min_size: usize,
    pub region_min_share: f64,
    /// Meta-clusters backed by fewer merged clusters than this stay out of
    /// the projection and region analysis.
    pub min_support: usize,
    pub sweep_step: f64,
    pub sweep_walks: usize,
}

#[derive(Serialize)]
struct PcExport {
    bits: String,
    cq: f64,
}

#[derive(Serialize)]
struct MetaExport {
    members: Vec<usize>,
    pcs: Vec<PcExport>,
    size: usize,
}

#[derive(Serialize)]
struct MetaClustersFile {
    tau_exp: f64,
    tau_pick: Option<TauPick>,
    accepted_clusters: usize,
    count: usize,
    metaclusters: Vec<MetaExport>,
}

#[derive(Serialize)]
struct RegionExport {
    members: Vec<usize>,
    representative: usize,
    representative_size: usize,
    representative_members: Vec<usize>,
    centroid: [f64; 3],
    /// Mean pairwise membership overlap of the region's meta-clusters;
    /// reported as a coherence indicator, never asserted.
    mean_member_jaccard: f64,
    pc_table: report::PcTable,
}

fn mean_member_jaccard(metas: &[MetaCluster], members: &[usize]) -> f64 {
    if members.len() < 2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (i, &a) in members.iter().enumerate() {
        for &b in &members[i + 1..] {
            sum += ldabcd::jaccard(&metas[a].members, &metas[b].members);
            pairs += 1;
        }
    }
    sum / pairs as f64
}

#[derive(Serialize)]
struct RegionsFile {
    count: usize,
    regions: Vec<RegionExport>,
}

#[derive(Serialize)]
struct ProclusClusterExport {
    medoid: usize,
    members: Vec<usize>,
    dims: Vec<usize>,
}

#[derive(Serialize)]
struct ProclusFile {
    clusters: Vec<ProclusClusterExport>,
    outliers: Vec<usize>,
    objective: f64,
    iterations: usize,
}

fn meta_export(meta: &MetaCluster) -> MetaExport {
    MetaExport {
        members: meta.members.clone(),
        pcs: meta
            .pc_list
            .iter()
            .map(|entry| PcExport {
                bits: entry.bits.bits_string(),
                cq: entry.cq,
            })
            .collect(),
        size: meta.size(),
    }
}

fn load_dataset(options: &RunOptions) -> Result<(Dataset, String), CliError> {
    let open = || -> Result<BufReader<File>> {
        Ok(BufReader::new(File::open(&options.input).with_context(
            || format!("cannot open input {}", options.input.display()),
        )?))
    };
    let user = match &options.user {
        Some(user) => user.clone(),
        None => {
            let users = cdr::list_users(open().map_err(CliError::Input)?)
                .map_err(|e| CliError::Input(e.into()))?;
            match users.len() {
                0 => return Err(CliError::Input(anyhow!("input contains no valid records"))),
                1 => users.into_iter().next().unwrap(),
                n => {
                    return Err(CliError::Input(anyhow!(
                        "input contains {n} users ({}...); select one with --user",
                        users[..n.min(5)].join(", ")
                    )))
                }
            }
        }
    };
    let (raw, stats) = cdr::parse_raw(open().map_err(CliError::Input)?, Some(&user))
        .map_err(|e| CliError::Input(e.into()))?;
    if stats.malformed > 0 {
        eprintln!("warning: {} malformed lines skipped", stats.malformed);
    }
    let records = cdr::augment(&raw).map_err(|e| CliError::Input(e.into()))?;
    let dataset = Dataset::from_records(records).map_err(|e| CliError::Input(e.into()))?;
    Ok((dataset, user))
}

fn engine_config(options: &RunOptions, seed: u64) -> EngineConfig {
    EngineConfig {
        tau_cq: options.tau_cq,
        theta: options.theta,
        tau_exp: options.tau_exp,
        agent_count: options.agents,
        walks_per_pc: options.walks_per_pc,
        max_walk_len: None,
        min_cluster_size: options.min_cluster_size,
        max_pcs_per_agent: None,
        seed,
        sweep: SweepSettings {
            step: options.sweep_step,
            walks_per_value: options.sweep_walks,
            ..SweepSettings::default()
        },
    }
}

fn run_ldabcd(
    options: &RunOptions,
    dataset: &Dataset,
    writer: &mut ArtifactWriter,
) -> Result<(), CliError> {
    let mut run_summaries = Vec::new();
    for run_index in 0..options.runs {
        let config = engine_config(options, options.seed + run_index as u64);
        config.validate().map_err(|e| CliError::Config(e.into()))?;
        let output =
            ldabcd::run_engine(dataset, &config).map_err(|e| CliError::Engine(e.into()))?;
        if let Some(TauPick::FallbackMidpoint(tau)) = output.tau_pick {
            eprintln!("warning: sweep found no plateau, using midpoint scale {tau}");
        }
        let metas = &output.metaclusters;

        // Only recurrently discovered meta-clusters enter the projection;
        // region indices are mapped back to the full list afterwards.
        let analyzed: Vec<usize> = (0..metas.len())
            .filter(|&i| metas[i].source_clusters >= options.min_support)
            .collect();
        let analyzed_metas: Vec<MetaCluster> = analyzed.iter().map(|&i| metas[i].clone()).collect();

        let projection = if analyzed_metas.is_empty() {
            None
        } else {
            let matrix =
                analysis::MembershipMatrix::from_metaclusters(&analyzed_metas, dataset.len());
            let cqs: Vec<f64> = analyzed_metas.iter().map(|m| m.best_cq()).collect();
            Some(analysis::pca3(&matrix, &cqs).map_err(|e| CliError::Engine(e.into()))?)
        };
        let mut regions = projection
            .as_ref()
            .map(|proj| {
                analysis::find_dense_regions(
                    proj,
                    &analysis::MetaSummary::from_metaclusters(&analyzed_metas),
                    options.region_radius,
                    options.region_min_size,
                    options.region_min_share,
                )
            })
            .unwrap_or_default();
        for region in &mut regions {
            for member in &mut region.members {
                *member = analyzed[*member];
            }
            region.representative = analyzed[region.representative];
        }

        if run_index == 0 {
            let mut emit = || -> Result<()> {
                writer.json(
                    "ldabcd_metaclusters.json",
                    &MetaClustersFile {
                        tau_exp: output.tau_exp,
                        tau_pick: output.tau_pick,
                        accepted_clusters: output.accepted_clusters,
                        count: metas.len(),
                        metaclusters: metas.iter().map(meta_export).collect(),
                    },
                )?;
                if let Some(curve) = &output.sweep_curve {
                    writer.csv("sweep_curve.csv", &curve.to_csv())?;
                    writer.svg("sweep_curve.svg", &svg::sweep_chart("scale sweep", curve))?;
                }
                if let Some(proj) = &projection {
                    writer.csv("pca_projection.csv", &proj.to_csv())?;
                    let circles: Vec<[f64; 3]> = regions.iter().map(|r| r.centroid).collect();
                    writer.svg(
                        "pca_scatter.svg",
                        &svg::projection_scatter(
                            "meta-cluster projection",
                            &proj.scores,
                            &proj.cq,
                            &circles,
                        ),
                    )?;
                }
                let region_exports: Vec<RegionExport> = regions
                    .iter()
                    .map(|region| {
                        let representative = &metas[region.representative];
                        RegionExport {
                            members: region.members.clone(),
                            representative: region.representative,
                            representative_size: representative.size(),
                            representative_members: representative.members.clone(),
                            centroid: region.centroid,
                            mean_member_jaccard: mean_member_jaccard(metas, &region.members),
                            pc_table: report::render_pc_table(representative),
                        }
                    })
                    .collect();
                writer.json(
                    "dense_regions.json",
                    &RegionsFile {
                        count: regions.len(),
                        regions: region_exports,
                    },
                )?;
                for (i, region) in regions.iter().enumerate() {
                    let representative = &metas[region.representative];
                    let pies = report::render_metacluster_charts(
                        &representative.members,
                        &dataset.records,
                    )?;
                    writer.svg(
                        &format!("region_{}_pies.svg", i + 1),
                        &svg::pie_row(&format!("dense region {}", i + 1), &pies),
                    )?;
                }
                Ok(())
            };
            emit().map_err(CliError::Engine)?;
        }

        run_summaries.push(analysis::LdabcdRunSummary {
            metacluster_count: metas.len(),
            region_count: regions.len(),
            representatives: regions
                .iter()
                .map(|region| metas[region.representative].members.clone())
                .collect(),
        });
    }

    if options.runs > 1 {
        let stability =
            analysis::ldabcd_stability(&run_summaries).map_err(|e| CliError::Engine(e.into()))?;
        writer
            .json("stability_ldabcd.json", &stability)
            .map_err(CliError::Engine)?;
    }
    Ok(())
}

fn run_proclus(
    options: &RunOptions,
    dataset: &Dataset,
    writer: &mut ArtifactWriter,
) -> Result<(), CliError> {
    let mut fractions = Vec::new();
    for run_index in 0..options.runs {
        let mut config = proclus::ProclusConfig::new(options.k, options.l);
        config.min_dev = options.min_dev;
        config.seed = options.seed + run_index as u64;
        config
            .validate(dataset.schema.section_count())
            .map_err(|e| CliError::Config(e.into()))?;
        let result = proclus::run(dataset, &config).map_err(|e| CliError::Engine(e.into()))?;
        fractions.push(result.outliers.len() as f64 / dataset.len() as f64);

        if run_index == 0 {
            let mut emit = || -> Result<()> {
                let mut clusters: Vec<&proclus::ProclusCluster> = result.clusters.iter().collect();
                clusters.sort_by(|a, b| {
                    b.members
                        .len()
                        .cmp(&a.members.len())
                        .then(a.members.first().cmp(&b.members.first()))
                        .then(a.medoid.cmp(&b.medoid))
                });
                writer.json(
                    "proclus_result.json",
                    &ProclusFile {
                        clusters: clusters
                            .iter()
                            .map(|c| ProclusClusterExport {
                                medoid: c.medoid,
                                members: c.members.clone(),
                                dims: c.dims.clone(),
                            })
                            .collect(),
                        outliers: result.outliers.clone(),
                        objective: result.objective,
                        iterations: result.iterations,
                    },
                )?;
                for (i, cluster) in clusters.iter().enumerate() {
                    if cluster.members.is_empty() {
                        continue;
                    }
                    let pies =
                        report::render_metacluster_charts(&cluster.members, &dataset.records)?;
                    writer.svg(
                        &format!("proclus_cluster_{}_pies.svg", i + 1),
                        &svg::pie_row(&format!("projected cluster {}", i + 1), &pies),
                    )?;
                }
                Ok(())
            };
            emit().map_err(CliError::Engine)?;
        }
    }

    if options.runs > 1 {
        let stability =
            analysis::proclus_stability(fractions).map_err(|e| CliError::Engine(e.into()))?;
        writer
            .json("stability_proclus.json", &stability)
            .map_err(CliError::Engine)?;
    }
    Ok(())
}

pub fn run(options: &RunOptions) -> Result<(), CliError> {
    if options.runs == 0 {
        return Err(CliError::Config(anyhow!("--runs must be at least 1")));
    }
    let (dataset, user) = load_dataset(options)?;
    let mut writer =
        ArtifactWriter::new(&options.out, options.formats.clone()).map_err(CliError::Config)?;

    let mut emit_summary = || -> Result<()> {
        let summary = report::summarize_user(&dataset.records)?;
        let writer_ref = &mut writer;
        writer_ref.json("summary.json", &summary)?;
        let to_bins = |bins: &[report::HistogramBin]| -> Vec<(String, f64)> {
            bins.iter().map(|b| (b.label.clone(), b.fraction)).collect()
        };
        writer_ref.svg(
            "hist_prefectures.svg",
            &svg::bar_chart(
                &format!("user {user}: calls per prefecture"),
                &to_bins(&summary.per_prefecture),
            ),
        )?;
        writer_ref.svg(
            "hist_prev_call.svg",
            &svg::bar_chart(
                &format!("user {user}: time from previous call"),
                &to_bins(&summary.prev_call),
            ),
        )?;
        writer_ref.svg(
            "hist_week_days.svg",
            &svg::bar_chart(
                &format!("user {user}: calls per week day"),
                &to_bins(&summary.per_week_day),
            ),
        )?;
        writer_ref.svg(
            "hist_day_periods.svg",
            &svg::bar_chart(
                &format!("user {user}: calls per day period"),
                &to_bins(&summary.per_day_period),
            ),
        )?;
        Ok(())
    };
    emit_summary().map_err(CliError::Input)?;

    if options.engine.runs_ldabcd() {
        run_ldabcd(options, &dataset, &mut writer)?;
    }
    if options.engine.runs_proclus() {
        run_proclus(options, &dataset, &mut writer)?;
    }

    let manifest = writer
        .finish(options.seed, options.engine.label())
        .map_err(CliError::Engine)?;
    println!("wrote {}", manifest.display());
    Ok(())
}

/// `habitminer synth`: benchmark generation.
#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub patterns: Option<PathBuf>,
    pub noise: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub truth: Option<PathBuf>,
}

pub fn run_synth(options: &SynthOptions) -> Result<(), CliError> {
    let patterns: Vec<synth::PlantedPattern> = match &options.patterns {
        Some(path) => {
            let file = File::open(path)
                .with_context(|| format!("cannot open pattern spec {}", path.display()))
                .map_err(CliError::Input)?;
            serde_json::from_reader(BufReader::new(file))
                .context("pattern spec is not valid JSON")
                .map_err(CliError::Input)?
        }
        None => synth::benchmark_patterns(),
    };
    let output = synth::generate(&patterns, options.noise, options.seed)
        .map_err(|e| CliError::Config(e.into()))?;

    let file = File::create(&options.out)
        .with_context(|| format!("cannot create {}", options.out.display()))
        .map_err(CliError::Config)?;
    synth::emit_raw(&output.raw, std::io::BufWriter::new(file))
        .context("cannot write raw records")
        .map_err(CliError::Config)?;

    let truth_path = options
        .truth
        .clone()
        .unwrap_or_else(|| options.out.with_extension("truth.json"));
    let mut text = serde_json::to_string_pretty(&output.truth)
        .context("cannot serialize ground truth")
        .map_err(CliError::Config)?;
    text.push('\n');
    std::fs::write(&truth_path, text)
        .with_context(|| format!("cannot write {}", truth_path.display()))
        .map_err(CliError::Config)?;

    println!(
        "wrote {} ({} records) and {}",
        options.out.display(),
        output.dataset.len(),
        truth_path.display()
    );
    Ok(())
}
