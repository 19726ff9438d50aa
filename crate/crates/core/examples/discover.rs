//! Minimal library walkthrough: generate a planted benchmark, mine it
//! with the discovery engine, and print the dense regions with their
//! equivalent-PC tables.
//!
//! Run with `cargo run --release --example discover -p habitminer-core`.

use habitminer_core::{
    analysis, benchmark_patterns, generate, ldabcd, render_pc_table, EngineConfig,
    MembershipMatrix, MetaCluster, SweepSettings, TauExp, SECTION_NAMES,
};

fn main() {
    let benchmark = generate(&benchmark_patterns(), 100, 7).expect("benchmark");
    let dataset = &benchmark.dataset;
    println!("mining {} synthetic records", dataset.len());

    let config = EngineConfig {
        tau_exp: TauExp::Auto,
        seed: 42,
        sweep: SweepSettings {
            step: 5.0,
            walks_per_value: 150,
            ..SweepSettings::default()
        },
        ..EngineConfig::default()
    };
    let result = ldabcd::run_engine(dataset, &config).expect("engine");
    println!(
        "scale {} ({} accepted walks, {} meta-clusters)",
        result.tau_exp,
        result.accepted_clusters,
        result.metaclusters.len()
    );

    let analyzed: Vec<MetaCluster> = result
        .metaclusters
        .iter()
        .filter(|m| m.source_clusters >= 3)
        .cloned()
        .collect();
    let matrix = MembershipMatrix::from_metaclusters(&analyzed, dataset.len());
    let cqs: Vec<f64> = analyzed.iter().map(|m| m.best_cq()).collect();
    let projection = analysis::pca3(&matrix, &cqs).expect("projection");
    let regions = analysis::find_dense_regions(
        &projection,
        &analysis::MetaSummary::from_metaclusters(&analyzed),
        0.5,
        1,
        0.10,
    );

    println!("{} dense regions:", regions.len());
    for (i, region) in regions.iter().enumerate() {
        let representative = &analyzed[region.representative];
        println!(
            "  region {}: {} meta-clusters, representative of {} records, best PC {}",
            i + 1,
            region.members.len(),
            representative.size(),
            representative.best_pc()
        );
        let table = render_pc_table(representative);
        let averages: Vec<String> = SECTION_NAMES
            .iter()
            .zip(&table.averages)
            .map(|(name, avg)| format!("{name}={avg:.2}"))
            .collect();
        println!("    selection averages: {}", averages.join(" "));
    }
}
