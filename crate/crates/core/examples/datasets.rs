//! Synthetic data, group-preserving splits, and the CSV + JSON sidecar
//! format.

use tessera::data::{
    gen_clustered_shift, load_csv, read_meta, save_csv, split_dataset, write_meta, ClusterShiftConfig, DatasetMeta,
    GeneratorSpec, ShiftMode, SplitFractions, SplitMode,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ClusterShiftConfig { n: 1200, n_clusters: 12, mode: ShiftMode::Iid, seed: 9, ..ClusterShiftConfig::default() };
    let ds = gen_clustered_shift(&spec)?;
    println!("i.i.d. split sizes (train/val/cal/test): {:?}", ds.split_sizes());

    // reassign whole clusters to splits, as a scaffold-style split would
    let fractions = SplitFractions::default();
    let grouped = split_dataset(&ds, &fractions, SplitMode::ByGroup, 9)?;
    println!("by-group split sizes: {:?}", grouped.dataset.split_sizes());
    for w in &grouped.warnings {
        println!("warning: {w}");
    }

    let dir = std::env::temp_dir().join("tessera-example-data");
    std::fs::create_dir_all(&dir)?;
    let csv = dir.join("clusters.csv");
    save_csv(&grouped.dataset, &csv)?;
    let meta = DatasetMeta {
        generator: Some(GeneratorSpec::ClusteredShift(spec)),
        split_mode: Some(SplitMode::ByGroup),
        split_fractions: Some(fractions),
        split_seed: Some(9),
        ..DatasetMeta::describe(&grouped.dataset)
    };
    write_meta(&meta, dir.join("clusters.meta.json"))?;

    assert_eq!(load_csv(&csv)?, grouped.dataset);
    assert_eq!(read_meta(dir.join("clusters.meta.json"))?, meta);
    println!("wrote and re-read {}", csv.display());
    Ok(())
}
