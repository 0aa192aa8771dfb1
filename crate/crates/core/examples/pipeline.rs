// The command pipeline driven by a config file: ingest, train, mine, eval
// and analyze, all writing into a scratch directory.

use std::fs;

use basketflow::cli;
use basketflow::config::RunConfig;
use basketflow::ingest::write_canonical;
use basketflow::synthetic::{PlantedStream, PlantedStreamConfig};

pub fn main() {
    let dir = std::env::temp_dir().join(format!("basketflow-pipeline-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();

    let stream = PlantedStream::generate(&PlantedStreamConfig {
        products: 200,
        users: 40,
        baskets: 1500,
        windows: 6,
        planted_pairs: 8,
        pair_rate: 0.04,
        seed: 3,
        ..PlantedStreamConfig::default()
    });
    let raw = dir.join("raw.csv");
    write_canonical(&stream.baskets, fs::File::create(&raw).unwrap()).unwrap();

    let canonical = dir.join("canonical.csv");
    let summary = cli::cmd_ingest(&raw, "canonical", &canonical).unwrap();
    print!("{}", cli::format_summary(&summary));

    let text = format!(
        "dataset = {}\ndim = 16\nepochs = 3\nseed = 3\ntop_k = 10\nquery_windows = 4,5\noutput_dir = {}\n",
        canonical.display(),
        dir.join("run").display()
    );
    let config = RunConfig::parse(&text).unwrap();

    let trained = cli::cmd_train(&config).unwrap();
    let rules = cli::cmd_mine(&trained.snapshot, &config).unwrap();
    println!("{} rules, best {} -> {}", rules.len(), rules[0].product_a, rules[0].product_b);
    let report = cli::cmd_eval(&config, false).unwrap();
    println!("embedding mrr {:.4}", report["embedding"]["mrr"].as_f64().unwrap());
    let rep = cli::cmd_analyze(&canonical, 200, &config).unwrap();
    println!("repetition p = {:.3e}", rep.p_value);

    let mut files: Vec<String> = fs::read_dir(&config.output_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    println!("{}", files.join("\n"));
    fs::remove_dir_all(&dir).unwrap();
}
