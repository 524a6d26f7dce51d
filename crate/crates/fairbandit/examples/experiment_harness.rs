//! Config-driven experiments: the same path the command line takes.
//!
//! A TOML config names the algorithm, the scales, the seeds, and the
//! ground-truth environment. The harness validates it, runs every seed
//! (deterministically: same config, same bytes out), and writes one CSV of
//! per-round logs plus one JSON summary per seed, and one aggregate JSON.

use fairbandit::harness::{load_config, run_experiment, validate};
use std::fs;
use std::io::Write;

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("experiment.toml");
    let output_dir = dir.path().join("out");

    let config_text = format!(
        r#"
algorithm = "full"
k = 4
d = 3
rounds = 300
epsilon = 0.05
lambda = 1.0
delta = 0.05
noise_sigma = 1.0
seeds = [1, 2, 3]
output_dir = "{}"

[environment]
theta = [0.52, -0.52, 0.52]
metric = [[0.3, 0.0, 0.0], [0.0, 0.3, 0.0], [0.0, 0.0, 0.3]]
contexts = "iid_unit_sphere"
"#,
        output_dir.display()
    );
    let mut f = fs::File::create(&config_path).unwrap();
    f.write_all(config_text.as_bytes()).unwrap();

    let cfg = load_config(&config_path).unwrap();
    let diagnostics = validate(&cfg);
    println!("validation: {} problems", diagnostics.len());
    assert!(diagnostics.is_empty());

    let reports = run_experiment(&cfg, None).unwrap();
    for report in &reports {
        let s = &report.summary;
        println!(
            "seed {}: regret = {:8.3}, fairness loss = {}, mistakes = {}, width sum {:.1} <= bound {:.1}",
            report.seed, s.cumulative_regret, s.fairness_loss, s.valid_mistakes_total,
            s.width_sum, s.width_sum_bound,
        );
    }

    println!("artifacts in {}:", output_dir.display());
    let mut names: Vec<String> = fs::read_dir(&output_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    for name in &names {
        println!("  {name}");
    }

    // Per-round logs are plain CSV: header then one row per round.
    let csv = fs::read_to_string(output_dir.join("rounds_1.csv")).unwrap();
    for line in csv.lines().take(3) {
        println!("  | {line}");
    }
    println!("  | ... ({} rows)", csv.lines().count() - 1);
}
