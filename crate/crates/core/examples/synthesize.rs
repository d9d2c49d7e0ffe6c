//! Writes a synthetic calibration set whose Student correctness rises with
//! the logit margin.
//!
//!   cargo run -p cascadeflow-core --example synthesize -- calib.jsonl [samples] [seed]

use cascadeflow_core::dataset::save_classification_dataset;
use cascadeflow_core::synthetic::{margin_dataset, SyntheticConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let Some(path) = args.next() else {
        eprintln!("usage: synthesize OUT.jsonl [SAMPLES] [SEED]");
        std::process::exit(2);
    };
    let mut config = SyntheticConfig::default();
    if let Some(n) = args.next() {
        config.samples = n.parse().expect("SAMPLES must be an integer");
    }
    if let Some(seed) = args.next() {
        config.seed = seed.parse().expect("SEED must be an integer");
    }
    let records = margin_dataset(&config);
    save_classification_dataset(&path, &records).expect("write dataset");
    println!("wrote {} records to {path}", records.len());
}
