use std::path::PathBuf;

use cascadeflow_core::calibration::Grid;
use cascadeflow_core::{threshold, RouterPolicy, ScoreType, Specialization};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "cascadeflow",
    version,
    about = "Calibrate, compare and serve energy-routed Student/Teacher cascades"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep routing thresholds over a labeled dataset and write the trade-off curve.
    Sweep(SweepArgs),
    /// Compare routing policies at matched Student fractions.
    Compare(CompareArgs),
    /// Exact McNemar test between two routing policies on the same dataset.
    Mcnemar(McNemarArgs),
    /// Run the cascade gateway.
    Serve(ServeArgs),
    /// Label a dataset with the Teacher's predictions.
    PseudoLabel(PseudoLabelArgs),
}

pub fn parse_threshold(s: &str) -> Result<f64, String> {
    threshold::parse(s).ok_or_else(|| format!("'{s}' is not a threshold (number, inf or -inf)"))
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|v| parse_threshold(v.trim())).collect()
}

fn parse_grid(s: &str) -> Result<Grid, String> {
    if s == "auto" {
        Ok(Grid::Auto)
    } else {
        parse_list(s).map(Grid::Explicit)
    }
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(f) if (0.0..=1.0).contains(&f) => Ok(f),
        _ => Err(format!("'{s}' is not a fraction in [0, 1]")),
    }
}

#[derive(Debug, Clone, Copy, Args)]
pub struct CostArgs {
    /// Student cost for records that declare none.
    #[arg(long, default_value_t = 0.0)]
    pub student_cost: f64,
    /// Teacher cost for records that declare none.
    #[arg(long, default_value_t = 0.0)]
    pub teacher_cost: f64,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct TargetArgs {
    /// Pick the cheapest threshold reaching this accuracy.
    #[arg(long, conflicts_with = "max_cost")]
    pub min_accuracy: Option<f64>,
    /// Pick the most accurate threshold within this expected cost.
    #[arg(long)]
    pub max_cost: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Calibration dataset (JSONL).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "energy")]
    pub score: ScoreType,
    /// Route on the first CBAR logits only (energy).
    #[arg(long)]
    pub cbar: Option<usize>,
    /// `auto` or a comma-separated list of thresholds.
    #[arg(long, default_value = "auto", value_parser = parse_grid, allow_hyphen_values = true)]
    pub grid: Grid,
    #[command(flatten)]
    pub costs: CostArgs,
    #[command(flatten)]
    pub target: TargetArgs,
    /// Write the curve artifact here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the score histogram artifact here.
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// Upload the curve to a running gateway, e.g. http://127.0.0.1:8080.
    #[arg(long)]
    pub push: Option<String>,
    /// Rows shown in the summary table.
    #[arg(long, default_value_t = 11)]
    pub rows: usize,
}

impl SweepArgs {
    pub fn family(&self) -> RouterPolicy {
        family(self.score, self.cbar)
    }
}

fn family(score: ScoreType, cbar: Option<usize>) -> RouterPolicy {
    RouterPolicy {
        score_type: score,
        threshold: 0.0,
        random_rate: 0.5,
        specialization: cbar.map(Specialization::new),
    }
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated policies.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "energy,softmax,entropy,random"
    )]
    pub policies: Vec<ScoreType>,
    /// Student fractions to align on.
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.5,0.7", value_parser = parse_fraction)]
    pub fractions: Vec<f64>,
    /// Seeded runs averaged for the random policy.
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Energy over the first CBAR logits only.
    #[arg(long)]
    pub cbar: Option<usize>,
    /// Histogram bins for the separation diagnostic.
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    #[command(flatten)]
    pub costs: CostArgs,
    #[command(flatten)]
    pub target: TargetArgs,
    /// Write the report (JSON) here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl CompareArgs {
    pub fn families(&self) -> Vec<RouterPolicy> {
        self.policies
            .iter()
            .map(|&st| family(st, self.cbar.filter(|_| st == ScoreType::Energy)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Args)]
pub struct PolicyA {
    #[arg(id = "a_score", long = "a-score", default_value = "energy")]
    pub score: ScoreType,
    #[arg(id = "a_threshold", long = "a-threshold", default_value = "0", value_parser = parse_threshold, allow_hyphen_values = true)]
    pub threshold: f64,
    #[arg(id = "a_rate", long = "a-rate", default_value_t = 0.5)]
    pub rate: f64,
    #[arg(id = "a_cbar", long = "a-cbar")]
    pub cbar: Option<usize>,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct PolicyB {
    #[arg(id = "b_score", long = "b-score", default_value = "energy")]
    pub score: ScoreType,
    #[arg(id = "b_threshold", long = "b-threshold", default_value = "0", value_parser = parse_threshold, allow_hyphen_values = true)]
    pub threshold: f64,
    #[arg(id = "b_rate", long = "b-rate", default_value_t = 0.5)]
    pub rate: f64,
    #[arg(id = "b_cbar", long = "b-cbar")]
    pub cbar: Option<usize>,
}

fn policy(score: ScoreType, threshold: f64, rate: f64, cbar: Option<usize>) -> RouterPolicy {
    RouterPolicy {
        threshold,
        random_rate: rate,
        ..family(score, cbar)
    }
}

impl PolicyA {
    pub fn policy(&self) -> RouterPolicy {
        policy(self.score, self.threshold, self.rate, self.cbar)
    }
}

impl PolicyB {
    pub fn policy(&self) -> RouterPolicy {
        policy(self.score, self.threshold, self.rate, self.cbar)
    }
}

#[derive(Debug, Args)]
pub struct McNemarArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub a: PolicyA,
    #[command(flatten)]
    pub b: PolicyB,
    /// Seed for random policies; both policies share the stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Write the result (JSON) here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Gateway config file (TOML).
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct TeacherArgs {
    /// Remote Teacher endpoint.
    #[arg(long)]
    pub teacher_url: Option<String>,
    /// Replay the Teacher side of a stored dataset.
    #[arg(long)]
    pub teacher_replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PseudoLabelArgs {
    /// Unlabeled dataset (JSONL).
    #[arg(long)]
    pub input: PathBuf,
    /// Labeled output (JSONL).
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub teacher: TeacherArgs,
    #[arg(long, default_value_t = 5000)]
    pub timeout_ms: u64,
}
