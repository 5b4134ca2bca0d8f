use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use udf_core::Tolerances;

#[derive(Parser, Debug)]
#[command(name = "udf", version, about = "Unit-distance constructions for arbitrary norms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Build one generalized progression and certify its unit-distance count.
    Construct(ConstructArgs),
    /// Exactly `n` points from translated copies; ratio table across several `n`.
    Compose(ComposeArgs),
    /// Local model whose unit-distance graph contains `K_{d,m}`.
    Kdm(KdmArgs),
    /// Seeded fuzzing of the sumset and grid-count lemmas.
    VerifyLemmas(LemmaArgs),
    /// Re-run a recorded manifest and compare output digests.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct RunArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "udf-out")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 1e-9)]
    pub tol_tau: f64,
    #[arg(long, default_value_t = 1e-11)]
    pub tol_bnd: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol_unit: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub tol_tan: f64,
}

impl RunArgs {
    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            tau: self.tol_tau,
            eps_bnd: self.tol_bnd,
            eps_unit: self.tol_unit,
            tau_tan: self.tol_tan,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct NormArgs {
    /// Short form (`l2`, `lp:1.5`, `linf`, `perturbed:2:0.03:5`), inline JSON, or `@path`.
    #[arg(long, default_value = "l2")]
    pub norm: String,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    General,
    Warmup,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ConstructArgs {
    #[command(flatten)]
    pub norm: NormArgs,
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_enum, default_value_t = Method::General)]
    pub method: Method,
    /// Also write the point set as hex-float JSON.
    #[arg(long)]
    pub json_points: bool,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ComposeArgs {
    #[command(flatten)]
    pub norm: NormArgs,
    /// One or more target sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<u64>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct KdmArgs {
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// Size of the second side; must be even.
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long, default_value_t = 1e-3, allow_negative_numbers = true)]
    pub delta: f64,
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cases {
    All,
    Sumset,
    Grid,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct LemmaArgs {
    #[arg(long, value_enum, default_value_t = Cases::All)]
    pub cases: Cases,
    #[arg(long, default_value_t = 1000)]
    pub budget: usize,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where the replay writes; defaults to `replay/` next to the manifest.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Construct(_) => "construct",
            Command::Compose(_) => "compose",
            Command::Kdm(_) => "kdm",
            Command::VerifyLemmas(_) => "verify-lemmas",
            Command::Replay(_) => "replay",
        }
    }

    pub fn run_args_mut(&mut self) -> Option<&mut RunArgs> {
        match self {
            Command::Construct(a) => Some(&mut a.run),
            Command::Compose(a) => Some(&mut a.run),
            Command::Kdm(a) => Some(&mut a.run),
            Command::VerifyLemmas(a) => Some(&mut a.run),
            Command::Replay(_) => None,
        }
    }
}
