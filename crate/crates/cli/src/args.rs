use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "trigprod",
    version,
    about = "Evaluate and certify trigonometric product identities for sinc(z)"
)]
pub struct Cli {
    /// Working precision in bits.
    #[arg(
        long,
        global = true,
        env = "TRIGPROD_PRECISION_BITS",
        default_value_t = 113
    )]
    pub precision: u32,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one product (finite range or truncated infinite product).
    Eval(EvalArgs),
    /// Sweep a grid and certify an identity or a factor-by-factor cross-check.
    Verify(VerifyArgs),
    /// Residual series against sinc(z) and the fitted geometric rate.
    Converge(ConvergeArgs),
    /// Nested-radical arguments z_n and the products evaluated there.
    Table(TableArgs),
    /// Terms needed to reach a target accuracy over a seeded sample of z.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Formula name (eq1, eq2, eq3, eq8, eq9, eq10, eq11, eq12).
    #[arg(long)]
    pub formula: String,
    /// Argument as "re[,im]" in radians.
    #[arg(long, allow_hyphen_values = true)]
    pub z: String,
    #[arg(long, default_value_t = 2)]
    pub q: u32,
    /// First index of a finite product.
    #[arg(long)]
    pub m: Option<u32>,
    /// End index (exclusive) of a finite product.
    #[arg(long)]
    pub n: Option<u32>,
    /// Truncation length of an infinite product.
    #[arg(long, conflicts_with = "tol")]
    pub terms: Option<u32>,
    /// Truncate an infinite product where the remainder model meets this tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Factor layout: standard, literal (infinite exponent tower) or csc-step (finite exponent tower).
    #[arg(long, default_value = "standard")]
    pub form: String,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(
        long,
        required_unless_present = "crosscheck",
        conflicts_with = "crosscheck"
    )]
    pub formula: Option<String>,
    /// Factor-by-factor comparison, eq10:eq9 or eq11:eq9.
    #[arg(long)]
    pub crosscheck: Option<String>,
    /// Grid as "re=a:b:n,im=a:b:n".
    #[arg(long)]
    pub grid: Option<String>,
    /// Comma-separated bases.
    #[arg(long)]
    pub q_set: Option<String>,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Index windows for finite products, e.g. "0:3,1:4,2:5".
    #[arg(long)]
    pub ranges: Option<String>,
    /// Fixed truncation length for infinite products (default: truncate by tolerance).
    #[arg(long)]
    pub terms: Option<u32>,
    /// Largest factor index compared by a cross-check.
    #[arg(long)]
    pub k_max: Option<u32>,
    /// Omit per-point records from the output.
    #[arg(long)]
    pub summary: bool,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[arg(long)]
    pub formula: String,
    #[arg(long, allow_hyphen_values = true)]
    pub z: String,
    #[arg(long, default_value_t = 2)]
    pub q: u32,
    #[arg(long, default_value_t = 1)]
    pub min_terms: u32,
    #[arg(long, default_value_t = 20)]
    pub max_terms: u32,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Example number; only 1 is defined.
    #[arg(long, default_value_t = 1)]
    pub example: u32,
    /// Comma-separated list of n >= 2.
    #[arg(long, default_value = "2,3,4,5,6")]
    pub n: String,
    #[arg(long, default_value = "eq9")]
    pub formula: String,
    #[arg(long, default_value_t = 2)]
    pub q: u32,
    #[arg(long, default_value_t = 24)]
    pub terms: u32,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated infinite-product formulas.
    #[arg(long, default_value = "eq2,eq8,eq9,eq10")]
    pub formulas: String,
    #[arg(long, default_value_t = 2)]
    pub q: u32,
    #[arg(long, default_value_t = 1e-12)]
    pub target_accuracy: f64,
    #[arg(long, default_value_t = 100)]
    pub samples: u32,
    #[arg(long, default_value_t = crate::bench::DEFAULT_SEED)]
    pub seed: u64,
}
