use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

use gue_quench::montecarlo::TransitionModel;
use gue_quench::LevelSampler;

#[derive(Parser, Debug)]
#[command(
    name = "gue-quench",
    version,
    about = "Work statistics of quenches into Gaussian unitary ensembles"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample GUE matrices and emit their spectra.
    GueSample(GueSampleArgs),
    /// Density of states by Monte Carlo, semicircle law or the N = 2 closed form.
    Dos(DosArgs),
    /// Work density for a quench from a fixed two-level Hamiltonian into a 2×2 GUE.
    Det2rand(Det2randArgs),
    /// Thermally weighted density of initial energies of a 2×2 GUE.
    QDensity(QDensityArgs),
    /// Work density for a quench between two 2×2 GUEs, by quadrature.
    Rand2rand(Rand2randArgs),
    /// Monte Carlo histogram of the work density between two GUEs.
    Mc(McArgs),
    /// Mean and variance of work against inverse temperature (N = 2).
    Moments(MomentsArgs),
    /// Check the Jarzynski identity on random GUE pairs.
    Jarzynski(JarzynskiArgs),
    /// Run the acceptance suite and print a pass/fail table.
    Verify(VerifyArgs),
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Output file; relative paths are resolved against $GUE_QUENCH_OUT_DIR
    /// when it is set. Defaults to stdout, or to a file named after the
    /// subcommand inside $GUE_QUENCH_OUT_DIR.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args, Debug, Clone)]
pub struct SamplingArgs {
    #[arg(long, default_value_t = 1_000_000, value_parser = positive_u64)]
    pub samples: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 8, value_parser = positive_usize)]
    pub streams: usize,
    /// Run every stream on the calling thread.
    #[arg(long)]
    pub sequential: bool,
    /// Spectrum sampler; `direct` skips matrix construction when N = 2.
    #[arg(long, value_enum, default_value_t = SamplerArg::Direct)]
    pub sampler: SamplerArg,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Direct,
    Matrix,
}

impl From<SamplerArg> for LevelSampler {
    fn from(s: SamplerArg) -> Self {
        match s {
            SamplerArg::Direct => LevelSampler::Direct,
            SamplerArg::Matrix => LevelSampler::Matrix,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    UniformFinal,
    ExactTransitions,
}

impl From<ModelArg> for TransitionModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::UniformFinal => TransitionModel::UniformFinal,
            ModelArg::ExactTransitions => TransitionModel::ExactTransitions,
        }
    }
}

/// Initial and final ensembles. `--s` overrides `--sigma-f` with `s·σ_i`.
#[derive(Args, Debug, Clone)]
pub struct PairArgs {
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
    pub sigma_i: f64,
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
    pub sigma_f: f64,
    /// Ratio σ_f/σ_i.
    #[arg(long, value_parser = positive_f64)]
    pub s: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true, value_parser = finite_f64)]
    pub mu_i: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true, value_parser = finite_f64)]
    pub mu_f: f64,
    /// Inverse temperature of the initial state (`inf` for the ground state).
    #[arg(long, default_value_t = 1.0, value_parser = non_negative_f64)]
    pub beta: f64,
}

impl PairArgs {
    pub fn sigma_f(&self) -> f64 {
        self.s.map_or(self.sigma_f, |s| s * self.sigma_i)
    }
}

#[derive(Args, Debug)]
pub struct GueSampleArgs {
    #[arg(long, default_value_t = 2, value_parser = positive_usize)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true, value_parser = finite_f64)]
    pub mu: f64,
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
    pub sigma: f64,
    #[arg(long, default_value_t = 10, value_parser = positive_usize)]
    pub count: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum DosMethod {
    Mc,
    Semicircle,
    ClosedForm,
}

#[derive(Args, Debug)]
pub struct DosArgs {
    #[arg(long, default_value_t = 2, value_parser = positive_usize)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true, value_parser = finite_f64)]
    pub mu: f64,
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value_t = DosMethod::Mc)]
    pub method: DosMethod,
    /// Grid nodes; the grid spans μ ± (2σ√N + 8σ).
    #[arg(long, default_value_t = 4096, value_parser = grid_points)]
    pub points: usize,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct Det2randArgs {
    /// Level spacing of the initial Hamiltonian.
    #[arg(long, default_value_t = 1.0, value_parser = non_negative_f64)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
    pub sigma_f: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true, value_parser = finite_f64)]
    pub mu_f: f64,
    #[arg(long, default_value_t = 1.0, value_parser = non_negative_f64)]
    pub beta: f64,
    #[arg(long, default_value_t = 1201, value_parser = grid_points)]
    pub points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct QDensityArgs {
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
    pub sigma_i: f64,
    /// Inverse temperature (`inf` for the ground-state density).
    #[arg(long, default_value_t = 1.0, value_parser = non_negative_f64)]
    pub beta: f64,
    #[arg(long, default_value_t = 1201, value_parser = grid_points)]
    pub points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct Rand2randArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long, default_value_t = 1601, value_parser = grid_points)]
    pub points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct McArgs {
    #[arg(long, default_value_t = 2, value_parser = positive_usize)]
    pub n: usize,
    #[command(flatten)]
    pub pair: PairArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long, default_value_t = 201, value_parser = positive_usize)]
    pub bins: usize,
    #[arg(long, value_enum, default_value_t = ModelArg::UniformFinal)]
    pub model: ModelArg,
    /// Compare against the quadrature reference (N = 2 only).
    #[arg(long)]
    pub compare: bool,
    /// Also write the JSON summary to this file.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct MomentsArgs {
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
    pub sigma_i: f64,
    /// Ratios σ_f/σ_i, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75", value_parser = positive_f64)]
    pub s: Vec<f64>,
    /// Largest βσ_i on the grid.
    #[arg(long, default_value_t = 10.0, value_parser = positive_f64)]
    pub beta_max: f64,
    #[arg(long, default_value_t = 101, value_parser = grid_points)]
    pub points: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true, value_parser = finite_f64)]
    pub mu_i: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true, value_parser = finite_f64)]
    pub mu_f: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct JarzynskiArgs {
    #[arg(long, default_value_t = 4, value_parser = positive_usize)]
    pub n: usize,
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long, default_value_t = 100, value_parser = positive_usize)]
    pub pairs: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Largest accepted |⟨e^{−βw}⟩ e^{βΔF} − 1|.
    #[arg(long, default_value_t = 1e-10, value_parser = positive_f64)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Skip the single-threaded timing rerun of the Monte Carlo check.
    #[arg(long)]
    pub quick: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| format!("`{s}` is not a number: {e}"))
}

fn finite_f64(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` must be finite"))
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v = finite_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("`{s}` must be > 0"))
    }
}

fn non_negative_f64(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("`{s}` must be >= 0"))
    }
}

fn positive_u64(s: &str) -> Result<u64, String> {
    match s.trim().parse::<u64>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("`{s}` must be a positive integer")),
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    positive_u64(s).map(|v| v as usize)
}

fn grid_points(s: &str) -> Result<usize, String> {
    match positive_usize(s)? {
        v if v >= 2 => Ok(v),
        _ => Err("a grid needs at least 2 points".into()),
    }
}
