//! The `hetanova` command line.
//!
//! Exit status 0 means the command ran, whatever the statistical decision.
//! Input problems exit with 2, numerical failures with 3.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::asymptotic::{
    build_sigma_t, chi_square_critical, equicoordinate_quantile_of, McSettings, DEFAULT_MC_DRAWS,
    DEFAULT_MC_SEED,
};
use crate::bootstrap::{with_threads, BootstrapSettings};
use crate::data::{summarize_inferred, CellSummaryTable};
use crate::error::{AnovaError, Result};
use crate::grid::Grid;
use crate::inference::{run_test, simultaneous_ci, CiFamily, TestMethod, TestRequest, TestTarget};
use crate::io::{
    read_matrix_csv_path, read_raw_csv_path, read_summary_json_path, read_summary_triplet,
    write_null_sample, SummaryDocument,
};
use crate::mle::SolverSettings;
use crate::simulation::{presets, read_configs, size_power_grid, SimulationResult};

#[derive(Debug, Parser)]
#[command(
    name = "hetanova",
    version,
    about = "Two-way ANOVA tests under unequal cell variances"
)]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, env = "HETANOVA_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reduce raw observations to cell means, sizes and variances.
    Summarize(SummarizeArgs),
    /// Run one hypothesis test.
    Test(TestArgs),
    /// Simultaneous confidence intervals for a contrast family.
    Ci(CiArgs),
    /// Monte Carlo size and power study.
    Simulate(SimulateArgs),
    /// Chi-square or equicoordinate normal critical values.
    Quantile(QuantileArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CiFormat {
    Json,
    Text,
    Csv,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Long-format CSV with header A,B,y.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["mean", "json"])]
    pub raw: Option<PathBuf>,
    /// Cell means, a rows by b columns, no header.
    #[arg(long, value_name = "FILE", requires_all = ["n", "var"], conflicts_with = "json")]
    pub mean: Option<PathBuf>,
    /// Cell sizes matrix.
    #[arg(long, value_name = "FILE", requires = "mean")]
    pub n: Option<PathBuf>,
    /// Unbiased cell variances matrix.
    #[arg(long, value_name = "FILE", requires = "mean")]
    pub var: Option<PathBuf>,
    /// Summary document {a, b, mean, n, var}.
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

impl InputArgs {
    fn given(&self) -> bool {
        self.raw.is_some() || self.mean.is_some() || self.json.is_some()
    }

    pub fn load(&self) -> Result<CellSummaryTable> {
        if let Some(raw) = &self.raw {
            return summarize_inferred(&read_raw_csv_path(raw)?);
        }
        if let (Some(m), Some(n), Some(v)) = (&self.mean, &self.n, &self.var) {
            return read_summary_triplet(m, n, v);
        }
        if let Some(j) = &self.json {
            return read_summary_json_path(j);
        }
        Err(AnovaError::InvalidParameter(
            "no input: give --raw, --json, or --mean/--n/--var".into(),
        ))
    }
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Convergence tolerance of the restricted fits.
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    /// Iteration cap of the restricted fits.
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
}

impl SolverArgs {
    fn settings(&self) -> SolverSettings {
        SolverSettings {
            epsilon: self.epsilon,
            max_iterations: self.max_iter,
        }
    }
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[arg(long, value_name = "FILE")]
    pub raw: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Interaction,
    #[value(name = "simpleA")]
    SimpleA,
    #[value(name = "simpleB")]
    SimpleB,
    #[value(name = "treatmentA")]
    TreatmentA,
    #[value(name = "treatmentB")]
    TreatmentB,
}

impl From<TargetArg> for TestTarget {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Interaction => TestTarget::Interaction,
            TargetArg::SimpleA => TestTarget::SimpleA,
            TargetArg::SimpleB => TestTarget::SimpleB,
            TargetArg::TreatmentA => TestTarget::TreatmentA,
            TargetArg::TreatmentB => TestTarget::TreatmentB,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Lrt,
    Mct,
    Alrt,
    Amct,
    /// Homoscedastic F (treatmentA/B only).
    F,
}

impl From<MethodArg> for TestMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Lrt => TestMethod::LrtBoot,
            MethodArg::Mct => TestMethod::MctBoot,
            MethodArg::Alrt => TestMethod::LrtAsymptotic,
            MethodArg::Amct => TestMethod::MctAsymptotic,
            MethodArg::F => TestMethod::ClassicalF,
        }
    }
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum)]
    pub target: TargetArg,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Bootstrap replicates H.
    #[arg(long, default_value_t = 5000)]
    pub boot_reps: usize,
    /// Bootstrap seed; required for lrt and mct.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Monte Carlo draws for the amct quantile.
    #[arg(long, default_value_t = DEFAULT_MC_DRAWS)]
    pub mc_draws: usize,
    /// Seed of the amct quantile.
    #[arg(long, default_value_t = DEFAULT_MC_SEED)]
    pub mc_seed: u64,
    /// Write the bootstrap null sample here, one value per line.
    #[arg(long, value_name = "FILE")]
    pub dump_null: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Interaction,
    #[value(name = "simpleA")]
    SimpleA,
    #[value(name = "treatmentA")]
    TreatmentA,
}

impl From<FamilyArg> for CiFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Interaction => CiFamily::InteractionPairs,
            FamilyArg::SimpleA => CiFamily::SimpleAPairs,
            FamilyArg::TreatmentA => CiFamily::TreatmentAPairs,
        }
    }
}

#[derive(Debug, Args)]
pub struct CiArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 5000)]
    pub boot_reps: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_enum, default_value = "text")]
    pub format: CiFormat,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON file with one config or a list of configs.
    #[arg(
        long,
        value_name = "FILE",
        conflicts_with = "preset",
        required_unless_present = "preset"
    )]
    pub config: Option<PathBuf>,
    /// Built-in parameter grid, e.g. table1/config1.
    #[arg(long)]
    pub preset: Option<String>,
    /// Outer replicates per configuration.
    #[arg(long)]
    pub outer: Option<usize>,
    /// Inner bootstrap replicates.
    #[arg(long)]
    pub inner: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Results CSV; rows are appended as each configuration finishes.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QuantileArgs {
    /// Chi-square degrees of freedom.
    #[arg(long, conflicts_with_all = ["corr", "raw", "mean", "json"])]
    pub df: Option<f64>,
    /// Correlation matrix CSV for an equicoordinate normal quantile.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["raw", "mean", "json"])]
    pub corr: Option<PathBuf>,
    /// Or a summary whose plug-in treatment correlation is used.
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_MC_DRAWS)]
    pub draws: usize,
    #[arg(long, default_value_t = DEFAULT_MC_SEED)]
    pub seed: u64,
}

/// Parses `args`, runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = if code == 0 {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    let threads = cli.threads;
    match with_threads(threads, || execute(&cli.command)) {
        Ok((text, warnings)) => {
            for w in warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            let _ = out.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_input_error() {
                2
            } else {
                3
            }
        }
    }
}

// Standard output plus warnings for standard error.
fn execute(command: &Command) -> Result<(String, Vec<String>)> {
    match command {
        Command::Summarize(a) => cmd_summarize(a),
        Command::Test(a) => Ok((cmd_test(a)?, vec![])),
        Command::Ci(a) => Ok((cmd_ci(a)?, vec![])),
        Command::Simulate(a) => Ok((cmd_simulate(a)?, vec![])),
        Command::Quantile(a) => Ok((cmd_quantile(a)?, vec![])),
    }
}

fn cmd_summarize(args: &SummarizeArgs) -> Result<(String, Vec<String>)> {
    let table = summarize_inferred(&read_raw_csv_path(&args.raw)?)?;
    let warnings = table
        .degenerate_cells()
        .into_iter()
        .map(|(i, j)| {
            format!(
                "cell ({},{}) has zero variance; tests will reject it",
                i + 1,
                j + 1
            )
        })
        .collect();
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&SummaryDocument::from_table(&table))? + "\n",
        Format::Text => summary_text(&table),
    };
    Ok((text, warnings))
}

fn summary_text(t: &CellSummaryTable) -> String {
    let mut s = format!("{} x {} layout, N = {}\n", t.a(), t.b(), t.layout().total());
    s += &format!("{:<6} {:>12} {:>6} {:>12}\n", "cell", "mean", "n", "var");
    for i in 0..t.a() {
        for j in 0..t.b() {
            s += &format!(
                "{:<6} {:>12.4} {:>6} {:>12.4}\n",
                format!("({},{})", i + 1, j + 1),
                t.mean(i, j),
                t.layout().n(i, j),
                t.var(i, j)
            );
        }
    }
    let m = t.marginals();
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.4}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    s += &format!("row means    {}\n", fmt(&m.rows));
    s += &format!("column means {}\n", fmt(&m.cols));
    s += &format!("grand mean   {:.4}\n", m.grand);
    s
}

fn cmd_test(args: &TestArgs) -> Result<String> {
    let method = TestMethod::from(args.method);
    let seed = match (method.is_bootstrap(), args.seed) {
        (true, None) => {
            return Err(AnovaError::InvalidParameter(
                "--seed is required for bootstrap methods (lrt, mct)".into(),
            ))
        }
        (_, s) => s.unwrap_or(0),
    };
    let table = args.input.load()?;
    let request = TestRequest {
        target: args.target.into(),
        method,
        alpha: args.alpha,
        bootstrap: BootstrapSettings {
            replicates: args.boot_reps,
            alpha: args.alpha,
            seed,
            ..Default::default()
        },
        solver: args.solver.settings(),
        mc: McSettings {
            draws: args.mc_draws,
            seed: args.mc_seed,
        },
    };
    let report = run_test(&table, &request)?;
    if let Some(path) = &args.dump_null {
        let values = report.null_sample.as_deref().ok_or_else(|| {
            AnovaError::InvalidParameter("--dump-null needs a bootstrap method (lrt, mct)".into())
        })?;
        write_null_sample(values, File::create(path)?)?;
    }
    Ok(match args.format {
        Format::Json => report.to_json()? + "\n",
        Format::Text => report.to_string(),
    })
}

fn cmd_ci(args: &CiArgs) -> Result<String> {
    let table = args.input.load()?;
    let boot = BootstrapSettings {
        replicates: args.boot_reps,
        alpha: args.alpha,
        seed: args.seed,
        ..Default::default()
    };
    let ci = simultaneous_ci(
        &table,
        args.family.into(),
        args.alpha,
        &boot,
        &args.solver.settings(),
    )?;
    Ok(match args.format {
        CiFormat::Json => serde_json::to_string_pretty(&ci)? + "\n",
        CiFormat::Csv => ci.to_csv()?,
        CiFormat::Text => ci.to_string(),
    })
}

fn cmd_simulate(args: &SimulateArgs) -> Result<String> {
    let mut configs = match (&args.config, &args.preset) {
        (Some(path), _) => read_configs(File::open(path)?)?,
        (None, Some(name)) => presets::preset(name)?,
        (None, None) => unreachable!("clap requires --config or --preset"),
    };
    for c in &mut configs {
        if let Some(o) = args.outer {
            c.outer_reps = o;
        }
        if let Some(h) = args.inner {
            c.bootstrap.replicates = h;
        }
        if let Some(s) = args.seed {
            c.seed = s;
        }
        c.validate()?;
    }
    let results = match &args.out {
        Some(path) => {
            let mut f = File::create(path)?;
            size_power_grid(&configs, Some(&mut f))?
        }
        None => size_power_grid(&configs, None)?,
    };
    Ok(simulation_text(&results))
}

fn simulation_text(results: &[SimulationResult]) -> String {
    let w = results
        .iter()
        .map(|r| r.config.id.len())
        .max()
        .unwrap_or(6)
        .max(6);
    let mut s = format!(
        "{:<w$}  {:>6}  {:<11}  {:<6}  {:>6}  {:>10}  {:>8}\n",
        "config", "c", "test", "method", "reps", "proportion", "stderr"
    );
    for r in results {
        for o in &r.outcomes {
            s += &format!(
                "{:<w$}  {:>6}  {:<11}  {:<6}  {:>6}  {:>10.4}  {:>8.4}\n",
                r.config.id,
                r.config.effect_scale,
                o.test.target_name(),
                o.test.method.short_name(),
                o.reps,
                o.proportion,
                o.stderr
            );
        }
    }
    s
}

fn cmd_quantile(args: &QuantileArgs) -> Result<String> {
    if let Some(df) = args.df {
        let q = chi_square_critical(df, args.alpha)?;
        return Ok(format!(
            "chi-square df {df}, upper {}: {q:.6}\n",
            args.alpha
        ));
    }
    let (sigma, origin) = if let Some(path) = &args.corr {
        let g: Grid<f64> = read_matrix_csv_path(path, "corr")?;
        if g.rows() != g.cols() {
            return Err(AnovaError::DimensionMismatch(format!(
                "corr is {}x{}, expected a square matrix",
                g.rows(),
                g.cols()
            )));
        }
        (
            nalgebra::DMatrix::from_row_slice(g.rows(), g.cols(), g.as_slice()),
            "given matrix",
        )
    } else if args.input.given() {
        (
            build_sigma_t(&args.input.load()?)?.sigma_t,
            "plug-in treatment correlation",
        )
    } else {
        return Err(AnovaError::InvalidParameter(
            "give --df, --corr, or a summary input".into(),
        ));
    };
    let d = equicoordinate_quantile_of(&sigma, args.alpha, args.draws, args.seed)?;
    Ok(format!(
        "equicoordinate normal quantile, q = {}, {origin}, level {}: {d:.6} ({} draws, seed {})\n",
        sigma.nrows(),
        1.0 - args.alpha,
        args.draws,
        args.seed
    ))
}

/// Entry point used by the binary.
pub fn main() -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    main_with_args(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
