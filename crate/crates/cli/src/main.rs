use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fevt::distributions::{make_law, Calculus, ExtremeValueLaw, TabulatedCdf};
use fevt::families::{frechet_family, generic_family, gumbel_family, weibull_family, WorkedFamily};
use fevt::maxconv::free_max_power;
use fevt::metrics::{
    convergence_table, format_float, kolmogorov_distance, rows_to_csv, rows_to_json,
    ConvergenceRow,
};
use fevt::stein::{stein_bound, validate_density_profile, BoundReport, ValidationReport};
use fevt::{Cdf, Error, NormingSequence, Tolerance};

const EXIT_PARSE: u8 = 2;
const EXIT_HYPOTHESIS: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

/// Extreme value limits under the free max-convolution: law evaluation,
/// max powers, Kolmogorov-distance bounds, hypothesis validation and
/// convergence tables.
///
/// FEVT_TOL overrides the absolute and relative tolerance used when
/// measuring Kolmogorov distances (default 1e-10).
#[derive(Parser)]
#[command(name = "fevt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Gumbel,
    Frechet,
    Weibull,
    Custom,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Output {
    /// Write the artifact here instead of standard output
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FamilyArgs {
    /// Worked family (or `custom` with --input)
    #[arg(long, value_enum)]
    family: Family,

    /// Shape parameter; 0 for gumbel, > 0 for frechet, < 0 for weibull
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    gamma: f64,

    /// Tabulated CDF as JSON {"x": [...], "F": [...]} (family = custom)
    #[arg(long)]
    input: Option<PathBuf>,

    /// Norming scale a_n for a custom family
    #[arg(long, default_value_t = 1.0)]
    norm_a: f64,

    /// Norming shift b_n for a custom family
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    norm_b: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a limit law at a point
    Law {
        /// Which law: gumbel (gamma 0), frechet (gamma > 0), weibull (gamma < 0)
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        gamma: f64,
        /// Evaluate the free limit law (default: classical)
        #[arg(long, conflicts_with = "classical")]
        free: bool,
        #[arg(long)]
        classical: bool,
        /// Evaluation point
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
    },
    /// n-fold free max power of a law or tabulated CDF, exported as a
    /// tabulated JSON CDF
    Convolve {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        n: u64,
        /// Number of export grid points
        #[arg(long, default_value_t = 257)]
        grid: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Stein-type Kolmogorov bound for a worked family at index n
    Bound {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        n: u64,
        /// Also measure the Kolmogorov distance against the free law
        #[arg(long)]
        measure: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Check the density-profile hypotheses for a family at index n
    Validate {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        n: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Convergence table for n = 2..=n-max
    Table {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        n_max: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        output: Output,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &CliError) -> u8 {
    match e {
        CliError::Parse(_) => EXIT_PARSE,
        CliError::Core(Error::HypothesesViolated { .. }) => EXIT_HYPOTHESIS,
        CliError::Core(Error::InvalidTabulated(_)) => EXIT_PARSE,
        CliError::Core(
            Error::QuadratureFailure { .. }
            | Error::NoSignChange { .. }
            | Error::LimitNotDetected { .. }
            | Error::Domain(_)
            | Error::DegeneratePower,
        ) => EXIT_NUMERIC,
        CliError::Core(_) => EXIT_PARSE,
    }
}

enum CliError {
    Parse(String),
    Core(Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn tolerance() -> CliResult<Tolerance> {
    match std::env::var("FEVT_TOL") {
        Ok(raw) => {
            let t: f64 = raw
                .parse()
                .map_err(|_| CliError::Parse(format!("FEVT_TOL is not a number: {raw:?}")))?;
            Tolerance::new(t, t, Tolerance::default().max_refinements).map_err(CliError::from)
        }
        Err(_) => Ok(Tolerance::default()),
    }
}

fn emit(output: &Output, artifact: &str) -> CliResult<()> {
    match &output.output {
        Some(path) => fs::write(path, artifact)
            .map_err(|e| CliError::Parse(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{artifact}");
            Ok(())
        }
    }
}

fn read_tabulated(path: &PathBuf) -> CliResult<TabulatedCdf> {
    let raw = fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&raw).map_err(|e| CliError::Parse(e.to_string()))
}

fn family_gamma(args: &FamilyArgs) -> CliResult<f64> {
    match args.family {
        Family::Gumbel => {
            if args.gamma != 0.0 {
                return Err(CliError::Parse("gumbel requires gamma = 0".into()));
            }
            Ok(0.0)
        }
        Family::Frechet => {
            if args.gamma <= 0.0 {
                return Err(CliError::Parse("frechet requires gamma > 0".into()));
            }
            Ok(args.gamma)
        }
        Family::Weibull => {
            if args.gamma >= 0.0 {
                return Err(CliError::Parse("weibull requires gamma < 0".into()));
            }
            Ok(args.gamma)
        }
        Family::Custom => Ok(args.gamma),
    }
}

fn build_family(args: &FamilyArgs, n: u64) -> CliResult<WorkedFamily> {
    let gamma = family_gamma(args)?;
    match args.family {
        Family::Gumbel => Ok(gumbel_family(n)?),
        Family::Frechet => Ok(frechet_family(gamma, n)?),
        Family::Weibull => Ok(weibull_family(gamma, n)?),
        Family::Custom => {
            let path = args
                .input
                .as_ref()
                .ok_or_else(|| CliError::Parse("family = custom requires --input".into()))?;
            let sample = read_tabulated(path)?.to_cdf();
            if sample.log_density_derivative().is_none() {
                eprintln!(
                    "warning: custom input has no closed-form log-density derivative; \
                     it will be differentiated numerically, which limits accuracy"
                );
            }
            let norming = NormingSequence::new(args.norm_a, args.norm_b, n)?;
            Ok(generic_family(&sample, gamma, &norming)?)
        }
    }
}

fn sample_cdf(args: &FamilyArgs) -> CliResult<Cdf> {
    match args.family {
        Family::Custom => {
            let path = args
                .input
                .as_ref()
                .ok_or_else(|| CliError::Parse("family = custom requires --input".into()))?;
            Ok(read_tabulated(path)?.to_cdf())
        }
        _ => {
            let gamma = family_gamma(args)?;
            Ok(make_law(&ExtremeValueLaw::classical(gamma)?)?)
        }
    }
}

fn bound_report_json(r: &BoundReport) -> String {
    let measured = r
        .measured_dk
        .map(format_float)
        .unwrap_or_else(|| "null".to_string());
    format!(
        "{{\n  \"n\": {},\n  \"gamma\": {},\n  \"integral_term\": {},\n  \"boundary_term\": {},\n  \"total\": {},\n  \"measured_dk\": {},\n  \"reference_rate\": {}\n}}",
        r.n,
        format_float(r.gamma),
        format_float(r.integral_term),
        format_float(r.boundary_term),
        format_float(r.total),
        measured,
        format_float(r.reference_rate)
    )
}

fn validation_json(r: &ValidationReport) -> String {
    let mut out = format!(
        "{{\n  \"gamma\": {},\n  \"n\": {},\n  \"passed\": {},\n  \"checks\": [\n",
        format_float(r.gamma),
        r.n,
        r.passed()
    );
    for (i, c) in r.checks.iter().enumerate() {
        out.push_str(&format!(
            "    {{\"condition\": {}, \"passed\": {}, \"evidence\": {}}}",
            serde_json::to_string(&c.condition).expect("string encodes"),
            c.passed,
            serde_json::to_string(&c.evidence).expect("string encodes")
        ));
        if i + 1 < r.checks.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("  ]\n}");
    out
}

fn export_tabulated(cdf: &Cdf, grid: usize) -> CliResult<String> {
    if grid < 2 {
        return Err(CliError::Parse("--grid must be at least 2".into()));
    }
    let mut xs = Vec::with_capacity(grid);
    for i in 0..grid {
        let p = (i as f64 + 0.5) / grid as f64;
        let x = cdf.quantile(p)?;
        if xs.last().map_or(true, |&prev: &f64| x > prev) {
            xs.push(x);
        }
    }
    let fx: Vec<String> = xs.iter().map(|&x| format_float(x)).collect();
    let ff: Vec<String> = xs.iter().map(|&x| format_float(cdf.eval(x))).collect();
    Ok(format!(
        "{{\n  \"x\": [{}],\n  \"F\": [{}]\n}}",
        fx.join(", "),
        ff.join(", ")
    ))
}

fn table_rows(args: &FamilyArgs, n_max: u64) -> CliResult<Vec<ConvergenceRow>> {
    if n_max < 2 {
        return Err(CliError::Parse("--n-max must be at least 2".into()));
    }
    let gamma = family_gamma(args)?;
    let ns: Vec<u64> = (2..=n_max).collect();
    let rows = match args.family {
        Family::Gumbel => convergence_table(gamma, gumbel_family, &ns)?,
        Family::Frechet => convergence_table(gamma, |n| frechet_family(gamma, n), &ns)?,
        Family::Weibull => convergence_table(gamma, |n| weibull_family(gamma, n), &ns)?,
        Family::Custom => {
            let path = args
                .input
                .as_ref()
                .ok_or_else(|| CliError::Parse("family = custom requires --input".into()))?;
            let sample = read_tabulated(path)?.to_cdf();
            let (a, b) = (args.norm_a, args.norm_b);
            convergence_table(
                gamma,
                move |n| {
                    let norming = NormingSequence::new(a, b, n)?;
                    generic_family(&sample, gamma, &norming)
                },
                &ns,
            )?
        }
    };
    Ok(rows)
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Law {
            family,
            gamma,
            free,
            classical: _,
            x,
        } => {
            let args = FamilyArgs {
                family,
                gamma,
                input: None,
                norm_a: 1.0,
                norm_b: 0.0,
            };
            let gamma = family_gamma(&args)?;
            let calculus = if free { Calculus::Free } else { Calculus::Classical };
            let law = make_law(&ExtremeValueLaw::from_gamma(calculus, gamma)?)?;
            println!("{}", format_float(law.eval(x)));
            Ok(())
        }
        Command::Convolve {
            family,
            n,
            grid,
            output,
        } => {
            let sample = sample_cdf(&family)?;
            let power = free_max_power(&sample, n)?;
            emit(&output, &export_tabulated(&power, grid)?)
        }
        Command::Bound {
            family,
            n,
            measure,
            output,
        } => {
            let gamma = family_gamma(&family)?;
            let fam = build_family(&family, n)?;
            let mut report = stein_bound(gamma, &fam.profile)?;
            if measure {
                let target = make_law(&ExtremeValueLaw::free(gamma)?)?;
                report.measured_dk =
                    Some(kolmogorov_distance(&fam.cdf, &target, &tolerance()?));
            }
            emit(&output, &bound_report_json(&report))
        }
        Command::Validate { family, n, output } => {
            let gamma = family_gamma(&family)?;
            let fam = build_family(&family, n)?;
            let report = validate_density_profile(gamma, &fam.profile);
            emit(&output, &validation_json(&report))?;
            if let Some(fail) = report.first_failure() {
                return Err(Error::HypothesesViolated {
                    condition: fail.condition.clone(),
                    detail: fail.evidence.clone(),
                }
                .into());
            }
            Ok(())
        }
        Command::Table {
            family,
            n_max,
            format,
            output,
        } => {
            let rows = table_rows(&family, n_max)?;
            let artifact = match format {
                Format::Csv => rows_to_csv(&rows),
                Format::Json => rows_to_json(&rows),
            };
            emit(&output, artifact.trim_end_matches('\n'))
        }
    }
}
