use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mtls_core::experiment::tables::{self, TableConfig, TableReport};
use mtls_core::experiment::{finite_difference_jacobian, BoundAnalysis, BoundTrialSpec};
use mtls_core::perturbation::jacobian_new;
use mtls_core::structured::structured_condition_numbers;
use mtls_core::{
    condition_report, io, solve_with, ConditionOptions, Config, MtlsError, MtlsProblem, StructureBasis,
};

#[derive(Parser)]
#[command(name = "mtls", version, about = "Mixed least squares / total least squares solver and condition analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem and print x, sigma2, the residual and the genericity gap.
    Solve {
        #[command(flatten)]
        input: ProblemArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Normwise, mixed and componentwise condition numbers.
    Cond {
        #[command(flatten)]
        input: ProblemArgs,
        /// Form the explicit Jacobian (exact mixed/componentwise values, subject to the dense cap).
        #[arg(long)]
        full_k: bool,
        /// Also evaluate the cross-product formulas.
        #[arg(long)]
        all_forms: bool,
        /// Structure basis file; adds structured condition numbers.
        #[arg(long)]
        structure: Option<PathBuf>,
    },
    /// Perturb the data entrywise, re-solve and compare with every bound.
    Perturb {
        #[command(flatten)]
        input: ProblemArgs,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Zero-based columns of A left unperturbed.
        #[arg(long, value_delimiter = ',')]
        exact_cols: Vec<usize>,
        /// Structure basis file; the perturbation then acts on its parameters.
        #[arg(long)]
        structure: Option<PathBuf>,
        /// Zero-based structure parameters left unperturbed.
        #[arg(long, value_delimiter = ',')]
        exact_params: Vec<usize>,
    },
    /// Reproduce one of the experiment tables.
    Experiment {
        #[arg(value_enum)]
        table: Table,
        #[arg(long, default_value_t = TableConfig::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = TableConfig::default().trials)]
        trials: usize,
        /// Write the full JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verification oracles.
    Oracle {
        #[command(subcommand)]
        oracle: Oracle,
    },
}

#[derive(Subcommand)]
enum Oracle {
    /// Central finite-difference Jacobian compared with the analytic one.
    Fd {
        #[command(flatten)]
        input: ProblemArgs,
        #[arg(long, default_value_t = 1e-6)]
        h: f64,
        /// Write the finite-difference Jacobian as a Matrix Market array.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ProblemArgs {
    /// Matrix Market or headerless CSV file with A.
    #[arg(long)]
    matrix: PathBuf,
    /// One value per line.
    #[arg(long)]
    rhs: PathBuf,
    /// Number of exact leading columns.
    #[arg(long)]
    n1: usize,
}

impl ProblemArgs {
    fn load(&self) -> mtls_core::Result<MtlsProblem> {
        let a = io::read_matrix(&self.matrix)?;
        let b = io::read_vector(&self.rhs)?;
        MtlsProblem::new(a, b, self.n1)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum Table {
    Table1,
    Table2,
    Table3,
    Table4,
}

#[derive(Serialize)]
struct SolveOutput {
    x: Vec<f64>,
    sigma2: f64,
    residual_norm: f64,
    gap: f64,
}

#[derive(Serialize)]
struct FdOutput {
    h: f64,
    rows: usize,
    cols: usize,
    rel_frobenius_error: f64,
    max_abs_error: f64,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<MtlsError>() {
        Some(MtlsError::NonGeneric { .. }) => 2,
        Some(MtlsError::ConsistentSystem { .. }) => 3,
        Some(
            MtlsError::Parse { .. } | MtlsError::Io(_) | MtlsError::Dimension(_) | MtlsError::RankDeficient { .. },
        ) => 4,
        _ => 1,
    }
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load_structure(path: &Path) -> mtls_core::Result<StructureBasis> {
    StructureBasis::parse(&std::fs::read_to_string(path)?)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let cfg = Config::from_env();
    match cli.command {
        Command::Solve { input, format } => {
            let sol = solve_with(&input.load()?, &cfg)?;
            let out = SolveOutput {
                x: sol.x().as_slice().to_vec(),
                sigma2: sol.sigma2(),
                residual_norm: sol.r().norm(),
                gap: sol.gap(),
            };
            match format {
                Format::Json => print_json(&out)?,
                Format::Text => {
                    for v in &out.x {
                        println!("{v:.17e}");
                    }
                    println!("sigma2 {:.17e}", out.sigma2);
                    println!("residual_norm {:.17e}", out.residual_norm);
                    println!("gap {:.17e}", out.gap);
                }
            }
        }
        Command::Cond { input, full_k, all_forms, structure } => {
            let sol = solve_with(&input.load()?, &cfg)?;
            let report = condition_report(&sol, ConditionOptions { explicit_k: full_k, cross_product: all_forms })?;
            let mut value = serde_json::to_value(&report)?;
            if let Some(path) = structure {
                let basis = load_structure(&path)?;
                let s = structured_condition_numbers(&sol, &basis)?;
                value["structured"] = serde_json::to_value(&s)?;
            }
            print_json(&value)?;
        }
        Command::Perturb { input, eps, seed, exact_cols, structure, exact_params } => {
            let problem = input.load()?;
            let structure = structure.map(|p| load_structure(&p)).transpose()?;
            let spec = BoundTrialSpec { exact_cols, structure, exact_params };
            let record = BoundAnalysis::new(&problem, spec, &cfg)?.trial(eps, seed)?;
            let violations = record.violations();
            print_json(&serde_json::json!({ "record": record, "violations": violations }))?;
            return Ok(violations.is_empty());
        }
        Command::Experiment { table, seed, trials, out } => {
            let tc = TableConfig { seed, trials, cfg };
            let report: TableReport = match table {
                Table::Table1 => tables::table1(&tc)?,
                Table::Table2 => tables::table2(&tc)?,
                Table::Table3 => tables::table3(&tc)?,
                Table::Table4 => tables::table4(&tc)?,
            };
            print!("{}", report.to_text());
            if let Some(path) = out {
                std::fs::write(&path, serde_json::to_string_pretty(&report)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            return Ok(report.passed());
        }
        Command::Oracle { oracle: Oracle::Fd { input, h, out } } => {
            let problem = input.load()?;
            let fd = finite_difference_jacobian(&problem, h, &cfg)?;
            let k = jacobian_new(&solve_with(&problem, &cfg)?)?;
            let diff = &fd - k.matrix();
            if let Some(path) = out {
                std::fs::write(&path, io::to_matrix_market(&fd)).with_context(|| format!("writing {}", path.display()))?;
            }
            print_json(&FdOutput {
                h,
                rows: fd.nrows(),
                cols: fd.ncols(),
                rel_frobenius_error: diff.norm() / k.matrix().norm(),
                max_abs_error: diff.amax(),
            })?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
