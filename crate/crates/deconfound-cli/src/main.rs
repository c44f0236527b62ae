//! Command-line front end. Subcommands cover the full workflow:
//! generate synthetic data, run a replicated experiment from a config
//! file, run the exhaustive weight-variability study, dump one
//! replication's balance table, and render a report's plots.
//!
//! Exit codes: 0 success, 1 internal panic, 2 usage, then one code per
//! error family (3 configuration, 4 data, 5 numerics, 6 I/O).

use std::fs;
use std::panic;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use deconfound::error::{Error, Result};
use deconfound::harness::config::{DatasetSpec, ExperimentConfig};
use deconfound::harness::cvstudy::{run_cv_study, CvStudyConfig, EnumerationMode};
use deconfound::harness::report::{audit_report, read_ecdf, read_report, write_report};
use deconfound::harness::run::{run_experiment, UNWEIGHTED_LABEL};
use deconfound::harness::svg::{svg_cv_hist, svg_ecdf, svg_smd_bars};
use deconfound::par::Execution;

#[derive(Parser)]
#[command(
    name = "deconfound",
    about = "Propensity weighting schemes, balance diagnostics, and effect benchmarks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ExecutionArgs {
    /// Run replications and enumerations on one thread.
    #[arg(long)]
    sequential: bool,
}

impl ExecutionArgs {
    fn mode(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate one synthetic dataset as CSV.
    Generate {
        /// Dataset family: linear_{low,moderate,high},
        /// nonlinear_{low,moderate,high}, or roles.
        #[arg(long)]
        dataset: String,
        /// Number of samples.
        #[arg(long, default_value_t = 1500)]
        n: usize,
        /// Generator seed.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a replicated experiment described by a config file.
    Experiment {
        /// Path to a key=value config file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for report.json and the CSV tables.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        execution: ExecutionArgs,
    },
    /// Enumerate the propensity grid and compare weight variability.
    Cvstudy {
        /// Enumeration mode: tuples or multisets.
        #[arg(long, default_value = "tuples")]
        mode: String,
        /// Smallest grid level.
        #[arg(long, default_value_t = 0.10)]
        grid_min: f64,
        /// Largest grid level.
        #[arg(long, default_value_t = 0.90)]
        grid_max: f64,
        /// Spacing between levels.
        #[arg(long, default_value_t = 0.10)]
        step: f64,
        /// Probabilities per enumerated cohort.
        #[arg(long, default_value_t = 6)]
        cohort_size: usize,
        /// Output directory for cv_diff.csv.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        execution: ExecutionArgs,
    },
    /// Print one replication's balance table for a config.
    Balance {
        /// Path to a key=value config file.
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Render SVG plots from a written report directory.
    Plots {
        /// Directory holding report.json and ecdf.csv, and optionally
        /// cv_diff.csv.
        #[arg(long)]
        report: PathBuf,
    },
}

fn generate(dataset: &str, n: usize, seed: u64, out: &Path) -> Result<()> {
    let spec: DatasetSpec = dataset.parse()?;
    let config = ExperimentConfig {
        dataset: spec.clone(),
        n,
        base_seed: seed,
        ..ExperimentConfig::default()
    };
    if !spec.is_synthetic() {
        return Err(Error::Config(format!(
            "dataset {dataset:?} is loaded from files, not generated"
        )));
    }
    config.validate()?;
    let bundle = deconfound::harness::run::synthesize(&config, seed)?;
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let file = fs::File::create(out).map_err(|e| Error::io(out, e))?;
    bundle.write_csv(std::io::BufWriter::new(file))?;
    println!(
        "wrote {} rows x {} covariates to {}",
        bundle.n_samples(),
        bundle.n_features(),
        out.display()
    );
    Ok(())
}

fn experiment(config_path: &Path, out: &Path, execution: Execution) -> Result<()> {
    let text = fs::read_to_string(config_path).map_err(|e| Error::io(config_path, e))?;
    let config = ExperimentConfig::parse(&text)?;
    let output = run_experiment(&config, execution)?;
    write_report(out, &output)?;
    println!(
        "dataset {} | {} replications | config {}",
        output.report.provenance.dataset,
        output.report.provenance.replications,
        &output.report.provenance.config_sha256[..12],
    );
    for agg in &output.report.aggregates {
        let eps = agg
            .epsilon_ate_mean
            .map(|v| format!("{v:.6}"))
            .unwrap_or_else(|| "n/a".into());
        let pehe = agg
            .pehe_mean
            .map(|v| format!("{v:.6}"))
            .unwrap_or_else(|| "n/a".into());
        println!(
            "{:<8} ate {:+.6}  ate_err {}  pehe {}  weight_cv {:.4}",
            agg.scheme.to_string(),
            agg.ate_mean,
            eps,
            pehe,
            agg.weight_cv_mean,
        );
    }
    println!("report written to {}", out.display());
    Ok(())
}

fn cvstudy(
    mode: &str,
    grid_min: f64,
    grid_max: f64,
    step: f64,
    cohort_size: usize,
    out: &Path,
    execution: Execution,
) -> Result<()> {
    let config = CvStudyConfig {
        grid_min,
        grid_max,
        step,
        cohort_size,
        mode: mode.parse::<EnumerationMode>()?,
    };
    let result = run_cv_study(&config, execution)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let csv_path = out.join("cv_diff.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| Error::csv(&csv_path, e))?;
    w.write_record(["cv_ipw", "cv_dfw"])
        .map_err(|e| Error::csv(&csv_path, e))?;
    for o in &result.outcomes {
        w.write_record([o.cv_ipw.to_string(), o.cv_dfw.to_string()])
            .map_err(|e| Error::csv(&csv_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    println!(
        "{} cohorts | complement weighting strictly steadier in {} ({:.3}%) | {} exact ties",
        result.total,
        result.wins,
        100.0 * result.fraction,
        result.ties,
    );
    println!("per-cohort table written to {}", csv_path.display());
    Ok(())
}

fn balance(config_path: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(config_path).map_err(|e| Error::io(config_path, e))?;
    let config = ExperimentConfig {
        replications: 1,
        ..ExperimentConfig::parse(&text)?
    };
    let output = run_experiment(&config, Execution::Sequential)?;
    let record = &output.report.replications[0];
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let mut w = csv::Writer::from_path(out).map_err(|e| Error::csv(out, e))?;
    w.write_record(["scheme", "feature", "smd", "ks"])
        .map_err(|e| Error::csv(out, e))?;
    for scheme in &record.schemes {
        for row in &scheme.balance {
            w.write_record([
                scheme.scheme.to_string(),
                row.feature.clone(),
                row.smd.to_string(),
                row.ks.to_string(),
            ])
            .map_err(|e| Error::csv(out, e))?;
        }
    }
    for row in &record.unweighted_balance {
        w.write_record([
            UNWEIGHTED_LABEL.to_string(),
            row.feature.clone(),
            row.smd.to_string(),
            row.ks.to_string(),
        ])
        .map_err(|e| Error::csv(out, e))?;
    }
    w.flush().map_err(|e| Error::io(out, e))?;
    println!(
        "single-replication balance table ({} schemes + baseline) written to {}",
        record.schemes.len(),
        out.display()
    );
    Ok(())
}

fn plots(report_dir: &Path) -> Result<()> {
    let report = read_report(&report_dir.join("report.json"))?;
    audit_report(&report)?;
    let smd_path = report_dir.join("smd.svg");
    fs::write(&smd_path, svg_smd_bars(&report.balance)).map_err(|e| Error::io(&smd_path, e))?;
    println!("wrote {}", smd_path.display());

    let ecdf_rows = read_ecdf(&report_dir.join("ecdf.csv"))?;
    let mut features: Vec<String> = Vec::new();
    for row in &ecdf_rows {
        if !features.contains(&row.feature) {
            features.push(row.feature.clone());
        }
    }
    for feature in &features {
        let path = report_dir.join(format!("ecdf_{feature}.svg"));
        fs::write(&path, svg_ecdf(&ecdf_rows, feature)).map_err(|e| Error::io(&path, e))?;
        println!("wrote {}", path.display());
    }

    let cv_path = report_dir.join("cv_diff.csv");
    if cv_path.exists() {
        let mut reader = csv::Reader::from_path(&cv_path).map_err(|e| Error::csv(&cv_path, e))?;
        let mut outcomes = Vec::new();
        for record in reader.deserialize::<deconfound::harness::cvstudy::CvOutcome>() {
            outcomes.push(record.map_err(|e| Error::csv(&cv_path, e))?);
        }
        let hist_path = report_dir.join("cv_hist.svg");
        fs::write(&hist_path, svg_cv_hist(&outcomes)).map_err(|e| Error::io(&hist_path, e))?;
        println!("wrote {}", hist_path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            dataset,
            n,
            seed,
            out,
        } => generate(&dataset, n, seed, &out),
        Command::Experiment {
            config,
            out,
            execution,
        } => experiment(&config, &out, execution.mode()),
        Command::Cvstudy {
            mode,
            grid_min,
            grid_max,
            step,
            cohort_size,
            out,
            execution,
        } => cvstudy(
            &mode,
            grid_min,
            grid_max,
            step,
            cohort_size,
            &out,
            execution.mode(),
        ),
        Command::Balance { config, out } => balance(&config, &out),
        Command::Plots { report } => plots(&report),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match panic::catch_unwind(panic::AssertUnwindSafe(|| run(cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category().exit_code())
        }
        Err(_) => ExitCode::from(1),
    }
}
