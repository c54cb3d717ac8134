use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use railcg::driver::write_trace;
use railcg::harness::{self, BatchOptions, HarnessError, ScenarioConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Dispatch disturbed scenarios by column generation over maximal conflict
/// cliques. Flags override the scenario file.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Number of services taken from the timetable.
    #[arg(long)]
    n: Option<usize>,
    /// Routes per point pair, or `unlimited`.
    #[arg(long, value_parser = parse_k)]
    k: Option<RouteLimit>,
    /// Relative gap at which column generation stops.
    #[arg(long)]
    gap: Option<f64>,
    /// Seconds per replication.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
    /// Pricing threads, or concurrent replications with --parallel-reps.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Output directory; the report goes to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write one iteration trace CSV per replication into the report
    /// directory.
    #[arg(long)]
    trace: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    parallel_reps: bool,
    /// Report zero for every time measurement.
    #[arg(long)]
    no_timing: bool,
    /// Join only paths of different services in the conflict graph.
    #[arg(long)]
    cross_service_only: bool,
}

/// `None` for no limit.
#[derive(Debug, Clone, Copy)]
struct RouteLimit(Option<usize>);

fn parse_k(s: &str) -> Result<RouteLimit, String> {
    if s == "unlimited" {
        return Ok(RouteLimit(None));
    }
    s.parse::<usize>()
        .map(|k| RouteLimit(Some(k)))
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("{failed} replications failed");
            ExitCode::from(3)
        }
        Err(HarnessError::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(HarnessError::Model(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<usize, HarnessError> {
    let mut scenario = ScenarioConfig::load(&cli.scenario)?;
    if let Some(n) = cli.n {
        scenario.n = Some(n);
    }
    if let Some(RouteLimit(k)) = cli.k {
        scenario.k = k;
    }
    if let Some(gap) = cli.gap {
        scenario.gap = gap;
    }
    if let Some(t) = cli.time_limit {
        scenario.time_limit = Some(t);
    }
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    if let Some(r) = cli.replications {
        scenario.replications = r;
    }
    scenario.validate()?;
    if cli.threads == 0 {
        return Err(HarnessError::Config("threads must be at least 1".into()));
    }
    if cli.trace && cli.report.is_none() {
        return Err(HarnessError::Config("--trace needs --report".into()));
    }
    let instance = scenario.instance()?;
    let options = BatchOptions {
        threads: cli.threads,
        parallel_reps: cli.parallel_reps,
        timing: !cli.no_timing,
        service_edges: !cli.cross_service_only,
    };
    let report = harness::run_batch(&scenario, &instance, &options)?;

    match &cli.report {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            match cli.format {
                Format::Csv => harness::write_csv(
                    BufWriter::new(File::create(dir.join("report.csv"))?),
                    &report.rows,
                )?,
                Format::Json => harness::write_json(
                    BufWriter::new(File::create(dir.join("report.json"))?),
                    &report,
                )?,
            }
            if cli.trace {
                for (row, trace) in report.rows.iter().zip(&report.traces) {
                    let path = dir.join(format!("trace_{:03}.csv", row.replication));
                    write_trace(BufWriter::new(File::create(path)?), trace)?;
                }
            }
        }
        None => match cli.format {
            Format::Csv => harness::write_csv(io::stdout().lock(), &report.rows)?,
            Format::Json => harness::write_json(io::stdout().lock(), &report)?,
        },
    }
    let a = &report.aggregates;
    if a.replications == 0 {
        eprintln!("no replication finished");
        return Ok(report.failures.len());
    }
    eprintln!(
        "{} replications: cpu mean {:.3}s (min {:.3}, max {:.3}), delay quotient {:.3}, gap {:.4}, integer {:.0}%, cliques {:.1}, iterations {:.1}, paths {:.1}",
        a.replications,
        a.cpu_mean,
        a.cpu_min,
        a.cpu_max,
        a.delay_quotient_mean,
        a.gap_mean,
        a.integer_share * 100.0,
        a.cliques_mean,
        a.iterations_mean,
        a.paths_mean
    );
    Ok(report.failures.len())
}
