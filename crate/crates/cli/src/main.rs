use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use afftop::output::Table;
use afftop::run::{self, Outcome};
use afftop::scenario::{parse_scenario, Format, Scenario};
use afftop::{CliError, CliResult};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "afftop", version, about = "Simulate and analyse affinely-rigid bodies from JSON scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the equations of motion and write the trajectory.
    Simulate(Common),
    /// Integrate in the full chart and write the reduced trajectory.
    Reduce {
        #[command(flatten)]
        common: Common,
        /// Write the scenario with its initial state in reduced form.
        #[arg(long)]
        scenario_out: Option<PathBuf>,
    },
    /// Classify the geodesic generator as bounded, unbounded or marginal.
    Classify(Common),
    /// Residuals of the balance laws along the scenario's generator curves.
    Equilibria(Common),
    /// Run the consistency checks and the scenario's own assertions.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario files; several run in parallel (see --jobs).
    #[arg(long = "config", short = 'c', required = true, num_args = 1..)]
    configs: Vec<PathBuf>,
    /// Output file, or directory when several configs are given.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Column groups to keep, comma separated.
    #[arg(long, value_delimiter = ',')]
    fields: Option<Vec<String>>,
    #[arg(long, short = 'j', default_value_t = 1)]
    jobs: usize,
}

#[derive(Clone, Copy)]
enum Kind {
    Simulate,
    Reduce,
    Classify,
    Equilibria,
    Verify,
}

/// What one scenario produced, buffered so parallel runs print in order.
struct Job {
    stdout: Vec<u8>,
    stderr: String,
    code: u8,
}

fn load(path: &Path, seed: Option<u64>) -> CliResult<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    Ok(parse_scenario(&text, seed)?)
}

fn execute(kind: Kind, sc: &Scenario) -> CliResult<Outcome> {
    match kind {
        Kind::Simulate => run::simulate(sc),
        Kind::Reduce => run::reduce(sc),
        Kind::Classify => run::classify(sc),
        Kind::Equilibria => run::equilibria(sc),
        Kind::Verify => run::verify(sc),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn data_path(common: &Common, config: &Path, sc: &Scenario, format: Format) -> Option<PathBuf> {
    let ext = match format {
        Format::Csv => "csv",
        Format::Jsonl => "jsonl",
    };
    match &common.output {
        Some(dir) if common.configs.len() > 1 => Some(dir.join(format!("{}.{ext}", config.file_stem().unwrap_or_default().to_string_lossy()))),
        Some(p) => Some(p.clone()),
        None => sc.doc.outputs.as_ref().and_then(|o| o.path.as_ref()).map(|p| config.parent().unwrap_or(Path::new(".")).join(p)),
    }
}

fn one(kind: Kind, common: &Common, config: &Path, scenario_out: Option<&Path>) -> Job {
    let mut job = Job { stdout: Vec::new(), stderr: String::new(), code: 0 };
    let result = (|| -> CliResult<()> {
        let sc = load(config, common.seed)?;
        let outcome = execute(kind, &sc)?;
        let doc_out = sc.doc.outputs.clone().unwrap_or_default();
        let format = common.format.or(doc_out.format).unwrap_or(Format::Csv);
        let report = outcome.report.join("\n") + "\n";
        if matches!(kind, Kind::Verify) {
            job.stdout.extend(report.as_bytes());
        } else {
            job.stderr.push_str(&report);
        }
        if let Some(table) = &outcome.table {
            let fields = common.fields.clone().or(doc_out.fields);
            let table: Table = match &fields {
                Some(f) => table.select(f),
                None => table.clone(),
            };
            let text = table.to_string(format);
            match data_path(common, config, &sc, format) {
                Some(p) => write_file(&p, text.as_bytes())?,
                None => job.stdout.extend(text.as_bytes()),
            }
        }
        if let (Some(path), Some(doc)) = (scenario_out, &outcome.scenario_out) {
            write_file(path, doc.as_bytes())?;
        }
        if outcome.failures > 0 {
            return Err(CliError::Verification(outcome.failures));
        }
        Ok(())
    })();
    if let Err(e) = result {
        match e {
            CliError::Io { .. } => job.stderr.push_str(&format!("error: {e}\n")),
            _ => job.stderr.push_str(&format!("error: {}: {e}\n", config.display())),
        }
        job.code = e.exit_code();
    }
    job
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common, scenario_out) = match &cli.command {
        Command::Simulate(c) => (Kind::Simulate, c, None),
        Command::Reduce { common, scenario_out } => (Kind::Reduce, common, scenario_out.as_deref()),
        Command::Classify(c) => (Kind::Classify, c, None),
        Command::Equilibria(c) => (Kind::Equilibria, c, None),
        Command::Verify(c) => (Kind::Verify, c, None),
    };
    if common.configs.len() > 1 {
        if scenario_out.is_some() {
            eprintln!("error: --scenario-out takes a single config");
            return ExitCode::from(1);
        }
        if let Some(dir) = &common.output {
            if let Err(e) = std::fs::create_dir_all(dir) {
                eprintln!("error: {}: {e}", dir.display());
                return ExitCode::from(1);
            }
        }
    }
    let jobs = common.jobs.max(1);
    let mut results: Vec<Option<Job>> = (0..common.configs.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        for (chunk_configs, chunk_results) in common.configs.chunks(jobs).zip(results.chunks_mut(jobs)) {
            let handles: Vec<_> = chunk_configs.iter().map(|cfg| s.spawn(move || one(kind, common, cfg, scenario_out))).collect();
            for (slot, h) in chunk_results.iter_mut().zip(handles) {
                *slot = Some(h.join().expect("scenario thread panicked"));
            }
        }
    });
    let mut code = 0;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for job in results.into_iter().flatten() {
        let _ = lock.write_all(&job.stdout);
        eprint!("{}", job.stderr);
        code = code.max(job.code);
    }
    let _ = lock.flush();
    ExitCode::from(code)
}
