use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fracburgers::run::kernel_table;
use fracburgers::{
    load_scenario, preset, render_dir, run_solve, run_verify, CheckKind, CliError, CliResult,
    RunOptions, RunReport, Scenario, EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_OK, PRESETS,
};
use fracburgers_core::kernel::StabilityParams;
use fracburgers_core::verify::{check_kernel, KernelCheckOptions, Status};

#[derive(Parser)]
#[command(name = "fracburgers", version, about = "Solve the fractal Burgers equation and check its asymptotics")]
struct Cli {
    /// Worker threads; falls back to FRACBURGERS_THREADS, then all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Recorded in reports; solver results never depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Scenario file.
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    config: Option<PathBuf>,
    /// Bundled scenario name (see `presets`).
    #[arg(long)]
    scenario: Option<String>,
    /// Output directory (default: the scenario's `out`, else out/<name>).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Source {
    fn load(&self) -> CliResult<Scenario> {
        match (&self.config, &self.scenario) {
            (Some(path), _) => load_scenario(path),
            (None, Some(name)) => preset(name),
            (None, None) => unreachable!("clap requires one source"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the scenario and write the trajectory.
    Solve {
        #[command(flatten)]
        source: Source,
    },
    /// Run the scenario's checks (or only those named with --check).
    Verify {
        #[command(flatten)]
        source: Source,
        /// Check to run, e.g. two-sided; repeatable.
        #[arg(long = "check")]
        checks: Vec<String>,
        /// Reuse a trajectory already in the output directory if it matches.
        #[arg(long)]
        reuse: bool,
        /// Print the full JSON report on stdout.
        #[arg(long)]
        json: bool,
    },
    /// Dump the kernel profile at t = 1 as CSV.
    Kernel {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 10)]
        points_per_decade: usize,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also run the kernel invariants and print their JSON result.
        #[arg(long)]
        check: bool,
    },
    /// Re-render the plots of an output directory from its CSV files.
    Report { dir: PathBuf },
    /// List the bundled scenarios.
    Presets,
}

fn summary(report: &RunReport) {
    for c in &report.checks {
        let status = match c.status {
            Status::Pass => "pass",
            Status::Trivial => "pass (trivial)",
            Status::Fail => "FAIL",
        };
        println!("{:<24} {status}", c.check);
        for n in &c.notes {
            println!("    {n}");
        }
    }
}

fn verdict(pass: bool) -> i32 {
    if pass {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

fn execute(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Solve { source } => {
            let sc = source.load()?;
            let opts = RunOptions { out_dir: source.out.clone(), seed: cli.seed, ..Default::default() };
            let report = run_solve(&sc, &opts)?;
            println!("wrote {} artifacts to {}", report.artifacts.len(), opts.out_dir.map(|p| p.display().to_string()).unwrap_or(sc.output_dir()));
            Ok(EXIT_OK)
        }
        Command::Verify { source, checks, reuse, json } => {
            let sc = source.load()?;
            let only = checks
                .iter()
                .map(|c| {
                    CheckKind::parse(c).ok_or_else(|| {
                        CliError::Validation(vec![format!(
                            "unknown check `{c}` (known: {})",
                            CheckKind::ALL.map(|k| k.name()).join(", ")
                        )])
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            let opts = RunOptions { out_dir: source.out.clone(), only, reuse, seed: cli.seed };
            let report = run_verify(&sc, &opts)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report).unwrap_or_default());
            } else {
                summary(&report);
            }
            Ok(verdict(report.pass))
        }
        Command::Kernel { alpha, d, points_per_decade, out, check } => {
            let params = StabilityParams::new(alpha, d).map_err(|e| CliError::Validation(vec![e.to_string()]))?;
            let table = kernel_table(params, points_per_decade)?;
            match &out {
                Some(path) => fracburgers::output::write_atomic(path, table.as_bytes())?,
                None => print!("{table}"),
            }
            if check {
                let r = check_kernel(params, &KernelCheckOptions::default())?;
                eprintln!("{}", serde_json::to_string_pretty(&r).unwrap_or_default());
                return Ok(verdict(r.pass));
            }
            Ok(EXIT_OK)
        }
        Command::Report { dir } => {
            if !dir.is_dir() {
                return Err(CliError::Artifact(format!("{} is not an output directory", dir.display())));
            }
            let written = render_dir(&dir)?;
            println!("rendered {} plots in {}", written.len(), dir.display());
            Ok(EXIT_OK)
        }
        Command::Presets => {
            for (name, text) in PRESETS {
                let about = text.lines().next().unwrap_or("").trim_start_matches('#').trim();
                println!("{name:<22} {about}");
            }
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID as u8 } else { EXIT_OK as u8 });
        }
    };
    let threads = cli.threads.or_else(|| std::env::var("FRACBURGERS_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads.filter(|n| *n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
