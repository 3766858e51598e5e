use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use csf_cli::{cmd_report, cmd_run, cmd_verify, load_config, output_dir, CliError, EXIT_CONFIG};
use csf_core::verify::{Suite, VerifyOptions};

#[derive(Parser)]
#[command(name = "csf", version, about = "Charged scalar field evolution and diagnostics")]
struct Cli {
    /// Output directory (overrides CSF_OUTPUT_DIR).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a configuration and write reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// `key=value` config override; repeatable.
        #[arg(long = "set")]
        overrides: Vec<String>,
    },
    /// Run a property suite: geometry, identities, inequalities, convergence.
    Verify {
        suite: String,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        h2: Option<f64>,
        /// Random configurations for the inequality harnesses.
        #[arg(long)]
        cases: Option<usize>,
        /// Random points for the geometry tables.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Check manifest hashes and summarize report status in a directory.
    Report {
        dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("{}", CliError { code: EXIT_CONFIG, message: e.to_string() }.message);
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    let dir = output_dir(cli.out);
    let result = match cli.command {
        Command::Run { config, overrides } => load_config(&config, &overrides).and_then(|cfg| {
            let o = cmd_run(&cfg, cli.seed, &dir)?;
            for g in o.gates.iter().filter(|g| g.pass == Some(false)) {
                eprintln!("acceptance failure: {} = {} (threshold {})", g.name, g.value, g.threshold);
            }
            Ok(o.code)
        }),
        Command::Verify { suite, h, h2, cases, samples } => match Suite::parse(&suite) {
            None => Err(CliError { code: EXIT_CONFIG, message: format!("unknown suite '{suite}'") }),
            Some(s) => {
                let d = VerifyOptions::default();
                let opts = VerifyOptions {
                    seed: cli.seed,
                    h: h.unwrap_or(d.h),
                    h2: h2.unwrap_or(d.h2),
                    cases: cases.unwrap_or(d.cases),
                    samples: samples.unwrap_or(d.samples),
                    ..d
                };
                cmd_verify(s, &opts, &dir).map(|(text, code)| {
                    print!("{text}");
                    code
                })
            }
        },
        Command::Report { dir: d } => cmd_report(&d.unwrap_or(dir)).map(|(text, code)| {
            print!("{text}");
            code
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
