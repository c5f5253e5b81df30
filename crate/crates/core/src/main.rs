use std::path::PathBuf;
use std::process::ExitCode;

use asymflat::harness::{
    emit_report, exit_code, run_experiment_with_dumps, Experiment, ExperimentConfig, ReportPaths,
};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "asymflat", version, about = "Dirac flows on asymptotically flat 3-manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its JSON and CSV reports.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, env = "ASYMFLAT_OUT_DIR", default_value = "out")]
        out: PathBuf,
        /// Config overrides, `key.path=value`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and check a config without running it.
    Validate {
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List the available experiments.
    ListExperiments,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{:<18} {}", e.name(), e.summary());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config, overrides } => match ExperimentConfig::load(&config, &overrides) {
            Ok(cfg) => {
                println!("{}: valid {} config", config.display(), cfg.experiment.name());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Run {
            config,
            out,
            mut overrides,
            threads,
            seed,
        } => {
            if let Some(n) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
            if let Some(s) = seed {
                overrides.push(format!("seed={s}"));
            }
            let cfg = match ExperimentConfig::load(&config, &overrides) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let stem = config
                .file_stem()
                .map_or_else(|| cfg.experiment.name().to_string(), |s| s.to_string_lossy().into_owned());
            let dumps = out.join(format!("{stem}_fields"));
            let result = run_experiment_with_dumps(&cfg, Some(&dumps));
            match &result {
                Ok(report) => {
                    for c in &report.checks {
                        println!(
                            "{} {:<40} {:>12.4e} {} {:.3e}",
                            if c.passed { "PASS" } else { "FAIL" },
                            c.name,
                            c.value,
                            c.comparison,
                            c.threshold
                        );
                    }
                    let paths = ReportPaths::in_dir(&out, &stem);
                    if let Err(e) = emit_report(report, &paths) {
                        eprintln!("error: {e}");
                        return ExitCode::from(1);
                    }
                    println!("report: {}", paths.json.display());
                }
                Err(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(exit_code(&result) as u8)
        }
    }
}
