use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use weakns_cli::{compare, load_manifest, run, RunError, EXIT_PASS};

#[derive(Parser)]
#[command(name = "weakns", version, about = "Run weak L^{3,inf} Navier-Stokes experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the experiment described by a manifest.
    Run {
        manifest: PathBuf,
        /// Write artifacts here instead of the manifest's output_dir.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Validate the manifest and exit.
        #[arg(long)]
        dry_run: bool,
    },
    /// Align the summaries of several runs of the same experiment.
    Compare {
        #[arg(required = true, num_args = 2..)]
        paths: Vec<PathBuf>,
        /// Write the table here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            manifest,
            output_dir,
            dry_run,
        } => run_command(&manifest, output_dir, dry_run),
        Command::Compare { paths, output } => compare_command(&paths, output),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run_command(path: &Path, output_dir: Option<PathBuf>, dry_run: bool) -> Result<i32, RunError> {
    let manifest = load_manifest(path)?;
    if dry_run {
        println!("{{\"valid\":true,\"manifest_sha256\":\"{}\"}}", manifest.sha256());
        return Ok(EXIT_PASS);
    }
    let result = run(&manifest, output_dir.as_deref())?;
    let s = &result.summary;
    println!(
        "{}: {} ({} passed, {} failed) -> {}",
        s.experiment,
        s.status,
        s.pass_count,
        s.fail_count,
        result.output_dir.display()
    );
    Ok(result.exit_code)
}

fn compare_command(paths: &[PathBuf], output: Option<PathBuf>) -> Result<i32, RunError> {
    let table = compare(paths)?;
    match output {
        Some(p) => weakns::snapshot::write_atomic(&p, table.as_bytes())?,
        None => print!("{table}"),
    }
    Ok(EXIT_PASS)
}
