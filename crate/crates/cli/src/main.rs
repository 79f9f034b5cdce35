use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use orlicz_carleson_cli::config::{Format, RunConfig};
use orlicz_carleson_cli::run::{self, Status};

#[derive(Parser, Debug)]
#[command(name = "orlicz-verify", version, about = "Run a verification config and report the results")]
struct Args {
    /// TOML run config
    #[arg(long)]
    config: PathBuf,
    /// Report path; stdout when absent (overrides output.path)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format (overrides output.format)
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Unmet expectations make the exit status 1
    #[arg(long)]
    assert: bool,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Text,
    Json,
}

const EXIT_ASSERT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let format = match args.format {
        Some(FormatArg::Text) => Format::Text,
        Some(FormatArg::Json) => Format::Json,
        None => cfg.output.format.unwrap_or_default(),
    };
    let out = args.out.clone().or_else(|| cfg.output.path.as_ref().map(PathBuf::from));
    let (report, timings) = run::run(&cfg, args.seed);
    let body = match format {
        Format::Json => {
            let doc = json!({"report": report, "timings": timings});
            serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
        }
        Format::Text => report.to_text(&timings),
    };
    match out {
        Some(p) => {
            if let Err(e) = std::fs::write(&p, body) {
                eprintln!("cannot write {}: {e}", p.display());
                return ExitCode::from(EXIT_RUNTIME);
            }
        }
        None => print!("{body}"),
    }
    match report.status(args.assert) {
        Status::Pass => ExitCode::SUCCESS,
        Status::AssertionFailed => ExitCode::from(EXIT_ASSERT),
        Status::RuntimeError => ExitCode::from(EXIT_RUNTIME),
    }
}
