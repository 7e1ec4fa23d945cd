use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sasakian_reduction::verify::{run_example, ExampleName, RunConfig, CHECKS};
use sasakian_reduction::GeomError;

/// Verify the Sasakian reduction of a weighted torus action on an odd sphere.
#[derive(Debug, Parser)]
#[command(name = "verify", version)]
struct Args {
    /// JSON configuration file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named example: ex41, ex42[:k=K], ex43[:a=A,b=B,k=K,n=N].
    #[arg(long)]
    example: Option<String>,
    /// Weights as JSON, either one row `[-2,1,1,1]` or rows `[[1,-1,0],[0,1,-1]]`.
    #[arg(long)]
    weights: Option<String>,
    /// Complex dimension.
    #[arg(long)]
    n: Option<usize>,
    /// Level-set sample count.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    charts: Option<usize>,
    #[arg(long)]
    chart_points: Option<usize>,
    #[arg(long)]
    cone_points: Option<usize>,
    /// Step of the first-derivative stencil.
    #[arg(long)]
    first_step: Option<f64>,
    /// Step of the second-derivative stencil.
    #[arg(long)]
    second_step: Option<f64>,
    /// Richardson levels for both stencils.
    #[arg(long)]
    richardson: Option<u32>,
    /// Comma-separated check names.
    #[arg(long, value_delimiter = ',')]
    checks: Option<Vec<String>>,
    /// Tolerance overrides `name=value`, repeatable or comma-separated.
    #[arg(long = "tol", value_delimiter = ',')]
    tol: Vec<String>,
    /// Report path (JSON). Without it the report goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-point residuals as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// List the check names and exit.
    #[arg(long)]
    list_checks: bool,
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("configuration error: {msg}");
    ExitCode::from(2)
}

fn parse_weights(text: &str) -> Result<Vec<Vec<i64>>, String> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| format!("weights: {e}"))?;
    if let Ok(rows) = serde_json::from_value::<Vec<Vec<i64>>>(value.clone()) {
        return Ok(rows);
    }
    serde_json::from_value::<Vec<i64>>(value)
        .map(|row| vec![row])
        .map_err(|_| "weights must be an integer array or an array of integer arrays".to_string())
}

fn build_config(args: &Args) -> Result<RunConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            RunConfig::from_json(&text).map_err(|e| e.to_string())?
        }
        None => RunConfig::default(),
    };
    if let Some(e) = &args.example {
        cfg.example = Some(e.parse::<ExampleName>().map_err(|e| e.to_string())?);
        cfg.weights = None;
    }
    if let Some(w) = &args.weights {
        cfg.weights = Some(parse_weights(w)?);
        if args.example.is_none() {
            cfg.example = None;
        }
    }
    cfg.n = args.n.or(cfg.n);
    cfg.samples = args.samples.unwrap_or(cfg.samples);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.charts = args.charts.unwrap_or(cfg.charts);
    cfg.chart_points = args.chart_points.unwrap_or(cfg.chart_points);
    cfg.cone_points = args.cone_points.unwrap_or(cfg.cone_points);
    if let Some(h) = args.first_step {
        cfg.first_stencil.step = h;
    }
    if let Some(h) = args.second_step {
        cfg.second_stencil.step = h;
    }
    if let Some(l) = args.richardson {
        cfg.first_stencil.richardson_levels = l;
        cfg.second_stencil.richardson_levels = l;
    }
    if let Some(c) = &args.checks {
        cfg.checks = Some(c.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect());
    }
    for item in &args.tol {
        let (name, value) = item.split_once('=').ok_or_else(|| format!("--tol expects name=value, got `{item}`"))?;
        let value: f64 = value.trim().parse().map_err(|_| format!("bad tolerance in `{item}`"))?;
        cfg.tolerances.insert(name.trim().to_string(), value);
    }
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    if args.csv.is_some() {
        cfg.csv = args.csv.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.list_checks {
        for c in CHECKS {
            println!("{:<18} {:<6} {}", c.name, format!("{:.0e}", c.tolerance), c.summary);
        }
        return ExitCode::SUCCESS;
    }
    let cfg = match build_config(&args) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let example = cfg.example.unwrap_or(ExampleName::Custom);
    let report = match run_example(example, &cfg) {
        Ok(r) => r,
        Err(GeomError::InvalidInput(msg)) => return config_error(msg),
        Err(e) => return config_error(e),
    };
    let json = report.to_json();
    match &cfg.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &json) {
                eprintln!("cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
            print!("{}", report.summary());
        }
        None => println!("{json}"),
    }
    if let Some(path) = &cfg.csv {
        if let Err(e) = std::fs::write(path, report.to_csv()) {
            eprintln!("cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    ExitCode::from(report.exit_code() as u8)
}
