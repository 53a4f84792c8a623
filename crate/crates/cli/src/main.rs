use std::path::PathBuf;
use std::process::ExitCode;

use carnot_qr_cli::{run, Command, Format, RunConfig};
use clap::Parser;

#[derive(Parser, Debug)]
#[command(name = "carnot-qr", version, about = "Sub-Riemannian distances, modulus and quasiregularity diagnostics")]
struct Args {
    #[arg(value_enum)]
    command: Option<Command>,
    /// TOML file with any of the options below; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Frame or algebra: builtin name or file path.
    #[arg(long)]
    frame: Option<String>,
    /// Catalogue map, e.g. `winding` or `dilation(2)@euclidean(2)`.
    #[arg(long)]
    map: Option<String>,
    /// Comma-separated coordinates.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    point: Option<Vec<f64>>,
    /// Second point for `dist`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    target: Option<Vec<f64>>,
    #[arg(long)]
    r0: Option<f64>,
    /// Number of radii `r0·2^-i`.
    #[arg(long)]
    ladder: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    /// Curve family CSV (`curve_id,x1,...,xd`).
    #[arg(long)]
    family: Option<PathBuf>,
    /// Output directory (default: $CARNOT_QR_OUT, else ./carnot-qr-out).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn merge(args: Args) -> Result<RunConfig, carnot_qr_cli::CliError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = args.$f { cfg.$f = v; })* };
    }
    macro_rules! set_opt {
        ($($f:ident),*) => { $(if args.$f.is_some() { cfg.$f = args.$f; })* };
    }
    set!(frame, map, r0, ladder, seed, format);
    set_opt!(command, point, target, samples, p, grid, family, out, workers);
    Ok(cfg)
}

fn main() -> ExitCode {
    // Exit status 2 is reserved for flagged analyses, so usage errors map to 1.
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let cfg = match merge(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(w) = cfg.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("warning: cannot set worker count: {e}");
        }
    }
    match run(&cfg) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            for f in &outcome.flags {
                eprintln!("flagged: {f}");
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
