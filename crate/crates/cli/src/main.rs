use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use finsler_cli::{run, write_outputs, Command, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "finsler", version, about = "Spray, curvature, transport and holonomy-algebra checks for projectively flat Finsler metrics")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Homogeneity, fundamental tensor, projective factor and closed forms at the origin.
    VerifyMetric,
    /// Flag curvature fit and horizontal parallelism of the curvature.
    CurvatureScan,
    /// Geodesic straightness and parallel transport invariants.
    Transport,
    /// Holonomy map of one coordinate rectangle on an indicatrix grid.
    HolonomyLoop,
    /// Curvature recovered from shrinking loops.
    LoopCurvature,
    /// Exact identities and the finite-degree density certificate.
    Algebra,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory receiving report.json and any CSV/JSON artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the JSON report instead of the text summary.
    #[arg(long, global = true)]
    json: bool,
    /// Record wall-clock runtimes (reports are no longer byte-identical).
    #[arg(long, global = true)]
    timing: bool,
    /// euclidean, funk or bryant-shen.
    #[arg(long, global = true)]
    metric: Option<String>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Funk sign, +1 or -1.
    #[arg(long, global = true, allow_hyphen_values = true)]
    sign: Option<i8>,
    /// Bryant-Shen parameter, |alpha| < pi/2.
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Multiply the metric by a positive constant.
    #[arg(long, global = true)]
    scale: Option<f64>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Algebra: sphere dimension plus one.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Algebra: projective factor slope, a rational such as 1/2.
    #[arg(long, global = true, allow_hyphen_values = true)]
    c: Option<String>,
    /// Algebra: flag curvature, a rational such as -1/4.
    #[arg(long, global = true, allow_hyphen_values = true)]
    lambda: Option<String>,
    #[arg(long, global = true)]
    p_max: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = cli.common;
    let mut cfg = match &c.config {
        Some(p) => match RunConfig::load(p) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(2);
            }
        },
        None => RunConfig::default(),
    };
    let overrides = Overrides {
        seed: c.seed,
        out: c.out,
        metric: c.metric,
        dim: c.dim,
        sign: c.sign,
        alpha: c.alpha,
        scale: c.scale,
        samples: c.samples,
        grid: c.grid,
        n: c.n,
        c: c.c,
        lambda: c.lambda,
        p_max: c.p_max,
    };
    if let Err(e) = cfg.apply(&overrides) {
        eprintln!("{e}");
        return ExitCode::from(2);
    }
    let command = match cli.command {
        Cmd::VerifyMetric => Command::VerifyMetric,
        Cmd::CurvatureScan => Command::CurvatureScan,
        Cmd::Transport => Command::Transport,
        Cmd::HolonomyLoop => Command::HolonomyLoop,
        Cmd::LoopCurvature => Command::LoopCurvature,
        Cmd::Algebra => Command::Algebra,
    };
    let output = match run(command, &cfg, c.timing) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    if c.json {
        print!("{}", output.report.to_json());
    } else {
        print!("{}", output.report.render_text());
    }
    if let Some(dir) = &cfg.out {
        if let Err(e) = write_outputs(dir, &output) {
            eprintln!("cannot write outputs to {}: {e}", dir.display());
            return ExitCode::from(2);
        }
    }
    if output.report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
