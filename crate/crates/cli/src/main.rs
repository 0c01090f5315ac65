//! `domds` — drive the localization simulator from the command line.
//!
//! Subcommands: `gen` writes a realized scenario as CSV, `run` executes the
//! configured experiment and writes the report CSVs, `eval` recomputes the
//! RMSE between two position CSVs under a chosen alignment, and `inspect`
//! prints the resolved configuration with its derived channel constants.
//!
//! Exit codes: 0 success, 2 configuration error, 3 degenerate geometry,
//! 4 I/O error, 1 anything else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use domds_core::channel::bias_constant;
use domds_core::harness::{
    checkpoints, emit_csv, fmt_sig9, generate_scenario, run_experiment, write_scenario_csv,
    AlgorithmKind, ExperimentConfig, ObservationSpec, ScenarioKind,
};
use domds_core::mds::{rmse, Alignment};
use domds_core::{DMat, Error};

#[derive(Parser)]
#[command(
    name = "domds",
    version,
    about = "RSSI sensor-network self-localization simulator",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every config-driven subcommand. Omitting `--config` runs
/// the built-in reference operating point.
#[derive(Args)]
struct ConfigArgs {
    /// Flat key=value config file (see the config reference in the README).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the algorithm: batch-mds | oja | domds | domle | domds+domle.
    #[arg(long)]
    algorithm: Option<String>,
    /// Override the replica count.
    #[arg(long)]
    replicas: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Realize the configured scenario and write it as a CSV
    /// (`node,x_m,y_m[,z_m],is_anchor`).
    Gen {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output file (`.csv`) or directory (receives `scenario.csv`).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the experiment and write `rmse.csv`, `rmse_mean.csv` and
    /// `positions_final.csv`.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute the RMSE between two position CSVs.
    Eval {
        /// Estimated positions (`node,x_m,y_m[,z_m]`, extra columns ignored).
        #[arg(long)]
        est: PathBuf,
        /// Reference positions, same format; an `is_anchor` column supplies
        /// the anchor set for `--alignment anchors`.
        #[arg(long)]
        truth: PathBuf,
        /// Alignment before scoring: procrustes | anchors | none.
        #[arg(long, default_value = "procrustes")]
        alignment: String,
    },
    /// Print the resolved configuration and derived constants.
    Inspect {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(inner) = source {
                eprintln!("  caused by: {inner}");
                source = inner.source();
            }
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::InvalidParameter { .. } | Error::Parse { .. } => 2,
        Error::DegenerateGeometry { .. } | Error::Singularity(_) | Error::Disconnected(_) => 3,
        Error::Io { .. } => 4,
        _ => 1,
    }
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Gen { config, out } => {
            let cfg = resolve(&config)?;
            let scenario = generate_scenario(&cfg.scenario, cfg.seed)?;
            let path = if out.extension().is_some_and(|e| e == "csv") {
                out
            } else {
                std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
                out.join("scenario.csv")
            };
            write_scenario_csv(&path, &scenario)?;
            println!("wrote {} ({} nodes, {} anchors)", path.display(), scenario.n(), scenario.anchors().len());
            Ok(())
        }
        Command::Run { config, out } => {
            let cfg = resolve(&config)?;
            let output = run_experiment(&cfg)?;
            emit_csv(&out, &output)?;
            println!(
                "wrote rmse.csv, rmse_mean.csv, positions_final.csv to {}",
                out.display()
            );
            if let (Some(first), Some(last)) =
                (output.first_mean_rmse(), output.final_mean_rmse())
            {
                println!(
                    "{} | {} replicas | mean RMSE {} m -> {} m",
                    cfg.algorithm,
                    output.records.len(),
                    fmt_sig9(first),
                    fmt_sig9(last)
                );
            }
            Ok(())
        }
        Command::Eval { est, truth, alignment } => {
            let (est_pos, _) = read_positions_csv(&est)?;
            let (truth_pos, anchors) = read_positions_csv(&truth)?;
            let align = match alignment.as_str() {
                "procrustes" => Alignment::Procrustes,
                "none" => Alignment::None,
                "anchors" => {
                    if anchors.is_empty() {
                        return Err(Error::config(
                            "alignment",
                            format!("`{}` marks no anchors", truth.display()),
                        ));
                    }
                    Alignment::Anchors(&anchors)
                }
                other => {
                    return Err(Error::config(
                        "alignment",
                        format!("`{other}` is not one of procrustes | anchors | none"),
                    ))
                }
            };
            let value = rmse(&est_pos, &truth_pos, align)?;
            println!("rmse_m = {}", fmt_sig9(value));
            Ok(())
        }
        Command::Inspect { config } => {
            let cfg = resolve(&config)?;
            inspect(&cfg)
        }
    }
}

fn resolve(args: &ConfigArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(name) = &args.algorithm {
        cfg.algorithm = AlgorithmKind::from_str(name)?;
    }
    if let Some(replicas) = args.replicas {
        cfg.replicas = replicas;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn inspect(cfg: &ExperimentConfig) -> Result<(), Error> {
    match &cfg.scenario.kind {
        ScenarioKind::Grid { rows, cols } => {
            println!("scenario.kind = grid ({rows} x {cols})");
        }
        ScenarioKind::Uniform { n } => println!("scenario.kind = uniform (n = {n})"),
        ScenarioKind::Explicit { path } => {
            println!("scenario.kind = explicit ({})", path.display());
        }
    }
    let s = &cfg.scenario;
    println!("scenario.area_m = {} x {}{}", s.width_m, s.height_m, if s.p == 3 {
        format!(" x {}", s.depth_m)
    } else {
        String::new()
    });
    println!("scenario.p = {}", s.p);
    if !s.anchors.is_empty() {
        println!("scenario.anchors = {:?}", s.anchors);
    }
    let ch = &cfg.channel;
    println!(
        "channel = pl0 {} dB, eta {}, sigma2 {}, t_samples {}",
        ch.pl0, ch.eta, ch.sigma2, ch.t_samples
    );
    let c = bias_constant(ch);
    println!("channel.bias_constant C = {}", fmt_sig9(c));
    println!("channel.variance_factor C^8-1 = {}", fmt_sig9(c.powi(8) - 1.0));
    match &cfg.observation {
        ObservationSpec::Scalar(q) => println!("observation.q = {q}"),
        ObservationSpec::MatrixPath(path) => {
            println!("observation.matrix = {}", path.display());
        }
    }
    println!("ats.q = {}", cfg.ats_q);
    println!("algorithm = {}", cfg.algorithm);
    println!("schedule = {} / n^{}", cfg.schedule.a, cfg.schedule.beta);
    println!("box.alpha = {}", cfg.box_alpha);
    println!(
        "run = {} iterations, {} replicas, seed {}, {} checkpoints",
        cfg.iterations,
        cfg.replicas,
        cfg.seed,
        checkpoints(cfg.iterations).len()
    );
    println!("domds.variant = {:?}", cfg.variant);
    if matches!(
        cfg.algorithm,
        AlgorithmKind::Domle | AlgorithmKind::DomdsDomle
    ) {
        let r = &cfg.refine;
        println!(
            "refine = {} / n^{}, {} rounds, radius {}",
            r.schedule.a,
            r.schedule.beta,
            r.iterations,
            r.radius_m.map_or("inf".into(), |v| v.to_string())
        );
    }
    // Realize the scenario so capacity and file errors surface here too.
    let scenario = generate_scenario(&cfg.scenario, cfg.seed)?;
    println!("realized nodes = {}", scenario.n());
    Ok(())
}

/// Read `node,x_m,y_m[,z_m][,is_anchor]` with a header row. Node ids must be
/// 0..n-1 in order; returns positions plus any marked anchors.
fn read_positions_csv(path: &Path) -> Result<(DMat, Vec<usize>), Error> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(file);
    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| csv_err(path, 1, e))?,
        None => return Err(Error::Parse {
            path: path.into(),
            line: 1,
            reason: "empty file".into(),
        }),
    };
    let cols: Vec<&str> = header.iter().collect();
    let (p, has_anchor) = match cols.as_slice() {
        ["node", "x_m", "y_m"] => (2, false),
        ["node", "x_m", "y_m", "is_anchor"] => (2, true),
        ["node", "x_m", "y_m", "z_m"] => (3, false),
        ["node", "x_m", "y_m", "z_m", "is_anchor"] => (3, true),
        other => {
            return Err(Error::Parse {
                path: path.into(),
                line: 1,
                reason: format!("unrecognized position header {other:?}"),
            })
        }
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut anchors = Vec::new();
    for (idx, rec) in records.enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| csv_err(path, line, e))?;
        let f = |k: usize| -> Result<f64, Error> {
            rec.get(k)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Parse {
                    path: path.into(),
                    line,
                    reason: format!("bad numeric field {k}"),
                })
        };
        let node = f(0)? as usize;
        if node != rows.len() {
            return Err(Error::Parse {
                path: path.into(),
                line,
                reason: format!("node ids must be consecutive from 0, got {node}"),
            });
        }
        let mut coords = Vec::with_capacity(p);
        for k in 0..p {
            coords.push(f(k + 1)?);
        }
        if has_anchor && f(p + 1)? != 0.0 {
            anchors.push(node);
        }
        rows.push(coords);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.into(),
            line: 2,
            reason: "no position rows".into(),
        });
    }
    let mat = DMat::from_fn(rows.len(), p, |r, c| rows[r][c]);
    Ok((mat, anchors))
}

fn csv_err(path: &Path, line: usize, err: csv::Error) -> Error {
    Error::Parse {
        path: path.into(),
        line,
        reason: err.to_string(),
    }
}
