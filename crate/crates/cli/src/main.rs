//! `bmoext`: command line driver for the bmo extension library.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bmo_extension::covering::{build_atlas, partition_weights};
use bmo_extension::extension::{bmo_extend, ExtensionConfig};
use bmo_extension::field::{
    b_seminorm, bmo_seminorm, brute_force_oracle, composite_norms, l1_ul_norm, BOptions, L1Region, Region, Strategy,
};
use bmo_extension::geometry::{Domain, Rect, Vec2};
use bmo_extension::harness::{
    example_log_layer, run_extension_experiment, verify_all, DomainConfig, ExperimentConfig, VerifyConfig,
};
use bmo_extension::io::{load_scalar, load_vector, save_scalar, save_vector};
use bmo_extension::vector_extension::vbmo_extend;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "bmoext", version, about = "Reflection-based bmo extension on planar domains")]
struct Cli {
    /// TOML configuration: a domain for most commands, an experiment for `experiment`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Use the exhaustive reference search for BMO seminorms.
    #[arg(long, global = true)]
    oracle: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extend a scalar FLD/1 field off the domain.
    Extend {
        input: PathBuf,
        #[arg(long)]
        rho: f64,
        /// Width of the reflected band (defaults to 2 rho).
        #[arg(long)]
        band: Option<f64>,
    },
    /// Extend a two-component FLD/1 field off the domain.
    Vextend {
        input: PathBuf,
        #[arg(long)]
        rho: f64,
    },
    /// Estimate a seminorm of a scalar FLD/1 field.
    Seminorm {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Kind::Bmo)]
        kind: Kind,
        #[arg(long, default_value_t = f64::INFINITY)]
        mu: f64,
        #[arg(long, default_value_t = f64::INFINITY)]
        delta: f64,
        #[arg(long)]
        nu: Option<f64>,
        /// Centre stride of the strided search, in cells.
        #[arg(long, default_value_t = 1)]
        stride: usize,
        /// Ball radii in cells for the strided search; all radii when empty.
        #[arg(long, value_delimiter = ',')]
        radii: Vec<usize>,
        /// Allow balls anywhere on masked cells instead of inside the domain.
        #[arg(long)]
        whole: bool,
    },
    /// Build the boundary atlas and optionally evaluate the partition at points.
    Partition {
        #[arg(long)]
        rho: f64,
        /// Bounding box `x0,x1,y0,y1`.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        bbox: Vec<f64>,
        /// Evaluation point `x,y`; may be repeated.
        #[arg(long = "at", value_parser = parse_point, allow_hyphen_values = true)]
        at: Vec<Vec2>,
    },
    /// Run the log-layer counterexample.
    ExampleLog {
        #[arg(long, default_value_t = 0.25)]
        rho: f64,
        /// Grid spacing, as a number or a fraction such as `1/512`.
        #[arg(long, default_value = "1/512", value_parser = parse_length)]
        h: f64,
        /// Extra coarser resolutions for the sup.
        #[arg(long, default_value_t = 1)]
        coarser: usize,
    },
    /// Run the extension-ratio experiment over the built-in field family.
    Experiment,
    /// Run the acceptance checks.
    Verify {
        /// Chart tolerance of the geometric checks.
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// Run only these checks; may be repeated.
        #[arg(long = "check")]
        checks: Vec<String>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Bmo,
    L1,
    B,
    Composite,
}

fn parse_length(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
            a / b
        }
        None => s.trim().parse().map_err(|e| format!("{e}"))?,
    };
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s} is not a positive length"))
    }
}

fn parse_point(s: &str) -> Result<Vec2, String> {
    let parts: Vec<f64> =
        s.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    match parts.as_slice() {
        [x, y] => Ok(Vec2::new(*x, *y)),
        _ => Err(format!("expected x,y, got {s}")),
    }
}

type AnyError = Box<dyn std::error::Error>;

enum Outcome {
    Ok,
    ChecksFailed,
}

fn domain_config(cli: &Cli) -> Result<DomainConfig, AnyError> {
    Ok(match &cli.config {
        Some(path) => DomainConfig::load(path)?,
        None => DomainConfig::new(Domain::half_plane()),
    })
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<String, AnyError> {
    std::fs::create_dir_all(dir)?;
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(dir.join(name), &text)?;
    Ok(text)
}

fn run(cli: &Cli) -> Result<Outcome, AnyError> {
    match &cli.command {
        Command::Extend { input, rho, band } => {
            let cfg = domain_config(cli)?;
            let v = load_scalar(input)?;
            let config = ExtensionConfig { band: *band, epsilon: cfg.epsilon, ..ExtensionConfig::new(*rho) };
            let ext = bmo_extend(&v, &cfg.domain, &config)?;
            std::fs::create_dir_all(&cli.out)?;
            save_scalar(&cli.out.join("extended.fld"), &ext.extended)?;
            print!("{}", write_json(&cli.out, "extend.json", &ext.summary)?);
        }
        Command::Vextend { input, rho } => {
            let cfg = domain_config(cli)?;
            let u = load_vector(input)?;
            let config = ExtensionConfig { epsilon: cfg.epsilon, ..ExtensionConfig::new(*rho) };
            let ext = vbmo_extend(&u, &cfg.domain, &config)?;
            std::fs::create_dir_all(&cli.out)?;
            save_vector(&cli.out.join("vextended.fld"), &ext.extended)?;
            print!("{}", write_json(&cli.out, "vextend.json", &ext.summary)?);
        }
        Command::Seminorm { input, kind, mu, delta, nu, stride, radii, whole } => {
            let cfg = domain_config(cli)?;
            let f = load_scalar(input)?;
            let region = if *whole { Region::Whole } else { Region::Domain };
            let strategy = if radii.is_empty() && *stride == 1 {
                Strategy::Exhaustive
            } else {
                let radii = if radii.is_empty() { (1..=f.grid.nx.max(f.grid.ny)).collect() } else { radii.clone() };
                Strategy::strided(*stride, radii)
            };
            let b_opts = BOptions::default();
            let text = match kind {
                Kind::Bmo if cli.oracle => {
                    write_json(&cli.out, "seminorm.json", &brute_force_oracle(&f, &cfg.domain, region, *mu)?)?
                }
                Kind::Bmo => {
                    write_json(&cli.out, "seminorm.json", &bmo_seminorm(&f, &cfg.domain, region, *mu, &strategy)?)?
                }
                Kind::L1 => {
                    let r = if delta.is_finite() { L1Region::InnerBand(*delta) } else { L1Region::All };
                    write_json(&cli.out, "seminorm.json", &l1_ul_norm(&f, &cfg.domain, r, *stride)?)?
                }
                Kind::B => write_json(&cli.out, "seminorm.json", &b_seminorm(&f, &cfg.domain, *nu, &b_opts)?)?,
                Kind::Composite => {
                    let mu = if mu.is_finite() { *mu } else { 1.0 };
                    let c = composite_norms(&f, &cfg.domain, mu, *delta, *nu, &strategy, *stride, &b_opts)?;
                    write_json(&cli.out, "seminorm.json", &c)?
                }
            };
            print!("{text}");
        }
        Command::Partition { rho, bbox, at } => {
            let cfg = domain_config(cli)?;
            if bbox.len() != 4 {
                return Err(format!("--bbox takes 4 values, got {}", bbox.len()).into());
            }
            let rect = Rect::from_bounds(bbox[0], bbox[1], bbox[2], bbox[3]);
            let atlas = build_atlas(&cfg.domain, *rho, rect)?;
            write_json(&cli.out, "atlas.json", &atlas.dump())?;
            let weights =
                at.iter().map(|&x| partition_weights(&atlas, &cfg.domain, x)).collect::<Result<Vec<_>, _>>()?;
            #[derive(Serialize)]
            struct Summary<'a> {
                seeds: usize,
                max_neighbors: usize,
                in_regime: bool,
                weights: &'a [bmo_extension::covering::PartitionWeights],
            }
            let summary = Summary {
                seeds: atlas.len(),
                max_neighbors: atlas.max_neighbors(),
                in_regime: atlas.in_regime,
                weights: &weights,
            };
            print!("{}", serde_json::to_string_pretty(&summary)? + "\n");
        }
        Command::ExampleLog { rho, h, coarser } => {
            let r = example_log_layer(*rho, *h, *coarser)?;
            print!("{}", write_json(&cli.out, "example_log.json", &r)?);
            let finest = r.max_abs.last().map_or(0.0, |m| m.max_abs);
            if !(r.support_ok && r.b_inf.value <= 2.1 && finest >= 4.0 && r.max_abs_grows) {
                return Ok(Outcome::ChecksFailed);
            }
        }
        Command::Experiment => {
            let mut config = match &cli.config {
                Some(path) => ExperimentConfig::load(path)?,
                None => ExperimentConfig::default(),
            };
            config.seed = cli.seed;
            let report = run_extension_experiment(&config)?;
            let dir = config.out_dir.clone().map_or(cli.out.clone(), |d| cli.out.join(d));
            report.write_outputs(&dir)?;
            for fit in &report.fits {
                match fit.slope {
                    Some(s) => println!("{:<14} slope {s:.4} over {} points", fit.field, fit.points),
                    None => println!("{:<14} no fit ({} points)", fit.field, fit.points),
                }
            }
        }
        Command::Verify { epsilon, checks } => {
            let config = VerifyConfig { seed: cli.seed, epsilon: *epsilon, only: checks.clone() };
            let report = verify_all(&config)?;
            write_json(&cli.out, "verify.json", &report)?;
            print!("{}", report.table());
            if !report.passed {
                return Ok(Outcome::ChecksFailed);
            }
        }
    }
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
