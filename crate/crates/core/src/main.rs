use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use blotless::bounds::compute_bounds;
use blotless::dict_update::{
    learn_tracked, update_dictionary, write_history_csv, LearnConfig, MethodKind, UpdateMethod,
};
use blotless::experiments::{run, ExperimentKind, ExperimentSpec};
use blotless::imaging::{denoise, GrayImage, PatchConfig};
use blotless::numerics::{read_matrix, write_matrix};
use blotless::sparse_coding::{pattern_coefficients, OmpConfig};
use blotless::synth::{export_training_set, gen_training_set, random_dictionary, GenConfig, TAG_INIT};
use blotless::{Dictionary, Error, Result, SparseCoeffs, SupportPattern};

/// Dictionary learning with BLOTLESS, MOD and K-SVD updates, plus the
/// experiment harness.
#[derive(Parser, Debug)]
#[command(name = "blotless", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Experiment spec (JSON); omitted fields take the preset values.
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// Base seed, overriding the spec.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for independent trials.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Use full-scale problem sizes instead of desk-scale presets.
    #[arg(long, global = true)]
    full: bool,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Sample-count bounds as JSON for one (m, theta); the bounds table as
    /// CSV when --m or --theta is absent.
    Bounds {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
    },
    /// Generate a synthetic training set under the prefix given by --out.
    Gen {
        #[arg(long)]
        m: usize,
        /// Atoms; defaults to m.
        #[arg(long)]
        l: Option<usize>,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        snr_db: Option<f64>,
    },
    /// Learn a dictionary from samples in the dense text format.
    Learn {
        #[arg(long)]
        y: PathBuf,
        #[arg(long, default_value = "BLOTLESS_ITERTLS")]
        method: MethodKind,
        /// Atoms; defaults to the signal dimension.
        #[arg(long)]
        atoms: Option<usize>,
        /// OMP sparsity.
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 50)]
        iterations: usize,
        #[arg(long)]
        block_size: Option<usize>,
        /// Ground-truth dictionary for tracking R_err.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Per-iteration CSV.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// One dictionary update for a given sparsity pattern.
    Update {
        #[arg(long)]
        y: PathBuf,
        /// Pattern JSON as written by `gen`.
        #[arg(long)]
        pattern: PathBuf,
        #[arg(long, default_value = "BLOTLESS_ITERTLS")]
        method: MethodKind,
        /// Starting dictionary; a seeded random one when omitted.
        #[arg(long)]
        dictionary: Option<PathBuf>,
        /// Starting coefficients; a least-squares fit on the pattern when omitted.
        #[arg(long)]
        coeffs: Option<PathBuf>,
        #[arg(long)]
        block_size: Option<usize>,
    },
    /// Exact-recovery phase transition.
    Phase,
    /// Learning curves.
    Curve,
    /// Single-update robustness to pattern corruption.
    Robust,
    /// Learning curves per block size.
    Blocks,
    /// Seconds per learning iteration.
    Bench,
    /// Denoising experiment over an image directory, or one image with
    /// --image, --dictionary and --sigma.
    Denoise {
        #[arg(long)]
        images: Option<PathBuf>,
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long)]
        dictionary: Option<PathBuf>,
        #[arg(long)]
        sigma: Option<f64>,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

fn load_matrix(path: &Path) -> Result<blotless::Matrix> {
    read_matrix(BufReader::new(File::open(path)?))
}

fn experiment(cli: &Cli, kind: ExperimentKind, images: Option<PathBuf>) -> Result<()> {
    let mut spec = match &cli.spec {
        Some(p) => ExperimentSpec::load(p, cli.full)?,
        None => ExperimentSpec::preset(kind, cli.full),
    };
    if spec.kind != kind {
        return Err(Error::Config(format!(
            "spec kind {:?} does not match the subcommand",
            spec.kind
        )));
    }
    if let Some(seed) = cli.seed {
        spec.base_seed = seed;
    }
    if images.is_some() {
        spec.images = images;
    }
    let result = run(&spec, cli.threads)?;
    result.write_csv(output(cli.out.as_deref())?)
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Bounds {
            m: Some(m),
            theta: Some(theta),
            epsilon,
        } => {
            let report = compute_bounds(*m, *theta, *epsilon)?;
            let mut out = output(cli.out.as_deref())?;
            serde_json::to_writer_pretty(&mut out, &report)?;
            writeln!(out)?;
            Ok(())
        }
        Cmd::Bounds { epsilon, .. } => {
            let mut spec = match &cli.spec {
                Some(p) => ExperimentSpec::load(p, cli.full)?,
                None => ExperimentSpec::preset(ExperimentKind::BoundsTable, cli.full),
            };
            spec.epsilon = *epsilon;
            run(&spec, 1)?.write_csv(output(cli.out.as_deref())?)
        }
        Cmd::Gen { m, l, n, theta, snr_db } => {
            let prefix = cli
                .out
                .as_ref()
                .ok_or_else(|| Error::Config("gen needs --out <prefix>".into()))?;
            let mut cfg = GenConfig::new(*m, l.unwrap_or(*m), *n, *theta, cli.seed.unwrap_or(0));
            cfg.snr_db = *snr_db;
            export_training_set(&gen_training_set(&cfg)?, prefix)
        }
        Cmd::Learn {
            y,
            method,
            atoms,
            k,
            iterations,
            block_size,
            reference,
            history,
        } => {
            let y = load_matrix(y)?;
            let reference = reference
                .as_deref()
                .map(load_matrix)
                .transpose()?
                .map(Dictionary::new)
                .transpose()?;
            let cfg = LearnConfig {
                method: UpdateMethod {
                    block_size: *block_size,
                    ..UpdateMethod::new(*method)
                },
                omp: OmpConfig::sparsity(*k),
                n_iterations: *iterations,
                atoms: atoms.unwrap_or(y.nrows()),
                seed: cli.seed.unwrap_or(0),
            };
            let res = learn_tracked(&y, &cfg, reference.as_ref())?;
            if let Some(h) = history {
                write_history_csv(BufWriter::new(File::create(h)?), &res.history)?;
            }
            write_matrix(output(cli.out.as_deref())?, res.dictionary.atoms())
        }
        Cmd::Update {
            y,
            pattern,
            method,
            dictionary,
            coeffs,
            block_size,
        } => {
            let y = load_matrix(y)?;
            let pattern: SupportPattern = serde_json::from_reader(BufReader::new(File::open(pattern)?))?;
            let d = match dictionary {
                Some(p) => Dictionary::new(load_matrix(p)?)?.normalize().0,
                None => {
                    random_dictionary(y.nrows(), pattern.l(), cli.seed.unwrap_or(0), TAG_INIT)?
                        .normalize()
                        .0
                }
            };
            let x = match coeffs {
                Some(p) => SparseCoeffs::new(load_matrix(p)?, pattern)?,
                None => pattern_coefficients(&d, &y, &pattern)?,
            };
            let method = UpdateMethod {
                block_size: *block_size,
                ..UpdateMethod::new(*method)
            };
            let (d, _) = update_dictionary(&y, &d, &x, &method)?;
            write_matrix(output(cli.out.as_deref())?, d.atoms())
        }
        Cmd::Phase => experiment(cli, ExperimentKind::PhaseTransition, None),
        Cmd::Curve => experiment(cli, ExperimentKind::LearnCurve, None),
        Cmd::Robust => experiment(cli, ExperimentKind::PatternRobustness, None),
        Cmd::Blocks => experiment(cli, ExperimentKind::BlockSizeSweep, None),
        Cmd::Bench => experiment(cli, ExperimentKind::RuntimeBench, None),
        Cmd::Denoise {
            images,
            image: Some(image),
            dictionary,
            sigma,
        } => {
            if images.is_some() {
                return Err(Error::Config("--image and --images are exclusive".into()));
            }
            let (Some(dictionary), Some(sigma)) = (dictionary, sigma) else {
                return Err(Error::Config(
                    "single-image denoising needs --dictionary and --sigma".into(),
                ));
            };
            let out = cli
                .out
                .as_ref()
                .ok_or_else(|| Error::Config("single-image denoising needs --out <pgm>".into()))?;
            let d = Dictionary::new(load_matrix(dictionary)?)?;
            let img = GrayImage::load(image)?;
            denoise(&img, &d, &PatchConfig::with_sigma(*sigma))?.save(out)
        }
        Cmd::Denoise { images, .. } => experiment(cli, ExperimentKind::Denoise, images.clone()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
