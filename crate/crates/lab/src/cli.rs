//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use textadain::autograd::checks::TIGHT;
use textadain::autograd::{gradcheck_op, GradOp};
use textadain::config::Config;
use textadain::corruptions::{self, CorruptionKind, CorruptionSpec, Image};
use textadain::toyocr::glyphs::{self, RenderStyle};
use textadain::toyocr::{checkpoint, evaluate, gap_table, gap_table_csv, metrics_csv, train_with, Model, TrainConfig};
use textadain::{Error, Result, Rng};

use crate::bench::{bench, BenchOp};
use crate::featmap::intensity_map;
use crate::sweep::{preset, run_sweep, ExperimentPlan, PRESETS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "lab", version, about = "Train, evaluate and probe TextAdaIN recognizers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key (repeatable), e.g. --set textadain.p=0.25.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<Config> {
        let mut c = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::new(),
        };
        c.apply_overrides(&self.overrides)?;
        Ok(c)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a recognizer and save a checkpoint.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for the checkpoint, metrics.csv and config.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Word accuracy of a checkpoint on clean and corrupted test sets.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Also evaluate this checkpoint and print the gap table against it.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Corruption kinds (default: all).
        #[arg(long = "kind", value_parser = parse_kind)]
        kinds: Vec<CorruptionKind>,
        #[arg(long, default_value_t = 1000)]
        size: usize,
        #[arg(long, default_value_t = 777)]
        seed: u64,
    },
    /// Run a preset sweep or a plan file.
    Sweep {
        #[arg(long, conflicts_with = "plan", required_unless_present = "plan")]
        preset: Option<String>,
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Seeds 0..N for a preset.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Base config for a preset.
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check one op's gradient against central finite differences.
    Gradcheck {
        #[arg(long, value_parser = parse_op)]
        op: GradOp,
        #[arg(long, value_parser = parse_shape, default_value = "2x3x4x10")]
        shape: [usize; 4],
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Apply a seeded corruption to a PGM/PPM image.
    Corrupt {
        #[arg(long, value_parser = parse_kind)]
        kind: CorruptionKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// First-principal-component intensity map of a conv layer's output.
    Featmap {
        /// Checkpoint directory; omitted means freshly initialized weights.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Input PGM; omitted means a synthetic word drawn from --seed.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        layer: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time a kernel against a plain tensor copy.
    Bench {
        #[arg(long, value_parser = parse_bench_op)]
        op: BenchOp,
        #[arg(long, value_parser = parse_shape, default_value = "16x64x8x32")]
        shape: [usize; 4],
        #[arg(long, default_value_t = 50)]
        reps: usize,
    },
}

fn parse_kind(s: &str) -> std::result::Result<CorruptionKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_op(s: &str) -> std::result::Result<GradOp, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_bench_op(s: &str) -> std::result::Result<BenchOp, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// `BxCxHxW`.
pub fn parse_shape(s: &str) -> std::result::Result<[usize; 4], String> {
    let parts: Vec<usize> = s
        .split('x')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| format!("shape {s:?} is not BxCxHxW"))?;
    <[usize; 4]>::try_from(parts).map_err(|_| format!("shape {s:?} is not BxCxHxW"))
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn main_with<I, T>(args: I, out: &mut impl Write, err: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn dispatch(cmd: Command, out: &mut impl Write, err: &mut impl Write) -> Result<()> {
    match cmd {
        Command::Train { config, out: dir } => {
            let cfg = TrainConfig::from_config(&config.load()?)?;
            let outcome = train_with(&cfg, |r| {
                let _ = writeln!(err, "iter {:>6}  loss {:.4}  val {:.4}", r.iteration, r.loss, r.val_word_acc);
            })?;
            checkpoint::save(&outcome.model, &dir)?;
            fs::write(dir.join("metrics.csv"), metrics_csv(&outcome.metrics))?;
            fs::write(dir.join("config.txt"), cfg.to_config().to_text())?;
            writeln!(out, "final_val_acc={:.4}", outcome.final_val_acc())?;
        }
        Command::Eval {
            checkpoint: ckpt,
            baseline,
            kinds,
            size,
            seed,
        } => {
            let kinds = if kinds.is_empty() {
                CorruptionKind::ALL.to_vec()
            } else {
                kinds
            };
            let scores = |dir: &Path| -> Result<Vec<(CorruptionKind, f64)>> {
                let model = checkpoint::load(dir)?;
                kinds
                    .iter()
                    .map(|&k| Ok((k, evaluate(&model, &CorruptionSpec::default_for(k), seed, size)?)))
                    .collect()
            };
            let ours = scores(&ckpt)?;
            match baseline {
                Some(b) => write!(out, "{}", gap_table_csv(&gap_table(&scores(&b)?, &ours)))?,
                None => {
                    writeln!(out, "corruption,accuracy")?;
                    for (k, a) in ours {
                        writeln!(out, "{k},{a:.4}")?;
                    }
                }
            }
        }
        Command::Sweep {
            preset: name,
            plan,
            seeds,
            config,
            out: dir,
            jobs,
        } => {
            let plan = match (name, plan) {
                (_, Some(p)) => ExperimentPlan::load(p)?,
                (Some(n), None) => {
                    if !PRESETS.contains(&n.as_str()) {
                        return Err(Error::InvalidArgument(format!("unknown preset {n:?}")));
                    }
                    let seeds: Vec<u64> = (0..seeds).collect();
                    preset(&n, config.load()?, &seeds)?
                }
                (None, None) => unreachable!("clap requires --preset or --plan"),
            };
            let report = run_sweep(&plan, &dir, jobs, |line| eprintln!("{line}"))?;
            write!(out, "{}", crate::sweep::summary_csv(&report.summary))?;
            if report.failures() > 0 {
                writeln!(err, "{} run(s) failed; see runs.csv", report.failures())?;
            }
        }
        Command::Gradcheck { op, shape, seed, tol } => {
            let r = gradcheck_op(op, shape, seed, TIGHT)?;
            writeln!(out, "{op} {shape:?} seed {seed}\n{r}")?;
            if !r.passes(tol) {
                return Err(Error::InvalidArgument(format!(
                    "max relative error {:.3e} exceeds {tol:.1e}",
                    r.max_rel_error
                )));
            }
            writeln!(out, "PASS")?;
        }
        Command::Corrupt { kind, seed, input, out: path } => {
            let img = Image::load(&input)?;
            let spec = CorruptionSpec::default_for(kind);
            corruptions::apply(&img, &spec, &mut Rng::new(seed))?.save(&path)?;
            writeln!(out, "wrote {}", path.display())?;
        }
        Command::Featmap {
            checkpoint: ckpt,
            input,
            layer,
            seed,
            out: path,
        } => {
            let model = match ckpt {
                Some(dir) => checkpoint::load(dir)?,
                None => Model::init(&mut Rng::new(seed)),
            };
            let img = match input {
                Some(p) => Image::load(p)?,
                None => glyphs::sample(&RenderStyle::default(), &mut Rng::new(seed)).image,
            };
            let features = model.conv_features(glyphs::batch_tensor(&[&img])?, layer)?;
            intensity_map(&features, 0)?.to_image().save(&path)?;
            writeln!(out, "wrote {}", path.display())?;
        }
        Command::Bench { op, shape, reps } => {
            writeln!(out, "{}", bench(op, shape, reps)?)?;
        }
    }
    Ok(())
}
