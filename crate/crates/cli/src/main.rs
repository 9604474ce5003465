use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sarcolor::bench::{self, BenchOptions, LossTerms, Method, SweepAxis, SynthConfig};
use sarcolor::dataio::{load_manifest, write_patch, Manifest};
use sarcolor::metrics::{evaluate_method, render_table, EvalSettings, MetricReport, DEFAULT_Q4_BLOCK};
use sarcolor::models::{self, read_checkpoint, write_checkpoint, CnnSpec, TrainConfig, CHECKPOINT_MAGIC};
use sarcolor::protocol::synthesize_gt;
use sarcolor::regress::{fit_lr, fit_nl, read_model, write_model, FlatSamples, LmSettings, SpectralModel, MODEL_MAGIC};
use sarcolor::{PairedSample, RasterPatch};

/// SAR colorization toolkit.
#[derive(Parser)]
#[command(name = "sarcolor", version)]
struct Cli {
    /// Seed for every stochastic stage; overrides seeds in config files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build reference colorizations for a manifest and write a dataset that includes them.
    SynthGt {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the procedural desk dataset as `train/` and `test/` splits.
    SynthData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        train: usize,
        #[arg(long, default_value_t = 10)]
        test: usize,
        #[arg(long, default_value_t = 64)]
        side: usize,
    },
    /// Fit a spectral regression model (nocol, lr, nl).
    Fit {
        #[arg(long, value_enum)]
        method: SpectralKind,
        #[arg(long)]
        manifest: PathBuf,
        /// Fit on the first n patches of the manifest only.
        #[arg(long)]
        patches: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Fit the linear model without an intercept.
        #[arg(long)]
        no_bias: bool,
        /// Hidden layer sizes of the MLP.
        #[arg(long, value_delimiter = ',', default_value = "10")]
        hidden: Vec<usize>,
        /// Use every n-th training pixel for the MLP.
        #[arg(long, default_value_t = 16)]
        stride: usize,
    },
    /// Train a network colorizer (cnn, cgan).
    Train {
        #[arg(long, value_enum)]
        method: NetworkKind,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// TOML training configuration; defaults apply otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Cap on optimizer steps.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Colorize every SAR patch of a manifest with a model file, or `nocol`.
    Colorize {
        /// Network checkpoint, spectral model file, or `nocol`.
        #[arg(long, alias = "model")]
        ckpt: String,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions `<pred>/<id>.scp` against the manifest's references.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, default_value = "method")]
        method: String,
        #[arg(long, default_value_t = DEFAULT_Q4_BLOCK)]
        q4_block: usize,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render saved JSON reports as one table.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
    /// Run one ablation axis over a grid.
    Sweep(SweepArgs),
    /// Check analytic gradients of the training losses against finite differences.
    Gradcheck,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    axis: AxisKind,
    /// Comma-separated grid; optional for loss-terms. Kernel points are `9-5-1-5/64-32-32-3`,
    /// hidden points are `10-5`.
    #[arg(long, value_delimiter = ',')]
    grid: Vec<String>,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_Q4_BLOCK)]
    q4_block: usize,
    /// Directory for the JSON report, the curve table and predictions.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpectralKind {
    Nocol,
    Lr,
    Nl,
}

#[derive(Clone, Copy, ValueEnum)]
enum NetworkKind {
    Cnn,
    Cgan,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisKind {
    Alpha,
    Depth,
    LossTerms,
    Hidden,
    Kernel,
    Bias,
}

fn train_config(path: Option<&Path>, seed: Option<u64>, steps: Option<usize>) -> Result<TrainConfig> {
    let mut cfg = match path {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if steps.is_some() {
        cfg.max_steps = steps;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load(path: &Path) -> Result<(Manifest, Vec<PairedSample>)> {
    let m = load_manifest(path).with_context(|| format!("loading manifest {}", path.display()))?;
    let samples = m.load_all()?;
    Ok((m, samples))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn parse_list(text: &str) -> Result<Vec<usize>> {
    text.split('-')
        .map(|v| v.parse().with_context(|| format!("bad list element {v:?} in {text:?}")))
        .collect()
}

fn parse_axis(kind: AxisKind, grid: &[String]) -> Result<SweepAxis> {
    let nums = || -> Result<Vec<f64>> { grid.iter().map(|g| g.parse().with_context(|| format!("bad grid value {g:?}"))).collect() };
    Ok(match kind {
        AxisKind::Alpha => SweepAxis::Alpha(nums()?),
        AxisKind::Depth => SweepAxis::Depth(grid.iter().map(|g| g.parse().with_context(|| format!("bad depth {g:?}"))).collect::<Result<_>>()?),
        AxisKind::LossTerms if grid.is_empty() => SweepAxis::LossTerms(LossTerms::ALL.to_vec()),
        AxisKind::LossTerms => SweepAxis::LossTerms(
            grid.iter()
                .map(|g| match g.as_str() {
                    "l1-only" => Ok(LossTerms::L1Only),
                    "gan-only" => Ok(LossTerms::GanOnly),
                    "gan+l1" => Ok(LossTerms::Both),
                    other => bail!("unknown loss terms {other:?}; expected l1-only, gan-only or gan+l1"),
                })
                .collect::<Result<_>>()?,
        ),
        AxisKind::Hidden => SweepAxis::Hidden(grid.iter().map(|g| parse_list(g)).collect::<Result<_>>()?),
        AxisKind::Kernel => SweepAxis::Kernel(
            grid.iter()
                .map(|g| {
                    let (k, f) = g.split_once('/').with_context(|| format!("kernel point {g:?} needs kernels/filters"))?;
                    Ok(CnnSpec::new(&parse_list(k)?, &parse_list(f)?)?)
                })
                .collect::<Result<_>>()?,
        ),
        AxisKind::Bias => SweepAxis::Bias(
            grid.iter()
                .map(|g| match g.as_str() {
                    "on" | "true" => Ok(true),
                    "off" | "false" => Ok(false),
                    other => bail!("bias grid values are on/off, got {other:?}"),
                })
                .collect::<Result<_>>()?,
        ),
    })
}

/// A model file of either kind, recognized by its magic.
enum Colorizer {
    Spectral(SpectralModel),
    Network(Box<models::Checkpoint>),
}

impl Colorizer {
    fn open(spec: &str) -> Result<Self> {
        if spec == "nocol" {
            return Ok(Colorizer::Spectral(SpectralModel::NoCol));
        }
        let head = {
            use std::io::Read;
            let mut buf = [0u8; 4];
            let mut f = std::fs::File::open(spec).with_context(|| format!("opening model {spec}"))?;
            f.read_exact(&mut buf).with_context(|| format!("reading model {spec}"))?;
            buf
        };
        if head == MODEL_MAGIC.as_bytes() {
            Ok(Colorizer::Spectral(read_model(spec)?))
        } else if head == CHECKPOINT_MAGIC.as_bytes() {
            Ok(Colorizer::Network(Box::new(read_checkpoint(spec)?)))
        } else {
            bail!("{spec} is neither a regression model nor a network checkpoint")
        }
    }

    fn apply(&self, sar: &RasterPatch) -> Result<RasterPatch> {
        Ok(match self {
            Colorizer::Spectral(m) => m.apply(sar)?,
            Colorizer::Network(c) => models::colorize(c, sar)?,
        })
    }
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::SynthGt { manifest, out } => {
            let (_, samples) = load(&manifest)?;
            let with_gt = samples
                .into_iter()
                .map(|mut s| {
                    s.gt = Some(synthesize_gt(&s).with_context(|| format!("protocol on {}", s.id))?.gt);
                    Ok(s)
                })
                .collect::<Result<Vec<_>>>()?;
            let m = bench::write_dataset(&with_gt, &out, "dataset")?;
            println!("wrote {} references to {}", m.len(), out.join("dataset.jsonl").display());
        }
        Command::SynthData { out, train, test, side } => {
            let cfg = SynthConfig {
                count: train + test,
                side,
                seed: seed.unwrap_or(0),
                ..SynthConfig::default()
            };
            let data = bench::synth_dataset(&cfg)?;
            let (a, b) = data.split_at(train);
            bench::write_dataset(a, &out.join("train"), "train")?;
            bench::write_dataset(b, &out.join("test"), "test")?;
            println!(
                "wrote {train} train and {test} test patches of {side}x{side} to {}",
                out.display()
            );
        }
        Command::Fit {
            method,
            manifest,
            patches,
            out,
            no_bias,
            hidden,
            stride,
        } => {
            let (_, mut samples) = load(&manifest)?;
            if let Some(n) = patches {
                samples.truncate(n);
            }
            let model = match method {
                SpectralKind::Nocol => SpectralModel::NoCol,
                SpectralKind::Lr => SpectralModel::Linear(fit_lr(&FlatSamples::from_samples(&samples)?, !no_bias)?),
                SpectralKind::Nl => {
                    let data = FlatSamples::from_samples(&samples)?.strided(stride.max(1));
                    let fit = fit_nl(&data, &hidden, seed.unwrap_or(0), &LmSettings::default())?;
                    println!("lm: {} iterations, final mse {:e}", fit.lm.iterations(), fit.lm.losses.last().copied().unwrap_or(f64::NAN));
                    SpectralModel::Mlp(fit.model)
                }
            };
            write_model(&model, &out)?;
            println!("wrote {} model to {}", model.method_name(), out.display());
        }
        Command::Train {
            method,
            manifest,
            out,
            config,
            steps,
        } => {
            let cfg = train_config(config.as_deref(), seed, steps)?;
            let (_, samples) = load(&manifest)?;
            let ckpt = match method {
                NetworkKind::Cnn => models::train_cnn(&cfg, &samples)?,
                NetworkKind::Cgan => models::train_cgan(&cfg, &samples)?,
            };
            write_checkpoint(&ckpt, &out)?;
            let last = ckpt.trace.steps.last();
            println!(
                "trained {} for {} steps; last l1 {:.6}; wrote {}",
                ckpt.method_name(),
                ckpt.trace.steps.len(),
                last.map(|s| s.loss_l1).unwrap_or(f64::NAN),
                out.display()
            );
        }
        Command::Colorize { ckpt, manifest, out } => {
            let colorizer = Colorizer::open(&ckpt)?;
            let m = load_manifest(&manifest)?;
            create_dir(&out)?;
            let mut n = 0;
            for sample in m.iterate_samples() {
                let sample = sample?;
                let pred = colorizer.apply(&sample.sar).with_context(|| format!("colorizing {}", sample.id))?;
                write_patch(&pred, out.join(format!("{}.scp", sample.id)))?;
                n += 1;
            }
            println!("colorized {n} patches into {}", out.display());
        }
        Command::Eval {
            manifest,
            pred,
            method,
            q4_block,
            out,
        } => {
            let m = load_manifest(&manifest)?;
            let report = evaluate_method(&m, &pred, &method, &EvalSettings::with_block(q4_block))?;
            print!("{}", render_table(std::slice::from_ref(&report)));
            if let Some(out) = out {
                std::fs::write(&out, report.to_json()).with_context(|| format!("writing {}", out.display()))?;
            }
        }
        Command::Report { reports } => {
            let reports = reports
                .iter()
                .map(|p| {
                    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    MetricReport::from_json(&text).with_context(|| format!("parsing {}", p.display()))
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(r) = reports.iter().find(|r| r.settings != reports[0].settings) {
                bail!("report {} was computed under different settings", r.method);
            }
            print!("{}", render_table(&reports));
        }
        Command::Sweep(args) => {
            let axis = parse_axis(args.axis, &args.grid)?;
            let cfg = train_config(args.config.as_deref(), seed, args.steps)?;
            let base = match args.axis {
                AxisKind::Alpha | AxisKind::Depth | AxisKind::LossTerms => Method::Cgan(cfg),
                AxisKind::Kernel => Method::Cnn(cfg),
                AxisKind::Hidden => Method::Nl {
                    hidden: vec![10],
                    seed: seed.unwrap_or(0),
                    stride: 16,
                    lm: LmSettings::default(),
                },
                AxisKind::Bias => Method::lr(),
            };
            let (_, train) = load(&args.train)?;
            let (_, test) = load(&args.test)?;
            create_dir(&args.out)?;
            let options = BenchOptions {
                run_id: axis.name().to_string(),
                settings: EvalSettings::with_block(args.q4_block),
                pred_dir: Some(args.out.join("pred")),
            };
            let report = bench::sweep(&axis, &base, &train, &test, &options)?;
            std::fs::write(args.out.join("sweep.json"), report.to_json())?;
            std::fs::write(args.out.join("curves.tsv"), report.curves_tsv())?;
            print!("{}", report.render());
        }
        Command::Gradcheck => {
            let mut failed = Vec::new();
            for (name, r) in models::gradcheck_suite(seed.unwrap_or(0))? {
                println!(
                    "{} {name}: {} elements, max abs err {:.3e}, max rel err {:.3e}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.checked,
                    r.max_abs_err,
                    r.max_rel_err
                );
                if !r.passed {
                    failed.push(name);
                }
            }
            if !failed.is_empty() {
                bail!("gradient check failed for {}", failed.join(", "));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
