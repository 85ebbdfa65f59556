//! Command-line front end. `main.rs` only forwards to [`main_with_args`].
//!
//! stdout carries machine-readable results only; logging goes to stderr and
//! is controlled by `NSD_LOG` (`quiet`, `info` or `debug`). Failures print a
//! single `code: message` line and exit nonzero.

mod config;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::RunConfig;

use crate::dil::{train, write_loss_csv, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::{
    ablation_configs, best_row, evaluate, learning_rate_configs, load_sharp_dir,
    robustness_sweep, run_study, simulate_pairs, write_manifest, write_study_csv,
    write_sweep_csv, Method, SimulationConfig, SWEEP_BANDS,
};
use crate::gallery::{generate_rkg, load_rkg, save_rkg, GalleryConfig};
use crate::grid::Grid2D;
use crate::image_io::{load_image, save_image};
use crate::lcnn::{extract_drk, init_model, load_model, save_model, Drk, LcnnModel};
use crate::restore::{deblur_with_drk, deblur_with_model, super_resolve, Restorer};
use crate::signal::PadMode;

#[derive(Debug, Parser)]
#[command(name = "nsd", version, about = "Image-free deblurring with a learned restoration kernel")]
struct Cli {
    /// Seed for every random draw; required by generative commands.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; 1 gives the reference serial path.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Base `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RestorerArgs {
    /// Model checkpoint; its kernel is extracted on the fly.
    #[arg(long, conflicts_with = "drk", required_unless_present = "drk")]
    checkpoint: Option<PathBuf>,
    /// Restoration kernel in GRD1 format.
    #[arg(long)]
    drk: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a random kernel gallery.
    GenRkg {
        #[arg(long, default_value = "rkg.bin")]
        out: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        sigma_lo: Option<f64>,
        #[arg(long)]
        sigma_hi: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Train a model on a gallery.
    Train {
        #[arg(long)]
        rkg: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch loss table; defaults to `<out>.loss.csv`.
        #[arg(long)]
        loss_csv: Option<PathBuf>,
    },
    /// Collapse a checkpoint into its restoration kernel.
    ExtractDrk {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Deblur one image.
    Deblur {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        restorer: RestorerArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        pad: Option<PadMode>,
    },
    /// Bicubic upsampling followed by deblurring.
    Sr {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        scale: f64,
        #[command(flatten)]
        restorer: RestorerArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        pad: Option<PadMode>,
    },
    /// Write blurred copies of a sharp corpus plus a manifest.
    Simulate {
        #[arg(long)]
        sharp_dir: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Per-kernel-size PSNR/SSIM table for one or more methods.
    Eval {
        #[arg(long)]
        sharp_dir: PathBuf,
        /// identity, lcnn, drk or wiener; repeatable.
        #[arg(long = "method", required = true)]
        methods: Vec<String>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        drk: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regularizer ablation plus the learning-rate study.
    Ablate {
        #[arg(long)]
        sharp_dir: PathBuf,
        /// Gallery to train on; generated from the config when absent.
        #[arg(long)]
        rkg: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Scores a kernel across widening blur bands.
    Sweep {
        #[arg(long)]
        sharp_dir: PathBuf,
        #[command(flatten)]
        restorer: RestorerArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

fn init_logging() -> Result<()> {
    let level = match std::env::var("NSD_LOG").as_deref() {
        Err(_) | Ok("info") => log::LevelFilter::Info,
        Ok("quiet") => log::LevelFilter::Off,
        Ok("debug") => log::LevelFilter::Debug,
        Ok(other) => {
            return Err(Error::Config(format!(
                "NSD_LOG must be quiet, info or debug, got `{other}`"
            )))
        }
    };
    // A second call in the same process keeps the first logger.
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

enum LoadedRestorer {
    Model(LcnnModel),
    Kernel(Drk),
}

impl LoadedRestorer {
    fn load(args: &RestorerArgs) -> Result<Self> {
        match (&args.checkpoint, &args.drk) {
            (Some(c), _) => Ok(Self::Model(load_model(c)?)),
            (None, Some(d)) => Ok(Self::Kernel(Drk::new(Grid2D::load_grd(d)?)?)),
            (None, None) => Err(Error::Config("need --checkpoint or --drk".into())),
        }
    }

    fn as_restorer(&self) -> Restorer<'_> {
        match self {
            Self::Model(m) => Restorer::Model(m),
            Self::Kernel(d) => Restorer::Kernel(d),
        }
    }

    /// Evaluation always uses the collapsed kernel.
    fn drk(&self) -> Drk {
        match self {
            Self::Model(m) => extract_drk(m),
            Self::Kernel(d) => d.clone(),
        }
    }
}

/// Key/value summary of a restoration kernel, one line.
pub fn drk_summary(drk: &Drk) -> String {
    let g = drk.grid();
    format!(
        "size={} sum={:.12} min={:.12} max={:.12} center={:.12}",
        drk.size(),
        g.sum(),
        g.min(),
        g.max(),
        drk.center()
    )
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("--threads ignored: {e}");
        }
    }
    let mut stdout = std::io::stdout().lock();
    let out_err = |e: std::io::Error| Error::io("<stdout>", e);

    match cli.command {
        Command::GenRkg {
            out,
            count,
            size,
            sigma_lo,
            sigma_hi,
            noise,
        } => {
            cfg.require_seed("gen-rkg")?;
            let flags = [
                ("rkg.count", count.map(|v| v.to_string())),
                ("rkg.size", size.map(|v| v.to_string())),
                ("rkg.sigma_lo", sigma_lo.map(|v| v.to_string())),
                ("rkg.sigma_hi", sigma_hi.map(|v| v.to_string())),
                ("rkg.noise", noise.map(|v| v.to_string())),
            ];
            for (k, v) in flags {
                if let Some(v) = v {
                    cfg.set(k, &v)?;
                }
            }
            let gcfg: GalleryConfig = cfg.gallery_config()?;
            let rkg = generate_rkg(&gcfg)?;
            save_rkg(&rkg, &out)?;
            cfg.save(sidecar(&out, ".config.txt"))?;
            writeln!(stdout, "{}\t{}", out.display(), rkg.len()).map_err(out_err)?;
        }
        Command::Train { rkg, out, loss_csv } => {
            let seed = cfg.require_seed("train")?;
            let tcfg: TrainConfig = cfg.train_config()?;
            let gallery = load_rkg(&rkg)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = init_model(&mut rng, &cfg.topology()?, cfg.init_scheme()?)?;
            let outcome = match train(model, &gallery, &tcfg) {
                Ok(o) => o,
                Err(Error::Diverged { epoch, step, last_good }) => {
                    let rescue = sidecar(&out, ".last-good");
                    save_model(&last_good, &rescue)?;
                    log::error!("saved last finite model to {}", rescue.display());
                    return Err(Error::Diverged { epoch, step, last_good });
                }
                Err(e) => return Err(e),
            };
            save_model(&outcome.model, &out)?;
            let csv = loss_csv.unwrap_or_else(|| sidecar(&out, ".loss.csv"));
            write_with(&csv, |w| write_loss_csv(&outcome.history, w))?;
            cfg.save(sidecar(&out, ".config.txt"))?;
            let last = outcome.history.last().copied().unwrap_or_default();
            writeln!(stdout, "{}\tfinal_total={:.10e}", out.display(), last.total).map_err(out_err)?;
        }
        Command::ExtractDrk { checkpoint, out } => {
            let drk = extract_drk(&load_model(&checkpoint)?);
            drk.grid().save_grd(&out)?;
            writeln!(stdout, "{}", drk_summary(&drk)).map_err(out_err)?;
        }
        Command::Deblur {
            input,
            restorer,
            out,
            pad,
        } => {
            let pad = pad.map_or_else(|| cfg.pad_mode(), Ok)?;
            let img = load_image(&input)?;
            let restored = match LoadedRestorer::load(&restorer)? {
                LoadedRestorer::Model(m) => deblur_with_model(&img, &m, pad)?,
                LoadedRestorer::Kernel(d) => deblur_with_drk(&img, &d, pad)?,
            };
            save_image(&restored, &out)?;
            writeln!(stdout, "{}", out.display()).map_err(out_err)?;
        }
        Command::Sr {
            input,
            scale,
            restorer,
            out,
            pad,
        } => {
            let pad = pad.map_or_else(|| cfg.pad_mode(), Ok)?;
            let img = load_image(&input)?;
            let r = LoadedRestorer::load(&restorer)?;
            let restored = super_resolve(&img, scale, r.as_restorer(), pad)?;
            save_image(&restored, &out)?;
            writeln!(stdout, "{}\t{}x{}", out.display(), restored.rows(), restored.cols())
                .map_err(out_err)?;
        }
        Command::Simulate { sharp_dir, out_dir } => {
            cfg.require_seed("simulate")?;
            let sim = cfg.simulation_config()?;
            let pairs = simulate_pairs(&load_sharp_dir(&sharp_dir)?, &sim)?;
            ensure_dir(&out_dir)?;
            for (i, p) in pairs.iter().enumerate() {
                let stem = p.source.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
                let name = format!("{i:04}_{stem}_k{}.png", p.kernel_size);
                save_image(&p.blurred, out_dir.join(name))?;
            }
            write_with(&out_dir.join("manifest.tsv"), |w| write_manifest(&pairs, w))?;
            cfg.save(out_dir.join("config.txt"))?;
            writeln!(stdout, "{}\t{}", out_dir.display(), pairs.len()).map_err(out_err)?;
        }
        Command::Eval {
            sharp_dir,
            methods,
            checkpoint,
            drk,
            out,
        } => {
            cfg.require_seed("eval")?;
            let sim = cfg.simulation_config()?;
            let pairs = simulate_pairs(&load_sharp_dir(&sharp_dir)?, &sim)?;
            let model = checkpoint.as_ref().map(load_model).transpose()?;
            let kernel = match (&drk, &model) {
                (Some(p), _) => Some(Drk::new(Grid2D::load_grd(p)?)?),
                (None, Some(m)) => Some(extract_drk(m)),
                (None, None) => None,
            };
            let nsr = cfg.wiener_nsr()?;
            let mut w = create(&out)?;
            for (i, name) in methods.iter().enumerate() {
                let method = match name.as_str() {
                    "identity" => Method::Identity,
                    "wiener" => Method::Wiener { nsr },
                    "lcnn" => Method::Lcnn(model.as_ref().ok_or_else(|| {
                        Error::Config("method lcnn needs --checkpoint".into())
                    })?),
                    "drk" => Method::Drk(kernel.as_ref().ok_or_else(|| {
                        Error::Config("method drk needs --checkpoint or --drk".into())
                    })?),
                    other => return Err(Error::Config(format!("unknown method `{other}`"))),
                };
                let report = evaluate(method, &pairs)?;
                log::info!(
                    "{}: psnr {:.4} ssim {:.4} ({:.4} s/image)",
                    report.method,
                    report.aggregate.psnr_mean,
                    report.aggregate.ssim_mean,
                    report.seconds_per_image
                );
                report.write_csv(&mut w, i == 0).map_err(|e| Error::io(&out, e))?;
            }
            w.flush().map_err(|e| Error::io(&out, e))?;
            cfg.save(sidecar(&out, ".config.txt"))?;
            writeln!(stdout, "{}", out.display()).map_err(out_err)?;
        }
        Command::Ablate {
            sharp_dir,
            rkg,
            out_dir,
        } => {
            let seed = cfg.require_seed("ablate")?;
            let gallery = match rkg {
                Some(p) => load_rkg(p)?,
                None => generate_rkg(&GalleryConfig {
                    count: cfg.ablation_count()?,
                    ..cfg.gallery_config()?
                })?,
            };
            let base = TrainConfig {
                epochs: cfg.ablation_epochs()?,
                ..cfg.train_config()?
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let init = init_model(&mut rng, &cfg.topology()?, cfg.init_scheme()?)?;
            let pairs = simulate_pairs(&load_sharp_dir(&sharp_dir)?, &cfg.simulation_config()?)?;

            ensure_dir(&out_dir)?;
            let rows = run_study(&gallery, &init, &pairs, &ablation_configs(&base))?;
            write_with(&out_dir.join("ablation.csv"), |w| write_study_csv(&rows, w))?;
            let lr_rows = run_study(
                &gallery,
                &init,
                &pairs,
                &learning_rate_configs(&base, &cfg.ablation_learning_rates()?),
            )?;
            write_with(&out_dir.join("learning_rate.csv"), |w| write_study_csv(&lr_rows, w))?;
            cfg.save(out_dir.join("config.txt"))?;
            if let Some(b) = best_row(&lr_rows) {
                writeln!(stdout, "best_learning_rate\t{:e}", lr_rows[b].config.learning_rate)
                    .map_err(out_err)?;
            }
        }
        Command::Sweep {
            sharp_dir,
            restorer,
            out,
        } => {
            cfg.require_seed("sweep")?;
            let drk = LoadedRestorer::load(&restorer)?.drk();
            let base: SimulationConfig = cfg.simulation_config()?;
            let rows = robustness_sweep(
                Method::Drk(&drk),
                &load_sharp_dir(&sharp_dir)?,
                &SWEEP_BANDS,
                &base,
            )?;
            write_with(&out, |w| write_sweep_csv(&rows, w))?;
            cfg.save(sidecar(&out, ".config.txt"))?;
            writeln!(stdout, "{}", out.display()).map_err(out_err)?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("usage: {}", first.trim_start_matches("error: "));
            return 2;
        }
    };
    let result = init_logging().and_then(|_| run(cli));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}: {}", e.code(), e.to_string().replace('\n', " "));
            1
        }
    }
}
