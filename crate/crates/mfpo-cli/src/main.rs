//! Pipeline command line: synthetic data generation, keyword ranking,
//! region perturbation, entropy sorting, training, evaluation, ablation
//! presets, and plot-data reports.
//!
//! Every numeric option can also come from a flat `key=value` config file
//! (`--config run.cfg`); explicit command-line flags win. Exit codes: 0 on
//! success, 2 on validation errors, 3 on training divergence.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mfpo::curriculum;
use mfpo::data::{load_dataset, save_dataset_with_images, NoiseSchedule};
use mfpo::keyrank::{annotate_keywords, GraphParams, HashedNgramEmbedder, KeyrankParams, RankParams};
use mfpo::losses::{LossConfig, LossSwitches};
use mfpo::perturb::{perturb_dataset, save_annotations, AnnotationProvider, PerturbConfig};
use mfpo::policy::{FeatureExtractor, ToyPolicy};
use mfpo::train::{
    self, collect_candidates, make_synthetic_task, preference_accuracy, run_ablation,
    AblationOptions, OptimizerKind, SynthSpec, TrainConfig, TrainMode, TrajectoryLog,
};

#[derive(Parser)]
#[command(name = "mfpo", version, about = "Modality-fair preference optimization pipeline")]
struct Cli {
    /// Seed applied when a subcommand does not set its own.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Workspace directory (used by gen-synth and ablate).
    #[arg(long, global = true)]
    workspace: Option<PathBuf>,
    /// Flat key=value config file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic rectangle task into a workspace.
    GenSynth(GenSynthArgs),
    /// Select and store top-k keywords for every record.
    Keyrank(KeyrankArgs),
    /// Perturb keyword regions with diffusion noise.
    Perturb(PerturbArgs),
    /// Score entropy, bucket by difficulty, and annotate records.
    EntropySort(EntropySortArgs),
    /// Train a policy on a prepared dataset.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a prepared dataset.
    Eval(EvalArgs),
    /// Run an ablation preset over a workspace.
    Ablate(AblateArgs),
    /// Convert a trajectory log into plot-data files.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenSynthArgs {
    /// Output directory (defaults to --workspace).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_eval: Option<usize>,
    #[arg(long)]
    image_size: Option<usize>,
    #[arg(long)]
    rect_min: Option<usize>,
    #[arg(long)]
    rect_max: Option<usize>,
    #[arg(long)]
    contrast_min: Option<f64>,
    #[arg(long)]
    background: Option<f64>,
    #[arg(long)]
    background_noise: Option<f64>,
}

#[derive(Args)]
struct KeyrankArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Rank over the prompt concatenated with the chosen response.
    #[arg(long)]
    include_prompt: bool,
}

#[derive(Args)]
struct PerturbArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    annotations: PathBuf,
    /// Diffusion step index.
    #[arg(long)]
    t: Option<usize>,
    /// Noise schedule, e.g. `linear:1000` or `linear:1000:24`.
    #[arg(long)]
    schedule: Option<String>,
    /// Keep out-of-range values instead of clamping into [0, 1].
    #[arg(long)]
    no_clamp: bool,
}

#[derive(Args)]
struct EntropySortArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Policy checkpoint to score with; a fresh seeded policy is used when
    /// absent.
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    init_scale: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Where to write the trained checkpoint.
    #[arg(long)]
    ckpt_out: PathBuf,
    /// Where to write the trajectory CSV.
    #[arg(long)]
    log_out: Option<PathBuf>,
    /// Warm-start checkpoint; a fresh seeded policy is used when absent.
    #[arg(long)]
    ckpt_in: Option<PathBuf>,
    /// `easy-to-hard` or `end-to-end`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    phase_epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// `adam` or `sgd`.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    w_text: Option<f64>,
    #[arg(long)]
    w_image: Option<f64>,
    #[arg(long)]
    w_margin: Option<f64>,
    #[arg(long)]
    disable_text: bool,
    #[arg(long)]
    disable_image: bool,
    #[arg(long)]
    disable_margin: bool,
    /// Divide sequence log-probabilities by response length in the losses.
    #[arg(long)]
    length_normalized: bool,
    /// Keep the initial entropy buckets across phases.
    #[arg(long)]
    no_rescore: bool,
    #[arg(long)]
    init_scale: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    preset: String,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated seed list.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    phase_epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    init_scale: Option<f64>,
    /// Training diffusion step for non-sweep presets.
    #[arg(long)]
    t: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Trajectory CSV produced by `train --log-out`.
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Flat key=value defaults from `--config`.
struct Overlay(HashMap<String, String>);

impl Overlay {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut map = HashMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    bail!("config line {}: expected key=value, got `{line}`", i + 1);
                };
                map.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Self(map))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| anyhow::anyhow!("config key `{key}`: cannot parse `{raw}`")),
        }
    }

    /// Flag value, then config value, then default.
    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(match flag {
            Some(v) => v,
            None => self.get(key)?.unwrap_or(default),
        })
    }
}

fn parse_schedule(spec: &str) -> Result<NoiseSchedule> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["linear", steps] => Ok(NoiseSchedule::linear(steps.parse()?)?),
        ["linear", steps, strength] => Ok(NoiseSchedule::linear_with_strength(
            steps.parse()?,
            strength.parse()?,
        )?),
        _ => bail!("unknown schedule `{spec}`; expected linear:<steps>[:<strength>]"),
    }
}

fn parse_seed_list(spec: &str) -> Result<Vec<u64>> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .with_context(|| format!("bad seed `{s}` in list"))
        })
        .collect()
}

fn fresh_policy(
    samples: &[mfpo::data::PreferenceSample],
    seed: u64,
    init_scale: f64,
) -> Result<ToyPolicy> {
    let candidates = collect_candidates(&[samples]);
    Ok(ToyPolicy::new(FeatureExtractor::default(), candidates)?.with_random_init(seed, init_scale))
}

fn run(cli: Cli) -> Result<()> {
    let overlay = Overlay::load(cli.config.as_deref())?;
    let seed = overlay.pick(cli.seed, "seed", 0)?;

    match cli.command {
        Command::GenSynth(args) => {
            let out_dir = args
                .out_dir
                .or(cli.workspace)
                .context("gen-synth needs --out-dir or --workspace")?;
            let defaults = SynthSpec::default();
            let spec = SynthSpec {
                n_train: overlay.pick(args.n_train, "n_train", defaults.n_train)?,
                n_eval: overlay.pick(args.n_eval, "n_eval", defaults.n_eval)?,
                image_size: overlay.pick(args.image_size, "image_size", defaults.image_size)?,
                rect_min: overlay.pick(args.rect_min, "rect_min", defaults.rect_min)?,
                rect_max: overlay.pick(args.rect_max, "rect_max", defaults.rect_max)?,
                contrast_min: overlay.pick(args.contrast_min, "contrast_min", defaults.contrast_min)?,
                background: overlay.pick(args.background, "background", defaults.background)?,
                background_noise: overlay
                    .pick(args.background_noise, "background_noise", defaults.background_noise)?,
                seed,
                ..defaults
            };
            let task = make_synthetic_task(&spec)?;
            fs::create_dir_all(&out_dir)?;
            save_dataset_with_images(&task.train, out_dir.join("data.jsonl"), "images")?;
            save_dataset_with_images(&task.eval, out_dir.join("eval.jsonl"), "images")?;
            save_annotations(&task.annotations, out_dir.join("annotations.json"))?;
            println!(
                "wrote {} train and {} eval samples to {}",
                task.train.len(),
                task.eval.len(),
                out_dir.display()
            );
        }
        Command::Keyrank(args) => {
            let params = KeyrankParams {
                graph: GraphParams {
                    phi: overlay.pick(args.phi, "phi", 1.0)?,
                    gamma: overlay.pick(args.gamma, "gamma", 0.5)?,
                    lambda: overlay.pick(args.lambda, "lambda", 0.01)?,
                    rho: overlay.pick(args.rho, "rho", 0.1)?,
                },
                rank: RankParams {
                    damping: overlay.pick(args.damping, "damping", 0.85)?,
                    tol: overlay.pick(args.tol, "tol", 1e-8)?,
                    max_iter: overlay.pick(args.max_iter, "max_iter", 200)?,
                    k: overlay.pick(args.k, "k", 3)?,
                },
                include_prompt: args.include_prompt
                    || overlay.get("include_prompt")?.unwrap_or(false),
                ..KeyrankParams::default()
            };
            let mut samples = load_dataset(&args.input)?;
            annotate_keywords(&mut samples, &params, &HashedNgramEmbedder::default())?;
            save_dataset_with_images(&samples, &args.out, "images")?;
            println!("annotated {} samples with keywords", samples.len());
        }
        Command::Perturb(args) => {
            let schedule_spec = match args.schedule {
                Some(s) => s,
                None => overlay
                    .get::<String>("schedule")?
                    .unwrap_or_else(|| "linear:1000".to_string()),
            };
            let schedule = parse_schedule(&schedule_spec)?;
            let t = overlay.pick(args.t, "t", 500)?;
            let mut cfg = PerturbConfig::new(schedule, t, seed)?;
            if args.no_clamp {
                cfg = cfg.without_clamping();
            }
            let provider = AnnotationProvider::from_file(&args.annotations)?;
            let samples = load_dataset(&args.input)?;
            let out = perturb_dataset(&samples, &provider, &cfg)?;
            save_dataset_with_images(&out, &args.out, "images")?;
            println!("perturbed {} samples at t={t}", out.len());
        }
        Command::EntropySort(args) => {
            let mut samples = load_dataset(&args.input)?;
            let policy = match &args.ckpt {
                Some(path) => ToyPolicy::load(path)?,
                None => fresh_policy(&samples, seed, overlay.pick(args.init_scale, "init_scale", 0.02)?)?,
            };
            let scored = curriculum::score_dataset(&policy, &samples)?;
            let plan = curriculum::make_plan(&scored, 1)?;
            curriculum::annotate_dataset(&mut samples, &plan)?;
            save_dataset_with_images(&samples, &args.out, "images")?;
            println!("scored and bucketed {} samples", samples.len());
        }
        Command::Train(args) => {
            let samples = load_dataset(&args.input)?;
            let policy = match &args.ckpt_in {
                Some(path) => ToyPolicy::load(path)?,
                None => fresh_policy(&samples, seed, overlay.pick(args.init_scale, "init_scale", 0.02)?)?,
            };
            let mode_str = overlay.pick(args.mode, "mode", "end-to-end".to_string())?;
            let opt_str = overlay.pick(args.optimizer, "optimizer", "adam".to_string())?;
            let cfg = TrainConfig {
                optimizer: OptimizerKind::from_str(&opt_str)?,
                learning_rate: overlay.pick(args.learning_rate, "learning_rate", 1e-2)?,
                phase_epochs: overlay.pick(args.phase_epochs, "phase_epochs", 1)?,
                batch_size: overlay.pick(args.batch_size, "batch_size", 10)?,
                seed,
                loss: LossConfig {
                    beta: overlay.pick(args.beta, "beta", 0.1)?,
                    eta: overlay.pick(args.eta, "eta", 0.0)?,
                    w_text: overlay.pick(args.w_text, "w_text", 1.0)?,
                    w_image: overlay.pick(args.w_image, "w_image", 1.0)?,
                    w_margin: overlay.pick(args.w_margin, "w_margin", 1.0)?,
                    length_normalized: args.length_normalized
                        || overlay.get("length_normalized")?.unwrap_or(false),
                },
                switches: LossSwitches {
                    text: !args.disable_text,
                    image: !args.disable_image,
                    margin: !args.disable_margin,
                },
                mode: TrainMode::from_str(&mode_str)?,
                rescore: !args.no_rescore,
            };
            let (trained, log) = train::train(&samples, policy, &cfg)?;
            trained.save(&args.ckpt_out)?;
            if let Some(log_out) = &args.log_out {
                fs::write(log_out, log.to_csv())?;
            }
            let final_loss = log.final_epoch_mean(|r| r.l_total);
            println!(
                "trained on {} samples for {} steps; final-epoch mean loss {final_loss:.6}",
                samples.len(),
                log.len()
            );
        }
        Command::Eval(args) => {
            let samples = load_dataset(&args.input)?;
            let policy = ToyPolicy::load(&args.ckpt)?;
            let accuracy = preference_accuracy(&policy, &samples)?;
            println!("samples: {}", samples.len());
            println!("preference_accuracy: {accuracy:.4}");
        }
        Command::Ablate(args) => {
            let workspace = cli.workspace.context("ablate needs --workspace")?;
            let defaults = AblationOptions::for_preset(&args.preset)?;
            let seeds = match &args.seeds {
                Some(spec) => parse_seed_list(spec)?,
                None => match overlay.get::<String>("seeds")? {
                    Some(spec) => parse_seed_list(&spec)?,
                    None => defaults.seeds.clone(),
                },
            };
            let opts = AblationOptions {
                seeds,
                default_t: overlay.pick(args.t, "t", defaults.default_t)?,
                phase_epochs: overlay.pick(args.phase_epochs, "phase_epochs", defaults.phase_epochs)?,
                learning_rate: overlay.pick(args.learning_rate, "learning_rate", defaults.learning_rate)?,
                batch_size: overlay.pick(args.batch_size, "batch_size", defaults.batch_size)?,
                init_scale: overlay.pick(args.init_scale, "init_scale", defaults.init_scale)?,
                ..defaults
            };
            let report = run_ablation(&args.preset, &workspace, &opts)?;
            report.write_csv(&args.out)?;
            println!("{} rows -> {}", report.rows.len(), args.out.display());
        }
        Command::Report(args) => {
            let log = TrajectoryLog::from_csv(&fs::read_to_string(&args.log)?)?;
            let paths = train::write_report(&log, &args.out_dir)?;
            println!(
                "wrote {}, {}, {}",
                paths.trajectory_csv.display(),
                paths.rewards_json.display(),
                paths.losses_json.display()
            );
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .downcast_ref::<mfpo::Error>()
                .map_or(2, mfpo::Error::exit_code);
            std::process::exit(code);
        }
    }
}
