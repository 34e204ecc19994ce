//! Ablation presets mirroring the method's study grid: loss composition,
//! loss-term ratios, margin values, curriculum versus end-to-end training,
//! and a diffusion-noise-level sweep.
//!
//! Every preset trains on the workspace's synthetic task and reports final
//! losses, reward gaps, and a synthetic preference accuracy (the fraction of
//! held-out samples where the policy prefers the chosen response and the
//! clean image). That accuracy is a desk-scale stand-in for the benchmark
//! metrics, not a reproduction of them. The held-out image contrast is
//! evaluated at a fixed moderate corruption band with a fixed noise seed,
//! independent of the training noise level, the way a fixed benchmark faces
//! every training configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::{load_dataset, NoiseSchedule, PreferenceSample};
use crate::error::{Error, Result};
use crate::keyrank::{annotate_keywords, HashedNgramEmbedder, KeyrankParams};
use crate::losses::{LossConfig, LossSwitches};
use crate::perturb::{perturb_dataset, AnnotationProvider, MaskProvider, PerturbConfig};
use crate::policy::{FeatureExtractor, ToyPolicy};
use crate::train::{
    collect_candidates, preference_accuracy, train, OptimizerKind, TrainConfig, TrainMode,
};

pub const PRESETS: &[&str] = &[
    "loss-composition",
    "loss-ratio",
    "margin",
    "curriculum",
    "noise-sweep",
];

/// Noise seed for held-out perturbations: fixed so every configuration is
/// judged against identical corrupted images.
const EVAL_NOISE_SEED: u64 = 0xE7A1_5EED;

/// Ramp used by the noise-level sweep: a quadratic ramp whose grid spans
/// signal levels from ~0.99 (step 100) down to ~0.01 (step 900).
pub const SWEEP_SCHEDULE_STRENGTH: f64 = 19.0;
pub const SWEEP_SCHEDULE_POWER: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct AblationOptions {
    pub seeds: Vec<u64>,
    pub schedule_steps: usize,
    /// Training-time diffusion step for presets that do not sweep it.
    pub default_t: usize,
    /// Held-out corruption band for the accuracy's image condition.
    pub eval_band: Vec<usize>,
    pub phase_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub init_scale: f64,
    /// Implicit-reward temperature used by every preset run.
    pub beta: f64,
    pub optimizer: OptimizerKind,
}

impl Default for AblationOptions {
    fn default() -> Self {
        Self {
            seeds: vec![1, 2, 3, 4, 5],
            schedule_steps: 1000,
            default_t: 500,
            eval_band: vec![300, 500, 700],
            phase_epochs: 1,
            learning_rate: 1.0,
            batch_size: 2,
            init_scale: 0.005,
            beta: 2.0,
            optimizer: OptimizerKind::Sgd,
        }
    }
}

impl AblationOptions {
    /// The working protocol of each preset. The loss studies run hot
    /// plain-SGD so sigmoid saturation freezes whatever a disabled term
    /// would have learned incidentally; the curriculum and noise-sweep
    /// studies run Adam, whose per-parameter normalization keeps run-to-run
    /// magnitudes comparable so the comparisons isolate schedule and noise
    /// level.
    pub fn for_preset(preset: &str) -> Result<Self> {
        let base = Self::default();
        Ok(match preset {
            "loss-composition" | "loss-ratio" | "margin" => base,
            "curriculum" => Self {
                optimizer: OptimizerKind::Adam,
                beta: 1.0,
                learning_rate: 0.02,
                batch_size: 10,
                phase_epochs: 2,
                eval_band: vec![500],
                ..base
            },
            "noise-sweep" => Self {
                optimizer: OptimizerKind::Adam,
                beta: 1.0,
                learning_rate: 0.01,
                batch_size: 10,
                phase_epochs: 1,
                eval_band: vec![200],
                ..base
            },
            other => {
                return Err(Error::UnknownPreset {
                    name: other.to_string(),
                    available: PRESETS.join(", "),
                })
            }
        })
    }
}

/// One grid cell of a preset.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub label: String,
    pub switches: LossSwitches,
    pub weights: (f64, f64, f64),
    pub eta: f64,
    pub mode: TrainMode,
    pub t_train: usize,
    /// Ramp strength for this run's perturbations and its held-out
    /// corruption band.
    pub schedule_strength: f64,
    /// Ramp power: 1 is the pipeline's linear default; the sweep uses a
    /// steeper ramp so its grid spans the full corruption range.
    pub schedule_power: f64,
}

impl RunSpec {
    fn baseline(label: impl Into<String>, t_train: usize) -> Self {
        Self {
            label: label.into(),
            switches: LossSwitches::default(),
            weights: (1.0, 1.0, 1.0),
            eta: 0.0,
            mode: TrainMode::EndToEnd,
            t_train,
            schedule_strength: 24.0,
            schedule_power: 1.0,
        }
    }
}

/// One result row: configuration plus final-epoch metrics.
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub preset: String,
    pub label: String,
    pub seed: u64,
    pub mode: &'static str,
    pub t_train: usize,
    pub eta: f64,
    pub w_text: f64,
    pub w_image: f64,
    pub w_margin: f64,
    pub text_on: bool,
    pub image_on: bool,
    pub margin_on: bool,
    pub final_l_text: f64,
    pub final_l_image: f64,
    pub final_l_margin: f64,
    pub final_l_total: f64,
    /// Final-epoch mean of chosen minus rejected text reward.
    pub text_gap: f64,
    /// Final-epoch mean of chosen minus rejected image reward.
    pub image_gap: f64,
    /// Final-epoch mean chosen-text reward (margin-stability readout).
    pub chosen_text_reward: f64,
    /// Synthetic preference accuracy on the held-out split.
    pub accuracy: f64,
    /// Gradient steps the run consumed.
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct AblationReport {
    pub preset: String,
    pub rows: Vec<AblationRow>,
}

pub const ABLATION_COLUMNS: [&str; 21] = [
    "preset",
    "label",
    "seed",
    "mode",
    "t_train",
    "eta",
    "w_text",
    "w_image",
    "w_margin",
    "text_on",
    "image_on",
    "margin_on",
    "final_l_text",
    "final_l_image",
    "final_l_margin",
    "final_l_total",
    "text_gap",
    "image_gap",
    "chosen_text_reward",
    "accuracy",
    "steps",
];

impl AblationReport {
    pub fn to_csv(&self) -> String {
        let mut out = ABLATION_COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.preset,
                r.label,
                r.seed,
                r.mode,
                r.t_train,
                r.eta,
                r.w_text,
                r.w_image,
                r.w_margin,
                r.text_on,
                r.image_on,
                r.margin_on,
                r.final_l_text,
                r.final_l_image,
                r.final_l_margin,
                r.final_l_total,
                r.text_gap,
                r.image_gap,
                r.chosen_text_reward,
                r.accuracy,
                r.steps
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// The grid of one preset.
pub fn preset_grid(preset: &str, opts: &AblationOptions) -> Result<Vec<RunSpec>> {
    let t = opts.default_t;
    let grid = match preset {
        // Switch matrix of the loss-composition study: text+margin,
        // image+margin, text+image, and all three.
        "loss-composition" => vec![
            RunSpec {
                label: "text+margin".into(),
                switches: LossSwitches {
                    text: true,
                    image: false,
                    margin: true,
                },
                ..RunSpec::baseline("", t)
            },
            RunSpec {
                label: "image+margin".into(),
                switches: LossSwitches {
                    text: false,
                    image: true,
                    margin: true,
                },
                ..RunSpec::baseline("", t)
            },
            RunSpec {
                label: "text+image".into(),
                switches: LossSwitches {
                    text: true,
                    image: true,
                    margin: false,
                },
                ..RunSpec::baseline("", t)
            },
            RunSpec::baseline("text+image+margin", t),
        ],
        "loss-ratio" => [
            ("1:1:1", (1.0, 1.0, 1.0)),
            ("1:5:1", (1.0, 5.0, 1.0)),
            ("5:1:1", (5.0, 1.0, 1.0)),
            ("1:1:5", (1.0, 1.0, 5.0)),
        ]
        .into_iter()
        .map(|(label, weights)| RunSpec {
            label: label.into(),
            weights,
            ..RunSpec::baseline("", t)
        })
        .collect(),
        "margin" => [0.0, 0.2, 0.4]
            .into_iter()
            .map(|eta| RunSpec {
                label: format!("eta={eta}"),
                eta,
                ..RunSpec::baseline("", t)
            })
            .collect(),
        "curriculum" => vec![
            RunSpec {
                label: "easy-to-hard".into(),
                mode: TrainMode::EasyToHard,
                ..RunSpec::baseline("", t)
            },
            RunSpec::baseline("end-to-end", t),
        ],
        // The sweep uses a gentler ramp so its grid spans the full
        // corruption range (signal level ~0.95 down to ~0.02) instead of
        // collapsing the top half into indistinguishable pure noise.
        "noise-sweep" => [100usize, 300, 500, 700, 900]
            .into_iter()
            .map(|step| RunSpec {
                label: format!("t={step}"),
                schedule_strength: SWEEP_SCHEDULE_STRENGTH,
                schedule_power: SWEEP_SCHEDULE_POWER,
                // Image-heavy weighting (a ratio-study row) amplifies the
                // readout of the image channel the sweep is probing.
                weights: (1.0, 5.0, 1.0),
                ..RunSpec::baseline("", step)
            })
            .collect(),
        other => {
            return Err(Error::UnknownPreset {
                name: other.to_string(),
                available: PRESETS.join(", "),
            })
        }
    };
    Ok(grid)
}

/// Train one configuration and evaluate it on the held-out split.
pub fn run_experiment(
    train_samples: &[PreferenceSample],
    eval_samples: &[PreferenceSample],
    provider: &dyn MaskProvider,
    run: &RunSpec,
    seed: u64,
    opts: &AblationOptions,
) -> Result<AblationRow> {
    let schedule =
        NoiseSchedule::polynomial(opts.schedule_steps, run.schedule_strength, run.schedule_power)?;

    // Keyword annotation (skipped when the input already carries keywords).
    let mut train_set = train_samples.to_vec();
    let mut eval_set = eval_samples.to_vec();
    let embedder = HashedNgramEmbedder::default();
    let keyrank = KeyrankParams::default();
    if train_set.iter().any(|s| s.keywords.is_empty()) {
        annotate_keywords(&mut train_set, &keyrank, &embedder)?;
    }
    if eval_set.iter().any(|s| s.keywords.is_empty()) {
        annotate_keywords(&mut eval_set, &keyrank, &embedder)?;
    }

    // Training-time perturbation at this run's noise level.
    let train_cfg_noise = PerturbConfig::new(schedule.clone(), run.t_train, seed)?;
    let train_set = perturb_dataset(&train_set, provider, &train_cfg_noise)?;

    let candidates = collect_candidates(&[&train_set, &eval_set]);
    let policy = ToyPolicy::new(FeatureExtractor::default(), candidates)?
        .with_random_init(seed, opts.init_scale);

    let cfg = TrainConfig {
        optimizer: opts.optimizer,
        learning_rate: opts.learning_rate,
        phase_epochs: opts.phase_epochs,
        batch_size: opts.batch_size,
        seed,
        loss: LossConfig {
            beta: opts.beta,
            eta: run.eta,
            w_text: run.weights.0,
            w_image: run.weights.1,
            w_margin: run.weights.2,
            ..LossConfig::default()
        },
        switches: run.switches,
        mode: run.mode,
        ..TrainConfig::default()
    };
    let (policy, log) = train(&train_set, policy, &cfg)?;

    // Held-out accuracy, averaged over the fixed corruption band.
    let mut accuracy = 0.0;
    for &t_eval in &opts.eval_band {
        let eval_noise = PerturbConfig::new(schedule.clone(), t_eval, EVAL_NOISE_SEED)?;
        let perturbed_eval = perturb_dataset(&eval_set, provider, &eval_noise)?;
        accuracy += preference_accuracy(&policy, &perturbed_eval)?;
    }
    accuracy /= opts.eval_band.len().max(1) as f64;

    Ok(AblationRow {
        preset: String::new(),
        label: run.label.clone(),
        seed,
        mode: run.mode.as_str(),
        t_train: run.t_train,
        eta: run.eta,
        w_text: run.weights.0,
        w_image: run.weights.1,
        w_margin: run.weights.2,
        text_on: run.switches.text,
        image_on: run.switches.image,
        margin_on: run.switches.margin,
        final_l_text: log.final_epoch_mean(|r| r.l_text),
        final_l_image: log.final_epoch_mean(|r| r.l_image),
        final_l_margin: log.final_epoch_mean(|r| r.l_margin),
        final_l_total: log.final_epoch_mean(|r| r.l_total),
        text_gap: log.final_epoch_mean(|r| r.chosen_text_reward - r.rejected_text_reward),
        image_gap: log.final_epoch_mean(|r| r.chosen_image_reward - r.rejected_image_reward),
        chosen_text_reward: log.final_epoch_mean(|r| r.chosen_text_reward),
        accuracy,
        steps: log.len(),
    })
}

/// Run a preset against a workspace prepared by the synthetic-task
/// generator: `data.jsonl`, `eval.jsonl`, and `annotations.json`.
pub fn run_ablation(preset: &str, workspace: impl AsRef<Path>, opts: &AblationOptions) -> Result<AblationReport> {
    let workspace = workspace.as_ref();
    let grid = preset_grid(preset, opts)?;
    let train_samples = load_dataset(workspace.join("data.jsonl"))?;
    let eval_samples = load_dataset(workspace.join("eval.jsonl"))?;
    let provider = AnnotationProvider::from_file(workspace.join("annotations.json"))?;

    let mut rows = Vec::with_capacity(grid.len() * opts.seeds.len());
    for run in &grid {
        for &seed in &opts.seeds {
            let mut row = run_experiment(&train_samples, &eval_samples, &provider, run, seed, opts)?;
            row.preset = preset.to_string();
            rows.push(row);
        }
    }
    Ok(AblationReport {
        preset: preset.to_string(),
        rows,
    })
}
