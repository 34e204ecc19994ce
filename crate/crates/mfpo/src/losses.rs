//! Preference losses: the pairwise reward-model loss, DPO, and the joint
//! text/image/margin objective, all with exact analytic gradients.
//!
//! Every loss is a `-log sigmoid(z)` of some implicit-reward contrast:
//!
//! - text:   `z = beta * (logratio(y_w | t, m) - logratio(y_l | t, m))`
//! - image:  `z = beta * (logratio(y_w | t, m) - logratio(y_w | t, m'))` —
//!   only the preferred response enters the image contrast

//! - margin: `z = beta * logratio(y_w | t, m) - eta`
//!
//! with `logratio(y | x) = log pi_theta(y|x) - log pi_ref(y|x)`. The total
//! is the weighted sum of the three. `-log sigmoid(z)` is computed as
//! `softplus(-z)` so large contrasts cannot overflow. The partition term of
//! the implicit reward is constant per input and omitted everywhere.

use crate::data::PreferenceSample;
use crate::error::{Error, Result};
use crate::policy::{Features, ToyPolicy};

/// Loss hyperparameters.
#[derive(Debug, Clone)]
pub struct LossConfig {
    /// Inverse temperature of the implicit reward.
    pub beta: f64,
    /// Margin subtracted inside the margin loss.
    pub eta: f64,
    /// Term weights (text, image, margin).
    pub w_text: f64,
    pub w_image: f64,
    pub w_margin: f64,
    /// Divide sequence log-probabilities by response length before forming
    /// ratios. Off by default.
    pub length_normalized: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            beta: 0.1,
            eta: 0.0,
            w_text: 1.0,
            w_image: 1.0,
            w_margin: 1.0,
            length_normalized: false,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() || self.beta <= 0.0 {
            return Err(Error::param("beta", format!("{} must be > 0", self.beta)));
        }
        if !self.eta.is_finite() || self.eta < 0.0 {
            return Err(Error::param("eta", format!("{} must be >= 0", self.eta)));
        }
        for (name, w) in [
            ("w_text", self.w_text),
            ("w_image", self.w_image),
            ("w_margin", self.w_margin),
        ] {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::param(name, format!("{w} must be > 0")));
            }
        }
        Ok(())
    }
}

/// Which loss terms participate; the ablation switch matrix.
#[derive(Debug, Clone, Copy)]
pub struct LossSwitches {
    pub text: bool,
    pub image: bool,
    pub margin: bool,
}

impl Default for LossSwitches {
    fn default() -> Self {
        Self {
            text: true,
            image: true,
            margin: true,
        }
    }
}

impl LossSwitches {
    pub fn validate(&self) -> Result<()> {
        if !(self.text || self.image || self.margin) {
            return Err(Error::param("switches", "at least one loss term must be enabled"));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.text {
            parts.push("text");
        }
        if self.image {
            parts.push("image");
        }
        if self.margin {
            parts.push("margin");
        }
        parts.join("+")
    }
}

/// The four implicit rewards logged per step: `beta * logratio` for the
/// chosen/rejected sides of the text and image contrasts. All are exactly
/// zero when the policy equals the reference.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RewardReport {
    pub chosen_text: f64,
    pub rejected_text: f64,
    pub chosen_image: f64,
    pub rejected_image: f64,
}

/// Numerically safe `softplus(x) = ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `-log sigmoid(z)`, the common outer loss.
pub fn neg_log_sigmoid(z: f64) -> f64 {
    softplus(-z)
}

/// Logistic sigmoid.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Pairwise reward-model loss `-log sigmoid(r_w - r_l)`: strictly decreasing
/// in the reward gap, zero in the infinite-gap limit.
pub fn rm_loss(reward_chosen: f64, reward_rejected: f64) -> f64 {
    neg_log_sigmoid(reward_chosen - reward_rejected)
}

/// Gradient of `rm_loss` in its two scalar arguments.
pub fn rm_loss_grad(reward_chosen: f64, reward_rejected: f64) -> (f64, f64) {
    let s = sigmoid(-(reward_chosen - reward_rejected));
    (-s, s)
}

/// A sample with its conditioning features resolved against a policy:
/// computing these once makes training cheap, since features do not depend
/// on the parameters.
#[derive(Debug, Clone)]
pub struct PreparedSample {
    pub id: String,
    pub features: Features,
    pub features_perturbed: Option<Features>,
    pub chosen_idx: usize,
    pub rejected_idx: usize,
    pub chosen_len: usize,
}

/// Resolve candidate indices and input features for a sample. The policy
/// and its reference snapshot share the extractor and candidate set, so one
/// preparation serves both.
pub fn prepare(policy: &ToyPolicy, sample: &PreferenceSample) -> Result<PreparedSample> {
    let features = policy.input_features(&sample.prompt, &sample.image)?;
    let features_perturbed = sample
        .perturbed_image
        .as_ref()
        .map(|m| policy.input_features(&sample.prompt, m))
        .transpose()?;
    Ok(PreparedSample {
        id: sample.id.clone(),
        features,
        features_perturbed,
        chosen_idx: policy.candidate_index(&sample.chosen)?,
        rejected_idx: policy.candidate_index(&sample.rejected)?,
        chosen_len: sample.chosen.len().max(1),
    })
}

/// Per-term values of one composite evaluation. Disabled terms read zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossBreakdown {
    pub text: f64,
    pub image: f64,
    pub margin: f64,
    pub total: f64,
    pub rewards: RewardReport,
}

fn log_ratio(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    features: &Features,
    idx: usize,
    norm: f64,
) -> f64 {
    (policy.log_prob_feat(features, idx) - reference.log_prob_feat(features, idx)) * norm
}

struct Contrasts {
    z_text: f64,
    z_image: Option<f64>,
    z_margin: f64,
    rewards: RewardReport,
}

fn contrasts(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    prep: &PreparedSample,
    cfg: &LossConfig,
) -> Contrasts {
    let norm_w = if cfg.length_normalized {
        1.0 / prep.chosen_len as f64
    } else {
        1.0
    };
    // Rejected-side normalization uses the rejected length; recover it from
    // the candidate set only when needed.
    let lr_w = log_ratio(policy, reference, &prep.features, prep.chosen_idx, norm_w);
    let norm_l = if cfg.length_normalized {
        1.0 / policy.candidates()[prep.rejected_idx].len().max(1) as f64
    } else {
        1.0
    };
    let lr_l = log_ratio(policy, reference, &prep.features, prep.rejected_idx, norm_l);
    let lr_w_pert = prep
        .features_perturbed
        .as_ref()
        .map(|f| log_ratio(policy, reference, f, prep.chosen_idx, norm_w));

    Contrasts {
        z_text: cfg.beta * (lr_w - lr_l),
        z_image: lr_w_pert.map(|lp| cfg.beta * (lr_w - lp)),
        z_margin: cfg.beta * lr_w - cfg.eta,
        rewards: RewardReport {
            chosen_text: cfg.beta * lr_w,
            rejected_text: cfg.beta * lr_l,
            chosen_image: cfg.beta * lr_w,
            rejected_image: lr_w_pert.map_or(0.0, |lp| cfg.beta * lp),
        },
    }
}

/// Evaluate the enabled loss terms for one prepared sample.
pub fn composite_loss(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    prep: &PreparedSample,
    cfg: &LossConfig,
    switches: &LossSwitches,
) -> Result<LossBreakdown> {
    cfg.validate()?;
    switches.validate()?;
    let c = contrasts(policy, reference, prep, cfg);
    let mut out = LossBreakdown {
        rewards: c.rewards,
        ..LossBreakdown::default()
    };
    if switches.text {
        out.text = neg_log_sigmoid(c.z_text);
        out.total += cfg.w_text * out.text;
    }
    if switches.image {
        let z = c.z_image.ok_or_else(|| Error::MissingPerturbedImage {
            id: prep.id.clone(),
        })?;
        out.image = neg_log_sigmoid(z);
        out.total += cfg.w_image * out.image;
    }
    if switches.margin {
        out.margin = neg_log_sigmoid(c.z_margin);
        out.total += cfg.w_margin * out.margin;
    }
    Ok(out)
}

/// Evaluate the enabled terms and accumulate the gradient of the weighted
/// total into `grad` (flat policy layout). Returns the same breakdown as
/// `composite_loss`.
pub fn composite_loss_grad(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    prep: &PreparedSample,
    cfg: &LossConfig,
    switches: &LossSwitches,
    grad: &mut [f64],
) -> Result<LossBreakdown> {
    let out = composite_loss(policy, reference, prep, cfg, switches)?;
    let c = contrasts(policy, reference, prep, cfg);

    let norm_w = if cfg.length_normalized {
        1.0 / prep.chosen_len as f64
    } else {
        1.0
    };
    let norm_l = if cfg.length_normalized {
        1.0 / policy.candidates()[prep.rejected_idx].len().max(1) as f64
    } else {
        1.0
    };

    // d(-log sigmoid(z))/dz = -sigmoid(-z); chain through z = beta * (...).
    if switches.text {
        let coeff = -cfg.w_text * sigmoid(-c.z_text) * cfg.beta;
        policy.accumulate_log_prob_grad(&prep.features, prep.chosen_idx, coeff * norm_w, grad);
        policy.accumulate_log_prob_grad(&prep.features, prep.rejected_idx, -coeff * norm_l, grad);
    }
    if switches.image {
        let z = c.z_image.expect("checked by composite_loss");
        let coeff = -cfg.w_image * sigmoid(-z) * cfg.beta;
        let pert = prep.features_perturbed.as_ref().expect("checked");
        policy.accumulate_log_prob_grad(&prep.features, prep.chosen_idx, coeff * norm_w, grad);
        policy.accumulate_log_prob_grad(pert, prep.chosen_idx, -coeff * norm_w, grad);
    }
    if switches.margin {
        let coeff = -cfg.w_margin * sigmoid(-c.z_margin) * cfg.beta;
        policy.accumulate_log_prob_grad(&prep.features, prep.chosen_idx, coeff * norm_w, grad);
    }
    Ok(out)
}

const ALL_TERMS: LossSwitches = LossSwitches {
    text: true,
    image: true,
    margin: true,
};

/// DPO loss for an explicit (prompt, image, chosen, rejected) tuple.
pub fn dpo_loss(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    prompt: &crate::data::TokenSeq,
    image: &crate::data::ImageTensor,
    chosen: &crate::data::TokenSeq,
    rejected: &crate::data::TokenSeq,
    cfg: &LossConfig,
) -> Result<f64> {
    cfg.validate()?;
    let features = policy.input_features(prompt, image)?;
    let wi = policy.candidate_index(chosen)?;
    let li = policy.candidate_index(rejected)?;
    let norm_w = if cfg.length_normalized {
        1.0 / chosen.len().max(1) as f64
    } else {
        1.0
    };
    let norm_l = if cfg.length_normalized {
        1.0 / rejected.len().max(1) as f64
    } else {
        1.0
    };
    let z = cfg.beta
        * (log_ratio(policy, reference, &features, wi, norm_w)
            - log_ratio(policy, reference, &features, li, norm_l));
    Ok(neg_log_sigmoid(z))
}

/// Text preference loss of one sample: DPO on (prompt, image, y_w, y_l).
pub fn text_loss(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    sample: &PreferenceSample,
    cfg: &LossConfig,
) -> Result<f64> {
    dpo_loss(
        policy,
        reference,
        &sample.prompt,
        &sample.image,
        &sample.chosen,
        &sample.rejected,
        cfg,
    )
}

/// Image preference loss of one sample: the chosen response contrasted
/// under the original versus the perturbed image.
pub fn image_loss(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    sample: &PreferenceSample,
    cfg: &LossConfig,
) -> Result<f64> {
    cfg.validate()?;
    let prep = prepare(policy, sample)?;
    let only_image = LossSwitches {
        text: false,
        image: true,
        margin: false,
    };
    Ok(composite_loss(policy, reference, &prep, cfg, &only_image)?.image)
}

/// Margin loss of one sample: `-log sigmoid(beta * logratio(y_w) - eta)`.
pub fn margin_loss(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    sample: &PreferenceSample,
    cfg: &LossConfig,
) -> Result<f64> {
    cfg.validate()?;
    let prep = prepare(policy, sample)?;
    let only_margin = LossSwitches {
        text: false,
        image: false,
        margin: true,
    };
    Ok(composite_loss(policy, reference, &prep, cfg, &only_margin)?.margin)
}

/// Weighted total of the three losses plus the logged rewards.
pub fn total_loss(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    sample: &PreferenceSample,
    cfg: &LossConfig,
) -> Result<(f64, RewardReport)> {
    let prep = prepare(policy, sample)?;
    let out = composite_loss(policy, reference, &prep, cfg, &ALL_TERMS)?;
    Ok((out.total, out.rewards))
}

/// Gradient of `total_loss` with respect to the policy parameters.
pub fn total_loss_grad(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    sample: &PreferenceSample,
    cfg: &LossConfig,
) -> Result<Vec<f64>> {
    let prep = prepare(policy, sample)?;
    let mut grad = vec![0.0; policy.param_count()];
    composite_loss_grad(policy, reference, &prep, cfg, &ALL_TERMS, &mut grad)?;
    Ok(grad)
}

/// Arithmetic mean of `total_loss` over a batch.
pub fn mean_total_loss(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    samples: &[PreferenceSample],
    cfg: &LossConfig,
) -> Result<(f64, RewardReport)> {
    if samples.is_empty() {
        return Err(Error::param("samples", "empty batch"));
    }
    let mut loss = 0.0;
    let mut rewards = RewardReport::default();
    for s in samples {
        let (l, r) = total_loss(policy, reference, s, cfg)?;
        loss += l;
        rewards.chosen_text += r.chosen_text;
        rewards.rejected_text += r.rejected_text;
        rewards.chosen_image += r.chosen_image;
        rewards.rejected_image += r.rejected_image;
    }
    let inv = 1.0 / samples.len() as f64;
    Ok((
        loss * inv,
        RewardReport {
            chosen_text: rewards.chosen_text * inv,
            rejected_text: rewards.rejected_text * inv,
            chosen_image: rewards.chosen_image * inv,
            rejected_image: rewards.rejected_image * inv,
        },
    ))
}
