//! Entropy-scored curriculum: difficulty sorting and the easy-to-hard
//! phase schedule.
//!
//! Each sample's difficulty is the Shannon entropy of the policy's candidate
//! distribution given (prompt, image) — higher entropy, more uncertainty,
//! harder sample. The dataset is sorted ascending and split into tertiles;
//! training walks easy, medium, hard, optionally rescoring (and rebucketing)
//! between phases as the policy moves.

use std::collections::BTreeMap;

use crate::data::{Difficulty, PreferenceSample};
use crate::error::{Error, Result};
use crate::policy::ToyPolicy;

/// Shannon entropy (natural log) of a probability vector. `0 * log 0` is
/// treated as zero; the vector must sum to one within 1e-9.
pub fn entropy(p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::param("p", "empty probability vector"));
    }
    let mut sum = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        if !pi.is_finite() || pi < 0.0 {
            return Err(Error::param("p", format!("p[{i}] = {pi} is not a probability")));
        }
        sum += pi;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized { sum });
    }
    let mut h = 0.0;
    for &pi in p {
        if pi > 0.0 {
            h -= pi * pi.ln();
        }
    }
    // Rounding can leave a tiny negative result for near-one-hot inputs.
    Ok(h.max(0.0))
}

/// Entropy of the policy's candidate distribution for every sample.
pub fn score_dataset(policy: &ToyPolicy, samples: &[PreferenceSample]) -> Result<Vec<(String, f64)>> {
    samples
        .iter()
        .map(|s| {
            let feats = policy.input_features(&s.prompt, &s.image)?;
            let p: Vec<f64> = policy.log_probs(&feats).iter().map(|lp| lp.exp()).collect();
            Ok((s.id.clone(), entropy(&p)?))
        })
        .collect()
}

/// Entropy-ordered bucketing of a dataset into the three phases.
#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumPlan {
    /// `(id, entropy)` sorted ascending by entropy, ties by id.
    pub scored: Vec<(String, f64)>,
    pub buckets: BTreeMap<String, Difficulty>,
    pub phase_epochs: usize,
}

impl CurriculumPlan {
    /// Ids of one bucket, in sorted (entropy, id) order.
    pub fn bucket_ids(&self, phase: Difficulty) -> Vec<String> {
        self.scored
            .iter()
            .filter(|(id, _)| self.buckets.get(id) == Some(&phase))
            .map(|(id, _)| id.clone())
            .collect()
    }
}

/// Sort ascending by entropy (ties by id) and split into three tertiles,
/// remainder going to the earlier buckets: 10 samples split 4/3/3.
pub fn make_plan(scored: &[(String, f64)], phase_epochs: usize) -> Result<CurriculumPlan> {
    if scored.is_empty() {
        return Err(Error::param("scored", "empty dataset"));
    }
    if phase_epochs == 0 {
        return Err(Error::param("phase_epochs", "must be at least 1"));
    }
    for (id, h) in scored {
        if !h.is_finite() || *h < 0.0 {
            return Err(Error::InvalidSample {
                id: id.clone(),
                reason: format!("entropy {h} must be finite and nonnegative"),
            });
        }
    }
    let mut sorted = scored.to_vec();
    sorted.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .expect("entropies are finite")
            .then_with(|| a.0.cmp(&b.0))
    });

    let n = sorted.len();
    let base = n / 3;
    let rem = n % 3;
    let easy_end = base + usize::from(rem > 0);
    let medium_end = easy_end + base + usize::from(rem > 1);

    let mut buckets = BTreeMap::new();
    for (i, (id, _)) in sorted.iter().enumerate() {
        let d = if i < easy_end {
            Difficulty::Easy
        } else if i < medium_end {
            Difficulty::Medium
        } else {
            Difficulty::Hard
        };
        if buckets.insert(id.clone(), d).is_some() {
            return Err(Error::InvalidSample {
                id: id.clone(),
                reason: "duplicate id in scored dataset".to_string(),
            });
        }
    }
    Ok(CurriculumPlan {
        scored: sorted,
        buckets,
        phase_epochs,
    })
}

/// Attach entropy scores and bucket labels to the samples of a dataset.
pub fn annotate_dataset(samples: &mut [PreferenceSample], plan: &CurriculumPlan) -> Result<()> {
    let by_id: BTreeMap<&str, f64> = plan.scored.iter().map(|(id, h)| (id.as_str(), *h)).collect();
    for s in samples {
        let (h, d) = match (by_id.get(s.id.as_str()), plan.buckets.get(&s.id)) {
            (Some(&h), Some(&d)) => (h, d),
            _ => {
                return Err(Error::InvalidSample {
                    id: s.id.clone(),
                    reason: "sample missing from curriculum plan".to_string(),
                })
            }
        };
        s.set_difficulty(h, d)?;
    }
    Ok(())
}

/// Loss trajectory of one phase.
#[derive(Debug, Clone)]
pub struct PhaseSummary {
    pub phase: Difficulty,
    pub sample_ids: Vec<String>,
    pub losses: Vec<f64>,
}

/// Run the easy → medium → hard schedule. `train` receives each phase's
/// bucket ids and returns its loss trajectory. With `rescore` on, `rescorer`
/// supplies fresh `(id, entropy)` scores after each phase and the remaining
/// buckets are rebuilt from them, so membership can shift as the policy
/// learns.
pub fn iterate_phases<T, R>(
    plan: &CurriculumPlan,
    rescore: bool,
    mut train: T,
    mut rescorer: R,
) -> Result<Vec<PhaseSummary>>
where
    T: FnMut(Difficulty, &[String]) -> Result<Vec<f64>>,
    R: FnMut() -> Result<Vec<(String, f64)>>,
{
    let mut current = plan.clone();
    let mut summaries = Vec::with_capacity(3);
    for (i, phase) in Difficulty::ALL.into_iter().enumerate() {
        let ids = current.bucket_ids(phase);
        let losses = train(phase, &ids).map_err(|e| match e {
            Error::Divergence { epoch, step, .. } => Error::Divergence {
                phase: phase.as_str().to_string(),
                epoch,
                step,
            },
            other => other,
        })?;
        summaries.push(PhaseSummary {
            phase,
            sample_ids: ids,
            losses,
        });
        if rescore && i + 1 < Difficulty::ALL.len() {
            current = make_plan(&rescorer()?, plan.phase_epochs)?;
        }
    }
    Ok(summaries)
}
