//! The preference sample: one prompt, a chosen/rejected response pair, an
//! image, and the artifacts later pipeline stages attach to it.

use serde::{Deserialize, Serialize};

use crate::data::image::{ImageTensor, RegionMask};
use crate::error::{Error, Result};

/// Token sequence: whitespace-split words, stored verbatim.
pub type TokenSeq = Vec<String>;

/// Curriculum difficulty bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    pub fn as_str(&self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }
}

impl std::str::FromStr for Difficulty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(Difficulty::Easy),
            "medium" => Ok(Difficulty::Medium),
            "hard" => Ok(Difficulty::Hard),
            other => Err(Error::param("difficulty", format!("unknown level `{other}`"))),
        }
    }
}

/// A ranked keyword attached to a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyword {
    pub word: String,
    pub score: f64,
}

/// One preference record.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceSample {
    pub id: String,
    pub prompt: TokenSeq,
    pub chosen: TokenSeq,
    pub rejected: TokenSeq,
    pub image: ImageTensor,
    pub perturbed_image: Option<ImageTensor>,
    pub keywords: Vec<Keyword>,
    pub masks: Vec<RegionMask>,
    pub entropy: Option<f64>,
    pub difficulty: Option<Difficulty>,
}

impl PreferenceSample {
    pub fn new(
        id: impl Into<String>,
        prompt: TokenSeq,
        chosen: TokenSeq,
        rejected: TokenSeq,
        image: ImageTensor,
    ) -> Result<Self> {
        let sample = Self {
            id: id.into(),
            prompt,
            chosen,
            rejected,
            image,
            perturbed_image: None,
            keywords: Vec::new(),
            masks: Vec::new(),
            entropy: None,
            difficulty: None,
        };
        sample.validate()?;
        Ok(sample)
    }

    /// Check every domain invariant, failing loudly with the sample id.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::InvalidSample {
            id: self.id.clone(),
            reason,
        };
        if self.id.is_empty() {
            return Err(fail("empty id".to_string()));
        }
        if self.chosen == self.rejected {
            return Err(fail("chosen and rejected responses are identical".to_string()));
        }
        if let Some(p) = &self.perturbed_image {
            if !p.same_dims(&self.image) {
                return Err(fail(format!(
                    "perturbed image dims {:?} do not match image dims {:?}",
                    p.dims(),
                    self.image.dims()
                )));
            }
        }
        if let Some(h) = self.entropy {
            if !h.is_finite() || h < 0.0 {
                return Err(fail(format!("entropy {h} must be finite and nonnegative")));
            }
        }
        if self.entropy.is_some() != self.difficulty.is_some() {
            return Err(fail(
                "entropy and difficulty must be present together".to_string(),
            ));
        }
        for m in &self.masks {
            if !m.matches_image(&self.image) {
                return Err(fail(format!(
                    "mask `{}` dims {}x{} do not match image",
                    m.keyword(),
                    m.height(),
                    m.width()
                )));
            }
        }
        Ok(())
    }

    /// Attach an entropy score and its difficulty bucket together, keeping
    /// the present-iff invariant.
    pub fn set_difficulty(&mut self, entropy: f64, difficulty: Difficulty) -> Result<()> {
        if !entropy.is_finite() || entropy < 0.0 {
            return Err(Error::InvalidSample {
                id: self.id.clone(),
                reason: format!("entropy {entropy} must be finite and nonnegative"),
            });
        }
        self.entropy = Some(entropy);
        self.difficulty = Some(difficulty);
        Ok(())
    }
}
