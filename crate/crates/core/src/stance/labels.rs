use serde::{Deserialize, Serialize};
use std::fmt;

/// Five-way political stance label, ordered from left to right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StanceLabel {
    Left,
    LeanLeft,
    Center,
    LeanRight,
    Right,
}

impl StanceLabel {
    pub const ALL: [StanceLabel; 5] = [
        StanceLabel::Left,
        StanceLabel::LeanLeft,
        StanceLabel::Center,
        StanceLabel::LeanRight,
        StanceLabel::Right,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StanceLabel::Left => "left",
            StanceLabel::LeanLeft => "lean_left",
            StanceLabel::Center => "center",
            StanceLabel::LeanRight => "lean_right",
            StanceLabel::Right => "right",
        }
    }
}

impl fmt::Display for StanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Binary view over the five-way scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Conservative,
    Liberal,
}

impl Polarity {
    pub fn opposite(self) -> Self {
        match self {
            Polarity::Conservative => Polarity::Liberal,
            Polarity::Liberal => Polarity::Conservative,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Conservative => "conservative",
            Polarity::Liberal => "liberal",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Extremeness band of a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    High,
    Moderate,
    Low,
}

/// Lower edge of the high band (inclusive).
pub const HIGH_BAND_MIN: f64 = 0.95;
/// Lower edge of the moderate band (inclusive); the band is `[0.80, 0.95)`.
pub const MODERATE_BAND_MIN: f64 = 0.80;

impl Band {
    pub fn of(extremeness: f64) -> Band {
        if extremeness >= HIGH_BAND_MIN {
            Band::High
        } else if extremeness >= MODERATE_BAND_MIN {
            Band::Moderate
        } else {
            Band::Low
        }
    }
}

/// Probability distribution over [`StanceLabel::ALL`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StanceDistribution {
    pub p: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistributionError {
    #[error("probability {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
}

impl StanceDistribution {
    pub fn new(p: [f64; 5]) -> Result<Self, DistributionError> {
        for (index, &value) in p.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(DistributionError::OutOfRange { index, value });
            }
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(DistributionError::NotNormalized(total));
        }
        Ok(Self { p })
    }

    pub fn uniform() -> Self {
        Self { p: [0.2; 5] }
    }

    /// Distribution from raw logits via softmax.
    pub fn from_logits(logits: &[f64]) -> Self {
        assert_eq!(logits.len(), 5, "stance head has exactly five classes");
        let probs = crate::linalg::softmax(logits);
        let mut p = [0.0; 5];
        p.copy_from_slice(&probs);
        Self { p }
    }

    pub fn argmax(&self) -> StanceLabel {
        StanceLabel::ALL[crate::linalg::argmax(&self.p)]
    }

    pub fn prob(&self, label: StanceLabel) -> f64 {
        self.p[label.index()]
    }
}

/// Polarity and strength of a five-way distribution.
///
/// `s = (p_right + p_lean_right) − (p_left + p_lean_left)`; conservative iff
/// `s > 0`, so an exact tie (including a pure `center` prediction) is liberal.
pub fn binary_stance(dist: &StanceDistribution) -> (Polarity, f64) {
    let p = &dist.p;
    let s = (p[4] + p[3]) - (p[0] + p[1]);
    let polarity = if s > 0.0 {
        Polarity::Conservative
    } else {
        Polarity::Liberal
    };
    (polarity, s.abs().min(1.0))
}

/// Extremeness is the probability of the predicted class.
pub fn extremeness(dist: &StanceDistribution) -> f64 {
    dist.p.iter().copied().fold(0.0, f64::max)
}

pub fn band(dist: &StanceDistribution) -> Band {
    Band::of(extremeness(dist))
}
