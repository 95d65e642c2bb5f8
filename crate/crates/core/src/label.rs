use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Speech source classes. `Synthetic` is the pooled class of the binary
/// scenario; the other three synthetic tags are the multi-class sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassLabel {
    Human,
    NaturalReader,
    SpikAI,
    Replica,
    Synthetic,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 5] = [
        ClassLabel::Human,
        ClassLabel::NaturalReader,
        ClassLabel::SpikAI,
        ClassLabel::Replica,
        ClassLabel::Synthetic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Human => "Human",
            ClassLabel::NaturalReader => "NaturalReader",
            ClassLabel::SpikAI => "SpikAI",
            ClassLabel::Replica => "Replica",
            ClassLabel::Synthetic => "Synthetic",
        }
    }

    /// Human vs. everything else.
    pub fn to_binary(self) -> ClassLabel {
        match self {
            ClassLabel::Human => ClassLabel::Human,
            _ => ClassLabel::Synthetic,
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown class label `{0}`")]
pub struct UnknownLabel(pub String);

impl FromStr for ClassLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        ClassLabel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(trimmed))
            .ok_or_else(|| UnknownLabel(trimmed.to_string()))
    }
}
